use super::ast::*;
use super::CompileError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Punct(&'static str),
    Eof,
}

const PUNCT: [&str; 27] = [
    "..", "<=", ">=", "==", "!=", "&&", "||", "(", ")", "{", "}", "[", "]", ",", ";", "=", "+", "-", "*", "/", "<",
    ">", "!", "&", "|", "^", ":",
];

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, CompileError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() {
            if c == '0' && matches!(chars.get(i + 1), Some('x' | 'X')) {
                i += 2;
                while i < chars.len() && (chars[i].is_ascii_hexdigit() || chars[i] == '_') {
                    i += 1;
                }
                let digits: String = chars[start + 2..i].iter().filter(|c| **c != '_').collect();
                let v = u64::from_str_radix(&digits, 16)
                    .map_err(|_| CompileError::at(pos, format!("bad hex literal `{}`", chars[start..i].iter().collect::<String>())))?;
                out.push((Tok::Int(v as i64), pos));
            } else {
                let mut float = false;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') && chars.get(i + 1) != Some(&'.') {
                    float = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
                        float = true;
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                if float {
                    let v = text.parse().map_err(|_| CompileError::at(pos, format!("bad number `{text}`")))?;
                    out.push((Tok::Float(v), pos));
                } else {
                    let v = text.parse().map_err(|_| CompileError::at(pos, format!("integer `{text}` out of range")))?;
                    out.push((Tok::Int(v), pos));
                }
            }
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let p = PUNCT
                .iter()
                .find(|p| rest.starts_with(**p))
                .ok_or_else(|| CompileError::at(pos, format!("unexpected character `{c}`")))?;
            i += p.len();
            out.push((Tok::Punct(p), pos));
        }
        col += i - start;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

fn type_keyword(s: &str) -> Option<Ty> {
    match s {
        "f64" => Some(Ty::F64),
        "f32" => Some(Ty::F32),
        "i64" => Some(Ty::I64),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, CompileError> {
        Err(CompileError::at(self.pos(), msg))
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), CompileError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, CompileError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn int_literal(&mut self) -> Result<i64, CompileError> {
        let neg = self.eat("-");
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { v.wrapping_neg() } else { v })
            }
            _ => self.err(format!("expected integer, found {}", self.describe())),
        }
    }

    fn program(&mut self) -> Result<SourceProgram, CompileError> {
        let mut prog = SourceProgram::default();
        if self.is_word("use") {
            self.bump();
            let what = self.ident()?;
            if what != "sse" {
                return self.err(format!("unknown option `{what}`"));
            }
            self.expect(";")?;
            prog.sse = true;
        }
        while *self.peek() != Tok::Eof {
            prog.stmts.push(self.stmt()?);
        }
        Ok(prog)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, CompileError> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.is("}") {
            if *self.peek() == Tok::Eof {
                return self.err("unterminated block");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn lvalue(&mut self) -> Result<LValue, CompileError> {
        let name = self.ident()?;
        if self.eat("[") {
            let idx = self.expr()?;
            self.expect("]")?;
            Ok(LValue::Elem(name, Box::new(idx)))
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn stmt(&mut self) -> Result<Stmt, CompileError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Punct("{") => StmtKind::Block(self.block()?),
            Tok::Ident(w) => match w.as_str() {
                t if type_keyword(t).is_some() => {
                    self.bump();
                    let ty = type_keyword(t).unwrap();
                    let name = self.ident()?;
                    let len = if self.eat("[") {
                        let n = self.int_literal()?;
                        self.expect("]")?;
                        if n <= 0 {
                            return Err(CompileError::at(pos, "array length must be positive"));
                        }
                        Some(n as usize)
                    } else {
                        None
                    };
                    let init = if self.eat("=") { Some(self.expr()?) } else { None };
                    self.expect(";")?;
                    StmtKind::Decl { ty, name, len, init }
                }
                "if" => return self.if_stmt(),
                "while" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    StmtKind::While { cond, body: self.block()? }
                }
                "for" => {
                    self.bump();
                    let var = self.ident()?;
                    if !self.is_word("in") {
                        return self.err("expected `in`");
                    }
                    self.bump();
                    let lo = self.int_literal()?;
                    self.expect("..")?;
                    let hi = self.int_literal()?;
                    StmtKind::For { var, lo, hi, body: self.block()? }
                }
                "print" | "output" => {
                    self.bump();
                    self.expect("(")?;
                    let e = self.expr()?;
                    self.expect(")")?;
                    self.expect(";")?;
                    if w == "print" {
                        StmtKind::Print(e)
                    } else {
                        StmtKind::Output(e)
                    }
                }
                "dg_set_dot" => {
                    self.bump();
                    self.expect("(")?;
                    let target = self.lvalue()?;
                    self.expect(",")?;
                    let dot = self.expr()?;
                    self.expect(")")?;
                    self.expect(";")?;
                    StmtKind::SetDot { target, dot }
                }
                _ => {
                    let target = self.lvalue()?;
                    self.expect("=")?;
                    let value = self.expr()?;
                    self.expect(";")?;
                    StmtKind::Assign { target, value }
                }
            },
            _ => return self.err(format!("expected statement, found {}", self.describe())),
        };
        Ok(Stmt { kind, pos })
    }

    fn if_stmt(&mut self) -> Result<Stmt, CompileError> {
        let pos = self.pos();
        self.bump();
        self.expect("(")?;
        let cond = self.expr()?;
        self.expect(")")?;
        let then = self.block()?;
        let els = if self.is_word("else") {
            self.bump();
            if self.is_word("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { cond, then, els }, pos })
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, CompileError> {
        const LEVELS: [&[(&str, BinOp)]; 8] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("|", BinOp::BitOr)],
            &[("^", BinOp::BitXor)],
            &[("&", BinOp::BitAnd)],
            &[("<=", BinOp::Le), (">=", BinOp::Ge), ("==", BinOp::Eq), ("!=", BinOp::Ne), ("<", BinOp::Lt), (">", BinOp::Gt)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let Some(&(_, op)) = LEVELS[level].iter().find(|(p, _)| self.is(p)) else {
                return Ok(lhs);
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos };
            // Comparisons do not chain.
            if level == 5 && LEVELS[level].iter().any(|(p, _)| self.is(p)) {
                return self.err("comparison operators do not chain");
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        let pos = self.pos();
        if self.eat("-") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Neg(Box::new(e)), pos });
        }
        if self.eat("!") {
            let e = self.unary()?;
            return Ok(Expr { kind: ExprKind::Not(Box::new(e)), pos });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, CompileError> {
        let pos = self.pos();
        if matches!(self.peek(), Tok::Eof | Tok::Punct(_)) && !self.is("(") {
            return self.err(format!("expected expression, found {}", self.describe()));
        }
        let kind = match self.bump() {
            Tok::Int(v) => ExprKind::Num { value: v as f64, int_syntax: true },
            Tok::Float(v) => ExprKind::Num { value: v, int_syntax: false },
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Tok::Ident(name) => {
                if self.eat("(") {
                    let mut args = Vec::new();
                    if !self.is(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    ExprKind::Call(name, args)
                } else if self.eat("[") {
                    let idx = self.expr()?;
                    self.expect("]")?;
                    ExprKind::Index(name, Box::new(idx))
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => unreachable!("checked above"),
        };
        let e = Expr { kind, pos };
        // Integer literals keep their exact value alongside the float view.
        if let (ExprKind::Num { int_syntax: true, .. }, Tok::Int(v)) = (&e.kind, &self.toks[self.i - 1].0) {
            if (*v as f64) as i64 != *v || v.unsigned_abs() > (1u64 << 53) {
                return Ok(Expr { kind: ExprKind::Int(*v), pos });
            }
        }
        Ok(e)
    }
}

pub fn parse(src: &str) -> Result<SourceProgram, CompileError> {
    let toks = lex(src)?;
    Parser { toks, i: 0 }.program()
}
