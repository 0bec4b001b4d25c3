//! Parser for the textual IR assembly format.
//!
//! The format is line oriented: one header or statement per line, `#` starts
//! a comment. See `docs/ir-format.md` for the grammar.

use thiserror::Error;

use super::validate::{validate_block, DiagnosticKind, GUEST_STATE_SIZE};
use super::{Const, DataSegment, Expr, IrType, Opcode, OutputSlot, Program, Stmt, Superblock, Tmp};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("double assignment of temporary t{0}")]
    DoubleAssignment(Tmp),
    #[error("reference to unassigned temporary t{0}")]
    DanglingTmp(Tmp),
    #[error("{0}")]
    Type(String),
    #[error("duplicate superblock {0:#x}")]
    DuplicateBlock(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    LParen,
    RParen,
    Comma,
    Colon,
    ColonColon,
    Arrow,
    Eq,
}

struct Lexer<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    text: &'a str,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, col, kind: ParseErrorKind::Syntax(msg.into()) }
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, line: usize) -> Result<Self, ParseError> {
        let bytes = text.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            match c {
                b' ' | b'\t' | b'\r' => i += 1,
                b'(' => {
                    toks.push((Tok::LParen, col));
                    i += 1
                }
                b')' => {
                    toks.push((Tok::RParen, col));
                    i += 1
                }
                b',' => {
                    toks.push((Tok::Comma, col));
                    i += 1
                }
                b'=' => {
                    toks.push((Tok::Eq, col));
                    i += 1
                }
                b':' if bytes.get(i + 1) == Some(&b':') => {
                    toks.push((Tok::ColonColon, col));
                    i += 2
                }
                b':' => {
                    toks.push((Tok::Colon, col));
                    i += 1
                }
                b'-' if bytes.get(i + 1) == Some(&b'>') => {
                    toks.push((Tok::Arrow, col));
                    i += 2
                }
                c if c.is_ascii_alphanumeric() || c == b'_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    toks.push((Tok::Word(text[start..i].to_string()), col));
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(syntax(line, col, format!("unexpected character {ch:?}")));
                }
            }
        }
        Ok(Lexer { toks, pos: 0, line, text })
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.text.len() + 1)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        syntax(self.line, self.col(), msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.err(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn word(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            other => Err(self.err(format!("expected a word, found {other:?}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let col = self.col();
        let w = self.word()?;
        if w == kw {
            Ok(())
        } else {
            Err(syntax(self.line, col, format!("expected `{kw}`, found `{w}`")))
        }
    }

    fn at_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == kw)
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("trailing input {t:?}"))),
        }
    }

    fn number(&mut self) -> Result<u128, ParseError> {
        let col = self.col();
        let w = self.word()?;
        parse_number(&w).ok_or_else(|| syntax(self.line, col, format!("bad number `{w}`")))
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        let col = self.col();
        let n = self.number()?;
        u64::try_from(n).map_err(|_| syntax(self.line, col, "number exceeds 64 bits"))
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        let col = self.col();
        let n = self.number()?;
        u32::try_from(n).map_err(|_| syntax(self.line, col, "number exceeds 32 bits"))
    }

    fn ty(&mut self) -> Result<IrType, ParseError> {
        let col = self.col();
        let w = self.word()?;
        IrType::from_name(&w).ok_or_else(|| syntax(self.line, col, format!("unknown type `{w}`")))
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => return Ok(out),
                other => {
                    self.pos -= 1;
                    return Err(self.err(format!("expected `,` or `)`, found {other:?}")));
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        let w = self.word()?;
        if let Some(t) = tmp_index(&w) {
            return Ok(Expr::RdTmp(t));
        }
        match w.as_str() {
            "GET" => {
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::LParen)?;
                let offset = self.u32()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Get { offset, ty })
            }
            "LDle" => {
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::LParen)?;
                let addr = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::load(addr, ty))
            }
            "ITE" => {
                let mut a = self.args()?;
                if a.len() != 3 {
                    return Err(syntax(self.line, col, "ITE takes three operands"));
                }
                let els = a.pop().unwrap();
                let then = a.pop().unwrap();
                let cond = a.pop().unwrap();
                Ok(Expr::ite(cond, then, els))
            }
            "CCALL" => {
                let name = self.word()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                let args = self.args()?;
                Ok(Expr::CCall { name, args, ty })
            }
            _ if w.starts_with("0x") || w.chars().all(|c| c.is_ascii_digit()) => {
                if self.peek() != Some(&Tok::Colon) {
                    return Err(self.err("constant needs a `:type` suffix"));
                }
                self.pos += 1;
                let ty = self.ty()?;
                let bits = parse_number(&w).ok_or_else(|| syntax(self.line, col, format!("bad literal `{w}`")))?;
                if bits & !ty.mask() != 0 {
                    return Err(syntax(self.line, col, format!("literal `{w}` does not fit {ty}")));
                }
                Ok(Expr::Const(Const::new(ty, bits)))
            }
            _ => {
                let op = if self.peek() == Some(&Tok::Colon) {
                    self.pos += 1;
                    let ty = self.ty()?;
                    match Opcode::from_name(&w) {
                        Some(op) if op.result_type() == ty => op,
                        Some(_) => {
                            return Err(syntax(self.line, col, format!("`{w}` does not produce {ty}")));
                        }
                        None => Opcode::Unknown(w, ty),
                    }
                } else {
                    Opcode::from_name(&w).ok_or_else(|| {
                        syntax(self.line, col, format!("unknown opcode `{w}` (annotate as `{w}:<type>`)"))
                    })?
                };
                let args = self.args()?;
                Ok(Expr::Op { op, args })
            }
        }
    }
}

fn parse_number(w: &str) -> Option<u128> {
    if let Some(hex) = w.strip_prefix("0x").or_else(|| w.strip_prefix("0X")) {
        u128::from_str_radix(hex, 16).ok()
    } else {
        w.parse().ok()
    }
}

fn tmp_index(w: &str) -> Option<Tmp> {
    let digits = w.strip_prefix('t')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn parse_stmt(lx: &mut Lexer<'_>) -> Result<Stmt, ParseError> {
    let first = match lx.peek() {
        Some(Tok::Word(w)) => w.clone(),
        other => return Err(lx.err(format!("expected a statement, found {other:?}"))),
    };
    if let Some(t) = tmp_index(&first) {
        if lx.peek2() == Some(&Tok::Eq) {
            lx.pos += 2;
            if lx.at_word("CASle") {
                lx.pos += 1;
                lx.expect(Tok::LParen)?;
                let addr = lx.expr()?;
                lx.expect(Tok::ColonColon)?;
                let expected = lx.expr()?;
                lx.expect(Tok::Arrow)?;
                let new = lx.expr()?;
                lx.expect(Tok::RParen)?;
                return Ok(Stmt::Cas { old: t, addr, expected, new });
            }
            if lx.at_word("DIRTY") {
                lx.pos += 1;
                let name = lx.word()?;
                let args = lx.args()?;
                return Ok(Stmt::Dirty { name, args, dst: Some(t) });
            }
            let expr = lx.expr()?;
            return Ok(Stmt::WrTmp { tmp: t, expr });
        }
    }
    lx.pos += 1;
    match first.as_str() {
        "PUT" => {
            lx.expect(Tok::LParen)?;
            let offset = lx.u32()?;
            lx.expect(Tok::RParen)?;
            lx.expect(Tok::Eq)?;
            Ok(Stmt::Put { offset, expr: lx.expr()? })
        }
        "STle" => {
            lx.expect(Tok::LParen)?;
            let addr = lx.expr()?;
            lx.expect(Tok::RParen)?;
            lx.expect(Tok::Eq)?;
            Ok(Stmt::Store { addr, data: lx.expr()? })
        }
        "if" => {
            lx.expect(Tok::LParen)?;
            let guard = lx.expr()?;
            lx.expect(Tok::RParen)?;
            if lx.at_word("goto") {
                lx.pos += 1;
                return Ok(Stmt::Exit { guard, target: lx.u64()? });
            }
            lx.keyword("STle")?;
            lx.expect(Tok::LParen)?;
            let addr = lx.expr()?;
            lx.expect(Tok::RParen)?;
            lx.expect(Tok::Eq)?;
            Ok(Stmt::StoreG { guard, addr, data: lx.expr()? })
        }
        "goto" => Ok(Stmt::goto(lx.u64()?)),
        "DIRTY" => {
            let name = lx.word()?;
            let args = lx.args()?;
            Ok(Stmt::Dirty { name, args, dst: None })
        }
        "IMark" => {
            lx.expect(Tok::LParen)?;
            let addr = lx.u64()?;
            lx.expect(Tok::Comma)?;
            let len = lx.u32()?;
            // VEX prints a third "delta" field; accepted and dropped.
            if lx.peek() == Some(&Tok::Comma) {
                lx.pos += 1;
                lx.u64()?;
            }
            lx.expect(Tok::RParen)?;
            Ok(Stmt::IMark { addr, len })
        }
        "Halt" => Ok(Stmt::Halt),
        other => {
            lx.pos -= 1;
            Err(lx.err(format!("unknown statement `{other}`")))
        }
    }
}

/// Parses IR assembly into a [`Program`].
///
/// In-block errors (double assignment, reads of unassigned temporaries,
/// operand type mismatches) are reported with the line of the offending
/// statement. Exit targets are not resolved here; use
/// [`validate`](super::validate) for whole-program checks.
pub fn parse_asm(text: &str) -> Result<Program, ParseError> {
    let mut entry: Option<u64> = None;
    let mut program = Program::new(0);
    let mut current: Option<(Superblock, Vec<usize>, usize)> = None;

    let finish = |cur: Option<(Superblock, Vec<usize>, usize)>, program: &mut Program| -> Result<Option<u64>, ParseError> {
        let Some((sb, lines, header_line)) = cur else { return Ok(None) };
        check_block(&sb, &lines, header_line)?;
        let addr = sb.addr;
        if program.blocks.insert(addr, sb).is_some() {
            return Err(ParseError { line: header_line, col: 1, kind: ParseErrorKind::DuplicateBlock(addr) });
        }
        Ok(Some(addr))
    };

    let mut first_block: Option<u64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim().trim_matches('-').trim();
        if trimmed.is_empty() {
            continue;
        }
        let offset = content.find(trimmed).unwrap_or(0);
        let mut lx = Lexer::new(trimmed, line).map_err(|mut e| {
            e.col += offset;
            e
        })?;
        let shift = |mut e: ParseError| {
            e.col += offset;
            e
        };
        match lx.peek() {
            Some(Tok::Word(w)) if w == "sb" => {
                lx.pos += 1;
                let addr = lx.u64().map_err(shift)?;
                lx.keyword("tmps").map_err(shift)?;
                lx.expect(Tok::Colon).map_err(shift)?;
                let mut sb = Superblock::new(addr);
                while lx.peek().is_some() {
                    sb.tmp_types.push(lx.ty().map_err(shift)?);
                }
                if let Some(a) = finish(current.take(), &mut program)? {
                    first_block.get_or_insert(a);
                }
                current = Some((sb, Vec::new(), line));
            }
            Some(Tok::Word(w)) if w == "entry" && current.is_none() => {
                lx.pos += 1;
                entry = Some(lx.u64().map_err(shift)?);
                lx.end().map_err(shift)?;
            }
            Some(Tok::Word(w)) if w == "output" && current.is_none() => {
                lx.pos += 1;
                let name = lx.word().map_err(shift)?;
                let addr = lx.u64().map_err(shift)?;
                let ty = lx.ty().map_err(shift)?;
                lx.end().map_err(shift)?;
                program.outputs.push(OutputSlot { name, addr, ty });
            }
            Some(Tok::Word(w)) if w == "data" && current.is_none() => {
                lx.pos += 1;
                let addr = lx.u64().map_err(shift)?;
                let col = lx.col() + offset;
                let hex = lx.word().map_err(shift)?;
                lx.end().map_err(shift)?;
                let bytes = decode_hex(&hex).ok_or_else(|| syntax(line, col, "data bytes must be an even-length hex string"))?;
                program.data.push(DataSegment { addr, bytes });
            }
            _ => {
                let Some((sb, lines, _)) = current.as_mut() else {
                    return Err(syntax(line, offset + 1, "statement outside of a superblock"));
                };
                let stmt = parse_stmt(&mut lx).map_err(shift)?;
                lx.end().map_err(shift)?;
                sb.stmts.push(stmt);
                lines.push(line);
            }
        }
    }
    if let Some(a) = finish(current.take(), &mut program)? {
        first_block.get_or_insert(a);
    }
    program.entry = entry.or(first_block).unwrap_or(0);
    Ok(program)
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 || !s.is_ascii() {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok()).collect()
}

fn check_block(sb: &Superblock, lines: &[usize], header_line: usize) -> Result<(), ParseError> {
    // Guest offsets and terminators are whole-program concerns; only the
    // single-assignment and typing rules are parse errors.
    for d in validate_block(sb, u32::MAX.min(GUEST_STATE_SIZE * 3)) {
        let line = d.stmt.and_then(|i| lines.get(i).copied()).unwrap_or(header_line);
        let kind = match d.kind {
            DiagnosticKind::DoubleAssignment(t) => ParseErrorKind::DoubleAssignment(t),
            DiagnosticKind::UndefinedTemp(t) => ParseErrorKind::DanglingTmp(t),
            k @ (DiagnosticKind::TypeMismatch { .. }
            | DiagnosticKind::Arity { .. }
            | DiagnosticKind::UndeclaredTemp(_)) => ParseErrorKind::Type(k.to_string()),
            _ => continue,
        };
        return Err(ParseError { line, col: 1, kind });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADD_BLOCK: &str = "\
sb 0x24f275 tmps: I32 I32 I32 I32
------ IMark(0x24F275, 7, 0) ------
t3 = GET:I32(0)    # get %eax
t2 = GET:I32(12)   # get %ebx
t1 = Add32(t3,t2)  # addl
PUT(0) = t1        # put %eax
Halt
";

    #[test]
    fn parses_add_statement() {
        let p = parse_asm(ADD_BLOCK).unwrap();
        let sb = &p.blocks[&0x24f275];
        assert_eq!(
            sb.stmts[3],
            Stmt::WrTmp { tmp: 1, expr: Expr::op2(Opcode::Add32, Expr::RdTmp(3), Expr::RdTmp(2)) }
        );
        assert_eq!(p.entry, 0x24f275);
    }

    #[test]
    fn round_trip_is_stable() {
        let p = parse_asm(ADD_BLOCK).unwrap();
        let once = p.to_string();
        let twice = parse_asm(&once).unwrap().to_string();
        assert_eq!(once, twice);
        assert_eq!(parse_asm(&once).unwrap(), p);
    }

    #[test]
    fn double_assignment_is_an_error() {
        let src = "sb 0x10 tmps: I64\nIMark(0x10, 1)\nt0 = 0x1:I64\nt0 = 0x2:I64\nHalt\n";
        let e = parse_asm(src).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DoubleAssignment(0));
        assert_eq!(e.line, 4);
    }

    #[test]
    fn dangling_tmp_is_an_error() {
        let src = "sb 0x10 tmps: I64 I64\nIMark(0x10, 1)\nt0 = Add64(t1,t1)\nHalt\n";
        assert_eq!(parse_asm(src).unwrap_err().kind, ParseErrorKind::DanglingTmp(1));
    }

    #[test]
    fn operand_type_mismatch_is_an_error() {
        let src = "sb 0x10 tmps: F64\nIMark(0x10, 1)\nt0 = AddF64(0x1:I64,0x2:F64)\nHalt\n";
        assert!(matches!(parse_asm(src).unwrap_err().kind, ParseErrorKind::Type(_)));
    }

    #[test]
    fn syntax_error_reports_column() {
        let e = parse_asm("sb 0x10 tmps:\n  PUT(0) = $\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 12));
    }

    #[test]
    fn unknown_opcodes_need_a_type() {
        assert!(parse_asm("sb 0x10 tmps: F64\nIMark(0x10,1)\nt0 = SinF64(0x0:F64)\nHalt\n").is_err());
        let p = parse_asm("sb 0x10 tmps: F64\nIMark(0x10,1)\nt0 = SinF64:F64(0x0:F64)\nHalt\n").unwrap();
        let printed = p.to_string();
        assert!(printed.contains("SinF64:F64(0x0:F64)"));
        assert_eq!(parse_asm(&printed).unwrap(), p);
    }

    #[test]
    fn headers_and_all_statement_forms() {
        let src = "\
entry 0x100
output y 0x2000 F64
data 0x3000 000000000000f03f
sb 0x100 tmps: I64 F64 I1 I64 F64
IMark(0x100, 4)
t0 = 0x2000:I64
t1 = LDle:F64(t0)
t2 = CmpEQ64(t0,0x2000:I64)
STle(t0) = t1
if (t2) STle(t0) = t1
t3 = CASle(t0 :: 0x0:I64 -> 0x1:I64)
t4 = DIRTY x87_load80(t0)
DIRTY print_f64(ITE(t2,t1,t4))
PUT(8) = CCALL helper:I64(t0)
if (t2) goto 0x200
goto 0x100
sb 0x200 tmps:
Halt
";
        let p = parse_asm(src).unwrap();
        assert_eq!(p.entry, 0x100);
        assert_eq!(p.outputs.len(), 1);
        assert_eq!(p.data[0].bytes, vec![0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
        assert_eq!(parse_asm(&p.to_string()).unwrap(), p);
    }
}
