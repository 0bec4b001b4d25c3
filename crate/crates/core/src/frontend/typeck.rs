use std::collections::HashMap;

use super::ast::*;
use super::CompileError;
use crate::instrument::BitOp;
use crate::mathwrap::MathFn;

pub(crate) const RESERVED: &[&str] = &[
    "f64", "f32", "i64", "if", "else", "while", "for", "in", "print", "output", "use", "input", "abs", "sqrt", "select",
    "softsin", "bits_and64", "bits_or64", "bits_xor64", "to_bits", "from_bits", "dg_get_dot", "dg_set_dot",
];

struct Checker {
    vars: Vec<VarInfo>,
    by_name: HashMap<String, VarId>,
    /// Index ranges of the loop counters currently in scope.
    loop_ranges: HashMap<VarId, (i128, i128)>,
    loop_vars: Vec<VarId>,
    outputs: Vec<(String, Ty)>,
    n_inputs: usize,
    uses_softsin: bool,
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, CompileError> {
    Err(CompileError::at(pos, msg))
}

fn is_literal(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Num { .. } | ExprKind::Int(_) => true,
        ExprKind::Neg(inner) => is_literal(inner),
        _ => false,
    }
}

fn literal(value: f64, exact: Option<i64>, int_syntax: bool, hint: Option<Ty>, pos: Pos) -> Result<TExpr, CompileError> {
    Ok(match hint {
        Some(Ty::F32) => TExpr::F32(exact.map_or(value, |v| v as f64) as f32),
        Some(Ty::I64) if int_syntax => TExpr::I64(exact.unwrap_or(value as i64)),
        Some(Ty::I64) => return err(pos, "float literal where i64 is expected"),
        None if int_syntax => TExpr::I64(exact.unwrap_or(value as i64)),
        _ => TExpr::F64(exact.map_or(value, |v| v as f64)),
    })
}

impl Checker {
    fn declare(&mut self, name: &str, ty: Ty, len: Option<usize>, pos: Pos) -> Result<VarId, CompileError> {
        if RESERVED.contains(&name) || MathFn::from_name(name).is_some() {
            return err(pos, format!("`{name}` is a reserved name"));
        }
        if self.by_name.contains_key(name) {
            return err(pos, format!("`{name}` is already declared"));
        }
        let id = self.vars.len();
        self.vars.push(VarInfo { name: name.to_string(), ty, len });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    fn lookup(&self, name: &str, pos: Pos) -> Result<VarId, CompileError> {
        self.by_name.get(name).copied().ok_or_else(|| CompileError::at(pos, format!("undeclared variable `{name}`")))
    }

    fn range(&self, e: &TExpr) -> Option<(i128, i128)> {
        match e {
            TExpr::I64(v) => Some((*v as i128, *v as i128)),
            TExpr::Read(Place::Var(id), _) => self.loop_ranges.get(id).copied(),
            TExpr::Int(op, a, b) => {
                let (a0, a1) = self.range(a)?;
                let (b0, b1) = self.range(b)?;
                Some(match op {
                    IntOp::Add => (a0 + b0, a1 + b1),
                    IntOp::Sub => (a0 - b1, a1 - b0),
                    IntOp::Mul => {
                        let c = [a0 * b0, a0 * b1, a1 * b0, a1 * b1];
                        (*c.iter().min().unwrap(), *c.iter().max().unwrap())
                    }
                })
            }
            TExpr::IntBits(BitOp::And, a, b) => match (a.as_ref(), b.as_ref()) {
                (TExpr::I64(m), _) | (_, TExpr::I64(m)) if *m >= 0 => Some((0, *m as i128)),
                _ => None,
            },
            _ => None,
        }
    }

    fn place(&mut self, target: &LValue, pos: Pos) -> Result<(Place, Ty), CompileError> {
        match target {
            LValue::Var(name) => {
                let id = self.lookup(name, pos)?;
                if self.vars[id].len.is_some() {
                    return err(pos, format!("array `{name}` used as a scalar"));
                }
                Ok((Place::Var(id), self.vars[id].ty))
            }
            LValue::Elem(name, idx) => {
                let id = self.lookup(name, pos)?;
                let Some(len) = self.vars[id].len else {
                    return err(pos, format!("`{name}` is not an array"));
                };
                let i = self.expr(idx, Some(Ty::I64))?;
                if i.ty() != Ty::I64 {
                    return err(idx.pos, format!("array index must be i64, found {}", i.ty().name()));
                }
                match self.range(&i) {
                    Some((lo, hi)) if lo >= 0 && hi < len as i128 => {}
                    Some((lo, hi)) if hi < lo => {}
                    Some(_) => return err(idx.pos, format!("index out of bounds for `{name}[{len}]`")),
                    None => return err(idx.pos, format!("index into `{name}[{len}]` is not provably in bounds")),
                }
                Ok((Place::Elem(id, Box::new(i)), self.vars[id].ty))
            }
        }
    }

    fn same_type(&self, pos: Pos, a: &TExpr, b: &TExpr) -> Result<Ty, CompileError> {
        if a.ty() != b.ty() {
            return err(pos, format!("mismatched operand types {} and {}", a.ty().name(), b.ty().name()));
        }
        Ok(a.ty())
    }

    /// Types both operands, letting a literal take its type from the other side.
    fn operands(&mut self, l: &Expr, r: &Expr, hint: Option<Ty>) -> Result<(TExpr, TExpr), CompileError> {
        if is_literal(l) && !is_literal(r) {
            let tr = self.expr(r, hint)?;
            let tl = self.expr(l, Some(tr.ty()))?;
            Ok((tl, tr))
        } else {
            let tl = self.expr(l, hint)?;
            let tr = self.expr(r, Some(tl.ty()))?;
            Ok((tl, tr))
        }
    }

    fn float_arg(&mut self, e: &Expr, hint: Option<Ty>, what: &str) -> Result<(FTy, TExpr), CompileError> {
        let t = self.expr(e, hint.or(Some(Ty::F64)))?;
        match t.ty() {
            Ty::F64 => Ok((FTy::F64, t)),
            Ty::F32 => Ok((FTy::F32, t)),
            other => err(e.pos, format!("{what} expects a float, found {}", other.name())),
        }
    }

    fn want(&mut self, e: &Expr, ty: Ty, what: &str) -> Result<TExpr, CompileError> {
        let t = self.expr(e, Some(ty))?;
        if t.ty() != ty {
            return err(e.pos, format!("{what} expects {}, found {}", ty.name(), t.ty().name()));
        }
        Ok(t)
    }

    fn expr(&mut self, e: &Expr, hint: Option<Ty>) -> Result<TExpr, CompileError> {
        let pos = e.pos;
        Ok(match &e.kind {
            ExprKind::Num { value, int_syntax } => literal(*value, None, *int_syntax, hint, pos)?,
            ExprKind::Int(v) => literal(*v as f64, Some(*v), true, hint, pos)?,
            ExprKind::Var(name) => {
                let (p, ty) = self.place(&LValue::Var(name.clone()), pos)?;
                TExpr::Read(p, ty)
            }
            ExprKind::Index(name, idx) => {
                let (p, ty) = self.place(&LValue::Elem(name.clone(), idx.clone()), pos)?;
                TExpr::Read(p, ty)
            }
            ExprKind::Neg(inner) => {
                let t = self.expr(inner, hint)?;
                match t {
                    TExpr::F64(v) => TExpr::F64(-v),
                    TExpr::F32(v) => TExpr::F32(-v),
                    TExpr::I64(v) if is_literal(inner) => TExpr::I64(v.wrapping_neg()),
                    t => match t.ty() {
                        Ty::F64 => TExpr::Neg(FTy::F64, Box::new(t)),
                        Ty::F32 => TExpr::Neg(FTy::F32, Box::new(t)),
                        Ty::I64 => TExpr::Int(IntOp::Sub, Box::new(TExpr::I64(0)), Box::new(t)),
                        Ty::Bool => return err(pos, "cannot negate a bool"),
                    },
                }
            }
            ExprKind::Not(inner) => TExpr::Not(Box::new(self.want(inner, Ty::Bool, "`!`")?)),
            ExprKind::Binary(op, l, r) => self.binary(*op, l, r, hint, pos)?,
            ExprKind::Call(name, args) => self.call(name, args, hint, pos)?,
        })
    }

    fn binary(&mut self, op: BinOp, l: &Expr, r: &Expr, hint: Option<Ty>, pos: Pos) -> Result<TExpr, CompileError> {
        let arith = match op {
            BinOp::Add => Some(Arith::Add),
            BinOp::Sub => Some(Arith::Sub),
            BinOp::Mul => Some(Arith::Mul),
            BinOp::Div => Some(Arith::Div),
            _ => None,
        };
        let rel = match op {
            BinOp::Lt => Some(Rel::Lt),
            BinOp::Le => Some(Rel::Le),
            BinOp::Gt => Some(Rel::Gt),
            BinOp::Ge => Some(Rel::Ge),
            BinOp::Eq => Some(Rel::Eq),
            BinOp::Ne => Some(Rel::Ne),
            _ => None,
        };
        if let Some(a) = arith {
            let hint = hint.filter(|t| *t != Ty::Bool);
            let (tl, tr) = self.operands(l, r, hint)?;
            let ty = self.same_type(pos, &tl, &tr)?;
            let (tl, tr) = (Box::new(tl), Box::new(tr));
            return match ty {
                Ty::F64 => Ok(TExpr::Arith(a, FTy::F64, tl, tr)),
                Ty::F32 => Ok(TExpr::Arith(a, FTy::F32, tl, tr)),
                Ty::I64 => match a {
                    Arith::Add => Ok(TExpr::Int(IntOp::Add, tl, tr)),
                    Arith::Sub => Ok(TExpr::Int(IntOp::Sub, tl, tr)),
                    Arith::Mul => Ok(TExpr::Int(IntOp::Mul, tl, tr)),
                    Arith::Div => err(pos, "integer division is not supported"),
                },
                Ty::Bool => err(pos, format!("`{}` on bool operands", op.symbol())),
            };
        }
        if let Some(rel) = rel {
            let (tl, tr) = self.operands(l, r, None)?;
            let ty = self.same_type(pos, &tl, &tr)?;
            if ty == Ty::Bool {
                return err(pos, "bools cannot be compared");
            }
            return Ok(TExpr::Cmp(rel, ty, Box::new(tl), Box::new(tr)));
        }
        match op {
            BinOp::And | BinOp::Or => {
                let tl = self.want(l, Ty::Bool, &format!("`{}`", op.symbol()))?;
                let tr = self.want(r, Ty::Bool, &format!("`{}`", op.symbol()))?;
                Ok(if op == BinOp::And { TExpr::And(Box::new(tl), Box::new(tr)) } else { TExpr::Or(Box::new(tl), Box::new(tr)) })
            }
            _ => {
                let bit = match op {
                    BinOp::BitAnd => BitOp::And,
                    BinOp::BitOr => BitOp::Or,
                    _ => BitOp::Xor,
                };
                let tl = self.want(l, Ty::I64, &format!("`{}`", op.symbol()))?;
                let tr = self.want(r, Ty::I64, &format!("`{}`", op.symbol()))?;
                Ok(TExpr::IntBits(bit, Box::new(tl), Box::new(tr)))
            }
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], hint: Option<Ty>, pos: Pos) -> Result<TExpr, CompileError> {
        let arity = |n: usize| -> Result<(), CompileError> {
            if args.len() != n {
                return err(pos, format!("`{name}` takes {n} argument{}, got {}", if n == 1 { "" } else { "s" }, args.len()));
            }
            Ok(())
        };
        let float_hint = hint.filter(|t| t.is_float());
        match name {
            "input" => {
                arity(1)?;
                let TExpr::I64(k) = self.expr(&args[0], Some(Ty::I64))? else {
                    return err(args[0].pos, "input slot must be an integer literal");
                };
                if !(0..4096).contains(&k) {
                    return err(args[0].pos, "input slot out of range");
                }
                self.n_inputs = self.n_inputs.max(k as usize + 1);
                Ok(TExpr::Input(k as u32))
            }
            "abs" | "sqrt" => {
                arity(1)?;
                let (f, t) = self.float_arg(&args[0], float_hint, name)?;
                Ok(if name == "abs" { TExpr::Abs(f, Box::new(t)) } else { TExpr::Sqrt(f, Box::new(t)) })
            }
            "select" => {
                arity(3)?;
                let c = self.want(&args[0], Ty::Bool, "select condition")?;
                let (a, b) = self.operands(&args[1], &args[2], float_hint.or(Some(Ty::F64)))?;
                let ty = self.same_type(pos, &a, &b)?;
                let f = match ty {
                    Ty::F64 => FTy::F64,
                    Ty::F32 => FTy::F32,
                    other => return err(pos, format!("select expects float branches, found {}", other.name())),
                };
                Ok(TExpr::Select(f, Box::new(c), Box::new(a), Box::new(b)))
            }
            "softsin" => {
                arity(1)?;
                self.uses_softsin = true;
                Ok(TExpr::SoftSin(Box::new(self.want(&args[0], Ty::F64, "softsin")?)))
            }
            "f64" | "f32" | "i64" => {
                arity(1)?;
                let to = match name {
                    "f64" => Ty::F64,
                    "f32" => Ty::F32,
                    _ => Ty::I64,
                };
                if is_literal(&args[0]) {
                    return self.expr(&args[0], Some(to)).and_then(|t| {
                        if t.ty() == to {
                            Ok(t)
                        } else {
                            err(pos, format!("cannot convert literal to {}", to.name()))
                        }
                    });
                }
                let t = self.expr(&args[0], None)?;
                let from = t.ty();
                if from == Ty::Bool {
                    return err(pos, "cannot convert a bool");
                }
                if from == to {
                    return Ok(t);
                }
                Ok(TExpr::Cast { from, to, arg: Box::new(t) })
            }
            "bits_and64" | "bits_or64" | "bits_xor64" => {
                arity(2)?;
                let op = match name {
                    "bits_and64" => BitOp::And,
                    "bits_or64" => BitOp::Or,
                    _ => BitOp::Xor,
                };
                let e = self.want(&args[0], Ty::F64, name)?;
                let m = match &args[1].kind {
                    ExprKind::Int(v) => *v as u64,
                    ExprKind::Num { value, int_syntax: true } => *value as i64 as u64,
                    _ => return err(args[1].pos, "mask must be an integer literal"),
                };
                Ok(TExpr::Bits(op, Box::new(e), m))
            }
            "to_bits" => {
                arity(1)?;
                Ok(TExpr::ToBits(Box::new(self.want(&args[0], Ty::F64, name)?)))
            }
            "from_bits" => {
                arity(1)?;
                Ok(TExpr::FromBits(Box::new(self.want(&args[0], Ty::I64, name)?)))
            }
            "dg_get_dot" => {
                arity(1)?;
                let target = match &args[0].kind {
                    ExprKind::Var(n) => LValue::Var(n.clone()),
                    ExprKind::Index(n, i) => LValue::Elem(n.clone(), i.clone()),
                    _ => return err(args[0].pos, "dg_get_dot expects a variable or array element"),
                };
                let (p, ty) = self.place(&target, args[0].pos)?;
                if ty == Ty::Bool {
                    return err(pos, "bools have no dot");
                }
                Ok(TExpr::GetDot(p, ty))
            }
            _ => {
                let Some(f) = MathFn::from_name(name) else {
                    return err(pos, format!("unknown function `{name}`"));
                };
                arity(f.arity())?;
                let mut targs = Vec::new();
                for a in args {
                    targs.push(self.want(a, Ty::F64, name)?);
                }
                Ok(TExpr::Math(f, targs))
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], out: &mut Vec<TStmt>) -> Result<(), CompileError> {
        for s in stmts {
            self.stmt(s, out)?;
        }
        Ok(())
    }

    fn array_op(&mut self, dst: VarId, value: &Expr, pos: Pos) -> Result<TStmtKind, CompileError> {
        let ExprKind::Binary(op, l, r) = &value.kind else {
            return err(pos, "whole-array assignment must be `a = b op c`");
        };
        let op = match op {
            BinOp::Add => Arith::Add,
            BinOp::Sub => Arith::Sub,
            BinOp::Mul => Arith::Mul,
            BinOp::Div => Arith::Div,
            _ => return err(pos, "whole-array assignment must use + - * /"),
        };
        let (ExprKind::Var(a), ExprKind::Var(b)) = (&l.kind, &r.kind) else {
            return err(pos, "whole-array operands must be arrays");
        };
        let (lhs, rhs) = (self.lookup(a, l.pos)?, self.lookup(b, r.pos)?);
        let d = &self.vars[dst];
        for id in [lhs, rhs] {
            let v = &self.vars[id];
            if v.len != d.len || v.ty != d.ty {
                return err(pos, format!("`{}` does not match `{}` in type and length", v.name, d.name));
            }
        }
        let fty = match d.ty {
            Ty::F64 => FTy::F64,
            Ty::F32 => FTy::F32,
            _ => return err(pos, "whole-array arithmetic needs float arrays"),
        };
        Ok(TStmtKind::ArrayOp { op, fty, len: d.len.unwrap(), dst, lhs, rhs })
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<TStmt>) -> Result<(), CompileError> {
        let pos = s.pos;
        let kind = match &s.kind {
            StmtKind::Decl { ty, name, len, init } => {
                if len.is_some() && init.is_some() {
                    return err(pos, "arrays cannot have initializers");
                }
                if len.is_some() && *ty == Ty::I64 {
                    return err(pos, "arrays must hold floats");
                }
                let id = self.declare(name, *ty, *len, pos)?;
                match init {
                    Some(e) => {
                        let v = self.want(e, *ty, &format!("initializer of `{name}`"))?;
                        TStmtKind::Assign(Place::Var(id), v)
                    }
                    None => return Ok(()),
                }
            }
            StmtKind::Assign { target, value } => {
                if let LValue::Var(name) = target {
                    let id = self.lookup(name, pos)?;
                    if self.loop_vars.contains(&id) {
                        return err(pos, format!("loop counter `{name}` cannot be assigned"));
                    }
                    if self.vars[id].len.is_some() {
                        let k = self.array_op(id, value, pos)?;
                        out.push(TStmt { kind: k, line: pos.line });
                        return Ok(());
                    }
                }
                let (p, ty) = self.place(target, pos)?;
                let v = self.want(value, ty, "assignment")?;
                TStmtKind::Assign(p, v)
            }
            StmtKind::If { cond, then, els } => {
                let c = self.want(cond, Ty::Bool, "if condition")?;
                let (mut t, mut e) = (Vec::new(), Vec::new());
                self.block(then, &mut t)?;
                self.block(els, &mut e)?;
                TStmtKind::If(c, t, e)
            }
            StmtKind::While { cond, body } => {
                let c = self.want(cond, Ty::Bool, "while condition")?;
                let mut b = Vec::new();
                self.block(body, &mut b)?;
                TStmtKind::While(c, b)
            }
            StmtKind::For { var, lo, hi, body } => {
                // A finished loop's counter may be reused by a later loop.
                let id = match self.by_name.get(var.as_str()) {
                    Some(&id) if self.loop_vars.contains(&id) && !self.loop_ranges.contains_key(&id) => id,
                    _ => {
                        let id = self.declare(var, Ty::I64, None, pos)?;
                        self.loop_vars.push(id);
                        id
                    }
                };
                self.loop_ranges.insert(id, (*lo as i128, *hi as i128 - 1));
                let mut b = Vec::new();
                let r = self.block(body, &mut b);
                self.loop_ranges.remove(&id);
                r?;
                TStmtKind::For { var: id, lo: *lo, hi: *hi, body: b }
            }
            StmtKind::Print(e) => {
                let t = self.expr(e, None)?;
                if t.ty() == Ty::Bool {
                    return err(pos, "cannot print a bool");
                }
                TStmtKind::Print(t)
            }
            StmtKind::Output(e) => {
                let t = self.expr(e, Some(Ty::F64))?;
                if t.ty() == Ty::Bool {
                    return err(pos, "cannot output a bool");
                }
                let name = match &e.kind {
                    ExprKind::Var(n) => n.clone(),
                    _ => format!("out{}", self.outputs.len()),
                };
                self.outputs.push((name, t.ty()));
                TStmtKind::Output(self.outputs.len() - 1, t)
            }
            StmtKind::SetDot { target, dot } => {
                let (p, ty) = self.place(target, pos)?;
                if let Place::Var(id) = p {
                    if self.loop_vars.contains(&id) {
                        return err(pos, "loop counters cannot carry dots");
                    }
                }
                let d = self.want(dot, ty, "dg_set_dot")?;
                TStmtKind::SetDot(p, d)
            }
            StmtKind::Block(stmts) => return self.block(stmts, out),
        };
        out.push(TStmt { kind, line: pos.line });
        Ok(())
    }
}

pub fn check(src: &SourceProgram) -> Result<TypedProgram, CompileError> {
    let mut c = Checker {
        vars: Vec::new(),
        by_name: HashMap::new(),
        loop_ranges: HashMap::new(),
        loop_vars: Vec::new(),
        outputs: Vec::new(),
        n_inputs: 0,
        uses_softsin: false,
    };
    let mut stmts = Vec::new();
    c.block(&src.stmts, &mut stmts)?;
    Ok(TypedProgram {
        sse: src.sse,
        vars: c.vars,
        stmts,
        outputs: c.outputs,
        n_inputs: c.n_inputs,
        uses_softsin: c.uses_softsin,
    })
}
