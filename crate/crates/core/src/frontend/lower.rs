//! Typed AST to IR.
//!
//! Scalars live in 8-byte guest-state slots, arrays in memory. Every source
//! statement starts with an IMark; control flow splits the program into
//! superblocks joined by exits. `abs`, unary minus and `select` go through
//! integer bit masks the way optimizing compilers emit them.

use std::collections::BTreeMap;

use super::ast::*;
use super::softmath::{self, SoftArith};
use super::{layout, CompileError, Location, Symbol};
use crate::instrument::BitOp;
use crate::ir::{cmpf, Const, DataSegment, Expr, IrType, Opcode, OutputSlot, Program, Stmt, Superblock};
use crate::machine::GUEST_BAND;

const SIGN64: u64 = 0x8000_0000_0000_0000;
const ABS64: u64 = 0x7fff_ffff_ffff_ffff;
const SIGN32: u32 = 0x8000_0000;
const ABS32: u32 = 0x7fff_ffff;

pub(super) struct Lowered {
    pub program: Program,
    pub symbols: Vec<Symbol>,
    pub lines: BTreeMap<u64, usize>,
}

struct Lower<'a> {
    tp: &'a TypedProgram,
    program: Program,
    cur: Superblock,
    next_mark: u64,
    next_block: u64,
    locs: Vec<Location>,
    lines: BTreeMap<u64, usize>,
}

fn ir_ty(t: Ty) -> IrType {
    match t {
        Ty::F64 => IrType::F64,
        Ty::F32 => IrType::F32,
        Ty::I64 => IrType::I64,
        Ty::Bool => IrType::I1,
    }
}

fn i64c(v: u64) -> Expr {
    Expr::Const(Const::i64(v))
}

fn i32c(v: u32) -> Expr {
    Expr::Const(Const::i32(v))
}

impl<'a> Lower<'a> {
    fn new_block(&mut self) -> u64 {
        let a = self.next_block;
        self.next_block += layout::BLOCK_STRIDE;
        a
    }

    fn start(&mut self, addr: u64) {
        self.cur = Superblock::new(addr);
        self.next_mark = addr;
    }

    fn finish(&mut self, term: Stmt) {
        self.cur.stmts.push(term);
        let sb = std::mem::replace(&mut self.cur, Superblock::new(0));
        self.program.insert(sb);
    }

    fn goto(&mut self, target: u64) {
        self.finish(Stmt::goto(target));
    }

    fn mark(&mut self, line: usize) -> Result<(), CompileError> {
        if self.next_mark - self.cur.addr >= layout::BLOCK_STRIDE {
            return Err(CompileError { line, col: 1, msg: "straight-line code too long for one block".into() });
        }
        self.cur.stmts.push(Stmt::IMark { addr: self.next_mark, len: 4 });
        self.lines.insert(self.next_mark, line);
        self.next_mark += 4;
        Ok(())
    }

    fn push(&mut self, s: Stmt) {
        self.cur.stmts.push(s);
    }

    fn tmp(&mut self, ty: IrType, expr: Expr) -> Expr {
        let t = self.cur.new_tmp(ty);
        self.push(Stmt::WrTmp { tmp: t, expr });
        Expr::RdTmp(t)
    }

    fn op(&mut self, op: Opcode, args: Vec<Expr>) -> Expr {
        let ty = op.result_type();
        self.tmp(ty, Expr::op(op, args))
    }

    fn guest(&self, id: VarId) -> u32 {
        match self.locs[id] {
            Location::Guest(off) => off,
            Location::Memory { .. } => unreachable!("checked scalar"),
        }
    }

    fn elem_addr(&mut self, id: VarId, idx: &TExpr) -> Expr {
        let Location::Memory { addr, .. } = self.locs[id] else { unreachable!("checked array") };
        let size = self.tp.vars[id].ty.size();
        if let TExpr::I64(c) = idx {
            return i64c(addr.wrapping_add((*c as u64).wrapping_mul(size)));
        }
        let i = self.expr(idx);
        let off = self.op(Opcode::Mul64, vec![i, i64c(size)]);
        self.op(Opcode::Add64, vec![i64c(addr), off])
    }

    fn place_addr(&mut self, place: &Place, ty: Ty) -> Expr {
        match place {
            Place::Elem(id, idx) => self.elem_addr(*id, idx),
            Place::Var(id) => {
                // Spill the register so the client request can address it.
                let v = self.tmp(ir_ty(ty), Expr::get(self.guest(*id), ir_ty(ty)));
                self.push(Stmt::Store { addr: i64c(layout::SPILL), data: v });
                i64c(layout::SPILL)
            }
        }
    }

    fn to_bits(&mut self, f: FTy, v: Expr) -> Expr {
        match f {
            FTy::F64 => self.op(Opcode::ReinterpF64asI64, vec![v]),
            FTy::F32 => self.op(Opcode::ReinterpF32asI32, vec![v]),
        }
    }

    fn from_bits(&mut self, f: FTy, v: Expr) -> Expr {
        match f {
            FTy::F64 => self.op(Opcode::ReinterpI64asF64, vec![v]),
            FTy::F32 => self.op(Opcode::ReinterpI32asF32, vec![v]),
        }
    }

    /// Moves a scalar into the low lane of an otherwise zero vector register.
    fn to_vec(&mut self, f: FTy, v: Expr) -> Expr {
        let b = self.to_bits(f, v);
        match f {
            FTy::F64 => self.op(Opcode::I64x2toV128, vec![i64c(0), b]),
            FTy::F32 => self.op(Opcode::I32x4toV128, vec![i32c(0), i32c(0), i32c(0), b]),
        }
    }

    fn from_vec(&mut self, f: FTy, v: Expr) -> Expr {
        let b = match f {
            FTy::F64 => self.op(Opcode::V128to64lo, vec![v]),
            FTy::F32 => self.op(Opcode::V128to32lane0, vec![v]),
        };
        self.from_bits(f, b)
    }

    fn arith(&mut self, a: Arith, f: FTy, l: Expr, r: Expr) -> Expr {
        use Opcode::*;
        if self.tp.sse {
            let op = match (a, f) {
                (Arith::Add, FTy::F64) => Add64F0x2,
                (Arith::Sub, FTy::F64) => Sub64F0x2,
                (Arith::Mul, FTy::F64) => Mul64F0x2,
                (Arith::Div, FTy::F64) => Div64F0x2,
                (Arith::Add, FTy::F32) => Add32F0x4,
                (Arith::Sub, FTy::F32) => Sub32F0x4,
                (Arith::Mul, FTy::F32) => Mul32F0x4,
                (Arith::Div, FTy::F32) => Div32F0x4,
            };
            let (vl, vr) = (self.to_vec(f, l), self.to_vec(f, r));
            let v = self.op(op, vec![vl, vr]);
            return self.from_vec(f, v);
        }
        let op = match (a, f) {
            (Arith::Add, FTy::F64) => AddF64,
            (Arith::Sub, FTy::F64) => SubF64,
            (Arith::Mul, FTy::F64) => MulF64,
            (Arith::Div, FTy::F64) => DivF64,
            (Arith::Add, FTy::F32) => AddF32,
            (Arith::Sub, FTy::F32) => SubF32,
            (Arith::Mul, FTy::F32) => MulF32,
            (Arith::Div, FTy::F32) => DivF32,
        };
        self.op(op, vec![l, r])
    }

    fn sqrt(&mut self, f: FTy, v: Expr) -> Expr {
        if self.tp.sse {
            let op = if f == FTy::F64 { Opcode::Sqrt64F0x2 } else { Opcode::Sqrt32F0x4 };
            let vv = self.to_vec(f, v);
            let r = self.op(op, vec![vv]);
            return self.from_vec(f, r);
        }
        self.op(if f == FTy::F64 { Opcode::SqrtF64 } else { Opcode::SqrtF32 }, vec![v])
    }

    fn neg(&mut self, f: FTy, v: Expr) -> Expr {
        let b = self.to_bits(f, v);
        let x = match f {
            FTy::F64 => self.op(Opcode::Xor64, vec![b, i64c(SIGN64)]),
            FTy::F32 => self.op(Opcode::Xor32, vec![b, i32c(SIGN32)]),
        };
        self.from_bits(f, x)
    }

    fn abs(&mut self, f: FTy, v: Expr) -> Expr {
        match f {
            FTy::F64 => {
                // andpd with a 128-bit constant whose upper lane is zero.
                let vv = self.to_vec(f, v);
                let m = self.op(Opcode::AndV128, vec![vv, Expr::Const(Const::new(IrType::V128, ABS64 as u128))]);
                self.from_vec(f, m)
            }
            FTy::F32 => {
                let b = self.to_bits(f, v);
                let m = self.op(Opcode::And32, vec![b, i32c(ABS32)]);
                self.from_bits(f, m)
            }
        }
    }

    fn cmp(&mut self, rel: Rel, ty: Ty, l: Expr, r: Expr) -> Expr {
        use Opcode::*;
        match ty {
            Ty::F64 | Ty::F32 => {
                let c = self.op(if ty == Ty::F64 { CmpF64 } else { CmpF32 }, vec![l, r]);
                let is = |me: &mut Self, code: u32| me.op(CmpEQ32, vec![c.clone(), i32c(code)]);
                match rel {
                    Rel::Lt => is(self, cmpf::LT),
                    Rel::Gt => is(self, cmpf::GT),
                    Rel::Eq => is(self, cmpf::EQ),
                    Rel::Le | Rel::Ge => {
                        let a = is(self, if rel == Rel::Le { cmpf::LT } else { cmpf::GT });
                        let e = is(self, cmpf::EQ);
                        self.op(Or1, vec![a, e])
                    }
                    Rel::Ne => {
                        let e = is(self, cmpf::EQ);
                        self.op(Not1, vec![e])
                    }
                }
            }
            _ => match rel {
                Rel::Lt => self.op(CmpLT64S, vec![l, r]),
                Rel::Le => self.op(CmpLE64S, vec![l, r]),
                Rel::Gt => self.op(CmpLT64S, vec![r, l]),
                Rel::Ge => self.op(CmpLE64S, vec![r, l]),
                Rel::Eq => self.op(CmpEQ64, vec![l, r]),
                Rel::Ne => self.op(CmpNE64, vec![l, r]),
            },
        }
    }

    fn select(&mut self, f: FTy, c: &TExpr, a: &TExpr, b: &TExpr) -> Expr {
        use Opcode::*;
        if let (true, FTy::F64, TExpr::Cmp(rel, Ty::F64, p, q)) = (self.tp.sse, f, c) {
            let mask_op = match rel {
                Rel::Lt | Rel::Gt => Some(CmpLT64F0x2),
                Rel::Le | Rel::Ge => Some(CmpLE64F0x2),
                Rel::Eq => Some(CmpEQ64F0x2),
                Rel::Ne => None,
            };
            if let Some(mask_op) = mask_op {
                // cmpltsd / andpd / andnpd / orpd
                let (pv, qv) = (self.expr(p), self.expr(q));
                let (pv, qv) = if matches!(rel, Rel::Gt | Rel::Ge) { (qv, pv) } else { (pv, qv) };
                let (pv, qv) = (self.to_vec(f, pv), self.to_vec(f, qv));
                let mask = self.op(mask_op, vec![pv, qv]);
                let (av, bv) = (self.expr(a), self.expr(b));
                let (av, bv) = (self.to_vec(f, av), self.to_vec(f, bv));
                let t = self.op(AndV128, vec![mask.clone(), av]);
                let nm = self.op(NotV128, vec![mask]);
                let e = self.op(AndV128, vec![nm, bv]);
                let r = self.op(OrV128, vec![t, e]);
                return self.from_vec(f, r);
            }
        }
        let cv = self.expr(c);
        let (av, bv) = (self.expr(a), self.expr(b));
        let (ab, bb) = (self.to_bits(f, av), self.to_bits(f, bv));
        let r = match f {
            FTy::F64 => {
                let w = self.op(I1Uto64, vec![cv]);
                let m = self.op(Sub64, vec![i64c(0), w]);
                let t = self.op(And64, vec![m.clone(), ab]);
                let nm = self.op(Not64, vec![m]);
                let e = self.op(And64, vec![nm, bb]);
                self.op(Or64, vec![t, e])
            }
            FTy::F32 => {
                let w = self.op(I1Uto32, vec![cv]);
                let m = self.op(Sub32, vec![i32c(0), w]);
                let t = self.op(And32, vec![m.clone(), ab]);
                let nm = self.op(Not32, vec![m]);
                let e = self.op(And32, vec![nm, bb]);
                self.op(Or32, vec![t, e])
            }
        };
        self.from_bits(f, r)
    }

    fn cast(&mut self, from: Ty, to: Ty, v: Expr) -> Expr {
        use Opcode::*;
        match (from, to) {
            (Ty::F64, Ty::F32) => self.op(F64toF32, vec![v]),
            (Ty::F32, Ty::F64) => self.op(F32toF64, vec![v]),
            (Ty::I64, Ty::F64) => self.op(I64toF64, vec![v]),
            (Ty::F64, Ty::I64) => self.op(F64toI64, vec![v]),
            (Ty::I64, Ty::F32) => {
                let d = self.op(I64toF64, vec![v]);
                self.op(F64toF32, vec![d])
            }
            (Ty::F32, Ty::I64) => {
                let d = self.op(F32toF64, vec![v]);
                self.op(F64toI64, vec![d])
            }
            _ => v,
        }
    }

    fn expr(&mut self, e: &TExpr) -> Expr {
        use Opcode::*;
        match e {
            TExpr::F64(v) => Expr::Const(Const::f64(*v)),
            TExpr::F32(v) => Expr::Const(Const::f32(*v)),
            TExpr::I64(v) => i64c(*v as u64),
            TExpr::Bool(v) => Expr::Const(Const::bool(*v)),
            TExpr::Read(Place::Var(id), ty) => {
                let off = self.guest(*id);
                self.tmp(ir_ty(*ty), Expr::get(off, ir_ty(*ty)))
            }
            TExpr::Read(Place::Elem(id, idx), ty) => {
                let a = self.elem_addr(*id, idx);
                self.tmp(ir_ty(*ty), Expr::load(a, ir_ty(*ty)))
            }
            TExpr::Arith(a, f, l, r) => {
                let (l, r) = (self.expr(l), self.expr(r));
                self.arith(*a, *f, l, r)
            }
            TExpr::Sqrt(f, a) => {
                let v = self.expr(a);
                self.sqrt(*f, v)
            }
            TExpr::Neg(f, a) => {
                let v = self.expr(a);
                self.neg(*f, v)
            }
            TExpr::Abs(f, a) => {
                let v = self.expr(a);
                self.abs(*f, v)
            }
            TExpr::Int(op, l, r) => {
                let (l, r) = (self.expr(l), self.expr(r));
                let op = match op {
                    IntOp::Add => Add64,
                    IntOp::Sub => Sub64,
                    IntOp::Mul => Mul64,
                };
                self.op(op, vec![l, r])
            }
            TExpr::IntBits(op, l, r) => {
                let (l, r) = (self.expr(l), self.expr(r));
                self.op(bit64(*op), vec![l, r])
            }
            TExpr::Cmp(rel, ty, l, r) => {
                let (l, r) = (self.expr(l), self.expr(r));
                self.cmp(*rel, *ty, l, r)
            }
            TExpr::And(l, r) | TExpr::Or(l, r) => {
                let (lv, rv) = (self.expr(l), self.expr(r));
                self.op(if matches!(e, TExpr::And(..)) { And1 } else { Or1 }, vec![lv, rv])
            }
            TExpr::Not(a) => {
                let v = self.expr(a);
                self.op(Not1, vec![v])
            }
            TExpr::Math(f, args) => {
                let args: Vec<Expr> = args.iter().map(|a| self.expr(a)).collect();
                let t = self.cur.new_tmp(IrType::F64);
                self.push(Stmt::Dirty { name: format!("math_{}", f.name()), args, dst: Some(t) });
                Expr::RdTmp(t)
            }
            TExpr::Cast { from, to, arg } => {
                let v = self.expr(arg);
                self.cast(*from, *to, v)
            }
            TExpr::Select(f, c, a, b) => self.select(*f, c, a, b),
            TExpr::SoftSin(a) => {
                let x = self.expr(a);
                softmath::soft_sin(self, &x)
            }
            TExpr::Bits(op, a, m) => {
                let v = self.expr(a);
                let b = self.to_bits(FTy::F64, v);
                let r = self.op(bit64(*op), vec![b, i64c(*m)]);
                self.from_bits(FTy::F64, r)
            }
            TExpr::ToBits(a) => {
                let v = self.expr(a);
                self.to_bits(FTy::F64, v)
            }
            TExpr::FromBits(a) => {
                let v = self.expr(a);
                self.from_bits(FTy::F64, v)
            }
            TExpr::Input(k) => self.tmp(IrType::F64, Expr::load(i64c(layout::INPUT + 8 * *k as u64), IrType::F64)),
            TExpr::GetDot(place, ty) => {
                let a = self.place_addr(place, *ty);
                self.push(Stmt::Dirty {
                    name: "dg_get_dot".into(),
                    args: vec![a, i64c(layout::GETDOT_OUT), i64c(ty.size())],
                    dst: None,
                });
                self.tmp(ir_ty(*ty), Expr::load(i64c(layout::GETDOT_OUT), ir_ty(*ty)))
            }
        }
    }

    fn array_op(&mut self, op: Arith, f: FTy, len: usize, ids: [VarId; 3]) {
        use Opcode::*;
        let base = |me: &Self, id: VarId| match me.locs[id] {
            Location::Memory { addr, .. } => addr,
            Location::Guest(_) => unreachable!("checked array"),
        };
        let [dst, lhs, rhs] = ids.map(|id| base(self, id));
        let (lanes, vop) = match (f, op) {
            (FTy::F64, Arith::Add) => (2, Add64Fx2),
            (FTy::F64, Arith::Sub) => (2, Sub64Fx2),
            (FTy::F64, Arith::Mul) => (2, Mul64Fx2),
            (FTy::F64, Arith::Div) => (2, Div64Fx2),
            (FTy::F32, Arith::Add) => (4, Add32Fx4),
            (FTy::F32, Arith::Sub) => (4, Sub32Fx4),
            (FTy::F32, Arith::Mul) => (4, Mul32Fx4),
            (FTy::F32, Arith::Div) => (4, Div32Fx4),
        };
        for c in 0..(len / lanes) as u64 {
            let l = self.tmp(IrType::V128, Expr::load(i64c(lhs + 16 * c), IrType::V128));
            let r = self.tmp(IrType::V128, Expr::load(i64c(rhs + 16 * c), IrType::V128));
            let v = self.op(vop.clone(), vec![l, r]);
            self.push(Stmt::Store { addr: i64c(dst + 16 * c), data: v });
        }
        let size = f.ty().size();
        let ty = ir_ty(f.ty());
        for i in (len - len % lanes) as u64..len as u64 {
            let l = self.tmp(ty, Expr::load(i64c(lhs + size * i), ty));
            let r = self.tmp(ty, Expr::load(i64c(rhs + size * i), ty));
            let v = self.arith(op, f, l, r);
            self.push(Stmt::Store { addr: i64c(dst + size * i), data: v });
        }
    }

    fn stmts(&mut self, stmts: &[TStmt]) -> Result<(), CompileError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &TStmt) -> Result<(), CompileError> {
        match &s.kind {
            TStmtKind::Assign(place, e) => {
                self.mark(s.line)?;
                let v = self.expr(e);
                match place {
                    Place::Var(id) => {
                        let off = self.guest(*id);
                        self.push(Stmt::Put { offset: off, expr: v });
                    }
                    Place::Elem(id, idx) => {
                        let a = self.elem_addr(*id, idx);
                        self.push(Stmt::Store { addr: a, data: v });
                    }
                }
            }
            TStmtKind::ArrayOp { op, fty, len, dst, lhs, rhs } => {
                self.mark(s.line)?;
                self.array_op(*op, *fty, *len, [*dst, *lhs, *rhs]);
            }
            TStmtKind::If(c, then, els) => {
                self.mark(s.line)?;
                let cv = self.expr(c);
                let then_addr = self.new_block();
                let else_addr = if els.is_empty() { None } else { Some(self.new_block()) };
                let join = self.new_block();
                self.push(Stmt::Exit { guard: cv, target: then_addr });
                self.goto(else_addr.unwrap_or(join));
                self.start(then_addr);
                self.stmts(then)?;
                self.goto(join);
                if let Some(e) = else_addr {
                    self.start(e);
                    self.stmts(els)?;
                    self.goto(join);
                }
                self.start(join);
            }
            TStmtKind::While(c, body) => {
                let (head, body_addr, after) = (self.new_block(), self.new_block(), self.new_block());
                self.goto(head);
                self.start(head);
                self.mark(s.line)?;
                let cv = self.expr(c);
                self.push(Stmt::Exit { guard: cv, target: body_addr });
                self.goto(after);
                self.start(body_addr);
                self.stmts(body)?;
                self.goto(head);
                self.start(after);
            }
            TStmtKind::For { var, lo, hi, body } => {
                let off = self.guest(*var);
                self.mark(s.line)?;
                self.push(Stmt::Put { offset: off, expr: i64c(*lo as u64) });
                let (head, body_addr, after) = (self.new_block(), self.new_block(), self.new_block());
                self.goto(head);
                self.start(head);
                self.mark(s.line)?;
                let i = self.tmp(IrType::I64, Expr::get(off, IrType::I64));
                let c = self.op(Opcode::CmpLT64S, vec![i, i64c(*hi as u64)]);
                self.push(Stmt::Exit { guard: c, target: body_addr });
                self.goto(after);
                self.start(body_addr);
                self.stmts(body)?;
                self.mark(s.line)?;
                let i = self.tmp(IrType::I64, Expr::get(off, IrType::I64));
                let n = self.op(Opcode::Add64, vec![i, i64c(1)]);
                self.push(Stmt::Put { offset: off, expr: n });
                self.goto(head);
                self.start(after);
            }
            TStmtKind::Print(e) => {
                self.mark(s.line)?;
                let v = self.expr(e);
                let v = self.cast(e.ty(), Ty::F64, v);
                self.push(Stmt::Dirty { name: "print_f64".into(), args: vec![v], dst: None });
            }
            TStmtKind::Output(slot, e) => {
                self.mark(s.line)?;
                let v = self.expr(e);
                self.push(Stmt::Store { addr: i64c(layout::OUTPUT + 8 * *slot as u64), data: v });
            }
            TStmtKind::SetDot(place, d) => {
                self.mark(s.line)?;
                let ty = d.ty();
                let dv = self.expr(d);
                self.push(Stmt::Store { addr: i64c(layout::SETDOT_SRC), data: dv });
                let a = self.place_addr(place, ty);
                self.push(Stmt::Dirty {
                    name: "dg_set_dot".into(),
                    args: vec![a, i64c(layout::SETDOT_SRC), i64c(ty.size())],
                    dst: None,
                });
                if let Place::Var(id) = place {
                    let v = self.tmp(ir_ty(ty), Expr::load(i64c(layout::SPILL), ir_ty(ty)));
                    let off = self.guest(*id);
                    self.push(Stmt::Put { offset: off, expr: v });
                }
            }
        }
        Ok(())
    }
}

fn bit64(op: BitOp) -> Opcode {
    match op {
        BitOp::And => Opcode::And64,
        BitOp::Or => Opcode::Or64,
        BitOp::Xor => Opcode::Xor64,
    }
}

impl SoftArith for Lower<'_> {
    type F = Expr;
    type I = Expr;

    fn konst(&mut self, v: f64) -> Expr {
        Expr::Const(Const::f64(v))
    }

    fn add(&mut self, a: &Expr, b: &Expr) -> Expr {
        self.arith(Arith::Add, FTy::F64, a.clone(), b.clone())
    }

    fn sub(&mut self, a: &Expr, b: &Expr) -> Expr {
        self.arith(Arith::Sub, FTy::F64, a.clone(), b.clone())
    }

    fn mul(&mut self, a: &Expr, b: &Expr) -> Expr {
        self.arith(Arith::Mul, FTy::F64, a.clone(), b.clone())
    }

    fn to_int(&mut self, a: &Expr) -> Expr {
        self.op(Opcode::F64toI64, vec![a.clone()])
    }

    fn mask(&mut self, a: &Expr, m: u64) -> Expr {
        self.op(Opcode::And64, vec![a.clone(), i64c(m)])
    }

    fn table(&mut self, idx: &Expr, cosine: bool) -> Expr {
        let off = self.op(Opcode::Mul64, vec![idx.clone(), i64c(8)]);
        let base = layout::TABLE + if cosine { 8 * softmath::TABLE_SIZE as u64 } else { 0 };
        let a = self.op(Opcode::Add64, vec![i64c(base), off]);
        self.tmp(IrType::F64, Expr::load(a, IrType::F64))
    }
}

pub(super) fn lower(tp: &TypedProgram) -> Result<Lowered, CompileError> {
    let mut locs = Vec::new();
    let mut symbols = Vec::new();
    let (mut next_guest, mut next_mem) = (0u32, layout::ARRAYS);
    for v in &tp.vars {
        let loc = match v.len {
            None => {
                if next_guest + 8 > GUEST_BAND {
                    return Err(CompileError { line: 1, col: 1, msg: "too many scalar variables for the guest state".into() });
                }
                next_guest += 8;
                Location::Guest(next_guest - 8)
            }
            Some(n) => {
                let addr = next_mem;
                next_mem += (n as u64 * v.ty.size() + 15) & !15;
                Location::Memory { addr, len: n }
            }
        };
        locs.push(loc);
        symbols.push(Symbol { name: v.name.clone(), ty: v.ty, location: loc });
    }
    let entry = layout::CODE;
    let mut l = Lower {
        tp,
        program: Program::new(entry),
        cur: Superblock::new(entry),
        next_mark: entry,
        next_block: entry + layout::BLOCK_STRIDE,
        locs,
        lines: BTreeMap::new(),
    };
    l.stmts(&tp.stmts)?;
    l.finish(Stmt::Halt);
    if tp.uses_softsin {
        l.program.data.push(DataSegment { addr: layout::TABLE, bytes: softmath::table_bytes() });
    }
    l.program.outputs = tp
        .outputs
        .iter()
        .enumerate()
        .map(|(j, (name, ty))| OutputSlot { name: name.clone(), addr: layout::OUTPUT + 8 * j as u64, ty: ir_ty(*ty) })
        .collect();
    Ok(Lowered { program: l.program, symbols, lines: l.lines })
}
