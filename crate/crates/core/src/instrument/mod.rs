//! The forward-mode AD pass.
//!
//! Every temporary `t` gets a shadow `t + m_tmp`, every guest offset `j` a
//! shadow at `j + m_gs`, and memory is shadowed byte for byte by the shadow
//! map, reached through `shadow_load`/`shadow_store` dirty calls. The
//! statement computing a dot is emitted before the statement it shadows.

mod bitlogic;

use std::fmt;

use crate::ir::{Const, Expr, IrType, OpClass, Opcode, Program, Stmt, Superblock, Tmp};
use crate::machine::GUEST_BAND;

pub use bitlogic::{ad_bitlogic, register as register_bitlogic, BitOp};

/// Placement of shadow temporaries and registers for one superblock.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstrumentationLayout {
    pub m_tmp: u32,
    pub m_gs: u32,
}

impl InstrumentationLayout {
    pub fn for_block(sb: &Superblock) -> Self {
        InstrumentationLayout { m_tmp: sb.tmp_count(), m_gs: GUEST_BAND }
    }

    /// First index available for AD-internal temporaries.
    pub fn first_fresh(&self) -> Tmp {
        2 * self.m_tmp
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub block: u64,
    pub stmt: usize,
    pub opcode: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {:#x} stmt {}: no derivative for {}, assuming zero", self.block, self.stmt, self.opcode)
    }
}

/// Collects constructs the pass could not differentiate. Such constructs
/// always get a zero dot; the warnings are informational.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdPolicy {
    pub warnings: Vec<Warning>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstrumentOptions {
    /// Route `math_*` dirty calls to their `math_*_dot` derivatives.
    pub math_wrappers: bool,
}

impl Default for InstrumentOptions {
    fn default() -> Self {
        InstrumentOptions { math_wrappers: true }
    }
}

/// Dirty calls passed through without any shadow side effects.
const PASSTHROUGH: &[&str] = &["dg_set_dot", "dg_get_dot", "print_f64", "read_input"];

struct Builder<'a> {
    layout: InstrumentationLayout,
    tmp_types: Vec<IrType>,
    out: Vec<Stmt>,
    policy: &'a mut AdPolicy,
    block: u64,
    stmt: usize,
    math_wrappers: bool,
}

impl Builder<'_> {
    fn fresh(&mut self, ty: IrType) -> Tmp {
        self.tmp_types.push(ty);
        self.tmp_types.len() as Tmp - 1
    }

    fn shadow_tmp(&self, t: Tmp) -> Tmp {
        t + self.layout.m_tmp
    }

    fn ty(&self, e: &Expr) -> IrType {
        e.type_of(&self.tmp_types).expect("instrumenting a well-typed block")
    }

    fn warn(&mut self, opcode: &str) {
        self.policy.warnings.push(Warning { block: self.block, stmt: self.stmt, opcode: opcode.to_string() });
    }

    fn dot(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::RdTmp(t) => Expr::RdTmp(self.shadow_tmp(*t)),
            Expr::Get { offset, ty } => Expr::get(offset + self.layout.m_gs, *ty),
            Expr::Load { addr, ty } => {
                let t = self.fresh(*ty);
                self.out.push(Stmt::Dirty { name: "shadow_load".into(), args: vec![(**addr).clone()], dst: Some(t) });
                Expr::RdTmp(t)
            }
            Expr::Const(c) => Expr::zero(c.ty),
            Expr::Ite { cond, then, els } => {
                let then = self.dot(then);
                let els = self.dot(els);
                Expr::ite((**cond).clone(), then, els)
            }
            Expr::Op { op, args } => {
                let dots: Vec<Expr> = args.iter().map(|a| self.dot(a)).collect();
                differentiate_op(op, args, &dots).unwrap_or_else(|| {
                    self.warn(op.name());
                    Expr::zero(op.result_type())
                })
            }
            Expr::CCall { ty, .. } => Expr::zero(*ty),
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::WrTmp { tmp, expr } => {
                let d = self.dot(expr);
                self.out.push(Stmt::WrTmp { tmp: self.shadow_tmp(*tmp), expr: d });
            }
            Stmt::Put { offset, expr } => {
                let d = self.dot(expr);
                self.out.push(Stmt::Put { offset: offset + self.layout.m_gs, expr: d });
            }
            Stmt::Store { addr, data } => {
                let d = self.dot(data);
                self.out.push(Stmt::Dirty { name: "shadow_store".into(), args: vec![addr.clone(), d], dst: None });
            }
            Stmt::StoreG { guard, addr, data } => {
                let d = self.dot(data);
                self.out.push(Stmt::Dirty {
                    name: "shadow_store_guarded".into(),
                    args: vec![guard.clone(), addr.clone(), d],
                    dst: None,
                });
            }
            Stmt::Cas { .. } => {
                self.rewrite_cas(s);
                return;
            }
            Stmt::Dirty { name, args, dst } => self.dirty(name, args, *dst),
            Stmt::IMark { .. } | Stmt::Exit { .. } | Stmt::Halt => {}
        }
        self.out.push(s.clone());
    }

    fn dirty(&mut self, name: &str, args: &[Expr], dst: Option<Tmp>) {
        match (name, dst) {
            ("x87_store80", _) if args.len() == 2 => {
                let d = self.dot(&args[1]);
                self.out.push(Stmt::Dirty { name: "shadow_x87_store80".into(), args: vec![args[0].clone(), d], dst: None });
                return;
            }
            ("x87_load80", Some(t)) => {
                self.out.push(Stmt::Dirty {
                    name: "shadow_x87_load80".into(),
                    args: args.to_vec(),
                    dst: Some(self.shadow_tmp(t)),
                });
                return;
            }
            _ => {}
        }
        if let (Some(t), Some(f)) = (dst, name.strip_prefix("math_")) {
            if self.math_wrappers && !f.ends_with("_dot") {
                let mut all = args.to_vec();
                for a in args {
                    let d = self.dot(a);
                    all.push(d);
                }
                self.out.push(Stmt::Dirty { name: format!("{name}_dot"), args: all, dst: Some(self.shadow_tmp(t)) });
                return;
            }
        }
        if let Some(t) = dst {
            if !PASSTHROUGH.contains(&name) {
                self.warn(name);
            }
            let ty = self.tmp_types[t as usize];
            self.out.push(Stmt::WrTmp { tmp: self.shadow_tmp(t), expr: Expr::zero(ty) });
        }
    }

    fn rewrite_cas(&mut self, s: &Stmt) {
        let Stmt::Cas { old, addr, expected, new } = s else { unreachable!() };
        let ty = self.ty(expected);
        let eq = match ty {
            IrType::I8 => Opcode::CmpEQ8,
            IrType::I16 => Opcode::CmpEQ16,
            IrType::I32 => Opcode::CmpEQ32,
            IrType::I64 => Opcode::CmpEQ64,
            other => panic!("CAS on {other} is not supported"),
        };
        let a = self.fresh(IrType::I64);
        self.out.push(Stmt::WrTmp { tmp: a, expr: addr.clone() });
        let expected_dot = self.dot(expected);
        let new_dot = self.dot(new);
        let e = self.fresh(ty);
        self.out.push(Stmt::WrTmp { tmp: e, expr: expected.clone() });
        let n = self.fresh(ty);
        self.out.push(Stmt::WrTmp { tmp: n, expr: new.clone() });
        self.out.push(Stmt::WrTmp { tmp: *old, expr: Expr::load(Expr::RdTmp(a), ty) });
        self.out.push(Stmt::Dirty {
            name: "shadow_load".into(),
            args: vec![Expr::RdTmp(a)],
            dst: Some(self.shadow_tmp(*old)),
        });
        let value_match = self.fresh(IrType::I1);
        self.out.push(Stmt::WrTmp { tmp: value_match, expr: Expr::op2(eq.clone(), Expr::RdTmp(*old), Expr::RdTmp(e)) });
        let dot_match = self.fresh(IrType::I1);
        self.out.push(Stmt::WrTmp {
            tmp: dot_match,
            expr: Expr::op2(eq, Expr::RdTmp(self.shadow_tmp(*old)), expected_dot),
        });
        let guard = self.fresh(IrType::I1);
        self.out.push(Stmt::WrTmp {
            tmp: guard,
            expr: Expr::op2(Opcode::And1, Expr::RdTmp(value_match), Expr::RdTmp(dot_match)),
        });
        self.out.push(Stmt::Dirty {
            name: "shadow_store_guarded".into(),
            args: vec![Expr::RdTmp(guard), Expr::RdTmp(a), new_dot],
            dst: None,
        });
        self.out.push(Stmt::StoreG { guard: Expr::RdTmp(guard), addr: Expr::RdTmp(a), data: Expr::RdTmp(n) });
    }
}

fn f64c(v: f64) -> Expr {
    Expr::Const(Const::f64(v))
}

fn f32c(v: f32) -> Expr {
    Expr::Const(Const::f32(v))
}

fn v128c(lanes: u128) -> Expr {
    Expr::Const(Const::new(IrType::V128, lanes))
}

fn two_64x2() -> u128 {
    let t = 2f64.to_bits() as u128;
    (t << 64) | t
}

fn two_32x4() -> u128 {
    let t = 2f32.to_bits() as u128;
    (0..4).fold(0, |acc, i| acc | (t << (32 * i)))
}

/// Arithmetic rule table shared by scalar, SIMD and lowest-lane forms.
struct Arith {
    add: Opcode,
    sub: Opcode,
    mul: Opcode,
    div: Opcode,
    sqrt: Opcode,
    two: Expr,
}

fn arith_family(op: &Opcode) -> Option<Arith> {
    use Opcode::*;
    let mk = |add, sub, mul, div, sqrt, two| Some(Arith { add, sub, mul, div, sqrt, two });
    match op {
        AddF64 | SubF64 | MulF64 | DivF64 | SqrtF64 => mk(AddF64, SubF64, MulF64, DivF64, SqrtF64, f64c(2.0)),
        AddF32 | SubF32 | MulF32 | DivF32 | SqrtF32 => mk(AddF32, SubF32, MulF32, DivF32, SqrtF32, f32c(2.0)),
        Add64Fx2 | Sub64Fx2 | Mul64Fx2 | Div64Fx2 | Sqrt64Fx2 => {
            mk(Add64Fx2, Sub64Fx2, Mul64Fx2, Div64Fx2, Sqrt64Fx2, v128c(two_64x2()))
        }
        Add32Fx4 | Sub32Fx4 | Mul32Fx4 | Div32Fx4 | Sqrt32Fx4 => {
            mk(Add32Fx4, Sub32Fx4, Mul32Fx4, Div32Fx4, Sqrt32Fx4, v128c(two_32x4()))
        }
        Add64F0x2 | Sub64F0x2 | Mul64F0x2 | Div64F0x2 | Sqrt64F0x2 => {
            mk(Add64F0x2, Sub64F0x2, Mul64F0x2, Div64F0x2, Sqrt64F0x2, v128c(two_64x2()))
        }
        Add32F0x4 | Sub32F0x4 | Mul32F0x4 | Div32F0x4 | Sqrt32F0x4 => {
            mk(Add32F0x4, Sub32F0x4, Mul32F0x4, Div32F0x4, Sqrt32F0x4, v128c(two_32x4()))
        }
        _ => None,
    }
}

/// Forward-mode derivative of `op(args)` given the operands' dots.
///
/// Returns `None` for opcodes without a rule (unknown opcodes); callers
/// substitute a zero dot.
pub fn differentiate_op(op: &Opcode, args: &[Expr], dots: &[Expr]) -> Option<Expr> {
    use Opcode::*;
    let a = |i: usize| args[i].clone();
    let d = |i: usize| dots[i].clone();
    if let Some(f) = arith_family(op) {
        let e2 = Expr::op2;
        let name = op.name();
        return Some(if name.starts_with("Add") {
            e2(f.add, d(0), d(1))
        } else if name.starts_with("Sub") {
            e2(f.sub, d(0), d(1))
        } else if name.starts_with("Mul") {
            e2(f.add, e2(f.mul.clone(), d(0), a(1)), e2(f.mul, a(0), d(1)))
        } else if name.starts_with("Div") {
            let num = e2(f.sub, e2(f.mul.clone(), d(0), a(1)), e2(f.mul.clone(), a(0), d(1)));
            e2(f.div, num, e2(f.mul, a(1), a(1)))
        } else {
            e2(f.div, d(0), e2(f.mul, f.two, Expr::op1(f.sqrt, a(0))))
        });
    }
    Some(match op {
        NegF64 | NegF32 => Expr::op1(op.clone(), d(0)),
        AbsF64 => {
            let lt = Expr::op2(Opcode::CmpF64, a(0), f64c(0.0));
            let is_neg = Expr::op2(CmpEQ32, lt, Expr::Const(Const::i32(crate::ir::cmpf::LT)));
            Expr::ite(is_neg, Expr::op1(NegF64, d(0)), d(0))
        }
        AbsF32 => {
            let lt = Expr::op2(Opcode::CmpF32, a(0), f32c(0.0));
            let is_neg = Expr::op2(CmpEQ32, lt, Expr::Const(Const::i32(crate::ir::cmpf::LT)));
            Expr::ite(is_neg, Expr::op1(NegF32, d(0)), d(0))
        }
        And32 | And64 | AndV128 => bitlogic_call(BitOp::And, op, args, dots),
        Or32 | Or64 | OrV128 => bitlogic_call(BitOp::Or, op, args, dots),
        Xor32 | Xor64 | XorV128 => bitlogic_call(BitOp::Xor, op, args, dots),
        Unknown(..) => return None,
        _ => match op.class() {
            OpClass::FpConversion | OpClass::Reinterpret | OpClass::Pack => Expr::op(op.clone(), dots.to_vec()),
            _ => Expr::zero(op.result_type()),
        },
    })
}

fn bitlogic_call(b: BitOp, op: &Opcode, args: &[Expr], dots: &[Expr]) -> Expr {
    Expr::CCall {
        name: b.helper_name().into(),
        args: vec![args[0].clone(), args[1].clone(), dots[0].clone(), dots[1].clone()],
        ty: op.result_type(),
    }
}

/// Derivative of an expression in the context of `sb`. Shadow loads that
/// the derivative needs are appended to `preamble` as dirty calls writing
/// fresh temporaries, whose types are appended to `tmp_types`.
pub fn differentiate_expression(
    expr: &Expr,
    layout: InstrumentationLayout,
    tmp_types: &mut Vec<IrType>,
    preamble: &mut Vec<Stmt>,
    policy: &mut AdPolicy,
) -> Expr {
    let mut b = Builder {
        layout,
        tmp_types: std::mem::take(tmp_types),
        out: std::mem::take(preamble),
        policy,
        block: 0,
        stmt: 0,
        math_wrappers: true,
    };
    let e = b.dot(expr);
    *tmp_types = b.tmp_types;
    *preamble = b.out;
    e
}

/// Instruments one superblock. Original statements keep their order and
/// temporary numbering; shadow temporaries use `t + m_tmp` and AD-internal
/// temporaries start at `2 * m_tmp`.
pub fn instrument_superblock(
    sb: &Superblock,
    layout: InstrumentationLayout,
    options: InstrumentOptions,
    policy: &mut AdPolicy,
) -> Superblock {
    assert!(layout.m_tmp >= sb.tmp_count(), "m_tmp must exceed every original temporary index");
    let mut tmp_types = sb.tmp_types.clone();
    tmp_types.resize(layout.m_tmp as usize, IrType::I8);
    tmp_types.extend_from_within(..);
    let mut b = Builder {
        layout,
        tmp_types,
        out: Vec::with_capacity(sb.stmts.len() * 3),
        policy,
        block: sb.addr,
        stmt: 0,
        math_wrappers: options.math_wrappers,
    };
    for (i, s) in sb.stmts.iter().enumerate() {
        b.stmt = i;
        b.stmt(s);
    }
    Superblock { addr: sb.addr, tmp_types: b.tmp_types, stmts: b.out }
}

/// The statement sequence replacing a `Cas` under instrumentation: the swap
/// happens only if both the value and its shadow match the expected value
/// and the expected value's dot.
pub fn rewrite_cas(
    cas: &Stmt,
    layout: InstrumentationLayout,
    tmp_types: &mut Vec<IrType>,
    policy: &mut AdPolicy,
) -> Vec<Stmt> {
    assert!(matches!(cas, Stmt::Cas { .. }), "rewrite_cas expects a Cas statement");
    let mut b = Builder {
        layout,
        tmp_types: std::mem::take(tmp_types),
        out: Vec::new(),
        policy,
        block: 0,
        stmt: 0,
        math_wrappers: true,
    };
    b.rewrite_cas(cas);
    *tmp_types = b.tmp_types;
    b.out
}

pub fn instrument_program(program: &Program, options: InstrumentOptions, policy: &mut AdPolicy) -> Program {
    let mut out = Program { blocks: Default::default(), ..program.clone() };
    for sb in program.blocks.values() {
        out.insert(instrument_superblock(sb, InstrumentationLayout::for_block(sb), options, policy));
    }
    out
}

#[cfg(test)]
mod tests;
