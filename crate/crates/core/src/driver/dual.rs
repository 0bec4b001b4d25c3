//! Dual-number interpreter for typed minilang programs.
//!
//! This evaluates the program directly, without lowering to IR. Every
//! derivative formula is written out here in the same operation order the
//! instrumented code uses, so engine and oracle dots agree to the bit.
//! Bit-trick operations follow the mask rules of the engine for the
//! constants the compiler emits; generic bitwise ops defer to
//! [`ad_bitlogic`].

use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::frontend::ast::{Arith, FTy, IntOp, Place, Rel, TExpr, TStmt, TStmtKind, Ty, TypedProgram};
use crate::frontend::softmath::{self, SoftArith, TABLE_SIZE};
use crate::frontend::{compile, CompileError, CompileOptions};
use crate::instrument::{ad_bitlogic, BitOp};
use crate::machine::f64_to_i64;

/// A value with its tangent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub dot: f64,
}

impl DualValue {
    pub fn new(value: f64, dot: f64) -> Self {
        DualValue { value, dot }
    }

    pub fn constant(value: f64) -> Self {
        DualValue { value, dot: 0.0 }
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        DualValue::new(r, self.dot / (2.0 * r))
    }

    pub fn abs(self) -> Self {
        let bits = self.value.to_bits();
        let abs = u64::MAX >> 1;
        let dot = if bits == u64::MAX || bits == 0 || bits == abs {
            0.0
        } else if bits >> 63 == 1 {
            -self.dot
        } else {
            self.dot
        };
        DualValue::new(f64::from_bits(bits & abs), dot)
    }
}

impl Add for DualValue {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        DualValue::new(self.value + o.value, self.dot + o.dot)
    }
}

impl Sub for DualValue {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        DualValue::new(self.value - o.value, self.dot - o.dot)
    }
}

impl Mul for DualValue {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        DualValue::new(self.value * o.value, self.dot * o.value + self.value * o.dot)
    }
}

impl Div for DualValue {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let num = self.dot * o.value - self.value * o.dot;
        DualValue::new(self.value / o.value, num / (o.value * o.value))
    }
}

impl Neg for DualValue {
    type Output = Self;
    fn neg(self) -> Self {
        DualValue::new(-self.value, -self.dot)
    }
}

/// Single-precision counterpart of [`DualValue`].
#[derive(Clone, Copy, Debug, PartialEq)]
struct Dual32 {
    value: f32,
    dot: f32,
}

impl Dual32 {
    fn arith(op: Arith, a: Self, b: Self) -> Self {
        let (v, d) = match op {
            Arith::Add => (a.value + b.value, a.dot + b.dot),
            Arith::Sub => (a.value - b.value, a.dot - b.dot),
            Arith::Mul => (a.value * b.value, a.dot * b.value + a.value * b.dot),
            Arith::Div => (a.value / b.value, (a.dot * b.value - a.value * b.dot) / (b.value * b.value)),
        };
        Dual32 { value: v, dot: d }
    }

    fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        Dual32 { value: r, dot: self.dot / (2.0 * r) }
    }

    fn abs(self) -> Self {
        let bits = self.value.to_bits();
        let abs = u32::MAX >> 1;
        let dot = if bits == u32::MAX || bits == 0 || bits == abs {
            0.0
        } else if bits >> 31 == 1 {
            -self.dot
        } else {
            self.dot
        };
        Dual32 { value: f32::from_bits(bits & abs), dot }
    }
}

fn arith64(op: Arith, a: DualValue, b: DualValue) -> DualValue {
    match op {
        Arith::Add => a + b,
        Arith::Sub => a - b,
        Arith::Mul => a * b,
        Arith::Div => a / b,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum V {
    F64(DualValue),
    F32(Dual32),
    /// Integers carry the dot bits they were reinterpreted from.
    I64(u64, u64),
    Bool(bool),
}

impl V {
    fn zero(ty: Ty) -> V {
        match ty {
            Ty::F64 => V::F64(DualValue::constant(0.0)),
            Ty::F32 => V::F32(Dual32 { value: 0.0, dot: 0.0 }),
            Ty::I64 => V::I64(0, 0),
            Ty::Bool => V::Bool(false),
        }
    }

    fn f64(self) -> DualValue {
        match self {
            V::F64(d) => d,
            other => panic!("expected f64, found {other:?}"),
        }
    }

    fn f32(self) -> Dual32 {
        match self {
            V::F32(d) => d,
            other => panic!("expected f32, found {other:?}"),
        }
    }

    fn int(self) -> u64 {
        match self {
            V::I64(v, _) => v,
            other => panic!("expected i64, found {other:?}"),
        }
    }

    fn bool(self) -> bool {
        match self {
            V::Bool(b) => b,
            other => panic!("expected bool, found {other:?}"),
        }
    }

    fn bits(self) -> (u64, u64) {
        match self {
            V::F64(d) => (d.value.to_bits(), d.dot.to_bits()),
            V::F32(d) => (d.value.to_bits() as u64, d.dot.to_bits() as u64),
            V::I64(v, d) => (v, d),
            V::Bool(b) => (b as u64, 0),
        }
    }

    fn from_bits(ty: Ty, value: u64, dot: u64) -> V {
        match ty {
            Ty::F64 => V::F64(DualValue::new(f64::from_bits(value), f64::from_bits(dot))),
            Ty::F32 => V::F32(Dual32 { value: f32::from_bits(value as u32), dot: f32::from_bits(dot as u32) }),
            Ty::I64 => V::I64(value, dot),
            Ty::Bool => V::Bool(value & 1 != 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("loop budget of {0} iterations exhausted")]
    Fuel(u64),
    #[error("array index {index} out of range for {name}")]
    Index { name: String, index: i64 },
}

/// One output of an oracle run, as raw bits of its declared type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleOutput {
    pub ty: Ty,
    pub value: u64,
    pub dot: u64,
}

impl OracleOutput {
    pub fn value_f64(&self) -> f64 {
        V::from_bits(self.ty, self.value, 0).as_f64()
    }

    pub fn dot_f64(&self) -> f64 {
        V::from_bits(self.ty, self.dot, 0).as_f64()
    }
}

impl V {
    fn as_f64(self) -> f64 {
        match self {
            V::F64(d) => d.value,
            V::F32(d) => d.value as f64,
            V::I64(v, _) => v as i64 as f64,
            V::Bool(b) => b as u8 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub outputs: Vec<OracleOutput>,
    pub printed: Vec<f64>,
}

struct Interp<'a> {
    prog: &'a TypedProgram,
    vars: Vec<Vec<V>>,
    inputs: &'a [f64],
    seed: Option<usize>,
    outputs: Vec<OracleOutput>,
    printed: Vec<f64>,
    fuel: u64,
    table: Vec<f64>,
}

impl Interp<'_> {
    fn tick(&mut self, limit: u64) -> Result<(), OracleError> {
        if self.fuel == 0 {
            return Err(OracleError::Fuel(limit));
        }
        self.fuel -= 1;
        Ok(())
    }

    fn slot(&mut self, p: &Place) -> Result<(usize, usize), OracleError> {
        match p {
            Place::Var(v) => Ok((*v, 0)),
            Place::Elem(v, i) => {
                let index = self.eval(i)?.int() as i64;
                if index < 0 || index as usize >= self.vars[*v].len() {
                    return Err(OracleError::Index { name: self.prog.vars[*v].name.clone(), index });
                }
                Ok((*v, index as usize))
            }
        }
    }

    fn eval(&mut self, e: &TExpr) -> Result<V, OracleError> {
        use TExpr::*;
        Ok(match e {
            F64(v) => V::F64(DualValue::constant(*v)),
            F32(v) => V::F32(Dual32 { value: *v, dot: 0.0 }),
            I64(v) => V::I64(*v as u64, 0),
            Bool(b) => V::Bool(*b),
            Read(p, _) => {
                let (v, i) = self.slot(p)?;
                self.vars[v][i]
            }
            Arith(op, fty, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                match fty {
                    FTy::F64 => V::F64(arith64(*op, a.f64(), b.f64())),
                    FTy::F32 => V::F32(Dual32::arith(*op, a.f32(), b.f32())),
                }
            }
            Sqrt(fty, a) => match (fty, self.eval(a)?) {
                (FTy::F64, a) => V::F64(a.f64().sqrt()),
                (FTy::F32, a) => V::F32(a.f32().sqrt()),
            },
            Neg(fty, a) => match (fty, self.eval(a)?) {
                (FTy::F64, a) => V::F64(-a.f64()),
                (FTy::F32, a) => {
                    let a = a.f32();
                    V::F32(Dual32 { value: -a.value, dot: -a.dot })
                }
            },
            Abs(fty, a) => match (fty, self.eval(a)?) {
                (FTy::F64, a) => V::F64(a.f64().abs()),
                (FTy::F32, a) => V::F32(a.f32().abs()),
            },
            Int(op, a, b) => {
                let (a, b) = (self.eval(a)?.int(), self.eval(b)?.int());
                V::I64(
                    match op {
                        IntOp::Add => a.wrapping_add(b),
                        IntOp::Sub => a.wrapping_sub(b),
                        IntOp::Mul => a.wrapping_mul(b),
                    },
                    0,
                )
            }
            IntBits(op, a, b) => {
                let ((a, ad), (b, bd)) = (self.eval(a)?.bits(), self.eval(b)?.bits());
                let d = ad_bitlogic(*op, a as u128, b as u128, ad as u128, bd as u128, 64) as u64;
                V::I64(bitop(*op, a, b), d)
            }
            Cmp(rel, ty, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                V::Bool(match ty {
                    Ty::F64 => compare(*rel, a.f64().value, b.f64().value),
                    Ty::F32 => compare(*rel, a.f32().value, b.f32().value),
                    _ => compare(*rel, a.int() as i64, b.int() as i64),
                })
            }
            And(a, b) => {
                let a = self.eval(a)?.bool();
                let b = self.eval(b)?.bool();
                V::Bool(a & b)
            }
            Or(a, b) => {
                let a = self.eval(a)?.bool();
                let b = self.eval(b)?.bool();
                V::Bool(a | b)
            }
            Not(a) => V::Bool(!self.eval(a)?.bool()),
            Math(f, args) => {
                let mut xs = Vec::with_capacity(args.len());
                let mut ds = Vec::with_capacity(args.len());
                for a in args {
                    let d = self.eval(a)?.f64();
                    xs.push(d.value);
                    ds.push(d.dot);
                }
                V::F64(DualValue::new(f.value(&xs), f.dot(&xs, &ds)))
            }
            Cast { from, to, arg } => cast(*from, *to, self.eval(arg)?),
            Select(_, c, a, b) => {
                let c = self.eval(c)?.bool();
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                if c {
                    a
                } else {
                    b
                }
            }
            SoftSin(x) => {
                let x = self.eval(x)?.f64();
                V::F64(softmath::soft_sin(self, &x))
            }
            Bits(op, a, m) => {
                let (a, ad) = self.eval(a)?.bits();
                let d = ad_bitlogic(*op, a as u128, *m as u128, ad as u128, 0, 64) as u64;
                V::from_bits(Ty::F64, bitop(*op, a, *m), d)
            }
            ToBits(a) => {
                let (v, d) = self.eval(a)?.bits();
                V::I64(v, d)
            }
            FromBits(a) => {
                let (v, d) = self.eval(a)?.bits();
                V::from_bits(Ty::F64, v, d)
            }
            Input(k) => {
                let k = *k as usize;
                let v = self.inputs.get(k).copied().unwrap_or(0.0);
                V::F64(DualValue::new(v, if self.seed == Some(k) { 1.0 } else { 0.0 }))
            }
            GetDot(p, ty) => {
                let (v, i) = self.slot(p)?;
                let (_, d) = self.vars[v][i].bits();
                V::from_bits(*ty, d, 0)
            }
        })
    }

    fn exec(&mut self, stmts: &[TStmt], limit: u64) -> Result<(), OracleError> {
        for s in stmts {
            match &s.kind {
                TStmtKind::Assign(p, e) => {
                    let v = self.eval(e)?;
                    let (var, i) = self.slot(p)?;
                    self.vars[var][i] = v;
                }
                TStmtKind::ArrayOp { op, fty, len, dst, lhs, rhs } => {
                    for i in 0..*len {
                        let (a, b) = (self.vars[*lhs][i], self.vars[*rhs][i]);
                        self.vars[*dst][i] = match fty {
                            FTy::F64 => V::F64(arith64(*op, a.f64(), b.f64())),
                            FTy::F32 => V::F32(Dual32::arith(*op, a.f32(), b.f32())),
                        };
                    }
                }
                TStmtKind::If(c, t, e) => {
                    if self.eval(c)?.bool() {
                        self.exec(t, limit)?;
                    } else {
                        self.exec(e, limit)?;
                    }
                }
                TStmtKind::While(c, body) => {
                    while self.eval(c)?.bool() {
                        self.tick(limit)?;
                        self.exec(body, limit)?;
                    }
                }
                TStmtKind::For { var, lo, hi, body } => {
                    let mut i = *lo;
                    while i < *hi {
                        self.tick(limit)?;
                        self.vars[*var][0] = V::I64(i as u64, 0);
                        self.exec(body, limit)?;
                        i += 1;
                    }
                    self.vars[*var][0] = V::I64(i as u64, 0);
                }
                TStmtKind::Print(e) => {
                    let v = self.eval(e)?.as_f64();
                    self.printed.push(v);
                }
                TStmtKind::Output(j, e) => {
                    let v = self.eval(e)?;
                    let ty = self.prog.outputs[*j].1;
                    let (value, dot) = v.bits();
                    self.outputs[*j] = OracleOutput { ty, value, dot };
                }
                TStmtKind::SetDot(p, e) => {
                    let d = self.eval(e)?;
                    let (var, i) = self.slot(p)?;
                    let (value, _) = self.vars[var][i].bits();
                    let (dot, _) = d.bits();
                    self.vars[var][i] = V::from_bits(self.prog.vars[var].ty, value, dot);
                }
            }
        }
        Ok(())
    }
}

fn bitop(op: BitOp, a: u64, b: u64) -> u64 {
    match op {
        BitOp::And => a & b,
        BitOp::Or => a | b,
        BitOp::Xor => a ^ b,
    }
}

fn compare<T: PartialOrd>(rel: Rel, a: T, b: T) -> bool {
    match rel {
        Rel::Lt => a < b,
        Rel::Le => a <= b,
        Rel::Gt => a > b,
        Rel::Ge => a >= b,
        Rel::Eq => a == b,
        Rel::Ne => a != b,
    }
}

fn cast(from: Ty, to: Ty, v: V) -> V {
    match (from, to) {
        (a, b) if a == b => v,
        (Ty::F64, Ty::F32) => {
            let d = v.f64();
            V::F32(Dual32 { value: d.value as f32, dot: d.dot as f32 })
        }
        (Ty::F32, Ty::F64) => {
            let d = v.f32();
            V::F64(DualValue::new(d.value as f64, d.dot as f64))
        }
        (Ty::I64, Ty::F64) => V::F64(DualValue::constant(v.int() as i64 as f64)),
        (Ty::I64, Ty::F32) => V::F32(Dual32 { value: (v.int() as i64 as f64) as f32, dot: 0.0 }),
        (Ty::F64, Ty::I64) => V::I64(f64_to_i64(v.f64().value), 0),
        (Ty::F32, Ty::I64) => V::I64(f64_to_i64(v.f32().value as f64), 0),
        (from, to) => panic!("no cast from {} to {}", from.name(), to.name()),
    }
}

impl SoftArith for Interp<'_> {
    type F = DualValue;
    type I = u64;

    fn konst(&mut self, v: f64) -> DualValue {
        DualValue::constant(v)
    }
    fn add(&mut self, a: &DualValue, b: &DualValue) -> DualValue {
        *a + *b
    }
    fn sub(&mut self, a: &DualValue, b: &DualValue) -> DualValue {
        *a - *b
    }
    fn mul(&mut self, a: &DualValue, b: &DualValue) -> DualValue {
        *a * *b
    }
    fn to_int(&mut self, a: &DualValue) -> u64 {
        f64_to_i64(a.value)
    }
    fn mask(&mut self, a: &u64, m: u64) -> u64 {
        a & m
    }
    fn table(&mut self, idx: &u64, cosine: bool) -> DualValue {
        DualValue::constant(self.table[*idx as usize + if cosine { TABLE_SIZE } else { 0 }])
    }
}

pub const DEFAULT_LOOP_BUDGET: u64 = 10_000_000;

/// Runs a checked program over dual numbers.
pub fn oracle_eval_typed(
    prog: &TypedProgram,
    inputs: &[f64],
    seed: Option<usize>,
    loop_budget: u64,
) -> Result<OracleRun, OracleError> {
    let mut it = Interp {
        prog,
        vars: prog.vars.iter().map(|v| vec![V::zero(v.ty); v.len.unwrap_or(1)]).collect(),
        inputs,
        seed,
        outputs: prog.outputs.iter().map(|(_, ty)| OracleOutput { ty: *ty, value: 0, dot: 0 }).collect(),
        printed: Vec::new(),
        fuel: loop_budget,
        table: if prog.uses_softsin { softmath::table_values() } else { Vec::new() },
    };
    it.exec(&prog.stmts, loop_budget)?;
    Ok(OracleRun { outputs: it.outputs, printed: it.printed })
}

/// Output values and dots of `src` with input `seed` carrying dot 1.
pub fn oracle_eval(
    src: &str,
    inputs: &[f64],
    seed: Option<usize>,
    options: CompileOptions,
) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
    let c = compile(src, options)?;
    let r = oracle_eval_typed(&c.typed, inputs, seed, DEFAULT_LOOP_BUDGET)?;
    Ok((r.outputs.iter().map(|o| o.value_f64()).collect(), r.outputs.iter().map(|o| o.dot_f64()).collect()))
}
