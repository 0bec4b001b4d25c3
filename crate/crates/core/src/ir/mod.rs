//! VEX-like intermediate representation.
//!
//! A [`Program`] is a map from guest code addresses to [`Superblock`]s. Each
//! superblock is a flat list of [`Stmt`]s over single-assignment temporaries,
//! guest-state registers addressed by byte offset, and little-endian memory.

mod opcode;
mod parse;
mod print;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use opcode::{OpClass, Opcode};
pub use parse::{parse_asm, ParseError};
pub use opcode::cmpf;
pub use validate::{validate, validate_block, validate_with_guest_limit, Diagnostic, DiagnosticKind, GUEST_STATE_SIZE};

/// Index of a temporary within one superblock.
pub type Tmp = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IrType {
    I1,
    I8,
    I16,
    I32,
    I64,
    F32,
    F64,
    V128,
}

impl IrType {
    pub const ALL: [IrType; 8] = [
        IrType::I1,
        IrType::I8,
        IrType::I16,
        IrType::I32,
        IrType::I64,
        IrType::F32,
        IrType::F64,
        IrType::V128,
    ];

    /// Storage width in bytes. `I1` occupies a full byte.
    pub const fn width(self) -> usize {
        match self {
            IrType::I1 | IrType::I8 => 1,
            IrType::I16 => 2,
            IrType::I32 | IrType::F32 => 4,
            IrType::I64 | IrType::F64 => 8,
            IrType::V128 => 16,
        }
    }

    pub const fn bits(self) -> u32 {
        match self {
            IrType::I1 => 1,
            other => other.width() as u32 * 8,
        }
    }

    /// Mask selecting the meaningful bits of a value of this type.
    pub const fn mask(self) -> u128 {
        match self {
            IrType::V128 => u128::MAX,
            other => (1u128 << other.bits()) - 1,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, IrType::F32 | IrType::F64)
    }

    pub fn name(self) -> &'static str {
        match self {
            IrType::I1 => "I1",
            IrType::I8 => "I8",
            IrType::I16 => "I16",
            IrType::I32 => "I32",
            IrType::I64 => "I64",
            IrType::F32 => "F32",
            IrType::F64 => "F64",
            IrType::V128 => "V128",
        }
    }

    pub fn from_name(s: &str) -> Option<IrType> {
        IrType::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A literal of a given type. `bits` holds the little-endian value in its
/// low `ty.width()` bytes; higher bits are always zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Const {
    pub ty: IrType,
    pub bits: u128,
}

impl Const {
    pub fn new(ty: IrType, bits: u128) -> Self {
        Const { ty, bits: bits & ty.mask() }
    }

    pub fn zero(ty: IrType) -> Self {
        Const { ty, bits: 0 }
    }

    pub fn f64(v: f64) -> Self {
        Const::new(IrType::F64, v.to_bits() as u128)
    }

    pub fn f32(v: f32) -> Self {
        Const::new(IrType::F32, v.to_bits() as u128)
    }

    pub fn i64(v: u64) -> Self {
        Const::new(IrType::I64, v as u128)
    }

    pub fn i32(v: u32) -> Self {
        Const::new(IrType::I32, v as u128)
    }

    pub fn bool(v: bool) -> Self {
        Const::new(IrType::I1, v as u128)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    RdTmp(Tmp),
    Get { offset: u32, ty: IrType },
    Load { addr: Box<Expr>, ty: IrType },
    Op { op: Opcode, args: Vec<Expr> },
    Const(Const),
    Ite { cond: Box<Expr>, then: Box<Expr>, els: Box<Expr> },
    CCall { name: String, args: Vec<Expr>, ty: IrType },
}

impl Expr {
    pub fn op(op: Opcode, args: Vec<Expr>) -> Expr {
        Expr::Op { op, args }
    }

    pub fn op1(op: Opcode, a: Expr) -> Expr {
        Expr::Op { op, args: vec![a] }
    }

    pub fn op2(op: Opcode, a: Expr, b: Expr) -> Expr {
        Expr::Op { op, args: vec![a, b] }
    }

    pub fn get(offset: u32, ty: IrType) -> Expr {
        Expr::Get { offset, ty }
    }

    pub fn load(addr: Expr, ty: IrType) -> Expr {
        Expr::Load { addr: Box::new(addr), ty }
    }

    pub fn ite(cond: Expr, then: Expr, els: Expr) -> Expr {
        Expr::Ite { cond: Box::new(cond), then: Box::new(then), els: Box::new(els) }
    }

    pub fn konst(c: Const) -> Expr {
        Expr::Const(c)
    }

    pub fn zero(ty: IrType) -> Expr {
        Expr::Const(Const::zero(ty))
    }

    /// Static type of the expression, given the declared temporary types.
    /// Returns `None` for references to undeclared temporaries.
    pub fn type_of(&self, tmp_types: &[IrType]) -> Option<IrType> {
        match self {
            Expr::RdTmp(t) => tmp_types.get(*t as usize).copied(),
            Expr::Get { ty, .. } | Expr::Load { ty, .. } | Expr::CCall { ty, .. } => Some(*ty),
            Expr::Const(c) => Some(c.ty),
            Expr::Op { op, .. } => Some(op.result_type()),
            Expr::Ite { then, .. } => then.type_of(tmp_types),
        }
    }

    /// Calls `f` on every temporary read by this expression.
    pub fn for_each_tmp(&self, f: &mut impl FnMut(Tmp)) {
        match self {
            Expr::RdTmp(t) => f(*t),
            Expr::Get { .. } | Expr::Const(_) => {}
            Expr::Load { addr, .. } => addr.for_each_tmp(f),
            Expr::Op { args, .. } | Expr::CCall { args, .. } => {
                args.iter().for_each(|a| a.for_each_tmp(f))
            }
            Expr::Ite { cond, then, els } => {
                cond.for_each_tmp(f);
                then.for_each_tmp(f);
                els.for_each_tmp(f);
            }
        }
    }

    /// Calls `f` on this expression and every sub-expression, pre-order.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::RdTmp(_) | Expr::Get { .. } | Expr::Const(_) => {}
            Expr::Load { addr, .. } => addr.visit(f),
            Expr::Op { args, .. } | Expr::CCall { args, .. } => args.iter().for_each(|a| a.visit(f)),
            Expr::Ite { cond, then, els } => {
                cond.visit(f);
                then.visit(f);
                els.visit(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    WrTmp { tmp: Tmp, expr: Expr },
    Put { offset: u32, expr: Expr },
    Store { addr: Expr, data: Expr },
    StoreG { guard: Expr, addr: Expr, data: Expr },
    Cas { old: Tmp, addr: Expr, expected: Expr, new: Expr },
    Dirty { name: String, args: Vec<Expr>, dst: Option<Tmp> },
    IMark { addr: u64, len: u32 },
    Exit { guard: Expr, target: u64 },
    Halt,
}

impl Stmt {
    /// Unconditional jump, encoded as an exit with a constant-true guard.
    pub fn goto(target: u64) -> Stmt {
        Stmt::Exit { guard: Expr::Const(Const::bool(true)), target }
    }

    /// Temporary assigned by this statement, if any.
    pub fn dest(&self) -> Option<Tmp> {
        match self {
            Stmt::WrTmp { tmp, .. } => Some(*tmp),
            Stmt::Cas { old, .. } => Some(*old),
            Stmt::Dirty { dst, .. } => *dst,
            _ => None,
        }
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::WrTmp { expr, .. } | Stmt::Put { expr, .. } => vec![expr],
            Stmt::Store { addr, data } => vec![addr, data],
            Stmt::StoreG { guard, addr, data } => vec![guard, addr, data],
            Stmt::Cas { addr, expected, new, .. } => vec![addr, expected, new],
            Stmt::Dirty { args, .. } => args.iter().collect(),
            Stmt::Exit { guard, .. } => vec![guard],
            Stmt::IMark { .. } | Stmt::Halt => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superblock {
    pub addr: u64,
    pub tmp_types: Vec<IrType>,
    pub stmts: Vec<Stmt>,
}

impl Superblock {
    pub fn new(addr: u64) -> Self {
        Superblock { addr, tmp_types: Vec::new(), stmts: Vec::new() }
    }

    pub fn tmp_count(&self) -> u32 {
        self.tmp_types.len() as u32
    }

    pub fn new_tmp(&mut self, ty: IrType) -> Tmp {
        self.tmp_types.push(ty);
        self.tmp_types.len() as Tmp - 1
    }

    /// Addresses of all IMark statements in this block.
    pub fn imarks(&self) -> impl Iterator<Item = u64> + '_ {
        self.stmts.iter().filter_map(|s| match s {
            Stmt::IMark { addr, .. } => Some(*addr),
            _ => None,
        })
    }
}

/// A named memory cell the host reads back after execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSlot {
    pub name: String,
    pub addr: u64,
    pub ty: IrType,
}

/// Initial memory contents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSegment {
    pub addr: u64,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub entry: u64,
    pub blocks: BTreeMap<u64, Superblock>,
    pub outputs: Vec<OutputSlot>,
    pub data: Vec<DataSegment>,
}

impl Program {
    pub fn new(entry: u64) -> Self {
        Program { entry, blocks: BTreeMap::new(), outputs: Vec::new(), data: Vec::new() }
    }

    pub fn insert(&mut self, sb: Superblock) {
        self.blocks.insert(sb.addr, sb);
    }

    pub fn block(&self, addr: u64) -> Option<&Superblock> {
        self.blocks.get(&addr)
    }

    /// Structural JSON dump.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR is always serializable")
    }

    pub fn stmt_count(&self) -> usize {
        self.blocks.values().map(|b| b.stmts.len()).sum()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_program(f, self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self)
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_stmt(f, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(IrType::I1.width(), 1);
        assert_eq!(IrType::I8.width(), 1);
        assert_eq!(IrType::I16.width(), 2);
        assert_eq!(IrType::I32.width(), 4);
        assert_eq!(IrType::I64.width(), 8);
        assert_eq!(IrType::F32.width(), 4);
        assert_eq!(IrType::F64.width(), 8);
        assert_eq!(IrType::V128.width(), 16);
    }

    #[test]
    fn const_masks_to_width() {
        assert_eq!(Const::new(IrType::I8, 0x1ff).bits, 0xff);
        assert_eq!(Const::new(IrType::I1, 2).bits, 0);
        assert_eq!(Const::new(IrType::V128, u128::MAX).bits, u128::MAX);
    }
}
