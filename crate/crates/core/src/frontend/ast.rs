//! Syntax trees: the parser's output and the type checker's output.

use crate::instrument::BitOp;
use crate::mathwrap::MathFn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    F64,
    F32,
    I64,
    Bool,
}

impl Ty {
    pub fn name(self) -> &'static str {
        match self {
            Ty::F64 => "f64",
            Ty::F32 => "f32",
            Ty::I64 => "i64",
            Ty::Bool => "bool",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Ty::F64 | Ty::F32)
    }

    /// Bytes occupied in memory.
    pub fn size(self) -> u64 {
        match self {
            Ty::F32 => 4,
            _ => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    BitAnd,
    BitOr,
    BitXor,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    /// Numeric literal; `int_syntax` if written without a point or exponent.
    Num { value: f64, int_syntax: bool },
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LValue {
    Var(String),
    Elem(String, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Decl { ty: Ty, name: String, len: Option<usize>, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    For { var: String, lo: i64, hi: i64, body: Vec<Stmt> },
    Print(Expr),
    Output(Expr),
    SetDot { target: LValue, dot: Expr },
    Block(Vec<Stmt>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SourceProgram {
    pub sse: bool,
    pub stmts: Vec<Stmt>,
}

// Typed form.

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FTy {
    F64,
    F32,
}

impl FTy {
    pub fn ty(self) -> Ty {
        match self {
            FTy::F64 => Ty::F64,
            FTy::F32 => Ty::F32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Place {
    Var(VarId),
    Elem(VarId, Box<TExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TExpr {
    F64(f64),
    F32(f32),
    I64(i64),
    Bool(bool),
    Read(Place, Ty),
    Arith(Arith, FTy, Box<TExpr>, Box<TExpr>),
    Sqrt(FTy, Box<TExpr>),
    Neg(FTy, Box<TExpr>),
    Abs(FTy, Box<TExpr>),
    Int(IntOp, Box<TExpr>, Box<TExpr>),
    IntBits(BitOp, Box<TExpr>, Box<TExpr>),
    Cmp(Rel, Ty, Box<TExpr>, Box<TExpr>),
    And(Box<TExpr>, Box<TExpr>),
    Or(Box<TExpr>, Box<TExpr>),
    Not(Box<TExpr>),
    Math(MathFn, Vec<TExpr>),
    Cast { from: Ty, to: Ty, arg: Box<TExpr> },
    Select(FTy, Box<TExpr>, Box<TExpr>, Box<TExpr>),
    SoftSin(Box<TExpr>),
    /// `bits_*64(e, mask)`: bitwise op on the binary64 pattern.
    Bits(BitOp, Box<TExpr>, u64),
    ToBits(Box<TExpr>),
    FromBits(Box<TExpr>),
    Input(u32),
    GetDot(Place, Ty),
}

impl TExpr {
    pub fn ty(&self) -> Ty {
        match self {
            TExpr::F64(_) => Ty::F64,
            TExpr::F32(_) => Ty::F32,
            TExpr::I64(_) => Ty::I64,
            TExpr::Bool(_) => Ty::Bool,
            TExpr::Read(_, t) | TExpr::GetDot(_, t) => *t,
            TExpr::Arith(_, f, ..) | TExpr::Sqrt(f, _) | TExpr::Neg(f, _) | TExpr::Abs(f, _) | TExpr::Select(f, ..) => {
                f.ty()
            }
            TExpr::Int(..) | TExpr::IntBits(..) | TExpr::ToBits(_) => Ty::I64,
            TExpr::Cmp(..) | TExpr::And(..) | TExpr::Or(..) | TExpr::Not(_) => Ty::Bool,
            TExpr::Math(..) | TExpr::SoftSin(_) | TExpr::Bits(..) | TExpr::FromBits(_) | TExpr::Input(_) => Ty::F64,
            TExpr::Cast { to, .. } => *to,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TStmtKind {
    Assign(Place, TExpr),
    /// Whole-array `dst = lhs op rhs`.
    ArrayOp { op: Arith, fty: FTy, len: usize, dst: VarId, lhs: VarId, rhs: VarId },
    If(TExpr, Vec<TStmt>, Vec<TStmt>),
    While(TExpr, Vec<TStmt>),
    For { var: VarId, lo: i64, hi: i64, body: Vec<TStmt> },
    Print(TExpr),
    Output(usize, TExpr),
    SetDot(Place, TExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TStmt {
    pub kind: TStmtKind,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub ty: Ty,
    /// Element count for arrays.
    pub len: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypedProgram {
    pub sse: bool,
    pub vars: Vec<VarInfo>,
    pub stmts: Vec<TStmt>,
    /// Type of each `output(..)` slot, in source order.
    pub outputs: Vec<(String, Ty)>,
    pub n_inputs: usize,
    pub uses_softsin: bool,
}
