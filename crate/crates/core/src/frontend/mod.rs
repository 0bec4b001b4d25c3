//! Compiler for minilang (`.ml64`), a small imperative language over
//! doubles, floats and fixed-size arrays. See `docs/minilang.md`.

pub mod ast;
mod gen;
mod lower;
mod parser;
pub mod softmath;
mod typeck;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use ast::{Ty, TypedProgram};
pub use gen::{class_coverage, gen_random, Generated};
pub use parser::parse;

use crate::ir::Program;
use crate::mathwrap::MathFn;

/// Fixed addresses used by compiled programs.
pub mod layout {
    /// `input(k)` reads the f64 at `INPUT + 8k`.
    pub const INPUT: u64 = 0x10000;
    /// `output(..)` number j writes to `OUTPUT + 8j`.
    pub const OUTPUT: u64 = 0x12000;
    /// Staging area for client requests on register-held scalars.
    pub const SPILL: u64 = 0x13000;
    pub const SETDOT_SRC: u64 = 0x13008;
    pub const GETDOT_OUT: u64 = 0x13010;
    /// Lookup table of the soft sine.
    pub const TABLE: u64 = 0x14000;
    /// First array.
    pub const ARRAYS: u64 = 0x100000;
    /// Address of the entry superblock.
    pub const CODE: u64 = 0x400000;
    pub const BLOCK_STRIDE: u64 = 0x10000;
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct CompileError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl CompileError {
    pub(crate) fn at(pos: ast::Pos, msg: impl Into<String>) -> Self {
        CompileError { line: pos.line, col: pos.col, msg: msg.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// Byte offset in the guest state.
    Guest(u32),
    Memory { addr: u64, len: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub ty: Ty,
    pub location: Location,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Location::Guest(off) => write!(f, "{} {}: guest+{off}", self.ty.name(), self.name),
            Location::Memory { addr, len } => write!(f, "{} {}[{len}]: {addr:#x}", self.ty.name(), self.name),
        }
    }
}

/// Inputs, outputs and which input carries the seed dot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProgramSpec {
    pub n_inputs: usize,
    pub m_outputs: usize,
    pub seed: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct CompileOptions {
    /// Compile `sin` to the table-driven soft sine instead of a math call.
    pub soft_math: bool,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub program: Program,
    pub typed: TypedProgram,
    pub symbols: Vec<Symbol>,
    /// Source line of each IMark address.
    pub lines: BTreeMap<u64, usize>,
}

impl Compiled {
    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }

    /// Memory address of a variable, for arrays and client requests.
    pub fn address_of(&self, name: &str) -> Option<u64> {
        match self.symbol(name)?.location {
            Location::Memory { addr, .. } => Some(addr),
            Location::Guest(_) => None,
        }
    }

    pub fn spec(&self, seed: usize) -> ProgramSpec {
        ProgramSpec { n_inputs: self.typed.n_inputs, m_outputs: self.typed.outputs.len(), seed }
    }
}

fn soften(e: &mut ast::TExpr, hit: &mut bool) {
    use ast::TExpr::*;
    if let Math(MathFn::Sin, args) = e {
        let x = args.pop().expect("sin has one argument");
        *e = SoftSin(Box::new(x));
        *hit = true;
    }
    match e {
        Read(ast::Place::Elem(_, a), _) | GetDot(ast::Place::Elem(_, a), _) => soften(a, hit),
        Arith(_, _, a, b) | Int(_, a, b) | IntBits(_, a, b) | Cmp(_, _, a, b) | And(a, b) | Or(a, b) => {
            soften(a, hit);
            soften(b, hit)
        }
        Sqrt(_, a) | Neg(_, a) | Abs(_, a) | Not(a) | SoftSin(a) | Bits(_, a, _) | ToBits(a) | FromBits(a) => {
            soften(a, hit)
        }
        Cast { arg, .. } => soften(arg, hit),
        Math(_, args) => args.iter_mut().for_each(|a| soften(a, hit)),
        Select(_, c, a, b) => {
            soften(c, hit);
            soften(a, hit);
            soften(b, hit)
        }
        _ => {}
    }
}

fn soften_stmts(stmts: &mut [ast::TStmt], hit: &mut bool) {
    use ast::TStmtKind::*;
    for s in stmts.iter_mut() {
        match &mut s.kind {
            Assign(p, e) | SetDot(p, e) => {
                if let ast::Place::Elem(_, i) = p {
                    soften(i, hit);
                }
                soften(e, hit);
            }
            Print(e) | Output(_, e) => soften(e, hit),
            If(c, t, e) => {
                soften(c, hit);
                soften_stmts(t, hit);
                soften_stmts(e, hit);
            }
            While(c, b) => {
                soften(c, hit);
                soften_stmts(b, hit);
            }
            For { body, .. } => soften_stmts(body, hit),
            ArrayOp { .. } => {}
        }
    }
}

/// Parses, type-checks and lowers a minilang program.
pub fn compile(src: &str, options: CompileOptions) -> Result<Compiled, CompileError> {
    let parsed = parser::parse(src)?;
    let mut typed = typeck::check(&parsed)?;
    if options.soft_math {
        let mut hit = false;
        soften_stmts(&mut typed.stmts, &mut hit);
        typed.uses_softsin |= hit;
    }
    let l = lower::lower(&typed)?;
    Ok(Compiled { program: l.program, typed, symbols: l.symbols, lines: l.lines })
}

#[cfg(test)]
mod tests;
