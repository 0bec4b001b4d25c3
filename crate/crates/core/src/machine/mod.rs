//! The synthetic CPU.
//!
//! Guest state is a byte block of `3 * GUEST_BAND` bytes: architectural
//! registers, their shadows at `+GUEST_BAND`, and a reserved band. Memory
//! and shadow memory are both [`ShadowMap`]s. Execution is statement by
//! statement through a frame kept in [`MachineState`], so callers can stop
//! inside a superblock (the monitor does) or run whole blocks at a time.

mod builtins;
mod eval;
mod threads;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ir::{Expr, IrType, Program, Stmt, Superblock, Tmp};
use crate::shadowmem::ShadowMap;

pub use eval::{eval_op, f64_to_i32, f64_to_i64};
pub use threads::{run_threads, Thread, ThreadRun, ThreadSet};

/// Size of one guest-state band (`m_gs`).
pub const GUEST_BAND: u32 = crate::ir::GUEST_STATE_SIZE;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("unhandled opcode {0}")]
    UnhandledOpcode(String),
    #[error("fuel exhausted after {0} superblocks")]
    FuelExhausted(u64),
    #[error("unknown dirty call {0}")]
    UnknownDirty(String),
    #[error("unknown helper {0}")]
    UnknownCCall(String),
    #[error("read of undefined temporary t{tmp} in block {block:#x}")]
    UndefinedTemp { block: u64, tmp: Tmp },
    #[error("no superblock at {0:#x}")]
    MissingBlock(u64),
    #[error("execution ran past the end of block {0:#x}")]
    FellOffBlock(u64),
    #[error("guest offset {offset} (+{width}) outside the guest state")]
    GuestOffset { offset: u32, width: u32 },
    #[error("dirty call {name}: {msg}")]
    BadDirtyCall { name: String, msg: String },
    #[error("no input in slot {0}")]
    MissingInput(u64),
    #[error("untyped expression in block {0:#x}")]
    Untyped(u64),
}

/// A typed runtime value. `bits` is zero above the type's width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Value {
    pub ty: IrType,
    pub bits: u128,
}

impl Value {
    pub fn u64(&self) -> u64 {
        self.bits as u64
    }

    pub fn f64(&self) -> f64 {
        f64::from_bits(self.bits as u64)
    }
}

pub(crate) struct Frame {
    block: u64,
    index: usize,
    tmps: Vec<Option<u128>>,
}

pub struct MachineState {
    pub guest: Vec<u8>,
    pub memory: ShadowMap,
    pub shadow: ShadowMap,
    pub pc: u64,
    pub halted: bool,
    /// Address of the most recently executed IMark.
    pub last_imark: Option<u64>,
    /// Values returned by `read_input`, indexed by slot.
    pub inputs: Vec<f64>,
    /// Values passed to `print_f64`, in order.
    pub printed: Vec<f64>,
    frame: Option<Frame>,
}

impl fmt::Debug for MachineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MachineState")
            .field("pc", &format_args!("{:#x}", self.pc))
            .field("halted", &self.halted)
            .field("memory", &self.memory)
            .field("shadow", &self.shadow)
            .finish_non_exhaustive()
    }
}

impl Default for MachineState {
    fn default() -> Self {
        Self::new()
    }
}

impl MachineState {
    pub fn new() -> Self {
        MachineState {
            guest: vec![0; 3 * GUEST_BAND as usize],
            memory: ShadowMap::new(),
            shadow: ShadowMap::new(),
            pc: 0,
            halted: false,
            last_imark: None,
            inputs: Vec::new(),
            printed: Vec::new(),
            frame: None,
        }
    }

    /// Fresh state positioned at the program entry with data segments loaded.
    pub fn for_program(program: &Program) -> Self {
        let mut s = Self::new();
        s.pc = program.entry;
        for d in &program.data {
            s.memory.write(d.addr, &d.bytes);
        }
        s
    }

    pub fn with_inputs(mut self, inputs: &[f64]) -> Self {
        self.inputs = inputs.to_vec();
        self
    }

    fn guest_range(&self, offset: u32, width: u32) -> Result<std::ops::Range<usize>, Fault> {
        let end = offset as usize + width as usize;
        if end > self.guest.len() {
            return Err(Fault::GuestOffset { offset, width });
        }
        Ok(offset as usize..end)
    }

    pub fn get_guest(&self, offset: u32, ty: IrType) -> Result<u128, Fault> {
        let r = self.guest_range(offset, ty.width() as u32)?;
        let mut buf = [0u8; 16];
        buf[..r.len()].copy_from_slice(&self.guest[r]);
        Ok(u128::from_le_bytes(buf))
    }

    pub fn put_guest(&mut self, offset: u32, ty: IrType, bits: u128) -> Result<(), Fault> {
        let r = self.guest_range(offset, ty.width() as u32)?;
        let n = r.len();
        self.guest[r].copy_from_slice(&bits.to_le_bytes()[..n]);
        Ok(())
    }

    pub fn load(&self, addr: u64, ty: IrType) -> u128 {
        self.memory.read_uint(addr, ty.width())
    }

    pub fn store(&mut self, addr: u64, ty: IrType, bits: u128) {
        self.memory.write_uint(addr, ty.width(), bits)
    }

    pub fn load_f64(&self, addr: u64) -> f64 {
        f64::from_bits(self.load(addr, IrType::F64) as u64)
    }

    pub fn shadow_f64(&self, addr: u64) -> f64 {
        f64::from_bits(self.shadow.read_uint(addr, 8) as u64)
    }

    /// True while stopped inside a superblock.
    pub fn mid_block(&self) -> bool {
        self.frame.is_some()
    }
}

/// Outcome of compare-and-swap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CasResult {
    pub old: Vec<u8>,
    pub success: bool,
}

/// Compare-and-swap on memory, optionally also comparing and writing the
/// shadow. With `compare_shadow`, the swap happens only if both the value
/// and its shadow match, and then both are written; otherwise neither is.
#[allow(clippy::too_many_arguments)]
pub fn cas_step(
    state: &mut MachineState,
    addr: u64,
    expected: &[u8],
    new: &[u8],
    expected_shadow: &[u8],
    new_shadow: &[u8],
    compare_shadow: bool,
) -> CasResult {
    assert_eq!(expected.len(), new.len(), "cas operands differ in width");
    let old = state.memory.read(addr, expected.len());
    let mut success = old == expected;
    if compare_shadow {
        assert_eq!(expected_shadow.len(), expected.len(), "cas shadow width");
        assert_eq!(new_shadow.len(), expected.len(), "cas shadow width");
        success &= state.shadow.read(addr, expected.len()) == expected_shadow;
    }
    if success {
        state.memory.write(addr, new);
        if compare_shadow {
            state.shadow.write(addr, new_shadow);
        }
    }
    CasResult { old, success }
}

pub type DirtyFn =
    Arc<dyn Fn(&mut MachineState, &[Value], Option<IrType>) -> Result<Option<u128>, Fault> + Send + Sync>;

/// Pure helper reachable through `CCall` expressions: arguments and the
/// declared result type in, result bits out.
pub type CCallFn = Arc<dyn Fn(&[u128], IrType) -> u128 + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("`{0}` is already registered")]
pub struct DuplicateName(pub String);

/// Host behaviors reachable from IR: dirty calls and CCall helpers.
#[derive(Clone, Default)]
pub struct Machine {
    dirty: HashMap<String, DirtyFn>,
    ccall: HashMap<String, CCallFn>,
}

impl fmt::Debug for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d: Vec<_> = self.dirty.keys().collect();
        d.sort();
        let mut c: Vec<_> = self.ccall.keys().collect();
        c.sort();
        f.debug_struct("Machine").field("dirty", &d).field("ccall", &c).finish()
    }
}

/// Result of executing one statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Continue,
    /// Control left the superblock; `pc` holds the next block.
    BlockEnd,
    Halted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub blocks: u64,
    pub stmts: u64,
}

enum Flow {
    Next,
    Jump(u64),
    Halt,
}

impl Machine {
    /// A machine with no registered behaviors.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A machine with the built-in dirty calls: shadow access, 80-bit
    /// conversions, client requests, printing and input.
    pub fn with_builtins() -> Self {
        let mut m = Self::empty();
        builtins::register(&mut m);
        m
    }

    pub fn register_dirty(&mut self, name: &str, f: DirtyFn) -> Result<(), DuplicateName> {
        if self.dirty.contains_key(name) {
            return Err(DuplicateName(name.to_string()));
        }
        self.dirty.insert(name.to_string(), f);
        Ok(())
    }

    pub fn register_ccall(&mut self, name: &str, f: CCallFn) -> Result<(), DuplicateName> {
        if self.ccall.contains_key(name) {
            return Err(DuplicateName(name.to_string()));
        }
        self.ccall.insert(name.to_string(), f);
        Ok(())
    }

    pub fn has_dirty(&self, name: &str) -> bool {
        self.dirty.contains_key(name)
    }

    /// Runs until `Halt` or until `fuel` superblocks have been entered.
    pub fn run(&self, program: &Program, state: &mut MachineState, fuel: u64) -> Result<RunSummary, Fault> {
        let mut summary = RunSummary::default();
        while !state.halted {
            if summary.blocks >= fuel {
                return Err(Fault::FuelExhausted(fuel));
            }
            summary.stmts += self.run_block(program, state)?;
            summary.blocks += 1;
        }
        Ok(summary)
    }

    /// Executes statements until control leaves the current superblock.
    /// Returns the number of statements executed.
    pub fn run_block(&self, program: &Program, state: &mut MachineState) -> Result<u64, Fault> {
        let mut n = 0;
        loop {
            let s = self.step(program, state)?;
            n += 1;
            if s != Step::Continue {
                return Ok(n);
            }
        }
    }

    /// The statement that the next [`step`](Self::step) will execute.
    pub fn next_stmt<'p>(&self, program: &'p Program, state: &MachineState) -> Option<&'p Stmt> {
        if state.halted {
            return None;
        }
        match &state.frame {
            Some(f) => program.block(f.block)?.stmts.get(f.index),
            None => program.block(state.pc)?.stmts.first(),
        }
    }

    /// Executes a single statement.
    pub fn step(&self, program: &Program, state: &mut MachineState) -> Result<Step, Fault> {
        if state.halted {
            return Ok(Step::Halted);
        }
        let mut frame = match state.frame.take() {
            Some(f) => f,
            None => {
                let sb = program.block(state.pc).ok_or(Fault::MissingBlock(state.pc))?;
                Frame { block: sb.addr, index: 0, tmps: vec![None; sb.tmp_types.len()] }
            }
        };
        let sb = program.block(frame.block).ok_or(Fault::MissingBlock(frame.block))?;
        let stmt = sb.stmts.get(frame.index).ok_or(Fault::FellOffBlock(sb.addr))?;
        match self.exec(sb, stmt, state, &mut frame.tmps)? {
            Flow::Next => {
                frame.index += 1;
                state.frame = Some(frame);
                Ok(Step::Continue)
            }
            Flow::Jump(target) => {
                state.pc = target;
                Ok(Step::BlockEnd)
            }
            Flow::Halt => {
                state.halted = true;
                Ok(Step::Halted)
            }
        }
    }

    fn exec(
        &self,
        sb: &Superblock,
        stmt: &Stmt,
        state: &mut MachineState,
        tmps: &mut [Option<u128>],
    ) -> Result<Flow, Fault> {
        let ctx = Ctx { sb, machine: self };
        match stmt {
            Stmt::WrTmp { tmp, expr } => {
                let v = ctx.eval(expr, state, tmps)?;
                tmps[*tmp as usize] = Some(v);
            }
            Stmt::Put { offset, expr } => {
                let ty = ctx.type_of(expr)?;
                let v = ctx.eval(expr, state, tmps)?;
                state.put_guest(*offset, ty, v)?;
            }
            Stmt::Store { addr, data } => {
                let ty = ctx.type_of(data)?;
                let a = ctx.eval(addr, state, tmps)? as u64;
                let v = ctx.eval(data, state, tmps)?;
                state.store(a, ty, v);
            }
            Stmt::StoreG { guard, addr, data } => {
                if ctx.eval(guard, state, tmps)? != 0 {
                    let ty = ctx.type_of(data)?;
                    let a = ctx.eval(addr, state, tmps)? as u64;
                    let v = ctx.eval(data, state, tmps)?;
                    state.store(a, ty, v);
                }
            }
            Stmt::Cas { old, addr, expected, new } => {
                let ty = ctx.type_of(expected)?;
                let w = ty.width();
                let a = ctx.eval(addr, state, tmps)? as u64;
                let e = ctx.eval(expected, state, tmps)?.to_le_bytes();
                let n = ctx.eval(new, state, tmps)?.to_le_bytes();
                let r = cas_step(state, a, &e[..w], &n[..w], &[], &[], false);
                let mut buf = [0u8; 16];
                buf[..w].copy_from_slice(&r.old);
                tmps[*old as usize] = Some(u128::from_le_bytes(buf));
            }
            Stmt::Dirty { name, args, dst } => {
                let f = self.dirty.get(name).ok_or_else(|| Fault::UnknownDirty(name.clone()))?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(Value { ty: ctx.type_of(a)?, bits: ctx.eval(a, state, tmps)? });
                }
                let dst_ty = dst.map(|t| sb.tmp_types[t as usize]);
                let r = f(state, &vals, dst_ty)?;
                if let (Some(t), Some(ty)) = (dst, dst_ty) {
                    let bits = r.ok_or_else(|| Fault::BadDirtyCall {
                        name: name.clone(),
                        msg: "no result for a destination temporary".into(),
                    })?;
                    tmps[*t as usize] = Some(bits & ty.mask());
                }
            }
            Stmt::IMark { addr, .. } => state.last_imark = Some(*addr),
            Stmt::Exit { guard, target } => {
                if ctx.eval(guard, state, tmps)? != 0 {
                    return Ok(Flow::Jump(*target));
                }
            }
            Stmt::Halt => return Ok(Flow::Halt),
        }
        Ok(Flow::Next)
    }
}

struct Ctx<'a> {
    sb: &'a Superblock,
    machine: &'a Machine,
}

impl Ctx<'_> {
    fn type_of(&self, e: &Expr) -> Result<IrType, Fault> {
        e.type_of(&self.sb.tmp_types).ok_or(Fault::Untyped(self.sb.addr))
    }

    fn eval(&self, e: &Expr, state: &MachineState, tmps: &[Option<u128>]) -> Result<u128, Fault> {
        Ok(match e {
            Expr::RdTmp(t) => tmps
                .get(*t as usize)
                .copied()
                .flatten()
                .ok_or(Fault::UndefinedTemp { block: self.sb.addr, tmp: *t })?,
            Expr::Get { offset, ty } => state.get_guest(*offset, *ty)?,
            Expr::Load { addr, ty } => state.load(self.eval(addr, state, tmps)? as u64, *ty),
            Expr::Op { op, args } => {
                let mut vals = [0u128; 4];
                for (slot, a) in vals.iter_mut().zip(args) {
                    *slot = self.eval(a, state, tmps)?;
                }
                eval_op(op, &vals[..args.len().min(4)])? & op.result_type().mask()
            }
            Expr::Const(c) => c.bits,
            Expr::Ite { cond, then, els } => {
                if self.eval(cond, state, tmps)? != 0 {
                    self.eval(then, state, tmps)?
                } else {
                    self.eval(els, state, tmps)?
                }
            }
            Expr::CCall { name, args, ty } => {
                let f = self.machine.ccall.get(name).ok_or_else(|| Fault::UnknownCCall(name.clone()))?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, state, tmps)?);
                }
                f(&vals, *ty) & ty.mask()
            }
        })
    }
}
