//! Running programs on the machine, with or without instrumentation.

use crate::frontend::layout;
use crate::instrument::{instrument_program, register_bitlogic, AdPolicy, InstrumentOptions, Warning};
use crate::ir::{IrType, Program};
use crate::machine::{Fault, Machine, MachineState, RunSummary};
use crate::mathwrap;
use crate::shadowmem::ShadowStats;

/// A machine with every engine-level behavior registered.
pub fn engine_machine() -> Machine {
    let mut m = Machine::with_builtins();
    register_bitlogic(&mut m);
    mathwrap::register(&mut m);
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub ad: bool,
    pub math_wrappers: bool,
    /// Superblocks to execute before giving up.
    pub fuel: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { ad: true, math_wrappers: true, fuel: 10_000_000 }
    }
}

/// Raw bits of a value read back from memory, with its type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bits {
    pub ty: IrType,
    pub bits: u64,
}

impl Bits {
    pub fn to_f64(self) -> f64 {
        match self.ty {
            IrType::F32 => f32::from_bits(self.bits as u32) as f64,
            IrType::F64 => f64::from_bits(self.bits),
            _ => self.bits as i64 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub name: String,
    pub value: Bits,
    pub dot: Bits,
}

#[derive(Debug)]
pub struct RunReport {
    pub outputs: Vec<Output>,
    pub printed: Vec<f64>,
    pub warnings: Vec<Warning>,
    pub summary: RunSummary,
    pub memory: ShadowStats,
    pub shadow: ShadowStats,
    pub state: MachineState,
}

/// The program that actually runs: instrumented when `ad` is set.
pub fn prepare(program: &Program, opts: RunOptions) -> (Program, Vec<Warning>) {
    if !opts.ad {
        return (program.clone(), Vec::new());
    }
    let mut policy = AdPolicy::default();
    let p = instrument_program(program, InstrumentOptions { math_wrappers: opts.math_wrappers }, &mut policy);
    (p, policy.warnings)
}

/// Fresh state with data segments, inputs in the input area, and dot 1 on
/// input `seed`.
pub fn initial_state(program: &Program, inputs: &[f64], seed: Option<usize>) -> MachineState {
    let mut s = MachineState::for_program(program).with_inputs(inputs);
    for (k, v) in inputs.iter().enumerate() {
        s.memory.write(layout::INPUT + 8 * k as u64, &v.to_le_bytes());
    }
    if let Some(k) = seed {
        s.shadow.write(layout::INPUT + 8 * k as u64, &1f64.to_le_bytes());
    }
    s
}

pub fn read_outputs(program: &Program, state: &MachineState) -> Vec<Output> {
    program
        .outputs
        .iter()
        .map(|o| {
            let w = o.ty.width();
            Output {
                name: o.name.clone(),
                value: Bits { ty: o.ty, bits: state.memory.read_uint(o.addr, w) as u64 },
                dot: Bits { ty: o.ty, bits: state.shadow.read_uint(o.addr, w) as u64 },
            }
        })
        .collect()
}

/// Runs a prepared program from a prepared state.
pub fn execute(machine: &Machine, program: &Program, mut state: MachineState, fuel: u64) -> Result<RunReport, Fault> {
    let summary = machine.run(program, &mut state, fuel)?;
    Ok(RunReport {
        outputs: read_outputs(program, &state),
        printed: std::mem::take(&mut state.printed),
        warnings: Vec::new(),
        summary,
        memory: state.memory.stats(),
        shadow: state.shadow.stats(),
        state,
    })
}

pub fn run(program: &Program, inputs: &[f64], seed: Option<usize>, opts: RunOptions) -> Result<RunReport, Fault> {
    let (p, warnings) = prepare(program, opts);
    let state = initial_state(&p, inputs, if opts.ad { seed } else { None });
    let mut r = execute(&engine_machine(), &p, state, opts.fuel)?;
    r.warnings = warnings;
    Ok(r)
}
