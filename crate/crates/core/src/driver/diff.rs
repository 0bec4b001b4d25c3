//! Engine, dual oracle and finite differences side by side.

use std::fmt::Write;

use thiserror::Error;

use crate::frontend::{compile, CompileError, CompileOptions, Compiled};
use crate::machine::Fault;

use super::dual::{oracle_eval_typed, OracleError, DEFAULT_LOOP_BUDGET};
use super::fd::{finite_diff_program, rel_err};
use super::run::{run, RunOptions};

#[derive(Debug, Error)]
pub enum DiffError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffRow {
    pub program: String,
    pub output: usize,
    pub engine: f64,
    pub oracle: f64,
    pub fd: f64,
    /// Largest of the engine's relative errors against the two oracles.
    pub max_rel_err: f64,
    /// Engine and oracle dots have the same bits.
    pub exact: bool,
}

pub const TSV_HEADER: &str = "program\toutput\tengine_dot\toracle_dot\tfd_dot\tmax_rel_err";

pub fn diff_compiled(
    name: &str,
    c: &Compiled,
    inputs: &[f64],
    seed: usize,
    h: f64,
    opts: RunOptions,
) -> Result<Vec<DiffRow>, DiffError> {
    let e = run(&c.program, inputs, Some(seed), opts)?;
    let o = oracle_eval_typed(&c.typed, inputs, Some(seed), DEFAULT_LOOP_BUDGET)?;
    let fd = finite_diff_program(&c.program, inputs, seed, h, opts.fuel)?;
    Ok(e.outputs
        .iter()
        .zip(&o.outputs)
        .zip(&fd)
        .enumerate()
        .map(|(j, ((eo, oo), f))| {
            let (engine, oracle) = (eo.dot.to_f64(), oo.dot_f64());
            DiffRow {
                program: name.to_string(),
                output: j,
                engine,
                oracle,
                fd: *f,
                max_rel_err: rel_err(engine, oracle).max(rel_err(engine, *f)),
                exact: eo.dot.bits == oo.dot && eo.value.bits == oo.value,
            }
        })
        .collect())
}

pub fn diff_source(name: &str, src: &str, inputs: &[f64], seed: usize, h: f64) -> Result<Vec<DiffRow>, DiffError> {
    let c = compile(src, CompileOptions::default())?;
    diff_compiled(name, &c, inputs, seed, h, RunOptions::default())
}

pub fn to_tsv(rows: &[DiffRow]) -> String {
    let mut s = String::from(TSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{:e}", r.program, r.output, r.engine, r.oracle, r.fd, r.max_rel_err);
    }
    s
}
