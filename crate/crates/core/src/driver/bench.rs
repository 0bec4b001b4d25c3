//! Two-dimensional viscous Burgers' equation on the unit square.
//!
//! The solver is generated as minilang source: a Lax-Friedrichs step plus
//! explicit diffusion on an `nx * nx` grid with fixed boundary values,
//! repeated `nt` times, then the 2-norm of (u, v). The initial state is
//! shifted by `input(0)` and every initial cell gets dot 1 through
//! `dg_set_dot`, so the dot is the derivative of the norm with respect to
//! that shift.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::frontend::{compile, CompileError, CompileOptions};
use crate::machine::Fault;

use super::dual::{oracle_eval_typed, OracleError};
use super::fd::{finite_diff_program, rel_err};
use super::run::{engine_machine, execute, initial_state, prepare, RunOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchmarkConfig {
    pub nx: usize,
    pub nt: usize,
    pub reps: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig { nx: 20, nt: 10, reps: 3 }
    }
}

impl fmt::Display for BenchmarkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nx={} nt={} reps={}", self.nx, self.nt, self.reps)
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration ({0}): need nx >= 4, nt >= 1, reps >= 1")]
    Config(BenchmarkConfig),
    #[error("solution diverged ({0})")]
    Divergent(BenchmarkConfig),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchmarkConfig,
    pub value: f64,
    /// Output of the uninstrumented run.
    pub native_value: f64,
    pub dot: f64,
    pub oracle_dot: f64,
    pub fd_dot: f64,
    pub native: Duration,
    pub instrumented: Duration,
    /// Pages of memory the client touched.
    pub client_pages: usize,
    pub shadow_pages: usize,
    /// Interior nodes of the shadow trie.
    pub shadow_nodes: usize,
}

impl BenchReport {
    pub fn slowdown(&self) -> f64 {
        self.instrumented.as_secs_f64() / self.native.as_secs_f64().max(1e-12)
    }

    pub fn oracle_exact(&self) -> bool {
        self.dot.to_bits() == self.oracle_dot.to_bits()
    }

    pub fn fd_rel_err(&self) -> f64 {
        rel_err(self.dot, self.fd_dot)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "config\t{}", self.config)?;
        writeln!(f, "value\t{}", self.value)?;
        writeln!(f, "native_value\t{}", self.native_value)?;
        writeln!(f, "dot\t{}", self.dot)?;
        writeln!(f, "oracle_dot\t{}\t{}", self.oracle_dot, if self.oracle_exact() { "exact" } else { "MISMATCH" })?;
        writeln!(f, "fd_dot\t{}\trel_err {:.3e}", self.fd_dot, self.fd_rel_err())?;
        writeln!(f, "native_s\t{:.6}", self.native.as_secs_f64())?;
        writeln!(f, "instrumented_s\t{:.6}", self.instrumented.as_secs_f64())?;
        writeln!(f, "slowdown\t{:.1}", self.slowdown())?;
        writeln!(f, "client_pages\t{}", self.client_pages)?;
        write!(f, "shadow_pages\t{}\t(+{} trie nodes)", self.shadow_pages, self.shadow_nodes)
    }
}

/// The solver as minilang source.
pub fn burgers_source(nx: usize, nt: usize) -> String {
    let n = nx;
    let nn = n * n;
    let h = 1.0 / (n as f64 - 1.0);
    let dt = 0.1 * h;
    let nu = 0.01;
    let c = dt / (2.0 * h);
    let d = nu * dt / (h * h);
    format!(
        "# Burgers' equation, {n} x {n} grid, {nt} steps
f64 shift = input(0);
f64 u[{nn}];
f64 v[{nn}];
f64 un[{nn}];
f64 vn[{nn}];
for i in 0..{n} {{
    for j in 0..{n} {{
        f64 x = f64(i) * {h:?};
        f64 y = f64(j) * {h:?};
        u[i * {n} + j] = 4.0 * x * (1.0 - x) * y * (1.0 - y) + 1.0 + shift;
        v[i * {n} + j] = 2.0 * x * (1.0 - y) + 0.5 + shift;
    }}
}}
for k in 0..{nn} {{
    dg_set_dot(u[k], 1.0);
    dg_set_dot(v[k], 1.0);
}}
for k in 0..{nn} {{
    un[k] = u[k];
    vn[k] = v[k];
}}
for t in 0..{nt} {{
    for i in 1..{n1} {{
        for j in 1..{n1} {{
            f64 uc = u[i * {n} + j];
            f64 ue = u[i * {n} + j + 1];
            f64 uw = u[i * {n} + j - 1];
            f64 unn = u[i * {n} + j + {n}];
            f64 us = u[i * {n} + j - {n}];
            f64 vc = v[i * {n} + j];
            f64 ve = v[i * {n} + j + 1];
            f64 vw = v[i * {n} + j - 1];
            f64 vnn = v[i * {n} + j + {n}];
            f64 vs = v[i * {n} + j - {n}];
            f64 su = ue + uw + unn + us;
            f64 sv = ve + vw + vnn + vs;
            un[i * {n} + j] = 0.25 * su - {c:?} * (uc * (ue - uw) + vc * (unn - us)) + {d:?} * (su - 4.0 * uc);
            vn[i * {n} + j] = 0.25 * sv - {c:?} * (uc * (ve - vw) + vc * (vnn - vs)) + {d:?} * (sv - 4.0 * vc);
        }}
    }}
    for k in 0..{nn} {{
        u[k] = un[k];
        v[k] = vn[k];
    }}
}}
f64 acc = 0.0;
for k in 0..{nn} {{
    acc = acc + u[k] * u[k] + v[k] * v[k];
}}
output(sqrt(acc));
",
        n1 = n - 1
    )
}

fn timed<T>(reps: usize, mut f: impl FnMut() -> Result<(T, Duration), Fault>) -> Result<(T, Duration), Fault> {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..reps {
        let (r, t) = f()?;
        best = best.min(t);
        last = Some(r);
    }
    Ok((last.expect("reps >= 1"), best))
}

/// Runs the solver natively and instrumented, `reps` times each, and
/// checks the dot against both oracles. Times are the fastest repetition
/// of the solve alone.
pub fn bench_burgers(config: BenchmarkConfig) -> Result<BenchReport, BenchError> {
    if config.nx < 4 || config.nt < 1 || config.reps < 1 {
        return Err(BenchError::Config(config));
    }
    let c = compile(&burgers_source(config.nx, config.nt), CompileOptions::default())?;
    let machine = engine_machine();
    let inputs = [0.0];
    let fuel = u64::MAX;

    let (native_prog, _) = prepare(&c.program, RunOptions { ad: false, ..RunOptions::default() });
    let (native, t_native) = timed(config.reps, || {
        let s = initial_state(&native_prog, &inputs, None);
        let t0 = Instant::now();
        let r = execute(&machine, &native_prog, s, fuel)?;
        Ok((r, t0.elapsed()))
    })?;
    let (ad_prog, _) = prepare(&c.program, RunOptions::default());
    let (ad, t_ad) = timed(config.reps, || {
        let s = initial_state(&ad_prog, &inputs, None);
        let t0 = Instant::now();
        let r = execute(&machine, &ad_prog, s, fuel)?;
        Ok((r, t0.elapsed()))
    })?;

    let value = ad.outputs[0].value.to_f64();
    let dot = ad.outputs[0].dot.to_f64();
    if !value.is_finite() || !dot.is_finite() {
        return Err(BenchError::Divergent(config));
    }
    let oracle = oracle_eval_typed(&c.typed, &inputs, None, u64::MAX)?;
    let fd = finite_diff_program(&c.program, &inputs, 0, 1e-6, fuel)?;
    Ok(BenchReport {
        config,
        value,
        native_value: native.outputs[0].value.to_f64(),
        dot,
        oracle_dot: oracle.outputs[0].dot_f64(),
        fd_dot: fd[0],
        native: t_native,
        instrumented: t_ad,
        client_pages: ad.memory.pages,
        shadow_pages: ad.shadow.pages,
        shadow_nodes: ad.shadow.nodes,
    })
}
