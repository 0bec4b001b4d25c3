//! Central finite differences on uninstrumented runs.

use crate::frontend::{compile, CompileError, CompileOptions};
use crate::ir::Program;
use crate::machine::Fault;

use super::run::{run, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum FdError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Fault(#[from] Fault),
}

/// Output values of a plain run.
pub fn primal(program: &Program, inputs: &[f64], fuel: u64) -> Result<Vec<f64>, Fault> {
    let opts = RunOptions { ad: false, fuel, ..RunOptions::default() };
    Ok(run(program, inputs, None, opts)?.outputs.iter().map(|o| o.value.to_f64()).collect())
}

/// `(f(x + h e_k) - f(x - h e_k)) / 2h` for every output.
pub fn finite_diff_program(program: &Program, inputs: &[f64], k: usize, h: f64, fuel: u64) -> Result<Vec<f64>, Fault> {
    assert!(h > 0.0, "finite difference step must be positive");
    let mut up = inputs.to_vec();
    if up.len() <= k {
        up.resize(k + 1, 0.0);
    }
    let mut down = up.clone();
    up[k] += h;
    down[k] -= h;
    let (fu, fd) = (primal(program, &up, fuel)?, primal(program, &down, fuel)?);
    Ok(fu.iter().zip(&fd).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

pub fn finite_diff(src: &str, inputs: &[f64], k: usize, h: f64) -> Result<Vec<f64>, FdError> {
    let c = compile(src, CompileOptions::default())?;
    Ok(finite_diff_program(&c.program, inputs, k, h, RunOptions::default().fuel)?)
}

/// Relative error with the denominator clamped at 1.
pub fn rel_err(dot: f64, fd: f64) -> f64 {
    (dot - fd).abs() / fd.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube() {
        let d = finite_diff("f64 x = input(0); output(x * x * x);", &[4.0], 0, 1e-6).unwrap();
        assert!((d[0] - 48.0).abs() < 1e-4, "{}", d[0]);
    }

    #[test]
    fn linear() {
        for h in [1e-3, 1e-6, 0.5] {
            let d = finite_diff("f64 x = input(0); output(3 * x);", &[1.25], 0, h).unwrap();
            assert!((d[0] - 3.0).abs() < 1e-9, "h={h}: {}", d[0]);
        }
    }

    #[test]
    fn floor_is_flat() {
        let d = finite_diff("f64 x = input(0); output(floor(x));", &[0.5], 0, 1e-6).unwrap();
        assert_eq!(d[0], 0.0);
    }
}
