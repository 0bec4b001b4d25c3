//! Math functions with analytic derivatives.
//!
//! Each function is exposed to IR as two dirty calls: `math_<name>(args)`
//! returning the value and `math_<name>_dot(args, arg dots)` returning
//! `sum_i d f/d arg_i * dot_i`. The instrumenter routes the former to the
//! latter, so library internals are never differentiated.

use std::sync::Arc;

use thiserror::Error;

use crate::machine::{DirtyFn, Fault, Machine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MathFn {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Atan2,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Log10,
    Sqrt,
    Pow,
    Fabs,
    Fmod,
    Floor,
    Ceil,
    Ldexp,
}

use MathFn::*;

impl MathFn {
    pub const ALL: [MathFn; 20] = [
        Sin, Cos, Tan, Asin, Acos, Atan, Atan2, Sinh, Cosh, Tanh, Exp, Log, Log10, Sqrt, Pow, Fabs, Fmod, Floor,
        Ceil, Ldexp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sin => "sin",
            Cos => "cos",
            Tan => "tan",
            Asin => "asin",
            Acos => "acos",
            Atan => "atan",
            Atan2 => "atan2",
            Sinh => "sinh",
            Cosh => "cosh",
            Tanh => "tanh",
            Exp => "exp",
            Log => "log",
            Log10 => "log10",
            Sqrt => "sqrt",
            Pow => "pow",
            Fabs => "fabs",
            Fmod => "fmod",
            Floor => "floor",
            Ceil => "ceil",
            Ldexp => "ldexp",
        }
    }

    pub fn from_name(name: &str) -> Option<MathFn> {
        MathFn::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Atan2 | Pow | Fmod | Ldexp => 2,
            _ => 1,
        }
    }

    pub fn value(self, a: &[f64]) -> f64 {
        let x = a[0];
        match self {
            Sin => x.sin(),
            Cos => x.cos(),
            Tan => x.tan(),
            Asin => x.asin(),
            Acos => x.acos(),
            Atan => x.atan(),
            Atan2 => x.atan2(a[1]),
            Sinh => x.sinh(),
            Cosh => x.cosh(),
            Tanh => x.tanh(),
            Exp => x.exp(),
            Log => x.ln(),
            Log10 => x.log10(),
            Sqrt => x.sqrt(),
            Pow => x.powf(a[1]),
            Fabs => x.abs(),
            Fmod => x % a[1],
            Floor => x.floor(),
            Ceil => x.ceil(),
            Ldexp => ldexp(x, exponent_arg(a[1])),
        }
    }

    /// Partial derivatives with respect to each argument. `None` marks an
    /// argument with no derivative contribution.
    pub fn partials(self, a: &[f64]) -> [Option<f64>; 2] {
        let x = a[0];
        let one = |p: f64| [Some(p), None];
        match self {
            Sin => one(x.cos()),
            Cos => one(-x.sin()),
            Tan => {
                let c = x.cos();
                one(1.0 / (c * c))
            }
            Asin => one(1.0 / (1.0 - x * x).sqrt()),
            Acos => one(-1.0 / (1.0 - x * x).sqrt()),
            Atan => one(1.0 / (1.0 + x * x)),
            Atan2 => {
                // atan2(y, x) with y = a[0], x = a[1].
                let (y, x) = (a[0], a[1]);
                let r = x * x + y * y;
                [Some(x / r), Some(-y / r)]
            }
            Sinh => one(x.cosh()),
            Cosh => one(x.sinh()),
            Tanh => {
                let t = x.tanh();
                one(1.0 - t * t)
            }
            Exp => one(x.exp()),
            Log => one(1.0 / x),
            Log10 => one(1.0 / (x * std::f64::consts::LN_10)),
            Sqrt => one(0.5 / x.sqrt()),
            Pow => {
                let y = a[1];
                let dx = y * x.powf(y - 1.0);
                let dy = if x > 0.0 { x.powf(y) * x.ln() } else { 0.0 };
                [Some(dx), Some(dy)]
            }
            Fabs => one(if x.is_sign_negative() { -1.0 } else { 1.0 }),
            Fmod => [Some(1.0), Some(-(x / a[1]).trunc())],
            Floor | Ceil => [None, None],
            Ldexp => one(ldexp(1.0, exponent_arg(a[1]))),
        }
    }

    /// `sum_i partial_i * dot_i`, accumulated left to right starting from
    /// the first contributing argument; +0.0 if no argument contributes.
    pub fn dot(self, args: &[f64], dots: &[f64]) -> f64 {
        let mut acc: Option<f64> = None;
        for (p, d) in self.partials(args).iter().zip(dots) {
            if let Some(p) = p {
                let term = p * d;
                acc = Some(match acc {
                    Some(a) => a + term,
                    None => term,
                });
            }
        }
        acc.unwrap_or(0.0)
    }
}

fn exponent_arg(k: f64) -> i32 {
    if k.is_nan() {
        0
    } else {
        k.trunc().clamp(-4000.0, 4000.0) as i32
    }
}

/// `x * 2^k`.
pub fn ldexp(x: f64, k: i32) -> f64 {
    let pow2 = |e: i32| f64::from_bits(((e + 1023) as u64) << 52);
    let mut x = x;
    let mut k = k;
    while k > 1023 {
        x *= pow2(1023);
        k -= 1023;
    }
    while k < -1022 {
        if k >= -1022 - 52 {
            // Split so that the final multiply rounds exactly once.
            x *= pow2(k + 52);
            return x * pow2(-52);
        }
        x *= pow2(-1022);
        k += 1022;
    }
    x * pow2(k)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("unknown math function {0}")]
    UnknownName(String),
    #[error("{name} takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
}

/// Value and dot of a wrapped call.
pub fn wrapped_call(name: &str, args: &[f64], dots: &[f64]) -> Result<(f64, f64), MathError> {
    let f = MathFn::from_name(name).ok_or_else(|| MathError::UnknownName(name.to_string()))?;
    if args.len() != f.arity() || dots.len() != f.arity() {
        return Err(MathError::Arity { name: name.to_string(), expected: f.arity(), got: args.len() });
    }
    Ok((f.value(args), f.dot(args, dots)))
}

/// Registers `math_<name>` and `math_<name>_dot` for every function.
pub fn register(machine: &mut Machine) {
    for f in MathFn::ALL {
        let n = f.arity();
        let value_name = format!("math_{}", f.name());
        let dot_name = format!("math_{}_dot", f.name());
        let vn = value_name.clone();
        let value: DirtyFn = Arc::new(move |_, a, _| {
            if a.len() != n {
                return Err(Fault::BadDirtyCall { name: vn.clone(), msg: format!("expected {n} arguments") });
            }
            let args: Vec<f64> = a.iter().map(|v| v.f64()).collect();
            Ok(Some(f.value(&args).to_bits() as u128))
        });
        let dn = dot_name.clone();
        let dot: DirtyFn = Arc::new(move |_, a, _| {
            if a.len() != 2 * n {
                return Err(Fault::BadDirtyCall { name: dn.clone(), msg: format!("expected {} arguments", 2 * n) });
            }
            let v: Vec<f64> = a.iter().map(|v| v.f64()).collect();
            Ok(Some(f.dot(&v[..n], &v[n..]).to_bits() as u128))
        });
        machine.register_dirty(&value_name, value).expect("math names registered once");
        machine.register_dirty(&dot_name, dot).expect("math names registered once");
    }
}
