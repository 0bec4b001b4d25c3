//! Domain sampling and finite-difference checks for the math wrappers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shadowad::mathwrap::{wrapped_call, MathFn};

pub const H: f64 = 1e-6;
pub const POINTS: usize = 1000;

pub fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + H) - f(x - H)) / (2.0 * H)
}

fn near_integer(v: f64) -> bool {
    (v - v.round()).abs() < 1e-3
}

/// Draws a point in the function's domain away from kinks and poles.
pub fn sample(f: MathFn, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let p = match f {
            MathFn::Sin | MathFn::Cos | MathFn::Atan => vec![rng.gen_range(-10.0..10.0)],
            MathFn::Tan => vec![rng.gen_range(-1.4..1.4)],
            MathFn::Asin | MathFn::Acos => vec![rng.gen_range(-0.9..0.9)],
            MathFn::Sinh | MathFn::Cosh | MathFn::Tanh | MathFn::Exp => vec![rng.gen_range(-5.0..5.0)],
            MathFn::Log | MathFn::Log10 | MathFn::Sqrt => vec![rng.gen_range(0.1..10.0)],
            MathFn::Fabs | MathFn::Floor | MathFn::Ceil => vec![rng.gen_range(-10.0..10.0)],
            MathFn::Atan2 => vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
            MathFn::Pow => vec![rng.gen_range(0.5..3.0), rng.gen_range(-3.0..3.0)],
            MathFn::Fmod => vec![rng.gen_range(-10.0..10.0), rng.gen_range(0.5..3.0)],
            MathFn::Ldexp => vec![rng.gen_range(-10.0..10.0), rng.gen_range(-5i32..=5) as f64],
        };
        let ok = match f {
            MathFn::Fabs => p[0].abs() > 1e-3,
            MathFn::Floor | MathFn::Ceil => !near_integer(p[0]),
            MathFn::Atan2 => p[0].hypot(p[1]) > 0.5 && !(p[1] < 0.0 && p[0].abs() < 1e-3),
            MathFn::Fmod => !near_integer(p[0] / p[1]),
            _ => true,
        };
        if ok {
            return p;
        }
    }
}

/// Worst `|dot - fd| / (1 + |fd|)` over `POINTS` samples, with the first failure.
pub fn check(f: MathFn, arg: usize, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..POINTS {
        let p = sample(f, rng);
        let mut dots = vec![0.0; f.arity()];
        dots[arg] = 1.0;
        let (_, d) = wrapped_call(f.name(), &p, &dots).unwrap();
        let fd = central(
            |v| {
                let mut q = p.clone();
                q[arg] = v;
                f.value(&q)
            },
            p[arg],
        );
        let err = (d - fd).abs() / (1.0 + fd.abs());
        if !(err <= 1e-5) {
            return Err(format!("{}'[{arg}] at {p:?}: dot {d} fd {fd}", f.name()));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

