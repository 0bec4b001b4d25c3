mod common;

use common::{check, POINTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowad::mathwrap::{wrapped_call, MathFn};

#[test]
fn unary_wrappers_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for f in MathFn::ALL.into_iter().filter(|f| f.arity() == 1) {
        check(f, 0, &mut rng).unwrap();
    }
}

#[test]
fn binary_wrappers_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + 1);
    for f in [MathFn::Atan2, MathFn::Pow, MathFn::Fmod] {
        check(f, 0, &mut rng).unwrap();
        check(f, 1, &mut rng).unwrap();
    }
    // The exponent of ldexp is an integer argument.
    check(MathFn::Ldexp, 0, &mut rng).unwrap();
}

#[test]
fn floor_and_ceil_dot_is_positive_zero_off_lattice() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..POINTS {
        let x: f64 = rng.gen_range(-1e6..1e6);
        if x.fract() == 0.0 {
            continue;
        }
        let xd: f64 = rng.gen_range(-10.0..10.0);
        for name in ["floor", "ceil"] {
            assert_eq!(wrapped_call(name, &[x], &[xd]).unwrap().1.to_bits(), 0);
        }
    }
}
