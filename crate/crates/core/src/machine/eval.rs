//! Opcode semantics on raw bit patterns.

use crate::ir::{cmpf, Opcode};

use super::Fault;

fn f64_of(x: u128) -> f64 {
    f64::from_bits(x as u64)
}

fn f32_of(x: u128) -> f32 {
    f32::from_bits(x as u32)
}

fn b64(v: f64) -> u128 {
    v.to_bits() as u128
}

fn b32(v: f32) -> u128 {
    v.to_bits() as u128
}

fn lane64(x: u128, i: u32) -> u64 {
    (x >> (64 * i)) as u64
}

fn lane32(x: u128, i: u32) -> u32 {
    (x >> (32 * i)) as u32
}

fn map64x2(a: u128, b: u128, f: impl Fn(f64, f64) -> f64) -> u128 {
    (0..2).fold(0, |acc, i| {
        let r = f(f64::from_bits(lane64(a, i)), f64::from_bits(lane64(b, i)));
        acc | ((r.to_bits() as u128) << (64 * i))
    })
}

fn map32x4(a: u128, b: u128, f: impl Fn(f32, f32) -> f32) -> u128 {
    (0..4).fold(0, |acc, i| {
        let r = f(f32::from_bits(lane32(a, i)), f32::from_bits(lane32(b, i)));
        acc | ((r.to_bits() as u128) << (32 * i))
    })
}

/// Lowest 64-bit lane from `f`, upper lane copied from `a`.
fn lo64(a: u128, b: u128, f: impl Fn(f64, f64) -> f64) -> u128 {
    let r = f(f64::from_bits(lane64(a, 0)), f64::from_bits(lane64(b, 0)));
    (a & !(u64::MAX as u128)) | r.to_bits() as u128
}

/// Lowest 32-bit lane from `f`, upper lanes copied from `a`.
fn lo32(a: u128, b: u128, f: impl Fn(f32, f32) -> f32) -> u128 {
    let r = f(f32::from_bits(lane32(a, 0)), f32::from_bits(lane32(b, 0)));
    (a & !(u32::MAX as u128)) | r.to_bits() as u128
}

fn mask64(c: bool) -> u64 {
    if c {
        u64::MAX
    } else {
        0
    }
}

fn mask32(c: bool) -> u32 {
    if c {
        u32::MAX
    } else {
        0
    }
}

fn cmp_f(lt: bool, gt: bool, eq: bool) -> u128 {
    (if lt {
        cmpf::LT
    } else if gt {
        cmpf::GT
    } else if eq {
        cmpf::EQ
    } else {
        cmpf::UN
    }) as u128
}

/// Round to nearest, ties to even. NaN and out-of-range inputs produce the
/// integer indefinite value (most negative integer).
pub fn f64_to_i64(v: f64) -> u64 {
    let r = v.round_ties_even();
    if r.is_nan() || r < -9.223_372_036_854_775_808e18 || r >= 9.223_372_036_854_775_808e18 {
        i64::MIN as u64
    } else {
        r as i64 as u64
    }
}

pub fn f64_to_i32(v: f64) -> u32 {
    let r = v.round_ties_even();
    if r.is_nan() || r < -2_147_483_648.0 || r >= 2_147_483_648.0 {
        i32::MIN as u32
    } else {
        r as i32 as u32
    }
}

fn shift_amount(s: u128) -> u32 {
    (s as u8) as u32
}

pub fn eval_op(op: &Opcode, a: &[u128]) -> Result<u128, Fault> {
    use Opcode::*;
    let x = |i: usize| a[i];
    Ok(match op {
        AddF64 => b64(f64_of(x(0)) + f64_of(x(1))),
        SubF64 => b64(f64_of(x(0)) - f64_of(x(1))),
        MulF64 => b64(f64_of(x(0)) * f64_of(x(1))),
        DivF64 => b64(f64_of(x(0)) / f64_of(x(1))),
        SqrtF64 => b64(f64_of(x(0)).sqrt()),
        NegF64 => x(0) ^ (1 << 63),
        AbsF64 => x(0) & !(1 << 63),
        AddF32 => b32(f32_of(x(0)) + f32_of(x(1))),
        SubF32 => b32(f32_of(x(0)) - f32_of(x(1))),
        MulF32 => b32(f32_of(x(0)) * f32_of(x(1))),
        DivF32 => b32(f32_of(x(0)) / f32_of(x(1))),
        SqrtF32 => b32(f32_of(x(0)).sqrt()),
        NegF32 => x(0) ^ (1 << 31),
        AbsF32 => x(0) & !(1 << 31),

        Add64Fx2 => map64x2(x(0), x(1), |p, q| p + q),
        Sub64Fx2 => map64x2(x(0), x(1), |p, q| p - q),
        Mul64Fx2 => map64x2(x(0), x(1), |p, q| p * q),
        Div64Fx2 => map64x2(x(0), x(1), |p, q| p / q),
        Sqrt64Fx2 => map64x2(x(0), 0, |p, _| p.sqrt()),
        Add32Fx4 => map32x4(x(0), x(1), |p, q| p + q),
        Sub32Fx4 => map32x4(x(0), x(1), |p, q| p - q),
        Mul32Fx4 => map32x4(x(0), x(1), |p, q| p * q),
        Div32Fx4 => map32x4(x(0), x(1), |p, q| p / q),
        Sqrt32Fx4 => map32x4(x(0), 0, |p, _| p.sqrt()),

        Add64F0x2 => lo64(x(0), x(1), |p, q| p + q),
        Sub64F0x2 => lo64(x(0), x(1), |p, q| p - q),
        Mul64F0x2 => lo64(x(0), x(1), |p, q| p * q),
        Div64F0x2 => lo64(x(0), x(1), |p, q| p / q),
        Sqrt64F0x2 => lo64(x(0), 0, |p, _| p.sqrt()),
        Add32F0x4 => lo32(x(0), x(1), |p, q| p + q),
        Sub32F0x4 => lo32(x(0), x(1), |p, q| p - q),
        Mul32F0x4 => lo32(x(0), x(1), |p, q| p * q),
        Div32F0x4 => lo32(x(0), x(1), |p, q| p / q),
        Sqrt32F0x4 => lo32(x(0), 0, |p, _| p.sqrt()),

        F64toF32 => b32(f64_of(x(0)) as f32),
        F32toF64 => b64(f32_of(x(0)) as f64),
        I64toF64 => b64(x(0) as u64 as i64 as f64),
        F64toI64 => f64_to_i64(f64_of(x(0))) as u128,
        I32toF64 => b64(x(0) as u32 as i32 as f64),
        F64toI32 => f64_to_i32(f64_of(x(0))) as u128,

        ReinterpI64asF64 | ReinterpF64asI64 | ReinterpI32asF32 | ReinterpF32asI32 => x(0),

        I64x2toV128 => ((x(0) as u64 as u128) << 64) | x(1) as u64 as u128,
        I32x4toV128 => (0..4).fold(0, |acc, i| acc | ((x(i) as u32 as u128) << (32 * (3 - i)))),
        V128to64lo => lane64(x(0), 0) as u128,
        V128to64hi => lane64(x(0), 1) as u128,
        V128to32lane0 => lane32(x(0), 0) as u128,
        SetV128lo64 => (x(0) & !(u64::MAX as u128)) | x(1) as u64 as u128,
        SetV128lo32 => (x(0) & !(u32::MAX as u128)) | x(1) as u32 as u128,
        I64to32 => x(0) as u32 as u128,
        I64HIto32 => (x(0) as u64 >> 32) as u128,
        I32HLto64 => ((x(0) as u32 as u128) << 32) | x(1) as u32 as u128,

        And32 | And64 | AndV128 => x(0) & x(1),
        Or32 | Or64 | OrV128 => x(0) | x(1),
        Xor32 | Xor64 | XorV128 => x(0) ^ x(1),
        Not32 => !x(0) & u32::MAX as u128,
        Not64 => !x(0) & u64::MAX as u128,
        NotV128 => !x(0),
        And1 => ((x(0) != 0) && (x(1) != 0)) as u128,
        Or1 => ((x(0) != 0) || (x(1) != 0)) as u128,
        Not1 => (x(0) == 0) as u128,

        Add8 => (x(0) as u8).wrapping_add(x(1) as u8) as u128,
        Add16 => (x(0) as u16).wrapping_add(x(1) as u16) as u128,
        Add32 => (x(0) as u32).wrapping_add(x(1) as u32) as u128,
        Add64 => (x(0) as u64).wrapping_add(x(1) as u64) as u128,
        Sub32 => (x(0) as u32).wrapping_sub(x(1) as u32) as u128,
        Sub64 => (x(0) as u64).wrapping_sub(x(1) as u64) as u128,
        Mul32 => (x(0) as u32).wrapping_mul(x(1) as u32) as u128,
        Mul64 => (x(0) as u64).wrapping_mul(x(1) as u64) as u128,
        Shl32 => (x(0) as u32).checked_shl(shift_amount(x(1))).unwrap_or(0) as u128,
        Shl64 => (x(0) as u64).checked_shl(shift_amount(x(1))).unwrap_or(0) as u128,
        Shr32 => (x(0) as u32).checked_shr(shift_amount(x(1))).unwrap_or(0) as u128,
        Shr64 => (x(0) as u64).checked_shr(shift_amount(x(1))).unwrap_or(0) as u128,
        Sar32 => ((x(0) as u32 as i32) >> shift_amount(x(1)).min(31)) as u32 as u128,
        Sar64 => ((x(0) as u64 as i64) >> shift_amount(x(1)).min(63)) as u64 as u128,
        I1Uto64 | I1Uto32 => (x(0) != 0) as u128,
        I64to1 => x(0) & 1,
        I32Uto64 => x(0) as u32 as u128,
        I32Sto64 => x(0) as u32 as i32 as i64 as u64 as u128,

        CmpEQ8 => (x(0) as u8 == x(1) as u8) as u128,
        CmpEQ16 => (x(0) as u16 == x(1) as u16) as u128,
        CmpEQ32 => (x(0) as u32 == x(1) as u32) as u128,
        CmpNE32 => (x(0) as u32 != x(1) as u32) as u128,
        CmpLT32S => ((x(0) as u32 as i32) < (x(1) as u32 as i32)) as u128,
        CmpLE32S => ((x(0) as u32 as i32) <= (x(1) as u32 as i32)) as u128,
        CmpEQ64 => (x(0) as u64 == x(1) as u64) as u128,
        CmpNE64 => (x(0) as u64 != x(1) as u64) as u128,
        CmpLT64S => ((x(0) as u64 as i64) < (x(1) as u64 as i64)) as u128,
        CmpLE64S => ((x(0) as u64 as i64) <= (x(1) as u64 as i64)) as u128,
        CmpLT64U => ((x(0) as u64) < (x(1) as u64)) as u128,
        CmpF64 => {
            let (p, q) = (f64_of(x(0)), f64_of(x(1)));
            cmp_f(p < q, p > q, p == q)
        }
        CmpF32 => {
            let (p, q) = (f32_of(x(0)), f32_of(x(1)));
            cmp_f(p < q, p > q, p == q)
        }

        CmpLT64F0x2 => lo64_mask(x(0), x(1), |p, q| p < q),
        CmpLE64F0x2 => lo64_mask(x(0), x(1), |p, q| p <= q),
        CmpEQ64F0x2 => lo64_mask(x(0), x(1), |p, q| p == q),
        CmpLT32F0x4 => lo32_mask(x(0), x(1), |p, q| p < q),
        CmpLE32F0x4 => lo32_mask(x(0), x(1), |p, q| p <= q),
        CmpEQ32F0x4 => lo32_mask(x(0), x(1), |p, q| p == q),
        CmpLT64Fx2 => (0..2).fold(0, |acc, i| {
            let c = f64::from_bits(lane64(x(0), i)) < f64::from_bits(lane64(x(1), i));
            acc | ((mask64(c) as u128) << (64 * i))
        }),
        CmpLT32Fx4 => (0..4).fold(0, |acc, i| {
            let c = f32::from_bits(lane32(x(0), i)) < f32::from_bits(lane32(x(1), i));
            acc | ((mask32(c) as u128) << (32 * i))
        }),

        Unknown(name, _) => return Err(Fault::UnhandledOpcode(name.clone())),
    })
}

fn lo64_mask(a: u128, b: u128, f: impl Fn(f64, f64) -> bool) -> u128 {
    let c = f(f64::from_bits(lane64(a, 0)), f64::from_bits(lane64(b, 0)));
    (a & !(u64::MAX as u128)) | mask64(c) as u128
}

fn lo32_mask(a: u128, b: u128, f: impl Fn(f32, f32) -> bool) -> u128 {
    let c = f(f32::from_bits(lane32(a, 0)), f32::from_bits(lane32(b, 0)));
    (a & !(u32::MAX as u128)) | mask32(c) as u128
}
