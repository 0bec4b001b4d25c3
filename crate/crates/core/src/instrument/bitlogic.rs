//! Dot values of bitwise AND/OR/XOR.
//!
//! Compilers implement fabs, negation and branch-free selects with bit
//! masks. Each 64-bit lane is matched against those patterns; a lane that
//! matches nothing is retried as two 32-bit lanes. Anything left over gets a
//! zero dot.

use std::sync::Arc;

use crate::machine::{CCallFn, Machine};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitOp {
    And,
    Or,
    Xor,
}

impl BitOp {
    pub fn helper_name(self) -> &'static str {
        match self {
            BitOp::And => "ad_bitlogic_and",
            BitOp::Or => "ad_bitlogic_or",
            BitOp::Xor => "ad_bitlogic_xor",
        }
    }
}

fn lane_rule(op: BitOp, x: u64, y: u64, xd: u64, yd: u64, bits: u32) -> Option<u64> {
    let ones = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let sign = 1u64 << (bits - 1);
    let abs = ones >> 1;
    let neg = |d: u64| d ^ sign;
    match op {
        BitOp::And => {
            if x == ones {
                Some(yd)
            } else if y == ones {
                Some(xd)
            } else if x == 0 || y == 0 {
                Some(0)
            } else if x == abs && y == abs {
                Some(0)
            } else if x == abs {
                Some(if y & sign != 0 { neg(yd) } else { yd })
            } else if y == abs {
                Some(if x & sign != 0 { neg(xd) } else { xd })
            } else {
                None
            }
        }
        BitOp::Or => {
            if x == 0 && xd == 0 {
                Some(yd)
            } else if y == 0 && yd == 0 {
                Some(xd)
            } else if x == sign && xd == 0 {
                Some(if y & sign != 0 { yd } else { neg(yd) })
            } else if y == sign && yd == 0 {
                Some(if x & sign != 0 { xd } else { neg(xd) })
            } else {
                None
            }
        }
        BitOp::Xor => {
            if x == sign && xd == 0 {
                Some(neg(yd))
            } else if y == sign && yd == 0 {
                Some(neg(xd))
            } else {
                None
            }
        }
    }
}

fn lane32(op: BitOp, x: u64, y: u64, xd: u64, yd: u64) -> u64 {
    lane_rule(op, x, y, xd, yd, 32).unwrap_or(0)
}

fn lane64(op: BitOp, x: u64, y: u64, xd: u64, yd: u64) -> u64 {
    if let Some(d) = lane_rule(op, x, y, xd, yd, 64) {
        return d;
    }
    let lo = |v: u64| v & 0xffff_ffff;
    let hi = |v: u64| v >> 32;
    lane32(op, lo(x), lo(y), lo(xd), lo(yd)) | (lane32(op, hi(x), hi(y), hi(xd), hi(yd)) << 32)
}

/// Dot of `x op y` given operand dots, for a 32-, 64- or 128-bit operation.
pub fn ad_bitlogic(op: BitOp, x: u128, y: u128, xd: u128, yd: u128, width: u32) -> u128 {
    let part = |v: u128, i: u32| (v >> (64 * i)) as u64;
    match width {
        32 => lane32(op, x as u64 & 0xffff_ffff, y as u64 & 0xffff_ffff, xd as u64 & 0xffff_ffff, yd as u64 & 0xffff_ffff) as u128,
        64 => lane64(op, x as u64, y as u64, xd as u64, yd as u64) as u128,
        128 => (0..2).fold(0u128, |acc, i| {
            acc | ((lane64(op, part(x, i), part(y, i), part(xd, i), part(yd, i)) as u128) << (64 * i))
        }),
        _ => panic!("ad_bitlogic: unsupported width {width}"),
    }
}

/// Registers the three helpers as CCalls taking `(x, y, xdot, ydot)`.
pub fn register(machine: &mut Machine) {
    for op in [BitOp::And, BitOp::Or, BitOp::Xor] {
        let f: CCallFn = Arc::new(move |a, ty| ad_bitlogic(op, a[0], a[1], a[2], a[3], ty.bits()));
        machine.register_ccall(op.helper_name(), f).expect("bitlogic helpers registered once");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: f64) -> u128 {
        v.to_bits() as u128
    }

    const ABS64: u128 = 0x7fff_ffff_ffff_ffff;
    const SIGN64: u128 = 0x8000_0000_0000_0000;

    #[test]
    fn fabs_of_negative_flips_dot() {
        assert_eq!(ad_bitlogic(BitOp::And, ABS64, b(-3.0), 0, b(1.0), 64), b(-1.0));
        assert_eq!(ad_bitlogic(BitOp::And, b(-3.0), ABS64, b(1.0), 0, 64), b(-1.0));
        assert_eq!(ad_bitlogic(BitOp::And, ABS64, b(3.0), 0, b(1.0), 64), b(1.0));
    }

    #[test]
    fn fabs_at_negative_zero_uses_sign_bit() {
        assert_eq!(ad_bitlogic(BitOp::And, ABS64, b(-0.0), 0, b(2.0), 64), b(-2.0));
    }

    #[test]
    fn negation() {
        assert_eq!(ad_bitlogic(BitOp::Xor, SIGN64, b(2.0), 0, b(1.0), 64), b(-1.0));
        // A sign mask that itself carries a dot is not a negation.
        assert_eq!(ad_bitlogic(BitOp::Xor, SIGN64, b(2.0), b(1.0), b(1.0), 64), 0);
    }

    #[test]
    fn neg_abs() {
        assert_eq!(ad_bitlogic(BitOp::Or, SIGN64, b(2.0), 0, b(1.0), 64), b(-1.0));
        assert_eq!(ad_bitlogic(BitOp::Or, SIGN64, b(-2.0), 0, b(1.0), 64), b(1.0));
    }

    #[test]
    fn selects() {
        let yd = b(5.5);
        assert_eq!(ad_bitlogic(BitOp::And, u64::MAX as u128, b(1.0), 0, yd, 64), yd);
        assert_eq!(ad_bitlogic(BitOp::And, 0, b(1.0), 0, yd, 64), 0);
        assert_eq!(ad_bitlogic(BitOp::Or, 0, b(1.0), 0, yd, 64), yd);
        assert_eq!(ad_bitlogic(BitOp::Or, b(1.0), 0, yd, 0, 64), yd);
    }

    #[test]
    fn both_abs_masks_have_no_derivative() {
        assert_eq!(ad_bitlogic(BitOp::And, ABS64, ABS64, b(1.0), b(1.0), 64), 0);
    }

    #[test]
    fn unmatched_lane_is_zero() {
        assert_eq!(ad_bitlogic(BitOp::Xor, b(1.5), b(2.5), b(1.0), b(1.0), 64), 0);
        assert_eq!(ad_bitlogic(BitOp::And, 0x7ff0_0000_0000_0000, b(6.0), 0, b(1.0), 64), 0);
    }

    #[test]
    fn abs_constant_on_v128() {
        // Lane 0 carries the abs mask, lane 1 is zero.
        let x = ((b(4.0)) << 64) | b(-3.0);
        let xd = (b(9.0) << 64) | b(1.0);
        assert_eq!(ad_bitlogic(BitOp::And, ABS64, x, 0, xd, 128), b(-1.0));
    }

    #[test]
    fn falls_back_to_32_bit_sublanes() {
        let f = |v: f32| v.to_bits() as u64;
        let x = ((0x8000_0000u64) << 32) | 0x7fff_ffff;
        let y = (f(2.0) << 32) | f(-3.0);
        let yd = (f(1.0) << 32) | f(1.0);
        // Lane 0: abs mask AND -3 -> -1; lane 1: sign mask AND 2 is not a pattern.
        let r = ad_bitlogic(BitOp::And, x as u128, y as u128, 0, yd as u128, 64) as u64;
        assert_eq!(r, f(-1.0));
        let r = ad_bitlogic(BitOp::Xor, ((0x8000_0000u64) << 32) as u128, y as u128, 0, yd as u128, 64) as u64;
        assert_eq!(r >> 32, f(-1.0));
    }

    #[test]
    fn width_32() {
        let f = |v: f32| v.to_bits() as u128;
        assert_eq!(ad_bitlogic(BitOp::And, 0x7fff_ffff, f(-3.0), 0, f(1.0), 32), f(-1.0));
        assert_eq!(ad_bitlogic(BitOp::Xor, f(2.0), 0x8000_0000, f(1.0), 0, 32), f(-1.0));
    }
}
