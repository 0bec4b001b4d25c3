//! Bit-level codecs for binary32, binary64 and the x87 80-bit
//! double-extended format, plus lane views over packed operands.
//!
//! Decoding evaluates the sign/exponent/significand formula directly rather
//! than transmuting, so it can serve as an independent reference for the
//! machine's arithmetic. NaN payloads are never canonicalized.

use thiserror::Error;

use crate::ir::IrType;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary32,
    Binary64,
}

impl Format {
    pub const fn frac_bits(self) -> u32 {
        match self {
            Format::Binary32 => 23,
            Format::Binary64 => 52,
        }
    }

    pub const fn exp_bits(self) -> u32 {
        match self {
            Format::Binary32 => 8,
            Format::Binary64 => 11,
        }
    }

    pub const fn bias(self) -> i32 {
        (1 << (self.exp_bits() - 1)) - 1
    }

    /// Smallest exponent of a normal number (-126 / -1022).
    pub const fn min_exp(self) -> i32 {
        1 - self.bias()
    }

    /// Largest exponent of a finite number (127 / 1023).
    pub const fn max_exp(self) -> i32 {
        self.bias()
    }

    const fn width(self) -> u32 {
        1 + self.exp_bits() + self.frac_bits()
    }

    const fn exp_all_ones(self) -> u64 {
        (1 << self.exp_bits()) - 1
    }
}

/// A decoded floating-point datum. `Finite` never holds zero; finite values
/// of either format are exactly representable in an `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decoded {
    Zero { negative: bool },
    Finite(f64),
    Infinity { negative: bool },
    NaN { negative: bool, payload: u64 },
}

impl Decoded {
    /// The value as a host double (NaN payloads are not carried over).
    pub fn to_f64(self) -> f64 {
        match self {
            Decoded::Zero { negative: false } => 0.0,
            Decoded::Zero { negative: true } => -0.0,
            Decoded::Finite(v) => v,
            Decoded::Infinity { negative: false } => f64::INFINITY,
            Decoded::Infinity { negative: true } => f64::NEG_INFINITY,
            Decoded::NaN { .. } => f64::NAN,
        }
    }

    pub fn from_f64(v: f64) -> Decoded {
        if v == 0.0 {
            Decoded::Zero { negative: v.is_sign_negative() }
        } else if v.is_infinite() {
            Decoded::Infinity { negative: v < 0.0 }
        } else if v.is_nan() {
            Decoded::NaN { negative: v.is_sign_negative(), payload: 1 << 51 }
        } else {
            Decoded::Finite(v)
        }
    }
}

/// 2^e for e in the normal binary64 range.
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// 2^e for any e in [-1074, 1023], including subnormal powers.
fn pow2_any(e: i32) -> f64 {
    if e >= -1022 {
        pow2(e)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    }
}

/// Decodes a bit pattern of the given format.
///
/// Normal numbers evaluate (-1)^s * (1 + sum_k b_k 2^-k) * 2^E with the
/// biased exponent field; exponent field zero selects the zero/subnormal
/// branch and the all-ones field selects infinities and NaNs.
pub fn decode(bits: u64, format: Format) -> Decoded {
    let width = format.width();
    let bits = if width == 64 { bits } else { bits & ((1u64 << width) - 1) };
    let p = format.frac_bits();
    let negative = (bits >> (width - 1)) & 1 == 1;
    let exp_field = (bits >> p) & format.exp_all_ones();
    let frac = bits & ((1u64 << p) - 1);

    let magnitude = if exp_field == format.exp_all_ones() {
        return if frac == 0 {
            Decoded::Infinity { negative }
        } else {
            Decoded::NaN { negative, payload: frac }
        };
    } else if exp_field == 0 {
        if frac == 0 {
            return Decoded::Zero { negative };
        }
        // 0.f * 2^Emin
        (frac as f64 * pow2(-(p as i32))) * pow2(format.min_exp())
    } else {
        let e = exp_field as i32 - format.bias();
        let significand = ((1u64 << p) | frac) as f64 * pow2(-(p as i32));
        significand * pow2(e)
    };
    Decoded::Finite(if negative { -magnitude } else { magnitude })
}

/// Rounds a non-negative double to the nearest integer, ties to even.
fn round_half_even(t: f64) -> u64 {
    let fl = t.floor();
    let diff = t - fl;
    let mut n = fl as u64;
    if diff > 0.5 || (diff == 0.5 && n & 1 == 1) {
        n += 1;
    }
    n
}

/// Encodes a decoded datum, rounding to nearest-even. Values beyond the
/// format's range become infinities, tiny values become subnormals or zero.
pub fn encode(value: Decoded, format: Format) -> u64 {
    let width = format.width();
    let p = format.frac_bits();
    let sign_bit = 1u64 << (width - 1);
    let inf = format.exp_all_ones() << p;
    let (negative, a) = match value {
        Decoded::Zero { negative } => return if negative { sign_bit } else { 0 },
        Decoded::Infinity { negative } => return inf | if negative { sign_bit } else { 0 },
        Decoded::NaN { negative, payload } => {
            let mut frac = payload & ((1u64 << p) - 1);
            if frac == 0 {
                frac = 1 << (p - 1);
            }
            return inf | frac | if negative { sign_bit } else { 0 };
        }
        Decoded::Finite(v) => (v.is_sign_negative(), v.abs()),
    };
    let sign = if negative { sign_bit } else { 0 };
    if a == 0.0 {
        return sign;
    }
    if a.is_infinite() {
        return sign | inf;
    }

    // floor(log2 a) by bisection over the representable exponent range.
    let (mut lo, mut hi) = (-1074i32, 1023i32);
    while lo < hi {
        let mid = (lo + hi + 1).div_euclid(2);
        if pow2_any(mid) <= a {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut e = lo;

    if e < format.min_exp() {
        // Subnormal in the target format: count units of 2^(Emin - p).
        let unit_exp = format.min_exp() - p as i32;
        let t = if unit_exp >= -1022 { a / pow2(unit_exp) } else { a / pow2_any(unit_exp) };
        // Rounding may carry into the smallest normal; the bit layout
        // absorbs that without special casing.
        return sign | round_half_even(t);
    }

    let s = a / pow2_any(e);
    let mut m = round_half_even((s - 1.0) * pow2(p as i32));
    if m == 1 << p {
        m = 0;
        e += 1;
    }
    if e > format.max_exp() {
        return sign | inf;
    }
    sign | (((e + format.bias()) as u64) << p) | m
}

/// Newtype over a binary64 bit pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Binary64Bits(pub u64);

impl Binary64Bits {
    pub fn decode(self) -> Decoded {
        decode(self.0, Format::Binary64)
    }

    pub fn encode(value: Decoded) -> Self {
        Binary64Bits(encode(value, Format::Binary64))
    }

    pub fn sign(self) -> bool {
        self.0 >> 63 == 1
    }

    pub fn biased_exponent(self) -> u32 {
        ((self.0 >> 52) & 0x7ff) as u32
    }

    pub fn significand(self) -> u64 {
        self.0 & ((1 << 52) - 1)
    }
}

/// Newtype over a binary32 bit pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Binary32Bits(pub u32);

impl Binary32Bits {
    pub fn decode(self) -> Decoded {
        decode(self.0 as u64, Format::Binary32)
    }

    pub fn encode(value: Decoded) -> Self {
        Binary32Bits(encode(value, Format::Binary32) as u32)
    }
}

/// x87 double-extended value as laid out in memory by `fstpt`: 8 bytes of
/// significand (explicit integer bit in bit 63), then 15 exponent bits
/// (bias 16383) and the sign in the top bit, all little-endian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct X87Extended(pub [u8; 10]);

impl X87Extended {
    pub const BIAS: i32 = 16383;

    pub fn from_parts(negative: bool, exponent: u16, significand: u64) -> Self {
        let mut b = [0u8; 10];
        b[..8].copy_from_slice(&significand.to_le_bytes());
        let se = (exponent & 0x7fff) | if negative { 0x8000 } else { 0 };
        b[8..].copy_from_slice(&se.to_le_bytes());
        X87Extended(b)
    }

    pub fn negative(&self) -> bool {
        self.0[9] & 0x80 != 0
    }

    pub fn exponent(&self) -> u16 {
        u16::from_le_bytes([self.0[8], self.0[9]]) & 0x7fff
    }

    pub fn significand(&self) -> u64 {
        u64::from_le_bytes(self.0[..8].try_into().unwrap())
    }
}

/// Widens a binary64 to the 80-bit format. Exact for every input.
pub fn f64_to_x87(bits: u64) -> X87Extended {
    let negative = bits >> 63 == 1;
    let e = ((bits >> 52) & 0x7ff) as i32;
    let f = bits & ((1 << 52) - 1);
    match (e, f) {
        (0, 0) => X87Extended::from_parts(negative, 0, 0),
        (0x7ff, 0) => X87Extended::from_parts(negative, 0x7fff, 1 << 63),
        (0x7ff, f) => X87Extended::from_parts(negative, 0x7fff, (1 << 63) | (f << 11)),
        (0, f) => {
            // Subnormal binary64: normalize into the wider exponent range.
            let top = 63 - f.leading_zeros() as i32;
            let exp = top - 1074 + X87Extended::BIAS;
            X87Extended::from_parts(negative, exp as u16, f << (63 - top))
        }
        (e, f) => {
            let exp = e - 1023 + X87Extended::BIAS;
            X87Extended::from_parts(negative, exp as u16, (1 << 63) | (f << 11))
        }
    }
}

const F64_QNAN: u64 = 0x7ff8_0000_0000_0000;

/// Narrows an 80-bit value to binary64 with round-to-nearest-even.
/// Unnormals, pseudo-denormals, pseudo-infinities and pseudo-NaNs decode
/// as NaN.
pub fn x87_to_f64(x: X87Extended) -> u64 {
    let sign = if x.negative() { 1u64 << 63 } else { 0 };
    let exp = x.exponent() as i32;
    let mant = x.significand();
    let integer_bit = mant >> 63 == 1;

    if exp == 0x7fff {
        if !integer_bit {
            return sign | F64_QNAN;
        }
        let frac = mant << 1;
        if frac == 0 {
            return sign | (0x7ff << 52);
        }
        let mut payload = (mant >> 11) & ((1 << 52) - 1);
        if payload == 0 {
            payload = 1 << 51;
        }
        return sign | (0x7ff << 52) | payload;
    }
    if exp == 0 {
        if mant == 0 {
            return sign;
        }
        if integer_bit {
            return sign | F64_QNAN;
        }
        // Denormal 80-bit values lie far below the binary64 range.
        return sign;
    }
    if !integer_bit {
        return sign | F64_QNAN;
    }

    let mut e = exp - X87Extended::BIAS;
    if e > 1023 {
        return sign | (0x7ff << 52);
    }
    if e >= -1022 {
        let mut m = round_shift(mant, 11);
        if m == 1 << 53 {
            m >>= 1;
            e += 1;
            if e > 1023 {
                return sign | (0x7ff << 52);
            }
        }
        return sign | (((e + 1023) as u64) << 52) | (m & ((1 << 52) - 1));
    }
    // Subnormal result: value = mant * 2^(e - 63), unit 2^-1074.
    let shift = (63 - 1074 - e) as u32;
    sign | round_shift(mant, shift)
}

/// `m >> shift` rounded to nearest, ties to even.
fn round_shift(m: u64, shift: u32) -> u64 {
    if shift == 0 {
        return m;
    }
    if shift > 64 {
        return 0;
    }
    let wide = m as u128;
    let q = (wide >> shift) as u64;
    let rem = wide & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LaneError {
    #[error("granularity {granularity} does not divide the {width}-bit width of {ty}")]
    Granularity { granularity: u32, width: u32, ty: IrType },
}

/// Splits a value into lanes of `granularity` bits, lane 0 being the least
/// significant (lowest address).
pub fn lanes(bits: u128, ty: IrType, granularity: u32) -> Result<Vec<u64>, LaneError> {
    let width = ty.bits();
    if !matches!(granularity, 32 | 64) || width % granularity != 0 {
        return Err(LaneError::Granularity { granularity, width, ty });
    }
    let mask = if granularity == 64 { u64::MAX as u128 } else { (1u128 << granularity) - 1 };
    Ok((0..width / granularity)
        .map(|i| ((bits >> (i * granularity)) & mask) as u64)
        .collect())
}

/// Inverse of [`lanes`].
pub fn from_lanes(lanes: &[u64], granularity: u32) -> u128 {
    lanes
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, l)| acc | ((*l as u128) << (i as u32 * granularity)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_examples() {
        assert_eq!(decode(0, Format::Binary64), Decoded::Zero { negative: false });
        assert_eq!(decode(0x4000_0000_0000_0000, Format::Binary64), Decoded::Finite(2.0));
        assert_eq!(decode(0x3ff0_0000_0000_0000, Format::Binary64), Decoded::Finite(1.0));
        assert_eq!(decode(0x8000_0000_0000_0000, Format::Binary64), Decoded::Zero { negative: true });
        assert_eq!(decode(0x7ff0_0000_0000_0000, Format::Binary64), Decoded::Infinity { negative: false });
        assert_eq!(decode(1, Format::Binary64), Decoded::Finite(f64::from_bits(1)));
        assert_eq!(decode(0x3f80_0000, Format::Binary32), Decoded::Finite(1.0));
        assert_eq!(decode(1, Format::Binary32), Decoded::Finite(f32::from_bits(1) as f64));
    }

    #[test]
    fn exponent_ranges() {
        assert_eq!((Format::Binary64.min_exp(), Format::Binary64.max_exp()), (-1022, 1023));
        assert_eq!((Format::Binary32.min_exp(), Format::Binary32.max_exp()), (-126, 127));
        // 0b00..01 and 0b11..10 exponent fields.
        assert_eq!(decode(1 << 52, Format::Binary64), Decoded::Finite(2f64.powi(-1022)));
        assert_eq!(decode(0x7fe0_0000_0000_0000, Format::Binary64), Decoded::Finite(2f64.powi(1023)));
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(Decoded::Zero { negative: false }, Format::Binary64), 0);
        assert_eq!(encode(Decoded::Finite(2.0), Format::Binary64), 0x4000_0000_0000_0000);
        let three = encode(Decoded::Finite(3.0), Format::Binary64);
        assert_eq!(encode(Decoded::Finite(-3.0), Format::Binary64), three | 1 << 63);
    }

    #[test]
    fn encode_rounds_to_binary32() {
        // 1 + 2^-24 is a tie between 1 and 1 + 2^-23: even wins.
        let tie = 1.0 + 2f64.powi(-24);
        assert_eq!(encode(Decoded::Finite(tie), Format::Binary32), 0x3f80_0000);
        let above = 1.0 + 2f64.powi(-24) + 2f64.powi(-40);
        assert_eq!(encode(Decoded::Finite(above), Format::Binary32), 0x3f80_0001);
        assert_eq!(encode(Decoded::Finite(1e300), Format::Binary32), 0x7f80_0000);
        assert_eq!(encode(Decoded::Finite(1e-300), Format::Binary32), 0);
        // Largest subnormal rounds up to the smallest normal.
        let near_min = f32::MIN_POSITIVE as f64 - 2f64.powi(-151);
        assert_eq!(encode(Decoded::Finite(near_min), Format::Binary32), 0x0080_0000);
    }

    #[test]
    fn x87_layout_of_one() {
        let x = f64_to_x87(1f64.to_bits());
        assert!(!x.negative());
        assert_eq!(x.exponent(), 16383);
        assert_eq!(x.significand(), 1 << 63);
        assert_eq!(x.0, [0, 0, 0, 0, 0, 0, 0, 0x80, 0xff, 0x3f]);
    }

    #[test]
    fn x87_zero_is_all_zero_bytes() {
        assert_eq!(f64_to_x87(0).0, [0u8; 10]);
    }

    #[test]
    fn x87_invalid_encodings_are_nan() {
        let unnormal = X87Extended::from_parts(false, 16383, 1 << 62);
        assert!(f64::from_bits(x87_to_f64(unnormal)).is_nan());
        let pseudo_denormal = X87Extended::from_parts(false, 0, 1 << 63);
        assert!(f64::from_bits(x87_to_f64(pseudo_denormal)).is_nan());
        let pseudo_inf = X87Extended::from_parts(false, 0x7fff, 0);
        assert!(f64::from_bits(x87_to_f64(pseudo_inf)).is_nan());
    }

    #[test]
    fn x87_narrowing_rounds_to_nearest_even() {
        // 1 + 2^-53 (a tie) rounds down to 1; 1 + 3*2^-53 rounds up.
        let tie = X87Extended::from_parts(false, 16383, (1 << 63) | (1 << 10));
        assert_eq!(x87_to_f64(tie), 1f64.to_bits());
        let up = X87Extended::from_parts(false, 16383, (1 << 63) | (3 << 10));
        assert_eq!(x87_to_f64(up), 1f64.to_bits() + 2);
        let huge = X87Extended::from_parts(false, 16383 + 2000, 1 << 63);
        assert_eq!(x87_to_f64(huge), f64::INFINITY.to_bits());
    }

    #[test]
    fn lane_examples() {
        assert_eq!(lanes(0, IrType::V128, 64).unwrap(), vec![0, 0]);
        assert_eq!(lanes(0x4000_0000_0000_0000, IrType::I64, 32).unwrap(), vec![0, 0x4000_0000]);
        // .long -1, .long 2147483647, .long 0, .long 0 in little-endian order.
        let mut bytes = Vec::new();
        for l in [-1i32, 2147483647, 0, 0] {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        let v = u128::from_le_bytes(bytes.try_into().unwrap());
        assert_eq!(lanes(v, IrType::V128, 64).unwrap(), vec![0x7fff_ffff_ffff_ffff, 0]);
        assert!(lanes(0, IrType::I32, 64).is_err());
        assert_eq!(from_lanes(&lanes(v, IrType::V128, 32).unwrap(), 32), v);
    }
}
