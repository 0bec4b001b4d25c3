#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::fpcodec::{decode, encode, Format};

fuzz_target!(|bits: u64| {
    if !f64::from_bits(bits).is_nan() {
        assert_eq!(encode(decode(bits, Format::Binary64), Format::Binary64), bits);
    }
    let b = bits & 0xffff_ffff;
    if !f32::from_bits(b as u32).is_nan() {
        assert_eq!(encode(decode(b, Format::Binary32), Format::Binary32), b);
    }
});
