#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::fpcodec::{f64_to_x87, x87_to_f64, X87Extended};

fuzz_target!(|bytes: [u8; 10]| {
    let narrowed = x87_to_f64(X87Extended(bytes));
    if f64::from_bits(narrowed).is_finite() {
        assert_eq!(x87_to_f64(f64_to_x87(narrowed)), narrowed);
    }
});
