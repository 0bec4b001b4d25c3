#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::driver::{header_defaults, parse_inputs};

fuzz_target!(|text: &str| {
    let _ = header_defaults(text);
    let _ = parse_inputs(text);
});
