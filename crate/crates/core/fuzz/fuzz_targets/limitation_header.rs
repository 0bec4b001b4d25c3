#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::limitation_corpus::parse_header;

fuzz_target!(|text: &str| {
    let _ = parse_header(text);
});
