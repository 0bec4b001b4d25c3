#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::ir::parse_asm;

fuzz_target!(|text: &str| {
    if let Ok(p) = parse_asm(text) {
        let again = parse_asm(&p.to_string()).expect("printed program parses");
        assert_eq!(again, p);
    }
});
