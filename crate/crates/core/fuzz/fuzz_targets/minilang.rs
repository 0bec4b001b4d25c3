#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::driver::{run, RunOptions};
use shadowad::frontend::{compile, CompileOptions};
use shadowad::ir::validate;

const INPUTS: [f64; 3] = [1.5, -0.5, 2.0];

fuzz_target!(|src: &str| {
    for soft_math in [false, true] {
        let Ok(c) = compile(src, CompileOptions { soft_math }) else { continue };
        assert!(validate(&c.program).is_empty());
        // Reading dots back as values legitimately differs between the two runs.
        if src.contains("dg_get_dot") {
            continue;
        }
        let ad = RunOptions { fuel: 2000, math_wrappers: !soft_math, ..RunOptions::default() };
        let with = run(&c.program, &INPUTS, Some(0), ad);
        let without = run(&c.program, &INPUTS, None, RunOptions { ad: false, ..ad });
        match (with, without) {
            (Ok(a), Ok(b)) => {
                let bits = |r: &shadowad::driver::RunReport| r.outputs.iter().map(|o| o.value.bits).collect::<Vec<_>>();
                assert_eq!(bits(&a), bits(&b));
            }
            (a, b) => assert_eq!(a.is_ok(), b.is_ok()),
        }
    }
});
