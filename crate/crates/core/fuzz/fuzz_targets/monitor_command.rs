#![no_main]

use libfuzzer_sys::fuzz_target;
use shadowad::driver::run::{engine_machine, initial_state, prepare};
use shadowad::driver::{MonitorSession, RunOptions};
use shadowad::frontend::{compile, CompileOptions};

const SRC: &str = "f64 x = input(0);\nf64 a[4];\nfor i in 0..4 { a[i] = x * f64(i); }\noutput(a[3]);\n";

fuzz_target!(|script: &str| {
    let c = compile(SRC, CompileOptions::default()).unwrap();
    let (p, _) = prepare(&c.program, RunOptions::default());
    let state = initial_state(&p, &[1.5], Some(0));
    let mut m = MonitorSession::new(engine_machine(), p, state).with_symbols(c.symbols);
    m.fuel = 1000;
    for line in script.lines().take(64) {
        let _ = m.command(line);
    }
});
