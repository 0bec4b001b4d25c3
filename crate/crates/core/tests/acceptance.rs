//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shadowad::driver::monitor::hex_dump;
use shadowad::driver::run::{execute, initial_state, prepare};
use shadowad::driver::{
    bench_burgers, engine_machine, finite_diff_program, oracle_eval_typed, rel_err, run, BenchReport, BenchmarkConfig,
    DualValue, MonitorSession, RunOptions,
};
use shadowad::fpcodec::{decode, encode, f64_to_x87, x87_to_f64, Format};
use shadowad::frontend::layout::{INPUT, OUTPUT};
use shadowad::frontend::{compile, gen_random, CompileOptions, Compiled, Generated};
use shadowad::ir::{parse_asm, IrType};
use shadowad::limitation_corpus::{builtin_dir, load_dir, run_case, SCENARIOS};
use shadowad::machine::{run_threads, MachineState, Thread, ThreadSet, GUEST_BAND};
use shadowad::mathwrap::MathFn;

type Outcome = Result<String, String>;

const CORPUS: u64 = 1000;
const FUEL: u64 = 1_000_000;

fn corpus() -> impl Iterator<Item = (u64, Generated, Compiled)> {
    (0..CORPUS).map(|seed| {
        let g = gen_random(seed, 10);
        let c = compile(&g.src, CompileOptions::default()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        (seed, g, c)
    })
}

fn opts() -> RunOptions {
    RunOptions { fuel: FUEL, ..RunOptions::default() }
}

fn burgers() -> &'static BenchReport {
    static REPORT: OnceLock<BenchReport> = OnceLock::new();
    REPORT.get_or_init(|| bench_burgers(BenchmarkConfig { nx: 20, nt: 10, reps: 1 }).expect("Burgers benchmark"))
}

fn first_failures(v: &[String]) -> String {
    let n = v.len();
    format!("{n} failures, first: {}", v.iter().take(3).cloned().collect::<Vec<_>>().join("; "))
}

// 1 -------------------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut outputs = 0;
    for (seed, g, c) in corpus() {
        let e = run(&c.program, &g.inputs, Some(g.spec.seed), opts()).map_err(|f| format!("seed {seed}: {f}"))?;
        let o = oracle_eval_typed(&c.typed, &g.inputs, Some(g.spec.seed), FUEL).map_err(|f| format!("seed {seed}: {f}"))?;
        for (j, (eo, oo)) in e.outputs.iter().zip(&o.outputs).enumerate() {
            outputs += 1;
            if eo.dot.bits != oo.dot || eo.value.bits != oo.value {
                bad.push(format!("seed {seed} output {j}: engine {} oracle {}", eo.dot.to_f64(), oo.dot_f64()));
            }
        }
    }
    let took = t0.elapsed();
    if !bad.is_empty() {
        return Err(first_failures(&bad));
    }
    if took > Duration::from_secs(120) {
        return Err(format!("took {:.1}s, limit 120s", took.as_secs_f64()));
    }
    Ok(format!("{CORPUS} programs, {outputs} outputs, 0 ULP apart, {:.1}s", took.as_secs_f64()))
}

// 2 -------------------------------------------------------------------------

fn non_interference() -> Outcome {
    let mut bad = Vec::new();
    let band = GUEST_BAND as usize;
    for (seed, g, c) in corpus() {
        let with = run(&c.program, &g.inputs, Some(g.spec.seed), opts()).map_err(|f| f.to_string())?;
        let without = run(&c.program, &g.inputs, None, RunOptions { ad: false, ..opts() }).map_err(|f| f.to_string())?;
        let vals = |r: &shadowad::driver::RunReport| r.outputs.iter().map(|o| o.value.bits).collect::<Vec<_>>();
        let printed = |r: &shadowad::driver::RunReport| r.printed.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if vals(&with) != vals(&without) || printed(&with) != printed(&without) {
            bad.push(format!("seed {seed}: outputs differ"));
        } else if with.state.memory != without.state.memory {
            bad.push(format!("seed {seed}: memory differs"));
        } else if with.state.guest[..band] != without.state.guest[..band] {
            bad.push(format!("seed {seed}: guest registers differ"));
        }
    }
    let b = burgers();
    if b.value.to_bits() != b.native_value.to_bits() {
        bad.push(format!("Burgers: {} vs {}", b.value, b.native_value));
    }
    if !bad.is_empty() {
        return Err(first_failures(&bad));
    }
    Ok(format!("{CORPUS} programs (outputs, memory, registers) and Burgers bit-identical"))
}

// 3 -------------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let mut bad = Vec::new();
    let (mut programs, mut outputs, mut worst) = (0, 0, 0.0f64);
    for (seed, g, c) in corpus().filter(|(_, g, _)| g.smooth) {
        programs += 1;
        let e = run(&c.program, &g.inputs, Some(g.spec.seed), opts()).map_err(|f| f.to_string())?;
        let fd = finite_diff_program(&c.program, &g.inputs, g.spec.seed, 1e-6, FUEL).map_err(|f| f.to_string())?;
        for (j, (o, f)) in e.outputs.iter().zip(&fd).enumerate() {
            outputs += 1;
            let err = rel_err(o.dot.to_f64(), *f);
            if !(err <= 1e-4) {
                bad.push(format!("seed {seed} output {j}: dot {} fd {f}", o.dot.to_f64()));
            }
            worst = worst.max(err);
        }
    }
    if !bad.is_empty() {
        return Err(first_failures(&bad));
    }
    Ok(format!("{programs} smooth programs, {outputs} outputs, worst rel err {worst:.2e}"))
}

// 4 -------------------------------------------------------------------------

fn d(v: f64) -> u128 {
    v.to_bits() as u128
}

fn s(v: f32) -> u128 {
    v.to_bits() as u128
}

fn v2(lo: u128, hi: u128) -> u128 {
    lo | hi << 64
}

fn v4(l: [u128; 4]) -> u128 {
    l[0] | l[1] << 32 | l[2] << 64 | l[3] << 96
}

const ABS64: u128 = 0x7fff_ffff_ffff_ffff;
const SIGN64: u128 = 0x8000_0000_0000_0000;
const ONES64: u128 = 0xffff_ffff_ffff_ffff;
const ABS32: u128 = 0x7fff_ffff;
const SIGN32: u128 = 0x8000_0000;
const ONES32: u128 = 0xffff_ffff;

struct BitCase {
    name: &'static str,
    ty: IrType,
    op: &'static str,
    mask: u128,
    mask_first: bool,
    x: u128,
    xd: u128,
    want: u128,
}

/// Loads `x` (dot `xd`) from memory, combines it with the constant mask,
/// and returns the dot bits of the stored result.
fn bit_case_dot(c: &BitCase) -> Result<u128, String> {
    let (t, w) = match c.ty {
        IrType::I32 => ("I32", 4),
        IrType::I64 => ("I64", 8),
        _ => ("V128", 16),
    };
    let mask = format!("{:#x}:{t}", c.mask);
    let args = if c.mask_first { format!("{mask},t0") } else { format!("t0,{mask}") };
    let src = format!(
        "entry 0x400000\nsb 0x400000 tmps: {t} {t}\n  IMark(0x400000, 4)\n  t0 = LDle:{t}({INPUT:#x}:I64)\n  t1 = {}({args})\n  STle({OUTPUT:#x}:I64) = t1\n  Halt\n",
        c.op
    );
    let p = parse_asm(&src).map_err(|e| e.to_string())?;
    let (q, _) = prepare(&p, RunOptions::default());
    let mut st = initial_state(&q, &[], None);
    st.memory.write(INPUT, &c.x.to_le_bytes()[..w]);
    st.shadow.write(INPUT, &c.xd.to_le_bytes()[..w]);
    let r = execute(&engine_machine(), &q, st, 10).map_err(|e| e.to_string())?;
    let mut out = [0u8; 16];
    out[..w].copy_from_slice(&r.state.shadow.read(OUTPUT, w));
    Ok(u128::from_le_bytes(out))
}

fn bit_cases() -> Vec<BitCase> {
    use IrType::*;
    let c = |name, ty, op, mask, mask_first, x, xd, want| BitCase { name, ty, op, mask, mask_first, x, xd, want };
    vec![
        c("I64 fabs mask, x<0", I64, "And64", ABS64, true, d(-3.0), d(1.0), d(-1.0)),
        c("I64 fabs, x>0", I64, "And64", ABS64, false, d(2.5), d(0.75), d(0.75)),
        c("I64 fabs, x=-0", I64, "And64", ABS64, true, d(-0.0), d(2.0), d(-2.0)),
        c("I64 neg, x>0", I64, "Xor64", SIGN64, true, d(2.0), d(1.5), d(-1.5)),
        c("I64 neg, x<0", I64, "Xor64", SIGN64, false, d(-4.0), d(1.0), d(-1.0)),
        c("I64 negabs, x>0", I64, "Or64", SIGN64, true, d(2.0), d(1.0), d(-1.0)),
        c("I64 negabs, x<0", I64, "Or64", SIGN64, false, d(-2.0), d(1.0), d(1.0)),
        c("I64 select keep", I64, "And64", ONES64, true, d(1.0), d(5.5), d(5.5)),
        c("I64 select drop", I64, "And64", 0, false, d(1.0), d(5.5), 0),
        c("I64 select merge", I64, "Or64", 0, true, d(7.0), d(3.0), d(3.0)),
        c("I32 fabs, x<0", I32, "And32", ABS32, true, s(-3.0), s(1.0), s(-1.0)),
        c("I32 fabs, x>0", I32, "And32", ABS32, false, s(0.5), s(2.0), s(2.0)),
        c("I32 neg", I32, "Xor32", SIGN32, true, s(2.0), s(1.0), s(-1.0)),
        c("I32 negabs", I32, "Or32", SIGN32, false, s(-2.0), s(0.25), s(0.25)),
        c("I32 select keep", I32, "And32", ONES32, true, s(1.0), s(4.0), s(4.0)),
        c("I32 select drop", I32, "And32", 0, true, s(1.0), s(4.0), 0),
        c("V128/64 fabs", V128, "AndV128", v2(ABS64, ABS64), true, v2(d(-3.0), d(4.0)), v2(d(1.0), d(9.0)), v2(d(-1.0), d(9.0))),
        c("V128/64 neg", V128, "XorV128", v2(SIGN64, SIGN64), false, v2(d(2.0), d(-5.0)), v2(d(1.0), d(2.0)), v2(d(-1.0), d(-2.0))),
        c("V128/64 negabs", V128, "OrV128", v2(SIGN64, SIGN64), true, v2(d(2.0), d(-2.0)), v2(d(1.0), d(1.0)), v2(d(-1.0), d(1.0))),
        c("V128/64 fabs mask", V128, "AndV128", ABS64, true, v2(d(-3.0), d(4.0)), v2(d(1.0), d(9.0)), v2(d(-1.0), 0)),
        c("V128/64 select", V128, "AndV128", v2(ONES64, 0), false, v2(d(1.0), d(2.0)), v2(d(3.0), d(4.0)), v2(d(3.0), 0)),
        c(
            "V128/32 fabs",
            V128,
            "AndV128",
            v4([ABS32; 4]),
            true,
            v4([s(-1.0), s(2.0), s(-3.0), s(4.0)]),
            v4([s(1.0), s(1.0), s(2.0), s(0.5)]),
            v4([s(-1.0), s(1.0), s(-2.0), s(0.5)]),
        ),
        c(
            "V128/32 neg",
            V128,
            "XorV128",
            v4([SIGN32; 4]),
            false,
            v4([s(1.0), s(-2.0), s(3.0), s(-4.0)]),
            v4([s(1.0), s(2.0), s(3.0), s(4.0)]),
            v4([s(-1.0), s(-2.0), s(-3.0), s(-4.0)]),
        ),
        c(
            "V128/32 negabs",
            V128,
            "OrV128",
            v4([SIGN32; 4]),
            true,
            v4([s(1.0), s(-2.0), s(3.0), s(-4.0)]),
            v4([s(1.0), s(1.0), s(1.0), s(1.0)]),
            v4([s(-1.0), s(1.0), s(-1.0), s(1.0)]),
        ),
        c(
            "V128/32 select",
            V128,
            "AndV128",
            v4([ONES32, 0, ONES32, 0]),
            true,
            v4([s(1.0), s(2.0), s(3.0), s(4.0)]),
            v4([s(3.0), s(4.0), s(5.0), s(6.0)]),
            v4([s(3.0), 0, s(5.0), 0]),
        ),
        c(
            "V128/32 mixed fabs and select",
            V128,
            "AndV128",
            v4([ABS32, ABS32, ONES32, 0]),
            false,
            v4([s(-1.0), s(2.0), s(3.0), s(4.0)]),
            v4([s(1.0), s(1.0), s(2.0), s(2.0)]),
            v4([s(-1.0), s(1.0), s(2.0), 0]),
        ),
    ]
}

fn bit_tricks() -> Outcome {
    let mut bad = Vec::new();
    let mut n = 0;
    for c in bit_cases() {
        n += 1;
        let got = bit_case_dot(&c)?;
        if got != c.want {
            bad.push(format!("{}: dot {got:#x}, want {:#x}", c.name, c.want));
        }
    }
    // Compiled idioms: `abs` is the AND-mask sequence, `select` in sse mode the mask select.
    let compiled: [(&str, &str, f64, f64); 4] = [
        ("abs", "f64 x = input(0); output(abs(x));", -3.0, -1.0),
        ("abs, sse", "use sse; f64 x = input(0); output(abs(x));", -3.0, -1.0),
        ("select, true branch", "use sse; f64 a = input(0); output(select(a < 0, 2 + a, 2 * a));", -1.0, 1.0),
        ("select, false branch", "use sse; f64 a = input(0); output(select(a < 0, 2 + a, 2 * a));", 3.0, 2.0),
    ];
    for (name, src, x, want) in compiled {
        n += 1;
        let c = compile(src, CompileOptions::default()).map_err(|e| e.to_string())?;
        let r = run(&c.program, &[x], Some(0), RunOptions::default()).map_err(|e| e.to_string())?;
        let got = r.outputs[0].dot.to_f64();
        if got.to_bits() != want.to_bits() {
            bad.push(format!("{name}: dot {got}, want {want}"));
        }
    }
    if !bad.is_empty() {
        return Err(first_failures(&bad));
    }
    Ok(format!("{n} directed cases over I32, I64, V128 (64x2, 32x4) exact"))
}

// 5 -------------------------------------------------------------------------

const CAS_ONCE: &str = "
entry 0x0
sb 0x0 tmps: I64 I64 I64
  IMark(0x0, 1)
  t1 = ReinterpF64asI64(GET:F64(0))
  t2 = ReinterpF64asI64(GET:F64(8))
  t0 = CASle(0x9000:I64 :: t1 -> t2)
  PUT(16) = t0
  Halt
";

/// Memory (1.0, dot 0.5); CAS expecting (1.0, `expected_dot`) and swapping in (2.0, dot 1.0).
fn cas_once(expected_dot: f64) -> Result<MachineState, String> {
    let p = parse_asm(CAS_ONCE).map_err(|e| e.to_string())?;
    let (q, _) = prepare(&p, RunOptions::default());
    let mut st = initial_state(&q, &[], None);
    st.memory.write(0x9000, &1f64.to_le_bytes());
    st.shadow.write(0x9000, &0.5f64.to_le_bytes());
    let f = |v: f64| v.to_bits() as u128;
    let put = |st: &mut MachineState, off, v| st.put_guest(off, IrType::F64, f(v)).map_err(|e| e.to_string());
    put(&mut st, 0, 1.0)?;
    put(&mut st, GUEST_BAND, expected_dot)?;
    put(&mut st, 8, 2.0)?;
    put(&mut st, GUEST_BAND + 8, 1.0)?;
    Ok(execute(&engine_machine(), &q, st, 10).map_err(|e| e.to_string())?.state)
}

// Adds the f64 in guest[8] to the accumulator at 0x8000, guest[0] times.
// The load and the CAS sit in different superblocks so other threads can
// slip in between; a failed CAS retries.
const CAS_ACCUMULATE: &str = "
entry 0x0
sb 0x0 tmps: I64
  IMark(0x0, 1)
  t0 = LDle:I64(0x8000:I64)
  PUT(16) = t0
  goto 0x40
sb 0x40 tmps: I64 I64 I1 I64 I1
  IMark(0x40, 1)
  t0 = ReinterpF64asI64(AddF64(ReinterpI64asF64(GET:I64(16)),GET:F64(8)))
  t1 = CASle(0x8000:I64 :: GET:I64(16) -> t0)
  t2 = CmpEQ64(t1,GET:I64(16))
  t3 = Sub64(GET:I64(0),1Uto64(t2))
  PUT(0) = t3
  t4 = CmpEQ64(t3,0x0:I64)
  if (t4) goto 0x100
  goto 0x0
sb 0x100 tmps:
  IMark(0x100, 1)
  Halt
";

fn cas_suite() -> Outcome {
    let hit = cas_once(0.5)?;
    if hit.load_f64(0x9000) != 2.0 || hit.shadow_f64(0x9000) != 1.0 {
        return Err(format!("matching CAS: memory ({}, {})", hit.load_f64(0x9000), hit.shadow_f64(0x9000)));
    }
    let miss = cas_once(0.0)?;
    if miss.load_f64(0x9000) != 1.0 || miss.shadow_f64(0x9000) != 0.5 {
        return Err(format!("dot-mismatch CAS wrote ({}, {})", miss.load_f64(0x9000), miss.shadow_f64(0x9000)));
    }

    let p = parse_asm(CAS_ACCUMULATE).map_err(|e| e.to_string())?;
    let (q, _) = prepare(&p, RunOptions::default());
    let machine = engine_machine();
    // (count, value, dot) per thread; all sums are exact so order cannot matter.
    let work = [(5u64, 0.5f64, 1.0f64), (7, 0.25, 3.0)];
    let mut oracle = DualValue { value: 1.0, dot: 0.0 };
    for &(n, v, dv) in &work {
        for _ in 0..n {
            oracle = oracle + DualValue { value: v, dot: dv };
        }
    }
    let mut retries = 0;
    for seed in 0..10 {
        let mut st = MachineState::for_program(&q);
        st.memory.write(0x8000, &1f64.to_le_bytes());
        let mut ts = ThreadSet::new();
        for &(n, v, dv) in &work {
            let mut t = Thread::new(0);
            t.guest[..8].copy_from_slice(&n.to_le_bytes());
            t.guest[8..16].copy_from_slice(&v.to_le_bytes());
            let sh = GUEST_BAND as usize + 8;
            t.guest[sh..sh + 8].copy_from_slice(&dv.to_le_bytes());
            ts.spawn(t);
        }
        let r = run_threads(&machine, &q, &mut st, &mut ts, seed, 100_000).map_err(|e| e.to_string())?;
        let (v, dv) = (st.load_f64(0x8000), st.shadow_f64(0x8000));
        if v.to_bits() != oracle.value.to_bits() || dv.to_bits() != oracle.dot.to_bits() {
            return Err(format!("schedule seed {seed}: ({v}, {dv}), sequential ({}, {})", oracle.value, oracle.dot));
        }
        retries += r.schedule.len() - (2 * 12 + 2);
    }
    if retries == 0 {
        return Err("no schedule interleaved a load and a CAS".into());
    }
    Ok(format!(
        "dot mismatch blocks the swap; 10 schedules reach ({}, {}) with {retries} retried CASes",
        oracle.value, oracle.dot
    ))
}

// 6 -------------------------------------------------------------------------

fn burgers_benchmark() -> Outcome {
    let b = burgers();
    let page_bound = 2 * b.client_pages + b.shadow_nodes;
    let mut bad = Vec::new();
    if !b.oracle_exact() {
        bad.push(format!("dot {} vs oracle {}", b.dot, b.oracle_dot));
    }
    if !(b.fd_rel_err() <= 1e-4) {
        bad.push(format!("fd rel err {:.2e}", b.fd_rel_err()));
    }
    if b.shadow_pages > page_bound {
        bad.push(format!("{} shadow pages > {page_bound}", b.shadow_pages));
    }
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    Ok(format!(
        "dot {} exact vs oracle, fd rel err {:.1e}, shadow pages {} <= {page_bound}, slowdown {:.1}x (not asserted)",
        b.dot,
        b.fd_rel_err(),
        b.shadow_pages,
        b.slowdown()
    ))
}

// 7 -------------------------------------------------------------------------

fn limitation_corpus() -> Outcome {
    let cases = load_dir(&builtin_dir()).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for c in &cases {
        let o = run_case(c).map_err(|e| format!("{}: {e}", c.name))?;
        if !o.pass {
            bad.push(format!("{}: dot {} (golden {})", c.name, o.dot, c.header.wrong_dot));
        }
    }
    let missing: Vec<&str> = SCENARIOS.iter().copied().filter(|s| !cases.iter().any(|c| c.header.scenario == *s)).collect();
    if !missing.is_empty() {
        bad.push(format!("no case for {missing:?}"));
    }
    if !cases.iter().any(|c| c.header.scenario == "rounding-trick" && c.header.correct_dot == 0.0 && c.header.wrong_dot != 0.0) {
        bad.push("rounding-trick case missing".into());
    }
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    Ok(format!("{} cases over {} scenarios reproduce their golden wrong dots", cases.len(), SCENARIOS.len()))
}

// 8 -------------------------------------------------------------------------

fn math_wrappers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for f in MathFn::ALL {
        // ldexp's exponent is an integer argument.
        let args = if f == MathFn::Ldexp { 1 } else { f.arity() };
        for arg in 0..args {
            worst = worst.max(common::check(f, arg, &mut rng)?);
            checks += 1;
        }
    }

    let src = "f64 x = input(0);\nf64 y = sin(x);\noutput(y);\n";
    let soft = compile(src, CompileOptions { soft_math: true }).map_err(|e| e.to_string())?;
    let wrapped = compile(src, CompileOptions { soft_math: false }).map_err(|e| e.to_string())?;
    let (mut wrong, mut points) = (0, 0);
    for _ in 0..100 {
        let x: f64 = rng.gen_range(-3.0..3.0);
        points += 1;
        let off = RunOptions { math_wrappers: false, ..RunOptions::default() };
        let r = run(&soft.program, &[x], Some(0), off).map_err(|e| e.to_string())?;
        let dot = r.outputs[0].dot.to_f64();
        if (dot - x.cos()).abs() > 1e-3 {
            wrong += 1;
        }
        let r = run(&wrapped.program, &[x], Some(0), RunOptions::default()).map_err(|e| e.to_string())?;
        let dot = r.outputs[0].dot.to_f64();
        if dot.to_bits() != (x.cos() * 1.0).to_bits() {
            return Err(format!("wrapped sin at {x}: dot {dot}, cos {}", x.cos()));
        }
    }
    if wrong < points / 2 {
        return Err(format!("soft sine without wrappers was wrong at only {wrong}/{points} points"));
    }
    Ok(format!(
        "20 functions ({checks} partials x {} points) worst {worst:.1e}; soft sine wrong at {wrong}/{points} points, wrapped sine exact",
        common::POINTS
    ))
}

// 9 -------------------------------------------------------------------------

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0dec);
    let n = 1_000_000;
    for _ in 0..n {
        let b: u64 = rng.gen();
        if !f64::from_bits(b).is_nan() && encode(decode(b, Format::Binary64), Format::Binary64) != b {
            return Err(format!("binary64 {b:#018x}"));
        }
        let b = b & 0xffff_ffff;
        if !f32::from_bits(b as u32).is_nan() && encode(decode(b, Format::Binary32), Format::Binary32) != b {
            return Err(format!("binary32 {b:#010x}"));
        }
    }
    let mut x87 = 0;
    while x87 < 10_000 {
        let b: u64 = rng.gen();
        if !f64::from_bits(b).is_finite() {
            continue;
        }
        x87 += 1;
        if x87_to_f64(f64_to_x87(b)) != b {
            return Err(format!("x87 {b:#018x}"));
        }
    }
    Ok(format!("{n} binary64 and {n} binary32 patterns (NaNs skipped), {x87} x87 round trips"))
}

// 10 ------------------------------------------------------------------------

fn monitor_session() -> Outcome {
    let x = 4.0;
    // Client requests: seed x, read back the dot of y.
    let client = "f64 x = input(0);\ndg_set_dot(x, 1.0);\nf64 y = x * x * x;\noutput(dg_get_dot(y));\n";
    let c = compile(client, CompileOptions::default()).map_err(|e| e.to_string())?;
    let r = run(&c.program, &[x], None, RunOptions::default()).map_err(|e| e.to_string())?;
    let requested = hex_dump(&r.outputs[0].value.bits.to_le_bytes());

    // Monitor: same computation, seeded and read through commands.
    let plain = "f64 x = input(0);\nf64 y = x * x * x;\noutput(y);\n";
    let c = compile(plain, CompileOptions::default()).map_err(|e| e.to_string())?;
    let line2 = c.lines.iter().find(|(_, &l)| l == 2).map(|(a, _)| *a).ok_or("no IMark for line 2")?;
    let (q, _) = prepare(&c.program, RunOptions::default());
    let state = initial_state(&q, &[x], None);
    let mut m = MonitorSession::new(engine_machine(), q, state).with_symbols(c.symbols.clone());
    let one = hex_dump(&1f64.to_le_bytes()).replace(' ', "");
    let script = [
        (format!("break {line2:x}"), format!("breakpoint set at {line2:#x}")),
        ("continue".to_string(), format!("stopped at {line2:#x}")),
        (format!("setdot &x {one}"), "ok".to_string()),
        ("dot &x 8".to_string(), hex_dump(&1f64.to_le_bytes())),
        ("continue".to_string(), "halted".to_string()),
        ("dot &y 8".to_string(), requested.clone()),
    ];
    for (cmd, want) in &script {
        let got = m.command(cmd);
        if &got != want {
            return Err(format!("`{cmd}` answered `{got}`, expected `{want}`"));
        }
    }
    Ok(format!("setdot/continue/dot session matches dg_get_dot bytes [{requested}]"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("non-interference", non_interference),
        ("gradient check", gradient_check),
        ("bit-trick suite", bit_tricks),
        ("CAS suite", cas_suite),
        ("Burgers benchmark", burgers_benchmark),
        ("limitation corpus", limitation_corpus),
        ("math wrappers", math_wrappers),
        ("codec", codec),
        ("monitor session", monitor_session),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
