use super::*;
use crate::driver::{run, RunOptions};
use crate::ir::{validate, Const, IrType, OpClass, Stmt};

fn eval(src: &str, inputs: &[f64]) -> (f64, f64) {
    let c = compile(src, CompileOptions::default()).unwrap();
    let r = run(&c.program, inputs, Some(0), RunOptions::default()).unwrap();
    (r.outputs[0].value.to_f64(), r.outputs[0].dot.to_f64())
}

#[test]
fn cube() {
    assert_eq!(eval("f64 x = input(0);\nf64 y = x * x * x;\noutput(y);\n", &[4.0]), (64.0, 48.0));
}

#[test]
fn abs_takes_the_and_path() {
    let c = compile("f64 x = input(0); output(abs(x));", CompileOptions::default()).unwrap();
    let and = c.program.blocks.values().flat_map(|b| &b.stmts).any(|s| {
        s.exprs().iter().any(|e| {
            let mut hit = false;
            e.visit(&mut |x| {
                if let crate::ir::Expr::Op { op: crate::ir::Opcode::AndV128, .. } = x {
                    hit = true;
                }
            });
            hit
        })
    });
    assert!(and);
    assert_eq!(eval("f64 x = input(0); output(abs(x));", &[-3.0]), (3.0, -1.0));
}

#[test]
fn empty_program_halts() {
    let c = compile("", CompileOptions::default()).unwrap();
    let entry = c.program.block(c.program.entry).unwrap();
    assert_eq!(entry.stmts.last(), Some(&Stmt::Halt));
    assert!(validate(&c.program).is_empty());
}

#[test]
fn mask_constants_are_emitted() {
    let c = compile("use sse; f64 x = input(0); output(-abs(x));", CompileOptions::default()).unwrap();
    let mut consts = Vec::new();
    for b in c.program.blocks.values() {
        for s in &b.stmts {
            for e in s.exprs() {
                e.visit(&mut |x| {
                    if let crate::ir::Expr::Const(k) = x {
                        consts.push(*k);
                    }
                });
            }
        }
    }
    assert!(consts.contains(&Const::new(IrType::V128, 0x7fff_ffff_ffff_ffff)));
    assert!(consts.contains(&Const::i64(0x8000_0000_0000_0000)));
}

#[test]
fn branches_and_loops() {
    let src = "f64 a = input(0);\nf64 y;\nif (a < 0) { y = 2 + a; } else { y = 2 * a; }\noutput(y);\n";
    assert_eq!(eval(src, &[-1.0]), (1.0, 1.0));
    assert_eq!(eval(src, &[3.0]), (6.0, 2.0));
    let src = "f64 x = input(0); f64 p = 1; for i in 0..5 { p = p * x; } output(p);";
    assert_eq!(eval(src, &[2.0]), (32.0, 80.0));
    let src = "f64 x = input(0); i64 k = 0; while (k < 3) { x = x * x; k = k + 1; } output(x);";
    assert_eq!(eval(src, &[1.5]), (1.5f64.powi(8), 8.0 * 1.5f64.powi(7)));
}

#[test]
fn select_in_sse_mode() {
    let src = "use sse; f64 a = input(0); output(select(a < 0, 2 + a, 2 * a));";
    let c = compile(src, CompileOptions::default()).unwrap();
    let cov = class_coverage(&c.program);
    assert!(cov.contains_key(&OpClass::MaskCompare));
    assert_eq!(eval(src, &[-1.0]), (1.0, 1.0));
    assert_eq!(eval(src, &[3.0]), (6.0, 2.0));
}

#[test]
fn arrays_and_whole_array_ops() {
    let src = "f64 x = input(0);\nf64 a[5]; f64 b[5]; f64 c[5];\n\
               for i in 0..5 { a[i] = x * f64(i); b[i] = x + 1; }\n\
               c = a * b;\nf64 s = 0;\nfor i in 0..5 { s = s + c[i]; }\noutput(s);\n";
    // sum_i i*x*(x+1) = 10 (x^2 + x)
    assert_eq!(eval(src, &[2.0]), (60.0, 50.0));
}

#[test]
fn set_and_get_dot() {
    let src = "f64 x = input(0); dg_set_dot(x, 2.5); f64 y = x * 3; output(dg_get_dot(y)); output(y);";
    let c = compile(src, CompileOptions::default()).unwrap();
    let r = run(&c.program, &[1.0], Some(0), RunOptions::default()).unwrap();
    assert_eq!(r.outputs[0].value.to_f64(), 7.5);
    assert_eq!(r.outputs[0].dot.to_f64(), 0.0);
    assert_eq!(r.outputs[1].dot.to_f64(), 7.5);
}

#[test]
fn soft_sine_replaces_calls() {
    let c = compile("f64 x = input(0); output(sin(x));", CompileOptions { soft_math: true }).unwrap();
    assert!(c.typed.uses_softsin);
    assert!(!c.program.data.is_empty());
    let r = run(&c.program, &[0.3], None, RunOptions { ad: false, ..Default::default() }).unwrap();
    assert!((r.outputs[0].value.to_f64() - 0.3f64.sin()).abs() < 1e-8);
}

#[test]
fn lines_map_marks_to_source() {
    let c = compile("f64 x = input(0);\n\nf64 y = x;\noutput(y);\n", CompileOptions::default()).unwrap();
    let lines: Vec<usize> = c.lines.values().copied().collect();
    assert_eq!(lines, vec![1, 3, 4]);
}

#[test]
fn generated_programs_compile_and_validate() {
    for seed in 0..1000 {
        let g = gen_random(seed, 10);
        let c = compile(&g.src, CompileOptions::default()).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.src));
        let d = validate(&c.program);
        assert!(d.is_empty(), "seed {seed}: {d:?}\n{}", g.src);
        assert_eq!(c.spec(g.spec.seed), g.spec);
    }
}

#[test]
fn generator_is_deterministic() {
    assert_eq!(gen_random(17, 10), gen_random(17, 10));
    assert_ne!(gen_random(17, 10).src, gen_random(18, 10).src);
}

#[test]
fn generated_names_avoid_type_keywords() {
    // This seed used to reach a 64th fresh name and call a loop counter `i64`.
    let g = gen_random(6862612647719190602, 10);
    assert!(!g.src.contains("for i64 "));
    compile(&g.src, CompileOptions::default()).unwrap();
}

#[test]
fn generator_covers_every_class_per_200_programs() {
    let wanted = [
        OpClass::ScalarFp,
        OpClass::SimdFp,
        OpClass::LowestLane,
        OpClass::FpConversion,
        OpClass::IntFpConversion,
        OpClass::Reinterpret,
        OpClass::Pack,
        OpClass::Bitwise,
        OpClass::Integer,
        OpClass::Compare,
        OpClass::MaskCompare,
    ];
    for window in 0..5u64 {
        let mut seen = BTreeMap::new();
        for seed in window * 200..(window + 1) * 200 {
            let c = compile(&gen_random(seed, 10).src, CompileOptions::default()).unwrap();
            for (k, n) in class_coverage(&c.program) {
                *seen.entry(k).or_insert(0) += n;
            }
        }
        for w in wanted {
            assert!(seen.contains_key(&w), "window {window}: no {w:?}");
        }
        assert!(!seen.contains_key(&OpClass::Unknown));
    }
}
