//! Seeded random minilang programs for the regression corpus.
//!
//! Smooth programs use only operations that are differentiable everywhere
//! along the sampled inputs: no float-valued branches, no kinks, no f32,
//! and every intermediate squashed into a moderate range. Other programs
//! draw from the full language except the bit-level intrinsics and
//! `dg_get_dot`.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProgramSpec;
use crate::ir::{Expr, OpClass, Program};

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub seed: u64,
    pub src: String,
    pub spec: ProgramSpec,
    pub inputs: Vec<f64>,
    /// Safe to compare against finite differences.
    pub smooth: bool,
}

#[derive(Clone)]
struct Array {
    name: String,
    len: usize,
    f32: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    smooth: bool,
    out: String,
    indent: usize,
    f64s: Vec<String>,
    f32s: Vec<String>,
    i64s: Vec<String>,
    arrays: Vec<Array>,
    counter: usize,
    /// Loop counter names in scope, usable as array indices.
    loop_vars: Vec<(String, usize)>,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        loop {
            self.counter += 1;
            let name = format!("{prefix}{}", self.counter);
            // `i64` and friends are type names.
            if !super::typeck::RESERVED.contains(&name.as_str()) {
                return name;
            }
        }
    }

    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn lit(&mut self) -> String {
        let v: f64 = self.rng.gen_range(-2.0..2.0);
        if v < 0.0 {
            format!("({v:.2})")
        } else {
            format!("{v:.2}")
        }
    }

    fn pos_lit(&mut self) -> String {
        format!("{:.2}", self.rng.gen_range(0.25..2.0))
    }

    fn squash(e: String) -> String {
        format!("tanh({e})")
    }

    fn leaf(&mut self) -> String {
        let r = self.rng.gen_range(0..10);
        if r < 6 && !self.f64s.is_empty() {
            return self.f64s.choose(&mut self.rng).unwrap().clone();
        }
        if r < 7 && !self.i64s.is_empty() {
            return format!("f64({})", self.i64s.choose(&mut self.rng).unwrap());
        }
        if r < 8 {
            if let Some((i, n)) = self.loop_vars.last().cloned() {
                if let Some(a) = self.arrays.iter().filter(|a| a.len == n && !a.f32).collect::<Vec<_>>().choose(&mut self.rng) {
                    return format!("{}[{i}]", a.name);
                }
                return format!("f64({i})");
            }
        }
        self.lit()
    }

    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf();
        }
        let d = depth - 1;
        let choices = if self.smooth { 9 } else { 15 };
        match self.rng.gen_range(0..choices) {
            0 => format!("{} + {}", self.expr(d), self.expr(d)),
            1 => format!("{} - {}", self.expr(d), self.expr(d)),
            2 => format!("({}) * ({})", self.expr(d), self.expr(d)),
            3 => {
                let (a, b) = (self.expr(d), self.expr(d));
                format!("({a}) / (({b}) * ({b}) + {})", self.pos_lit())
            }
            4 => format!("-({})", self.expr(d)),
            5 => {
                let a = self.expr(d);
                format!("sqrt(({a}) * ({a}) + {})", self.pos_lit())
            }
            6 | 7 => self.smooth_math(d),
            8 => {
                let a = self.expr(d);
                format!("{} * {}", Self::squash(a), self.lit())
            }
            9 => format!("abs({})", self.expr(d)),
            10 => {
                let (c, a, b) = (self.cond(d), self.expr(d), self.expr(d));
                format!("select({c}, {a}, {b})")
            }
            11 => self.rough_math(d),
            12 => format!("({}) / ({})", self.expr(d), self.expr(d)),
            13 if !self.f32s.is_empty() => {
                let s = self.f32s.choose(&mut self.rng).unwrap().clone();
                format!("f64({s} * {})", self.lit())
            }
            _ => format!("f64(f32({}))", self.expr(d)),
        }
    }

    fn smooth_math(&mut self, d: u32) -> String {
        let a = self.expr(d);
        let s = Self::squash(a.clone());
        match self.rng.gen_range(0..17) {
            0 => format!("sin({a})"),
            1 => format!("cos({a})"),
            2 => format!("tan({s})"),
            3 => format!("asin(0.9 * {s})"),
            4 => format!("acos(0.9 * {s})"),
            5 => format!("atan({a})"),
            6 => format!("atan2({a}, ({a}) * ({a}) + {})", self.pos_lit()),
            7 => format!("sinh({s})"),
            8 => format!("cosh({s})"),
            9 => format!("tanh({a})"),
            10 => format!("exp({s})"),
            11 => format!("log(({a}) * ({a}) + {})", self.pos_lit()),
            12 => format!("log10(({a}) * ({a}) + {})", self.pos_lit()),
            13 => format!("sqrt(({a}) * ({a}) + {})", self.pos_lit()),
            14 => format!("pow(({a}) * ({a}) + {}, {})", self.pos_lit(), self.lit()),
            15 => format!("ldexp({s}, {})", self.rng.gen_range(-3..4)),
            _ => format!("sqrt(({a}) * ({a}) + {}) * {}", self.pos_lit(), self.lit()),
        }
    }

    fn rough_math(&mut self, d: u32) -> String {
        let a = self.expr(d);
        match self.rng.gen_range(0..6) {
            0 => format!("floor({a})"),
            1 => format!("ceil({a})"),
            2 => format!("fmod({a}, {})", self.pos_lit()),
            3 => format!("fabs({a})"),
            4 => format!("pow({a}, {})", self.expr(d)),
            _ => format!("log({a})"),
        }
    }

    fn cond(&mut self, d: u32) -> String {
        let rel = ["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
        let c = format!("{} {rel} {}", self.expr(d), self.expr(d));
        match self.rng.gen_range(0..8) {
            0 => format!("!({c})"),
            1 => format!("{c} && {} < {}", self.expr(d), self.lit()),
            2 => format!("{c} || {} > {}", self.expr(d), self.lit()),
            _ => c,
        }
    }

    fn int_cond(&mut self) -> String {
        let n = self.i64s.choose(&mut self.rng).cloned().unwrap_or_else(|| "0".into());
        let rel = ["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
        format!("{n} {rel} {}", self.rng.gen_range(-5..20))
    }

    fn assign_f64(&mut self, depth: u32, squash: bool) {
        let mut e = self.expr(depth);
        if squash {
            let t = self.fresh("t");
            self.line(&format!("f64 {t} = {e};"));
            e = format!("{t} / (1.0 + {t} * {t})");
        }
        if !self.f64s.is_empty() && self.rng.gen_bool(0.5) {
            let v = self.f64s.choose(&mut self.rng).unwrap().clone();
            self.line(&format!("{v} = {e};"));
        } else {
            let v = self.fresh("v");
            self.line(&format!("f64 {v} = {e};"));
            self.f64s.push(v);
        }
    }

    fn stmt(&mut self, budget: &mut usize, in_loop: bool) {
        *budget = budget.saturating_sub(1);
        let kinds = if self.smooth { 7 } else { 11 };
        match self.rng.gen_range(0..kinds) {
            0 | 1 => {
                let squash = in_loop || self.rng.gen_bool(0.4);
                self.assign_f64(3, squash)
            }
            2 => {
                let v = self.fresh("n");
                let k = self.rng.gen_range(-4..9);
                self.line(&format!("i64 {v} = {k};"));
                let m = self.rng.gen_range(1..4);
                let c = self.rng.gen_range(-3..4);
                self.line(&format!("{v} = {v} * {m} + {c};"));
                self.i64s.push(v);
            }
            3 => {
                let c = self.int_cond();
                self.line(&format!("if ({c}) {{"));
                self.block(budget, in_loop);
                if self.rng.gen_bool(0.5) {
                    self.line("} else {");
                    self.block(budget, in_loop);
                }
                self.line("}");
            }
            4 => self.array_loop(budget),
            5 => self.whole_array(),
            6 => {
                let w = self.fresh("w");
                let n = self.rng.gen_range(1..4);
                self.line(&format!("i64 {w} = 0;"));
                let extra = if self.smooth { String::new() } else { format!(" && ({})", self.cond(1)) };
                self.line(&format!("while ({w} < {n}{extra}) {{"));
                self.indent += 1;
                self.i64s.push(w.clone());
                self.assign_f64(2, true);
                self.line(&format!("{w} = {w} + 1;"));
                self.indent -= 1;
                self.line("}");
            }
            7 => {
                let c = self.cond(2);
                self.line(&format!("if ({c}) {{"));
                self.block(budget, in_loop);
                self.line("} else {");
                self.block(budget, in_loop);
                self.line("}");
            }
            8 => {
                let s = self.fresh("s");
                let e = self.expr(2);
                self.line(&format!("f32 {s} = f32({e});"));
                let op = ["+", "-", "*"].choose(&mut self.rng).unwrap();
                let k = self.lit();
                self.line(&format!("{s} = {s} {op} {s} * {k};"));
                self.f32s.push(s);
            }
            9 => {
                if let Some(v) = self.f64s.choose(&mut self.rng).cloned() {
                    let d = self.lit();
                    self.line(&format!("dg_set_dot({v}, {d});"));
                }
            }
            _ => {
                let e = self.expr(2);
                self.line(&format!("print({e});"));
            }
        }
    }

    fn block(&mut self, budget: &mut usize, in_loop: bool) {
        self.indent += 1;
        let saved = (self.f64s.len(), self.f32s.len(), self.i64s.len());
        let n = self.rng.gen_range(1..3);
        for _ in 0..n {
            self.stmt(budget, in_loop);
        }
        // Declarations inside a branch may be skipped at run time; keep
        // them out of later expressions so reads see assigned values only.
        self.f64s.truncate(saved.0);
        self.f32s.truncate(saved.1);
        self.i64s.truncate(saved.2);
        self.indent -= 1;
    }

    fn new_array(&mut self, len: usize, f32: bool) -> Array {
        let a = Array { name: self.fresh("a"), len, f32 };
        self.line(&format!("{} {}[{len}];", if f32 { "f32" } else { "f64" }, a.name));
        self.arrays.push(a.clone());
        a
    }

    fn array_loop(&mut self, budget: &mut usize) {
        let len = self.rng.gen_range(2..7);
        let a = self.new_array(len, false);
        let i = self.fresh("i");
        self.line(&format!("for {i} in 0..{len} {{"));
        self.indent += 1;
        self.loop_vars.push((i.clone(), len));
        let e = Self::squash(self.expr(2));
        self.line(&format!("{}[{i}] = {e};", a.name));
        if self.rng.gen_bool(0.3) {
            self.stmt(budget, true);
        }
        self.loop_vars.pop();
        self.indent -= 1;
        self.line("}");
        let acc = self.fresh("v");
        self.line(&format!("f64 {acc} = 0.0;"));
        self.line(&format!("for {i} in 0..{len} {{"));
        let k = self.lit();
        self.line(&format!("    {acc} = {acc} + {}[{i}] * {k};", a.name));
        self.line("}");
        self.f64s.push(acc);
    }

    /// `c = a op b` over two freshly filled arrays, then a reduction.
    fn whole_array(&mut self) {
        let f32 = !self.smooth && self.rng.gen_bool(0.4);
        let len = self.rng.gen_range(1..10);
        let (a, b, c) = (self.new_array(len, f32), self.new_array(len, f32), self.new_array(len, f32));
        let i = self.fresh("i");
        let conv = |e: String| if f32 { format!("f32({e})") } else { e };
        self.line(&format!("for {i} in 0..{len} {{"));
        self.indent += 1;
        let ea = conv(Self::squash(self.expr(2)));
        let eb = conv(format!("{} + f64({i}) * {}", Self::squash(self.expr(2)), self.pos_lit()));
        self.line(&format!("{}[{i}] = {ea};", a.name));
        self.line(&format!("{}[{i}] = {eb};", b.name));
        self.indent -= 1;
        self.line("}");
        let ops: &[&str] = if self.smooth { &["+", "-", "*"] } else { &["+", "-", "*", "/"] };
        let op = ops.choose(&mut self.rng).unwrap();
        self.line(&format!("{} = {} {op} {};", c.name, a.name, b.name));
        let acc = self.fresh("v");
        self.line(&format!("f64 {acc} = 0.0;"));
        self.line(&format!("for {i} in 0..{len} {{"));
        let read = if f32 { format!("f64({}[{i}])", c.name) } else { format!("{}[{i}]", c.name) };
        self.line(&format!("    {acc} = {acc} + {read};"));
        self.line("}");
        self.f64s.push(acc);
    }
}

/// A random program from `seed` with roughly `budget` statements.
pub fn gen_random(seed: u64, budget: usize) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smooth = rng.gen_bool(0.5);
    let sse = rng.gen_bool(0.35);
    let n_inputs = rng.gen_range(1..4);
    let inputs: Vec<f64> = (0..n_inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let seed_input = rng.gen_range(0..n_inputs);
    let mut g = Gen {
        rng,
        smooth,
        out: String::new(),
        indent: 0,
        f64s: Vec::new(),
        f32s: Vec::new(),
        i64s: Vec::new(),
        arrays: Vec::new(),
        counter: 0,
        loop_vars: Vec::new(),
    };
    let _ = writeln!(g.out, "// generated, seed {seed}");
    if sse {
        g.line("use sse;");
    }
    for k in 0..n_inputs {
        g.line(&format!("f64 x{k} = input({k});"));
        g.f64s.push(format!("x{k}"));
    }
    let mut left = budget.max(1);
    while left > 0 {
        g.stmt(&mut left, false);
    }
    let m_outputs = g.rng.gen_range(1..4);
    for _ in 0..m_outputs {
        let e = g.expr(2);
        g.line(&format!("output({e});"));
    }
    Generated {
        seed,
        src: g.out,
        spec: ProgramSpec { n_inputs, m_outputs, seed: seed_input },
        inputs,
        smooth,
    }
}

/// Number of opcode applications per class in `program`.
pub fn class_coverage(program: &Program) -> BTreeMap<OpClass, usize> {
    let mut counts = BTreeMap::new();
    for sb in program.blocks.values() {
        for s in &sb.stmts {
            for e in s.exprs() {
                e.visit(&mut |x| {
                    if let Expr::Op { op, .. } = x {
                        *counts.entry(op.class()).or_insert(0) += 1;
                    }
                });
            }
        }
    }
    counts
}
