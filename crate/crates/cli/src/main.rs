use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shadowad::driver::run::{initial_state, prepare};
use shadowad::driver::{
    bench_burgers, diff_compiled, engine_machine, header_defaults, load, parse_inputs, run, to_tsv, Bits,
    BenchmarkConfig, Loaded, MonitorSession, RunOptions,
};
use shadowad::frontend::gen_random;
use shadowad::frontend::CompileOptions;
use shadowad::ir::IrType;

#[derive(Parser)]
#[command(name = "shadowad", version, about = "Forward-mode AD on a synthetic CPU with shadow state")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program and print its outputs with their dots.
    Run(ProgArgs),
    /// Start the program paused and read monitor commands from stdin.
    Monitor(ProgArgs),
    /// Compare engine dots with the dual-number oracle and finite differences (TSV).
    Diff {
        #[command(flatten)]
        prog: ProgArgs,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
    },
    /// Burgers' equation benchmark.
    Bench {
        #[arg(long, default_value_t = 20)]
        nx: usize,
        #[arg(long, default_value_t = 10)]
        nt: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Write random minilang programs.
    Gen {
        /// Output directory.
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// Statement budget per program.
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
    /// Print the IR of a program.
    Dump {
        prog: PathBuf,
        /// The input is IR assembly.
        #[arg(long)]
        asm: bool,
        /// Print the instrumented program.
        #[arg(long)]
        instrument: bool,
        #[arg(long)]
        no_math_wrappers: bool,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ProgArgs {
    /// Minilang source, or IR assembly with --asm or a `.ir` extension.
    prog: PathBuf,
    /// Input whose dot is seeded with 1.
    #[arg(long)]
    seed_input: Option<usize>,
    /// Comma-separated input values.
    #[arg(long, allow_hyphen_values = true)]
    inputs: Option<String>,
    #[arg(long)]
    no_ad: bool,
    /// Differentiate math functions as ordinary code (minilang `sin` becomes the soft sine).
    #[arg(long)]
    no_math_wrappers: bool,
    /// Report operations the instrumenter assumed to have zero derivative.
    #[arg(long)]
    warn_unhandled: bool,
    #[arg(long)]
    asm: bool,
    /// Superblock budget.
    #[arg(long, default_value_t = 10_000_000)]
    fuel: u64,
}

enum Failure {
    Usage(String),
    Fault(String),
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn fault(e: impl ToString) -> Failure {
    Failure::Fault(e.to_string())
}

struct Prepared {
    loaded: Loaded,
    inputs: Vec<f64>,
    seed: Option<usize>,
    opts: RunOptions,
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    let _ = io::stdout().lock().write_all(s.as_bytes());
}

fn is_asm(path: &Path, flag: bool) -> bool {
    flag || path.extension().is_some_and(|e| e == "ir")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn prepare_args(a: &ProgArgs) -> Result<Prepared> {
    let text = read(&a.prog)?;
    let defaults = header_defaults(&text);
    let loaded = load(&text, is_asm(&a.prog, a.asm), CompileOptions { soft_math: a.no_math_wrappers })
        .map_err(|e| usage(format!("{}: {e}", a.prog.display())))?;
    let inputs = match &a.inputs {
        Some(s) => parse_inputs(s).map_err(usage)?,
        None => defaults.inputs.unwrap_or_default(),
    };
    let seed = a.seed_input.or(defaults.seed);
    if let Some(k) = seed {
        if k >= inputs.len() {
            return Err(usage(format!("--seed-input {k} but only {} inputs given", inputs.len())));
        }
    }
    let opts = RunOptions { ad: !a.no_ad, math_wrappers: !a.no_math_wrappers, fuel: a.fuel };
    Ok(Prepared { loaded, inputs, seed, opts })
}

fn fmt_value(b: Bits) -> String {
    match b.ty {
        IrType::F32 | IrType::F64 => format!("{}", b.to_f64()),
        _ => format!("{}", b.bits as i64),
    }
}

fn fmt_dot(b: Bits) -> String {
    match b.ty {
        IrType::F32 | IrType::F64 => format!("{}", b.to_f64()),
        _ => format!("{:#x}", b.bits),
    }
}

fn cmd_run(a: &ProgArgs) -> Result<()> {
    let p = prepare_args(a)?;
    let r = run(p.loaded.program(), &p.inputs, p.seed, p.opts).map_err(fault)?;
    if a.warn_unhandled {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    let mut out = io::stdout().lock();
    for v in &r.printed {
        let _ = writeln!(out, "{v}");
    }
    for o in &r.outputs {
        let _ = writeln!(out, "{}\tvalue {}\tdot {}", o.name, fmt_value(o.value), fmt_dot(o.dot));
    }
    Ok(())
}

fn cmd_monitor(a: &ProgArgs) -> Result<()> {
    let p = prepare_args(a)?;
    let (prog, warnings) = prepare(p.loaded.program(), p.opts);
    if a.warn_unhandled {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    let state = initial_state(&prog, &p.inputs, if p.opts.ad { p.seed } else { None });
    let mut session = MonitorSession::new(engine_machine(), prog, state).with_symbols(p.loaded.symbols());
    session.fuel = a.fuel;
    let mut out = io::stdout().lock();
    for line in io::stdin().lock().lines() {
        let line = line.map_err(usage)?;
        if matches!(line.trim(), "quit" | "exit") {
            break;
        }
        let resp = session.command(&line);
        if !resp.is_empty() {
            let _ = writeln!(out, "{resp}");
            let _ = out.flush();
        }
        if resp.starts_with("fault:") {
            return Err(fault("client fault"));
        }
    }
    Ok(())
}

fn cmd_diff(a: &ProgArgs, h: f64) -> Result<()> {
    let p = prepare_args(a)?;
    let Some(c) = p.loaded.compiled() else {
        return Err(usage("diff needs a minilang program (the dual oracle evaluates source)"));
    };
    let seed = p.seed.unwrap_or(0);
    if seed >= p.inputs.len() {
        return Err(usage("diff needs at least one input"));
    }
    let name = a.prog.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let rows = diff_compiled(&name, c, &p.inputs, seed, h, p.opts).map_err(fault)?;
    emit(&to_tsv(&rows));
    if rows.iter().all(|r| r.exact) {
        Ok(())
    } else {
        Err(fault("engine and oracle dots differ"))
    }
}

fn cmd_bench(nx: usize, nt: usize, reps: usize) -> Result<()> {
    let r = bench_burgers(BenchmarkConfig { nx, nt, reps }).map_err(|e| match e {
        shadowad::driver::BenchError::Config(_) => usage(e),
        _ => fault(e),
    })?;
    emit(&format!("{r}\n"));
    Ok(())
}

fn cmd_gen(out: &Path, start: u64, count: u64, budget: usize) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    for seed in start..start + count {
        let g = gen_random(seed, budget);
        let inputs: Vec<String> = g.inputs.iter().map(|v| format!("{v:?}")).collect();
        let text = format!("# inputs: {}\n# seed: 0\n# smooth: {}\n{}", inputs.join(", "), g.smooth, g.src);
        let path = out.join(format!("gen_{seed:05}.ml64"));
        std::fs::write(&path, text).map_err(|e| fault(format!("{}: {e}", path.display())))?;
    }
    emit(&format!("wrote {count} programs to {}\n", out.display()));
    Ok(())
}

fn cmd_dump(path: &Path, asm: bool, instrument: bool, no_math_wrappers: bool, json: bool) -> Result<()> {
    let text = read(path)?;
    let loaded = load(&text, is_asm(path, asm), CompileOptions { soft_math: no_math_wrappers })
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let opts = RunOptions { ad: instrument, math_wrappers: !no_math_wrappers, ..RunOptions::default() };
    let (p, _) = prepare(loaded.program(), opts);
    if json {
        emit(&format!("{}\n", p.to_json()));
    } else {
        emit(&p.to_string());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Monitor(a) => cmd_monitor(a),
        Cmd::Diff { prog, h } => cmd_diff(prog, *h),
        Cmd::Bench { nx, nt, reps } => cmd_bench(*nx, *nt, *reps),
        Cmd::Gen { out, start, count, budget } => cmd_gen(out, *start, *count, *budget),
        Cmd::Dump { prog, asm, instrument, no_math_wrappers, json } => {
            cmd_dump(prog, *asm, *instrument, *no_math_wrappers, *json)
        }
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Fault(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
