use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn shadowad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowad")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(name: &str) -> String {
    data(name).to_str().unwrap().to_string()
}

#[test]
fn run_cube() {
    let o = shadowad(&["run", &path("cube.ml64"), "--inputs", "4", "--seed-input", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "y\tvalue 64\tdot 48\n");
}

#[test]
fn run_uses_header_defaults() {
    let o = shadowad(&["run", &path("cube.ml64")]);
    assert_eq!(stdout(&o), "y\tvalue 64\tdot 48\n");
    let o = shadowad(&["run", &path("cube.ml64"), "--inputs", "-2"]);
    assert_eq!(stdout(&o), "y\tvalue -8\tdot 12\n");
}

#[test]
fn run_asm_matches_source() {
    let o = shadowad(&["run", &path("cube.ir")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "y\tvalue 64\tdot 48\n");
}

#[test]
fn no_ad_leaves_dots_zero() {
    let o = shadowad(&["run", &path("cube.ml64"), "--no-ad"]);
    assert_eq!(stdout(&o), "y\tvalue 64\tdot 0\n");
}

#[test]
fn math_wrappers_switch() {
    let on = shadowad(&["run", &path("sine.ml64"), "--inputs", "1", "--seed-input", "0"]);
    assert_eq!(stdout(&on), format!("y\tvalue {}\tdot {}\n", 1f64.sin(), 1f64.cos()));
    let off = shadowad(&["run", &path("sine.ml64"), "--inputs", "1", "--seed-input", "0", "--no-math-wrappers"]);
    assert_eq!(off.status.code(), Some(0));
    let text = stdout(&off);
    assert!(text.ends_with("\tdot 0\n"), "{text}");
}

#[test]
fn client_fault_exits_1() {
    let o = shadowad(&["run", &path("spin.ml64"), "--inputs", "0", "--fuel", "100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fuel"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(shadowad(&["run"]).status.code(), Some(2));
    assert_eq!(shadowad(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(shadowad(&["run", &path("missing.ml64")]).status.code(), Some(2));
    assert_eq!(shadowad(&["run", &path("cube.ml64"), "--inputs", "x"]).status.code(), Some(2));
    assert_eq!(shadowad(&["run", &path("cube.ml64"), "--seed-input", "3"]).status.code(), Some(2));
    assert_eq!(shadowad(&["run", &path("cube.ir"), "--asm", "--inputs", "1"]).status.code(), Some(0));
    assert_eq!(shadowad(&["run", &path("cube.ml64"), "--asm"]).status.code(), Some(2));
    assert_eq!(shadowad(&["bench", "--nx", "2"]).status.code(), Some(2));
}

#[test]
fn diff_prints_tsv() {
    let o = shadowad(&["diff", &path("cube.ml64")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("program\toutput\tengine_dot\toracle_dot\tfd_dot\tmax_rel_err"));
    let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(&row[..4], ["cube", "0", "48", "48"]);
    assert!(row[5].parse::<f64>().unwrap() < 1e-6);
    assert_eq!(lines.next(), None);
}

#[test]
fn monitor_session_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_shadowad"))
        .args(["monitor", &path("cube.ml64"), "--inputs", "4"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let one = "000000000000f03f";
    let script = format!("break 400004\ncontinue\nsetdot &x {one}\ncontinue\ndot &y 8\nbogus\nquit\n");
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[..5], ["breakpoint set at 0x400004", "stopped at 0x400004", "ok", "halted", "00 00 00 00 00 00 48 40"]);
    assert_eq!(lines[5], "usage:");
}

#[test]
fn bench_small_grid() {
    let o = shadowad(&["bench", "--nx", "6", "--nt", "2", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("\texact"), "{text}");
    assert!(text.contains("shadow_pages\t"));
}

#[test]
fn gen_then_diff() {
    let dir = std::env::temp_dir().join(format!("shadowad-gen-{}", std::process::id()));
    let o = shadowad(&["gen", "--out", dir.to_str().unwrap(), "--start", "5", "--count", "2"]);
    assert_eq!(o.status.code(), Some(0));
    for seed in [5, 6] {
        let f = dir.join(format!("gen_{seed:05}.ml64"));
        let d = shadowad(&["diff", f.to_str().unwrap()]);
        assert_eq!(d.status.code(), Some(0), "{}", String::from_utf8_lossy(&d.stderr));
    }
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn dump_instrumented_adds_shadow_code() {
    let plain = stdout(&shadowad(&["dump", &path("cube.ml64")]));
    let inst = stdout(&shadowad(&["dump", &path("cube.ml64"), "--instrument"]));
    assert!(plain.starts_with("entry 0x400000\n"));
    assert!(inst.len() > plain.len());
    assert!(inst.contains("PUT(1024)"));
    let json = stdout(&shadowad(&["dump", &path("cube.ml64"), "--json"]));
    assert!(json.trim_start().starts_with('{'));
}
