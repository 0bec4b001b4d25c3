//! Known-wrong derivatives, pinned.
//!
//! Each case is a minilang (`.ml64`) or IR (`.ir`) file whose leading `#`
//! comment lines form a header:
//!
//! ```text
//! # scenario: rounding-trick
//! # inputs: 2.7
//! # seed: 0
//! # value: 3.0
//! # wrong-dot: 1.0
//! # correct-dot: 0.0
//! # note: free text, may repeat
//! ```
//!
//! A case passes when the engine reproduces `wrong-dot` bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::driver::{run, RunOptions};
use crate::frontend::{compile, CompileOptions};
use crate::ir::{parse_asm, Program};

/// The hidden-arithmetic categories a corpus is expected to cover.
pub const SCENARIOS: &[&str] = &["rounding-trick", "incomplete-mask", "exponent-arithmetic", "int-roundtrip", "soft-float"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Minilang,
    Ir,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseHeader {
    pub scenario: String,
    pub inputs: Vec<f64>,
    pub seed: usize,
    pub value: Option<f64>,
    pub wrong_dot: f64,
    pub correct_dot: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitationCase {
    pub name: String,
    pub kind: SourceKind,
    pub source: String,
    pub header: CaseHeader,
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("missing header field `{0}`")]
    Missing(&'static str),
    #[error("wrong and correct dots agree; not a limitation")]
    NotALimitation,
    #[error("{0}: unknown case extension")]
    Extension(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Build(String),
}

fn num(s: &str, line: usize) -> Result<f64, CaseError> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).map(f64::from_bits).ok(),
        None => s.parse().ok(),
    };
    parsed.ok_or_else(|| CaseError::Header { line, msg: format!("bad number `{s}`") })
}

/// Reads the leading comment block of a case file.
pub fn parse_header(text: &str) -> Result<CaseHeader, CaseError> {
    let (mut scenario, mut inputs, mut seed, mut value, mut wrong, mut correct) = (None, None, None, None, None, None);
    let mut note = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some(body) = raw.trim_start().strip_prefix('#') else { break };
        let Some((key, val)) = body.split_once(':') else {
            return Err(CaseError::Header { line, msg: "expected `key: value`".into() });
        };
        let val = val.trim();
        match key.trim() {
            "scenario" => scenario = Some(val.to_string()),
            "inputs" => {
                let v: Result<Vec<f64>, _> =
                    val.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(s, line)).collect();
                inputs = Some(v?);
            }
            "seed" => {
                seed = Some(val.parse().map_err(|_| CaseError::Header { line, msg: format!("bad seed `{val}`") })?)
            }
            "value" => value = Some(num(val, line)?),
            "wrong-dot" => wrong = Some(num(val, line)?),
            "correct-dot" => correct = Some(num(val, line)?),
            "note" => {
                if !note.is_empty() {
                    note.push(' ');
                }
                note.push_str(val);
            }
            other => return Err(CaseError::Header { line, msg: format!("unknown key `{other}`") }),
        }
    }
    let h = CaseHeader {
        scenario: scenario.ok_or(CaseError::Missing("scenario"))?,
        inputs: inputs.ok_or(CaseError::Missing("inputs"))?,
        seed: seed.ok_or(CaseError::Missing("seed"))?,
        value,
        wrong_dot: wrong.ok_or(CaseError::Missing("wrong-dot"))?,
        correct_dot: correct.ok_or(CaseError::Missing("correct-dot"))?,
        note,
    };
    if h.wrong_dot.to_bits() == h.correct_dot.to_bits() {
        return Err(CaseError::NotALimitation);
    }
    Ok(h)
}

impl LimitationCase {
    pub fn from_source(name: &str, kind: SourceKind, source: String) -> Result<Self, CaseError> {
        let header = parse_header(&source)?;
        Ok(LimitationCase { name: name.to_string(), kind, source, header })
    }

    pub fn load(path: &Path) -> Result<Self, CaseError> {
        let kind = match path.extension().and_then(|e| e.to_str()) {
            Some("ml64") => SourceKind::Minilang,
            Some("ir") => SourceKind::Ir,
            _ => return Err(CaseError::Extension(path.to_path_buf())),
        };
        let source = fs::read_to_string(path).map_err(|source| CaseError::Io { path: path.to_path_buf(), source })?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
        Self::from_source(name, kind, source)
    }

    pub fn program(&self) -> Result<Program, CaseError> {
        match self.kind {
            SourceKind::Minilang => compile(&self.source, CompileOptions::default())
                .map(|c| c.program)
                .map_err(|e| CaseError::Build(e.to_string())),
            SourceKind::Ir => parse_asm(&self.source).map_err(|e| CaseError::Build(e.to_string())),
        }
    }
}

/// All `.ml64` and `.ir` cases in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<LimitationCase>, CaseError> {
    let io = |source| CaseError::Io { path: dir.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ml64" | "ir")))
        .collect();
    paths.sort();
    paths.iter().map(|p| LimitationCase::load(p)).collect()
}

/// The corpus shipped with this crate.
pub fn builtin_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("limitations")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseOutcome {
    pub value: f64,
    pub dot: f64,
    pub pass: bool,
}

/// Runs the case with AD on; passes iff the first output's dot has exactly
/// the bits of `wrong-dot` (and the value matches, when given).
pub fn run_case(case: &LimitationCase) -> Result<CaseOutcome, CaseError> {
    let p = case.program()?;
    let h = &case.header;
    let r = run(&p, &h.inputs, Some(h.seed), RunOptions::default()).map_err(|e| CaseError::Build(e.to_string()))?;
    let out = r.outputs.first().ok_or_else(|| CaseError::Build("case has no output".into()))?;
    let (value, dot) = (out.value.to_f64(), out.dot.to_f64());
    let value_ok = h.value.map_or(true, |v| v.to_bits() == value.to_bits());
    Ok(CaseOutcome { value, dot, pass: value_ok && dot.to_bits() == h.wrong_dot.to_bits() })
}
