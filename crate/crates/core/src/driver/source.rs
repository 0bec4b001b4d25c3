//! Loading programs given on the command line.

use thiserror::Error;

use crate::frontend::{compile, CompileError, CompileOptions, Compiled, Symbol};
use crate::ir::{parse_asm, validate, ParseError, Program};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid program: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub enum Loaded {
    Minilang(Box<Compiled>),
    Ir(Program),
}

impl Loaded {
    pub fn program(&self) -> &Program {
        match self {
            Loaded::Minilang(c) => &c.program,
            Loaded::Ir(p) => p,
        }
    }

    pub fn compiled(&self) -> Option<&Compiled> {
        match self {
            Loaded::Minilang(c) => Some(c),
            Loaded::Ir(_) => None,
        }
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.compiled().map(|c| c.symbols.clone()).unwrap_or_default()
    }
}

/// Compiles minilang, or parses and validates IR assembly when `asm`.
pub fn load(text: &str, asm: bool, options: CompileOptions) -> Result<Loaded, LoadError> {
    if asm {
        let p = parse_asm(text)?;
        if let Some(d) = validate(&p).first() {
            return Err(LoadError::Invalid(format!("{d:?}")));
        }
        return Ok(Loaded::Ir(p));
    }
    Ok(Loaded::Minilang(Box::new(compile(text, options)?)))
}

pub fn parse_inputs(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad input value `{t}`")))
        .collect()
}

/// Inputs and seed index recorded in a program's leading comments
/// (`# inputs: 1.5, 2` and `# seed: 0`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeaderDefaults {
    pub inputs: Option<Vec<f64>>,
    pub seed: Option<usize>,
}

pub fn header_defaults(text: &str) -> HeaderDefaults {
    let mut d = HeaderDefaults::default();
    for line in text.lines() {
        let t = line.trim();
        let Some(body) = t.strip_prefix('#').or_else(|| t.strip_prefix("//")) else {
            if t.is_empty() {
                continue;
            }
            break;
        };
        if let Some((k, v)) = body.split_once(':') {
            match k.trim() {
                "inputs" => d.inputs = parse_inputs(v).ok(),
                "seed" => d.seed = v.trim().parse().ok(),
                _ => {}
            }
        }
    }
    d
}
