//! Interactive inspection of a paused machine.
//!
//! Addresses are hex (with or without `0x`) or `&name` for a compiled
//! program's variables; register-held variables resolve to their slot in
//! the guest state, and `dot`/`setdot` then act on the slot's shadow.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::frontend::{Location, Symbol};
use crate::ir::{Program, Stmt};
use crate::machine::{Machine, MachineState, Step, GUEST_BAND};

pub const USAGE: &str = "\
commands:
  dot <addr> <len>         shadow bytes
  setdot <addr> <hexbytes> write shadow bytes
  mem <addr> <len>         memory bytes
  break <addr>             toggle a breakpoint on an instruction mark
  continue                 run to the next breakpoint or halt
  step                     run to the end of the current superblock
  where                    current instruction mark
  help                     this text
addresses: hex (0x optional) or &name";

const MAX_DUMP: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Memory(u64),
    Guest(u32),
}

pub struct MonitorSession {
    machine: Machine,
    program: Program,
    pub state: MachineState,
    pub breakpoints: BTreeSet<u64>,
    marks: BTreeSet<u64>,
    symbols: Vec<Symbol>,
    /// Superblocks `continue` may enter before giving up.
    pub fuel: u64,
    faulted: bool,
}

impl MonitorSession {
    /// A session paused before the first statement of `program`, which
    /// should already be instrumented.
    pub fn new(machine: Machine, program: Program, state: MachineState) -> Self {
        let marks = program.blocks.values().flat_map(|b| b.imarks()).collect();
        MonitorSession {
            machine,
            program,
            state,
            breakpoints: BTreeSet::new(),
            marks,
            symbols: Vec::new(),
            fuel: 10_000_000,
            faulted: false,
        }
    }

    pub fn with_symbols(mut self, symbols: Vec<Symbol>) -> Self {
        self.symbols = symbols;
        self
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn halted(&self) -> bool {
        self.state.halted
    }

    fn target(&self, s: &str) -> Result<Target, String> {
        if let Some(name) = s.strip_prefix('&') {
            let sym = self.symbols.iter().find(|x| x.name == name).ok_or_else(|| format!("error: no symbol `{name}`"))?;
            return Ok(match sym.location {
                Location::Guest(off) => Target::Guest(off),
                Location::Memory { addr, .. } => Target::Memory(addr),
            });
        }
        parse_hex(s).map(Target::Memory).ok_or_else(|| format!("error: bad address `{s}`"))
    }

    fn read(&self, t: Target, len: usize, shadow: bool) -> Result<Vec<u8>, String> {
        match t {
            Target::Memory(a) => Ok(if shadow { self.state.shadow.read(a, len) } else { self.state.memory.read(a, len) }),
            Target::Guest(off) => {
                let start = off as usize + if shadow { GUEST_BAND as usize } else { 0 };
                self.state
                    .guest
                    .get(start..start + len)
                    .map(|b| b.to_vec())
                    .ok_or_else(|| "error: range leaves the guest state".to_string())
            }
        }
    }

    fn position(&self) -> Option<u64> {
        match self.machine.next_stmt(&self.program, &self.state) {
            Some(Stmt::IMark { addr, .. }) => Some(*addr),
            _ => self.state.last_imark,
        }
    }

    fn describe_stop(&self) -> String {
        if self.state.halted {
            return "halted".into();
        }
        match self.position() {
            Some(a) => format!("stopped at {a:#x}"),
            None => "stopped".into(),
        }
    }

    fn resume(&mut self, single_block: bool) -> String {
        if self.faulted {
            return "error: the program faulted".into();
        }
        if self.state.halted {
            return "halted".into();
        }
        let mut blocks = 0;
        let mut first = true;
        loop {
            if !first && !single_block {
                if let Some(Stmt::IMark { addr, .. }) = self.machine.next_stmt(&self.program, &self.state) {
                    if self.breakpoints.contains(addr) {
                        return self.describe_stop();
                    }
                }
            }
            first = false;
            match self.machine.step(&self.program, &mut self.state) {
                Ok(Step::Continue) => {}
                Ok(Step::BlockEnd) => {
                    blocks += 1;
                    if single_block {
                        return self.describe_stop();
                    }
                    if blocks >= self.fuel {
                        return format!("error: no breakpoint reached after {blocks} superblocks");
                    }
                }
                Ok(Step::Halted) => return "halted".into(),
                Err(f) => {
                    self.faulted = true;
                    return format!("fault: {f}");
                }
            }
        }
    }

    /// Executes one command line and returns the response text.
    pub fn command(&mut self, line: &str) -> String {
        let words: Vec<&str> = line.split_whitespace().collect();
        let usage = || format!("usage:\n{USAGE}");
        match words.as_slice() {
            [] => String::new(),
            ["help"] => USAGE.to_string(),
            [cmd @ ("dot" | "mem"), addr, len] => {
                let Some(len) = len.parse::<usize>().ok().filter(|&n| n <= MAX_DUMP) else { return usage() };
                match self.target(addr).and_then(|t| self.read(t, len, *cmd == "dot")) {
                    Ok(bytes) => hex_dump(&bytes),
                    Err(e) => e,
                }
            }
            ["setdot", addr, bytes @ ..] if !bytes.is_empty() => {
                let Some(data) = parse_bytes(&bytes.concat()) else { return usage() };
                let t = match self.target(addr) {
                    Ok(t) => t,
                    Err(e) => return e,
                };
                match t {
                    Target::Memory(a) => self.state.shadow.write(a, &data),
                    Target::Guest(off) => {
                        let start = (off + GUEST_BAND) as usize;
                        match self.state.guest.get_mut(start..start + data.len()) {
                            Some(dst) => dst.copy_from_slice(&data),
                            None => return "error: range leaves the guest state".into(),
                        }
                    }
                }
                "ok".into()
            }
            ["break", addr] => {
                let Some(a) = parse_hex(addr) else { return usage() };
                if !self.marks.contains(&a) {
                    return "error: no such instruction mark".into();
                }
                if self.breakpoints.remove(&a) {
                    format!("breakpoint cleared at {a:#x}")
                } else {
                    self.breakpoints.insert(a);
                    format!("breakpoint set at {a:#x}")
                }
            }
            ["continue"] => self.resume(false),
            ["step"] => self.resume(true),
            ["where"] => match (self.state.halted, self.position()) {
                (true, Some(a)) => format!("halted after {a:#x}"),
                (true, None) => "halted".into(),
                (false, Some(a)) => format!("{a:#x}"),
                (false, None) => "not started".into(),
            },
            _ => usage(),
        }
    }
}

fn parse_hex(s: &str) -> Option<u64> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    u64::from_str_radix(s, 16).ok()
}

fn parse_bytes(s: &str) -> Option<Vec<u8>> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() % 2 != 0 || s.len() > 2 * MAX_DUMP {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| s.get(i..i + 2).and_then(|b| u8::from_str_radix(b, 16).ok())).collect()
}

pub fn hex_dump(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 3);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{b:02x}");
    }
    s
}
