use std::collections::HashSet;
use std::fmt;

use super::{Expr, IrType, Opcode, Program, Stmt, Superblock, Tmp};

/// Bytes of architectural guest state available to uninstrumented code.
pub const GUEST_STATE_SIZE: u32 = 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub block: u64,
    pub stmt: Option<usize>,
    pub kind: DiagnosticKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    UndefinedTemp(Tmp),
    UndeclaredTemp(Tmp),
    DoubleAssignment(Tmp),
    TypeMismatch { context: String, expected: IrType, found: IrType },
    Arity { op: String, expected: usize, found: usize },
    DanglingTarget(u64),
    MissingEntry(u64),
    MissingTerminator,
    TerminatorNotLast,
    StmtBeforeIMark,
    OffsetOutOfRange { offset: u32, width: usize },
    BlockAddress { key: u64, addr: u64 },
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DiagnosticKind::*;
        match self {
            UndefinedTemp(t) => write!(f, "undefined temporary t{t}"),
            UndeclaredTemp(t) => write!(f, "temporary t{t} has no declared type"),
            DoubleAssignment(t) => write!(f, "double assignment of temporary t{t}"),
            TypeMismatch { context, expected, found } => {
                write!(f, "type mismatch in {context}: expected {expected}, found {found}")
            }
            Arity { op, expected, found } => {
                write!(f, "{op} takes {expected} operands, found {found}")
            }
            DanglingTarget(a) => write!(f, "dangling target {a:#x}"),
            MissingEntry(a) => write!(f, "entry superblock {a:#x} does not exist"),
            MissingTerminator => f.write_str("superblock does not end with Exit or Halt"),
            TerminatorNotLast => f.write_str("Halt is not the last statement"),
            StmtBeforeIMark => f.write_str("statement precedes the first IMark"),
            OffsetOutOfRange { offset, width } => {
                write!(f, "guest access at offset {offset} width {width} exceeds the guest state")
            }
            BlockAddress { key, addr } => write!(f, "block keyed {key:#x} declares address {addr:#x}"),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stmt {
            Some(i) => write!(f, "sb {:#x} stmt {}: {}", self.block, i, self.kind),
            None => write!(f, "sb {:#x}: {}", self.block, self.kind),
        }
    }
}

/// Checks every structural invariant of an uninstrumented program.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    validate_with_guest_limit(program, GUEST_STATE_SIZE)
}

/// Like [`validate`], but allows guest accesses up to `guest_limit` bytes
/// (instrumented code also touches the shadow register band).
pub fn validate_with_guest_limit(program: &Program, guest_limit: u32) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !program.blocks.contains_key(&program.entry) {
        out.push(Diagnostic { block: program.entry, stmt: None, kind: DiagnosticKind::MissingEntry(program.entry) });
    }
    for (key, sb) in &program.blocks {
        if *key != sb.addr {
            out.push(Diagnostic {
                block: *key,
                stmt: None,
                kind: DiagnosticKind::BlockAddress { key: *key, addr: sb.addr },
            });
        }
        out.extend(validate_block(sb, guest_limit));
        for (i, s) in sb.stmts.iter().enumerate() {
            if let Stmt::Exit { target, .. } = s {
                if !program.blocks.contains_key(target) {
                    out.push(Diagnostic { block: sb.addr, stmt: Some(i), kind: DiagnosticKind::DanglingTarget(*target) });
                }
            }
        }
    }
    out
}

/// In-block checks: single assignment, definition before use, typing.
pub fn validate_block(sb: &Superblock, guest_limit: u32) -> Vec<Diagnostic> {
    let mut cx = BlockCheck { sb, guest_limit, defined: HashSet::new(), diags: Vec::new(), stmt: 0 };
    let mut seen_imark = false;
    let n = sb.stmts.len();
    for (i, s) in sb.stmts.iter().enumerate() {
        cx.stmt = i;
        match s {
            Stmt::IMark { .. } => seen_imark = true,
            Stmt::Halt | Stmt::Exit { .. } => {}
            _ if !seen_imark => cx.push(DiagnosticKind::StmtBeforeIMark),
            _ => {}
        }
        cx.check_stmt(s);
        if matches!(s, Stmt::Halt) && i + 1 != n {
            cx.push(DiagnosticKind::TerminatorNotLast);
        }
    }
    if !matches!(sb.stmts.last(), Some(Stmt::Halt | Stmt::Exit { .. })) {
        cx.stmt = n.saturating_sub(1);
        cx.diags.push(Diagnostic { block: sb.addr, stmt: None, kind: DiagnosticKind::MissingTerminator });
    }
    cx.diags
}

struct BlockCheck<'a> {
    sb: &'a Superblock,
    guest_limit: u32,
    defined: HashSet<Tmp>,
    diags: Vec<Diagnostic>,
    stmt: usize,
}

impl BlockCheck<'_> {
    fn push(&mut self, kind: DiagnosticKind) {
        self.diags.push(Diagnostic { block: self.sb.addr, stmt: Some(self.stmt), kind });
    }

    fn expect(&mut self, context: &str, expected: IrType, found: Option<IrType>) {
        if let Some(found) = found {
            if found != expected {
                self.push(DiagnosticKind::TypeMismatch { context: context.to_string(), expected, found });
            }
        }
    }

    fn assign(&mut self, t: Tmp) -> Option<IrType> {
        let ty = self.sb.tmp_types.get(t as usize).copied();
        if ty.is_none() {
            self.push(DiagnosticKind::UndeclaredTemp(t));
        }
        if !self.defined.insert(t) {
            self.push(DiagnosticKind::DoubleAssignment(t));
        }
        ty
    }

    fn check_offset(&mut self, offset: u32, ty: IrType) {
        if offset as usize + ty.width() > self.guest_limit as usize {
            self.push(DiagnosticKind::OffsetOutOfRange { offset, width: ty.width() });
        }
    }

    fn check_stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::WrTmp { tmp, expr } => {
                let found = self.check_expr(expr);
                if let Some(ty) = self.assign(*tmp) {
                    self.expect(&format!("write to t{tmp}"), ty, found);
                }
            }
            Stmt::Put { offset, expr } => {
                if let Some(ty) = self.check_expr(expr) {
                    self.check_offset(*offset, ty);
                }
            }
            Stmt::Store { addr, data } => {
                let a = self.check_expr(addr);
                self.expect("store address", IrType::I64, a);
                self.check_expr(data);
            }
            Stmt::StoreG { guard, addr, data } => {
                let g = self.check_expr(guard);
                self.expect("store guard", IrType::I1, g);
                let a = self.check_expr(addr);
                self.expect("store address", IrType::I64, a);
                self.check_expr(data);
            }
            Stmt::Cas { old, addr, expected, new } => {
                let a = self.check_expr(addr);
                self.expect("CAS address", IrType::I64, a);
                let e = self.check_expr(expected);
                let n = self.check_expr(new);
                if let Some(ty) = self.assign(*old) {
                    if !matches!(ty, IrType::I8 | IrType::I16 | IrType::I32 | IrType::I64) {
                        self.push(DiagnosticKind::TypeMismatch {
                            context: "CAS operand (integer type required)".into(),
                            expected: IrType::I64,
                            found: ty,
                        });
                    }
                    self.expect("CAS expected value", ty, e);
                    self.expect("CAS new value", ty, n);
                }
            }
            Stmt::Dirty { args, dst, .. } => {
                for a in args {
                    self.check_expr(a);
                }
                if let Some(t) = dst {
                    self.assign(*t);
                }
            }
            Stmt::Exit { guard, .. } => {
                let g = self.check_expr(guard);
                self.expect("exit guard", IrType::I1, g);
            }
            Stmt::IMark { .. } | Stmt::Halt => {}
        }
    }

    fn check_expr(&mut self, e: &Expr) -> Option<IrType> {
        match e {
            Expr::RdTmp(t) => {
                let ty = self.sb.tmp_types.get(*t as usize).copied();
                if ty.is_none() {
                    self.push(DiagnosticKind::UndeclaredTemp(*t));
                } else if !self.defined.contains(t) {
                    self.push(DiagnosticKind::UndefinedTemp(*t));
                }
                ty
            }
            Expr::Get { offset, ty } => {
                self.check_offset(*offset, *ty);
                Some(*ty)
            }
            Expr::Load { addr, ty } => {
                let a = self.check_expr(addr);
                self.expect("load address", IrType::I64, a);
                Some(*ty)
            }
            Expr::Const(c) => Some(c.ty),
            Expr::Op { op, args } => {
                let found: Vec<Option<IrType>> = args.iter().map(|a| self.check_expr(a)).collect();
                if let Some(expected) = op.arg_types() {
                    if expected.len() != args.len() {
                        self.push(DiagnosticKind::Arity {
                            op: op.name().to_string(),
                            expected: expected.len(),
                            found: args.len(),
                        });
                    } else {
                        for (i, (exp, got)) in expected.iter().zip(found).enumerate() {
                            self.expect(&format!("operand {} of {}", i + 1, op.name()), *exp, got);
                        }
                    }
                } else if !(1..=4).contains(&args.len()) {
                    if let Opcode::Unknown(name, _) = op {
                        self.push(DiagnosticKind::Arity { op: name.clone(), expected: 4, found: args.len() });
                    }
                }
                Some(op.result_type())
            }
            Expr::Ite { cond, then, els } => {
                let c = self.check_expr(cond);
                self.expect("ITE condition", IrType::I1, c);
                let t = self.check_expr(then);
                let f = self.check_expr(els);
                if let (Some(t), Some(_)) = (t, f) {
                    self.expect("ITE false branch", t, f);
                }
                t.or(f)
            }
            Expr::CCall { args, ty, .. } => {
                for a in args {
                    self.check_expr(a);
                }
                Some(*ty)
            }
        }
    }
}
