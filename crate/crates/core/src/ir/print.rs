use std::fmt::{self, Write};

use super::{Expr, Opcode, Program, Stmt};

pub(super) fn write_program(f: &mut fmt::Formatter<'_>, p: &Program) -> fmt::Result {
    writeln!(f, "entry {:#x}", p.entry)?;
    for o in &p.outputs {
        writeln!(f, "output {} {:#x} {}", o.name, o.addr, o.ty)?;
    }
    for d in &p.data {
        write!(f, "data {:#x} ", d.addr)?;
        for b in &d.bytes {
            write!(f, "{b:02x}")?;
        }
        f.write_char('\n')?;
    }
    for sb in p.blocks.values() {
        write!(f, "sb {:#x} tmps:", sb.addr)?;
        for t in &sb.tmp_types {
            write!(f, " {t}")?;
        }
        f.write_char('\n')?;
        for s in &sb.stmts {
            writeln!(f, "  {s}")?;
        }
    }
    Ok(())
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    f.write_char('(')?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        write_expr(f, a)?;
    }
    f.write_char(')')
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::RdTmp(t) => write!(f, "t{t}"),
        Expr::Get { offset, ty } => write!(f, "GET:{ty}({offset})"),
        Expr::Load { addr, ty } => {
            write!(f, "LDle:{ty}(")?;
            write_expr(f, addr)?;
            f.write_char(')')
        }
        Expr::Op { op: Opcode::Unknown(name, ty), args } => {
            write!(f, "{name}:{ty}")?;
            write_args(f, args)
        }
        Expr::Op { op, args } => {
            f.write_str(op.name())?;
            write_args(f, args)
        }
        Expr::Const(c) => write!(f, "{:#x}:{}", c.bits, c.ty),
        Expr::Ite { cond, then, els } => {
            f.write_str("ITE")?;
            write_args(f, &[(**cond).clone(), (**then).clone(), (**els).clone()])
        }
        Expr::CCall { name, args, ty } => {
            write!(f, "CCALL {name}:{ty}")?;
            write_args(f, args)
        }
    }
}

pub(super) fn write_stmt(f: &mut fmt::Formatter<'_>, s: &Stmt) -> fmt::Result {
    match s {
        Stmt::WrTmp { tmp, expr } => write!(f, "t{tmp} = {expr}"),
        Stmt::Put { offset, expr } => write!(f, "PUT({offset}) = {expr}"),
        Stmt::Store { addr, data } => write!(f, "STle({addr}) = {data}"),
        Stmt::StoreG { guard, addr, data } => write!(f, "if ({guard}) STle({addr}) = {data}"),
        Stmt::Cas { old, addr, expected, new } => {
            write!(f, "t{old} = CASle({addr} :: {expected} -> {new})")
        }
        Stmt::Dirty { name, args, dst } => {
            if let Some(t) = dst {
                write!(f, "t{t} = ")?;
            }
            write!(f, "DIRTY {name}")?;
            write_args(f, args)
        }
        Stmt::IMark { addr, len } => write!(f, "IMark({addr:#x}, {len})"),
        Stmt::Exit { guard: Expr::Const(c), target } if c.ty == super::IrType::I1 && c.bits == 1 => {
            write!(f, "goto {target:#x}")
        }
        Stmt::Exit { guard, target } => write!(f, "if ({guard}) goto {target:#x}"),
        Stmt::Halt => f.write_str("Halt"),
    }
}
