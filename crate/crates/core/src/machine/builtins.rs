use std::sync::Arc;

use crate::fpcodec::{f64_to_x87, x87_to_f64, X87Extended};
use crate::ir::IrType;

use super::{DirtyFn, Fault, Machine, MachineState, Value};

fn arity(name: &str, args: &[Value], n: usize) -> Result<(), Fault> {
    if args.len() != n {
        return Err(Fault::BadDirtyCall { name: name.into(), msg: format!("expected {n} arguments, got {}", args.len()) });
    }
    Ok(())
}

fn need_dst(name: &str, dst: Option<IrType>) -> Result<IrType, Fault> {
    dst.ok_or_else(|| Fault::BadDirtyCall { name: name.into(), msg: "result must be assigned".into() })
}

fn read10(map: &crate::shadowmem::ShadowMap, addr: u64) -> X87Extended {
    let mut b = [0u8; 10];
    map.read_into(addr, &mut b);
    X87Extended(b)
}

fn reg(m: &mut Machine, name: &'static str, f: impl Fn(&mut MachineState, &[Value], Option<IrType>) -> Result<Option<u128>, Fault> + Send + Sync + 'static) {
    let f: DirtyFn = Arc::new(f);
    m.register_dirty(name, f).expect("builtin names are distinct");
}

pub(super) fn register(m: &mut Machine) {
    reg(m, "shadow_load", |s, a, dst| {
        arity("shadow_load", a, 1)?;
        let ty = need_dst("shadow_load", dst)?;
        Ok(Some(s.shadow.read_uint(a[0].u64(), ty.width())))
    });
    reg(m, "shadow_store", |s, a, _| {
        arity("shadow_store", a, 2)?;
        s.shadow.write_uint(a[0].u64(), a[1].ty.width(), a[1].bits);
        Ok(None)
    });
    reg(m, "shadow_store_guarded", |s, a, _| {
        arity("shadow_store_guarded", a, 3)?;
        if a[0].bits != 0 {
            s.shadow.write_uint(a[1].u64(), a[2].ty.width(), a[2].bits);
        }
        Ok(None)
    });

    reg(m, "x87_store80", |s, a, _| {
        arity("x87_store80", a, 2)?;
        s.memory.write(a[0].u64(), &f64_to_x87(a[1].u64()).0);
        Ok(None)
    });
    reg(m, "x87_load80", |s, a, _| {
        arity("x87_load80", a, 1)?;
        Ok(Some(x87_to_f64(read10(&s.memory, a[0].u64())) as u128))
    });
    reg(m, "shadow_x87_store80", |s, a, _| {
        arity("shadow_x87_store80", a, 2)?;
        s.shadow.write(a[0].u64(), &f64_to_x87(a[1].u64()).0);
        Ok(None)
    });
    reg(m, "shadow_x87_load80", |s, a, _| {
        arity("shadow_x87_load80", a, 1)?;
        Ok(Some(x87_to_f64(read10(&s.shadow, a[0].u64())) as u128))
    });

    reg(m, "dg_set_dot", |s, a, _| {
        arity("dg_set_dot", a, 3)?;
        let bytes = s.memory.read(a[1].u64(), a[2].u64() as usize);
        s.shadow.write(a[0].u64(), &bytes);
        Ok(None)
    });
    reg(m, "dg_get_dot", |s, a, _| {
        arity("dg_get_dot", a, 3)?;
        let bytes = s.shadow.read(a[0].u64(), a[2].u64() as usize);
        s.memory.write(a[1].u64(), &bytes);
        Ok(None)
    });

    reg(m, "print_f64", |s, a, _| {
        arity("print_f64", a, 1)?;
        s.printed.push(a[0].f64());
        Ok(None)
    });
    reg(m, "read_input", |s, a, _| {
        arity("read_input", a, 1)?;
        let slot = a[0].u64();
        let v = s.inputs.get(slot as usize).ok_or(Fault::MissingInput(slot))?;
        Ok(Some(v.to_bits() as u128))
    });
}
