use super::*;
use crate::ir::{parse_asm, validate_with_guest_limit};
use crate::machine::{Machine, MachineState};

fn machine() -> Machine {
    let mut m = Machine::with_builtins();
    register_bitlogic(&mut m);
    m
}

fn instrument(src: &str) -> (Program, AdPolicy) {
    let p = parse_asm(src).unwrap();
    let mut policy = AdPolicy::default();
    let q = instrument_program(&p, InstrumentOptions::default(), &mut policy);
    assert_eq!(validate_with_guest_limit(&q, 2 * GUEST_BAND), vec![], "{q}");
    (q, policy)
}

fn f(v: f64) -> u128 {
    v.to_bits() as u128
}

#[test]
fn mul_follows_product_rule() {
    let src = "
sb 0x0 tmps: F64 F64 F64 F64
  IMark(0x0, 1)
  t2 = GET:F64(0)
  t3 = GET:F64(8)
  t1 = MulF64(t2,t3)
  Halt
";
    let (q, _) = instrument(src);
    let sb = q.block(0).unwrap();
    let m = 4;
    let expect = Stmt::WrTmp {
        tmp: 1 + m,
        expr: Expr::op2(
            Opcode::AddF64,
            Expr::op2(Opcode::MulF64, Expr::RdTmp(2 + m), Expr::RdTmp(3)),
            Expr::op2(Opcode::MulF64, Expr::RdTmp(2), Expr::RdTmp(3 + m)),
        ),
    };
    let pos = sb.stmts.iter().position(|s| *s == expect).expect("dot statement present");
    assert!(matches!(sb.stmts[pos + 1], Stmt::WrTmp { tmp: 1, .. }));
}

#[test]
fn constant_put_gets_zero_shadow_first() {
    let (q, _) = instrument("sb 0x0 tmps:\n  IMark(0x0, 1)\n  PUT(0) = 0x4000000000000000:F64\n  Halt\n");
    let sb = q.block(0).unwrap();
    assert_eq!(sb.stmts[1], Stmt::Put { offset: 1024, expr: Expr::zero(IrType::F64) });
    assert_eq!(sb.stmts[2], Stmt::Put { offset: 0, expr: Expr::Const(Const::f64(2.0)) });
}

#[test]
fn integer_block_keeps_primal_statements_in_order() {
    let src = "
sb 0x0 tmps: I64 I64 I64
  IMark(0x0, 1)
  t0 = GET:I64(0)
  t1 = Add64(t0,0x1:I64)
  t2 = Shl64(t1,0x2:I8)
  PUT(8) = t2
  Halt
";
    let p = parse_asm(src).unwrap();
    let (q, policy) = instrument(src);
    assert!(policy.warnings.is_empty());
    let orig = &p.block(0).unwrap().stmts;
    let inst = &q.block(0).unwrap().stmts;
    let kept: Vec<&Stmt> = inst.iter().filter(|s| orig.contains(s)).collect();
    assert_eq!(kept, orig.iter().collect::<Vec<_>>());
    for s in inst.iter().filter(|s| !orig.contains(s)) {
        match s {
            Stmt::WrTmp { tmp, expr } => {
                assert!(*tmp >= 3);
                if *tmp != 3 {
                    assert_eq!(*expr, Expr::zero(IrType::I64));
                }
            }
            Stmt::Put { offset: 1032, expr } => assert_eq!(*expr, Expr::RdTmp(5)),
            other => panic!("unexpected {other}"),
        }
    }
}

#[test]
fn expression_rules() {
    let layout = InstrumentationLayout { m_tmp: 10, m_gs: 1024 };
    let mut types = vec![IrType::F64; 20];
    let mut pre = Vec::new();
    let mut pol = AdPolicy::default();
    let mut d = |e: &Expr| differentiate_expression(e, layout, &mut types, &mut pre, &mut pol);
    assert_eq!(d(&Expr::get(0, IrType::F64)), Expr::get(1024, IrType::F64));
    assert_eq!(d(&Expr::Const(Const::i64(0x4000_0000_0000_0000))), Expr::zero(IrType::I64));
    let c = Expr::RdTmp(0);
    let ite = Expr::ite(c.clone(), Expr::RdTmp(1), Expr::RdTmp(2));
    assert_eq!(d(&ite), Expr::ite(c, Expr::RdTmp(11), Expr::RdTmp(12)));
    let cc = Expr::CCall { name: "helper".into(), args: vec![], ty: IrType::F64 };
    assert_eq!(d(&cc), Expr::zero(IrType::F64));
    let ld = d(&Expr::load(Expr::Const(Const::i64(0x100)), IrType::F64));
    assert_eq!(ld, Expr::RdTmp(20));
    assert_eq!(pre.len(), 1);
    assert!(matches!(&pre[0], Stmt::Dirty { name, dst: Some(20), .. } if name == "shadow_load"));
}

#[test]
fn integer_op_derivative_is_zero() {
    let q = Expr::RdTmp(0);
    let r = differentiate_op(&Opcode::Add64, &[q.clone(), q.clone()], &[q.clone(), q]);
    assert_eq!(r, Some(Expr::zero(IrType::I64)));
}

fn run_instrumented(src: &str, setup: impl FnOnce(&mut MachineState)) -> MachineState {
    let (q, _) = instrument(src);
    let mut s = MachineState::for_program(&q);
    setup(&mut s);
    machine().run(&q, &mut s, 100).unwrap();
    s
}

#[test]
fn lowest_lane_mul_keeps_upper_dot_lanes() {
    let src = "
sb 0x0 tmps: V128 V128 V128
  IMark(0x0, 1)
  t0 = GET:V128(0)
  t1 = GET:V128(16)
  t2 = Mul32F0x4(t0,t1)
  PUT(32) = t2
  Halt
";
    let pack = |l: [f32; 4]| l.iter().enumerate().fold(0u128, |acc, (i, v)| acc | ((v.to_bits() as u128) << (32 * i)));
    let q = [2.0f32, 3.0, 4.0, 5.0];
    let s_ = [7.0f32, 11.0, 13.0, 17.0];
    let qd = [0.5f32, 1.5, 2.5, 3.5];
    let sd = [0.25f32, 9.0, 9.0, 9.0];
    let st = run_instrumented(src, |st| {
        st.put_guest(0, IrType::V128, pack(q)).unwrap();
        st.put_guest(16, IrType::V128, pack(s_)).unwrap();
        st.put_guest(1024, IrType::V128, pack(qd)).unwrap();
        st.put_guest(1040, IrType::V128, pack(sd)).unwrap();
    });
    let dot = st.get_guest(1024 + 32, IrType::V128).unwrap();
    let lane0 = qd[0] * s_[0] + q[0] * sd[0];
    assert_eq!(dot, pack([lane0, qd[1], qd[2], qd[3]]));
}

#[test]
fn bitwise_ops_become_helper_calls() {
    let q = Expr::RdTmp(0);
    let r = differentiate_op(&Opcode::And64, &[q.clone(), q.clone()], &[q.clone(), q.clone()]).unwrap();
    assert!(matches!(r, Expr::CCall { ref name, ty: IrType::I64, ref args } if name == "ad_bitlogic_and" && args.len() == 4));
    let r = differentiate_op(&Opcode::Not64, &[q.clone()], &[q]).unwrap();
    assert_eq!(r, Expr::zero(IrType::I64));
}

#[test]
fn unknown_opcode_warns_and_zeroes() {
    let (q, policy) = instrument("sb 0x40 tmps: F64\n  IMark(0x40, 1)\n  t0 = SinF64:F64(0x0:F64)\n  Halt\n");
    assert_eq!(policy.warnings, vec![Warning { block: 0x40, stmt: 1, opcode: "SinF64".into() }]);
    assert!(q.block(0x40).unwrap().stmts.contains(&Stmt::WrTmp { tmp: 1, expr: Expr::zero(IrType::F64) }));
}

const CAS: &str = "
sb 0x0 tmps: I64 I64 I64
  IMark(0x0, 1)
  t1 = ReinterpF64asI64(GET:F64(0))
  t2 = ReinterpF64asI64(GET:F64(8))
  t0 = CASle(0x9000:I64 :: t1 -> t2)
  PUT(16) = t0
  Halt
";

fn cas_run(expected_dot: f64) -> MachineState {
    run_instrumented(CAS, |st| {
        st.memory.write_uint(0x9000, 8, f(1.0));
        st.shadow.write_uint(0x9000, 8, f(0.5));
        st.put_guest(0, IrType::F64, f(1.0)).unwrap();
        st.put_guest(1024, IrType::F64, f(expected_dot)).unwrap();
        st.put_guest(8, IrType::F64, f(2.0)).unwrap();
        st.put_guest(1032, IrType::F64, f(1.0)).unwrap();
    })
}

#[test]
fn cas_writes_value_and_dot_when_both_match() {
    let st = cas_run(0.5);
    assert_eq!(st.load_f64(0x9000), 2.0);
    assert_eq!(st.shadow_f64(0x9000), 1.0);
    assert_eq!(st.get_guest(16, IrType::I64).unwrap(), f(1.0));
    assert_eq!(st.get_guest(1024 + 16, IrType::I64).unwrap(), f(0.5));
}

#[test]
fn cas_dot_mismatch_writes_nothing() {
    let st = cas_run(0.0);
    assert_eq!(st.load_f64(0x9000), 1.0);
    assert_eq!(st.shadow_f64(0x9000), 0.5);
    assert_eq!(st.get_guest(16, IrType::I64).unwrap(), f(1.0));
}

#[test]
fn rewritten_cas_uses_fresh_temps_only() {
    let p = parse_asm(CAS).unwrap();
    let sb = p.block(0).unwrap();
    let layout = InstrumentationLayout::for_block(sb);
    let mut types = sb.tmp_types.clone();
    types.extend_from_within(..);
    let stmts = rewrite_cas(&sb.stmts[3], layout, &mut types, &mut AdPolicy::default());
    for s in &stmts {
        if let Some(t) = s.dest() {
            assert!(t == 0 || t == 3 || t >= layout.first_fresh(), "{s}");
        }
    }
    assert!(matches!(stmts.last(), Some(Stmt::StoreG { .. })));
}

#[test]
fn x87_round_trip_carries_dot() {
    let src = "
sb 0x0 tmps: F64
  IMark(0x0, 1)
  DIRTY x87_store80(0x7000:I64,GET:F64(0))
  t0 = DIRTY x87_load80(0x7000:I64)
  PUT(8) = t0
  Halt
";
    let st = run_instrumented(src, |st| {
        st.put_guest(0, IrType::F64, f(3.0)).unwrap();
        st.put_guest(1024, IrType::F64, f(0.1)).unwrap();
    });
    assert_eq!(st.get_guest(8, IrType::F64).unwrap(), f(3.0));
    assert_eq!(st.get_guest(1032, IrType::F64).unwrap(), f(0.1));
}

#[test]
fn math_calls_route_to_dot_helpers() {
    let src = "
sb 0x0 tmps: F64
  IMark(0x0, 1)
  t0 = DIRTY math_sin(GET:F64(0))
  Halt
";
    let (q, policy) = instrument(src);
    assert!(policy.warnings.is_empty());
    let sb = q.block(0).unwrap();
    assert_eq!(
        sb.stmts[1],
        Stmt::Dirty {
            name: "math_sin_dot".into(),
            args: vec![Expr::get(0, IrType::F64), Expr::get(1024, IrType::F64)],
            dst: Some(1)
        }
    );
    let p = parse_asm(src).unwrap();
    let mut pol = AdPolicy::default();
    let q = instrument_program(&p, InstrumentOptions { math_wrappers: false }, &mut pol);
    assert_eq!(q.block(0).unwrap().stmts[1], Stmt::WrTmp { tmp: 1, expr: Expr::zero(IrType::F64) });
    assert_eq!(pol.warnings.len(), 1);
}

#[test]
fn client_request_passes_through() {
    let src = "
sb 0x0 tmps: F64
  IMark(0x0, 1)
  t0 = DIRTY read_input(0x0:I64)
  DIRTY dg_set_dot(0x100:I64,0x200:I64,0x8:I64)
  Halt
";
    let (q, policy) = instrument(src);
    assert!(policy.warnings.is_empty());
    let stmts = &q.block(0).unwrap().stmts;
    assert_eq!(stmts.len(), 5);
    assert_eq!(stmts[1], Stmt::WrTmp { tmp: 1, expr: Expr::zero(IrType::F64) });
}
