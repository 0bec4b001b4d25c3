//! A table-driven sine in the style of libm implementations.
//!
//! The argument is reduced with the round-by-adding-a-big-constant trick,
//! the nearest table entry is looked up, and a short polynomial corrects
//! for the remainder. Differentiating these operations one by one gives a
//! useless derivative: the rounding step passes the dot through unchanged
//! and the remainder's dot cancels to almost zero.
//!
//! The algorithm is written once against [`SoftArith`] so that the compiler
//! and the dual-number interpreter perform exactly the same operations.

use std::f64::consts::PI;

pub const TABLE_SIZE: usize = 32;

/// 1.5 * 2^52: adding and subtracting it rounds to an integer.
pub const ROUNDING_CONSTANT: f64 = 6755399441055744.0;

const SCALE: f64 = TABLE_SIZE as f64 / (2.0 * PI);
const STEP: f64 = 2.0 * PI / TABLE_SIZE as f64;

/// `sin(k * STEP)` for each entry, followed by the cosines.
pub fn table_values() -> Vec<f64> {
    let k = 0..TABLE_SIZE;
    k.clone().map(|k| (k as f64 * STEP).sin()).chain(k.map(|k| (k as f64 * STEP).cos())).collect()
}

pub fn table_bytes() -> Vec<u8> {
    table_values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub trait SoftArith {
    type F: Clone;
    type I: Clone;
    fn konst(&mut self, v: f64) -> Self::F;
    fn add(&mut self, a: &Self::F, b: &Self::F) -> Self::F;
    fn sub(&mut self, a: &Self::F, b: &Self::F) -> Self::F;
    fn mul(&mut self, a: &Self::F, b: &Self::F) -> Self::F;
    /// Float to integer, rounding to nearest.
    fn to_int(&mut self, a: &Self::F) -> Self::I;
    fn mask(&mut self, a: &Self::I, m: u64) -> Self::I;
    /// Entry `idx` of the sine table, or of the cosine table.
    fn table(&mut self, idx: &Self::I, cosine: bool) -> Self::F;
}

pub fn soft_sin<A: SoftArith>(a: &mut A, x: &A::F) -> A::F {
    let scale = a.konst(SCALE);
    let t = a.mul(x, &scale);
    let big = a.konst(ROUNDING_CONSTANT);
    let u = a.add(&t, &big);
    let r = a.sub(&u, &big);
    let k = a.to_int(&r);
    let idx = a.mask(&k, TABLE_SIZE as u64 - 1);
    let s = a.table(&idx, false);
    let c = a.table(&idx, true);
    let step = a.konst(STEP);
    let rs = a.mul(&r, &step);
    let d = a.sub(x, &rs);
    let d2 = a.mul(&d, &d);
    let one = a.konst(1.0);

    let c120 = a.konst(1.0 / 120.0);
    let c6 = a.konst(1.0 / 6.0);
    let p = a.mul(&d2, &c120);
    let p = a.sub(&c6, &p);
    let p = a.mul(&d2, &p);
    let p = a.sub(&one, &p);
    let sin_d = a.mul(&d, &p);

    let c24 = a.konst(1.0 / 24.0);
    let half = a.konst(0.5);
    let q = a.mul(&d2, &c24);
    let q = a.sub(&half, &q);
    let q = a.mul(&d2, &q);
    let cos_d = a.sub(&one, &q);

    let l = a.mul(&s, &cos_d);
    let rr = a.mul(&c, &sin_d);
    a.add(&l, &rr)
}
