//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's numerical code.

#![allow(dead_code)]

use hdfe_core::{FactorIndex, Matrix, ModelData};
use num::{BigRational, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha20Rng) -> f64 {
    r.sample(rand_distr::StandardNormal)
}

// ---- exact rational arithmetic ----

pub type Big = BigRational;

pub fn big(x: f64) -> Big {
    BigRational::from_float(x).expect("finite")
}

pub fn small(x: &Big) -> f64 {
    x.to_f64().unwrap()
}

pub fn big_matrix(m: &Matrix) -> Vec<Vec<Big>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| big(m[(i, j)])).collect()).collect()
}

pub fn big_mul(a: &[Vec<Big>], b: &[Vec<Big>]) -> Vec<Vec<Big>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = Big::zero();
                    for t in 0..k {
                        s += &a[i][t] * &b[t][j];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn big_transpose(a: &[Vec<Big>]) -> Vec<Vec<Big>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Exact Gauss-Jordan inverse.
pub fn big_inverse(a: &[Vec<Big>]) -> Vec<Vec<Big>> {
    let n = a.len();
    let mut m: Vec<Vec<Big>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Big::from_integer(1.into()) } else { Big::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).find(|&r| !m[r][c].is_zero()).expect("singular");
        m.swap(c, piv);
        let inv = m[c][c].recip();
        for v in m[c].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                for j in 0..2 * n {
                    let t = &f * &m[c][j];
                    m[r][j] -= t;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn big_to_matrix(a: &[Vec<Big>]) -> Matrix {
    let rows: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(small).collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Matrix::from_rows(&refs)
}

pub fn big_abs_max(a: &[Vec<Big>]) -> f64 {
    a.iter().flatten().map(|v| small(&v.abs())).fold(0.0, f64::max)
}

// ---- dense f64 helpers ----

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|j| a[c][j] * x[j]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the span of `cols`, dropping dependent directions
/// (modified Gram-Schmidt applied twice).
pub fn orthonormal_basis(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let start = dotp(c, c).sqrt();
        let mut v = c.clone();
        for _ in 0..2 {
            for e in &q {
                let d = dotp(e, &v);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= d * ei;
                }
            }
        }
        let norm = dotp(&v, &v).sqrt();
        if norm > 1e-9 * start.max(1e-300) {
            q.push(v.iter().map(|x| x / norm).collect());
        }
    }
    q
}

/// `v - Q Q' v` for an orthonormal `Q`.
pub fn residual_off(q: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut r = v.to_vec();
    for e in q {
        let d = dotp(e, &r);
        for (ri, ei) in r.iter_mut().zip(e) {
            *ri -= d * ei;
        }
    }
    r
}

/// One indicator column per level of every category, each scaled by `scale`.
pub fn dummy_columns(factors: &[FactorIndex], scale: &[f64]) -> Vec<Vec<f64>> {
    let n = scale.len();
    let mut cols = Vec::new();
    for f in factors {
        for level in 0..f.level_count() {
            let mut c = vec![0.0; n];
            for i in 0..n {
                if f.level_of()[i] == level {
                    c[i] = scale[i];
                }
            }
            cols.push(c);
        }
    }
    cols
}

/// `(I - D̃(D̃'D̃)⁻D̃') v` with `D̃ = diag(√w) D`.
pub fn dense_annihilate(factors: &[FactorIndex], w: &[f64], v: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let q = orthonormal_basis(&dummy_columns(factors, &s));
    residual_off(&q, v)
}

// ---- random instances ----

/// Random level codes in which every level of every category occurs.
pub fn random_codes(r: &mut ChaCha20Rng, n: usize, levels: usize) -> Vec<usize> {
    assert!(n >= levels);
    let mut c: Vec<usize> = (0..n).map(|i| if i < levels { i } else { r.random_range(0..levels) }).collect();
    for i in (1..n).rev() {
        let j = r.random_range(0..=i);
        c.swap(i, j);
    }
    c
}

pub fn random_weights(r: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| (1.5 * normal(r)).exp()).collect()
}

pub fn random_vec(r: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(r)).collect()
}

pub fn factors_from(codes: &[Vec<usize>]) -> Vec<FactorIndex> {
    codes.iter().enumerate().map(|(k, c)| FactorIndex::from_codes(format!("f{k}"), c).unwrap()).collect()
}

/// Two-way logit panel with unit and period effects and `p` regressors.
pub fn logit_panel(seed: u64, units: usize, periods: usize, p: usize) -> ModelData {
    let mut r = rng(seed);
    let n = units * periods;
    let unit: Vec<usize> = (0..n).map(|i| i / periods).collect();
    let period: Vec<usize> = (0..n).map(|i| i % periods).collect();
    let cols: Vec<Vec<f64>> = (0..p).map(|_| random_vec(&mut r, n)).collect();
    let a: Vec<f64> = (0..units).map(|_| 0.5 * normal(&mut r)).collect();
    let g: Vec<f64> = (0..periods).map(|_| 0.5 * normal(&mut r)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let xb: f64 = cols.iter().enumerate().map(|(j, c)| c[i] * if j % 2 == 0 { 0.5 } else { -0.5 }).sum();
            let eta = xb + a[unit[i]] + g[period[i]];
            let u: f64 = r.random();
            if u < 1.0 / (1.0 + (-eta).exp()) { 1.0 } else { 0.0 }
        })
        .collect();
    let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
    ModelData::new(y, Matrix::from_columns(n, &cols), names, factors_from(&[unit, period])).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn l2(a: &[f64]) -> f64 {
    dotp(a, a).sqrt()
}
