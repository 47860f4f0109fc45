//! Covariance estimators from the concentrated Hessian and scores, and Wald
//! tests of linear restrictions.
//!
//! No small-sample or cluster-count corrections are applied anywhere.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::estimator::FitResult;
use crate::factor::FactorIndex;
use crate::linalg::{Cholesky, Matrix, PIVOT_TOL};
use crate::math;

/// Per-observation contributions to the concentrated gradient,
/// `G_ij = ẍ_ij ν̈_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub g: Matrix,
}

impl ScoreMatrix {
    pub fn new(x_dd: &Matrix, nu_dd: &[f64]) -> Result<Self> {
        check_len(x_dd.nrows(), nu_dd.len())?;
        let mut g = x_dd.clone();
        for j in 0..g.ncols() {
            for (v, r) in g.col_mut(j).iter_mut().zip(nu_dd) {
                *v *= r;
            }
        }
        Ok(ScoreMatrix { g })
    }

    pub fn from_fit(fit: &FitResult) -> Self {
        Self::new(&fit.x_dd, &fit.nu_dd).expect("fit dimensions are consistent")
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.g.columns().map(|c| c.iter().sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcovKind {
    Hessian,
    Opg,
    Robust,
    Cluster,
}

impl VcovKind {
    pub fn label(self) -> &'static str {
        match self {
            VcovKind::Hessian => "hessian",
            VcovKind::Opg => "opg",
            VcovKind::Robust => "robust",
            VcovKind::Cluster => "cluster",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vcov {
    pub matrix: Matrix,
    pub kind: VcovKind,
}

impl Vcov {
    pub fn std_errors(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|&v| math::sqrt(v.max(0.0))).collect()
    }
}

fn invert_spd(m: &Matrix, what: &str) -> Result<Matrix> {
    if m.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    Cholesky::factor(m, PIVOT_TOL)
        .map(|c| c.inverse())
        .map_err(|j| Error::Singular(format!("{what} (pivot {j})")))
}

fn sandwich(bread: &Matrix, meat: &Matrix) -> Matrix {
    let mut v = bread.matmul(meat).matmul(bread);
    v.symmetrize();
    v
}

/// `(ẍ'ẍ)⁻¹`
pub fn vcov_hessian(x_dd: &Matrix) -> Result<Vcov> {
    Ok(Vcov { matrix: invert_spd(&x_dd.gram(), "concentrated Hessian")?, kind: VcovKind::Hessian })
}

/// `(G'G)⁻¹`
pub fn vcov_opg(scores: &ScoreMatrix) -> Result<Vcov> {
    Ok(Vcov { matrix: invert_spd(&scores.g.gram(), "outer product of scores")?, kind: VcovKind::Opg })
}

/// `H⁻¹ G'G H⁻¹` with `H = -ẍ'ẍ`; the signs cancel.
pub fn vcov_robust(x_dd: &Matrix, scores: &ScoreMatrix) -> Result<Vcov> {
    check_len(x_dd.nrows(), scores.g.nrows())?;
    let bread = invert_spd(&x_dd.gram(), "concentrated Hessian")?;
    Ok(Vcov { matrix: sandwich(&bread, &scores.g.gram()), kind: VcovKind::Robust })
}

/// One-way clustered sandwich with meat `Σ_c s_c s_c'`, where `s_c` sums the
/// score rows of cluster `c`.
pub fn vcov_cluster(x_dd: &Matrix, scores: &ScoreMatrix, cluster: &FactorIndex) -> Result<Vcov> {
    let n = x_dd.nrows();
    check_len(n, scores.g.nrows())?;
    check_len(n, cluster.n_obs())?;
    let p = x_dd.ncols();
    let clusters = cluster.level_count();
    if clusters < p {
        log::warn!("{clusters} clusters for {p} coefficients: the clustered meat matrix is singular");
    }
    let bread = invert_spd(&x_dd.gram(), "concentrated Hessian")?;
    let mut sums = vec![vec![0.0; p]; clusters];
    for j in 0..p {
        for (&c, &v) in cluster.level_of().iter().zip(scores.g.col(j)) {
            sums[c][j] += v;
        }
    }
    let mut meat = Matrix::zeros(p, p);
    for s in &sums {
        for a in 0..p {
            for b in 0..p {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }
    Ok(Vcov { matrix: sandwich(&bread, &meat), kind: VcovKind::Cluster })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Tests `R β = r` with `W = (Rβ - r)' (R V R')⁻¹ (Rβ - r) ~ χ²(q)`.
pub fn wald_test(beta: &[f64], vcov: &Vcov, r_mat: &Matrix, r: &[f64]) -> Result<WaldTest> {
    let p = beta.len();
    let q = r_mat.nrows();
    if q == 0 {
        return Err(Error::InvalidInput("no restrictions".into()));
    }
    check_len(p, r_mat.ncols())?;
    check_len(q, r.len())?;
    check_len(p, vcov.matrix.nrows())?;
    // rank(R) = q  <=>  R R' positive definite
    let rt = r_mat.transpose();
    if Cholesky::factor(&r_mat.matmul(&rt), PIVOT_TOL).is_err() {
        return Err(Error::InvalidInput("restrictions are linearly dependent".into()));
    }
    let mut middle = r_mat.matmul(&vcov.matrix).matmul(&rt);
    middle.symmetrize();
    let chol = Cholesky::factor(&middle, PIVOT_TOL).map_err(|_| Error::Singular("R V R'".into()))?;
    let diff: Vec<f64> = r_mat.mul_vec(beta).iter().zip(r).map(|(a, b)| a - b).collect();
    let solved = chol.solve(&diff);
    let statistic = crate::linalg::dot(&diff, &solved);
    Ok(WaldTest { statistic, df: q, p_value: chi_square_sf(statistic, q as f64) })
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = a * math::ln(x) - x - math::ln_gamma(a);
    if x < a + 1.0 {
        // series for P(a, x)
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - sum * math::exp(log_prefactor)
    } else {
        // modified Lentz continued fraction for Q(a, x)
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        math::exp(log_prefactor) * h
    }
}
