//! Recovery of the fixed-effect coefficients after estimation by solving
//! `Dα = b` with `b = η - Xβ`.
//!
//! `D` has one redundancy per category beyond the first, so the raw
//! coefficients depend on the solver; [`normalize_fe`] maps them to the
//! reference coding. Disconnected designs are not detected: the normalized
//! coefficients are then one solution among many, while `Dα` stays unique.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::estimator::FitResult;
use crate::factor::{FactorIndex, ModelData};
use crate::math;
use crate::projections::converged;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeSolver {
    /// Alternating group means (block Gauss-Seidel on the normal equations).
    #[default]
    NormalEquations,
    Kaczmarz,
}

impl core::str::FromStr for FeSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gs" | "normal-equations" => Ok(FeSolver::NormalEquations),
            "kaczmarz" => Ok(FeSolver::Kaczmarz),
            other => Err(Error::InvalidInput(format!("unknown fixed-effect solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub solver: FeSolver,
    /// Bound on `‖ρ_j - ρ_{j-1}‖₂` between sweeps.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig { solver: FeSolver::NormalEquations, tolerance: 1e-8, max_sweeps: 100_000 }
    }
}

/// How raw coefficients are mapped to an identified set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// First level of categories 2..K is zero.
    #[default]
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedEffects {
    /// One vector of level coefficients per category, in level order.
    pub coefficients: Vec<Vec<f64>>,
    pub solver: FeSolver,
    pub sweeps: usize,
    /// `‖b - Dα‖₂` at termination.
    pub residual_norm: f64,
}

impl FixedEffects {
    /// Observation-level contribution `Dα`.
    pub fn fitted(&self, factors: &[FactorIndex]) -> Vec<f64> {
        stretch_sum(&self.coefficients, factors)
    }
}

fn stretch_sum(alpha: &[Vec<f64>], factors: &[FactorIndex]) -> Vec<f64> {
    let mut out = vec![0.0; factors[0].n_obs()];
    for (a, f) in alpha.iter().zip(factors) {
        for (o, &g) in out.iter_mut().zip(f.level_of()) {
            *o += a[g];
        }
    }
    out
}

fn residual_norm(b: &[f64], alpha: &[Vec<f64>], factors: &[FactorIndex]) -> f64 {
    let fitted = stretch_sum(alpha, factors);
    let r: Vec<f64> = b.iter().zip(&fitted).map(|(x, y)| x - y).collect();
    math::norm2(&r)
}

/// `b = η - Xβ`
pub fn target_vector(fit: &FitResult, data: &ModelData) -> Result<Vec<f64>> {
    target_from_parts(data, &fit.beta, &fit.eta)
}

/// [`target_vector`] from a stored coefficient vector and linear predictor.
pub fn target_from_parts(data: &ModelData, beta: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    check_len(data.n(), eta.len())?;
    check_len(data.p(), beta.len())?;
    let mut b = eta.to_vec();
    for (j, &bj) in beta.iter().enumerate() {
        for (bi, &x) in b.iter_mut().zip(data.x.col(j)) {
            *bi -= x * bj;
        }
    }
    Ok(b)
}

fn check_inputs(b: &[f64], factors: &[FactorIndex], cfg: &RecoveryConfig) -> Result<()> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("at least one fixed-effect category is required".into()));
    }
    for f in factors {
        check_len(b.len(), f.n_obs())?;
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::OutOfDomain { index: i, value: b[i] });
    }
    if !(cfg.tolerance > 0.0) || cfg.max_sweeps == 0 {
        return Err(Error::InvalidInput("recovery tolerance and sweep limit must be positive".into()));
    }
    Ok(())
}

fn group_means(f: &FactorIndex, v: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; f.level_count()];
    for (&g, &vi) in f.level_of().iter().zip(v) {
        sums[g] += vi;
    }
    for (g, s) in sums.iter_mut().enumerate() {
        *s /= f.members_of(g).len() as f64;
    }
    sums
}

/// Block Gauss-Seidel: each category in turn is set to the group means of
/// `b` minus the other categories' stretched coefficients.
pub fn solve_normal_equations(b: &[f64], factors: &[FactorIndex], cfg: &RecoveryConfig) -> Result<FixedEffects> {
    check_inputs(b, factors, cfg)?;
    let mut alpha: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.0; f.level_count()]).collect();
    if factors.len() == 1 {
        alpha[0] = group_means(&factors[0], b);
        let residual_norm = residual_norm(b, &alpha, factors);
        return Ok(FixedEffects { coefficients: alpha, solver: FeSolver::NormalEquations, sweeps: 1, residual_norm });
    }
    // running Dα
    let mut fitted = vec![0.0; b.len()];
    let mut partial = vec![0.0; b.len()];
    let mut prev_delta = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let mut change2 = 0.0;
        for (k, f) in factors.iter().enumerate() {
            let ak = &alpha[k];
            for (((p, &bi), &fi), &g) in partial.iter_mut().zip(b).zip(&fitted).zip(f.level_of()) {
                *p = bi - (fi - ak[g]);
            }
            let new = group_means(f, &partial);
            for (o, &g) in fitted.iter_mut().zip(f.level_of()) {
                *o += new[g] - alpha[k][g];
            }
            change2 += new.iter().zip(&alpha[k]).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
            alpha[k] = new;
        }
        // the incremental Dα drifts by rounding; rebuild it now and then
        if sweep % 64 == 0 {
            fitted = stretch_sum(&alpha, factors);
        }
        let delta = math::sqrt(change2);
        if converged(delta, prev_delta, cfg.tolerance) {
            let residual_norm = residual_norm(b, &alpha, factors);
            return Ok(FixedEffects { coefficients: alpha, solver: FeSolver::NormalEquations, sweeps: sweep, residual_norm });
        }
        prev_delta = delta;
    }
    Err(Error::SolverNotConverged { sweeps: cfg.max_sweeps, delta: prev_delta })
}

/// Cyclic Kaczmarz over the rows of `D` in data order. Every row has `K`
/// ones, so each row update adds `(b_i - Σ_k α_k[g_k(i)]) / K` to the `K`
/// coefficients it touches.
///
/// Meant for consistent systems, as when `b` comes from a converged fit. For
/// `b` outside the range of `D` the sweeps settle on a limit cycle rather
/// than the least-squares solution.
pub fn solve_kaczmarz(b: &[f64], factors: &[FactorIndex], cfg: &RecoveryConfig) -> Result<FixedEffects> {
    check_inputs(b, factors, cfg)?;
    let kf = factors.len() as f64;
    let mut alpha: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.0; f.level_count()]).collect();
    let mut prev = alpha.clone();
    let mut prev_delta = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        for (i, &bi) in b.iter().enumerate() {
            let mut s = 0.0;
            for (a, f) in alpha.iter().zip(factors) {
                s += a[f.level_of()[i]];
            }
            let step = (bi - s) / kf;
            for (a, f) in alpha.iter_mut().zip(factors) {
                a[f.level_of()[i]] += step;
            }
        }
        let mut change2 = 0.0;
        for (a, p) in alpha.iter().zip(prev.iter_mut()) {
            for (x, y) in a.iter().zip(p.iter_mut()) {
                change2 += (x - *y) * (x - *y);
                *y = *x;
            }
        }
        let delta = math::sqrt(change2);
        if converged(delta, prev_delta, cfg.tolerance) {
            let residual_norm = residual_norm(b, &alpha, factors);
            return Ok(FixedEffects { coefficients: alpha, solver: FeSolver::Kaczmarz, sweeps: sweep, residual_norm });
        }
        prev_delta = delta;
    }
    Err(Error::SolverNotConverged { sweeps: cfg.max_sweeps, delta: prev_delta })
}

/// Dispatches on `cfg.solver`.
pub fn recover_fe(b: &[f64], factors: &[FactorIndex], cfg: &RecoveryConfig) -> Result<FixedEffects> {
    match cfg.solver {
        FeSolver::NormalEquations => solve_normal_equations(b, factors, cfg),
        FeSolver::Kaczmarz => solve_kaczmarz(b, factors, cfg),
    }
}

/// Shifts the first level of categories 2..K to zero and moves the total
/// shift into category 1, leaving `Dα` unchanged.
pub fn normalize_fe(mut fe: FixedEffects, scheme: Normalization) -> FixedEffects {
    match scheme {
        Normalization::Reference => {
            let mut total = 0.0;
            for a in fe.coefficients.iter_mut().skip(1) {
                let Some(&c) = a.first() else { continue };
                if c == 0.0 {
                    continue;
                }
                for v in a.iter_mut() {
                    *v -= c;
                }
                total += c;
            }
            if total != 0.0 {
                if let Some(first) = fe.coefficients.first_mut() {
                    for v in first.iter_mut() {
                        *v += total;
                    }
                }
            }
        }
    }
    fe
}
