//! Weighted pseudo-demeaning.
//!
//! `demean_one` applies the annihilator of one weighted dummy block by
//! subtracting weighted group means; `ap_demean` approximates the annihilator
//! of all blocks jointly by alternating projections.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::factor::FactorIndex;
use crate::linalg::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Cyclic projections, each applied to the running vector.
    #[default]
    NeumannHalperin,
    /// Centroid of the individual projections of the sweep-start vector.
    Cimmino,
}

impl core::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nh" | "neumann-halperin" => Ok(Schedule::NeumannHalperin),
            "cimmino" => Ok(Schedule::Cimmino),
            other => Err(Error::InvalidInput(format!("unknown projection schedule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApConfig {
    pub schedule: Schedule,
    /// Stop when `‖z_i - z_{i-1}‖ / (1 + ‖z_{i-1}‖)` falls below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Demean the regressor columns concurrently when the `parallel`
    /// feature is on. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig { schedule: Schedule::NeumannHalperin, tolerance: 1e-5, max_sweeps: 100_000, parallel: true }
    }
}

impl ApConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        ApConfig { tolerance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("projection tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Observation weights together with the grouping they are applied over.
#[derive(Debug, Clone)]
pub struct WeightedFrame<'a> {
    factors: &'a [FactorIndex],
    w: Vec<f64>,
    sqrt_w: Vec<f64>,
    /// Per category, per level `Σ w_j`.
    group_weight: Vec<Vec<f64>>,
}

impl<'a> WeightedFrame<'a> {
    pub fn new(factors: &'a [FactorIndex], w: Vec<f64>) -> Result<Self> {
        let n = w.len();
        if let Some(i) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::DegenerateWeight { index: i, weight: w[i] });
        }
        let mut group_weight = Vec::with_capacity(factors.len());
        for f in factors {
            check_len(n, f.n_obs())?;
            let gw = f.sums(&w);
            debug_assert!(gw.iter().all(|&s| s > 0.0));
            group_weight.push(gw);
        }
        let sqrt_w = w.iter().map(|&v| math::sqrt(v)).collect();
        Ok(WeightedFrame { factors, w, sqrt_w, group_weight })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &'a [FactorIndex] {
        self.factors
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    /// `dst = M_k src`; `scratch` is resized to the level count.
    fn project_into(&self, k: usize, src: &[f64], dst: &mut [f64], scratch: &mut Vec<f64>) {
        let f = &self.factors[k];
        let gw = &self.group_weight[k];
        scratch.clear();
        scratch.resize(f.level_count(), 0.0);
        let level_of = f.level_of();
        for ((&g, &s), &v) in level_of.iter().zip(&self.sqrt_w).zip(src) {
            scratch[g] += s * v;
        }
        for (m, &t) in scratch.iter_mut().zip(gw) {
            *m /= t;
        }
        for (((d, &g), &s), &v) in dst.iter_mut().zip(level_of).zip(&self.sqrt_w).zip(src) {
            *d = v - s * scratch[g];
        }
    }

    /// One-category projection `M_{D̃_k} v`.
    pub fn demean_one(&self, k: usize, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        if k >= self.k() {
            return Err(Error::InvalidInput(format!("category {k} out of range ({} categories)", self.k())));
        }
        let mut out = vec![0.0; v.len()];
        self.project_into(k, v, &mut out, &mut Vec::new());
        Ok(out)
    }

    /// Approximates `M_D̃ v` by alternating projections.
    pub fn ap_demean(&self, cfg: &ApConfig, v: &[f64]) -> Result<ApOutcome> {
        cfg.validate()?;
        check_len(self.n(), v.len())?;
        let n = self.n();
        let k = self.k();
        let mut scratch = Vec::new();
        let mut z = v.to_vec();
        let mut prev = vec![0.0; n];
        if k == 1 {
            prev.copy_from_slice(&z);
            self.project_into(0, &prev, &mut z, &mut scratch);
            return Ok(ApOutcome { values: z, sweeps: 1, delta: 0.0 });
        }
        let mut tmp = vec![0.0; n];
        let mut acc = vec![0.0; n];
        let mut delta = f64::INFINITY;
        let mut prev_delta = f64::INFINITY;
        for sweep in 1..=cfg.max_sweeps {
            prev.copy_from_slice(&z);
            match cfg.schedule {
                Schedule::NeumannHalperin => {
                    for cat in 0..k {
                        tmp.copy_from_slice(&z);
                        self.project_into(cat, &tmp, &mut z, &mut scratch);
                    }
                }
                Schedule::Cimmino => {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    for cat in 0..k {
                        self.project_into(cat, &prev, &mut tmp, &mut scratch);
                        for (a, t) in acc.iter_mut().zip(&tmp) {
                            *a += t;
                        }
                    }
                    let inv = 1.0 / k as f64;
                    for (zi, a) in z.iter_mut().zip(&acc) {
                        *zi = a * inv;
                    }
                }
            }
            let mut diff = 0.0;
            for (a, b) in z.iter().zip(&prev) {
                diff += (a - b) * (a - b);
            }
            delta = math::sqrt(diff) / (1.0 + math::norm2(&prev));
            if converged(delta, prev_delta, cfg.tolerance) {
                return Ok(ApOutcome { values: z, sweeps: sweep, delta });
            }
            prev_delta = delta;
        }
        Err(Error::ApNotConverged { sweeps: cfg.max_sweeps, delta, column: None })
    }
}

/// Successive sweeps must differ by less than `tol`, and so must the
/// geometric-tail bound `delta / (1 - rate)` on the distance to the limit,
/// with the rate estimated from the last two sweeps.
pub(crate) fn converged(delta: f64, prev_delta: f64, tol: f64) -> bool {
    if delta == 0.0 {
        return true;
    }
    if !(delta < tol) || !prev_delta.is_finite() {
        return false;
    }
    let rate = delta / prev_delta;
    rate < 1.0 && delta / (1.0 - rate) < tol
}

/// Result of one alternating-projection run.
#[derive(Debug, Clone, PartialEq)]
pub struct ApOutcome {
    pub values: Vec<f64>,
    pub sweeps: usize,
    /// Relative change of the final sweep.
    pub delta: f64,
}

/// Pseudo-demeaned working residual and regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct DemeanedFrame {
    pub nu: Vec<f64>,
    pub x: Matrix,
    /// Largest sweep count over all demeaned vectors.
    pub max_sweeps: usize,
}

pub fn demean_one(frame: &WeightedFrame<'_>, k: usize, v: &[f64]) -> Result<Vec<f64>> {
    frame.demean_one(k, v)
}

pub fn ap_demean(frame: &WeightedFrame<'_>, cfg: &ApConfig, v: &[f64]) -> Result<Vec<f64>> {
    frame.ap_demean(cfg, v).map(|o| o.values)
}

/// Demeans `nu_tilde` and every column of `x_tilde` independently.
///
/// `names` labels the columns of `x_tilde` in error messages.
pub fn ap_demean_frame(frame: &WeightedFrame<'_>, cfg: &ApConfig, nu_tilde: &[f64], x_tilde: &Matrix, names: &[String]) -> Result<DemeanedFrame> {
    check_len(frame.n(), nu_tilde.len())?;
    check_len(frame.n(), x_tilde.nrows())?;
    let p = x_tilde.ncols();
    let run = |j: usize| -> Result<ApOutcome> {
        let v = if j == 0 { nu_tilde } else { x_tilde.col(j - 1) };
        frame.ap_demean(cfg, v).map_err(|e| match e {
            Error::ApNotConverged { sweeps, delta, .. } => {
                let column = if j == 0 { String::from("working residual") } else { names.get(j - 1).cloned().unwrap_or_else(|| format!("x{j}")) };
                Error::ApNotConverged { sweeps, delta, column: Some(column) }
            }
            other => other,
        })
    };
    let outcomes: Vec<Result<ApOutcome>> = run_columns(cfg.parallel, p + 1, run);
    let mut outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?.into_iter();
    let first = outcomes.next().expect("residual outcome");
    let mut max_sweeps = first.sweeps;
    let mut data = Vec::with_capacity(frame.n() * p);
    for o in outcomes {
        max_sweeps = max_sweeps.max(o.sweeps);
        data.extend_from_slice(&o.values);
    }
    Ok(DemeanedFrame { nu: first.values, x: Matrix::from_col_major(frame.n(), p, data), max_sweeps })
}

#[cfg(feature = "parallel")]
fn run_columns<F>(parallel: bool, count: usize, f: F) -> Vec<Result<ApOutcome>>
where
    F: Fn(usize) -> Result<ApOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    if parallel && count > 1 {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_columns<F>(_parallel: bool, count: usize, f: F) -> Vec<Result<ApOutcome>>
where
    F: Fn(usize) -> Result<ApOutcome>,
{
    (0..count).map(f).collect()
}
