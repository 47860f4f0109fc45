//! Exactness and timing experiments on simulated panels.
//!
//! Each replication is compared against the dummy-variable engine: how often
//! do the first coefficient and its Hessian standard error agree to 5, 8 and
//! 16 significant digits, per alternating-projection tolerance?

use std::time::Instant;

use serde::{Deserialize, Serialize};

use hdfe_core::{digits_agree, fit, fit_dummy, simulate, vcov_hessian, ApConfig, DgpConfig, ModelData, NewtonConfig, MAX_DENSE_ENTRIES};

use crate::Error;

pub const DIGITS: [usize; 3] = [5, 8, 16];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessCell {
    pub tolerance: f64,
    /// Share of replications agreeing at each entry of `digits`.
    pub beta_agreement: Vec<f64>,
    pub se_agreement: Vec<f64>,
    pub ap_seconds: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub design: String,
    pub n_units: usize,
    pub n_periods: usize,
    pub replications: usize,
    /// Replications in which some fit failed; they count as disagreement.
    pub failed: usize,
    pub digits: Vec<usize>,
    pub cells: Vec<ExactnessCell>,
    pub dummy_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub tolerance: f64,
    pub ap_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub design: String,
    pub n_units: usize,
    pub n_periods: usize,
    pub replications: usize,
    pub rows: Vec<TimingRow>,
    /// `None` when the dense design exceeds the size guard.
    pub dummy_seconds: Option<f64>,
}

/// The replication's data with non-contributing groups removed, as both
/// engines need finite fixed effects.
pub fn replication_data(cfg: &DgpConfig, r: usize) -> Result<ModelData, Error> {
    let data = simulate(&cfg.replication(r))?;
    Ok(data.drop_noncontributing(cfg.design.family())?.0)
}

/// Whether the dummy engine fits under its size guard.
pub fn dummy_feasible(data: &ModelData) -> bool {
    let l: usize = data.level_counts().iter().sum::<usize>() + 1 - data.k();
    data.n().saturating_mul(l + data.p()) <= MAX_DENSE_ENTRIES
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

pub fn run_exactness(cfg: &DgpConfig, grid: &[f64]) -> Result<ExactnessReport, Error> {
    cfg.validate()?;
    let family = cfg.design.family();
    let newton = NewtonConfig::default();
    let reps = cfg.replications;
    let mut beta_hits = vec![[0usize; 3]; grid.len()];
    let mut se_hits = vec![[0usize; 3]; grid.len()];
    let mut ap_time = vec![0.0; grid.len()];
    let mut iters = vec![0usize; grid.len()];
    let mut dummy_time = 0.0;
    let mut failed = 0;

    for r in 0..reps {
        let data = replication_data(cfg, r)?;
        let (oracle, secs) = timed(|| fit_dummy(&data, family, &newton));
        dummy_time += secs;
        let oracle = match oracle {
            Ok(o) => o,
            Err(e) => {
                log::warn!("replication {r}: dummy engine failed: {e}");
                failed += 1;
                continue;
            }
        };
        let oracle_se = oracle.beta_std_errors()[0];
        let mut rep_failed = false;
        for (c, &tol) in grid.iter().enumerate() {
            let (res, secs) = timed(|| fit(&data, family, &ApConfig::with_tolerance(tol), &newton));
            ap_time[c] += secs;
            let f = match res {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("replication {r}, tolerance {tol:e}: {e}");
                    rep_failed = true;
                    continue;
                }
            };
            iters[c] += f.iterations;
            let se = vcov_hessian(&f.x_dd)?.std_errors()[0];
            for (d, &digits) in DIGITS.iter().enumerate() {
                beta_hits[c][d] += digits_agree(f.beta[0], oracle.beta[0], digits) as usize;
                se_hits[c][d] += digits_agree(se, oracle_se, digits) as usize;
            }
        }
        failed += rep_failed as usize;
    }

    let share = |h: &[usize; 3]| h.iter().map(|&v| v as f64 / reps as f64).collect();
    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, &tolerance)| ExactnessCell {
            tolerance,
            beta_agreement: share(&beta_hits[c]),
            se_agreement: share(&se_hits[c]),
            ap_seconds: ap_time[c] / reps as f64,
            mean_iterations: iters[c] as f64 / reps as f64,
        })
        .collect();
    Ok(ExactnessReport {
        design: cfg.design.name().to_string(),
        n_units: cfg.n_units,
        n_periods: cfg.n_periods,
        replications: reps,
        failed,
        digits: DIGITS.to_vec(),
        cells,
        dummy_seconds: dummy_time / reps as f64,
    })
}

/// Mean wall time per engine and tolerance; the dummy engine is skipped when
/// too large.
pub fn run_bench(cfg: &DgpConfig, grid: &[f64]) -> Result<TimingReport, Error> {
    cfg.validate()?;
    let family = cfg.design.family();
    let newton = NewtonConfig::default();
    let reps = cfg.replications;
    let mut ap_time = vec![0.0; grid.len()];
    let mut dummy_time = Some(0.0);
    for r in 0..reps {
        let data = replication_data(cfg, r)?;
        for (c, &tol) in grid.iter().enumerate() {
            let (res, secs) = timed(|| fit(&data, family, &ApConfig::with_tolerance(tol), &newton));
            res?;
            ap_time[c] += secs;
        }
        if let Some(total) = dummy_time.as_mut() {
            if dummy_feasible(&data) {
                let (res, secs) = timed(|| fit_dummy(&data, family, &newton));
                res?;
                *total += secs;
            } else {
                dummy_time = None;
            }
        }
    }
    Ok(TimingReport {
        design: cfg.design.name().to_string(),
        n_units: cfg.n_units,
        n_periods: cfg.n_periods,
        replications: reps,
        rows: grid.iter().zip(&ap_time).map(|(&tolerance, t)| TimingRow { tolerance, ap_seconds: t / reps as f64 }).collect(),
        dummy_seconds: dummy_time.map(|t| t / reps as f64),
    })
}
