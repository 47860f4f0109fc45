//! Simulated panels for exactness and timing experiments.
//!
//! Two designs: a two-way logit panel (unit and period effects, three
//! regressors, β = (1, -1, 1)) and a three-way gravity-style poisson panel
//! (exporter-period, importer-period and pair effects, β = (1, 1)). Fixed
//! effects are drawn around the realized group means of the regressors, so
//! they correlate with `x`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor::{FactorIndex, ModelData};
use crate::families::Family;
use crate::linalg::Matrix;
use crate::math;

pub const TWO_WAY_LOGIT_BETA: [f64; 3] = [1.0, -1.0, 1.0];
pub const THREE_WAY_PPML_BETA: [f64; 2] = [1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    TwoWayLogit,
    ThreeWayPpml,
}

impl Design {
    pub fn family(self) -> Family {
        match self {
            Design::TwoWayLogit => Family::Logit,
            Design::ThreeWayPpml => Family::Poisson,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Design::TwoWayLogit => "logit2",
            Design::ThreeWayPpml => "ppml3",
        }
    }
}

impl core::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit2" => Ok(Design::TwoWayLogit),
            "ppml3" => Ok(Design::ThreeWayPpml),
            other => Err(Error::InvalidInput(format!("unknown design `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DgpConfig {
    pub design: Design,
    /// Units `N` (countries for the three-way design).
    pub n_units: usize,
    /// Periods `T`.
    pub n_periods: usize,
    pub seed: u64,
    pub replications: usize,
}

impl DgpConfig {
    /// Small defaults: 50 x 10 for logit, 10 x 5 for poisson, 10 replications.
    pub fn desk(design: Design, seed: u64) -> Self {
        let (n_units, n_periods) = match design {
            Design::TwoWayLogit => (50, 10),
            Design::ThreeWayPpml => (10, 5),
        };
        DgpConfig { design, n_units, n_periods, seed, replications: 10 }
    }

    /// The configuration for replication `r`, seeded with `seed + r`.
    pub fn replication(&self, r: usize) -> Self {
        DgpConfig { seed: self.seed.wrapping_add(r as u64), replications: 1, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_periods == 0 || self.replications == 0 {
            return Err(Error::InvalidInput("N, T and replications must be positive".into()));
        }
        Ok(())
    }
}

/// Draws the dataset for `cfg.seed`, dispatching on the design.
pub fn simulate(cfg: &DgpConfig) -> Result<ModelData> {
    match cfg.design {
        Design::TwoWayLogit => simulate_two_way_logit(cfg),
        Design::ThreeWayPpml => simulate_three_way_ppml(cfg),
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn logistic(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return math::ln(u) - math::ln_1p(-u);
        }
    }
}

fn mean_by(groups: &[usize], count: usize, v: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; count];
    let mut c = vec![0usize; count];
    for (&g, &x) in groups.iter().zip(v) {
        s[g] += x;
        c[g] += 1;
    }
    s.iter().zip(&c).map(|(a, &b)| a / b as f64).collect()
}

/// `y_it = 1[x_it'β + α_i + γ_t + ε_it > 0]` with logistic `ε`, rows ordered
/// unit-major.
pub fn simulate_two_way_logit(cfg: &DgpConfig) -> Result<ModelData> {
    cfg.validate()?;
    let (nu, nt) = (cfg.n_units, cfg.n_periods);
    let n = nu * nt;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let unit: Vec<usize> = (0..n).map(|r| r / nt).collect();
    let period: Vec<usize> = (0..n).map(|r| r % nt).collect();
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let mut unit_center = vec![0.0; nu];
    let mut period_center = vec![0.0; nt];
    for c in &cols {
        for (a, m) in unit_center.iter_mut().zip(mean_by(&unit, nu, c)) {
            *a += m;
        }
        for (a, m) in period_center.iter_mut().zip(mean_by(&period, nt, c)) {
            *a += m;
        }
    }
    let alpha: Vec<f64> = unit_center.iter().map(|m| m + normal(&mut rng)).collect();
    let gamma: Vec<f64> = period_center.iter().map(|m| m + normal(&mut rng)).collect();
    let y: Vec<f64> = (0..n)
        .map(|r| {
            let xb: f64 = (0..3).map(|j| cols[j][r] * TWO_WAY_LOGIT_BETA[j]).sum();
            let latent = xb + alpha[unit[r]] + gamma[period[r]] + logistic(&mut rng);
            if latent > 0.0 { 1.0 } else { 0.0 }
        })
        .collect();
    let factors = vec![FactorIndex::from_codes("i", &unit)?, FactorIndex::from_codes("t", &period)?];
    let names = (1..=3).map(|j| format!("x{j}")).collect();
    ModelData::new(y, Matrix::from_columns(n, &cols), names, factors)
}

/// `Y_ijt = exp(α_it + γ_jt + δ_ij + x_ijt β₁ + d_ijt β₂) ε_ijt` with
/// log-normal `ε`, all `N·N` ordered pairs (including `i = j`) in every
/// period, rows ordered by exporter, importer, period.
pub fn simulate_three_way_ppml(cfg: &DgpConfig) -> Result<ModelData> {
    cfg.validate()?;
    let (nc, nt) = (cfg.n_units, cfg.n_periods);
    let n = nc * nc * nt;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut exp_time = Vec::with_capacity(n);
    let mut imp_time = Vec::with_capacity(n);
    let mut pair = Vec::with_capacity(n);
    for i in 0..nc {
        for j in 0..nc {
            for t in 0..nt {
                exp_time.push(i * nt + t);
                imp_time.push(j * nt + t);
                pair.push(i * nc + j);
            }
        }
    }
    let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let d: Vec<f64> = (0..n).map(|_| if normal(&mut rng) > 0.0 { 1.0 } else { 0.0 }).collect();
    let draw = |rng: &mut ChaCha20Rng, centers: Vec<f64>| -> Vec<f64> { centers.iter().map(|m| m + normal(rng)).collect() };
    let alpha = draw(&mut rng, mean_by(&exp_time, nc * nt, &x));
    let gamma = draw(&mut rng, mean_by(&imp_time, nc * nt, &x));
    let delta = draw(&mut rng, mean_by(&pair, nc * nc, &x));
    let y: Vec<f64> = (0..n)
        .map(|r| {
            let index = alpha[exp_time[r]] + gamma[imp_time[r]] + delta[pair[r]] + THREE_WAY_PPML_BETA[0] * x[r] + THREE_WAY_PPML_BETA[1] * d[r];
            math::exp(index + normal(&mut rng))
        })
        .collect();
    let label = |a: usize, b: usize| -> String {
        let mut s = a.to_string();
        s.push(':');
        s.push_str(&b.to_string());
        s
    };
    let et: Vec<String> = exp_time.iter().map(|&c| label(c / nt, c % nt)).collect();
    let it: Vec<String> = imp_time.iter().map(|&c| label(c / nt, c % nt)).collect();
    let pr: Vec<String> = pair.iter().map(|&c| label(c / nc, c % nc)).collect();
    let factors = vec![FactorIndex::from_labels("exp_time", &et)?, FactorIndex::from_labels("imp_time", &it)?, FactorIndex::from_labels("pair", &pr)?];
    ModelData::new(y, Matrix::from_columns(n, &[x, d]), vec!["x".into(), "d".into()], factors)
}

/// Whether `a` and `b` round to the same value at `d` significant digits.
pub fn digits_agree(a: f64, b: f64, d: usize) -> bool {
    assert!(d >= 1, "at least one significant digit");
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    format!("{:.*e}", d - 1, a) == format!("{:.*e}", d - 1, b)
}
