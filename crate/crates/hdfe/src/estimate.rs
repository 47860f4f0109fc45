//! The estimation pipeline behind `hdfe estimate`, `hdfe wald` and
//! `hdfe recover-fe`.

use std::str::FromStr;
use std::time::Instant;

use hdfe_core::{
    fit, fit_dummy, normalize_fe, recover_fe, target_from_parts, vcov_cluster, vcov_hessian, vcov_opg, vcov_robust, wald_test, ApConfig, FactorIndex, Family, FeSolver, FixedEffects, Matrix,
    ModelData, NewtonConfig, Normalization, RecoveryConfig, Schedule, ScoreMatrix, Vcov,
};

use crate::io::Table;
use crate::report::{Coefficient, DroppedGroup, EstimateReport, FactorSummary, VcovReport, WaldReport};
use crate::restrict::parse_restrictions;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VcovChoice {
    Hessian,
    Opg,
    Robust,
    Cluster(String),
}

impl FromStr for VcovChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "hessian" => Ok(VcovChoice::Hessian),
            "opg" => Ok(VcovChoice::Opg),
            "robust" => Ok(VcovChoice::Robust),
            _ => match s.strip_prefix("cluster:") {
                Some(col) if !col.is_empty() => Ok(VcovChoice::Cluster(col.to_string())),
                _ => Err(Error::Invalid(format!("unknown covariance `{s}`; expected hessian, opg, robust or cluster:<column>"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Alternating projections.
    #[default]
    Ap,
    /// Explicit dummy variables.
    Dummy,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "ap" => Ok(Engine::Ap),
            "dummy" => Ok(Engine::Dummy),
            other => Err(Error::Invalid(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub response: String,
    pub regressors: Vec<String>,
    pub fixed_effects: Vec<String>,
    pub family: Family,
    pub ap: ApConfig,
    pub newton: NewtonConfig,
    pub vcov: VcovChoice,
    pub engine: Engine,
    pub drop_noncontributing: bool,
}

impl EstimateOptions {
    pub fn new(response: &str, regressors: &[&str], fixed_effects: &[&str], family: Family) -> Self {
        EstimateOptions {
            response: response.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            fixed_effects: fixed_effects.iter().map(|s| s.to_string()).collect(),
            family,
            ap: ApConfig::default(),
            newton: NewtonConfig::default(),
            vcov: VcovChoice::Hessian,
            engine: Engine::Ap,
            drop_noncontributing: false,
        }
    }
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::NeumannHalperin => "nh",
        Schedule::Cimmino => "cimmino",
    }
}

fn compute_vcov(choice: &VcovChoice, x_dd: &Matrix, nu_dd: &[f64], cluster: Option<&FactorIndex>) -> Result<Vcov, Error> {
    Ok(match choice {
        VcovChoice::Hessian => vcov_hessian(x_dd)?,
        VcovChoice::Opg => vcov_opg(&ScoreMatrix::new(x_dd, nu_dd)?)?,
        VcovChoice::Robust => vcov_robust(x_dd, &ScoreMatrix::new(x_dd, nu_dd)?)?,
        VcovChoice::Cluster(_) => vcov_cluster(x_dd, &ScoreMatrix::new(x_dd, nu_dd)?, cluster.expect("cluster factor loaded"))?,
    })
}

/// Fits the model described by `opts` to `table`.
pub fn estimate(table: &Table, opts: &EstimateOptions) -> Result<EstimateReport, Error> {
    let start = Instant::now();
    let full = table.model_data(&opts.response, &opts.regressors, &opts.fixed_effects)?;
    let mut cluster = match &opts.vcov {
        VcovChoice::Cluster(col) => Some(table.factor(col)?),
        _ => None,
    };

    let (data, rows, dropped) = if opts.drop_noncontributing {
        let (keep, groups) = full.contributing_rows(opts.family)?;
        if groups.is_empty() {
            (full, None, groups)
        } else {
            log::info!("dropping {} observations in {} non-contributing groups", full.n() - keep.len(), groups.len());
            cluster = cluster.map(|c| c.subset(&keep)).transpose()?;
            (full.subset(&keep)?, Some(keep), groups)
        }
    } else {
        let groups = full.noncontributing_groups(opts.family);
        if !groups.is_empty() {
            log::warn!("{} groups do not contribute to the likelihood (consider --drop-noncontributing)", groups.len());
            for g in groups.iter().take(10) {
                log::warn!("  {}={} ({} obs)", g.category, g.label, g.n_obs);
            }
        }
        (full, None, Vec::new())
    };

    let (beta, eta, vcov, iterations, converged, loglik) = match opts.engine {
        Engine::Ap => {
            let f = fit(&data, opts.family, &opts.ap, &opts.newton)?;
            let v = compute_vcov(&opts.vcov, &f.x_dd, &f.nu_dd, cluster.as_ref())?;
            (f.beta, f.eta, v, f.iterations, f.converged, f.loglik)
        }
        Engine::Dummy => {
            let f = fit_dummy(&data, opts.family, &opts.newton)?;
            let v = match opts.vcov {
                VcovChoice::Hessian => Vcov { matrix: f.beta_vcov(), kind: hdfe_core::VcovKind::Hessian },
                _ => {
                    let (x_dd, nu_dd) = f.concentrated(&data, opts.family)?;
                    compute_vcov(&opts.vcov, &x_dd, &nu_dd, cluster.as_ref())?
                }
            };
            (f.beta, f.eta, v, f.iterations, f.converged, f.loglik)
        }
    };

    let se = vcov.std_errors();
    let p = beta.len();
    Ok(EstimateReport {
        family: opts.family.name().to_string(),
        engine: match opts.engine {
            Engine::Ap => "ap",
            Engine::Dummy => "dummy",
        }
        .to_string(),
        response: opts.response.clone(),
        regressors: opts.regressors.clone(),
        fixed_effects: data.factors.iter().map(|f| FactorSummary { name: f.name().to_string(), levels: f.level_count() }).collect(),
        coefficients: (0..p).map(|j| Coefficient { name: opts.regressors[j].clone(), estimate: beta[j], std_error: se[j] }).collect(),
        vcov: VcovReport { label: vcov.kind.label().to_string(), matrix: (0..p).map(|a| (0..p).map(|b| vcov.matrix[(a, b)]).collect()).collect() },
        iterations,
        converged,
        loglik,
        n: data.n(),
        ap_tolerance: opts.ap.tolerance,
        ap_schedule: schedule_name(opts.ap.schedule).to_string(),
        dropped_groups: dropped.into_iter().map(|g| DroppedGroup { category: g.category, label: g.label, n_obs: g.n_obs }).collect(),
        rows,
        eta,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Wald test of `restrictions` using the covariance stored in `report`.
pub fn wald(report: &EstimateReport, restrictions: &str) -> Result<WaldReport, Error> {
    let (r_mat, r) = parse_restrictions(restrictions, &report.names())?;
    let kind = match report.vcov.label.as_str() {
        "opg" => hdfe_core::VcovKind::Opg,
        "robust" => hdfe_core::VcovKind::Robust,
        "cluster" => hdfe_core::VcovKind::Cluster,
        _ => hdfe_core::VcovKind::Hessian,
    };
    let v = Vcov { matrix: report.vcov_matrix(), kind };
    let t = wald_test(&report.beta(), &v, &r_mat, &r)?;
    Ok(WaldReport { restrictions: restrictions.to_string(), vcov: report.vcov.label.clone(), statistic: t.statistic, df: t.df, p_value: t.p_value })
}

/// Rebuilds the estimation sample of `report` from `table` and solves for
/// the reference-normalized fixed effects.
pub fn recover(table: &Table, report: &EstimateReport, solver: FeSolver) -> Result<(ModelData, FixedEffects), Error> {
    let fe_names: Vec<String> = report.fixed_effects.iter().map(|f| f.name.clone()).collect();
    let mut data = table.model_data(&report.response, &report.regressors, &fe_names)?;
    if let Some(rows) = &report.rows {
        data = data.subset(rows)?;
    }
    if data.n() != report.eta.len() {
        return Err(Error::Invalid(format!("data has {} rows but the result was estimated on {}", data.n(), report.eta.len())));
    }
    let b = target_from_parts(&data, &report.beta(), &report.eta)?;
    let fe = recover_fe(&b, &data.factors, &RecoveryConfig { solver, ..RecoveryConfig::default() })?;
    log::info!("fixed effects recovered in {} sweeps, residual norm {:e}", fe.sweeps, fe.residual_norm);
    Ok((data, normalize_fe(fe, Normalization::Reference)))
}
