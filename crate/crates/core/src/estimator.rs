//! Newton-Raphson with pseudo-demeaning.
//!
//! Each iteration forms the weighted working residual and regressors,
//! concentrates the fixed effects out of both by alternating projections,
//! solves the small `p × p` system for the structural update and moves the
//! linear predictor directly, without ever estimating the fixed effects.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::factor::ModelData;
use crate::families::Family;
use crate::linalg::{dot, Cholesky, Matrix, PIVOT_TOL};
use crate::math;
use crate::projections::{ap_demean_frame, ApConfig, DemeanedFrame, WeightedFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop when `|ℒ_r - ℒ_{r-1}| / (0.1 + |ℒ_r|)` falls below this.
    pub dev_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Hitting `max_iter` is an error; otherwise the unconverged fit is returned.
    pub strict: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { dev_tol: 1e-8, max_iter: 100, max_halvings: 32, strict: true }
    }
}

/// Everything one Newton iteration needs at the current linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub w: Vec<f64>,
    pub sqrt_w: Vec<f64>,
    pub nu: Vec<f64>,
    pub nu_tilde: Vec<f64>,
    pub x_tilde: Matrix,
    pub loglik: f64,
}

impl IterationState {
    pub fn new(data: &ModelData, family: Family, eta: Vec<f64>) -> Result<Self> {
        check_len(data.n(), eta.len())?;
        let q = family.working_quantities(&data.y, &eta)?;
        let loglik = family.log_likelihood(&data.y, &eta)?;
        let sqrt_w: Vec<f64> = q.w.iter().map(|&v| math::sqrt(v)).collect();
        let nu_tilde = q.nu.iter().zip(&sqrt_w).map(|(a, b)| a * b).collect();
        let mut x_tilde = data.x.clone();
        for j in 0..x_tilde.ncols() {
            for (v, s) in x_tilde.col_mut(j).iter_mut().zip(&sqrt_w) {
                *v *= s;
            }
        }
        Ok(IterationState { eta, mu: q.mu, w: q.w, sqrt_w, nu: q.nu, nu_tilde, x_tilde, loglik })
    }
}

/// Converged estimates together with the concentrated quantities at the
/// final linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: Family,
    pub column_names: Vec<String>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    /// Pseudo-demeaned weighted regressors `ẍ` at the final `η`.
    pub x_dd: Matrix,
    /// Pseudo-demeaned weighted working residual `ν̈` at the final `η`.
    pub nu_dd: Vec<f64>,
    /// Weights at the final `η`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub final_deviance_change: f64,
    pub loglik: f64,
    pub converged: bool,
    /// Total alternating-projection sweeps (maximum over columns, summed over iterations).
    pub ap_sweeps: usize,
}

impl FitResult {
    /// `ẍ' ν̈`
    pub fn concentrated_gradient(&self) -> Vec<f64> {
        self.x_dd.t_mul_vec(&self.nu_dd)
    }

    /// `ẍ' ẍ`
    pub fn concentrated_information(&self) -> Matrix {
        self.x_dd.gram()
    }
}

/// What the observer sees at each Newton iteration, before step halving.
#[derive(Debug)]
pub struct StepView<'a> {
    pub iteration: usize,
    pub state: &'a IterationState,
    /// Linear predictor the increment is added to.
    pub base_eta: &'a [f64],
    /// Weighted regression target: `ν̃`, or `W̃(ν + η⁰)` on a working-response start.
    pub target_tilde: &'a [f64],
    pub demeaned: &'a DemeanedFrame,
    pub delta_beta: &'a [f64],
}

/// `Δβ = (ẍ'ẍ)⁻¹ ẍ'ν̈`
pub fn beta_update(x_dd: &Matrix, nu_dd: &[f64]) -> Result<Vec<f64>> {
    let names: Vec<String> = (0..x_dd.ncols()).map(|j| format!("column {j}")).collect();
    solve_beta(x_dd, nu_dd, &names)
}

fn solve_beta(x_dd: &Matrix, nu_dd: &[f64], names: &[String]) -> Result<Vec<f64>> {
    check_len(x_dd.nrows(), nu_dd.len())?;
    if x_dd.ncols() == 0 {
        return Ok(Vec::new());
    }
    let chol = Cholesky::factor(&x_dd.gram(), PIVOT_TOL).map_err(|j| Error::Collinear { column: names[j].clone() })?;
    Ok(chol.solve(&x_dd.t_mul_vec(nu_dd)))
}

/// `η_r = η_{r-1} + W̃⁻¹ (ν̃ - ν̈ + ẍ Δβ)`
///
/// `ν̃ - ν̈` is the weighted fixed-effect part of the update and
/// `ẍΔβ + (X̃ - ẍ)Δβ` recombines into `X̃Δβ`.
pub fn eta_update(state: &IterationState, nu_dd: &[f64], x_dd: &Matrix, delta_beta: &[f64]) -> Result<Vec<f64>> {
    let inc = eta_increment(&state.sqrt_w, &state.nu_tilde, nu_dd, x_dd, delta_beta)?;
    let eta: Vec<f64> = state.eta.iter().zip(&inc).map(|(e, d)| e + d).collect();
    if let Some(i) = eta.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite linear predictor at observation {i}")));
    }
    Ok(eta)
}

fn eta_increment(sqrt_w: &[f64], target_tilde: &[f64], nu_dd: &[f64], x_dd: &Matrix, delta_beta: &[f64]) -> Result<Vec<f64>> {
    let n = sqrt_w.len();
    check_len(n, target_tilde.len())?;
    check_len(n, nu_dd.len())?;
    check_len(n, x_dd.nrows())?;
    check_len(x_dd.ncols(), delta_beta.len())?;
    let xb = x_dd.mul_vec(delta_beta);
    Ok((0..n).map(|i| (target_tilde[i] - nu_dd[i] + xb[i]) / sqrt_w[i]).collect())
}

pub fn fit(data: &ModelData, family: Family, ap: &ApConfig, newton: &NewtonConfig) -> Result<FitResult> {
    fit_observed(data, family, ap, newton, |_| {})
}

/// [`fit`] with a callback invoked once per Newton iteration.
pub fn fit_observed<F>(data: &ModelData, family: Family, ap: &ApConfig, newton: &NewtonConfig, mut observer: F) -> Result<FitResult>
where
    F: FnMut(&StepView<'_>),
{
    ap.validate()?;
    family.check_response(&data.y)?;
    let n = data.n();
    let p = data.p();
    let names = &data.column_names;

    let mut eta = family.initial_eta(&data.y);
    let mut beta = vec![0.0; p];
    // Poisson starts from log(y + 0.1), which is not of the form Dα + Xβ.
    // The first iteration regresses the working response ν + η⁰ from the
    // origin, which lands η inside the model space.
    let mut working_response_start = family == Family::Poisson;
    let mut loglik = family.log_likelihood(&data.y, &eta)?;
    let mut change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut ap_sweeps = 0;

    for iteration in 1..=newton.max_iter {
        iterations = iteration;
        let at = |e: Error| e.at_iteration(iteration);
        let state = IterationState::new(data, family, eta.clone()).map_err(at)?;
        let (target, base): (Vec<f64>, Vec<f64>) = if working_response_start {
            let t = state.nu.iter().zip(&state.eta).zip(&state.sqrt_w).map(|((v, e), s)| (v + e) * s).collect();
            (t, vec![0.0; n])
        } else {
            (state.nu_tilde.clone(), state.eta.clone())
        };
        let frame = WeightedFrame::new(&data.factors, state.w.clone()).map_err(at)?;
        let demeaned = ap_demean_frame(&frame, ap, &target, &state.x_tilde, names).map_err(at)?;
        ap_sweeps += demeaned.max_sweeps;
        check_concentrated_columns(&state.x_tilde, &demeaned.x, names).map_err(at)?;
        let delta_beta = solve_beta(&demeaned.x, &demeaned.nu, names).map_err(at)?;
        observer(&StepView { iteration, state: &state, base_eta: &base, target_tilde: &target, demeaned: &demeaned, delta_beta: &delta_beta });
        let inc = eta_increment(&state.sqrt_w, &target, &demeaned.nu, &demeaned.x, &delta_beta).map_err(at)?;

        if working_response_start {
            working_response_start = false;
            eta = inc;
            beta = delta_beta;
            loglik = family.log_likelihood(&data.y, &eta).map_err(at)?;
            continue;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=newton.max_halvings {
            let cand: Vec<f64> = base.iter().zip(&inc).map(|(e, d)| e + step * d).collect();
            if let Ok(ll) = family.log_likelihood(&data.y, &cand) {
                if ll.is_finite() && ll >= loglik {
                    accepted = Some((cand, ll));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, ll)) => {
                change = (ll - loglik).abs() / (0.1 + ll.abs());
                for (b, d) in beta.iter_mut().zip(&delta_beta) {
                    *b += step * d;
                }
                eta = cand;
                loglik = ll;
            }
            None => {
                // No ascent possible: at the optimum up to rounding, or stuck.
                let full: Vec<f64> = base.iter().zip(&inc).map(|(e, d)| e + d).collect();
                let ll = family.log_likelihood(&data.y, &full).unwrap_or(f64::NEG_INFINITY);
                change = (ll - loglik).abs() / (0.1 + loglik.abs());
                if change < newton.dev_tol {
                    converged = true;
                    break;
                }
                return Err(Error::StepHalvingFailed.at_iteration(iteration));
            }
        }
        if change < newton.dev_tol {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!("newton-raphson stopped after {iterations} iterations, last change {change:e}");
        if newton.strict {
            return Err(Error::NewtonNotConverged { iterations, change });
        }
    }

    let state = IterationState::new(data, family, eta.clone()).map_err(|e| e.at_iteration(iterations))?;
    let frame = WeightedFrame::new(&data.factors, state.w.clone())?;
    let demeaned = ap_demean_frame(&frame, ap, &state.nu_tilde, &state.x_tilde, names)?;
    ap_sweeps += demeaned.max_sweeps;
    Ok(FitResult {
        family,
        column_names: names.clone(),
        beta,
        eta,
        x_dd: demeaned.x,
        nu_dd: demeaned.nu,
        weights: state.w,
        iterations,
        final_deviance_change: change,
        loglik,
        converged,
        ap_sweeps,
    })
}

/// A regressor that the projection wipes out is collinear with the fixed effects.
fn check_concentrated_columns(x_tilde: &Matrix, x_dd: &Matrix, names: &[String]) -> Result<()> {
    for j in 0..x_tilde.ncols() {
        let before = dot(x_tilde.col(j), x_tilde.col(j));
        let after = dot(x_dd.col(j), x_dd.col(j));
        if !(after > PIVOT_TOL * before) {
            return Err(Error::Collinear { column: names[j].clone() });
        }
    }
    Ok(())
}
