//! Exponential-family components for the two supported models.
//!
//! Both use the canonical link, so θ = η and the dispersion is fixed at 1.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math;

/// Weights below this floor are reported instead of clamped.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Logit,
    Poisson,
}

/// Per-observation quantities of one Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingQuantities {
    pub mu: Vec<f64>,
    /// `(dμ/dη)² / V(μ)`
    pub w: Vec<f64>,
    /// `(y - μ) dη/dμ`
    pub nu: Vec<f64>,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Logit => "logit",
            Family::Poisson => "poisson",
        }
    }

    pub fn dispersion(self) -> f64 {
        1.0
    }

    /// Cumulant function b(θ).
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            Family::Logit => math::log1p_exp(theta),
            Family::Poisson => math::exp(theta),
        }
    }

    /// c(y, φ) with φ = 1. Poisson uses -log Γ(y+1) so non-integer y is allowed.
    pub fn log_normalizer(self, y: f64) -> f64 {
        match self {
            Family::Logit => 0.0,
            Family::Poisson => -math::ln_gamma(y + 1.0),
        }
    }

    /// μ(η) for a single finite η.
    #[inline]
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Family::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + math::exp(-eta))
                } else {
                    let e = math::exp(eta);
                    e / (1.0 + e)
                }
            }
            Family::Poisson => math::exp(eta),
        }
    }

    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Logit => mu * (1.0 - mu),
            Family::Poisson => mu,
        }
    }

    pub fn inverse_link(self, eta: &[f64]) -> Result<Vec<f64>> {
        check_finite(eta)?;
        Ok(eta.iter().map(|&e| self.mean(e)).collect())
    }

    pub fn check_response(self, y: &[f64]) -> Result<()> {
        for (index, &value) in y.iter().enumerate() {
            let ok = match self {
                Family::Logit => value == 0.0 || value == 1.0,
                Family::Poisson => value.is_finite() && value >= 0.0,
            };
            if !ok {
                return Err(Error::OutOfDomain { index, value });
            }
        }
        Ok(())
    }

    /// Weights and working residuals at the linear predictor `eta`.
    pub fn working_quantities(self, y: &[f64], eta: &[f64]) -> Result<WorkingQuantities> {
        check_len(y.len(), eta.len())?;
        check_finite(eta)?;
        let n = y.len();
        let mut mu = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut nu = Vec::with_capacity(n);
        for (i, (&yi, &ei)) in y.iter().zip(eta).enumerate() {
            let m = self.mean(ei);
            let wi = match self {
                // μ(1-μ) written in terms of |η| to keep precision in the tails
                Family::Logit => {
                    let e = math::exp(-ei.abs());
                    e / ((1.0 + e) * (1.0 + e))
                }
                Family::Poisson => m,
            };
            if !(wi >= WEIGHT_FLOOR) {
                return Err(Error::DegenerateWeight { index: i, weight: wi });
            }
            mu.push(m);
            w.push(wi);
            nu.push((yi - m) / wi);
        }
        Ok(WorkingQuantities { mu, w, nu })
    }

    pub fn log_likelihood(self, y: &[f64], eta: &[f64]) -> Result<f64> {
        check_len(y.len(), eta.len())?;
        check_finite(eta)?;
        let mut ll = 0.0;
        for (&yi, &ei) in y.iter().zip(eta) {
            ll += (yi * ei - self.cumulant(ei)) / self.dispersion() + self.log_normalizer(yi);
        }
        Ok(ll)
    }

    /// Starting linear predictor used as the working-response origin.
    pub fn initial_eta(self, y: &[f64]) -> Vec<f64> {
        match self {
            Family::Logit => alloc::vec![0.0; y.len()],
            Family::Poisson => y.iter().map(|&v| math::ln(v + 0.1)).collect(),
        }
    }

    /// Whether a group whose responses are all equal to `value` carries no
    /// information about the remaining parameters.
    pub(crate) fn is_boundary_response(self, value: f64) -> bool {
        match self {
            Family::Logit => value == 0.0 || value == 1.0,
            Family::Poisson => value == 0.0,
        }
    }
}

impl core::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(Family::Logit),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

fn check_finite(eta: &[f64]) -> Result<()> {
    match eta.iter().position(|e| !e.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("non-finite linear predictor at observation {i}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn inverse_link_values() {
        assert_eq!(Family::Logit.inverse_link(&[0.0]).unwrap(), vec![0.5]);
        assert_eq!(Family::Poisson.inverse_link(&[0.0]).unwrap(), vec![1.0]);
        let mu = Family::Logit.inverse_link(&[3.0_f64.ln()]).unwrap()[0];
        assert!(close(mu, 0.75, 1e-15));
    }

    #[test]
    fn inverse_link_rejects_non_finite() {
        assert!(matches!(Family::Logit.inverse_link(&[f64::NAN]), Err(Error::InvalidInput(_))));
        assert!(matches!(Family::Poisson.inverse_link(&[0.0, f64::INFINITY]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn working_quantities_values() {
        let q = Family::Logit.working_quantities(&[1.0], &[0.0]).unwrap();
        assert_eq!((q.w[0], q.nu[0]), (0.25, 2.0));
        let q = Family::Logit.working_quantities(&[0.0], &[0.0]).unwrap();
        assert_eq!((q.w[0], q.nu[0]), (0.25, -2.0));
        let q = Family::Poisson.working_quantities(&[2.0], &[0.0]).unwrap();
        assert_eq!((q.w[0], q.nu[0]), (1.0, 1.0));
    }

    #[test]
    fn degenerate_weight_is_reported() {
        let err = Family::Logit.working_quantities(&[1.0, 1.0], &[0.0, 40.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeight { index: 1, .. }));
        let err = Family::Poisson.working_quantities(&[0.0], &[-40.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeight { index: 0, .. }));
    }

    #[test]
    fn log_likelihood_values() {
        let ll = Family::Logit.log_likelihood(&[1.0], &[0.0]).unwrap();
        assert!(close(ll, -core::f64::consts::LN_2, 1e-15));
        assert_eq!(Family::Poisson.log_likelihood(&[0.0], &[0.0]).unwrap(), -1.0);
        // y=[1,0], eta=[50,-50]: each term is -log(1+e^-50) ≈ -1.9287e-22
        let ll = Family::Logit.log_likelihood(&[1.0, 0.0], &[50.0, -50.0]).unwrap();
        assert!(ll <= 0.0 && ll > -1e-21);
        assert!(close(ll, -2.0 * 1.928749847963918e-22, 1e-12));
    }

    #[test]
    fn poisson_accepts_continuous_response() {
        Family::Poisson.check_response(&[0.0, 2.5, 1e6]).unwrap();
        assert!(Family::Poisson.check_response(&[-0.1]).is_err());
        assert!(Family::Logit.check_response(&[0.5]).is_err());
        let ll = Family::Poisson.log_likelihood(&[2.5], &[0.3]).unwrap();
        let expected = 2.5 * 0.3 - 0.3_f64.exp() - libm::lgamma(3.5);
        assert!(close(ll, expected, 1e-14));
    }

    #[test]
    fn dispersion_is_one() {
        assert_eq!(Family::Logit.dispersion(), 1.0);
        assert_eq!(Family::Poisson.dispersion(), 1.0);
    }

    proptest! {
        #[test]
        fn weight_equals_variance(eta in -3.0..3.0f64, logit in any::<bool>()) {
            let fam = if logit { Family::Logit } else { Family::Poisson };
            let q = fam.working_quantities(&[1.0], &[eta]).unwrap();
            prop_assert!(close(q.w[0], fam.variance(q.mu[0]), 1e-13));
            prop_assert!(q.w[0] > 0.0);
        }

        #[test]
        fn score_matches_finite_difference(eta in -3.0..3.0f64, y in 0.0..4.0f64, logit in any::<bool>()) {
            let (fam, y) = if logit { (Family::Logit, if y > 2.0 { 1.0 } else { 0.0 }) } else { (Family::Poisson, y) };
            let h = 1e-5;
            let up = fam.log_likelihood(&[y], &[eta + h]).unwrap();
            let dn = fam.log_likelihood(&[y], &[eta - h]).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let q = fam.working_quantities(&[y], &[eta]).unwrap();
            let score = q.w[0] * q.nu[0];
            prop_assert!((fd - score).abs() <= 1e-6 * (1.0 + score.abs()), "fd {} score {}", fd, score);
        }

        #[test]
        fn log_likelihood_permutation_invariant(seed in 0u64..1000) {
            let n = 17;
            let eta: Vec<f64> = (0..n).map(|i| ((i as f64 + seed as f64) * 0.37).sin() * 3.0).collect();
            let y: Vec<f64> = (0..n).map(|i| ((i as u64 * 7 + seed) % 2) as f64).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.reverse();
            idx.rotate_left((seed % 5) as usize);
            let ye: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let ee: Vec<f64> = idx.iter().map(|&i| eta[i]).collect();
            let a = Family::Logit.log_likelihood(&y, &eta).unwrap();
            let b = Family::Logit.log_likelihood(&ye, &ee).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
