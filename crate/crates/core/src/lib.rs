//! Generalized linear models (logit, poisson) with k-way high-dimensional
//! additive fixed effects.
//!
//! The fixed effects are never materialized during estimation. Each
//! Newton-Raphson update concentrates them out by applying the weighted
//! annihilator of the dummy matrix through alternating projections; the
//! linear predictor is updated directly from the projected system. Fixed
//! effects, covariance matrices and Wald tests are recovered afterwards.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only turns
//! on parallel column demeaning via rayon; results are bitwise identical with
//! and without it.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dummy_oracle;
pub mod error;
pub mod estimator;
pub mod factor;
pub mod families;
pub mod fe_recovery;
pub mod inference;
pub mod linalg;
mod math;
pub mod projections;
pub mod sim;

pub use dummy_oracle::{build_design, fit_dummy, DesignColumn, DummyFit, FullDesign, MAX_DENSE_ENTRIES};
pub use error::{Error, Result};
pub use estimator::{beta_update, eta_update, fit, fit_observed, FitResult, IterationState, NewtonConfig, StepView};
pub use factor::{FactorIndex, ModelData, NoncontributingGroup};
pub use families::Family;
pub use fe_recovery::{normalize_fe, recover_fe, solve_kaczmarz, solve_normal_equations, target_from_parts, target_vector, FeSolver, FixedEffects, Normalization, RecoveryConfig};
pub use inference::{chi_square_sf, vcov_cluster, vcov_hessian, vcov_opg, vcov_robust, wald_test, ScoreMatrix, Vcov, VcovKind, WaldTest};
pub use linalg::Matrix;
pub use projections::{ap_demean, ap_demean_frame, demean_one, ApConfig, Schedule, WeightedFrame};
pub use sim::{digits_agree, simulate, simulate_three_way_ppml, simulate_two_way_logit, DgpConfig, Design};
