//! Brute-force reference estimator over the explicit design `Z = [D X]`.
//!
//! Dense Newton-Raphson on all `l + p` coefficients, sharing the family
//! quantities, stopping rule, step halving and starting values with
//! [`crate::estimator::fit`]. Only meant for small problems.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::NewtonConfig;
use crate::factor::ModelData;
use crate::families::Family;
use crate::linalg::{Cholesky, Matrix, PIVOT_TOL};
use crate::math;

/// Largest `n·(p + l)` accepted.
pub const MAX_DENSE_ENTRIES: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DesignColumn {
    Level { category: usize, level: usize },
    Regressor(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullDesign {
    pub z: Matrix,
    pub column_map: Vec<DesignColumn>,
    /// Redundant level columns left out of `z`.
    pub dropped: Vec<DesignColumn>,
}

impl FullDesign {
    pub fn column_name(&self, data: &ModelData, j: usize) -> String {
        match self.column_map[j] {
            DesignColumn::Level { category, level } => {
                let f = &data.factors[category];
                format!("{}={}", f.name(), f.labels()[level])
            }
            DesignColumn::Regressor(r) => data.column_names[r].clone(),
        }
    }

    /// Number of dummy columns `l`.
    pub fn dummy_count(&self) -> usize {
        self.column_map.iter().filter(|c| matches!(c, DesignColumn::Level { .. })).count()
    }
}

fn dummy_columns(data: &ModelData) -> Vec<DesignColumn> {
    let mut map = Vec::new();
    for (k, f) in data.factors.iter().enumerate() {
        let first = if k == 0 { 0 } else { 1 };
        map.extend((first..f.level_count()).map(|level| DesignColumn::Level { category: k, level }));
    }
    map
}

/// Dummies for every level of category 1 and all but the first level of the
/// others, followed by the regressors.
///
/// Designs with more redundancy than the reference coding removes (several
/// overlapping interactions, or disconnected groups) lose further dummy
/// columns: any level column linearly dependent on the columns before it is
/// dropped and listed in [`FullDesign::dropped`]; its coefficient is zero. A
/// regressor dependent on earlier columns is an error.
pub fn build_design(data: &ModelData) -> Result<FullDesign> {
    let n = data.n();
    let mut candidates = dummy_columns(data);
    candidates.extend((0..data.p()).map(DesignColumn::Regressor));
    let m = candidates.len();
    let entries = n.saturating_mul(m);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge { entries, limit: MAX_DENSE_ENTRIES });
    }
    let mut z = Matrix::zeros(n, m);
    for (j, c) in candidates.iter().enumerate() {
        match *c {
            DesignColumn::Level { category, level } => {
                let col = z.col_mut(j);
                for &i in data.factors[category].members_of(level) {
                    col[i] = 1.0;
                }
            }
            DesignColumn::Regressor(r) => z.col_mut(j).copy_from_slice(data.x.col(r)),
        }
    }
    let keep = independent_columns(&z);
    let mut column_map = Vec::with_capacity(keep.len());
    let mut dropped = Vec::new();
    let mut kept = keep.iter().peekable();
    for (j, c) in candidates.into_iter().enumerate() {
        if kept.peek() == Some(&&j) {
            kept.next();
            column_map.push(c);
        } else if let DesignColumn::Regressor(r) = c {
            return Err(Error::RankDeficient { column: data.column_names[r].clone() });
        } else {
            dropped.push(c);
        }
    }
    if !dropped.is_empty() {
        log::debug!("dropped {} redundant dummy columns", dropped.len());
    }
    let z = if keep.len() == m {
        z
    } else {
        let mut data_cols = Vec::with_capacity(n * keep.len());
        for &j in &keep {
            data_cols.extend_from_slice(z.col(j));
        }
        Matrix::from_col_major(n, keep.len(), data_cols)
    };
    Ok(FullDesign { z, column_map, dropped })
}

/// Greedy left-to-right selection of linearly independent columns: a
/// Cholesky factorization of the correlation-scaled Gram matrix that skips
/// every column whose pivot falls below `PIVOT_TOL`.
fn independent_columns(z: &Matrix) -> Vec<usize> {
    let mut g = z.gram();
    let m = g.nrows();
    let scale: Vec<f64> = (0..m).map(|j| if g[(j, j)] > 0.0 { 1.0 / math::sqrt(g[(j, j)]) } else { 0.0 }).collect();
    for a in 0..m {
        for b in 0..m {
            g[(a, b)] *= scale[a] * scale[b];
        }
    }
    let mut keep: Vec<usize> = Vec::with_capacity(m);
    // rows of L for the kept columns, in kept order
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut row = Vec::with_capacity(keep.len() + 1);
        for (t, &k) in keep.iter().enumerate() {
            let s: f64 = (0..t).map(|u| row[u] * l[t][u]).sum();
            row.push((g[(j, k)] - s) / l[t][t]);
        }
        let d = g[(j, j)] - row.iter().map(|v| v * v).sum::<f64>();
        if d > PIVOT_TOL {
            row.push(math::sqrt(d));
            l.push(row);
            keep.push(j);
        }
    }
    keep
}

#[derive(Debug, Clone, PartialEq)]
pub struct DummyFit {
    pub design: FullDesign,
    /// All coefficients in design column order.
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Reference-coded level coefficients per category; first level of
    /// categories 2..K is zero.
    pub alpha: Vec<Vec<f64>>,
    /// `(Z'WZ)⁻¹` at the final estimate.
    pub vcov: Matrix,
    pub eta: Vec<f64>,
    pub weights: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DummyFit {
    /// Regressor block of [`DummyFit::vcov`].
    pub fn beta_vcov(&self) -> Matrix {
        let l = self.design.dummy_count();
        let p = self.beta.len();
        let mut v = Matrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                v[(a, b)] = self.vcov[(l + a, l + b)];
            }
        }
        v
    }

    pub fn beta_std_errors(&self) -> Vec<f64> {
        self.beta_vcov().diag().iter().map(|&v| math::sqrt(v)).collect()
    }

    /// Concentrated regressors and working residual at the final estimate,
    /// from an exact dense projection off the weighted dummies:
    /// `(ẍ, ν̈)`.
    pub fn concentrated(&self, data: &ModelData, family: Family) -> Result<(Matrix, Vec<f64>)> {
        let q = family.working_quantities(&data.y, &self.eta)?;
        let s: Vec<f64> = q.w.iter().map(|&v| math::sqrt(v)).collect();
        let l = self.design.dummy_count();
        let n = data.n();
        let mut d = Matrix::zeros(n, l);
        for j in 0..l {
            for (i, v) in d.col_mut(j).iter_mut().enumerate() {
                *v = self.design.z[(i, j)] * s[i];
            }
        }
        let chol = Cholesky::factor(&d.gram(), PIVOT_TOL).map_err(|j| Error::Singular(format!("weighted dummy block (column {j})")))?;
        let annihilate = |v: &[f64]| -> Vec<f64> {
            let coef = chol.solve(&d.t_mul_vec(v));
            let fitted = d.mul_vec(&coef);
            v.iter().zip(&fitted).map(|(a, b)| a - b).collect()
        };
        let nu_tilde: Vec<f64> = q.nu.iter().zip(&s).map(|(a, b)| a * b).collect();
        let cols: Vec<Vec<f64>> = (0..data.p())
            .map(|j| {
                let xt: Vec<f64> = data.x.col(j).iter().zip(&s).map(|(a, b)| a * b).collect();
                annihilate(&xt)
            })
            .collect();
        Ok((Matrix::from_columns(n, &cols), annihilate(&nu_tilde)))
    }
}

fn weighted(z: &Matrix, sqrt_w: &[f64]) -> Matrix {
    let mut zt = z.clone();
    for j in 0..zt.ncols() {
        for (v, s) in zt.col_mut(j).iter_mut().zip(sqrt_w) {
            *v *= s;
        }
    }
    zt
}

/// Solves the weighted least-squares problem `min ‖W̃(target) - W̃ Z c‖` with
/// `target` already multiplied by `W̃`.
fn wls(z: &Matrix, sqrt_w: &[f64], target_tilde: &[f64], data: &ModelData, design: &FullDesign) -> Result<Vec<f64>> {
    let zt = weighted(z, sqrt_w);
    let chol = Cholesky::factor(&zt.gram(), PIVOT_TOL).map_err(|j| Error::Singular(format!("Z'WZ at column `{}`", design.column_name(data, j))))?;
    Ok(chol.solve(&zt.t_mul_vec(target_tilde)))
}

pub fn fit_dummy(data: &ModelData, family: Family, newton: &NewtonConfig) -> Result<DummyFit> {
    family.check_response(&data.y)?;
    let design = build_design(data)?;
    let z = &design.z;
    let m = z.ncols();

    let mut eta = family.initial_eta(&data.y);
    let mut gamma = vec![0.0; m];
    let mut working_response_start = family == Family::Poisson;
    let mut loglik = family.log_likelihood(&data.y, &eta)?;
    let mut change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=newton.max_iter {
        iterations = iteration;
        let at = |e: Error| e.at_iteration(iteration);
        let q = family.working_quantities(&data.y, &eta).map_err(at)?;
        let s: Vec<f64> = q.w.iter().map(|&v| math::sqrt(v)).collect();

        if working_response_start {
            working_response_start = false;
            let target: Vec<f64> = (0..eta.len()).map(|i| (q.nu[i] + eta[i]) * s[i]).collect();
            gamma = wls(z, &s, &target, data, &design).map_err(at)?;
            eta = z.mul_vec(&gamma);
            loglik = family.log_likelihood(&data.y, &eta).map_err(at)?;
            continue;
        }

        let target: Vec<f64> = q.nu.iter().zip(&s).map(|(a, b)| a * b).collect();
        let delta = wls(z, &s, &target, data, &design).map_err(at)?;
        let inc = z.mul_vec(&delta);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=newton.max_halvings {
            let cand: Vec<f64> = eta.iter().zip(&inc).map(|(e, d)| e + step * d).collect();
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
                for (g, d) in gamma.iter_mut().zip(&delta) {
                    *g += step * d;
                }
                eta = cand;
                loglik = ll;
            }
            None => {
                let full: Vec<f64> = eta.iter().zip(&inc).map(|(e, d)| e + d).collect();
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
        log::warn!("dummy-variable newton-raphson stopped after {iterations} iterations, last change {change:e}");
        if newton.strict {
            return Err(Error::NewtonNotConverged { iterations, change });
        }
    }

    let q = family.working_quantities(&data.y, &eta)?;
    let s: Vec<f64> = q.w.iter().map(|&v| math::sqrt(v)).collect();
    let vcov = Cholesky::factor(&weighted(z, &s).gram(), PIVOT_TOL)
        .map_err(|j| Error::Singular(format!("Z'WZ at column `{}`", design.column_name(data, j))))?
        .inverse();

    let mut alpha: Vec<Vec<f64>> = data.factors.iter().map(|f| vec![0.0; f.level_count()]).collect();
    let mut beta = vec![0.0; data.p()];
    for (c, &g) in design.column_map.iter().zip(&gamma) {
        match *c {
            DesignColumn::Level { category, level } => alpha[category][level] = g,
            DesignColumn::Regressor(r) => beta[r] = g,
        }
    }
    Ok(DummyFit { design, gamma, beta, alpha, vcov, eta, weights: q.w, loglik, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorIndex;

    fn data_with(levels: &[&[usize]], p: usize, n: usize) -> ModelData {
        let factors = levels.iter().enumerate().map(|(k, c)| FactorIndex::from_codes(format!("f{k}"), c).unwrap()).collect();
        let cols: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| libm::sin((i * (j + 2)) as f64 + 0.3 * j as f64)).collect()).collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        ModelData::new(vec![1.0; n], Matrix::from_columns(n, &cols), names, factors).unwrap()
    }

    #[test]
    fn column_counts() {
        let one = data_with(&[&[0, 1, 2, 0, 1, 2]], 1, 6);
        assert_eq!(build_design(&one).unwrap().z.ncols(), 4);

        let a = [0, 1, 2, 0, 1, 2, 0, 1];
        let b = [0, 0, 0, 1, 1, 1, 1, 0];
        let two = data_with(&[&a, &b], 2, 8);
        let d = build_design(&two).unwrap();
        assert_eq!(d.z.ncols(), 6);
        assert_eq!(d.dummy_count(), 4);
        assert_eq!(d.column_map[3], DesignColumn::Level { category: 1, level: 1 });

        let n = 24;
        let a: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let b: Vec<usize> = (0..n).map(|i| (i / 4) % 3).collect();
        let c: Vec<usize> = (0..n).map(|i| (i / 12) % 2).collect();
        let three = data_with(&[&a, &b, &c], 1, n);
        assert_eq!(build_design(&three).unwrap().z.ncols(), 8);
    }

    #[test]
    fn disconnected_design_drops_a_level() {
        // two separate blocks: {a0,a1} x {b0} and {a2} x {b1}
        let a = [0, 1, 0, 1, 2, 2];
        let b = [0, 0, 0, 0, 1, 1];
        let data = data_with(&[&a, &b], 0, 6);
        let d = build_design(&data).unwrap();
        assert_eq!(d.dropped, vec![DesignColumn::Level { category: 1, level: 1 }]);
        assert_eq!(d.z.ncols(), 3);
    }

    #[test]
    fn regressor_spanned_by_dummies_is_an_error() {
        let g = FactorIndex::from_codes("g", &[0, 0, 1, 1]).unwrap();
        let x = Matrix::from_columns(4, &[vec![2.0, 2.0, -1.0, -1.0]]);
        let data = ModelData::new(vec![1.0; 4], x, vec!["z".into()], vec![g]).unwrap();
        assert_eq!(build_design(&data).unwrap_err(), Error::RankDeficient { column: "z".into() });
    }

    #[test]
    fn size_guard() {
        let n = 100_001;
        let codes: Vec<usize> = (0..n).map(|i| i % 600).collect();
        let f = FactorIndex::from_codes("g", &codes).unwrap();
        let data = ModelData::new(vec![1.0; n], Matrix::zeros(n, 0), vec![], vec![f]).unwrap();
        assert!(matches!(build_design(&data), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn one_way_group_means() {
        let g = FactorIndex::from_codes("g", &[0, 0, 0, 1, 1]).unwrap();
        let y = vec![2.0, 4.0, 3.0, 0.5, 1.5];
        let data = ModelData::new(y, Matrix::zeros(5, 0), vec![], vec![g]).unwrap();
        let fit = fit_dummy(&data, Family::Poisson, &NewtonConfig::default()).unwrap();
        assert!((fit.alpha[0][0] - libm::log(3.0)).abs() < 1e-8);
        assert!((fit.alpha[0][1] - 0.0).abs() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn logit_intercept_is_log_odds() {
        let g = FactorIndex::from_codes("g", &[0; 5]).unwrap();
        let data = ModelData::new(vec![1.0, 1.0, 0.0, 1.0, 0.0], Matrix::zeros(5, 0), vec![], vec![g]).unwrap();
        let fit = fit_dummy(&data, Family::Logit, &NewtonConfig::default()).unwrap();
        assert!((fit.alpha[0][0] - libm::log(1.5)).abs() < 1e-7);
        // (Z'WZ)⁻¹ = 1 / (n μ(1-μ))
        assert!((fit.vcov[(0, 0)] - 1.0 / (5.0 * 0.6 * 0.4)).abs() < 1e-7);
    }
}
