//! Categorical columns compiled into group structure, and the estimation input.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::families::Family;
use crate::linalg::{Cholesky, Matrix, PIVOT_TOL};

/// A categorical variable with levels numbered by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorIndex {
    name: String,
    level_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl FactorIndex {
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, raw: &[S]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyFactor);
        }
        let mut lookup: BTreeMap<&str, usize> = BTreeMap::new();
        let mut level_of = Vec::with_capacity(raw.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut labels = Vec::new();
        for (i, label) in raw.iter().enumerate() {
            let label = label.as_ref();
            let next = members.len();
            let id = *lookup.entry(label).or_insert_with(|| {
                labels.push(label.to_string());
                members.push(Vec::new());
                next
            });
            level_of.push(id);
            members[id].push(i);
        }
        Ok(FactorIndex { name: name.into(), level_of, members, labels })
    }

    /// Builds an index from integer codes; labels are the decimal codes.
    pub fn from_codes(name: impl Into<String>, codes: &[usize]) -> Result<Self> {
        let raw: Vec<String> = codes.iter().map(|c| c.to_string()).collect();
        Self::from_labels(name, &raw)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level_count(&self) -> usize {
        self.members.len()
    }

    pub fn n_obs(&self) -> usize {
        self.level_of.len()
    }

    #[inline]
    pub fn level_of(&self) -> &[usize] {
        &self.level_of
    }

    pub fn members_of(&self, level: usize) -> &[usize] {
        &self.members[level]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Per-level `Σ w_j v_j` and `Σ w_j`, accumulated in observation order.
    pub fn group_sums(&self, v: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.n_obs(), v.len())?;
        check_len(self.n_obs(), w.len())?;
        let mut sums = vec![0.0; self.level_count()];
        let mut weights = vec![0.0; self.level_count()];
        for ((&g, &vi), &wi) in self.level_of.iter().zip(v).zip(w) {
            sums[g] += wi * vi;
            weights[g] += wi;
        }
        Ok((sums, weights))
    }

    /// Per-level unweighted sums.
    pub(crate) fn sums(&self, v: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.level_count()];
        for (&g, &vi) in self.level_of.iter().zip(v) {
            sums[g] += vi;
        }
        sums
    }

    /// Restricts to the observations in `keep` (ascending), renumbering levels
    /// by first appearance among the kept rows.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let raw: Vec<&str> = keep.iter().map(|&i| self.labels[self.level_of[i]].as_str()).collect();
        Self::from_labels(self.name.clone(), &raw)
    }
}

/// Estimation input: response, regressors and fixed-effect categories.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub y: Vec<f64>,
    pub x: Matrix,
    pub factors: Vec<FactorIndex>,
    pub column_names: Vec<String>,
}

/// A level whose observations all sit at a boundary response value.
#[derive(Debug, Clone, PartialEq)]
pub struct NoncontributingGroup {
    pub category: String,
    pub label: String,
    pub n_obs: usize,
}

impl ModelData {
    /// Validates dimensions and the column rank of `x`.
    pub fn new(y: Vec<f64>, x: Matrix, column_names: Vec<String>, factors: Vec<FactorIndex>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("no observations".into()));
        }
        if factors.is_empty() {
            return Err(Error::InvalidInput("at least one fixed-effect category is required".into()));
        }
        check_len(n, x.nrows())?;
        check_len(x.ncols(), column_names.len())?;
        for f in &factors {
            check_len(n, f.n_obs())?;
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response at observation {i}")));
        }
        for (j, c) in x.columns().enumerate() {
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite value in `{}` at observation {i}", column_names[j])));
            }
        }
        check_full_rank(&x, &column_names)?;
        Ok(ModelData { y, x, factors, column_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.factors.iter().map(FactorIndex::level_count).collect()
    }

    /// Rows restricted to `keep` (ascending observation ids).
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let y = keep.iter().map(|&i| self.y[i]).collect();
        let cols: Vec<Vec<f64>> = self.x.columns().map(|c| keep.iter().map(|&i| c[i]).collect()).collect();
        let x = Matrix::from_columns(keep.len(), &cols);
        let factors = self.factors.iter().map(|f| f.subset(keep)).collect::<Result<Vec<_>>>()?;
        ModelData::new(y, x, self.column_names.clone(), factors)
    }

    /// Levels whose responses are all at a boundary value (all 0 or all 1 for
    /// logit, all 0 for poisson); their fixed effects diverge and the rows do
    /// not contribute to the log-likelihood of the remaining parameters.
    pub fn noncontributing_groups(&self, family: Family) -> Vec<NoncontributingGroup> {
        let mut out = Vec::new();
        for f in &self.factors {
            for level in 0..f.level_count() {
                let rows = f.members_of(level);
                let first = self.y[rows[0]];
                if family.is_boundary_response(first) && rows.iter().all(|&i| self.y[i] == first) {
                    out.push(NoncontributingGroup { category: f.name().to_string(), label: f.labels()[level].clone(), n_obs: rows.len() });
                }
            }
        }
        out
    }

    /// Original row ids left after repeatedly removing non-contributing
    /// groups, and the groups removed, in removal order.
    pub fn contributing_rows(&self, family: Family) -> Result<(Vec<usize>, Vec<NoncontributingGroup>)> {
        let mut active = vec![true; self.n()];
        let mut dropped = Vec::new();
        loop {
            let mut newly = Vec::new();
            for f in &self.factors {
                for level in 0..f.level_count() {
                    let mut rows = f.members_of(level).iter().copied().filter(|&i| active[i]).peekable();
                    let Some(&head) = rows.peek() else { continue };
                    let first = self.y[head];
                    let rows: Vec<usize> = rows.collect();
                    if family.is_boundary_response(first) && rows.iter().all(|&i| self.y[i] == first) {
                        dropped.push(NoncontributingGroup { category: f.name().to_string(), label: f.labels()[level].clone(), n_obs: rows.len() });
                        newly.extend(rows);
                    }
                }
            }
            if newly.is_empty() {
                let keep: Vec<usize> = (0..self.n()).filter(|&i| active[i]).collect();
                return Ok((keep, dropped));
            }
            newly.into_iter().for_each(|i| active[i] = false);
            if !active.iter().any(|&a| a) {
                return Err(Error::InvalidInput("every observation belongs to a non-contributing group".into()));
            }
        }
    }

    /// Repeatedly removes non-contributing groups until none remain.
    pub fn drop_noncontributing(&self, family: Family) -> Result<(Self, Vec<NoncontributingGroup>)> {
        let (keep, dropped) = self.contributing_rows(family)?;
        let data = if keep.len() == self.n() { self.clone() } else { self.subset(&keep)? };
        Ok((data, dropped))
    }
}

fn check_full_rank(x: &Matrix, names: &[String]) -> Result<()> {
    if x.ncols() == 0 {
        return Ok(());
    }
    let mut gram = x.gram();
    let d: Vec<f64> = gram.diag().iter().map(|v| libm::sqrt(*v)).collect();
    if let Some(j) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::RankDeficient { column: names[j].clone() });
    }
    // condition check on the correlation-scaled Gram matrix
    for a in 0..x.ncols() {
        for b in 0..x.ncols() {
            gram[(a, b)] /= d[a] * d[b];
        }
    }
    Cholesky::factor(&gram, PIVOT_TOL).map(|_| ()).map_err(|j| Error::RankDeficient { column: names[j].clone() })
}
