mod common;

use common::*;
use hdfe_core::{beta_update, eta_update, fit, fit_dummy, fit_observed, simulate_two_way_logit, vcov_hessian, ApConfig, DgpConfig, Design, FactorIndex, Family, Matrix, ModelData, NewtonConfig};

fn prepared(data: ModelData, family: Family) -> ModelData {
    data.drop_noncontributing(family).unwrap().0
}

#[test]
fn beta_update_matches_exact_normal_equations() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3).map(|j| random_vec(&mut r, n).iter().map(|v| v * (1.0 + j as f64)).collect()).collect();
        let x = Matrix::from_columns(n, &cols);
        let nu = random_vec(&mut r, n);
        let got = beta_update(&x, &nu).unwrap();

        let bx = big_matrix(&x);
        let bxt = big_transpose(&bx);
        let bnu: Vec<Vec<Big>> = nu.iter().map(|v| vec![big(*v)]).collect();
        let exact = big_mul(&big_inverse(&big_mul(&bxt, &bx)), &big_mul(&bxt, &bnu));
        for j in 0..3 {
            let e = small(&exact[j][0]);
            assert!((got[j] - e).abs() <= 1e-10 * (1.0 + e.abs()), "seed {seed} j {j}: {} vs {e}", got[j]);
        }
    }
}

/// Checks every Newton iteration against a dense solve of the full weighted
/// system `[D̃ X̃]` at the same linear predictor.
fn check_against_full_system(data: &ModelData, family: Family) -> usize {
    let ap = ApConfig::with_tolerance(1e-8);
    let mut checked = 0;
    fit_observed(data, family, &ap, &NewtonConfig::default(), |view| {
        let st = view.state;
        let s = &st.sqrt_w;
        let n = s.len();
        let d_cols = dummy_columns(&data.factors, s);
        let mut z_cols = d_cols.clone();
        for j in 0..data.p() {
            z_cols.push(st.x_tilde.col(j).to_vec());
        }
        let q_z = orthonormal_basis(&z_cols);
        let q_d = orthonormal_basis(&d_cols);
        let full_residual = residual_off(&q_z, view.target_tilde);

        // projected-system residual ν̈ - ẍΔβ
        let xb = view.demeaned.x.mul_vec(view.delta_beta);
        let projected: Vec<f64> = view.demeaned.nu.iter().zip(&xb).map(|(a, b)| a - b).collect();
        let err = max_abs_diff(&full_residual, &projected);
        assert!(err <= 1e-6, "iteration {}: residuals differ by {err}", view.iteration);

        // Δβ by exact partialling out
        let xdd: Vec<Vec<f64>> = (0..data.p()).map(|j| residual_off(&q_d, st.x_tilde.col(j))).collect();
        let nudd = residual_off(&q_d, view.target_tilde);
        let gram: Vec<Vec<f64>> = xdd.iter().map(|a| xdd.iter().map(|b| a.iter().zip(b).map(|(u, v)| u * v).sum()).collect()).collect();
        let rhs: Vec<f64> = xdd.iter().map(|a| a.iter().zip(&nudd).map(|(u, v)| u * v).sum()).collect();
        let db = dense_solve(gram, rhs);
        assert!(max_abs_diff(&db, view.delta_beta) <= 1e-6, "iteration {}: Δβ", view.iteration);

        // updated linear predictor: base + W̃⁻¹ Z̃Δγ
        let oracle_eta: Vec<f64> = (0..n).map(|i| view.base_eta[i] + (view.target_tilde[i] - full_residual[i]) / s[i]).collect();
        if view.base_eta == st.eta.as_slice() {
            let eta = eta_update(st, &view.demeaned.nu, &view.demeaned.x, view.delta_beta).unwrap();
            let err = max_abs_diff(&eta, &oracle_eta);
            assert!(err <= 1e-6, "iteration {}: eta differs by {err}", view.iteration);
        }
        checked += 1;
    })
    .unwrap();
    checked
}

#[test]
fn residual_equivalence_logit_two_way() {
    let data = prepared(logit_panel(21, 40, 5, 2), Family::Logit);
    assert!(data.n() > 150);
    assert!(check_against_full_system(&data, Family::Logit) >= 3);
}

#[test]
fn residual_equivalence_poisson_three_way() {
    let cfg = DgpConfig { n_units: 5, n_periods: 3, ..DgpConfig::desk(Design::ThreeWayPpml, 4) };
    let data = hdfe_core::simulate(&cfg).unwrap();
    assert!(check_against_full_system(&data, Family::Poisson) >= 3);
}

#[test]
fn one_way_update_is_the_weighted_group_mean_step() {
    // one-way IRLS step computed directly: η_i += Σ_g w ν / Σ_g w
    let g = FactorIndex::from_codes("g", &[0, 1, 1, 2, 0, 2, 1]).unwrap();
    let y = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
    let data = ModelData::new(y.clone(), Matrix::zeros(7, 0), vec![], vec![g.clone()]).unwrap();
    let ap = ApConfig::default();
    let mut seen = false;
    fit_observed(&data, Family::Logit, &ap, &NewtonConfig::default(), |view| {
        if view.iteration != 2 {
            return;
        }
        let st = view.state;
        let eta = eta_update(st, &view.demeaned.nu, &view.demeaned.x, &[]).unwrap();
        for i in 0..7 {
            let lv = g.level_of()[i];
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..7 {
                if g.level_of()[j] == lv {
                    num += st.w[j] * st.nu[j];
                    den += st.w[j];
                }
            }
            assert!((eta[i] - (st.eta[i] + num / den)).abs() < 1e-12);
        }
        seen = true;
    })
    .unwrap();
    assert!(seen);
}

#[test]
fn loglik_never_decreases_and_gradient_vanishes() {
    for (seed, family) in [(3, Family::Logit), (8, Family::Poisson)] {
        let data = match family {
            Family::Logit => prepared(logit_panel(seed, 30, 8, 3), family),
            Family::Poisson => hdfe_core::simulate(&DgpConfig { n_units: 6, n_periods: 4, ..DgpConfig::desk(Design::ThreeWayPpml, seed) }).unwrap(),
        };
        let mut lls = Vec::new();
        let fit = fit_observed(&data, family, &ApConfig::with_tolerance(1e-8), &NewtonConfig::default(), |v| lls.push(v.state.loglik)).unwrap();
        lls.push(fit.loglik);
        // the poisson start value is not in the model space, skip it
        let from = if family == Family::Poisson { 1 } else { 0 };
        for w in lls[from..].windows(2) {
            assert!(w[1] >= w[0], "{family:?}: {} then {}", w[0], w[1]);
        }
        let grad = inf_norm(&fit.concentrated_gradient());
        let info = fit.concentrated_information().norm_inf();
        assert!(grad <= 1e-8 * (1.0 + info), "{family:?}: gradient {grad}, information {info}");
    }
}

#[test]
fn invariant_to_level_relabeling_and_row_order() {
    let data = prepared(logit_panel(12, 30, 6, 2), Family::Logit);
    let ap = ApConfig::with_tolerance(1e-13);
    let base = fit(&data, Family::Logit, &ap, &NewtonConfig::default()).unwrap();

    // relabel levels through a random permutation of label strings
    let relabeled: Vec<FactorIndex> = data
        .factors
        .iter()
        .map(|f| {
            let m = f.level_count();
            let perm: Vec<usize> = (0..m).map(|l| (l * 7 + 3) % m).collect();
            let raw: Vec<String> = f.level_of().iter().map(|&l| format!("L{}", perm[l])).collect();
            FactorIndex::from_labels(f.name(), &raw).unwrap()
        })
        .collect();
    let d2 = ModelData::new(data.y.clone(), data.x.clone(), data.column_names.clone(), relabeled).unwrap();
    let f2 = fit(&d2, Family::Logit, &ap, &NewtonConfig::default()).unwrap();
    assert_eq!(f2.beta, base.beta);

    // reverse row order, which renumbers every level
    let n = data.n();
    let rev: Vec<usize> = (0..n).rev().collect();
    let d3 = ModelData::new(
        rev.iter().map(|&i| data.y[i]).collect(),
        Matrix::from_columns(n, &(0..data.p()).map(|j| rev.iter().map(|&i| data.x[(i, j)]).collect()).collect::<Vec<_>>()),
        data.column_names.clone(),
        data.factors.iter().map(|f| f.subset(&rev).unwrap()).collect(),
    )
    .unwrap();
    let f3 = fit(&d3, Family::Logit, &ap, &NewtonConfig::default()).unwrap();
    for (a, b) in f3.beta.iter().zip(&base.beta) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn scale_equivariance() {
    let data = prepared(logit_panel(31, 25, 6, 3), Family::Logit);
    let ap = ApConfig::with_tolerance(1e-10);
    let base = fit(&data, Family::Logit, &ap, &NewtonConfig::default()).unwrap();
    let c = 7.5;
    let mut x = data.x.clone();
    for v in x.col_mut(1) {
        *v *= c;
    }
    let scaled = ModelData { x, ..data.clone() };
    let f = fit(&scaled, Family::Logit, &ap, &NewtonConfig::default()).unwrap();
    assert!((f.beta[1] - base.beta[1] / c).abs() <= 1e-8);
    assert!((f.beta[0] - base.beta[0]).abs() <= 1e-8);
    assert!(max_abs_diff(&f.eta, &base.eta) <= 1e-8);
}

#[test]
fn logit_250_by_50_agrees_with_dummy_oracle_at_every_tolerance() {
    let cfg = DgpConfig { n_units: 250, n_periods: 50, ..DgpConfig::desk(Design::TwoWayLogit, 2024) };
    let data = prepared(simulate_two_way_logit(&cfg).unwrap(), Family::Logit);
    let newton = NewtonConfig::default();
    let oracle = fit_dummy(&data, Family::Logit, &newton).unwrap();
    let oracle_se = oracle.beta_std_errors();
    for tol in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
        let f = fit(&data, Family::Logit, &ApConfig::with_tolerance(tol), &newton).unwrap();
        for j in 0..3 {
            assert!(hdfe_core::digits_agree(f.beta[j], oracle.beta[j], 5), "tol {tol} beta{j}: {} vs {}", f.beta[j], oracle.beta[j]);
        }
        if tol <= 1e-5 {
            let se = vcov_hessian(&f.x_dd).unwrap().std_errors();
            assert!(hdfe_core::digits_agree(se[0], oracle_se[0], 5), "tol {tol} se: {} vs {}", se[0], oracle_se[0]);
        }
    }
}

#[test]
fn same_optimum_as_dummy_oracle() {
    let data = prepared(logit_panel(44, 20, 6, 2), Family::Logit);
    let ap = ApConfig::with_tolerance(1e-10);
    let newton = NewtonConfig::default();
    let main = fit(&data, Family::Logit, &ap, &newton).unwrap();
    let oracle = fit_dummy(&data, Family::Logit, &newton).unwrap();
    let slack = 1e-8 * (1.0 + main.loglik.abs());
    assert!(oracle.loglik >= main.loglik - slack && main.loglik >= oracle.loglik - slack);
    let v = vcov_hessian(&main.x_dd).unwrap();
    let vb = oracle.beta_vcov();
    for a in 0..2 {
        for b in 0..2 {
            assert!(hdfe_core::digits_agree(v.matrix[(a, b)], vb[(a, b)], 5), "{a},{b}: {} vs {}", v.matrix[(a, b)], vb[(a, b)]);
        }
    }
}
