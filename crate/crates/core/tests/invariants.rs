use proptest::prelude::*;

use platform_qbd::linalg::spectral_radius;
use platform_qbd::measures::{mean_idle_owners_one, measures_two, profits};
use platform_qbd::params::{drift_alpha, drift_generator, traffic_intensity};
use platform_qbd::solver::{balance_residual, rg_factorization, solve_rate_matrix, solve_stationary};
use platform_qbd::{build_qbd, Model, ModelParams, SolverOptions};

/// Stable parameters with `rho` drawn from `(0.05, 0.95)`.
fn stable_params(max_n: usize) -> impl Strategy<Value = ModelParams> {
    (1..=max_n, 0.2f64..5.0, 0.2f64..20.0, 0.05f64..0.95).prop_map(|(n, mu, gamma, rho)| {
        let lambda = rho * n as f64 * mu * gamma / (mu + gamma);
        ModelParams::rates(lambda, mu, gamma, n).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_matrix_is_monotone_nonnegative_and_subunit(p in stable_params(6), two in any::<bool>()) {
        let model = if two { Model::Two } else { Model::One };
        let qbd = build_qbd(model, &p).unwrap();
        let sol = solve_rate_matrix(&qbd.down, &qbd.local, &qbd.up, 1e-12, 100_000).unwrap();
        prop_assert_eq!(sol.max_decrease, 0.0);
        prop_assert!(sol.r.min_entry() >= 0.0);
        prop_assert!(sol.spectral_radius < 1.0);
        prop_assert!(sol.residual < 1e-9);
    }

    #[test]
    fn g_is_stochastic_and_u_consistent(p in stable_params(5)) {
        let qbd = build_qbd(Model::One, &p).unwrap();
        let rg = rg_factorization(&qbd.down, &qbd.local, &qbd.up, &SolverOptions::default()).unwrap();
        for s in rg.g.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-8);
        }
        prop_assert!(rg.u_consistency(&qbd.down, &qbd.local, &qbd.up).unwrap() < 1e-8);
    }

    #[test]
    fn stationary_solution_normalized_and_balanced(p in stable_params(5), two in any::<bool>()) {
        let model = if two { Model::Two } else { Model::One };
        let qbd = build_qbd(model, &p).unwrap();
        let (_, sol) = solve_stationary(&qbd, model, &SolverOptions::default()).unwrap();
        prop_assert!((sol.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(sol.pi0.iter().chain(&sol.pi1).all(|v| *v >= -1e-15));
        prop_assert!(balance_residual(&qbd, &sol).unwrap() < 1e-8);
    }

    #[test]
    fn flow_balance_holds(p in stable_params(6)) {
        let opts = SolverOptions::default();
        let qbd = build_qbd(Model::One, &p).unwrap();
        let (_, sol) = solve_stationary(&qbd, Model::One, &opts).unwrap();
        let eq1 = mean_idle_owners_one(&sol, &p).unwrap();
        prop_assert!((p.mu * (p.n_owners as f64 - eq1) - p.lambda).abs() < 1e-6);

        let qbd = build_qbd(Model::Two, &p).unwrap();
        let (_, sol) = solve_stationary(&qbd, Model::Two, &opts).unwrap();
        let (eq1, eq2) = measures_two(&sol, &p).unwrap();
        let expected = p.n_owners as f64 - p.lambda / p.mu - p.lambda / p.gamma;
        prop_assert!((eq1 - expected).abs() < 1e-6);
        prop_assert!(eq2 >= 0.0);
    }

    #[test]
    fn profit_ratio_identity(n in 1usize..100, eq1_frac in 0.0f64..1.0, price in 0.0f64..100.0, d in 0.01f64..0.99) {
        let p = ModelParams::new(1.0, 1.3, 2.0, n, price, d).unwrap();
        let (f1, f2) = profits(&p, eq1_frac * n as f64);
        prop_assert!(f1 >= 0.0 && f2 >= 0.0);
        prop_assert!((n as f64 * f2 * (1.0 - d) - d * f1).abs() <= 1e-9 * (1.0 + d * f1));
    }

    #[test]
    fn drift_alpha_is_null_vector(n in 1usize..=12, mu in 0.05f64..20.0, gamma in 0.05f64..200.0) {
        let p = ModelParams::rates(1.0, mu, gamma, n).unwrap();
        let alpha = drift_alpha(&p);
        let res = drift_generator(&p).vec_mul(&alpha);
        prop_assert!(res.iter().all(|v| v.abs() < 1e-10));
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn spectral_radius_tracks_traffic_intensity() {
    for n in [1, 2, 4] {
        for rho in [0.5, 0.9, 0.99, 1.01] {
            let (mu, gamma) = (1.0, 2.0);
            let lambda = rho * n as f64 * mu * gamma / (mu + gamma);
            let p = ModelParams::rates(lambda, mu, gamma, n).unwrap();
            assert!((traffic_intensity(&p) - rho).abs() < 1e-12);
            let qbd = build_qbd(Model::One, &p).unwrap();
            match solve_rate_matrix(&qbd.down, &qbd.local, &qbd.up, 1e-12, 100_000) {
                Ok(sol) if rho < 1.0 => assert!(sol.spectral_radius < 1.0, "n {n} rho {rho}"),
                Ok(sol) => assert!(
                    sol.spectral_radius >= 1.0 - 1e-6,
                    "n {n} rho {rho}: sp {}",
                    sol.spectral_radius
                ),
                Err(e) => assert!(rho >= 1.0, "n {n} rho {rho}: {e}"),
            }
        }
    }
}

#[test]
fn spectral_radius_of_iterate_agrees_with_power_method() {
    let p = ModelParams::rates(1.0, 1.0, 2.0, 2).unwrap();
    let qbd = build_qbd(Model::One, &p).unwrap();
    let sol = solve_rate_matrix(&qbd.down, &qbd.local, &qbd.up, 1e-12, 100_000).unwrap();
    assert!(sol.residual < 1e-10);
    let r10 = sol.r.powi(64).unwrap();
    let via_powers = r10.norm_inf().powf(1.0 / 64.0);
    assert!((spectral_radius(&sol.r, 1e-13).unwrap() - via_powers).abs() < 0.05);
}
