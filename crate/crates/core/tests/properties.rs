use pdaccel::bench::generate::ProblemSpec;
use pdaccel::bench::ExperimentConfig;
use pdaccel::funcs::FunctionHandle;
use pdaccel::linops::LinearMap;
use pdaccel::rng::SeededRng;
use pdaccel::tuning::{check_feasible, stepsizes_for, theta_smooth, theta_two_function, Constants, Regime, StepSizes};
use pdaccel::vecops;
use proptest::prelude::*;

fn seeded_vec(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    vecops::scale(scale, &SeededRng::new(seed).vector(n))
}

/// One function per kind, parameters drawn from `seed`.
fn any_function(kind: usize, n: usize, seed: u64) -> FunctionHandle {
    let mut rng = SeededRng::new(seed);
    match kind % 7 {
        0 => {
            let a = LinearMap::random(n + 1, n, &mut rng);
            FunctionHandle::least_squares(&a, &rng.vector(n + 1)).unwrap()
        }
        1 => FunctionHandle::scaled_sq_norm(rng.uniform(0.1, 4.0), rng.vector(n)).unwrap(),
        2 => FunctionHandle::l1(rng.uniform(0.0, 2.0), n).unwrap(),
        3 => FunctionHandle::elastic_reg(rng.uniform(0.1, 4.0), rng.uniform(0.0, 2.0), n).unwrap(),
        4 => FunctionHandle::indicator_point(rng.vector(n)),
        5 => FunctionHandle::linear(rng.vector(n)),
        _ => FunctionHandle::zero(n),
    }
}

fn smooth_function(kind: usize, n: usize, seed: u64) -> FunctionHandle {
    any_function([0, 1, 5, 6][kind % 4], n, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn adjoint_identity(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let k = LinearMap::random(rows, cols, &mut rng);
        let x = rng.vector(cols);
        let y = rng.vector(rows);
        let lhs = vecops::dot(&k.apply(&x).unwrap(), &y);
        let rhs = vecops::dot(&x, &k.apply_adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bregman_between_gradient_and_distance_bounds(kind in 0usize..4, seed in any::<u64>()) {
        let n = 4;
        let f = smooth_function(kind, n, seed);
        let prof = f.profile().unwrap();
        let x = seeded_vec(seed ^ 1, n, 3.0);
        let y = seeded_vec(seed ^ 2, n, 3.0);
        let d = f.bregman(&x, &y).unwrap();
        let gd = vecops::norm_sq(&f.gradient_difference(&x, &y).unwrap());
        let dist = vecops::norm_sq(&vecops::sub(&x, &y));
        let tol = 1e-10 * (1.0 + d.abs() + gd + dist);
        if prof.l > 0.0 {
            prop_assert!(gd / (2.0 * prof.l) <= d + tol);
        }
        prop_assert!(d <= prof.l / 2.0 * dist + tol);
        if prof.mu > 0.0 {
            prop_assert!(prof.mu / 2.0 * dist <= d + tol);
            prop_assert!(d <= gd / (2.0 * prof.mu) + tol);
        }
    }

    #[test]
    fn prox_is_firmly_nonexpansive(kind in 0usize..7, seed in any::<u64>(), gamma in 0.01f64..10.0) {
        let n = 3;
        let f = any_function(kind, n, seed);
        let u = seeded_vec(seed ^ 3, n, 4.0);
        let v = seeded_vec(seed ^ 4, n, 4.0);
        let pu = f.prox(gamma, &u).unwrap();
        let pv = f.prox(gamma, &v).unwrap();
        let dp = vecops::sub(&pu, &pv);
        let lhs = vecops::norm_sq(&dp);
        let rhs = vecops::dot(&dp, &vecops::sub(&u, &v));
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn prox_output_is_optimal(kind in 0usize..7, seed in any::<u64>(), gamma in 0.01f64..10.0) {
        // (v - p) / gamma must be a subgradient of F at p.
        let n = 3;
        let f = any_function(kind, n, seed);
        let v = seeded_vec(seed ^ 5, n, 4.0);
        let p = f.prox(gamma, &v).unwrap();
        let u = vecops::scale(1.0 / gamma, &vecops::sub(&v, &p));
        let d = f.subgradient_distance(&p, &u).unwrap();
        prop_assert!(d <= 1e-9 * (1.0 + vecops::norm(&u)), "distance {d}");
    }

    #[test]
    fn moreau_decomposition(kind in 0usize..7, seed in any::<u64>(), gamma in 0.01f64..10.0) {
        let n = 3;
        let f = any_function(kind, n, seed);
        let v = seeded_vec(seed ^ 6, n, 4.0);
        let p = f.prox(gamma, &v).unwrap();
        let c = f.prox_conjugate(1.0 / gamma, &vecops::scale(1.0 / gamma, &v)).unwrap();
        let back = vecops::lincomb(1.0, &p, gamma, &c);
        prop_assert!(vecops::max_abs_diff(&back, &v) <= 1e-10 * (1.0 + vecops::norm_inf(&v)));
    }

    #[test]
    fn theta_decreases_with_strong_convexity(
        eta_x in 1e-3f64..10.0, eta_z in 1e-3f64..10.0, mu in 1e-3f64..10.0, bump in 1.01f64..10.0,
    ) {
        let s = StepSizes::two_function(eta_x, eta_z);
        let a = theta_two_function(&s, mu).theta;
        let b = theta_two_function(&s, mu * bump).theta;
        prop_assert!(b <= a);
        prop_assert!(a < 1.0 && a > 0.0);
        let p = StepSizes::primal_dual(eta_x, 1.0, eta_z, Regime::SmoothH);
        prop_assert!(theta_smooth(&p, mu * bump, 1.0).theta <= theta_smooth(&p, mu, 1.0).theta);
        prop_assert!(theta_smooth(&p, mu, bump).theta <= theta_smooth(&p, mu, 1.0).theta);
    }

    #[test]
    fn default_stepsizes_are_feasible(
        regime_idx in 0usize..4,
        l_f in 1e-3f64..1e3,
        mu_g in 1e-3f64..1e3,
        l_g_extra in 0.0f64..1e3,
        k_norm in 1e-2f64..1e2,
        lam_frac in 1e-4f64..1.0,
        mu_hstar in 1e-3f64..1e3,
    ) {
        let regime = Regime::ALL[regime_idx];
        let lam = lam_frac * k_norm * k_norm;
        let c = Constants {
            l_f,
            mu_f: 0.0,
            mu_g,
            l_g: Some(mu_g + l_g_extra),
            mu_hstar: if regime == Regime::SmoothH { mu_hstar } else { 0.0 },
            k_norm: if regime == Regime::TwoFunction { 0.0 } else { k_norm },
            lambda_min: if regime == Regime::NonsmoothH { lam } else { 0.0 },
            lambda_min_pos: if regime == Regime::TwoFunction { None } else { Some(lam) },
        };
        let s = stepsizes_for(regime, &c).unwrap();
        prop_assert!(check_feasible(&s, &c).is_ok(), "{regime}: {s:?} for {c:?}");
    }

    #[test]
    fn config_round_trip(regime_idx in 0usize..4, dim in 2usize..40, seed in any::<u64>(), cond in 1.0f64..1e4) {
        let regime = Regime::ALL[regime_idx];
        let mut spec = ProblemSpec::new(regime, dim, seed, cond);
        if regime == Regime::LinearConstraint {
            spec.rank = Some(1);
        }
        let cfg = ExperimentConfig::new(spec);
        let text = cfg.emit();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }
}
