use pdaccel::bench::generate::ProblemSpec;
use pdaccel::bench::{resolve_steps, ExperimentConfig, Instance};
use pdaccel::lyapunov::kkt_residual;
use pdaccel::rng::SeededRng;
use pdaccel::solvers::{init, run, step, AlgorithmId, Monitor, SolverError, StopRule};
use pdaccel::tuning::{stepsizes_for, theta_for, Regime, StepSizes};
use pdaccel::vecops;

fn spec(regime: Regime, seed: u64, cond: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::new(regime, 20, seed, cond);
    if regime != Regime::TwoFunction {
        spec.dim_y = Some(10);
    }
    if regime == Regime::LinearConstraint {
        spec.rank = Some(7);
    }
    spec
}

fn instance(regime: Regime, seed: u64, cond: f64) -> Instance {
    Instance::build(&spec(regime, seed, cond), 1e-12).unwrap()
}

#[test]
fn reference_is_a_fixed_point_of_every_method() {
    for regime in Regime::ALL {
        let cfg = ExperimentConfig::new(spec(regime, 3, 10.0));
        let inst = Instance::build(&cfg.problem, 1e-12).unwrap();
        let p = &inst.problem;
        let r = &inst.reference;
        for alg in AlgorithmId::applicable(p.is_primal_dual()) {
            if alg == AlgorithmId::Cp && !p.supports_fold() {
                continue;
            }
            let steps = resolve_steps(&cfg, alg, &inst.constants).unwrap().steps;
            let mut s = init(p, alg, &r.x_star, r.y_star.as_deref(), Some(&r.z_star)).unwrap();
            let mut drift = 0.0f64;
            for _ in 0..100 {
                s = step(p, alg, &steps, &s).unwrap();
                drift = drift.max(vecops::max_abs_diff(&s.x, &r.x_star));
                if let (Some(y), Some(ys)) = (&s.y, &r.y_star) {
                    drift = drift.max(vecops::max_abs_diff(y, ys));
                }
            }
            assert!(drift <= 1e-9, "{regime} {alg}: drift {drift:e}");
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = instance(Regime::NonsmoothH, 11, 30.0);
    let steps = stepsizes_for(Regime::NonsmoothH, &inst.constants).unwrap();
    let theta = theta_for(&steps, &inst.constants);
    let monitor = Monitor {
        reference: Some(&inst.reference),
        theta: Some(theta.theta),
        timing: false,
    };
    for alg in AlgorithmId::ACCELERATED_PD {
        let go = || {
            run(&inst.problem, alg, &steps, inst.start(alg).unwrap(), &StopRule::iterations(120), &monitor).unwrap()
        };
        let (sa, ta) = go();
        let (sb, tb) = go();
        assert_eq!(sa, sb);
        assert_eq!(ta, tb);
    }
}

#[test]
fn oversized_step_diverges_to_non_finite() {
    let inst = instance(Regime::TwoFunction, 5, 10.0);
    let l_f = inst.constants.l_f;
    assert!((l_f - 10.0).abs() < 1e-9);
    let steps = StepSizes::two_function(100.0 / l_f, 1.0);
    let err = run(
        &inst.problem,
        AlgorithmId::Pgd,
        &steps,
        inst.start(AlgorithmId::Pgd).unwrap(),
        &StopRule::iterations(10_000),
        &Monitor::default(),
    )
    .unwrap_err();
    match err {
        SolverError::NonFinite { iteration } => assert!(iteration <= 200, "{iteration}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn acv1_solves_smooth_instance() {
    let inst = instance(Regime::SmoothH, 2, 4.0);
    let steps = stepsizes_for(Regime::SmoothH, &inst.constants).unwrap();
    let (s, _) = run(
        &inst.problem,
        AlgorithmId::Acv1,
        &steps,
        inst.start(AlgorithmId::Acv1).unwrap(),
        &StopRule::iterations(300),
        &Monitor::default(),
    )
    .unwrap();
    let kkt = kkt_residual(&inst.problem, &s);
    assert!(kkt <= 1e-8, "kkt {kkt:e}");
}

/// With a huge eta_z and z0 = x^{-1}, the accelerated reflected methods track
/// their unaccelerated counterparts.
#[test]
fn large_eta_z_approaches_reflected_baselines() {
    let cases = [
        (Regime::TwoFunction, AlgorithmId::Apge, AlgorithmId::Frb),
        (Regime::SmoothH, AlgorithmId::Apdtr1, AlgorithmId::Pdtr1),
        (Regime::SmoothH, AlgorithmId::Apdtr2, AlgorithmId::Pdtr2),
    ];
    for (regime, acc, base) in cases {
        let inst = instance(regime, 8, 4.0);
        let p = &inst.problem;
        let c = &inst.constants;
        let steps = match regime {
            Regime::TwoFunction => StepSizes::two_function(0.25 / c.l_f, 1e8),
            _ => StepSizes::primal_dual(0.25 / (c.l_f + c.k_norm), 0.25 / c.k_norm, 1e8, regime),
        };
        let mut rng = SeededRng::new(99);
        let x_prev = rng.vector(p.dim_x());
        let y0 = inst.y0.as_deref();
        let mut sa = init(p, acc, &inst.x0, y0, Some(&x_prev)).unwrap();
        let mut sb = init(p, base, &inst.x0, y0, Some(&x_prev)).unwrap();
        let mut gap = 0.0f64;
        for _ in 0..30 {
            sa = step(p, acc, &steps, &sa).unwrap();
            sb = step(p, base, &steps, &sb).unwrap();
            gap = gap.max(vecops::max_abs_diff(&sa.x, &sb.x));
        }
        assert!(gap <= 1e-6, "{acc} vs {base}: {gap:e}");
    }
}

#[test]
fn unit_eta_z_from_z0_equals_x0_matches_plain_methods() {
    let cases = [
        (Regime::TwoFunction, AlgorithmId::Apgd, AlgorithmId::Pgd),
        (Regime::NonsmoothH, AlgorithmId::Acv1, AlgorithmId::Cv1),
        (Regime::NonsmoothH, AlgorithmId::Acv2, AlgorithmId::Cv2),
    ];
    for (regime, acc, base) in cases {
        let inst = instance(regime, 4, 12.0);
        let p = &inst.problem;
        let c = &inst.constants;
        let steps = match regime {
            Regime::TwoFunction => StepSizes::two_function(1.0 / c.l_f, 1.0),
            _ => StepSizes::primal_dual(1.0 / (c.l_f + c.k_norm), 1.0 / c.k_norm, 1.0, regime),
        };
        let gap = pdaccel::bench::commands::reduction_gap(p, acc, base, &steps, &inst.x0, inst.y0.as_deref(), 80)
            .unwrap();
        assert!(gap <= 1e-12, "{acc} vs {base}: {gap:e}");
    }
}
