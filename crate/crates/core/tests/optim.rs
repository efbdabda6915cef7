use proptest::prelude::*;
use relu_core::optim::*;
use relu_core::rng::seeded;

fn run(obj: &dyn Objective, alg: &Algorithm, x1: &[f64], steps: u64) -> OptimRun {
    let mut o = Oracle::new(obj, OracleKind::Exact, 0);
    optimize(
        obj,
        &mut o,
        alg,
        x1,
        &RunOptions {
            max_iterates: steps,
            keep_trajectory: true,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn nag_with_zero_momentum_is_gradient_descent() {
    let q = Quadratic::on_box(vec![1.0, 3.0], 5.0);
    let mut s = NagState::new(vec![2.0, -1.0]);
    let g = q.gradient(&s.x);
    nag_step(&mut s, &g, 0.1, 0.0);
    assert_eq!(s.x, vec![2.0 - 0.2, -1.0 + 0.3]);
}

#[test]
fn nag_beats_gradient_descent_on_ill_conditioned_quadratic() {
    let q = Quadratic::on_box(vec![0.01, 1.0], 10.0);
    let x1 = [5.0, 5.0];
    let eps = 1e-4;
    let steps = |mu: f64| {
        let mut o = Oracle::new(&q, OracleKind::Exact, 0);
        optimize(
            &q,
            &mut o,
            &Algorithm::Nag { alpha: 0.5, mu },
            &x1,
            &RunOptions {
                max_iterates: 100_000,
                stop_eps: Some(eps),
                ..Default::default()
            },
        )
        .unwrap()
        .t_reached
        .unwrap()
    };
    let (gd, nag) = (steps(0.0), steps(0.9));
    assert!(nag < gd, "nag {nag} vs gd {gd}");
}

#[test]
fn adam_bias_correction_tends_to_alpha() {
    let a = adam_default_alpha(0.01, 0.9, 0.999, 200_000);
    assert!((a - 0.01).abs() < 1e-12);
}

#[test]
fn adam_without_momentum_matches_additive_rmsprop() {
    let obj = PseudoHuberCos::new(4, 0.3).unwrap();
    let x1 = [1.5, -0.7, 2.2, 0.1];
    let schedule = StepSchedule::Constant { alpha: 0.05 };
    let adam = Algorithm::Adam {
        schedule,
        beta1: 0.0,
        beta2: 0.95,
        xi: 0.5,
    };
    let rms = Algorithm::RmsProp {
        schedule,
        beta2: 0.95,
        xi: 0.5,
        placement: XiPlacement::InDenominator,
    };
    let [a, b] = trajectories(&obj, [&adam, &rms], &x1, 300).unwrap();
    assert_eq!(a.len(), b.len());
    for (p, q) in a.iter().zip(&b) {
        for (u, v) in p.iter().zip(q) {
            assert!((u - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn accumulator_floor_holds_along_a_run() {
    let obj = PseudoHuberCos::new(3, 0.1).unwrap();
    let alg = Algorithm::RmsProp {
        schedule: StepSchedule::Constant { alpha: 0.01 },
        beta2: 0.8,
        xi: 0.3,
        placement: XiPlacement::InAccumulator,
    };
    let r = run(&obj, &alg, &[2.0, -1.0, 0.5], 2000);
    assert_eq!(r.accumulator_violations, 0);
}

#[test]
fn constrained_noise_moments() {
    let model = NoiseModel::new(3.0, 0.5, NoiseFamily::Gaussian).unwrap();
    let mut rng = seeded(11, 0);
    assert_eq!(model.sample(0.0, &mut rng), 0.0);
    for family in [NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::Mixture] {
        let model = NoiseModel::new(3.0, 0.5, family).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| model.sample(0.3, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.3).abs() <= 3.0 * (var / n as f64).sqrt(), "{family:?} mean {mean}");

        let sq: Vec<f64> = (0..n).map(|_| model.sample(2.0, &mut rng).powi(2)).collect();
        let m2 = sq.iter().sum::<f64>() / n as f64;
        let v2 = sq.iter().map(|s| (s - m2).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(m2 <= 3.0 * 4.0 + 3.0 * (v2 / n as f64).sqrt(), "{family:?} E[g²] {m2}");
    }
    let sigma: f64 = 0.4;
    assert!((model.implied_alpha(sigma) - (3.0 * 0.5 + 9.0 * sigma * sigma).sqrt()).abs() < 1e-15);
}

#[test]
fn constrained_noise_rejects_small_beta() {
    assert!(NoiseModel::new(1.0, 0.0, NoiseFamily::Gaussian).is_err());
}

#[test]
fn sign_constrained_oracle_flags_disagreement() {
    struct Opposed;
    impl Objective for Opposed {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn gradient(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
        fn constants(&self) -> ObjectiveConstants {
            ObjectiveConstants {
                smoothness: 1.0,
                grad_norm_bound: 1.0,
                grad_coord_bound: 1.0,
                component_grad_norm_bound: Some(1.0),
                f_star: Some(0.0),
                value_bounds: None,
            }
        }
        fn num_components(&self) -> usize {
            2
        }
        fn component_gradient(&self, p: usize, _: &[f64]) -> Vec<f64> {
            vec![if p == 0 { 1.0 } else { -1.0 }]
        }
    }
    let mut o = Oracle::new(&Opposed, OracleKind::SignConstrainedFiniteSum, 1);
    assert!(matches!(
        o.query(&[0.0]),
        Err(OptimError::SignViolation { coordinate: 0, .. })
    ));
}

#[test]
fn finite_sum_oracle_is_unbiased() {
    let obj = SignConstrainedSum::new(vec![vec![1.0, 2.0], vec![3.0, 0.5]], 0.2).unwrap();
    let mut o = Oracle::new(&obj, OracleKind::FiniteSumUniform, 5);
    let x = [0.7, -1.1];
    let n = 40_000;
    let mut acc = [0.0; 2];
    for _ in 0..n {
        let g = o.query(&x).unwrap();
        acc[0] += g[0];
        acc[1] += g[1];
    }
    let full = obj.gradient(&x);
    for i in 0..2 {
        let spread = (obj.component_gradient(0, &x)[i] - obj.component_gradient(1, &x)[i]).abs();
        let stderr = 0.5 * spread / (n as f64).sqrt();
        assert!((acc[i] / n as f64 - full[i]).abs() <= 4.0 * stderr);
    }
}

#[test]
fn validate_accepts_true_constants() {
    let q = Quadratic {
        diag: vec![1.0],
        declared_smoothness: 1.0,
        declared_grad_bound: 2.0,
    };
    let r = validate_objective(&q, (-2.0, 2.0), 500, 3);
    assert!(r.passed, "{r:?}");
    for obj in [
        Box::new(PseudoHuberCos::new(5, 0.1).unwrap()) as Box<dyn Objective>,
        Box::new(GaussianWell { d: 3 }),
        Box::new(LogValley::new(4, 100.0).unwrap()),
        Box::new(SignConstrainedSum::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]], 0.1).unwrap()),
    ] {
        let r = validate_objective(obj.as_ref(), (-6.0, 6.0), 2000, 9);
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn validate_catches_understated_smoothness() {
    let q = Quadratic {
        diag: vec![1.0],
        declared_smoothness: 0.5,
        declared_grad_bound: 2.0,
    };
    let r = validate_objective(&q, (-2.0, 2.0), 200, 3);
    assert!(!r.smoothness_ok);
    let (x, y) = r.smoothness_witness.expect("witness pair");
    let h = y[0] - x[0];
    let gap = (q.value(&y) - q.value(&x) - q.gradient(&x)[0] * h).abs();
    assert!(gap > 0.25 * h * h);
}

#[test]
fn validate_catches_flipped_gradient() {
    struct Flipped(Quadratic);
    impl Objective for Flipped {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.0.value(x)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            self.0.gradient(x).into_iter().map(|g| -g).collect()
        }
        fn constants(&self) -> ObjectiveConstants {
            self.0.constants()
        }
    }
    let f = Flipped(Quadratic::on_box(vec![1.0, 2.0], 3.0));
    let r = validate_objective(&f, (-3.0, 3.0), 100, 1);
    assert!(!r.finite_difference_ok);
    assert!(r.gradient_witness.is_some());
}

#[test]
fn theorem_modes_pass_immediately_when_start_is_critical() {
    let obj = PseudoHuberCos::new(3, 0.1).unwrap();
    let x1 = [0.01, 0.0, -0.01];
    for th in [Theorem::RmsPropDet, Theorem::AdamDet] {
        let r = verify_convergence(th, &obj, OracleKind::Exact, &x1, 0.5, &HarnessConfig::default())
            .unwrap();
        assert_eq!(r.t_reached, Some(1));
        assert!(r.passed);
    }
    let g = GaussianWell { d: 2 };
    let r = verify_convergence(
        Theorem::RmsPropNoXi,
        &g,
        OracleKind::Exact,
        &[0.0, 0.01],
        0.5,
        &HarnessConfig::default(),
    )
    .unwrap();
    assert_eq!(r.t_reached, Some(1));
}

#[test]
fn harness_rejects_mismatched_oracle() {
    let obj = PseudoHuberCos::new(2, 0.1).unwrap();
    let r = verify_convergence(
        Theorem::RmsPropSign,
        &obj,
        OracleKind::Exact,
        &[1.0, 1.0],
        0.1,
        &HarnessConfig::default(),
    );
    assert!(matches!(r, Err(OptimError::OracleMismatch(_))));
}

#[test]
fn harness_aborts_on_understated_gradient_bound() {
    let q = Quadratic {
        diag: vec![1.0, 1.0],
        declared_smoothness: 1.0,
        declared_grad_bound: 0.5,
    };
    let r = verify_convergence(
        Theorem::RmsPropDet,
        &q,
        OracleKind::Exact,
        &[3.0, 3.0],
        0.01,
        &HarnessConfig::default(),
    );
    assert!(matches!(r, Err(OptimError::ConstantMismatch(_))));
}

#[test]
fn rmsprop_det_alpha_and_bound_by_hand() {
    // L = 1.1, σ = √10·1.1, ξ = 1, β₂ = 0.9
    let l = 1.1;
    let sigma = 10f64.sqrt() * 1.1;
    let a = rmsprop_det_alpha(l, sigma, 1.0, 0.9);
    assert!((a - 0.1 / (1.1 * 13.1f64.sqrt())).abs() < 1e-15);
    let t = rmsprop_det_bound(l, sigma, 1.0, 0.9, 2.0, 0.05);
    assert!((t - 2.0 * 1.1 * 13.1 * 2.0 / (0.1 * 0.0025)).abs() < 1e-6);
}

#[test]
fn noxi_bound_is_first_horizon_meeting_target() {
    let (sigma, l, d, alpha, beta2, range, eps) = (0.86, 1.0, 2, 0.1, 0.9, 2.0, 0.3);
    let t = noxi_bound(sigma, l, d, alpha, beta2, range, eps).unwrap();
    assert!(noxi_guarantee(t as f64, sigma, l, d, alpha, beta2, range) <= eps * eps);
    assert!(noxi_guarantee((t - 1) as f64, sigma, l, d, alpha, beta2, range) > eps * eps);
}

#[test]
fn fast_alpha_rejects_violated_constraints() {
    assert!(matches!(
        rmsprop_fast_alpha(1.0, 2.0, 1.0, 0.5, 2.0),
        Err(OptimError::Precondition(_))
    ));
    let a = rmsprop_fast_alpha(0.50005, 0.25005, 4.0, 0.5, 2.0).unwrap();
    assert!((a - 2.4744).abs() < 1e-3);
}

proptest! {
    #[test]
    fn rmsprop_never_produces_nan(
        g in proptest::collection::vec(-1e3f64..1e3, 1..6),
        xi in 0.0f64..2.0,
        beta2 in 0.0f64..0.999,
        zero in proptest::bool::ANY,
    ) {
        let g: Vec<f64> = if zero { vec![0.0; g.len()] } else { g };
        let mut s = RmsState::new(vec![0.0; g.len()]);
        for _ in 0..5 {
            rmsprop_step(&mut s, &g, 0.1, beta2, xi, XiPlacement::InAccumulator);
        }
        prop_assert!(s.x.iter().all(|v| v.is_finite()));
        prop_assert!(s.v.iter().all(|&v| v >= 0.0));
        if zero && xi == 0.0 {
            prop_assert!(s.x.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn accumulator_floor(
        grads in proptest::collection::vec(proptest::collection::vec(-10f64..10.0, 3), 1..30),
        xi in 0.01f64..3.0,
        beta2 in 0.0f64..0.99,
    ) {
        let mut s = RmsState::new(vec![0.0; 3]);
        for (t, g) in grads.iter().enumerate() {
            rmsprop_step(&mut s, g, 0.01, beta2, xi, XiPlacement::InAccumulator);
            let floor = (1.0 - beta2.powi(t as i32 + 1)) * xi;
            prop_assert!(s.v.iter().all(|&v| v >= floor * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn adam_beta1_zero_equals_additive_rmsprop_step(
        g in proptest::collection::vec(-5f64..5.0, 1..5),
        xi in 0.01f64..2.0,
        beta2 in 0.0f64..0.99,
        alpha in 0.001f64..1.0,
    ) {
        let mut a = AdamState::new(vec![0.5; g.len()]);
        let mut r = RmsState::new(vec![0.5; g.len()]);
        adam_step(&mut a, &g, alpha, 0.0, beta2, xi).unwrap();
        rmsprop_step(&mut r, &g, alpha, beta2, xi, XiPlacement::InDenominator);
        for (u, v) in a.x.iter().zip(&r.x) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }
}
