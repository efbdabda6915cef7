use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relu_core::pwl::*;
use relu_core::rng::seeded;

/// Breakpoints, values and tail slopes of a random function with `pieces` pieces.
fn random_parts(pieces: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < pieces - 1 {
        let x = rng.gen_range(-5.0..5.0);
        if xs.iter().all(|p: &f64| (p - x).abs() > 1e-3) {
            xs.push(x);
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ys = xs.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
    (xs, ys, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

fn random_pwl(pieces: usize, rng: &mut ChaCha8Rng) -> PwlFunction {
    let (xs, ys, l, r) = random_parts(pieces, rng);
    PwlFunction::new(xs, ys, l, r).unwrap()
}

/// Direct segment formula, independent of the library's evaluator.
fn segment_eval(xs: &[f64], ys: &[f64], l: f64, r: f64, x: f64) -> f64 {
    let k = xs.len();
    if x <= xs[0] {
        return ys[0] + l * (x - xs[0]);
    }
    if x >= xs[k - 1] {
        return ys[k - 1] + r * (x - xs[k - 1]);
    }
    let i = xs.windows(2).position(|w| x >= w[0] && x <= w[1]).unwrap();
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Numerical `∫|f − g|` by a fine midpoint rule, for comparison with the exact value.
fn midpoint_l1(f: &PwlFunction, g: &PwlFunction, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| (f.eval(lo + (i as f64 + 0.5) * h) - g.eval(lo + (i as f64 + 0.5) * h)).abs() * h).sum()
}

#[test]
fn abs_at_minus_three() {
    assert_eq!(PwlFunction::abs().eval(-3.0), 3.0);
}

#[test]
fn seven_piece_eval_matches_segments() {
    let mut rng = seeded(7, 0);
    let (xs, ys, l, r) = random_parts(7, &mut rng);
    let f = PwlFunction::new(xs.clone(), ys.clone(), l, r).unwrap();
    for x in grid(-8.0, 8.0, 10_001) {
        assert!((f.eval(x) - segment_eval(&xs, &ys, l, r, x)).abs() < 1e-12);
    }
}

#[test]
fn difference_with_itself_is_zero() {
    let h = hard_function(&SimplexPoint::new(1.0, vec![0.2, 0.5, 0.7]).unwrap());
    let z = h.add(&h.scale(-1.0));
    assert_eq!(z.num_pieces(), 1);
    assert!(grid(-2.0, 2.0, 101).all(|x| z.eval(x) == 0.0));
}

#[test]
fn compose_with_identity() {
    let mut rng = seeded(3, 0);
    let f = random_pwl(5, &mut rng);
    let g = PwlFunction::identity().compose(&f);
    for x in grid(-7.0, 7.0, 1001) {
        assert!((g.eval(x) - f.eval(x)).abs() < 1e-12);
    }
    assert_eq!(g.num_pieces(), f.num_pieces());
}

#[test]
fn figure_composition_has_six_pieces() {
    let a1 = SimplexPoint::new(1.0, vec![0.3, 0.6]).unwrap();
    let a2 = SimplexPoint::new(1.0, vec![0.4]).unwrap();
    let h = compose_hard(&[a1, a2]).unwrap();
    assert_eq!(h.num_pieces_in(0.0, 1.0), 6);
}

#[test]
fn affine_has_one_piece() {
    assert_eq!(PwlFunction::affine(2.5, 1.0, -1.0).unwrap().num_pieces(), 1);
}

#[test]
fn hard_function_piece_counts() {
    for w in 2..6 {
        let a = SimplexPoint::uniform(2.0, w).unwrap();
        let h = hard_function(&a);
        // p = w − 1 inner points: p + 2 pieces overall, p + 1 inside [0, M]
        assert_eq!(h.num_pieces(), w + 1);
        assert_eq!(h.num_pieces_in(0.0, 2.0), w);
    }
}

#[test]
fn hard_function_values() {
    let h = hard_function(&SimplexPoint::new(1.0, vec![0.5]).unwrap());
    assert_eq!((h.eval(0.0), h.eval(0.5), h.eval(1.0)), (0.0, 1.0, 0.0));
    let h = hard_function(&SimplexPoint::new(1.0, vec![1.0 / 3.0, 2.0 / 3.0]).unwrap());
    assert_eq!((h.eval(1.0 / 3.0), h.eval(2.0 / 3.0)), (1.0, 0.0));
    assert!((h.eval(1.0) - 1.0).abs() < 1e-15);
    assert_eq!(h.left_slope(), 0.0);
    assert_eq!(h.eval(-4.0), 0.0);
}

#[test]
fn compose_hard_single_is_hard_function() {
    let a = SimplexPoint::new(3.0, vec![0.5, 1.0, 2.5]).unwrap();
    assert_eq!(compose_hard(std::slice::from_ref(&a)).unwrap(), hard_function(&a));
}

#[test]
fn compose_hard_rejects_mixed_scales() {
    let a = SimplexPoint::new(1.0, vec![0.5]).unwrap();
    let b = SimplexPoint::new(2.0, vec![0.5]).unwrap();
    assert_eq!(compose_hard(&[a, b]).unwrap_err(), PwlError::MismatchedScale(1.0, 2.0));
    assert_eq!(compose_hard(&[]).unwrap_err(), PwlError::NoSimplexPoints);
}

#[test]
fn sawtooth_counts() {
    assert_eq!(sawtooth(2, 3).unwrap().num_pieces_in(0.0, 1.0), 8);
    assert_eq!(sawtooth(3, 2).unwrap().num_pieces_in(0.0, 1.0), 9);
}

#[test]
fn composed_hard_pieces_span_zero_to_m() {
    let mut rng = seeded(21, 0);
    for p in 1usize..=3 {
        for k in 1..=3 {
            let m = 2.0;
            let points: Vec<SimplexPoint> = (0..k)
                .map(|_| {
                    let mut c: Vec<f64> = (0..p).map(|_| rng.gen_range(0.05..1.95)).collect();
                    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    SimplexPoint::new(m, c).unwrap()
                })
                .collect();
            let h = compose_hard(&points).unwrap();
            assert_eq!(h.num_pieces_in(0.0, m), (p + 1).pow(k as u32));
            let c = h.canonicalize();
            let mut knots = vec![0.0];
            knots.extend(c.breakpoints().iter().copied().filter(|&x| x > 0.0 && x < m));
            knots.push(m);
            for w in knots.windows(2) {
                let (a, b) = (h.eval(w[0]), h.eval(w[1]));
                assert!((a.min(b)).abs() < 1e-9 && (a.max(b) - m).abs() < 1e-9, "{a} {b}");
            }
        }
    }
}

#[test]
fn flaps_of_abs() {
    let d = decompose_flaps(&PwlFunction::abs()).unwrap();
    assert_eq!(d.offset, 0.0);
    assert_eq!(
        d.flaps,
        vec![
            Flap { breakpoint: 0.0, slope: 1.0, side: FlapSide::RightOpen },
            Flap { breakpoint: 0.0, slope: -1.0, side: FlapSide::LeftOpen },
        ]
    );
}

#[test]
fn flaps_with_flat_right_tail() {
    let f = PwlFunction::new(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.5], 2.0, 0.0).unwrap();
    let d = decompose_flaps(&f).unwrap();
    assert_eq!(d.flaps.len(), f.num_pieces());
    assert_eq!(d.flaps[0].side, FlapSide::RightOpen);
    assert_eq!(d.flaps[0].slope, 0.0);
    for x in grid(-3.0, 4.0, 1001) {
        assert!((d.eval(x) - f.eval(x)).abs() < 1e-12);
    }
}

#[test]
fn flaps_reject_affine() {
    assert_eq!(
        decompose_flaps(&PwlFunction::identity()).unwrap_err(),
        PwlError::SinglePiece
    );
}

#[test]
fn six_piece_flap_reconstruction() {
    let mut rng = seeded(6, 0);
    let f = random_pwl(6, &mut rng);
    let d = decompose_flaps(&f).unwrap();
    assert_eq!(d.flaps.len(), 6);
    let err = grid(-10.0, 10.0, 10_000).map(|x| (d.eval(x) - f.eval(x)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn triangle_against_half() {
    for q in [4usize, 8, 16] {
        let k = q.trailing_zeros() as usize;
        let s = sawtooth(2, k).unwrap();
        let half = PwlFunction::constant(0.5);
        let width = 2.0 / q as f64;
        let d = s.l1_distance(&half, 0.0, width).unwrap();
        assert!((d - 1.0 / (2.0 * q as f64)).abs() < 1e-12, "q={q}: {d}");
    }
}

#[test]
fn abs_l1_on_unit_interval() {
    let d = PwlFunction::abs().l1_distance(&PwlFunction::constant(0.0), -1.0, 1.0).unwrap();
    assert!((d - 1.0).abs() < 1e-15);
    assert!(PwlFunction::abs().l1_distance(&PwlFunction::abs(), -1.0, 1.0).unwrap() == 0.0);
    assert!(matches!(
        PwlFunction::abs().l1_distance(&PwlFunction::abs(), 1.0, 1.0),
        Err(PwlError::EmptyInterval(..))
    ));
}

#[test]
fn sawtooth_far_from_constants() {
    // best constant in L1 is a median of the sawtooth values, which is 1/2
    let q = 16.0;
    let s = sawtooth(2, 4).unwrap();
    let best = s.l1_distance(&PwlFunction::constant(0.5), 0.0, 1.0).unwrap();
    assert!(best >= 0.25 - 1.0 / (4.0 * q) - 1e-12, "{best}");
    for c in [0.0, 0.25, 0.4, 0.6, 1.0] {
        assert!(s.l1_distance(&PwlFunction::constant(c), 0.0, 1.0).unwrap() >= best - 1e-12);
    }
}

#[test]
fn json_shape() {
    let f = PwlFunction::new(vec![0.0, 1.0], vec![0.0, 2.0], -1.0, 0.5).unwrap();
    let v: serde_json::Value = serde_json::to_value(&f).unwrap();
    assert_eq!(v["breakpoints"], serde_json::json!([0.0, 1.0]));
    assert_eq!(v["left_slope"], serde_json::json!(-1.0));
    assert!(v.get("anchor").is_none());
    let g: PwlFunction = serde_json::from_value(v).unwrap();
    assert_eq!(f, g);
    let bad = serde_json::json!({"breakpoints": [1.0, 0.0], "values": [0.0, 0.0], "left_slope": 0.0, "right_slope": 0.0});
    assert!(serde_json::from_value::<PwlFunction>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flap_round_trip(seed in 0u64..10_000, pieces in 2usize..11) {
        let mut rng = seeded(seed, 1);
        let f = random_pwl(pieces, &mut rng);
        let d = decompose_flaps(&f).unwrap();
        prop_assert_eq!(d.flaps.len(), f.num_pieces());
        for x in grid(-12.0, 12.0, 10_000) {
            prop_assert!((d.eval(x) - f.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn algebra_matches_pointwise(seed in 0u64..10_000, p in 2usize..8, q in 2usize..8, c in -3.0f64..3.0) {
        let mut rng = seeded(seed, 2);
        let f = random_pwl(p, &mut rng);
        let g = random_pwl(q, &mut rng);
        let (sum, mx, mn, sc) = (f.add(&g), f.max(&g), f.min(&g), f.scale(c));
        for x in grid(-8.0, 8.0, 2_000) {
            let (a, b) = (f.eval(x), g.eval(x));
            prop_assert!((sum.eval(x) - (a + b)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
            prop_assert!((mx.eval(x) - a.max(b)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
            prop_assert!((mn.eval(x) - a.min(b)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
            prop_assert!((sc.eval(x) - c * a).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn compose_matches_pointwise(seed in 0u64..10_000) {
        let mut rng = seeded(seed, 3);
        let outer = random_pwl(3, &mut rng);
        let inner = random_pwl(4, &mut rng);
        let h = outer.compose(&inner);
        for x in grid(-8.0, 8.0, 2_000) {
            let want = outer.eval(inner.eval(x));
            prop_assert!((h.eval(x) - want).abs() < 1e-12 * (1.0 + want.abs()) * 10.0);
        }
    }

    #[test]
    fn l1_is_a_metric(seed in 0u64..10_000) {
        let mut rng = seeded(seed, 4);
        let f = random_pwl(4, &mut rng);
        let g = random_pwl(5, &mut rng);
        let h = random_pwl(3, &mut rng);
        let (lo, hi) = (-6.0, 6.0);
        let fg = f.l1_distance(&g, lo, hi).unwrap();
        let gf = g.l1_distance(&f, lo, hi).unwrap();
        let fh = f.l1_distance(&h, lo, hi).unwrap();
        let hg = h.l1_distance(&g, lo, hi).unwrap();
        prop_assert!(fg >= 0.0);
        prop_assert!((fg - gf).abs() < 1e-10);
        prop_assert!(fg <= fh + hg + 1e-10);
        prop_assert!((fg - midpoint_l1(&f, &g, lo, hi, 100_000)).abs() < 1e-4);
    }

    #[test]
    fn canonical_form_evaluates_the_same(seed in 0u64..10_000, pieces in 2usize..9) {
        let mut rng = seeded(seed, 5);
        let f = random_pwl(pieces, &mut rng);
        // a redundant breakpoint on a straight stretch must not change the count
        let x = f.breakpoints()[0] - 1.0;
        let mut xs = vec![x];
        xs.extend_from_slice(f.breakpoints());
        let mut ys = vec![f.eval(x)];
        ys.extend_from_slice(f.values());
        let g = PwlFunction::new(xs, ys, f.left_slope(), f.right_slope()).unwrap();
        prop_assert_eq!(g.num_pieces(), f.num_pieces());
        for t in grid(-8.0, 8.0, 500) {
            prop_assert!((g.canonicalize().eval(t) - f.eval(t)).abs() < 1e-12 * (1.0 + f.eval(t).abs()) * 10.0);
        }
    }
}
