use poolvcm::gpp::{
    build_design, cross_correlation, equally_spaced_knots, knot_correlation, matern_corr, AgeLayout, CoefBasis,
    Matern, MaternParams,
};
use proptest::prelude::*;

fn nu() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.5), Just(2.0), Just(2.5), 0.3f64..4.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn correlation_is_symmetric_and_bounded(
        u1 in -5.0f64..5.0,
        u2 in -5.0f64..5.0,
        nu in nu(),
        phi in 0.05f64..2.0,
    ) {
        let p = MaternParams { nu, phi };
        let a = matern_corr(u1, u2, &p);
        prop_assert_eq!(a, matern_corr(u2, u1, &p));
        prop_assert!((0.0..=1.0).contains(&a));
        let k = Matern::new(nu);
        let b = k.corr(u1 - u2, phi);
        prop_assert_eq!(b, k.corr(u2 - u1, phi));
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn correlation_decreases_with_distance(
        d in 0.0f64..6.0,
        step in 1e-3f64..1.0,
        nu in nu(),
        phi in 0.05f64..2.0,
    ) {
        let k = Matern::new(nu);
        prop_assert!(k.corr(d + step, phi) <= k.corr(d, phi) + 1e-12);
    }

    #[test]
    fn projection_reproduces_knot_cross_correlation(
        n_knots in 2usize..20,
        phi in 0.075f64..0.75,
        ages in proptest::collection::vec(-3.0f64..3.0, 5..60),
    ) {
        let knots = equally_spaced_knots(-3.0, 3.0, n_knots);
        let layout = AgeLayout::new(&ages, knots.clone()).unwrap();
        let kernel = Matern::new(2.0);
        let basis = CoefBasis::build(&layout, &kernel, phi).unwrap();
        let q = basis.projection(&layout, &kernel);
        let r = knot_correlation(&kernel, &knots, phi, basis.nugget);
        let mut cross = Vec::new();
        cross_correlation(&kernel, &layout.unique_ages, &knots, phi, basis.nugget, &mut cross);
        for k in 0..layout.n_unique() {
            for b in 0..n_knots {
                let qr: f64 = (0..n_knots).map(|a| q[k * n_knots + a] * r[a * n_knots + b]).sum();
                prop_assert!((qr - cross[k * n_knots + b]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projection_is_identity_at_knots(n_knots in 2usize..15, phi in 0.075f64..0.75) {
        let knots = equally_spaced_knots(-3.0, 3.0, n_knots);
        let layout = AgeLayout::new(&knots, knots.clone()).unwrap();
        let kernel = Matern::new(2.0);
        let basis = CoefBasis::build(&layout, &kernel, phi).unwrap();
        let q = basis.projection(&layout, &kernel);
        for a in 0..n_knots {
            for b in 0..n_knots {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((q[a * n_knots + b] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn centred_curves_sum_to_zero(
        ages in proptest::collection::vec(-3.0f64..3.0, 3..80),
        z in proptest::collection::vec(-3.0f64..3.0, 12),
        phi in 0.075f64..0.75,
    ) {
        let knots = equally_spaced_knots(-3.0, 3.0, 12);
        let design = build_design(&ages, knots, 2.0, &[phi]).unwrap();
        let layout = &design.layout;
        let mut curve = vec![0.0; layout.n_unique()];
        design.bases[0].curve_at_unique(&z, &mut curve);
        let sum: f64 = layout.age_index.iter().map(|&k| curve[k]).sum();
        prop_assert!(sum.abs() < 1e-8, "{sum}");
    }

    #[test]
    fn whitening_round_trips(z in proptest::collection::vec(-3.0f64..3.0, 10), phi in 0.075f64..0.75) {
        let knots = equally_spaced_knots(-3.0, 3.0, 10);
        let design = build_design(&[0.0, 1.0], knots, 2.0, &[phi]).unwrap();
        let b = &design.bases[0];
        let back = b.whiten(&b.color(&z));
        for (x, y) in z.iter().zip(&back) {
            prop_assert!((x - y).abs() < 1e-7);
        }
    }
}

#[test]
fn half_order_is_exponential() {
    let k = Matern::new(0.5);
    for i in 0..200 {
        let d = i as f64 * 0.05;
        let p = MaternParams { nu: 0.5, phi: 0.7 };
        let want = (-d / 0.7).exp();
        assert!((matern_corr(0.0, d, &p) - want).abs() < 1e-12);
        assert!((k.corr(d, 0.7) - want).abs() < 1e-12);
    }
}
