use proptest::prelude::*;
use protestwave::kinetics::ModelParams;
use protestwave::regions::{
    classify_region, count_boundaries, lambda2_boundary, total_count, trivial_lambda2, RegionLabel, SourceType, REGION_TABLE,
};
use protestwave::Error;

fn base() -> ModelParams<f64> {
    ModelParams::analysis_base()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn labels_are_locally_constant(k0 in 0.0..5.0f64, k1 in -2.0..2.0f64, k2 in -2.0..2.0f64) {
        let p = base().with_k(k0, k1, k2);
        let Ok(label) = classify_region(&p, 1.0) else { return Ok(()) };
        // Stay clear of every curve.
        let clear = [-1e-3, 1e-3].iter().all(|d| {
            let q = p.with_k(k0, k1, k2 + d);
            total_count(&q) == label.steady_state_count && (trivial_lambda2(&q, 1.0).unwrap() > 0.0) == (trivial_lambda2(&p, 1.0).unwrap() > 0.0)
        });
        prop_assume!(clear);
        for (d1, d2) in [(1e-6, 0.0), (-1e-6, 0.0), (0.0, 1e-6), (0.0, -1e-6)] {
            prop_assert_eq!(classify_region(&p.with_k(k0, k1 + d1, k2 + d2), 1.0).unwrap(), label);
        }
    }

    #[test]
    fn labels_come_from_the_table(k0 in -5.0..5.0f64, k1 in -3.0..3.0f64, k2 in -3.0..3.0f64, q in 0.0..1.0f64) {
        match classify_region(&base().with_k(k0, k1, k2), q) {
            Ok(l) => {
                prop_assert!(REGION_TABLE.iter().any(|r| r.0 == l.region_id && r.1 == l.steady_state_count && r.3 == l.source_type));
                prop_assert_eq!(RegionLabel::from_count(l.steady_state_count, trivial_lambda2(&base().with_k(k0, k1, k2), q).unwrap() > 0.0), Some(l));
            }
            Err(e) => prop_assert!(matches!(e, Error::Boundary(_) | Error::NotApplicable(_)), "{e}"),
        }
    }

    #[test]
    fn monotone_points_pair_monostability_with_two_states(k0 in 0.0..5.0f64, k1 in 0.0..2.0f64, k2 in 0.0..2.0f64) {
        let p = base().with_k(k0, k1, k2);
        let Ok(l) = classify_region(&p, 1.0) else { return Ok(()) };
        let positive = trivial_lambda2(&p, 1.0).unwrap() > 0.0;
        prop_assert_eq!(l.source_type == SourceType::Monostable, positive);
        prop_assert_eq!(positive, l.steady_state_count == 2);
    }
}

#[test]
fn lambda2_curve_coincides_with_two_state_curve() {
    let p = base().with_k(1.0, 0.0, 0.0);
    for i in -10..=10 {
        let k1 = i as f64 * 0.1;
        let (Ok(a), (_, Some(c))) = (lambda2_boundary(&p, k1, 1.0), count_boundaries(&p, k1)) else { continue };
        assert!((a - c).abs() < 2e-3, "k1 = {k1}: {a} vs {c}");
        assert!(trivial_lambda2(&p.with_k(1.0, k1, a), 1.0).unwrap().abs() < 1e-8);
    }
}
