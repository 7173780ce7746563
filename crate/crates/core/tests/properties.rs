mod common;

use breathtopo::eval::{metrics, wilcoxon_signed_rank, ConfusionMatrix};
use breathtopo::learner::{fit, BoostConfig};
use breathtopo::persistence::{rips_pd, sublevel_pd0_values, PointCloud};
use breathtopo::respiration::{build_irr, sqi, BreathCycles};
use breathtopo::vectorize::{hepc, persistence_stats, VectorizeConfig};
use breathtopo::{FeatureMatrix, FeatureRow, FiltrationKind, PersistenceDiagram, PersistencePair, Stage, TimeSeries};
use common::{sublevel_sweep, TestRng};
use proptest::prelude::*;

fn pd_of(points: &[(f64, f64)]) -> PersistenceDiagram {
    PersistenceDiagram::new(
        0,
        FiltrationKind::Sublevel,
        points.iter().map(|&(b, d)| PersistencePair::new(b, d)).collect(),
    )
}

fn finite_diagram() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, 0.01f64..4.0), 1..12)
        .prop_map(|v| v.into_iter().map(|(b, l)| (b, b + l)).collect())
}

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 1..9))
}

fn stage_of(i: usize) -> Stage {
    Stage::from_index(i % Stage::COUNT).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sublevel_matches_sweep(x in prop::collection::vec(-3i32..3, 1..40)) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        prop_assert_eq!(sublevel_pd0_values(&x).unwrap().sorted_points(), sublevel_sweep(&x));
    }

    #[test]
    fn sublevel_equivariant_under_shift_and_scale(
        x in prop::collection::vec(-100.0f64..100.0, 1..50),
        shift in -8i32..8,
        exp in -3i32..4,
    ) {
        // Integer shifts of values in [-100, 100] and power-of-two scalings
        // are exact in floating point.
        let c = f64::from(shift);
        let s = 2f64.powi(exp);
        let base = sublevel_pd0_values(&x).unwrap().sorted_points();
        let moved: Vec<f64> = x.iter().map(|v| (v * s) + c).collect();
        let want: Vec<(f64, f64)> = base.iter().map(|&(b, d)| (b * s + c, d * s + c)).collect();
        let got = sublevel_pd0_values(&moved).unwrap().sorted_points();
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g.0 - w.0).abs() <= 1e-12 * (1.0 + w.0.abs()));
            prop_assert!(g.1 == w.1 || (g.1 - w.1).abs() <= 1e-12 * (1.0 + w.1.abs()));
        }
    }

    #[test]
    fn sublevel_has_one_essential_class_at_the_minimum(x in prop::collection::vec(-10.0f64..10.0, 1..60)) {
        let pd = sublevel_pd0_values(&x).unwrap();
        let essential: Vec<_> = pd.points.iter().filter(|p| !p.is_finite()).collect();
        prop_assert_eq!(essential.len(), 1);
        prop_assert_eq!(essential[0].birth, x.iter().cloned().fold(f64::INFINITY, f64::min));
        prop_assert!(pd.points.iter().all(|p| p.death > p.birth));
    }

    #[test]
    fn rips_scales_with_the_cloud(pts in cloud(), exp in -2i32..3) {
        let s = 2f64.powi(exp);
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        let a = rips_pd(&PointCloud::from_points(&pts).unwrap(), 1).unwrap();
        let b = rips_pd(&PointCloud::from_points(&scaled).unwrap(), 1).unwrap();
        for dim in 0..2 {
            let want: Vec<(f64, f64)> = a[dim].sorted_points().iter().map(|&(x, y)| (x * s, y * s)).collect();
            prop_assert_eq!(b[dim].sorted_points(), want);
        }
    }

    #[test]
    fn rips_ignores_point_order(pts in cloud(), seed in any::<u64>()) {
        let mut shuffled = pts.clone();
        let mut rng = TestRng::new(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let a = rips_pd(&PointCloud::from_points(&pts).unwrap(), 1).unwrap();
        let b = rips_pd(&PointCloud::from_points(&shuffled).unwrap(), 1).unwrap();
        for dim in 0..2 {
            prop_assert_eq!(a[dim].sorted_points(), b[dim].sorted_points());
        }
    }

    #[test]
    fn vectorizations_ignore_point_order(pts in finite_diagram()) {
        let mut rev = pts.clone();
        rev.reverse();
        let cfg = VectorizeConfig::default();
        let (a, b) = (persistence_stats(&pd_of(&pts), &cfg).unwrap(), persistence_stats(&pd_of(&rev), &cfg).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
        let (a, b) = (hepc(&pd_of(&pts)).unwrap(), hepc(&pd_of(&rev)).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn metrics_are_bounded_and_scale_free(
        counts in prop::array::uniform3(prop::array::uniform3(0.0f64..50.0)),
        scale in 0.01f64..100.0,
    ) {
        let total: f64 = counts.iter().flatten().sum();
        prop_assume!(total > 1e-6);
        let m = metrics(&ConfusionMatrix::new(counts).unwrap()).unwrap();
        let scaled = counts.map(|r| r.map(|v| v * scale));
        let s = metrics(&ConfusionMatrix::new(scaled).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.accuracy));
        prop_assert!((0.0..=1.0).contains(&m.balanced_accuracy));
        prop_assert!(m.kappa <= 1.0 + 1e-12);
        prop_assert!((m.accuracy - s.accuracy).abs() <= 1e-12);
        prop_assert!((m.kappa - s.kappa).abs() <= 1e-9);
    }

    #[test]
    fn wilcoxon_p_is_a_probability(
        pairs in prop::collection::vec((-3i32..3, -3i32..3), 5..30),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let p = wilcoxon_signed_rank(&a, &b).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn irr_stays_within_the_breath_rates(intervals in prop::collection::vec(1.5f64..8.0, 2..20)) {
        let mut onsets = vec![1.0];
        for d in &intervals {
            onsets.push(onsets.last().unwrap() + d);
        }
        let duration = onsets.last().unwrap() + 5.0;
        let irr = build_irr(&BreathCycles::new(onsets).unwrap(), duration).unwrap();
        let rates: Vec<f64> = intervals.iter().map(|d| 60.0 / d).collect();
        let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(irr.samples().iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }

    #[test]
    fn sqi_is_bounded(x in prop::collection::vec(-5.0f64..5.0, 64..400)) {
        let s = sqi(&TimeSeries::new(x, 4.0).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn feature_csv_round_trips(
        rows in prop::collection::vec((0usize..500, 0usize..3, 0.0f64..1.0, prop::collection::vec(-1e6f64..1e6, 3)), 0..20),
    ) {
        let mut m = FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
        for (epoch_index, stage, sqi, values) in rows {
            m.rows.push(FeatureRow { subject_id: "s01".into(), epoch_index, stage: stage_of(stage), sqi, values });
        }
        prop_assert_eq!(FeatureMatrix::from_csv(&m.to_csv(), "mem").unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn learner_is_deterministic_and_order_invariant(
        data in prop::collection::vec((prop::collection::vec(-10.0f64..10.0, 3), 0usize..3), 12..60),
        seed in 0u64..1000,
    ) {
        let x: Vec<Vec<f64>> = data.iter().map(|d| d.0.clone()).collect();
        let y: Vec<Stage> = data.iter().map(|d| stage_of(d.1)).collect();
        prop_assume!(y.iter().any(|s| *s != y[0]));
        let names: Vec<String> = ["f0", "f1", "f2"].iter().map(|s| s.to_string()).collect();
        let cfg = BoostConfig { n_rounds: 15, seed, ..BoostConfig::default() };
        let a = fit(&x, &y, &names, &cfg).unwrap();
        let b = fit(&x, &y, &names, &cfg).unwrap();
        prop_assert_eq!(&a, &b);

        // A strictly increasing transform of every column keeps the labels.
        let xt: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * v * v + 3.0 * v).collect()).collect();
        let t = fit(&xt, &y, &names, &cfg).unwrap();
        prop_assert_eq!(a.predict(&x).unwrap().labels, t.predict(&xt).unwrap().labels);

        let probs = a.predict(&x).unwrap().probabilities;
        prop_assert!(probs.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }
}
