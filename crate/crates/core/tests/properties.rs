//! Cross-module invariants checked on random inputs.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xlog::eventlog::{clean_log, correlation_matrix, Attribute, Case, Event, EventLog};
use xlog::explain::lime::{lime_explain, Background, LimeConfig};
use xlog::explain::{ale, binary_predictor, ice, pdp, submodular_pick, FnPredictor, Predictor};
use xlog::forest::{fit_forest, fit_tree, ForestParams, TreeParams};
use xlog::latent::{kmeans, kmeans_single};
use xlog::latent::cluster::restart_rng;
use xlog::seqnet::{cross_entropy, softmax};

const ACTIVITIES: [&str; 4] = ["a", "b", "c", "d"];

/// (label, activities, timestamps offsets, age) per case; label `None` is unlabeled.
fn arb_log() -> impl Strategy<Value = EventLog> {
    let case = (
        proptest::option::weighted(0.8, 0..4usize),
        proptest::collection::vec((0..4usize, 0..5_000_000i64), 1..6),
        0..100u32,
    );
    proptest::collection::vec(case, 2..40).prop_map(|cases| {
        let cases = cases
            .into_iter()
            .enumerate()
            .map(|(i, (label, events, age))| {
                let events = events.into_iter().map(|(a, t)| Event::new(ACTIVITIES[a], 1_000_000_000 + t)).collect();
                let mut c = Case::new(format!("c{i:03}"), events);
                c.age = age;
                c.treatment_code = format!("t{}", i % 3);
                match label {
                    Some(l) => c.with_label(format!("L{l}")),
                    None => c,
                }
            })
            .collect();
        EventLog::from_cases(cases).unwrap()
    })
}

fn arb_matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Array2<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-5i32..5, r * c)
            .prop_map(move |v| Array2::from_shape_vec((r, c), v.into_iter().map(f64::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cleaning_is_idempotent_and_conserves_cases(log in arb_log(), min_class in 1..6usize) {
        let result = clean_log(&log, min_class);
        prop_assume!(result.is_ok());
        let (clean, report) = result.unwrap();
        let dropped_by_class: usize = report.dropped_classes.values().sum();
        prop_assert_eq!(clean.len() + dropped_by_class + report.dropped_cases, log.len());
        prop_assert!(report.imputed_labels + report.dropped_cases <= report.original_cases);
        if !clean.is_empty() {
            let (again, second) = clean_log(&clean, min_class).unwrap();
            prop_assert_eq!(&again.cases, &clean.cases);
            prop_assert_eq!(second.imputed_labels, 0);
        }
    }

    #[test]
    fn treatment_years_vanish_only_for_single_timestamp_cases(log in arb_log()) {
        for c in &log.cases {
            prop_assert!(c.years_in_treatment >= 0.0);
            let single = c.events.iter().all(|e| e.timestamp == c.events[0].timestamp);
            prop_assert_eq!(c.years_in_treatment == 0.0, single);
            prop_assert!(c.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
    }

    #[test]
    fn correlation_is_symmetric_with_unit_diagonal(log in arb_log()) {
        let m = correlation_matrix(&log, &[Attribute::Activity, Attribute::Age, Attribute::Years]).unwrap();
        for i in 0..m.features.len() {
            prop_assert!((m.values[i][i] - 1.0).abs() < 1e-12);
            for j in 0..m.features.len() {
                prop_assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_tree_fits_consistent_data(x in arb_matrix(2..60, 1..5), seed in any::<u64>()) {
        // Labels as a function of the row make the data consistent.
        let y: Vec<usize> = x.rows().into_iter().map(|r| (r.sum().rem_euclid(3.0)) as usize).collect();
        let tree = fit_tree(x.view(), &y, 3, TreeParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for (row, &label) in x.rows().into_iter().zip(&y) {
            prop_assert_eq!(tree.predict(&row.to_vec()), label);
        }
    }

    #[test]
    fn forest_probabilities_and_importance_are_normalized(x in arb_matrix(4..50, 1..5), seed in any::<u64>()) {
        let y: Vec<usize> = x.column(0).iter().map(|&v| usize::from(v > 0.0)).collect();
        let names: Vec<String> = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        let model = fit_forest(x.view(), &y, 2, names, ForestParams::new(8, x.ncols(), seed)).unwrap();
        let p = model.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let imp = model.gini_importance();
        prop_assert!(imp.importance.iter().all(|&v| v >= 0.0));
        if !imp.no_splits {
            prop_assert!((imp.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_normalizes_and_cross_entropy_is_nonnegative(
        logits in proptest::collection::vec(-30.0f64..30.0, 1..8),
        pick in any::<prop::sample::Index>(),
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(cross_entropy(&p, pick.index(p.len())) >= 0.0);
    }

    #[test]
    fn ice_mean_is_pdp_and_ale_is_centered(x in arb_matrix(3..30, 2..4), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let f = binary_predictor(move |r| 0.5 + 0.04 * (a * r[0] + b * r[0] * r[1]).tanh());
        let grid = [-4.0, -1.0, 0.5, 3.0];
        let ice = ice(&f, x.view(), 0, &grid, 1).unwrap();
        let pdp = pdp(&f, x.view(), 0, &grid, 1).unwrap();
        let n = ice.values.len() as f64;
        let mean: Vec<f64> = (0..grid.len()).map(|j| ice.values.iter().map(|c| c[j]).sum::<f64>() / n).collect();
        prop_assert_eq!(&mean, &pdp.values[0]);
        if let Ok(curve) = ale(&f, x.view(), 0, 4, 1) {
            prop_assert!(curve.grid.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(curve.values[0].iter().sum::<f64>().abs() < 1e-12);
        }
        // Constant in feature 1 when b = 0.
        let g = binary_predictor(move |r| 0.5 + 0.1 * (a * r[0]).tanh());
        if let Ok(curve) = ale(&g, x.view(), 1, 4, 1) {
            prop_assert!(curve.values[0].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn lime_is_sparse_and_deterministic(seed in any::<u64>(), k in 1..5usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((40, 6), |_| f64::from(rand::Rng::random_range(&mut rng, 0..3u8)));
        let names: Vec<String> = (0..6).map(|j| format!("f{j}")).collect();
        let categorical = vec![true; 6];
        let bg = Background::new(x.view(), &names, &categorical).unwrap();
        let f = binary_predictor(|r| 0.2 + 0.1 * r[0] + 0.05 * r[3]);
        let cfg = LimeConfig::new(k, 300, seed);
        let row = x.row(0).to_vec();
        let e1 = lime_explain(&f, &row, "r0", &bg, 1, &cfg).unwrap();
        let e2 = lime_explain(&f, &row, "r0", &bg, 1, &cfg).unwrap();
        prop_assert!(e1.weights.iter().filter(|w| w.weight != 0.0).count() <= k);
        if let Some(r2) = e1.fidelity {
            prop_assert!(r2 <= 1.0 + 1e-12);
        }
        prop_assert_eq!(e1, e2);
    }

    #[test]
    fn pick_respects_budget_and_coverage_grows(seed in any::<u64>(), n in 1..10usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((30, 5), |_| f64::from(rand::Rng::random_range(&mut rng, 0..2u8)));
        let names: Vec<String> = (0..5).map(|j| format!("f{j}")).collect();
        let categorical = vec![true; 5];
        let bg = Background::new(x.view(), &names, &categorical).unwrap();
        let f = binary_predictor(|r| 0.3 + 0.2 * r[0] * r[1] + 0.1 * r[2] + 0.05 * r[4]);
        let candidates: Vec<_> = (0..n)
            .map(|i| lime_explain(&f, &x.row(i).to_vec(), &format!("r{i}"), &bg, 1, &LimeConfig::new(2, 200, seed)).unwrap())
            .collect();
        let mut last = 0.0;
        for budget in 1..=n + 1 {
            let s = submodular_pick(&candidates, budget).unwrap();
            prop_assert!(s.picked.len() <= budget);
            prop_assert!(s.coverage >= last - 1e-12);
            last = s.coverage;
        }
    }

    #[test]
    fn best_restart_beats_every_single_restart(x in arb_matrix(6..40, 1..4), k in 1..4usize, seed in any::<u64>()) {
        let best = kmeans(x.view(), k, 6, seed).unwrap();
        for r in 0..6 {
            let single = kmeans_single(x.view(), k, &mut restart_rng(seed, r)).unwrap();
            prop_assert!(best.inertia <= single.inertia);
        }
        prop_assert!(best.assignment.iter().all(|&c| c < k));
    }
}

#[test]
fn multiclass_predictor_rows_sum_to_one() {
    let f = FnPredictor::new(3, |r: &[f64]| softmax(&[r[0], -r[0], 0.5]));
    let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64 - 5.0);
    let p = f.predict_proba(x.view()).unwrap();
    assert!(p.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-12));
}
