use edrvfl_iol::features::{ensemble_predict, softmax_rows, EnsembleMode};
use edrvfl_iol::iol::smw_rate_update_checked;
use edrvfl_iol::regret::{batch_loss, forward_bound_at, immediate_regret, ridge_bound, forward_bound, ridge_bound_at};
use edrvfl_iol::stream::{
    encode_labels, normalize, one_hot, partition_folds, rng_from_seed, train_test_split, AffineStats, Batch,
    NormMethod, StatsSource, StreamMeta,
};
use edrvfl_iol::tolerance;
use edrvfl_iol::{init_learner, smw_rate_update, BatchStream, BoundParams, Mat, Style};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

fn randn(seed: u64, r: usize, c: usize) -> Mat {
    let mut rng = rng_from_seed(seed);
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
}

fn spd(seed: u64, p: usize) -> Mat {
    let a = randn(seed, p, p);
    let mut m = &a * a.transpose() / p as f64;
    for i in 0..p {
        m[(i, i)] += 0.5;
    }
    m.try_inverse().unwrap()
}

fn bound_params() -> impl Strategy<Value = BoundParams> {
    (0.01f64..100.0, 0.01f64..10.0, 1usize..200, 1usize..1000, 1e-4f64..10.0, 1.0f64..100.0).prop_map(
        |(y, d, b, dim, lambda, s)| BoundParams::new(y, d, b as f64, dim as f64, 1000.0, lambda, s).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn woodbury_update_is_symmetric_and_positive_definite(seed in any::<u64>(), p in 1usize..30, b in 1usize..20) {
        let eta = spd(seed, p);
        let d = randn(seed ^ 1, b, p);
        let up = smw_rate_update_checked(&eta, &d).unwrap();
        prop_assert!((&up.eta - up.eta.transpose()).norm() <= tolerance::SYMMETRY);
        prop_assert!(up.eta.clone().cholesky().is_some());
        // Absorbing data can only shrink the learning rate.
        prop_assert!((&eta - &up.eta).symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn woodbury_update_is_order_independent(seed in any::<u64>(), p in 1usize..20) {
        let eta = spd(seed, p);
        let (d1, d2) = (randn(seed ^ 2, 3, p), randn(seed ^ 3, 4, p));
        let a = smw_rate_update(&smw_rate_update(&eta, &d1).unwrap(), &d2).unwrap();
        let b = smw_rate_update(&smw_rate_update(&eta, &d2).unwrap(), &d1).unwrap();
        prop_assert!((&a - &b).norm() <= 1e-9 * a.norm().max(1.0));
    }

    #[test]
    fn ridge_result_ignores_batch_order(seed in any::<u64>(), lambda in 0.01f64..10.0) {
        let p = 6;
        let ds: Vec<Mat> = (0..8).map(|i| randn(seed.wrapping_add(i), 3, p)).collect();
        let ys: Vec<Mat> = (0..8).map(|i| randn(seed.wrapping_add(100 + i), 3, 2)).collect();
        let mut order: Vec<usize> = (0..8).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let run = |idx: &[usize]| {
            let mut s = init_learner(lambda, p, 2, Style::Ridge, None).unwrap();
            for &i in idx {
                s = s.ridge_step(&ds[i], &ys[i]).unwrap();
            }
            s.beta
        };
        let (a, b) = (run(&(0..8).collect::<Vec<_>>()), run(&order));
        prop_assert!((&a - &b).norm() <= tolerance::EQUIVALENCE * a.norm().max(1.0));
    }

    #[test]
    fn immediate_regret_against_own_best_fit_is_nonnegative(seed in any::<u64>(), b in 1usize..10) {
        // The least-squares fit of a batch is the best expert on that batch.
        let d = randn(seed, b + 4, 4);
        let y = randn(seed ^ 5, b + 4, 1);
        let best = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * &y;
        let any = randn(seed ^ 9, 4, 1);
        let ir = immediate_regret(batch_loss(&d, &any, &y), batch_loss(&d, &best, &y));
        prop_assert!(ir >= -1e-9);
    }

    #[test]
    fn bounds_grow_with_time(p in bound_params(), t in 1.0f64..1e5) {
        prop_assert!(ridge_bound_at(&p, 2.0 * t) >= ridge_bound_at(&p, t));
        prop_assert!(forward_bound_at(&p, 2.0 * t).full >= forward_bound_at(&p, t).full - 1e-9 * p.a1());
        prop_assert!(forward_bound_at(&p, t).full <= forward_bound_at(&p, t).single_log);
    }

    #[test]
    fn ridge_bound_is_four_single_log_forward_bounds(p in bound_params()) {
        let ratio = ridge_bound(&p) / forward_bound(&p).single_log;
        prop_assert!((ratio - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn one_hot_rows_sum_to_one(raw in proptest::collection::vec(0u8..26, 1..200)) {
        let values: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
        let (labels, enc) = encode_labels(&values);
        let m = one_hot(&labels, enc.n_classes());
        for i in 0..m.nrows() {
            prop_assert_eq!(m.row(i).sum(), 1.0);
            prop_assert_eq!(enc.classes[labels[i]], values[i]);
        }
    }

    #[test]
    fn folds_partition_the_rows(n in 10usize..300, folds in 2usize..8, holdout in 0.0f64..0.5, seed in any::<u64>()) {
        prop_assume!(n - (n as f64 * holdout).round() as usize >= folds);
        let splits = partition_folds(n, folds, holdout, seed).unwrap();
        let mut tests: Vec<usize> = splits.iter().flat_map(|f| f.test.clone()).collect();
        tests.extend(&splits[0].validation);
        tests.sort();
        prop_assert_eq!(tests, (0..n).collect::<Vec<_>>());
        for f in &splits {
            prop_assert_eq!(f.train.len() + f.test.len() + f.validation.len(), n);
            prop_assert!(f.train.iter().all(|i| !f.test.contains(i) && !f.validation.contains(i)));
        }
    }

    #[test]
    fn train_test_split_is_disjoint_and_complete(n in 2usize..500, frac in 0.0f64..0.9, seed in any::<u64>()) {
        prop_assume!(((n as f64 * frac).round() as usize) < n);
        let (train, test) = train_test_split(n, frac, seed).unwrap();
        let mut all = [train.clone(), test.clone()].concat();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn normalization_round_trips(seed in any::<u64>(), rows in 2usize..40, zscore in any::<bool>()) {
        let mut x = randn(seed, rows, 5) * 7.0;
        x.column_mut(2).fill(3.0);
        let method = if zscore { NormMethod::Zscore } else { NormMethod::Minmax01 };
        let stats = AffineStats::fit(&x, method);
        let back = stats.invert(&stats.apply(&x));
        prop_assert!((&back - &x).amax() <= tolerance::NORMALIZATION_ROUND_TRIP * 10.0);
    }

    #[test]
    fn softmax_ensemble_rows_are_distributions(seed in any::<u64>(), layers in 1usize..5) {
        let per_layer: Vec<Mat> = (0..layers).map(|l| randn(seed.wrapping_add(l as u64), 7, 4) * 5.0).collect();
        let p = ensemble_predict(&per_layer, EnsembleMode::ClassificationSoftmaxMean).unwrap();
        for i in 0..p.nrows() {
            prop_assert!((p.row(i).sum() - 1.0).abs() <= tolerance::PROBABILITY_SUM);
            prop_assert!(p.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let s = softmax_rows(&per_layer[0]);
        prop_assert!(s.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn global_normalization_gives_unit_scale_columns() {
    let batches = (0..5)
        .map(|i| Batch::new(randn(i, 8, 3) * 4.0, randn(i + 50, 8, 1), i as usize).unwrap())
        .collect();
    let stream = BatchStream::new(batches, StreamMeta::default()).unwrap();
    let z = normalize(&stream, NormMethod::Zscore, StatsSource::Global).unwrap();
    let (x, _) = z.stacked();
    for j in 0..3 {
        let col = x.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
