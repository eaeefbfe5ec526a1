mod common;

use common::*;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use tricluster::eval::*;
use tricluster::offline::{fit_offline, SolverConfig};

fn lv(classes: &[usize]) -> LabelVector {
    LabelVector::from_indexed(classes)
}

fn relabel(classes: &[usize], perm: &[usize]) -> Vec<usize> {
    classes.iter().map(|&c| perm[c]).collect()
}

#[test]
fn assign_examples() {
    assert_eq!(assign_clusters(&array![[0.9, 0.1], [0.2, 0.8]]).classes, vec![0, 1]);
    assert_eq!(assign_clusters(&array![[0.5, 0.5]]).classes, vec![0]);
    let zero = assign_clusters(&array![[0.0, 0.0], [0.1, 0.3]]);
    assert_eq!(zero.classes, vec![0, 1]);
    assert_eq!(zero.zero_rows, vec![0]);
}

#[test]
fn assign_matches_row_scan() {
    let mut r = rng(1);
    for _ in 0..50 {
        let (rows, cols) = (r.random_range(1..30), r.random_range(1..5));
        let s = random_dense(&mut r, rows, cols);
        let got = assign_clusters(&s).classes;
        for (i, row) in s.rows().into_iter().enumerate() {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            assert_eq!(got[i], best);
        }
    }
}

#[test]
fn metric_examples() {
    let pred = LabelVector::from_pairs([("a", 0), ("b", 0), ("c", 0), ("d", 1)]).unwrap();
    let truth = LabelVector::from_pairs([("a", 0), ("b", 0), ("c", 1), ("d", 1)]).unwrap();
    assert_eq!(clustering_accuracy(&pred, &truth).unwrap(), 0.75);
    let t = lv(&[0, 0, 1, 1, 2, 2]);
    assert_eq!(clustering_accuracy(&t, &t).unwrap(), 1.0);
    assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(clustering_accuracy(&lv(&[0; 6]), &t).unwrap(), 2.0 / 6.0);
    assert!(nmi(&lv(&[0, 1, 0, 1]), &lv(&[0, 0, 1, 1])).unwrap().abs() < 1e-12);
    assert_eq!(nmi(&lv(&[0, 0]), &lv(&[1, 1])).unwrap(), 0.0);
    let other = LabelVector::from_pairs([("x", 0), ("y", 0), ("z", 1), ("w", 1)]).unwrap();
    assert!(clustering_accuracy(&pred, &other).is_err());
    assert!(nmi(&pred, &other).is_err());
}

#[test]
fn metrics_match_contingency_oracle() {
    let mut r = rng(9);
    for trial in 0..200 {
        let n = r.random_range(1..80);
        let kc = r.random_range(1..6);
        let kg = r.random_range(1..6);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..kc)).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..kg)).collect();
        let (acc, nm) = naive_metrics(&pred, &truth);
        let got_acc = clustering_accuracy(&lv(&pred), &lv(&truth)).unwrap();
        let got_nmi = nmi(&lv(&pred), &lv(&truth)).unwrap();
        assert!((got_acc - acc).abs() < 1e-10, "trial {trial}");
        assert!((got_nmi - nm).abs() < 1e-10, "trial {trial}: {got_nmi} vs {nm}");
    }
}

proptest! {
    #[test]
    fn metrics_are_permutation_invariant_and_bounded(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        seed in 0u64..1000,
    ) {
        let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mut perm = vec![0, 1, 2, 3];
        perm.shuffle(&mut rng(seed));
        let moved = relabel(&pred, &perm);
        let a = clustering_accuracy(&lv(&pred), &lv(&truth)).unwrap();
        let n = nmi(&lv(&pred), &lv(&truth)).unwrap();
        prop_assert_eq!(a, clustering_accuracy(&lv(&moved), &lv(&truth)).unwrap());
        prop_assert_eq!(n, nmi(&lv(&moved), &lv(&truth)).unwrap());
        prop_assert!((n - nmi(&lv(&truth), &lv(&pred)).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&n));
    }

    #[test]
    fn relabeled_truth_scores_one(classes in prop::collection::vec(0usize..3, 2..40), seed in 0u64..1000) {
        let mut perm = vec![0, 1, 2];
        perm.shuffle(&mut rng(seed));
        let moved = relabel(&classes, &perm);
        prop_assert_eq!(clustering_accuracy(&lv(&moved), &lv(&classes)).unwrap(), 1.0);
    }
}

#[test]
fn synth_is_deterministic_with_consistent_shapes() {
    let spec = SynthSpec {
        n: 120,
        m: 30,
        l: 30,
        timestamps: 3,
        churn: 0.1,
        drift: 0.1,
        seed: 5,
        ..SynthSpec::default()
    };
    let a = synth_generate(&spec).unwrap();
    let b = synth_generate(&spec).unwrap();
    assert_eq!(a.batches, b.batches);
    assert_eq!(a.truth, b.truth);
    for (batch, truth) in a.batches.iter().zip(&a.truth) {
        assert_eq!(batch.bundle.n(), 120);
        assert_eq!(batch.bundle.m(), 30);
        assert_eq!(truth.tweets.len(), 120);
        assert_eq!(truth.users.len(), 30);
        // every tweet has exactly one author
        let xr = batch.bundle.xr();
        let mut authors = vec![0; xr.cols()];
        for (_, j, v) in xr.iter() {
            assert_eq!(v, 1.0);
            authors[j] += 1;
        }
        assert!(authors.iter().all(|&c| c == 1));
    }
    assert!(synth_generate(&SynthSpec { k: 40, l: 30, ..spec }).is_err());
}

#[test]
fn unchanged_population_keeps_ids() {
    let data = synth_generate(&SynthSpec {
        n: 60,
        m: 20,
        timestamps: 3,
        ..SynthSpec::default()
    })
    .unwrap();
    let set = |i: usize| {
        let mut v = data.batches[i].user_ids.clone();
        v.sort();
        v
    };
    assert_eq!(set(0), set(1));
    assert_eq!(set(1), set(2));
}

#[test]
fn separation_controls_recoverability() {
    let fit = |separation: f64, noise: f64, seed: u64| {
        let data = synth_generate(&SynthSpec {
            separation,
            noise,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let b = &data.batches[0];
        let (s, _) = fit_offline(&b.bundle, &SolverConfig { seed, ..SolverConfig::default() }).unwrap();
        let pred = assign_clusters(&s.sp).labels(&b.tweet_ids).unwrap();
        let truth = &data.truth[0].tweets;
        (clustering_accuracy(&pred, truth).unwrap(), nmi(&pred, truth).unwrap())
    };
    // single seeds can settle in a local optimum; the median cannot
    let mut noiseless: Vec<f64> = (1..=5).map(|seed| fit(1.0, 0.0, seed).0).collect();
    noiseless.sort_by(f64::total_cmp);
    assert_eq!(noiseless[2], 1.0, "{noiseless:?}");
    for seed in 1..=3 {
        let (_, null) = fit(0.0, 0.05, seed);
        assert!(null < 0.05, "null NMI {null}, seed {seed}");
    }
}

#[test]
fn lexicon_marks_block_features() {
    let data = synth_generate(&SynthSpec::default()).unwrap();
    let prior: &Array2<f64> = data.batches[0].bundle.sf0();
    let spec = SynthSpec::default();
    let mut marked = 0;
    for f in 0..spec.l {
        let row = prior.row(f);
        if row.sum() > 0.0 {
            marked += 1;
            assert_eq!(row[feature_block(f, spec.l, spec.k)], 1.0);
        }
    }
    assert_eq!(marked, spec.k * (spec.l / spec.k * 3).div_ceil(10));
}
