use std::collections::HashSet;

use pdvol_core::dataset::{source_subject, AugmentRule};
use pdvol_core::linear::LogisticParams;
use pdvol_core::model_selection::{
    default_grid, grid_search, nested_cv, Classifier, Execution, HyperGrid, LeakageMode, NestedCvConfig, ParamSet,
};
use pdvol_core::synth::{generate_cohort, CohortSpec};
use pdvol_core::{Label, LabeledDataset, Matrix};

fn cohort(n_pd: usize, n_hc: usize, effect: f64, seed: u64) -> LabeledDataset {
    generate_cohort(&CohortSpec::balanced(n_pd, n_hc, 4, effect, seed)).unwrap()
}

fn config(seed: u64, mode: LeakageMode) -> NestedCvConfig {
    NestedCvConfig { outer_k: 5, inner_k: 3, seed, leakage_mode: mode, augment: Some(AugmentRule::SubtractMean) }
}

#[test]
fn serial_and_parallel_runs_agree_exactly() {
    let ds = cohort(40, 30, 0.8, 1);
    let pool = Execution::with_threads(3).unwrap();
    for c in Classifier::ALL {
        let cfg = config(9, LeakageMode::PaperOrder);
        let a = nested_cv(&ds, &default_grid(c), &cfg, &Execution::Serial).unwrap();
        let b = nested_cv(&ds, &default_grid(c), &cfg, &pool).unwrap();
        let again = nested_cv(&ds, &default_grid(c), &cfg, &Execution::Serial).unwrap();
        assert_eq!(a, b, "{c}");
        assert_eq!(a, again, "{c}");
        assert_eq!(a.fold_csv_rows(false), b.fold_csv_rows(false));
    }
}

#[test]
fn outer_folds_partition_the_working_rows() {
    let ds = cohort(40, 30, 0.8, 2);
    for mode in [LeakageMode::PaperOrder, LeakageMode::LeakageSafe] {
        let r = nested_cv(&ds, &default_grid(Classifier::Lr), &config(3, mode), &Execution::Serial).unwrap();
        let mut seen = HashSet::new();
        for f in &r.per_outer_fold {
            let train: HashSet<&String> = f.train_subjects.iter().collect();
            for s in &f.test_subjects {
                assert!(!train.contains(s), "{s} is in both train and test");
                assert!(seen.insert(s.clone()), "{s} tested twice");
            }
            // test folds never contain augmented rows in leakage-safe mode
            if mode == LeakageMode::LeakageSafe {
                assert!(f.test_subjects.iter().all(|s| source_subject(s) == s));
            }
        }
        let [hc, pd] = r.working_counts;
        assert_eq!(seen.len(), hc + pd);
        let sizes: Vec<usize> = r.per_outer_fold.iter().map(|f| f.test_pd).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn augmented_twins_leak_only_when_augmenting_before_folds() {
    let ds = cohort(40, 30, 0.8, 3);
    let grid = default_grid(Classifier::Lr);
    let safe = nested_cv(&ds, &grid, &config(4, LeakageMode::LeakageSafe), &Execution::Serial).unwrap();
    let before = nested_cv(&ds, &grid, &config(4, LeakageMode::PaperOrder), &Execution::Serial).unwrap();
    assert_eq!(safe.twin_leaks(), 0);
    assert!(before.twin_leaks() > 0);
    assert_eq!(safe.working_counts, [30, 40]);
    assert_eq!(before.working_counts, [60, 40]);
    // every leakage-safe training portion holds its own augmented rows
    for f in &safe.per_outer_fold {
        let augmented = f.train_subjects.iter().filter(|s| source_subject(s) != s.as_str()).count();
        let originals_hc = 30 - f.test_hc;
        assert_eq!(augmented, originals_hc);
    }
}

#[test]
fn grid_search_ties_go_to_the_first_combination() {
    // one feature separates the classes with a wide gap: every setting is perfect
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { -5.0 - i as f64 * 0.01 } else { 5.0 + i as f64 * 0.01 }]).collect();
    let labels: Vec<Label> = (0..40).map(|i| if i < 20 { Label::Hc } else { Label::Pd }).collect();
    let ds = LabeledDataset::new(
        Matrix::from_rows(&rows).unwrap(),
        labels,
        vec!["f".into()],
        (0..40).map(|i| format!("s{i:02}")).collect(),
    )
    .unwrap();
    let r = grid_search(&ds, &default_grid(Classifier::Lr), 5, 0, &Execution::Serial).unwrap();
    assert!(r.inner_scores.iter().all(|&s| s == 1.0));
    assert_eq!(r.best_index, 0);
    assert_eq!(r.best, r.combinations[0]);

    let only = ParamSet::Lr(LogisticParams::new(0.5, 1e-3));
    let r = grid_search(&ds, &HyperGrid::single(only), 5, 0, &Execution::Serial).unwrap();
    assert_eq!((r.best_index, r.best, r.combinations.len()), (0, only, 1));
}

#[test]
fn seeds_change_the_split_but_not_the_protocol() {
    let ds = cohort(30, 30, 0.5, 5);
    let grid = default_grid(Classifier::Lr);
    let a = nested_cv(&ds, &grid, &config(1, LeakageMode::LeakageSafe), &Execution::Serial).unwrap();
    let b = nested_cv(&ds, &grid, &config(2, LeakageMode::LeakageSafe), &Execution::Serial).unwrap();
    assert_ne!(a.per_outer_fold[0].test_subjects, b.per_outer_fold[0].test_subjects);
    assert_eq!(a.per_outer_fold.len(), b.per_outer_fold.len());
}

#[test]
fn invalid_protocols_are_rejected() {
    let ds = cohort(10, 10, 0.5, 6);
    let grid = default_grid(Classifier::Lr);
    let bad = NestedCvConfig { outer_k: 1, ..NestedCvConfig::default() };
    assert!(nested_cv(&ds, &grid, &bad, &Execution::Serial).is_err());
    let too_many = NestedCvConfig { outer_k: 11, ..NestedCvConfig::default() };
    assert!(nested_cv(&ds, &grid, &too_many, &Execution::Serial).is_err());
}
