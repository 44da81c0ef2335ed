mod common;

use common::oracle_filter;
use conf_ensemble::*;

fn overlapping_blobs() -> Data {
    generate_blobs(&BlobConfig {
        num_classes: 3,
        per_class: 200,
        dim: 3,
        spread: 1.0,
        overlap: 0.6,
        seed: 31,
    })
    .unwrap()
}

fn config(members: usize, thresholds: Vec<f64>, rule: SelectionRule) -> BuildConfig {
    BuildConfig {
        num_members: members,
        training_thresholds: thresholds,
        selection_rule: rule,
        classifier: ClassifierSpec::mlp(3, 6, 3, 8),
        train: TrainConfig {
            epochs: 15,
            batch_size: 32,
            learning_rate: 0.05,
            weight_decay: 1e-3,
            ..TrainConfig::default()
        },
        min_subset_size: None,
        histogram_bins: 10,
    }
}

#[test]
fn selections_agree_with_per_sample_oracle() {
    let data = overlapping_blobs();
    let (manifest, report) = build_ensemble(&data, &config(3, vec![0.1, 0.1], SelectionRule::Nested)).unwrap();
    let full = SubsetView::full(&data);
    for (level, member) in manifest.members.iter().enumerate() {
        for t in [0.0, 0.05, 0.1, 0.2, 0.3, 0.45, 0.5] {
            let rebased = select_next_subset_rebased(&full, &data, member, t).unwrap();
            assert_eq!(rebased.indices(), oracle_filter(full.indices(), &data, member, t), "level {level} t {t}");
            let pool = &report.subsets[level];
            let nested = select_next_subset_nested(pool, &data, member, t).unwrap();
            assert_eq!(nested.indices(), oracle_filter(pool.indices(), &data, member, t));
            assert!(nested.is_subset_of(pool));
        }
    }
}

/// Three-member rebased build with the reference thresholds (0.01, 0.01).
/// Sizes were recorded from this exact configuration.
#[test]
fn rebased_three_member_regression() {
    let data: Data = generate_blobs(&BlobConfig {
        num_classes: 3,
        per_class: 200,
        dim: 3,
        spread: 1.0,
        overlap: 0.45,
        seed: 31,
    })
    .unwrap();
    let mut cfg = config(3, vec![0.01, 0.01], SelectionRule::Rebased);
    cfg.train.epochs = 30;
    cfg.train.learning_rate = 0.2;
    let (manifest, report) = build_ensemble(&data, &cfg).unwrap();
    assert_eq!(manifest.num_members(), 3);
    let sizes = report.subset_sizes();
    println!("rebased subset sizes {sizes:?}");
    assert_eq!(sizes, REBASED_SIZES.to_vec());
    let full = SubsetView::full(&data);
    for view in &report.subsets[1..] {
        assert!(view.is_subset_of(&full));
    }
    assert_eq!(manifest.member_info[2].subset_digest, report.subsets[2].digest());
}

const REBASED_SIZES: [usize; 3] = [600, 509, 473];

#[test]
fn rebased_level_two_escapes_level_one_pool() {
    // With a higher threshold the rebased level-2 pool is drawn from all of
    // the data and picks samples member 0 was confident about.
    let data = overlapping_blobs();
    let (_, report) = build_ensemble(&data, &config(3, vec![0.2, 0.2], SelectionRule::Rebased)).unwrap();
    println!("sizes {:?}", report.subset_sizes());
    assert!(!report.subsets[2].is_subset_of(&report.subsets[1]));
}

#[test]
fn nested_and_rebased_agree_at_level_one() {
    let data = overlapping_blobs();
    let (_, nested) = build_ensemble(&data, &config(2, vec![0.1], SelectionRule::Nested)).unwrap();
    let (_, rebased) = build_ensemble(&data, &config(2, vec![0.1], SelectionRule::Rebased)).unwrap();
    assert_eq!(nested.subsets[1], rebased.subsets[1]);
}

#[test]
fn report_histograms_cover_each_pool() {
    let data = overlapping_blobs();
    let (_, report) = build_ensemble(&data, &config(2, vec![0.2], SelectionRule::Nested)).unwrap();
    for m in &report.members {
        assert_eq!(m.uncertainty_histogram.total(), m.subset_size);
        assert_eq!(m.probability_histogram.total(), m.subset_size);
    }
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["members"].as_array().unwrap().len(), 2);
    assert!(json.get("subsets").is_none());
}

#[test]
fn small_pools_abort_with_level() {
    let data = overlapping_blobs();
    let mut cfg = config(2, vec![0.2], SelectionRule::Nested);
    cfg.min_subset_size = Some(data.len());
    match build_ensemble(&data, &cfg) {
        Err(Error::DegenerateSubset { level: 1, min, .. }) => assert_eq!(min, data.len()),
        other => panic!("unexpected {other:?}"),
    }
}
