//! Sequential ensemble construction.
//!
//! Member 0 trains on the whole dataset. For every later level `s`, member
//! `s - 1` scores a pool and the samples with uncertainty strictly above the
//! level's training threshold become member `s`'s training set. The pool is
//! the previous member's own training set (nested rule) or the full dataset
//! every time (rebased rule).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Consensus, RuntimeConfig};
use crate::classifiers::{fit_with_history, init_model, Classifier, ClassifierSpec, TrainConfig, TrainedModel};
use crate::datasets::{materialize, Dataset, SubsetView};
use crate::error::{Error, Result};
use crate::manifest::{EnsembleManifest, MemberInfo};
use crate::metrics::{score_histogram, ScoreHistogram, ScoreKind, DEFAULT_HISTOGRAM_BINS};
use crate::scalar::Scalar;

/// Training threshold grid for two-member ensembles.
pub const DEFAULT_TRAINING_GRID: [f64; 3] = [0.2, 0.1, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Filter the previous member's training pool.
    Nested,
    /// Filter the full training set at every level.
    Rebased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub num_members: usize,
    /// `num_members - 1` thresholds; entry `s - 1` selects member `s`'s pool.
    pub training_thresholds: Vec<f64>,
    pub selection_rule: SelectionRule,
    pub classifier: ClassifierSpec,
    pub train: TrainConfig,
    /// Defaults to `max(2 * num_classes, 10)`.
    #[serde(default)]
    pub min_subset_size: Option<usize>,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
}

fn default_histogram_bins() -> usize {
    DEFAULT_HISTOGRAM_BINS
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_members == 0 {
            return Err(Error::Config("num_members must be >= 1".into()));
        }
        if self.training_thresholds.len() + 1 != self.num_members {
            return Err(Error::Config(format!(
                "{} members need {} training thresholds, got {}",
                self.num_members,
                self.num_members - 1,
                self.training_thresholds.len()
            )));
        }
        if let Some(t) = self
            .training_thresholds
            .iter()
            .find(|t| !(0.0..=0.5).contains(*t))
        {
            return Err(Error::Config(format!("training threshold {t} outside [0, 0.5]")));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be >= 1".into()));
        }
        self.classifier.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn min_subset_size(&self) -> usize {
        self.min_subset_size
            .unwrap_or_else(|| (2 * self.classifier.num_classes).max(10))
    }
}

/// Seed for member `level`; level 0 keeps the base seed.
pub fn member_seed(base: u64, level: usize) -> u64 {
    if level == 0 {
        return base;
    }
    // splitmix64 finalizer over the base mixed with the level.
    let mut z = base.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples of `pool` whose uncertainty under `member` is strictly above
/// `threshold`. Scoring fans out across samples; the result keeps index order.
fn filter_uncertain<T, M>(pool: &SubsetView, parent: &Dataset<T>, member: &M, threshold: f64) -> Result<SubsetView>
where
    T: Scalar,
    M: Classifier<T> + Sync,
{
    if !(0.0..=0.5).contains(&threshold) {
        return Err(Error::invalid(format!("training threshold {threshold} outside [0, 0.5]")));
    }
    pool.validate(parent)?;
    let cut = T::of(threshold);
    let keep: Vec<Option<usize>> = pool
        .indices()
        .par_iter()
        .map(|&i| {
            let u = member.predict(&parent.samples()[i].features)?.uncertainty.value();
            Ok((u > cut).then_some(i))
        })
        .collect::<Result<_>>()?;
    SubsetView::new(pool.parent_id(), keep.into_iter().flatten().collect())
}

/// Next pool drawn from the previous member's own pool.
pub fn select_next_subset_nested<T, M>(
    prev_pool: &SubsetView,
    parent: &Dataset<T>,
    member: &M,
    threshold: f64,
) -> Result<SubsetView>
where
    T: Scalar,
    M: Classifier<T> + Sync,
{
    filter_uncertain(prev_pool, parent, member, threshold)
}

/// Next pool drawn from the full training pool.
pub fn select_next_subset_rebased<T, M>(
    full_pool: &SubsetView,
    parent: &Dataset<T>,
    member: &M,
    threshold: f64,
) -> Result<SubsetView>
where
    T: Scalar,
    M: Classifier<T> + Sync,
{
    filter_uncertain(full_pool, parent, member, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub level: usize,
    pub subset_size: usize,
    pub subset_digest: String,
    pub training_seconds: f64,
    pub final_training_loss: f64,
    pub training_accuracy: f64,
    /// Member's own scores on its training pool.
    pub uncertainty_histogram: ScoreHistogram,
    pub probability_histogram: ScoreHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub dataset_id: String,
    pub selection_rule: SelectionRule,
    pub training_thresholds: Vec<f64>,
    pub members: Vec<MemberReport>,
    /// Training pool of every level, level 0 first.
    #[serde(skip)]
    pub subsets: Vec<SubsetView>,
}

impl BuildReport {
    pub fn subset_sizes(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.subset_size).collect()
    }
}

fn train_member<T: Scalar>(
    level: usize,
    pool: &SubsetView,
    data: &Dataset<T>,
    cfg: &BuildConfig,
) -> Result<(TrainedModel<T>, MemberReport)> {
    let subset = materialize(pool, data)?;
    let mut spec = cfg.classifier.clone();
    spec.seed = member_seed(spec.seed, level);
    let mut train = cfg.train.clone();
    train.seed = member_seed(train.seed, level);

    let start = Instant::now();
    let outcome = fit_with_history(&init_model(&spec)?, &subset, &train)?;
    let training_seconds = start.elapsed().as_secs_f64();
    let model = outcome.model;

    let mut uncertainties = Vec::with_capacity(subset.len());
    let mut tops = Vec::with_capacity(subset.len());
    let mut correct = Vec::with_capacity(subset.len());
    for s in subset.samples() {
        let p = model.predict(&s.features)?;
        uncertainties.push(p.uncertainty.value());
        tops.push(p.top_probability);
        correct.push(p.class_index == s.label);
    }
    let hits = correct.iter().filter(|&&c| c).count();
    let report = MemberReport {
        level,
        subset_size: pool.len(),
        subset_digest: pool.digest(),
        training_seconds,
        final_training_loss: outcome.epoch_losses.last().copied().unwrap_or_default().as_f64(),
        training_accuracy: hits as f64 / subset.len() as f64,
        uncertainty_histogram: score_histogram(&uncertainties, &correct, ScoreKind::Uncertainty, cfg.histogram_bins)?,
        probability_histogram: score_histogram(&tops, &correct, ScoreKind::TopProbability, cfg.histogram_bins)?,
    };
    Ok((model, report))
}

/// Trains all members in sequence and returns the ensemble with a report.
/// The manifest's default run-time configuration is a homogeneous 0.4 with
/// last-member consensus.
pub fn build_ensemble<T: Scalar>(data: &Dataset<T>, cfg: &BuildConfig) -> Result<(EnsembleManifest<T>, BuildReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if data.feature_dim() != cfg.classifier.input_dim {
        return Err(Error::Config(format!(
            "classifier input_dim {} does not match dataset feature_dim {}",
            cfg.classifier.input_dim,
            data.feature_dim()
        )));
    }
    if data.num_classes() > cfg.classifier.num_classes {
        return Err(Error::Config(format!(
            "classifier has {} classes but dataset has {}",
            cfg.classifier.num_classes,
            data.num_classes()
        )));
    }

    let full = SubsetView::full(data);
    let min_size = cfg.min_subset_size();
    let mut members: Vec<TrainedModel<T>> = Vec::with_capacity(cfg.num_members);
    let mut reports = Vec::with_capacity(cfg.num_members);
    let mut subsets = vec![full.clone()];

    for level in 0..cfg.num_members {
        if level > 0 {
            let prev = &members[level - 1];
            let threshold = cfg.training_thresholds[level - 1];
            let pool = match cfg.selection_rule {
                SelectionRule::Nested => select_next_subset_nested(&subsets[level - 1], data, prev, threshold)?,
                SelectionRule::Rebased => select_next_subset_rebased(&full, data, prev, threshold)?,
            };
            if pool.len() < min_size {
                return Err(Error::DegenerateSubset {
                    level,
                    size: pool.len(),
                    min: min_size,
                });
            }
            subsets.push(pool);
        }
        let (model, report) = train_member(level, &subsets[level], data, cfg)?;
        members.push(model);
        reports.push(report);
    }

    let member_info = reports
        .iter()
        .map(|r| MemberInfo {
            level: r.level,
            subset_size: r.subset_size,
            subset_digest: r.subset_digest.clone(),
        })
        .collect();
    let manifest = EnsembleManifest {
        members,
        member_info,
        selection_rule: cfg.selection_rule,
        training_thresholds: cfg.training_thresholds.clone(),
        runtime: RuntimeConfig::homogeneous(0.4, cfg.num_members, Consensus::LastMember),
        dataset_id: data.id().to_string(),
        dataset_digest: data.digest(),
    };
    let report = BuildReport {
        dataset_id: data.id().to_string(),
        selection_rule: cfg.selection_rule,
        training_thresholds: cfg.training_thresholds.clone(),
        members: reports,
        subsets,
    };
    Ok((manifest, report))
}
