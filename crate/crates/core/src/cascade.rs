//! Cascaded inference. Members are consulted in order; the first whose
//! uncertainty is strictly below its level's run-time threshold answers.
//! When no member is confident a consensus heuristic picks among all of
//! their predictions.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::Classifier;
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{expected_calibration_error, CalibrationReport};
use crate::numerics::Prediction;
use crate::scalar::Scalar;

/// Run-time threshold grid evaluated by default.
pub const DEFAULT_RUNTIME_GRID: [f64; 4] = [0.4, 0.2, 0.1, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consensus {
    LastMember,
    MostConfident,
}

impl std::str::FromStr for Consensus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last_member" | "last-member" => Ok(Consensus::LastMember),
            "most_confident" | "most-confident" => Ok(Consensus::MostConfident),
            other => Err(Error::Config(format!(
                "unknown consensus '{other}' (expected last_member or most_confident)"
            ))),
        }
    }
}

impl std::fmt::Display for Consensus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Consensus::LastMember => "last_member",
            Consensus::MostConfident => "most_confident",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    /// One threshold per member, each in `[0, 0.5]`.
    pub runtime_thresholds: Vec<f64>,
    pub consensus: Consensus,
}

impl RuntimeConfig {
    /// The same threshold on every one of `members` levels.
    pub fn homogeneous(threshold: f64, members: usize, consensus: Consensus) -> Self {
        RuntimeConfig {
            runtime_thresholds: vec![threshold; members],
            consensus,
        }
    }

    pub fn validate(&self, members: usize) -> Result<()> {
        if self.runtime_thresholds.len() != members {
            return Err(Error::Config(format!(
                "{} run-time thresholds for {members} members",
                self.runtime_thresholds.len()
            )));
        }
        if let Some(t) = self
            .runtime_thresholds
            .iter()
            .find(|t| !(0.0..=0.5).contains(*t))
        {
            return Err(Error::Config(format!("run-time threshold {t} outside [0, 0.5]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep<T> {
    pub member: usize,
    pub prediction: Prediction<T>,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Resolution {
    AcceptedAt { level: usize },
    Consensus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTrace<T> {
    pub steps: Vec<TraceStep<T>>,
    pub resolution: Resolution,
    pub chosen: Prediction<T>,
}

pub fn consensus_last_member<T: Scalar>(predictions: &[Prediction<T>]) -> Result<Prediction<T>> {
    predictions
        .last()
        .copied()
        .ok_or_else(|| Error::invalid("consensus over no predictions"))
}

/// Lowest uncertainty wins; the earliest member wins ties.
pub fn consensus_most_confident<T: Scalar>(predictions: &[Prediction<T>]) -> Result<Prediction<T>> {
    let mut iter = predictions.iter();
    let first = *iter
        .next()
        .ok_or_else(|| Error::invalid("consensus over no predictions"))?;
    Ok(iter.fold(first, |best, p| {
        if p.uncertainty.value() < best.uncertainty.value() {
            *p
        } else {
            best
        }
    }))
}

pub fn apply_consensus<T: Scalar>(rule: Consensus, predictions: &[Prediction<T>]) -> Result<Prediction<T>> {
    match rule {
        Consensus::LastMember => consensus_last_member(predictions),
        Consensus::MostConfident => consensus_most_confident(predictions),
    }
}

pub fn cascade_predict<T, M>(
    members: &[M],
    rcfg: &RuntimeConfig,
    features: &[T],
) -> Result<(Prediction<T>, CascadeTrace<T>)>
where
    T: Scalar,
    M: Classifier<T>,
{
    if members.is_empty() {
        return Err(Error::invalid("cascade over an empty ensemble"));
    }
    rcfg.validate(members.len())?;

    let mut steps = Vec::with_capacity(members.len());
    for (level, (member, &threshold)) in members.iter().zip(&rcfg.runtime_thresholds).enumerate() {
        let prediction = member.predict(features)?;
        let accepted = prediction.uncertainty.value() < T::of(threshold);
        steps.push(TraceStep {
            member: level,
            prediction,
            accepted,
        });
        if accepted {
            let trace = CascadeTrace {
                steps,
                resolution: Resolution::AcceptedAt { level },
                chosen: prediction,
            };
            return Ok((prediction, trace));
        }
    }

    let all: Vec<Prediction<T>> = steps.iter().map(|s| s.prediction).collect();
    let chosen = apply_consensus(rcfg.consensus, &all)?;
    Ok((
        chosen,
        CascadeTrace {
            steps,
            resolution: Resolution::Consensus,
            chosen,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome<T> {
    pub index: usize,
    pub true_label: usize,
    pub correct: bool,
    pub trace: CascadeTrace<T>,
}

/// How many queries each level answered, and how many fell to consensus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utilization {
    pub total: usize,
    pub answered_at_level: Vec<usize>,
    pub consensus: usize,
}

impl Utilization {
    pub fn level_fraction(&self, level: usize) -> f64 {
        self.answered_at_level[level] as f64 / self.total as f64
    }

    pub fn consensus_fraction(&self) -> f64 {
        self.consensus as f64 / self.total as f64
    }

    /// Samples resolved at any level `<= level`.
    pub fn resolved_through(&self, level: usize) -> usize {
        self.answered_at_level[..=level].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord<T> {
    pub runtime: RuntimeConfig,
    pub accuracy: f64,
    pub utilization: Utilization,
    pub samples: Vec<SampleOutcome<T>>,
}

impl<T: Scalar> EvaluationRecord<T> {
    pub fn chosen(&self) -> Vec<Prediction<T>> {
        self.samples.iter().map(|s| s.trace.chosen).collect()
    }

    pub fn correct_flags(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.correct).collect()
    }

    pub fn calibration(&self, num_bins: usize) -> Result<CalibrationReport> {
        let probs: Vec<T> = self.samples.iter().map(|s| s.trace.chosen.top_probability).collect();
        expected_calibration_error(&probs, &self.correct_flags(), num_bins)
    }

    /// Per-sample CSV: index, chosen and true class, answering level and the
    /// uncertainty seen at every consulted level (blank when not consulted).
    pub fn to_csv(&self) -> String {
        let levels = self.utilization.answered_at_level.len();
        let mut out = String::from("sample_index,chosen_class,true_class,answering_level");
        for l in 0..levels {
            let _ = write!(out, ",u_{l}");
        }
        out.push('\n');
        for s in &self.samples {
            let level = match s.trace.resolution {
                Resolution::AcceptedAt { level } => level.to_string(),
                Resolution::Consensus => "consensus".to_string(),
            };
            let _ = write!(out, "{},{},{},{}", s.index, s.trace.chosen.class_index, s.true_label, level);
            for l in 0..levels {
                match s.trace.steps.get(l) {
                    Some(step) => {
                        let _ = write!(out, ",{}", step.prediction.uncertainty.value());
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the cascade on every sample of `data`. Samples are scored in
/// parallel; the record keeps dataset order.
pub fn batch_evaluate<T, M>(members: &[M], rcfg: &RuntimeConfig, data: &Dataset<T>) -> Result<EvaluationRecord<T>>
where
    T: Scalar,
    M: Classifier<T> + Sync,
{
    if data.is_empty() {
        return Err(Error::invalid("evaluation dataset is empty"));
    }
    rcfg.validate(members.len())?;

    let results: Vec<Result<SampleOutcome<T>>> = data
        .samples()
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let (chosen, trace) = cascade_predict(members, rcfg, &s.features)
                .map_err(|e| Error::invalid(format!("sample {index}: {e}")))?;
            Ok(SampleOutcome {
                index,
                true_label: s.label,
                correct: chosen.class_index == s.label,
                trace,
            })
        })
        .collect();
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut utilization = Utilization {
        total: samples.len(),
        answered_at_level: vec![0; members.len()],
        consensus: 0,
    };
    let mut hits = 0usize;
    for s in &samples {
        match s.trace.resolution {
            Resolution::AcceptedAt { level } => utilization.answered_at_level[level] += 1,
            Resolution::Consensus => utilization.consensus += 1,
        }
        hits += s.correct as usize;
    }

    Ok(EvaluationRecord {
        runtime: rcfg.clone(),
        accuracy: hits as f64 / samples.len() as f64,
        utilization,
        samples,
    })
}
