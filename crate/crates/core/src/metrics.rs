//! Top-1 accuracy, expected calibration error and correct/incorrect score
//! histograms.
//!
//! ECE and histograms share one binning rule: `K` equal-width bins over the
//! score range, left-closed, with the last bin also closed on the right.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Prediction;
use crate::scalar::Scalar;

pub const DEFAULT_ECE_BINS: usize = 15;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

pub fn top1_accuracy<T: Scalar>(chosen: &[Prediction<T>], labels: &[usize]) -> Result<f64> {
    if chosen.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} labels",
            chosen.len(),
            labels.len()
        )));
    }
    if chosen.is_empty() {
        return Err(Error::invalid("accuracy of an empty prediction list"));
    }
    let hits = chosen
        .iter()
        .zip(labels)
        .filter(|(p, &l)| p.class_index == l)
        .count();
    Ok(hits as f64 / chosen.len() as f64)
}

/// Bin of `score` among `bins` equal-width bins over `[0, upper]`.
pub fn bin_index(score: f64, upper: f64, bins: usize) -> usize {
    let raw = (score / upper * bins as f64).floor();
    if raw < 0.0 {
        0
    } else {
        (raw as usize).min(bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    /// Mean top probability of the bin, 0 when empty.
    pub mean_top_probability: f64,
    /// Fraction of the bin's predictions that are correct, 0 when empty.
    pub fraction_correct: f64,
    /// Share of all samples that fall into the bin.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub num_bins: usize,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
}

/// `sum_i P(i) * |o_i - e_i|` where `o_i` is bin accuracy, `e_i` the bin's
/// mean top probability and `P(i)` its share of samples.
pub fn expected_calibration_error<T: Scalar>(
    top_probs: &[T],
    correct: &[bool],
    num_bins: usize,
) -> Result<CalibrationReport> {
    if num_bins == 0 {
        return Err(Error::invalid("ECE needs at least one bin"));
    }
    if top_probs.len() != correct.len() {
        return Err(Error::invalid(format!(
            "{} probabilities but {} correctness flags",
            top_probs.len(),
            correct.len()
        )));
    }
    if top_probs.is_empty() {
        return Err(Error::invalid("ECE of an empty sample"));
    }

    let mut counts = vec![0usize; num_bins];
    let mut prob_sums = vec![0.0f64; num_bins];
    let mut hits = vec![0usize; num_bins];
    for (i, (&p, &ok)) in top_probs.iter().zip(correct).enumerate() {
        let p = p.as_f64();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {i} = {p} outside [0, 1]")));
        }
        let b = bin_index(p, 1.0, num_bins);
        counts[b] += 1;
        prob_sums[b] += p;
        hits[b] += ok as usize;
    }

    let total = top_probs.len() as f64;
    let width = 1.0 / num_bins as f64;
    let mut ece = 0.0;
    let bins = (0..num_bins)
        .map(|b| {
            let count = counts[b];
            let (mean, frac) = if count == 0 {
                (0.0, 0.0)
            } else {
                (prob_sums[b] / count as f64, hits[b] as f64 / count as f64)
            };
            let weight = count as f64 / total;
            ece += weight * (frac - mean).abs();
            CalibrationBin {
                left: b as f64 * width,
                right: (b + 1) as f64 * width,
                count,
                mean_top_probability: mean,
                fraction_correct: frac,
                weight,
            }
        })
        .collect();

    Ok(CalibrationReport {
        num_bins,
        bins,
        ece,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Ranges over `[0, 0.5]`.
    Uncertainty,
    /// Ranges over `[0, 1]`.
    TopProbability,
}

impl ScoreKind {
    pub fn upper(self) -> f64 {
        match self {
            ScoreKind::Uncertainty => 0.5,
            ScoreKind::TopProbability => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub score_kind: ScoreKind,
    pub bin_edges: Vec<f64>,
    pub correct_counts: Vec<usize>,
    pub incorrect_counts: Vec<usize>,
}

impl ScoreHistogram {
    pub fn total(&self) -> usize {
        self.correct_counts.iter().sum::<usize>() + self.incorrect_counts.iter().sum::<usize>()
    }

    /// `bin_left,bin_right,correct,incorrect` rows under a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,correct,incorrect\n");
        for b in 0..self.correct_counts.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.correct_counts[b],
                self.incorrect_counts[b]
            );
        }
        out
    }
}

pub fn score_histogram<T: Scalar>(
    scores: &[T],
    correct: &[bool],
    kind: ScoreKind,
    bins: usize,
) -> Result<ScoreHistogram> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if scores.len() != correct.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} correctness flags",
            scores.len(),
            correct.len()
        )));
    }
    let upper = kind.upper();
    let mut correct_counts = vec![0; bins];
    let mut incorrect_counts = vec![0; bins];
    for (i, (&s, &ok)) in scores.iter().zip(correct).enumerate() {
        let s = s.as_f64();
        if !(0.0..=upper).contains(&s) {
            return Err(Error::invalid(format!(
                "score {i} = {s} outside [0, {upper}] for {kind:?}"
            )));
        }
        let b = bin_index(s, upper, bins);
        if ok {
            correct_counts[b] += 1;
        } else {
            incorrect_counts[b] += 1;
        }
    }
    let bin_edges = (0..=bins).map(|b| upper * b as f64 / bins as f64).collect();
    Ok(ScoreHistogram {
        score_kind: kind,
        bin_edges,
        correct_counts,
        incorrect_counts,
    })
}
