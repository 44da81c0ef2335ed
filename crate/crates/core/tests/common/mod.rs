//! Independent oracles shared by the integration suites. Nothing here calls
//! the library's softmax, uncertainty or cascade code.
#![allow(dead_code)]

use conf_ensemble::classifiers::Classifier;
use conf_ensemble::numerics::{LogitVector, ProbabilityVector};
use conf_ensemble::{Consensus, Dataset, Model, Resolution, Result, Sample, TrainedModel};

/// Textbook softmax without max-shift, for moderate logits only.
pub fn naive_softmax(logits: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = logits.iter().map(|v| v.exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Uncertainty by sorting a copy and branching on the top value.
pub fn brute_uncertainty(p: &[f64]) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = sorted[0];
    if top <= 0.5 {
        top
    } else {
        1.0 - top
    }
}

/// First index holding the maximum.
pub fn brute_argmax(p: &[f64]) -> usize {
    let top = p.iter().cloned().fold(f64::MIN, f64::max);
    p.iter().position(|&v| v == top).unwrap()
}

/// Brute-force selection filter: score each pool sample from raw logits.
pub fn oracle_filter(pool: &[usize], data: &Dataset<f64>, model: &Model, threshold: f64) -> Vec<usize> {
    pool.iter()
        .copied()
        .filter(|&i| {
            let logits = model.predict_logits(&data.samples()[i].features).unwrap();
            brute_uncertainty(&naive_softmax(logits.values())) > threshold
        })
        .collect()
}

/// Gradient of `model.loss_and_gradient` by central differences.
pub fn finite_difference_gradient(model: &Model, samples: &[Sample<f64>], weight_decay: f64, step: f64) -> Vec<f64> {
    let base = model.parameters().to_vec();
    (0..base.len())
        .map(|k| {
            let eval = |delta: f64| {
                let mut p = base.clone();
                p[k] += delta;
                let m = TrainedModel::from_parameters(model.spec().clone(), p, "fd").unwrap();
                m.loss_and_gradient(samples, weight_decay).unwrap().0
            };
            (eval(step) - eval(-step)) / (2.0 * step)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// amplifying round-off in the difference quotient.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Stub member returning a fixed probability table row per sample id
/// (the sample's first feature).
pub struct TableMember {
    pub rows: Vec<Vec<f64>>,
}

impl Classifier<f64> for TableMember {
    fn input_dim(&self) -> usize {
        1
    }

    fn num_classes(&self) -> usize {
        self.rows[0].len()
    }

    fn predict_logits(&self, x: &[f64]) -> Result<LogitVector<f64>> {
        LogitVector::new(self.rows[x[0] as usize].iter().map(|p| p.max(1e-300).ln()).collect())
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ProbabilityVector<f64>> {
        ProbabilityVector::new(self.rows[x[0] as usize].clone())
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub chosen_class: usize,
    pub resolution: Resolution,
    pub consulted: usize,
}

/// Cascade decision rule written out directly from the probability tables.
pub fn replay_cascade(members: &[TableMember], thresholds: &[f64], consensus: Consensus, sample: usize) -> ReplayOutcome {
    let mut classes = Vec::new();
    let mut scores = Vec::new();
    for (level, m) in members.iter().enumerate() {
        let p = &m.rows[sample];
        let u = brute_uncertainty(p);
        classes.push(brute_argmax(p));
        scores.push(u);
        if u < thresholds[level] {
            return ReplayOutcome {
                chosen_class: classes[level],
                resolution: Resolution::AcceptedAt { level },
                consulted: level + 1,
            };
        }
    }
    let pick = match consensus {
        Consensus::LastMember => members.len() - 1,
        Consensus::MostConfident => {
            let mut best = 0;
            for k in 1..scores.len() {
                if scores[k] < scores[best] {
                    best = k;
                }
            }
            best
        }
    };
    ReplayOutcome {
        chosen_class: classes[pick],
        resolution: Resolution::Consensus,
        consulted: members.len(),
    }
}

/// Dataset whose sample `i` has the single feature `i`.
pub fn id_dataset(n: usize, labels: &[usize], num_classes: usize) -> Dataset<f64> {
    let samples = (0..n)
        .map(|i| Sample {
            features: vec![i as f64],
            label: labels[i],
        })
        .collect();
    Dataset::new("ids", num_classes, 1, samples).unwrap()
}
