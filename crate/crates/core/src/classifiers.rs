//! Trainable classifiers: a linear softmax model and a one-hidden-layer MLP,
//! trained by mini-batch SGD on cross-entropy with L2 weight decay and a
//! step learning-rate schedule.
//!
//! Parameters live in one flat vector. Linear layout: `W (N x M)` row-major,
//! then `b (N)`. MLP layout: `W1 (H x M)`, `b1 (H)`, `W2 (N x H)`, `b2 (N)`.
//! The hidden activation is `tanh`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::numerics::{softmax, LogitVector, Prediction, ProbabilityVector};
use crate::scalar::Scalar;

/// Lower bound applied to `p[label]` before taking the log.
pub const LOSS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Ignored for linear models.
    #[serde(default)]
    pub hidden_units: usize,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn linear(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Linear,
            input_dim,
            num_classes,
            hidden_units: 0,
            seed,
        }
    }

    pub fn mlp(input_dim: usize, hidden_units: usize, num_classes: usize, seed: u64) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Mlp,
            input_dim,
            num_classes,
            hidden_units,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("classifier input_dim must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("classifier num_classes must be >= 2"));
        }
        if self.kind == ClassifierKind::Mlp && self.hidden_units == 0 {
            return Err(Error::invalid("mlp hidden_units must be >= 1"));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (m, n, h) = (self.input_dim, self.num_classes, self.hidden_units);
        match self.kind {
            ClassifierKind::Linear => m * n + n,
            ClassifierKind::Mlp => m * h + h + h * n + n,
        }
    }
}

/// Optimizer settings. Defaults carry the reference learning rate, weight
/// decay and step schedule (x0.3 every 15 epochs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_gamma: f64,
    pub lr_decay_every_epochs: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_decay_gamma: 0.3,
            lr_decay_every_epochs: 15,
            weight_decay: 1e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_every_epochs == 0 {
            return Err(Error::invalid(
                "epochs, batch_size and lr_decay_every_epochs must be >= 1",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) {
            return Err(Error::invalid("lr_decay_gamma must be in (0, 1]"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be >= 0"));
        }
        Ok(())
    }

    /// Step schedule: rate for a zero-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let steps = (epoch / self.lr_decay_every_epochs) as i32;
        self.learning_rate * self.lr_decay_gamma.powi(steps)
    }
}

/// Anything that maps a feature vector to per-class logits. Ensemble members
/// are consulted only through this trait.
pub trait Classifier<T: Scalar> {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn predict_logits(&self, features: &[T]) -> Result<LogitVector<T>>;

    fn predict_proba(&self, features: &[T]) -> Result<ProbabilityVector<T>> {
        Ok(softmax(&self.predict_logits(features)?))
    }

    fn predict(&self, features: &[T]) -> Result<Prediction<T>> {
        Ok(Prediction::from_probabilities(&self.predict_proba(features)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    spec: ClassifierSpec,
    parameters: Vec<T>,
    training_fingerprint: String,
}

/// Deterministic fan-based uniform initialization. Biases start at zero.
pub fn init_model<T: Scalar>(spec: &ClassifierSpec) -> Result<TrainedModel<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut params = Vec::with_capacity(spec.parameter_count());
    let mut layer = |params: &mut Vec<T>, fan_in: usize, fan_out: usize| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(T::of(rng.random_range(-a..=a)));
        }
        params.extend(std::iter::repeat_n(T::zero(), fan_out));
    };
    let (m, n, h) = (spec.input_dim, spec.num_classes, spec.hidden_units);
    match spec.kind {
        ClassifierKind::Linear => layer(&mut params, m, n),
        ClassifierKind::Mlp => {
            layer(&mut params, m, h);
            layer(&mut params, h, n);
        }
    }
    let mut h = Sha256::new();
    h.update(b"init");
    h.update(serde_json::to_vec(spec)?);
    Ok(TrainedModel {
        spec: spec.clone(),
        parameters: params,
        training_fingerprint: hex::encode(h.finalize()),
    })
}

impl<T: Scalar> TrainedModel<T> {
    pub fn from_parameters(
        spec: ClassifierSpec,
        parameters: Vec<T>,
        training_fingerprint: impl Into<String>,
    ) -> Result<Self> {
        spec.validate()?;
        if parameters.len() != spec.parameter_count() {
            return Err(Error::invalid(format!(
                "{} parameters given, spec requires {}",
                parameters.len(),
                spec.parameter_count()
            )));
        }
        Ok(TrainedModel {
            spec,
            parameters,
            training_fingerprint: training_fingerprint.into(),
        })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn parameters(&self) -> &[T] {
        &self.parameters
    }

    pub fn training_fingerprint(&self) -> &str {
        &self.training_fingerprint
    }

    fn check_dim(&self, features: &[T]) -> Result<()> {
        if features.len() != self.spec.input_dim {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.spec.input_dim,
                features.len()
            )));
        }
        Ok(())
    }

    /// Returns `(hidden activations, logits)`; hidden is empty for linear models.
    fn forward(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let (m, n, h) = (self.spec.input_dim, self.spec.num_classes, self.spec.hidden_units);
        let p = &self.parameters;
        match self.spec.kind {
            ClassifierKind::Linear => (Vec::new(), affine(&p[..m * n], &p[m * n..], x)),
            ClassifierKind::Mlp => {
                let (w1, rest) = p.split_at(m * h);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h * n);
                let hidden: Vec<T> = affine(w1, b1, x).into_iter().map(T::tanh).collect();
                let logits = affine(w2, b2, &hidden);
                (hidden, logits)
            }
        }
    }

    /// Adds the gradient of one sample's cross-entropy to `grad` and returns
    /// the sample's loss.
    fn accumulate(&self, sample: &Sample<T>, grad: &mut [T]) -> T {
        let (m, n, h) = (self.spec.input_dim, self.spec.num_classes, self.spec.hidden_units);
        let x = &sample.features;
        let (hidden, logits) = self.forward(x);
        let probs = softmax_raw(&logits);
        let loss = clamped_nll(probs[sample.label]);

        // d loss / d logits = p - onehot(label). The clamp is ignored here.
        let mut dz = probs;
        dz[sample.label] = dz[sample.label] - T::one();

        match self.spec.kind {
            ClassifierKind::Linear => {
                let (gw, gb) = grad.split_at_mut(m * n);
                outer_add(gw, gb, &dz, x);
            }
            ClassifierKind::Mlp => {
                let w2 = &self.parameters[m * h + h..m * h + h + h * n];
                let (g1, g2) = grad.split_at_mut(m * h + h);
                let (gw2, gb2) = g2.split_at_mut(h * n);
                outer_add(gw2, gb2, &dz, &hidden);
                let mut da = vec![T::zero(); h];
                for (k, &dzk) in dz.iter().enumerate() {
                    let row = &w2[k * h..(k + 1) * h];
                    for (d, &w) in da.iter_mut().zip(row) {
                        *d = *d + w * dzk;
                    }
                }
                for (d, &a) in da.iter_mut().zip(&hidden) {
                    *d = *d * (T::one() - a * a);
                }
                let (gw1, gb1) = g1.split_at_mut(m * h);
                outer_add(gw1, gb1, &da, x);
            }
        }
        loss
    }

    /// Mean cross-entropy over `samples` plus `weight_decay / 2 * |theta|^2`,
    /// and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, samples: &[Sample<T>], weight_decay: T) -> Result<(T, Vec<T>)> {
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        for s in samples {
            self.check_dim(&s.features)?;
            self.check_label(s.label)?;
        }
        let mut grad = vec![T::zero(); self.parameters.len()];
        let mut loss = T::zero();
        for s in samples {
            loss = loss + self.accumulate(s, &mut grad);
        }
        let inv = T::one() / T::of(samples.len() as f64);
        let half = T::of(0.5);
        let mut norm = T::zero();
        for (g, &p) in grad.iter_mut().zip(&self.parameters) {
            *g = *g * inv + weight_decay * p;
            norm = norm + p * p;
        }
        Ok((loss * inv + half * weight_decay * norm, grad))
    }

    /// Mean cross-entropy without the decay term.
    pub fn mean_loss(&self, samples: &[Sample<T>]) -> Result<T> {
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut total = T::zero();
        for s in samples {
            self.check_dim(&s.features)?;
            self.check_label(s.label)?;
            let (_, logits) = self.forward(&s.features);
            total = total + clamped_nll(softmax_raw(&logits)[s.label]);
        }
        Ok(total / T::of(samples.len() as f64))
    }

    /// Fraction of samples whose most probable class is the label.
    pub fn accuracy(&self, data: &Dataset<T>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("accuracy of an empty dataset"));
        }
        let mut hits = 0usize;
        for s in data.samples() {
            if self.predict(&s.features)?.class_index == s.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.spec.num_classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.spec.num_classes
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Classifier<T> for TrainedModel<T> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    fn predict_logits(&self, features: &[T]) -> Result<LogitVector<T>> {
        self.check_dim(features)?;
        LogitVector::new(self.forward(features).1)
    }
}

fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// `gw += d x^T`, `gb += d`.
fn outer_add<T: Scalar>(gw: &mut [T], gb: &mut [T], d: &[T], x: &[T]) {
    let cols = x.len();
    for (r, &dr) in d.iter().enumerate() {
        gb[r] = gb[r] + dr;
        for (g, &xi) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g = *g + dr * xi;
        }
    }
}

fn softmax_raw<T: Scalar>(logits: &[T]) -> Vec<T> {
    let shift = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - shift).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn clamped_nll<T: Scalar>(p: T) -> T {
    -p.max(T::of(LOSS_CLAMP)).ln()
}

/// `-ln p[label]`, with `p[label]` clamped below at 1e-12.
pub fn cross_entropy_loss<T: Scalar>(p: &ProbabilityVector<T>, label: usize) -> Result<T> {
    let v = p.values();
    if label >= v.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            v.len()
        )));
    }
    Ok(clamped_nll(v[label]))
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub model: TrainedModel<T>,
    /// Mean cross-entropy over the training data after each epoch.
    pub epoch_losses: Vec<T>,
}

impl<T: Scalar> FitOutcome<T> {
    pub fn final_loss(&self) -> T {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

pub fn fit<T: Scalar>(model: &TrainedModel<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainedModel<T>> {
    Ok(fit_with_history(model, data, cfg)?.model)
}

/// Runs `epochs * ceil(|data| / batch_size)` SGD steps. Batch order comes
/// from `cfg.seed` alone.
pub fn fit_with_history<T: Scalar>(
    model: &TrainedModel<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if data.feature_dim() != model.spec.input_dim {
        return Err(Error::invalid(format!(
            "dataset has {} features, model expects {}",
            data.feature_dim(),
            model.spec.input_dim
        )));
    }
    if data.num_classes() > model.spec.num_classes {
        return Err(Error::invalid(format!(
            "dataset has {} classes, model has {}",
            data.num_classes(),
            model.spec.num_classes
        )));
    }

    let mut current = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let decay = T::of(cfg.weight_decay);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let lr = T::of(cfg.learning_rate_at(epoch));
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data.samples()[i].clone()));
            let (_, grad) = current.loss_and_gradient(&batch, decay)?;
            for (p, g) in current.parameters.iter_mut().zip(grad) {
                *p = *p - lr * g;
            }
        }
        epoch_losses.push(current.mean_loss(data.samples())?);
    }

    let mut h = Sha256::new();
    h.update(model.training_fingerprint.as_bytes());
    h.update(serde_json::to_vec(&model.spec)?);
    h.update(serde_json::to_vec(cfg)?);
    h.update(data.digest().as_bytes());
    current.training_fingerprint = hex::encode(h.finalize());

    Ok(FitOutcome {
        model: current,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_blobs, BlobConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_counts() {
        assert_eq!(ClassifierSpec::linear(4, 3, 0).parameter_count(), 15);
        assert_eq!(ClassifierSpec::mlp(4, 5, 3, 0).parameter_count(), 43);
        let m: TrainedModel<f64> = init_model(&ClassifierSpec::mlp(4, 5, 3, 0)).unwrap();
        assert_eq!(m.parameters().len(), 43);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = ClassifierSpec::mlp(6, 4, 3, 42);
        let a: TrainedModel<f64> = init_model(&spec).unwrap();
        let b: TrainedModel<f64> = init_model(&spec).unwrap();
        let bits = |m: &TrainedModel<f64>| m.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let bound = (6.0f64 / 10.0).sqrt();
        assert!(a.parameters()[..24].iter().all(|v| v.abs() <= bound));
        let c: TrainedModel<f64> = init_model(&ClassifierSpec::mlp(6, 4, 3, 43)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn invalid_specs() {
        assert!(ClassifierSpec::linear(0, 3, 0).validate().is_err());
        assert!(ClassifierSpec::linear(2, 1, 0).validate().is_err());
        assert!(ClassifierSpec::mlp(2, 0, 3, 0).validate().is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let one_hot = ProbabilityVector::new(vec![0.0f64, 1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy_loss(&one_hot, 1).unwrap(), 0.0);
        let half = ProbabilityVector::new(vec![0.5f64, 0.5]).unwrap();
        assert_abs_diff_eq!(cross_entropy_loss(&half, 0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-6);
        let uniform = ProbabilityVector::new(vec![0.25f64; 4]).unwrap();
        for label in 0..4 {
            assert_abs_diff_eq!(cross_entropy_loss(&uniform, label).unwrap(), 4f64.ln(), epsilon = 1e-6);
        }
        assert!(cross_entropy_loss(&uniform, 4).is_err());
        // Clamped rather than infinite.
        assert_abs_diff_eq!(cross_entropy_loss(&one_hot, 0).unwrap(), -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn zero_linear_model_emits_zero_logits() {
        let spec = ClassifierSpec::linear(3, 4, 0);
        let m = TrainedModel::from_parameters(spec, vec![0.0f64; 16], "zero").unwrap();
        assert_eq!(m.predict_logits(&[1.0, -2.0, 5.0]).unwrap().values(), &[0.0; 4]);
    }

    #[test]
    fn identity_weights_make_basis_logit_maximal() {
        let (m, n) = (4, 4);
        let mut params = vec![0.0f64; m * n + n];
        for k in 0..n {
            params[k * m + k] = 1.0;
        }
        let model = TrainedModel::from_parameters(ClassifierSpec::linear(m, n, 0), params, "eye").unwrap();
        for k in 0..n {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            let logits = model.predict_logits(&e).unwrap();
            for j in 0..n {
                if j != k {
                    assert!(logits.values()[k] > logits.values()[j]);
                }
            }
        }
    }

    #[test]
    fn prediction_errors_on_dim_mismatch() {
        let m: TrainedModel<f64> = init_model(&ClassifierSpec::linear(3, 2, 0)).unwrap();
        assert!(m.predict_logits(&[1.0, 2.0]).is_err());
        assert_eq!(m.predict_logits(&[1.0, 2.0, 3.0]).unwrap(), m.predict_logits(&[1.0, 2.0, 3.0]).unwrap());
    }

    #[test]
    fn learning_rate_steps() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate_at(0), 1e-3);
        assert_eq!(cfg.learning_rate_at(14), 1e-3);
        assert_abs_diff_eq!(cfg.learning_rate_at(15), 3e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(cfg.learning_rate_at(30), 9e-5, epsilon = 1e-18);
    }

    #[test]
    fn fit_rejects_empty_and_mismatched_data() {
        let m: TrainedModel<f64> = init_model(&ClassifierSpec::linear(2, 2, 0)).unwrap();
        let empty = Dataset::new("e", 2, 2, vec![]).unwrap();
        assert!(matches!(fit(&m, &empty, &TrainConfig::default()), Err(Error::EmptyTrainingSet)));
        let wrong = Dataset::new("w", 2, 3, vec![Sample { features: vec![0.0; 3], label: 0 }]).unwrap();
        assert!(matches!(fit(&m, &wrong, &TrainConfig::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn fit_is_deterministic() {
        let data: Dataset<f64> = generate_blobs(&BlobConfig {
            num_classes: 3,
            per_class: 30,
            dim: 3,
            spread: 1.0,
            overlap: 0.5,
            seed: 5,
        })
        .unwrap();
        let m = init_model(&ClassifierSpec::mlp(3, 4, 3, 9)).unwrap();
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.05, batch_size: 8, ..TrainConfig::default() };
        let a = fit(&m, &data, &cfg).unwrap();
        let b = fit(&m, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.training_fingerprint(), m.training_fingerprint());
    }
}
