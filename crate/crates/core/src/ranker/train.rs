use super::config::{ConfigError, ScorerConfig};
use super::features::{featurize, SolutionFeatures};
use super::network::{pair_probability, pairwise_loss, Gradients, RankerModel};
use super::LabeledPair;
use crate::par::{map_indexed, Parallelism};
use crate::seed;
use rand::seq::SliceRandom;

/// Gradients are accumulated over fixed chunks of this many pairs and
/// summed in chunk order, so results do not depend on the worker count.
pub(crate) const GRAD_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub a: SolutionFeatures,
    pub b: SolutionFeatures,
    pub label: u8,
}

pub fn featurize_pairs(pairs: &[LabeledPair], par: Parallelism) -> Vec<PairSample> {
    map_indexed(pairs.len(), par, |i| {
        let p = &pairs[i];
        let m = p.instance.distance_matrix();
        PairSample {
            a: featurize(&p.instance, &m, &p.a),
            b: featurize(&p.instance, &m, &p.b),
            label: p.label,
        }
    })
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch} (batch mean score {mean_score})")]
    NonFinite { epoch: usize, batch: usize, loss: f64, mean_score: f64 },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: RankerModel,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(model: &RankerModel, lr: f64) -> Self {
        let zeros = || model.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, model: &mut RankerModel, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, t) in model.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads.tensors[k]);
            for i in 0..t.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                t.data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Summed pairwise loss and gradients of `pairs`.
pub(crate) fn pair_gradients(model: &RankerModel, pairs: &[&PairSample]) -> (f64, Gradients) {
    let k = pairs.len();
    let mut batch: Vec<&SolutionFeatures> = pairs.iter().map(|p| &p.a).collect();
    batch.extend(pairs.iter().map(|p| &p.b));
    model.forward_backward(&batch, |scores| {
        let mut loss = 0.0;
        let mut grad = vec![0.0; 2 * k];
        for (i, p) in pairs.iter().enumerate() {
            let prob = pair_probability(scores[i], scores[k + i]);
            loss += pairwise_loss(prob, p.label);
            let d = prob - p.label as f64;
            grad[i] = d;
            grad[k + i] = -d;
        }
        (loss, grad)
    })
}

/// Gradient of a minibatch, chunked for parallel evaluation.
pub(crate) fn minibatch_gradients(
    model: &RankerModel,
    pairs: &[&PairSample],
    par: Parallelism,
) -> (f64, Gradients) {
    let chunks: Vec<&[&PairSample]> = pairs.chunks(GRAD_CHUNK).collect();
    let parts = map_indexed(chunks.len(), par, |c| pair_gradients(model, chunks[c]));
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty minibatch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    (loss, grads)
}

/// Trains a freshly initialised model for `config.epochs` epochs.
pub fn train(
    pairs: &[PairSample],
    config: &ScorerConfig,
    par: Parallelism,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    train_model(RankerModel::new(config.clone()), pairs, par, |_, _, _| {})
}

/// Continues training `model`; `on_epoch` receives each finished epoch's
/// index, its mean loss and the model as it stands.
pub fn train_model(
    mut model: RankerModel,
    pairs: &[PairSample],
    par: Parallelism,
    mut on_epoch: impl FnMut(usize, f64, &RankerModel),
) -> Result<TrainOutcome, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let config = model.config().clone();
    config.validate()?;
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut seed::rng(seed::derive(config.seed, epoch as u64 + 1)));
        let mut total = 0.0;
        for (batch_no, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&PairSample> = idx.iter().map(|&i| &pairs[i]).collect();
            let (loss, grads) = minibatch_gradients(&model, &batch, par);
            if !loss.is_finite() {
                let feats: Vec<&SolutionFeatures> = batch.iter().map(|p| &p.a).collect();
                let scores = model.score_batch(&feats);
                let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
                return Err(TrainError::NonFinite { epoch, batch: batch_no, loss, mean_score });
            }
            total += loss;
            adam.step(&mut model, &grads);
        }
        let mean = total / pairs.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean, &model);
    }
    Ok(TrainOutcome { model, epoch_losses })
}
