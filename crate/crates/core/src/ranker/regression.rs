//! Baseline: the same network regressing the final distance of one
//! solution, compared pairwise through its predictions.

use super::config::ScorerConfig;
use super::features::SolutionFeatures;
use super::metrics::{accuracy, auc, Evaluation};
use super::network::{pair_probability, Gradients, RankerModel};
use super::train::{Adam, PairSample, TrainError, TrainOutcome, GRAD_CHUNK};
use crate::par::{map_indexed, Parallelism};
use crate::seed;
use rand::seq::SliceRandom;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSample {
    pub features: SolutionFeatures,
    pub target: f64,
}

fn chunk_gradients(model: &RankerModel, samples: &[&RegressionSample]) -> (f64, Gradients) {
    let batch: Vec<&SolutionFeatures> = samples.iter().map(|s| &s.features).collect();
    model.forward_backward(&batch, |pred| {
        let mut loss = 0.0;
        let grad = pred
            .iter()
            .zip(samples)
            .map(|(&p, s)| {
                let e = p - s.target;
                loss += 0.5 * e * e;
                e
            })
            .collect();
        (loss, grad)
    })
}

/// Trains a regressor on squared error, starting from a constant predictor
/// of the target mean (output weights zero, bias at the mean). Shares the optimiser and batching of the pairwise
/// trainer.
pub fn train_regression(
    samples: &[RegressionSample],
    config: &ScorerConfig,
    par: Parallelism,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut model = RankerModel::new(config.clone());
    let mean = samples.iter().map(|s| s.target).sum::<f64>() / samples.len() as f64;
    model.zero_output_layer();
    model.set_output_bias(mean);
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut seed::rng(seed::derive(config.seed, epoch as u64 + 1)));
        let mut total = 0.0;
        for (batch_no, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&RegressionSample> = idx.iter().map(|&i| &samples[i]).collect();
            let chunks: Vec<&[&RegressionSample]> = batch.chunks(GRAD_CHUNK).collect();
            let parts = map_indexed(chunks.len(), par, |c| chunk_gradients(&model, chunks[c]));
            let mut iter = parts.into_iter();
            let (mut loss, mut grads) = iter.next().expect("non-empty batch");
            for (l, g) in iter {
                loss += l;
                grads.add_assign(&g);
            }
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: batch_no, loss, mean_score: f64::NAN });
            }
            total += loss;
            adam.step(&mut model, &grads);
        }
        epoch_losses.push(total / samples.len() as f64);
    }
    Ok(TrainOutcome { model, epoch_losses })
}

/// Pairwise metrics of a regressor: `a` is predicted better when its
/// predicted distance is lower.
pub fn evaluate_regression(model: &RankerModel, pairs: &[PairSample], par: Parallelism) -> Evaluation {
    let chunks: Vec<&[PairSample]> = pairs.chunks(32).collect();
    let probs = map_indexed(chunks.len(), par, |c| {
        let chunk = chunks[c];
        let mut batch: Vec<&SolutionFeatures> = chunk.iter().map(|p| &p.a).collect();
        batch.extend(chunk.iter().map(|p| &p.b));
        let pred = model.score_batch(&batch);
        let k = chunk.len();
        (0..k).map(|i| pair_probability(pred[k + i], pred[i])).collect::<Vec<_>>()
    })
    .concat();
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    Evaluation { accuracy: accuracy(&probs, &labels), auc: auc(&probs, &labels), pairs: pairs.len() }
}
