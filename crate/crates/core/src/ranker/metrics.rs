use super::features::SolutionFeatures;
use super::network::{pair_probability, RankerModel};
use super::train::PairSample;
use crate::par::{map_indexed, Parallelism};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub auc: f64,
    pub pairs: usize,
}

/// Fraction of pairs where `p > 0.5` agrees with the label. `p == 0.5`
/// counts as wrong, so a constant model scores zero.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|&(&p, &y)| (y == 1 && p > 0.5) || (y == 0 && p < 0.5))
        .count();
    hits as f64 / probs.len() as f64
}

/// Area under the ROC curve via the Mann-Whitney statistic, with tied
/// probabilities sharing their average rank. Returns 0.5 when one class is
/// absent.
pub fn auc(probs: &[f64], labels: &[u8]) -> f64 {
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged over the tie group.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = n as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    (rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// Small enough that a chunk's attention activations stay in cache.
const EVAL_CHUNK: usize = 32;

/// `P(label = 1)` for every pair.
pub fn pair_probabilities(model: &RankerModel, pairs: &[PairSample], par: Parallelism) -> Vec<f64> {
    let chunks: Vec<&[PairSample]> = pairs.chunks(EVAL_CHUNK).collect();
    map_indexed(chunks.len(), par, |c| {
        let chunk = chunks[c];
        let mut batch: Vec<&SolutionFeatures> = chunk.iter().map(|p| &p.a).collect();
        batch.extend(chunk.iter().map(|p| &p.b));
        let scores = model.score_batch(&batch);
        let k = chunk.len();
        (0..k).map(|i| pair_probability(scores[i], scores[k + i])).collect::<Vec<_>>()
    })
    .concat()
}

pub fn evaluate(model: &RankerModel, pairs: &[PairSample], par: Parallelism) -> Evaluation {
    let probs = pair_probabilities(model, pairs, par);
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    Evaluation { accuracy: accuracy(&probs, &labels), auc: auc(&probs, &labels), pairs: pairs.len() }
}
