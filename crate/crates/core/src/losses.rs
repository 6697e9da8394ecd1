//! Partial-label classification losses, accuracy rewards and the hybrid
//! REINFORCE objective.
//!
//! All losses average only over the classes whose label is known.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledExample;
use crate::nn::{ParamId, Tape, Tensor, Var};

/// Predictions are clamped to `[PRED_EPS, 1 − PRED_EPS]` before any log.
pub const PRED_EPS: f64 = 1e-7;

/// Rewards are rounded to multiples of `2^-REWARD_BITS` so that cumulative
/// sums and their differences are exact in `f64`.
pub const REWARD_BITS: i32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Focal,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "focal" => Ok(LossKind::Focal),
            other => Err(Error::config(format!(
                "unknown loss {other:?}, expected \"bce\" or \"focal\""
            ))),
        }
    }
}

/// Per-class balancing factors, normalised to mean one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0; classes])
    }

    /// Inverse positive frequency, normalised so the weights sum to the class
    /// count. Classes with no positives are treated as having one.
    pub fn from_positive_counts(counts: &[usize]) -> Self {
        let inv: Vec<f64> = counts.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
        let mean = inv.iter().sum::<f64>() / inv.len() as f64;
        Self(inv.into_iter().map(|w| w / mean).collect())
    }

    /// Counts known positive labels per class.
    pub fn from_examples(examples: &[LabeledExample], classes: usize) -> Self {
        let mut counts = vec![0usize; classes];
        for ex in examples {
            for (c, (y, k)) in ex.labels.iter().zip(&ex.known).enumerate() {
                if *k && *y >= 0.5 {
                    counts[c] += 1;
                }
            }
        }
        Self::from_positive_counts(&counts)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<usize> {
    if pred.len() != labels.len() || pred.len() != mask.len() {
        return Err(Error::dim(format!(
            "prediction ({}), label ({}) and mask ({}) lengths differ",
            pred.len(),
            labels.len(),
            mask.len()
        )));
    }
    let known = mask.iter().filter(|&&k| k).count();
    if known == 0 {
        return Err(Error::Loss("no known labels in this example".into()));
    }
    Ok(known)
}

fn clamp_pred(p: f64) -> (f64, bool) {
    let c = p.clamp(PRED_EPS, 1.0 - PRED_EPS);
    (c, c == p)
}

/// Masked binary cross-entropy and its gradient with respect to `pred`.
pub fn partial_bce_grad(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    let known = check(pred, labels, mask)? as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for c in 0..pred.len() {
        if !mask[c] {
            continue;
        }
        let (p, inside) = clamp_pred(pred[c]);
        let y = labels[c];
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        if inside {
            grad[c] = (-y / p + (1.0 - y) / (1.0 - p)) / known;
        }
    }
    Ok((loss / known, grad))
}

pub fn partial_bce(pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<f64> {
    partial_bce_grad(pred, labels, mask).map(|(l, _)| l)
}

/// Masked focal loss `−w_c (1 − p)^γ log p` with `p` the probability
/// assigned to the true label, and its gradient with respect to `pred`.
pub fn partial_focal_grad(
    pred: &[f64],
    labels: &[f64],
    mask: &[bool],
    gamma: f64,
    weights: &ClassWeights,
) -> Result<(f64, Vec<f64>)> {
    let known = check(pred, labels, mask)? as f64;
    if weights.0.len() != pred.len() {
        return Err(Error::dim("class weight count differs from class count"));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for c in 0..pred.len() {
        if !mask[c] {
            continue;
        }
        let (q, inside) = clamp_pred(pred[c]);
        let positive = labels[c] >= 0.5;
        let p = if positive { q } else { 1.0 - q };
        let w = weights.0[c];
        let modulator = (1.0 - p).powf(gamma);
        loss -= w * modulator * p.ln();
        if inside {
            let slope = if gamma == 0.0 {
                0.0
            } else {
                gamma * (1.0 - p).powf(gamma - 1.0) * p.ln()
            };
            let d_p = -w * (modulator / p - slope);
            grad[c] = if positive { d_p } else { -d_p } / known;
        }
    }
    Ok((loss / known, grad))
}

pub fn partial_focal(
    pred: &[f64],
    labels: &[f64],
    mask: &[bool],
    gamma: f64,
    weights: &ClassWeights,
) -> Result<f64> {
    partial_focal_grad(pred, labels, mask, gamma, weights).map(|(l, _)| l)
}

/// Classification loss selected per model variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationLoss {
    pub kind: LossKind,
    pub gamma: f64,
    pub weights: ClassWeights,
}

impl ClassificationLoss {
    pub fn bce(classes: usize) -> Self {
        Self {
            kind: LossKind::Bce,
            gamma: 2.0,
            weights: ClassWeights::uniform(classes),
        }
    }

    pub fn focal(weights: ClassWeights) -> Self {
        Self {
            kind: LossKind::Focal,
            gamma: 2.0,
            weights,
        }
    }

    pub fn value_and_grad(&self, pred: &[f64], labels: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
        match self.kind {
            LossKind::Bce => partial_bce_grad(pred, labels, mask),
            LossKind::Focal => partial_focal_grad(pred, labels, mask, self.gamma, &self.weights),
        }
    }

    /// Records the loss of a `1×C` (or length-`C`) prediction on the tape.
    pub fn on_tape(&self, tape: &mut Tape, pred: Var, labels: &[f64], mask: &[bool]) -> Result<Var> {
        let p = tape.value(pred).clone();
        let (value, grad) = self.value_and_grad(p.data(), labels, mask)?;
        let grad = Tensor::new(p.shape(), grad)?;
        tape.custom_scalar(pred, value, grad)
    }
}

/// Fraction of known classes whose thresholded prediction matches the label.
/// Zero when no label is known.
pub fn step_reward(pred: &[f64], labels: &[f64], mask: &[bool], threshold: f64) -> f64 {
    let mut known = 0usize;
    let mut correct = 0usize;
    for ((p, y), k) in pred.iter().zip(labels).zip(mask) {
        if *k {
            known += 1;
            if (*p >= threshold) == (*y >= 0.5) {
                correct += 1;
            }
        }
    }
    if known == 0 {
        return 0.0;
    }
    quantize_reward(correct as f64 / known as f64)
}

pub fn quantize_reward(r: f64) -> f64 {
    let scale = 2f64.powi(REWARD_BITS);
    (r * scale).round() / scale
}

/// `R_j = Σ_{k ≤ j} r_k`.
pub fn cumulative_rewards(rewards: &[f64]) -> Vec<f64> {
    rewards
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// Log density of an isotropic Gaussian `N(mean, σ² I)` at `z`, and its
/// gradient with respect to `mean`.
pub fn gaussian_logprob(z: &[f64], mean: &[f64], sigma: f64) -> (f64, Vec<f64>) {
    let var = sigma * sigma;
    let d = z.len() as f64;
    let mut sq = 0.0;
    let grad = z
        .iter()
        .zip(mean)
        .map(|(zi, mi)| {
            sq += (zi - mi) * (zi - mi);
            (zi - mi) / var
        })
        .collect();
    let lp = -0.5 * sq / var - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln();
    (lp, grad)
}

/// Everything the hybrid objective needs from one episode.
#[derive(Debug, Clone)]
pub struct EpisodeTerms {
    pub final_pred: Var,
    /// Log-density of the location used at each step; `None` when the
    /// location was not drawn from the policy.
    pub logprobs: Vec<Option<Var>>,
    pub cumulative_rewards: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridDiagnostics {
    pub classification: f64,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub baseline_mse: f64,
}

/// `CLoss(ŷ_J) − Σ_j (R_j − b_j)·log π_j + λ_b Σ_j (b_j − R_j)²`.
///
/// The advantage is a constant in the policy term, and the baselines only
/// receive gradient from the squared-error term.
pub fn hybrid_loss(
    tape: &mut Tape,
    terms: &EpisodeTerms,
    labels: &[f64],
    mask: &[bool],
    classification: &ClassificationLoss,
    baseline: ParamId,
    baseline_weight: f64,
) -> Result<(Var, HybridDiagnostics)> {
    let steps = terms.logprobs.len();
    let b = tape.param(baseline);
    let b_values = tape.value(b).data().to_vec();
    if b_values.len() != steps || terms.cumulative_rewards.len() != steps {
        return Err(Error::dim(format!(
            "{steps} steps but {} baselines and {} rewards",
            b_values.len(),
            terms.cumulative_rewards.len()
        )));
    }
    let closs = classification.on_tape(tape, terms.final_pred, labels, mask)?;
    let mut total = closs;
    let mut adv_sum = 0.0;
    let mut mse = 0.0;
    for j in 0..steps {
        let adv = terms.cumulative_rewards[j] - b_values[j];
        adv_sum += adv;
        mse += adv * adv;
        if let Some(lp) = terms.logprobs[j] {
            let term = tape.affine(lp, -adv, 0.0);
            total = tape.add(total, term)?;
        }
    }
    let rewards = tape.constant(Tensor::new(tape.value(b).shape(), terms.cumulative_rewards.clone())?);
    let diff = tape.sub(b, rewards)?;
    let sq = tape.mul(diff, diff)?;
    let sq = tape.sum_all(sq);
    let sq = tape.affine(sq, baseline_weight, 0.0);
    total = tape.add(total, sq)?;

    let r_last = terms.cumulative_rewards.last().copied().unwrap_or(0.0);
    let diag = HybridDiagnostics {
        classification: tape.value(closs).data()[0],
        mean_reward: if steps > 0 { r_last / steps as f64 } else { 0.0 },
        mean_advantage: adv_sum / steps.max(1) as f64,
        baseline_mse: mse / steps.max(1) as f64,
    };
    Ok((total, diag))
}
