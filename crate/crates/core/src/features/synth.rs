//! Synthetic weakly-labelled multi-label spectrograms.
//!
//! Every class owns a frequency band. A positive class plays one "note": a
//! contiguous span of frames in which its band carries extra energy. Labels
//! are clip-level only, and each label is independently hidden with
//! probability `1 − known_prob`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spectrogram::{LabeledExample, Spectrogram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub classes: usize,
    pub examples: usize,
    pub frames: usize,
    pub bins: usize,
    /// Centre bin per class; evenly spaced over the bins when absent.
    pub center_bins: Option<Vec<usize>>,
    /// Inclusive band width range in bins.
    pub bandwidth: (usize, usize),
    /// Note length as a fraction of the clip, inclusive range.
    pub duty_cycle: (f64, f64),
    /// Note energy above the floor, inclusive range.
    pub amplitude: (f64, f64),
    /// Probability that any one label is annotated.
    pub known_prob: f64,
    /// Per-class positive rate; a single entry applies to all classes.
    pub positive_rate: Vec<f64>,
    /// Expected number of broadband bursts per clip (label-free distractors).
    pub burst_rate: f64,
    pub burst_amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 20,
            examples: 1000,
            frames: 998,
            bins: 64,
            center_bins: None,
            bandwidth: (2, 3),
            duty_cycle: (0.1, 0.4),
            amplitude: (1.0, 2.0),
            known_prob: 0.8,
            positive_rate: vec![0.3],
            burst_rate: 0.0,
            burst_amplitude: 1.0,
            noise_std: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("at least two classes are required"));
        }
        if self.examples == 0 {
            return Err(Error::config("example count must be positive"));
        }
        if self.frames == 0 || self.bins == 0 {
            return Err(Error::config("spectrogram dimensions must be positive"));
        }
        let (lo, hi) = self.bandwidth;
        if lo == 0 || lo > hi {
            return Err(Error::config(format!("invalid bandwidth range {lo}..={hi}")));
        }
        if hi > self.bins {
            return Err(Error::config(format!(
                "bandwidth {hi} exceeds the {} available bins",
                self.bins
            )));
        }
        let (d0, d1) = self.duty_cycle;
        if !(0.0 < d0 && d0 <= d1 && d1 <= 1.0) {
            return Err(Error::config(format!("invalid duty cycle range {d0}..={d1}")));
        }
        if self.amplitude.0 > self.amplitude.1 {
            return Err(Error::config("invalid amplitude range"));
        }
        if !(0.0..=1.0).contains(&self.known_prob) {
            return Err(Error::config("known_prob must lie in [0, 1]"));
        }
        if self.positive_rate.len() != 1 && self.positive_rate.len() != self.classes {
            return Err(Error::config(format!(
                "positive_rate needs 1 or {} entries, got {}",
                self.classes,
                self.positive_rate.len()
            )));
        }
        if self.positive_rate.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("positive rates must lie in [0, 1]"));
        }
        if let Some(c) = &self.center_bins {
            if c.len() != self.classes || c.iter().any(|&b| b >= self.bins) {
                return Err(Error::config("center_bins must give one in-range bin per class"));
            }
        }
        if self.burst_rate < 0.0 || self.noise_std < 0.0 {
            return Err(Error::config("burst_rate and noise_std must be nonnegative"));
        }
        Ok(())
    }

    pub fn positive_rate(&self, class: usize) -> f64 {
        if self.positive_rate.len() == 1 {
            self.positive_rate[0]
        } else {
            self.positive_rate[class]
        }
    }

    pub fn centers(&self) -> Vec<usize> {
        self.center_bins.clone().unwrap_or_else(|| {
            (0..self.classes)
                .map(|c| ((2 * c + 1) * self.bins) / (2 * self.classes))
                .collect()
        })
    }

    /// Bin range of a band of `width` bins around `center`, clipped to the grid.
    pub fn band(&self, center: usize, width: usize) -> std::ops::Range<usize> {
        let start = center.saturating_sub(width / 2);
        let start = start.min(self.bins - width);
        start..start + width
    }
}

/// Deterministic per-example generator stream.
pub fn example_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn synth_example(cfg: &SynthConfig, index: usize) -> Result<LabeledExample> {
    let mut rng = example_rng(cfg.seed, index);
    let (t_len, f_len) = (cfg.frames, cfg.bins);
    let mut values = vec![0.0f64; t_len * f_len];
    if cfg.noise_std > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::config(e.to_string()))?;
        for v in &mut values {
            *v = noise.sample(&mut rng);
        }
    }
    let centers = cfg.centers();
    let mut labels = vec![0.0; cfg.classes];
    let mut known = vec![false; cfg.classes];
    for c in 0..cfg.classes {
        let positive = rng.gen_bool(cfg.positive_rate(c));
        known[c] = rng.gen_bool(cfg.known_prob);
        if !positive {
            continue;
        }
        labels[c] = 1.0;
        let width = rng.gen_range(cfg.bandwidth.0..=cfg.bandwidth.1);
        let duty = rng.gen_range(cfg.duty_cycle.0..=cfg.duty_cycle.1);
        let len = ((duty * t_len as f64).round() as usize).clamp(1, t_len);
        let start = rng.gen_range(0..=t_len - len);
        let amp = rng.gen_range(cfg.amplitude.0..=cfg.amplitude.1);
        for t in start..start + len {
            for f in cfg.band(centers[c], width) {
                values[t * f_len + f] += amp;
            }
        }
    }
    if cfg.burst_rate > 0.0 {
        let bursts = rng.gen_range(0.0..2.0 * cfg.burst_rate).round() as usize;
        for _ in 0..bursts {
            let len = rng.gen_range(1..=(t_len / 20).max(1));
            let start = rng.gen_range(0..=t_len - len);
            for t in start..start + len {
                for f in 0..f_len {
                    values[t * f_len + f] += cfg.burst_amplitude;
                }
            }
        }
    }
    let spec = Spectrogram::new(t_len, f_len, values.into_iter().map(|v| v as f32).collect())?;
    LabeledExample::new(format!("synth_{index:06}"), spec, labels, known)
}

/// Generates `cfg.examples` labelled spectrograms; identical configs give
/// bit-identical datasets.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<LabeledExample>> {
    cfg.validate()?;
    (0..cfg.examples).map(|i| synth_example(cfg, i)).collect()
}
