use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LabeledExample, Spectrogram};
use crate::losses::{ClassificationLoss, HybridDiagnostics, LossKind};
use crate::mil::{MilConfig, MilModel, MilVariant};
use crate::nn::{Gradients, ParamStore, Tape};
use crate::ram::{LocationSource, RamConfig, RamModel, RamVariant};

/// Architecture tag written into checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Mil(MilVariant),
    Ram(RamVariant),
}

pub const VARIANT_TAGS: [&str; 8] = [
    "AttTF",
    "AttTFid",
    "AttT",
    "FC",
    "SR16",
    "SR16-FL",
    "RAM16-RNN",
    "RAM16-GRU",
];

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Mil(v) => v.tag(),
            Variant::Ram(v) => v.tag(),
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Variant::Ram(_))
    }

    /// Classification loss the variant is trained with by default.
    pub fn default_loss(self) -> LossKind {
        match self {
            Variant::Ram(RamVariant::Sr16Fl) => LossKind::Focal,
            _ => LossKind::Bce,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "AttTF" => Variant::Mil(MilVariant::AttTF),
            "AttTFid" => Variant::Mil(MilVariant::AttTFid),
            "AttT" => Variant::Mil(MilVariant::AttT),
            "FC" => Variant::Mil(MilVariant::Fc),
            "SR16" => Variant::Ram(RamVariant::Sr16),
            "SR16-FL" => Variant::Ram(RamVariant::Sr16Fl),
            "RAM16-RNN" => Variant::Ram(RamVariant::Ram16Rnn),
            "RAM16-GRU" => Variant::Ram(RamVariant::Ram16Gru),
            other => {
                return Err(Error::config(format!(
                    "unknown variant {other:?}; valid tags: {}",
                    VARIANT_TAGS.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelConfig {
    Mil(MilConfig),
    Ram(RamConfig),
}

impl ModelConfig {
    pub fn variant(&self) -> Variant {
        match self {
            ModelConfig::Mil(c) => Variant::Mil(c.variant),
            ModelConfig::Ram(c) => Variant::Ram(c.variant),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ModelConfig::Mil(c) => c.classes,
            ModelConfig::Ram(c) => c.classes,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Mil(MilModel),
    Ram(RamModel),
}

impl Model {
    /// Builds the model and its freshly initialised parameters.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<(Self, ParamStore)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build_with(config, &mut rng)
    }

    pub fn build_with(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let model = match config {
            ModelConfig::Mil(c) => Model::Mil(MilModel::new(c.clone(), &mut store, rng)?),
            ModelConfig::Ram(c) => Model::Ram(RamModel::new(c.clone(), &mut store, rng)?),
        };
        Ok((model, store))
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Mil(m) => ModelConfig::Mil(m.config.clone()),
            Model::Ram(m) => ModelConfig::Ram(m.config.clone()),
        }
    }

    pub fn variant(&self) -> Variant {
        self.config().variant()
    }

    pub fn classes(&self) -> usize {
        match self {
            Model::Mil(m) => m.config.classes,
            Model::Ram(m) => m.config.classes,
        }
    }

    /// Loss and parameter gradients for one example. `episode_seed` drives
    /// the location policy of stochastic variants and is ignored otherwise.
    pub fn example_loss(
        &self,
        store: &ParamStore,
        ex: &LabeledExample,
        classification: &ClassificationLoss,
        baseline_weight: f64,
        episode_seed: u64,
    ) -> Result<(f64, Gradients, Option<HybridDiagnostics>)> {
        let mut tape = Tape::new(store);
        match self {
            Model::Mil(m) => {
                let out = m.forward(&mut tape, &ex.spectrogram)?;
                let loss = classification.on_tape(&mut tape, out.final_pred, &ex.labels, &ex.known)?;
                let value = tape.value(loss).data()[0];
                Ok((value, tape.backward(loss), None))
            }
            Model::Ram(m) => {
                let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
                let (loss, diag, _) = m.loss(
                    &mut tape,
                    ex,
                    LocationSource::Sample(&mut rng),
                    classification,
                    baseline_weight,
                )?;
                let value = tape.value(loss).data()[0];
                Ok((value, tape.backward(loss), Some(diag)))
            }
        }
    }

    /// Clip-level prediction; stochastic variants use `episode_seed`.
    pub fn predict(&self, store: &ParamStore, x: &Spectrogram, episode_seed: u64) -> Result<Vec<f64>> {
        match self {
            Model::Mil(m) => m.predict(store, x),
            Model::Ram(m) => m.predict(store, x, &mut ChaCha8Rng::seed_from_u64(episode_seed)),
        }
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-example seeds from ids.
pub fn stable_hash(seed: u64, text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tags_round_trip() {
        for tag in VARIANT_TAGS {
            assert_eq!(tag.parse::<Variant>().unwrap().tag(), tag);
        }
    }

    #[test]
    fn unknown_tag_lists_valid_tags() {
        let err = "ATT".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("RAM16-GRU") && err.contains("AttTFid"), "{err}");
    }

    #[test]
    fn focal_only_for_sr16_fl() {
        for tag in VARIANT_TAGS {
            let v: Variant = tag.parse().unwrap();
            assert_eq!(v.default_loss() == LossKind::Focal, tag == "SR16-FL");
        }
    }
}
