//! Seeded training loop: Adam on mini-batches, per-epoch validation macro F1,
//! early stopping and best-checkpoint tracking.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::LabeledExample;
use crate::losses::{ClassWeights, ClassificationLoss, LossKind};
use crate::metrics::{ClassCounts, MetricsReport, DEFAULT_THRESHOLD};
use crate::mil::MilConfig;
use crate::model::{stable_hash, Model, ModelConfig, Variant};
use crate::nn::{AdamConfig, AdamState, ParamStore};
use crate::ram::{RamConfig, DEFAULT_GLIMPSES, DEFAULT_SIGMA};

/// Layer widths and instance geometry. Defaults are the full-size models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub patch_hidden: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    /// Glimpse sizes; the variant's default when absent.
    pub scales: Option<Vec<(usize, usize)>>,
    pub conv_maps: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            grid_rows: 60,
            grid_cols: 4,
            patch_hidden: 512,
            feature_dim: 128,
            hidden: 256,
            scales: None,
            conv_maps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: String,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    /// The variant's default loss when absent.
    pub loss: Option<LossKind>,
    pub glimpses: usize,
    pub sigma: f64,
    pub baseline_weight: f64,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: "AttTF".into(),
            batch_size: 32,
            lr: 5e-4,
            weight_decay: 1e-4,
            max_epochs: 250,
            patience: 10,
            val_fraction: 0.15,
            loss: None,
            glimpses: DEFAULT_GLIMPSES,
            sigma: DEFAULT_SIGMA,
            baseline_weight: 1.0,
            seed: 0,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn variant(&self) -> Result<Variant> {
        self.variant.parse()
    }

    pub fn loss_kind(&self) -> Result<LossKind> {
        Ok(self.loss.unwrap_or(self.variant()?.default_loss()))
    }

    pub fn validate(&self) -> Result<()> {
        self.variant()?;
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch size and max epochs must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::config("learning rate and weight decay must be nonnegative"));
        }
        Ok(())
    }

    /// Model configuration for data of the given shape.
    pub fn model_config(&self, classes: usize, frames: usize, bins: usize) -> Result<ModelConfig> {
        let a = &self.architecture;
        let cfg = match self.variant()? {
            Variant::Mil(v) => ModelConfig::Mil(MilConfig {
                classes,
                frames,
                bins,
                grid_rows: a.grid_rows,
                grid_cols: a.grid_cols,
                patch_hidden: a.patch_hidden,
                feature_dim: a.feature_dim,
                ..MilConfig::new(v)
            }),
            Variant::Ram(v) => {
                let base = RamConfig::new(v);
                let cfg = RamConfig {
                    classes,
                    frames,
                    bins,
                    glimpses: self.glimpses,
                    sigma: self.sigma,
                    scales: a.scales.clone().unwrap_or(base.scales.clone()),
                    hidden: a.hidden,
                    feature_dim: a.feature_dim,
                    conv_maps: a.conv_maps,
                    ..base
                };
                cfg.validate()?;
                ModelConfig::Ram(cfg)
            }
        };
        Ok(cfg)
    }

    /// Seed of the evaluation episodes of stochastic variants.
    pub fn eval_seed(&self) -> u64 {
        self.seed ^ 0x5eed_e7a1_0000_0000
    }
}

/// Shuffles with `seed` and holds out `round(fraction·N)` examples.
pub fn split_train_val(
    dataset: &[LabeledExample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let n = dataset.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n < 2 || n_val == 0 || n_val >= n {
        return Err(Error::config(format!(
            "validation fraction {fraction} of {n} examples leaves an empty split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = order[..n_val].iter().map(|&i| dataset[i].clone()).collect();
    let train = order[n_val..].iter().map(|&i| dataset[i].clone()).collect();
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub model: ModelConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub checkpoint_path: Option<String>,
}

impl RunRecord {
    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Patience counted in epochs since the best; only a strictly greater score
/// counts as an improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None }
    }

    /// Records `score` for `epoch`; returns whether it improved.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        let improved = self.best.map_or(true, |(_, b)| score > b);
        if improved {
            self.best = Some((epoch, score));
        }
        improved
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        self.best.is_some_and(|(b, _)| epoch - b >= self.patience)
    }
}

pub struct TrainOutcome {
    pub record: RunRecord,
    pub checkpoint: Checkpoint,
    pub model: Model,
    /// Best parameters, already rounded to checkpoint precision.
    pub store: ParamStore,
}

/// Splits `dataset` with the config seed, then trains.
pub fn train(config: &TrainConfig, dataset: &[LabeledExample], class_names: &[String]) -> Result<TrainOutcome> {
    config.validate()?;
    let (train_set, val_set) = split_train_val(dataset, config.val_fraction, config.seed)?;
    train_on_split(config, &train_set, &val_set, class_names, |_| {})
}

pub fn train_on_split(
    config: &TrainConfig,
    train_set: &[LabeledExample],
    val_set: &[LabeledExample],
    class_names: &[String],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let first = train_set
        .first()
        .ok_or_else(|| Error::config("training split is empty"))?;
    if val_set.is_empty() {
        return Err(Error::config("validation split is empty"));
    }
    let classes = first.classes();
    if class_names.len() != classes {
        return Err(Error::config(format!(
            "{} class names for {classes}-class data",
            class_names.len()
        )));
    }
    let (frames, bins) = (first.spectrogram.frames(), first.spectrogram.bins());
    let model_cfg = config.model_config(classes, frames, bins)?;
    let usable: Vec<&LabeledExample> = train_set.iter().filter(|e| e.has_known_labels()).collect();
    if usable.is_empty() {
        return Err(Error::config("no training example has a known label"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (model, mut store) = Model::build_with(&model_cfg, &mut rng)?;
    let classification = match config.loss_kind()? {
        LossKind::Bce => ClassificationLoss::bce(classes),
        LossKind::Focal => ClassificationLoss::focal(ClassWeights::from_examples(train_set, classes)),
    };
    let mut adam = AdamState::new(
        &store,
        AdamConfig {
            lr: config.lr,
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        },
    );
    let eval_seed = config.eval_seed();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut epochs = Vec::new();
    let mut best_store = store.rounded_to_f32();
    let mut order: Vec<usize> = (0..usable.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let episode_seed = rng.next_u64();
                let (loss, grads, _) =
                    model.example_loss(&store, usable[i], &classification, config.baseline_weight, episode_seed)?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, batch {}, example {:?}",
                        b + 1,
                        usable[i].id
                    )));
                }
                loss_sum += loss;
                store.accumulate(&grads, scale);
            }
            adam.step(&mut store).map_err(|e| match e {
                Error::Training(m) => Error::Training(format!("{m} at epoch {epoch}, batch {}", b + 1)),
                other => other,
            })?;
        }
        let snapshot = store.rounded_to_f32();
        let f1 = evaluate_model(&model, &snapshot, val_set, class_names, eval_seed)?.macro_f1;
        if stopper.observe(epoch, f1) {
            best_store = snapshot;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / usable.len() as f64,
            val_macro_f1: f1,
            best_so_far: stopper.best().map_or(f1, |(_, s)| s),
        };
        on_epoch(&record);
        epochs.push(record);
        if stopper.should_stop(epoch) {
            break;
        }
    }

    let (best_epoch, best_f1) = stopper.best().expect("at least one epoch ran");
    let metadata = serde_json::json!({
        "best_epoch": best_epoch,
        "best_val_macro_f1": best_f1,
        "eval_seed": eval_seed,
        "train_config": config,
    });
    let checkpoint = Checkpoint::from_store(&model_cfg, &best_store, class_names.to_vec(), metadata);
    Ok(TrainOutcome {
        record: RunRecord {
            config: config.clone(),
            model: model_cfg,
            epochs,
            best_epoch,
            best_val_macro_f1: best_f1,
            checkpoint_path: None,
        },
        checkpoint,
        model,
        store: best_store,
    })
}

/// Per-example episode seed of stochastic variants, keyed by example id so
/// that scores do not depend on evaluation order.
pub fn eval_episode_seed(eval_seed: u64, id: &str) -> u64 {
    stable_hash(eval_seed, id)
}

pub fn evaluate_model(
    model: &Model,
    store: &ParamStore,
    examples: &[LabeledExample],
    class_names: &[String],
    eval_seed: u64,
) -> Result<MetricsReport> {
    if examples.is_empty() {
        return Err(Error::config("cannot evaluate on an empty dataset"));
    }
    let mut counts = ClassCounts::new(model.classes());
    for ex in examples {
        let pred = model.predict(store, &ex.spectrogram, eval_episode_seed(eval_seed, &ex.id))?;
        counts.accumulate(&pred, &ex.labels, &ex.known, DEFAULT_THRESHOLD)?;
    }
    MetricsReport::from_counts(class_names, &counts)
}

/// Evaluates a checkpoint; `eval_seed` defaults to the one recorded at training.
pub fn evaluate(checkpoint: &Checkpoint, examples: &[LabeledExample], eval_seed: Option<u64>) -> Result<MetricsReport> {
    let (model, store) = checkpoint.restore()?;
    let seed = eval_seed
        .or_else(|| checkpoint.header.metadata.get("eval_seed").and_then(|v| v.as_u64()))
        .unwrap_or(0);
    evaluate_model(&model, &store, examples, &checkpoint.header.class_names, seed)
}
