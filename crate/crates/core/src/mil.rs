//! Multi-instance attention over timbral-temporal tiles.
//!
//! Each spectrogram tile is an instance. Instances are embedded, scored per
//! class by an instance classifier and an attention head, and the attention
//! weights (normalised per class over the whole grid) mix the instance
//! predictions into the clip prediction. Variants:
//!
//! * `AttTF`: attention over the full `T'×F'` grid.
//! * `AttTFid`: as `AttTF`, with a one-hot frequency-row identifier appended
//!   to every embedded instance.
//! * `AttT`: frequency columns are mean-pooled first, attention over `T'`.
//! * `FC`: embedded instances are mean-pooled and fed to one linear layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{tile_shape, tile_spectrogram, PatchEmbedding, Spectrogram};
use crate::nn::{Linear, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilVariant {
    #[serde(rename = "AttTF")]
    AttTF,
    #[serde(rename = "AttTFid")]
    AttTFid,
    #[serde(rename = "AttT")]
    AttT,
    #[serde(rename = "FC")]
    Fc,
}

impl MilVariant {
    pub fn tag(self) -> &'static str {
        match self {
            MilVariant::AttTF => "AttTF",
            MilVariant::AttTFid => "AttTFid",
            MilVariant::AttT => "AttT",
            MilVariant::Fc => "FC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilConfig {
    pub variant: MilVariant,
    pub classes: usize,
    pub frames: usize,
    pub bins: usize,
    /// `T'`, instances along time.
    pub grid_rows: usize,
    /// `F'`, instances along frequency.
    pub grid_cols: usize,
    pub patch_hidden: usize,
    pub feature_dim: usize,
}

impl MilConfig {
    pub fn new(variant: MilVariant) -> Self {
        Self {
            variant,
            classes: 20,
            frames: 998,
            bins: 64,
            grid_rows: 60,
            grid_cols: 4,
            patch_hidden: 512,
            feature_dim: 128,
        }
    }

    pub fn tile_shape(&self) -> Result<(usize, usize)> {
        tile_shape(self.frames, self.bins, self.grid_rows, self.grid_cols)
    }
}

/// `T'×F'` grid of instance features, row `t·F' + f` for instance `(t, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGrid {
    pub rows: usize,
    pub cols: usize,
    pub features: Tensor,
}

impl InstanceGrid {
    pub fn new(rows: usize, cols: usize, features: Tensor) -> Result<Self> {
        let (n, _) = features.as_matrix();
        if features.shape().len() != 2 || n != rows * cols {
            return Err(Error::dim(format!(
                "grid {rows}x{cols} needs {} feature rows, got shape {:?}",
                rows * cols,
                features.shape()
            )));
        }
        Ok(Self {
            rows,
            cols,
            features,
        })
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn dim(&self) -> usize {
        self.features.as_matrix().1
    }
}

/// One-hot frequency identifiers for a `rows × cols` grid, `(rows·cols) × cols`.
pub fn freq_id_block(rows: usize, cols: usize) -> Tensor {
    let mut data = vec![0.0; rows * cols * cols];
    for i in 0..rows * cols {
        data[i * cols + i % cols] = 1.0;
    }
    Tensor::new(&[rows * cols, cols], data).expect("one-hot block shape")
}

/// Appends each instance's one-hot frequency identifier to its features.
pub fn append_freq_id(v: &InstanceGrid) -> InstanceGrid {
    let (n, d) = v.features.as_matrix();
    let ids = freq_id_block(v.rows, v.cols);
    let mut data = Vec::with_capacity(n * (d + v.cols));
    for i in 0..n {
        data.extend_from_slice(v.features.row(i));
        data.extend_from_slice(ids.row(i));
    }
    InstanceGrid {
        rows: v.rows,
        cols: v.cols,
        features: Tensor::new(&[n, d + v.cols], data).expect("augmented shape"),
    }
}

/// Three 128-node layers with ReLU between them and a skip from input to output.
#[derive(Debug, Clone)]
pub struct EmbeddingLayers {
    pub fc1: Linear,
    pub fc2: Linear,
    pub fc3: Linear,
}

impl EmbeddingLayers {
    pub fn new<R: Rng>(store: &mut ParamStore, dim: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            fc1: Linear::new(store, "embed.fc1", dim, dim, rng)?,
            fc2: Linear::new(store, "embed.fc2", dim, dim, rng)?,
            fc3: Linear::new(store, "embed.fc3", dim, dim, rng)?,
        })
    }

    /// `v = FC3(relu(FC2(relu(FC1(u))))) + u`.
    pub fn forward(&self, tape: &mut Tape, u: Var) -> Result<Var> {
        let h = self.fc1.forward(tape, u)?;
        let h = tape.relu(h);
        let h = self.fc2.forward(tape, h)?;
        let h = tape.relu(h);
        let h = self.fc3.forward(tape, h)?;
        tape.add(h, u)
    }
}

/// Instance classifier and attention head.
#[derive(Debug, Clone)]
pub struct AttentionHead {
    pub instance: Linear,
    pub attention: Linear,
}

/// Tape handles for one attention pass.
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    /// `n × C` instance predictions in `(0, 1)`.
    pub instance_preds: Var,
    /// `n × C` weights; every column sums to one.
    pub attention: Var,
    /// `1 × C` clip prediction.
    pub final_pred: Var,
}

impl AttentionHead {
    pub fn new<R: Rng>(store: &mut ParamStore, dim: usize, classes: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            instance: Linear::new(store, "head.instance", dim, classes, rng)?,
            attention: Linear::new(store, "head.attention", dim, classes, rng)?,
        })
    }

    /// `ŷ = Σ_instances α ⊙ ŷ_inst` with `α = a / Σ_instances a` and
    /// `a = σ(FC_att(v))`, per class.
    pub fn forward(&self, tape: &mut Tape, v: Var) -> Result<AttentionVars> {
        if tape.shape(v).len() != 2 || tape.shape(v)[0] == 0 {
            return Err(Error::dim("attention needs at least one instance"));
        }
        let logits = self.instance.forward(tape, v)?;
        let instance_preds = tape.sigmoid(logits);
        let raw = self.attention.forward(tape, v)?;
        let attention = tape.sigmoid_normalize_cols(raw)?;
        let final_pred = tape.convex_cols(attention, instance_preds)?;
        Ok(AttentionVars {
            instance_preds,
            attention,
            final_pred,
        })
    }
}

/// Values of one attention pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub instance_preds: Tensor,
    pub attention: Tensor,
    pub final_pred: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MilForward {
    pub final_pred: Var,
    pub attention: Option<AttentionVars>,
}

#[derive(Debug, Clone)]
pub struct MilModel {
    pub config: MilConfig,
    pub patch: PatchEmbedding,
    pub embed: EmbeddingLayers,
    pub head: Option<AttentionHead>,
    pub fc: Option<Linear>,
}

impl MilModel {
    pub fn new<R: Rng>(config: MilConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        if config.classes == 0 || config.patch_hidden == 0 || config.feature_dim == 0 {
            return Err(Error::config("class count and layer widths must be positive"));
        }
        let (tf, tb) = config.tile_shape()?;
        let patch = PatchEmbedding::new(
            store,
            tf * tb,
            config.grid_rows,
            config.grid_cols,
            config.patch_hidden,
            config.feature_dim,
            rng,
        )?;
        let embed = EmbeddingLayers::new(store, config.feature_dim, rng)?;
        let (head, fc) = match config.variant {
            MilVariant::Fc => (
                None,
                Some(Linear::new(store, "head.fc", config.feature_dim, config.classes, rng)?),
            ),
            MilVariant::AttTFid => (
                Some(AttentionHead::new(
                    store,
                    config.feature_dim + config.grid_cols,
                    config.classes,
                    rng,
                )?),
                None,
            ),
            MilVariant::AttTF | MilVariant::AttT => (
                Some(AttentionHead::new(store, config.feature_dim, config.classes, rng)?),
                None,
            ),
        };
        Ok(Self {
            config,
            patch,
            embed,
            head,
            fc,
        })
    }

    /// Tiles and encodes `x` into the `(T'·F') × D` feature grid `u`.
    pub fn extract(&self, tape: &mut Tape, x: &Spectrogram) -> Result<Var> {
        if x.frames() != self.config.frames || x.bins() != self.config.bins {
            return Err(Error::dim(format!(
                "model expects {}x{} spectrograms, got {}x{}",
                self.config.frames,
                self.config.bins,
                x.frames(),
                x.bins()
            )));
        }
        let grid = tile_spectrogram(x, self.config.grid_rows, self.config.grid_cols)?;
        let tiles = tape.constant(grid.tiles);
        self.patch.forward(tape, tiles)
    }

    /// Forward from an already extracted feature grid `u`.
    pub fn forward_features(&self, tape: &mut Tape, u: Var) -> Result<MilForward> {
        let (rows, cols) = (self.config.grid_rows, self.config.grid_cols);
        match self.config.variant {
            MilVariant::AttTF => {
                let v = self.embed.forward(tape, u)?;
                self.attend(tape, v)
            }
            MilVariant::AttTFid => {
                let v = self.embed.forward(tape, u)?;
                let ids = tape.constant(freq_id_block(rows, cols));
                let v = tape.concat_cols(&[v, ids])?;
                self.attend(tape, v)
            }
            MilVariant::AttT => {
                let groups: Vec<Vec<usize>> = (0..rows)
                    .map(|t| (0..cols).map(|f| t * cols + f).collect())
                    .collect();
                let pooled = tape.segment_mean(u, &groups)?;
                let v = self.embed.forward(tape, pooled)?;
                self.attend(tape, v)
            }
            MilVariant::Fc => {
                let v = self.embed.forward(tape, u)?;
                let all: Vec<usize> = (0..rows * cols).collect();
                let pooled = tape.segment_mean(v, &[all])?;
                let fc = self.fc.as_ref().expect("FC variant has a linear head");
                let logits = fc.forward(tape, pooled)?;
                Ok(MilForward {
                    final_pred: tape.sigmoid(logits),
                    attention: None,
                })
            }
        }
    }

    fn attend(&self, tape: &mut Tape, v: Var) -> Result<MilForward> {
        let head = self.head.as_ref().expect("attention variants have a head");
        let att = head.forward(tape, v)?;
        Ok(MilForward {
            final_pred: att.final_pred,
            attention: Some(att),
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: &Spectrogram) -> Result<MilForward> {
        let u = self.extract(tape, x)?;
        self.forward_features(tape, u)
    }

    pub fn predict(&self, store: &ParamStore, x: &Spectrogram) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, x)?;
        Ok(tape.value(out.final_pred).data().to_vec())
    }

    /// Instance predictions and attention maps, `None` for the FC baseline.
    pub fn attention_map(&self, store: &ParamStore, x: &Spectrogram) -> Result<Option<AttentionOutput>> {
        let mut tape = Tape::new(store);
        let out = self.forward(&mut tape, x)?;
        Ok(out.attention.map(|a| AttentionOutput {
            instance_preds: tape.value(a.instance_preds).clone(),
            attention: tape.value(a.attention).clone(),
            final_pred: tape.value(a.final_pred).data().to_vec(),
        }))
    }
}
