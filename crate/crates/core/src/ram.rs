//! Recurrent visual attention over spectrograms.
//!
//! At every step the model sees only a multi-scale glimpse around its current
//! location, folds it into a recurrent state, emits a preliminary prediction
//! and samples the next location from a Gaussian policy centred on a learned
//! mean.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LabeledExample, Spectrogram};
use crate::losses::{
    cumulative_rewards, gaussian_logprob, hybrid_loss, step_reward, ClassificationLoss, EpisodeTerms,
    HybridDiagnostics,
};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::nn::{GruCell, Linear, ParamId, ParamStore, RecurrentCore, RectConv, RnnCell, Tape, Tensor, Var};

pub const DEFAULT_SIGMA: f64 = 0.17;
pub const DEFAULT_GLIMPSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RamVariant {
    #[serde(rename = "SR16")]
    Sr16,
    #[serde(rename = "SR16-FL")]
    Sr16Fl,
    #[serde(rename = "RAM16-RNN")]
    Ram16Rnn,
    #[serde(rename = "RAM16-GRU")]
    Ram16Gru,
}

impl RamVariant {
    pub fn tag(self) -> &'static str {
        match self {
            RamVariant::Sr16 => "SR16",
            RamVariant::Sr16Fl => "SR16-FL",
            RamVariant::Ram16Rnn => "RAM16-RNN",
            RamVariant::Ram16Gru => "RAM16-GRU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreKind {
    Gru,
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    FlatFc,
    RectConv,
}

/// Kernel extents `(frames, bins)` of the rectangular glimpse encoder: two
/// temporal kernels spanning time and two timbral kernels spanning frequency.
pub const RECT_KERNELS: [(usize, usize); 4] = [(7, 1), (3, 1), (1, 7), (1, 3)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamConfig {
    pub variant: RamVariant,
    pub classes: usize,
    pub frames: usize,
    pub bins: usize,
    pub glimpses: usize,
    pub sigma: f64,
    /// Glimpse sizes `(frames, bins)`, strictly increasing; larger scales are
    /// average-pooled down to the first.
    pub scales: Vec<(usize, usize)>,
    pub encoder: EncoderKind,
    pub core: CoreKind,
    pub hidden: usize,
    pub feature_dim: usize,
    /// Feature maps per rectangular kernel shape.
    pub conv_maps: usize,
}

impl RamConfig {
    pub fn new(variant: RamVariant) -> Self {
        let (scales, encoder, core) = match variant {
            RamVariant::Sr16 | RamVariant::Sr16Fl => {
                (vec![(12, 12), (24, 24)], EncoderKind::RectConv, CoreKind::Gru)
            }
            RamVariant::Ram16Rnn => (vec![(12, 12)], EncoderKind::FlatFc, CoreKind::Rnn),
            RamVariant::Ram16Gru => (vec![(12, 12)], EncoderKind::FlatFc, CoreKind::Gru),
        };
        Self {
            variant,
            classes: 20,
            frames: 998,
            bins: 64,
            glimpses: DEFAULT_GLIMPSES,
            sigma: DEFAULT_SIGMA,
            scales,
            encoder,
            core,
            hidden: 256,
            feature_dim: 128,
            conv_maps: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_scales(&self.scales)?;
        if self.glimpses == 0 {
            return Err(Error::config("glimpse count must be at least 1"));
        }
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.classes == 0 || self.hidden == 0 || self.feature_dim == 0 || self.conv_maps == 0 {
            return Err(Error::config("class count and layer widths must be positive"));
        }
        if self.encoder == EncoderKind::RectConv {
            let (h, w) = self.scales[0];
            if RECT_KERNELS.iter().any(|&(kh, kw)| kh > h || kw > w) {
                return Err(Error::dim(format!(
                    "base glimpse {h}x{w} is smaller than a rectangular kernel"
                )));
            }
        }
        Ok(())
    }
}

fn validate_scales(scales: &[(usize, usize)]) -> Result<()> {
    let Some(&(h1, w1)) = scales.first() else {
        return Err(Error::config("at least one glimpse size is required"));
    };
    if h1 == 0 || w1 == 0 {
        return Err(Error::config("glimpse sizes must be positive"));
    }
    for pair in scales.windows(2) {
        let ((h0, w0), (h, w)) = (pair[0], pair[1]);
        if h <= h0 || w <= w0 {
            return Err(Error::config("glimpse sizes must be strictly increasing"));
        }
    }
    if let Some(&(h, w)) = scales.iter().find(|&&(h, w)| h % h1 != 0 || w % w1 != 0) {
        return Err(Error::config(format!(
            "glimpse size {h}x{w} is not a multiple of the base size {h1}x{w1}"
        )));
    }
    Ok(())
}

/// Normalised glimpse location; both coordinates lie in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    /// Time axis, −1 is the first frame.
    pub time: f64,
    /// Frequency axis, −1 is the lowest bin.
    pub freq: f64,
}

impl Location {
    pub fn new(time: f64, freq: f64) -> Self {
        Self {
            time: time.clamp(-1.0, 1.0),
            freq: freq.clamp(-1.0, 1.0),
        }
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.time, self.freq]
    }

    /// Nearest cell `(frame, bin)` for a `frames × bins` grid.
    pub fn to_cell(self, frames: usize, bins: usize) -> (usize, usize) {
        let t = ((self.time + 1.0) / 2.0 * (frames - 1) as f64).round() as usize;
        let f = ((self.freq + 1.0) / 2.0 * (bins - 1) as f64).round() as usize;
        (t, f)
    }
}

/// Patches of a multi-scale glimpse, all at the base resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GlimpsePatchSet {
    pub sizes: Vec<(usize, usize)>,
    /// `K × (h₁·w₁)`, one flattened patch per scale.
    pub patches: Tensor,
}

impl GlimpsePatchSet {
    pub fn base(&self) -> (usize, usize) {
        self.sizes[0]
    }
}

/// Extracts one window per size centred on `loc` (zero outside the
/// spectrogram), and average-pools every window down to the first size.
pub fn glimpse_extract(x: &Spectrogram, loc: Location, sizes: &[(usize, usize)]) -> Result<GlimpsePatchSet> {
    validate_scales(sizes)?;
    let (ct, cf) = loc.to_cell(x.frames(), x.bins());
    let (h1, w1) = sizes[0];
    let mut data = Vec::with_capacity(sizes.len() * h1 * w1);
    for &(h, w) in sizes {
        let (ph, pw) = (h / h1, w / w1);
        let t0 = ct as isize - (h / 2) as isize;
        let f0 = cf as isize - (w / 2) as isize;
        for i in 0..h1 {
            for j in 0..w1 {
                let mut acc = 0.0;
                for a in 0..ph {
                    for b in 0..pw {
                        let t = t0 + (i * ph + a) as isize;
                        let f = f0 + (j * pw + b) as isize;
                        if t >= 0 && f >= 0 && (t as usize) < x.frames() && (f as usize) < x.bins() {
                            acc += x.get(t as usize, f as usize);
                        }
                    }
                }
                data.push(acc / (ph * pw) as f64);
            }
        }
    }
    Ok(GlimpsePatchSet {
        sizes: sizes.to_vec(),
        patches: Tensor::new(&[sizes.len(), h1 * w1], data)?,
    })
}

#[derive(Debug, Clone)]
pub enum GlimpseEncoder {
    FlatFc(Linear),
    RectConv { banks: Vec<RectConv>, fc: Linear },
}

/// `ρ = relu(FC(q + f_l(l)))` with `q` the patch code and `f_l` a location code.
#[derive(Debug, Clone)]
pub struct GlimpseNetwork {
    pub encoder: GlimpseEncoder,
    pub location: Linear,
    pub glimpse: Linear,
    scales: usize,
    base: (usize, usize),
}

impl GlimpseNetwork {
    pub fn new<R: Rng>(store: &mut ParamStore, cfg: &RamConfig, rng: &mut R) -> Result<Self> {
        let (h1, w1) = cfg.scales[0];
        let k = cfg.scales.len();
        let d = cfg.feature_dim;
        let encoder = match cfg.encoder {
            EncoderKind::FlatFc => GlimpseEncoder::FlatFc(Linear::new(store, "glimpse.sensor", k * h1 * w1, d, rng)?),
            EncoderKind::RectConv => {
                let banks = RECT_KERNELS
                    .iter()
                    .map(|&(kh, kw)| RectConv::new(store, &format!("glimpse.conv{kh}x{kw}"), cfg.conv_maps, kh, kw, rng))
                    .collect::<Result<Vec<_>>>()?;
                let fc = Linear::new(store, "glimpse.sensor", k * banks.len() * cfg.conv_maps, d, rng)?;
                GlimpseEncoder::RectConv { banks, fc }
            }
        };
        Ok(Self {
            encoder,
            location: Linear::new(store, "glimpse.location", 2, d, rng)?,
            glimpse: Linear::new(store, "glimpse.combine", d, d, rng)?,
            scales: k,
            base: (h1, w1),
        })
    }

    pub fn kind(&self) -> EncoderKind {
        match self.encoder {
            GlimpseEncoder::FlatFc(_) => EncoderKind::FlatFc,
            GlimpseEncoder::RectConv { .. } => EncoderKind::RectConv,
        }
    }

    /// `patches` is the `K × (h₁·w₁)` patch tensor as a tape variable.
    pub fn forward(&self, tape: &mut Tape, patches: Var, loc: Location) -> Result<Var> {
        let (h1, w1) = self.base;
        if tape.shape(patches) != [self.scales, h1 * w1] {
            return Err(Error::dim(format!(
                "encoder expects {} patches of {h1}x{w1}, got {:?}",
                self.scales,
                tape.shape(patches)
            )));
        }
        let q = match &self.encoder {
            GlimpseEncoder::FlatFc(fc) => {
                let flat = tape.reshape(patches, &[1, self.scales * h1 * w1])?;
                fc.forward(tape, flat)?
            }
            GlimpseEncoder::RectConv { banks, fc } => {
                let img = tape.reshape(patches, &[self.scales, 1, h1, w1])?;
                let mut pooled = Vec::with_capacity(banks.len());
                for bank in banks {
                    let maps = bank.forward(tape, img)?;
                    pooled.push(tape.max_pool_spatial(maps)?);
                }
                let joined = tape.concat_cols(&pooled)?;
                let width = tape.shape(joined)[1];
                let flat = tape.reshape(joined, &[1, self.scales * width])?;
                fc.forward(tape, flat)?
            }
        };
        let q = tape.relu(q);
        let l = tape.constant(Tensor::new(&[1, 2], loc.as_array().to_vec())?);
        let lq = self.location.forward(tape, l)?;
        let lq = tape.relu(lq);
        let s = tape.add(q, lq)?;
        let rho = self.glimpse.forward(tape, s)?;
        Ok(tape.relu(rho))
    }
}

/// One draw from the location policy.
#[derive(Debug, Clone)]
pub struct LocationSample {
    pub mean_var: Var,
    pub mean: [f64; 2],
    /// Pre-clamp draw `z ~ N(μ, σ²I)`.
    pub sample: [f64; 2],
    pub location: Location,
    /// `log N(z; μ, σ²I)`, differentiable with respect to `μ`.
    pub logprob: Var,
}

/// Where the next location comes from.
pub enum LocationSource<'r, R: Rng> {
    Sample(&'r mut R),
    /// Replays pre-clamp draws; entry 0 is the initial location.
    Replay(&'r [[f64; 2]]),
}

/// `μ = tanh(FC(h))`, then draws (or replays) `z` and scores it. The caller
/// decides whether `h` carries gradient.
pub fn location_step<R: Rng>(
    tape: &mut Tape,
    h: Var,
    layer: &Linear,
    sigma: f64,
    source: &mut LocationSource<'_, R>,
    step: usize,
) -> Result<LocationSample> {
    if sigma <= 0.0 {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    let m = layer.forward(tape, h)?;
    let mean_var = tape.tanh(m);
    let mean = {
        let d = tape.value(mean_var).data();
        [d[0], d[1]]
    };
    let sample = match source {
        LocationSource::Sample(rng) => {
            let n0: f64 = rng.sample(StandardNormal);
            let n1: f64 = rng.sample(StandardNormal);
            [mean[0] + sigma * n0, mean[1] + sigma * n1]
        }
        LocationSource::Replay(draws) => *draws
            .get(step)
            .ok_or_else(|| Error::dim(format!("replay has no location for step {step}")))?,
    };
    let (lp, grad) = gaussian_logprob(&sample, &mean, sigma);
    let logprob = tape.custom_scalar(mean_var, lp, Tensor::new(&[1, 2], grad)?)?;
    Ok(LocationSample {
        mean_var,
        mean,
        sample,
        location: Location::new(sample[0], sample[1]),
        logprob,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    /// Policy mean that produced `loc`; the initial location for step 1.
    pub mu: [f64; 2],
    pub loc: [f64; 2],
    /// Pre-clamp draw behind `loc`.
    #[serde(skip)]
    pub sample: [f64; 2],
    #[serde(skip)]
    pub hidden: Vec<f64>,
    pub reward: f64,
    pub cumulative_reward: f64,
    pub pred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn final_prediction(&self) -> &[f64] {
        &self.steps.last().expect("episodes have at least one step").pred
    }

    pub fn samples(&self) -> Vec<[f64; 2]> {
        self.steps.iter().map(|s| s.sample).collect()
    }
}

/// Tape handles of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeVars {
    pub preds: Vec<Var>,
    pub logprobs: Vec<Option<Var>>,
    pub hidden: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct RamModel {
    pub config: RamConfig,
    pub glimpse: GlimpseNetwork,
    pub core: RecurrentCore,
    pub classifier: Linear,
    pub locator: Linear,
    pub baseline: ParamId,
}

impl RamModel {
    pub fn new<R: Rng>(config: RamConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let glimpse = GlimpseNetwork::new(store, &config, rng)?;
        let core = match config.core {
            CoreKind::Gru => RecurrentCore::Gru(GruCell::new(store, "core.gru", config.feature_dim, config.hidden, rng)?),
            CoreKind::Rnn => RecurrentCore::Rnn(RnnCell::new(store, "core.rnn", config.feature_dim, config.hidden, rng)?),
        };
        let classifier = Linear::new(store, "classifier", config.hidden, config.classes, rng)?;
        let locator = Linear::new(store, "locator", config.hidden, 2, rng)?;
        let baseline = store.add_zeros("baseline", &[config.glimpses])?;
        Ok(Self {
            config,
            glimpse,
            core,
            classifier,
            locator,
            baseline,
        })
    }

    /// Runs `J` glimpses. `labels`/`mask` only feed the recorded rewards.
    pub fn run_episode<R: Rng>(
        &self,
        tape: &mut Tape,
        x: &Spectrogram,
        labels: &[f64],
        mask: &[bool],
        mut source: LocationSource<'_, R>,
    ) -> Result<(Trajectory, EpisodeVars)> {
        let cfg = &self.config;
        if x.frames() != cfg.frames || x.bins() != cfg.bins {
            return Err(Error::dim(format!(
                "model expects {}x{} spectrograms, got {}x{}",
                cfg.frames,
                cfg.bins,
                x.frames(),
                x.bins()
            )));
        }
        let first = match &mut source {
            LocationSource::Sample(rng) => [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)],
            LocationSource::Replay(draws) => *draws
                .first()
                .ok_or_else(|| Error::dim("replay has no initial location"))?,
        };
        let mut loc = Location::new(first[0], first[1]);
        let mut mu = loc.as_array();
        let mut sample = first;
        let mut pending_logprob: Option<Var> = None;

        let mut h = tape.constant(Tensor::zeros(&[1, cfg.hidden]));
        let mut steps = Vec::with_capacity(cfg.glimpses);
        let mut vars = EpisodeVars {
            preds: Vec::with_capacity(cfg.glimpses),
            logprobs: Vec::with_capacity(cfg.glimpses),
            hidden: Vec::with_capacity(cfg.glimpses),
        };
        let mut rewards = Vec::with_capacity(cfg.glimpses);
        for j in 0..cfg.glimpses {
            let patches = glimpse_extract(x, loc, &cfg.scales)?;
            let p = tape.constant(patches.patches);
            let rho = self.glimpse.forward(tape, p, loc)?;
            h = self.core.step(tape, h, rho)?;
            let logits = self.classifier.forward(tape, h)?;
            let pred = tape.sigmoid(logits);
            let pred_vals = tape.value(pred).data().to_vec();
            let r = step_reward(&pred_vals, labels, mask, DEFAULT_THRESHOLD);
            rewards.push(r);
            steps.push(TrajectoryStep {
                step: j + 1,
                mu,
                loc: loc.as_array(),
                sample,
                hidden: tape.value(h).data().to_vec(),
                reward: r,
                cumulative_reward: 0.0,
                pred: pred_vals,
            });
            vars.preds.push(pred);
            vars.logprobs.push(pending_logprob.take());
            vars.hidden.push(h);

            // the draw after the last step is never used; replays need not carry it
            if j + 1 == cfg.glimpses && matches!(source, LocationSource::Replay(_)) {
                break;
            }
            // the policy term trains the locator only
            let h_policy = tape.detach(h);
            let next = location_step(tape, h_policy, &self.locator, cfg.sigma, &mut source, j + 1)?;
            loc = next.location;
            mu = next.mean;
            sample = next.sample;
            pending_logprob = Some(next.logprob);
        }
        for (s, big_r) in steps.iter_mut().zip(cumulative_rewards(&rewards)) {
            s.cumulative_reward = big_r;
        }
        Ok((Trajectory { steps }, vars))
    }

    /// Hybrid loss of one labelled example.
    pub fn loss<R: Rng>(
        &self,
        tape: &mut Tape,
        ex: &LabeledExample,
        source: LocationSource<'_, R>,
        classification: &ClassificationLoss,
        baseline_weight: f64,
    ) -> Result<(Var, HybridDiagnostics, Trajectory)> {
        let (traj, vars) = self.run_episode(tape, &ex.spectrogram, &ex.labels, &ex.known, source)?;
        let terms = EpisodeTerms {
            final_pred: *vars.preds.last().expect("at least one step"),
            logprobs: vars.logprobs,
            cumulative_rewards: traj.steps.iter().map(|s| s.cumulative_reward).collect(),
        };
        let (loss, diag) = hybrid_loss(
            tape,
            &terms,
            &ex.labels,
            &ex.known,
            classification,
            self.baseline,
            baseline_weight,
        )?;
        Ok((loss, diag, traj))
    }

    pub fn trace<R: Rng>(&self, store: &ParamStore, ex: &LabeledExample, rng: &mut R) -> Result<Trajectory> {
        let mut tape = Tape::new(store);
        let (traj, _) = self.run_episode(&mut tape, &ex.spectrogram, &ex.labels, &ex.known, LocationSource::Sample(rng))?;
        Ok(traj)
    }

    /// Prediction of the last step.
    pub fn predict<R: Rng>(&self, store: &ParamStore, x: &Spectrogram, rng: &mut R) -> Result<Vec<f64>> {
        let c = self.config.classes;
        let mut tape = Tape::new(store);
        let (traj, _) = self.run_episode(&mut tape, x, &vec![0.0; c], &vec![false; c], LocationSource::Sample(rng))?;
        Ok(traj.final_prediction().to_vec())
    }
}
