//! Finite-difference checks for every layer and both model families. Each
//! check returns the worst relative error over [`SEEDS`].

use atnm::features::PatchEmbedding;
use atnm::losses::ClassificationLoss;
use atnm::mil::{MilModel, MilVariant};
use atnm::nn::{Activation, GradCheck, Gradients, GruCell, Linear, ParamId, ParamStore, RectConv, RnnCell, Tape, Tensor, Var};
use atnm::ram::{LocationSource, RamModel, RamVariant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{random_example, rng, small_mil, small_ram};

pub const LINEAR_TOL: f64 = 1e-6;
pub const RECURRENT_TOL: f64 = 1e-5;
pub const END_TO_END_TOL: f64 = 1e-4;
pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Zero-initialised biases put ReLU inputs exactly on the kink whenever a
/// whole layer is inactive; finite differences are meaningless there.
fn randomize_biases(store: &mut ParamStore, rng: &mut impl Rng) {
    for p in store.iter_mut() {
        if p.name.ends_with("bias") {
            let shape = p.value.shape().to_vec();
            p.value = random_tensor(&shape, rng);
        }
    }
}

/// Weighted sum of all outputs so every output coordinate matters.
fn weighted_sum(tape: &mut Tape, y: Var, w: &Tensor) -> Var {
    let c = tape.constant(w.clone());
    let prod = tape.mul(y, c).unwrap();
    tape.sum_all(prod)
}

fn finish(tape: &Tape, loss: Var) -> atnm::Result<(f64, Gradients)> {
    Ok((tape.value(loss).data()[0], tape.backward(loss)))
}

fn error(store: &mut ParamStore, ids: Option<&[ParamId]>, f: impl Fn(&ParamStore) -> atnm::Result<(f64, Gradients)>) -> f64 {
    let all: Vec<ParamId> = store.ids().collect();
    GradCheck::default()
        .run_on(store, ids.unwrap_or(&all), f)
        .unwrap()
        .max_rel_error
}

pub fn linear_and_activations() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let layer = Linear::new(&mut store, "fc", 4, 3, &mut r).unwrap();
        randomize_biases(&mut store, &mut r);
        let x = random_tensor(&[5, 4], &mut r);
        let w = random_tensor(&[5, 3], &mut r);
        for act in [None, Some(Activation::Sigmoid), Some(Activation::Tanh), Some(Activation::Relu)] {
            worst = worst.max(error(&mut store, None, |s| {
                let mut tape = Tape::new(s);
                let xv = tape.constant(x.clone());
                let mut y = layer.forward(&mut tape, xv)?;
                if let Some(a) = act {
                    y = tape.activation(y, a);
                }
                let loss = weighted_sum(&mut tape, y, &w);
                finish(&tape, loss)
            }));
        }
    }
    worst
}

/// GRU and vanilla RNN cells unrolled over four steps.
pub fn recurrent_cells() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "gru", 3, 4, &mut r).unwrap();
        let rnn = RnnCell::new(&mut store, "rnn", 3, 4, &mut r).unwrap();
        randomize_biases(&mut store, &mut r);
        let xs: Vec<Tensor> = (0..4).map(|_| random_tensor(&[1, 3], &mut r)).collect();
        let w = random_tensor(&[1, 4], &mut r);
        worst = worst.max(error(&mut store, None, |s| {
            let mut tape = Tape::new(s);
            let mut h1 = tape.constant(Tensor::zeros(&[1, 4]));
            let mut h2 = h1;
            for x in &xs {
                let xv = tape.constant(x.clone());
                h1 = gru.step(&mut tape, h1, xv)?;
                h2 = rnn.step(&mut tape, h2, xv)?;
            }
            let both = tape.add(h1, h2)?;
            let loss = weighted_sum(&mut tape, both, &w);
            finish(&tape, loss)
        }));
    }
    worst
}

/// Temporal and timbral kernels followed by spatial max-pooling.
pub fn rect_conv() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let convs: Vec<RectConv> = [(3, 1), (1, 3)]
            .iter()
            .map(|&(kh, kw)| RectConv::new(&mut store, &format!("c{kh}x{kw}"), 2, kh, kw, &mut r).unwrap())
            .collect();
        randomize_biases(&mut store, &mut r);
        let x = random_tensor(&[1, 1, 5, 6], &mut r);
        let w = random_tensor(&[1, 2], &mut r);
        worst = worst.max(error(&mut store, None, |s| {
            let mut tape = Tape::new(s);
            let xv = tape.constant(x.clone());
            let mut total = None;
            for c in &convs {
                let y = c.forward(&mut tape, xv)?;
                let pooled = tape.max_pool_spatial(y)?;
                let l = weighted_sum(&mut tape, pooled, &w);
                total = Some(match total {
                    None => l,
                    Some(t) => tape.add(t, l)?,
                });
            }
            finish(&tape, total.unwrap())
        }));
    }
    worst
}

pub fn patch_embedding() -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let mut store = ParamStore::new();
        let patch = PatchEmbedding::new(&mut store, 6, 3, 2, 5, 4, &mut r).unwrap();
        randomize_biases(&mut store, &mut r);
        let tiles = random_tensor(&[6, 6], &mut r);
        let w = random_tensor(&[6, 4], &mut r);
        worst = worst.max(error(&mut store, None, |s| {
            let mut tape = Tape::new(s);
            let t = tape.constant(tiles.clone());
            let y = patch.forward(&mut tape, t)?;
            let loss = weighted_sum(&mut tape, y, &w);
            finish(&tape, loss)
        }));
    }
    worst
}

/// Classification loss of one MIL variant, end to end.
pub fn mil_family(variant: MilVariant) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let cfg = small_mil(variant);
        let mut store = ParamStore::new();
        let model = MilModel::new(cfg.clone(), &mut store, &mut r).unwrap();
        randomize_biases(&mut store, &mut r);
        let ex = random_example(cfg.frames, cfg.bins, cfg.classes, &mut r);
        let loss_fn = ClassificationLoss::bce(cfg.classes);
        worst = worst.max(error(&mut store, None, |s| {
            let mut tape = Tape::new(s);
            let out = model.forward(&mut tape, &ex.spectrogram)?;
            let loss = loss_fn.on_tape(&mut tape, out.final_pred, &ex.labels, &ex.known)?;
            finish(&tape, loss)
        }));
    }
    worst
}

/// Recurrent-attention variant with its location draws frozen.
///
/// The locator is checked against the full hybrid objective and every other
/// trained weight against the classification loss. The advantage is a
/// constant, so the baselines must equal the closed form `2λ(b − R)`; a
/// mismatch there is reported as an infinite error.
pub fn ram_family(variant: RamVariant) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in SEEDS {
        let mut r = rng(seed);
        let cfg = small_ram(variant);
        let mut store = ParamStore::new();
        let model = RamModel::new(cfg.clone(), &mut store, &mut r).unwrap();
        randomize_biases(&mut store, &mut r);
        *store.value_mut(model.baseline) = random_tensor(&[cfg.glimpses], &mut r);
        let ex = random_example(cfg.frames, cfg.bins, cfg.classes, &mut r);
        let loss_fn = ClassificationLoss::bce(cfg.classes);
        let traj = model.trace(&store, &ex, &mut r).unwrap();
        let draws = traj.samples();

        let hybrid = |s: &ParamStore| {
            let mut tape = Tape::new(s);
            let src = LocationSource::<ChaCha8Rng>::Replay(&draws);
            let (loss, _, _) = model.loss(&mut tape, &ex, src, &loss_fn, 1.0)?;
            finish(&tape, loss)
        };
        let (_, grads) = hybrid(&store).unwrap();
        let gb = grads.dense(&store, model.baseline);
        for (j, step) in traj.steps.iter().enumerate() {
            let want = 2.0 * (store.value(model.baseline).data()[j] - step.cumulative_reward);
            if (gb.data()[j] - want).abs() > 1e-12 {
                return f64::INFINITY;
            }
        }

        let locator: Vec<ParamId> = store
            .iter()
            .filter(|(_, p)| p.name.starts_with("locator"))
            .map(|(id, _)| id)
            .collect();
        worst = worst.max(error(&mut store, Some(&locator), hybrid));

        let rest: Vec<ParamId> = store
            .ids()
            .filter(|id| !locator.contains(id) && *id != model.baseline)
            .collect();
        worst = worst.max(error(&mut store, Some(&rest), |s| {
            let mut tape = Tape::new(s);
            let src = LocationSource::<ChaCha8Rng>::Replay(&draws);
            let (_, vars) = model.run_episode(&mut tape, &ex.spectrogram, &ex.labels, &ex.known, src)?;
            let last = *vars.preds.last().unwrap();
            let loss = loss_fn.on_tape(&mut tape, last, &ex.labels, &ex.known)?;
            finish(&tape, loss)
        }));
    }
    worst
}
