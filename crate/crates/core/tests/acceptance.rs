//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs everything; pass criterion numbers to
//! run a subset (`cargo test --test acceptance -- 5 7`). The report exits
//! zero unless `ATNM_ACCEPTANCE_STRICT` is set, in which case any FAIL line
//! makes the process fail.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use atnm::checkpoint::Checkpoint;
use atnm::cli::main_with;
use atnm::features::{default_class_names, synth_generate, LabeledExample, SynthConfig};
use atnm::losses::{partial_bce, partial_focal, ClassWeights};
use atnm::mil::{MilModel, MilVariant};
use atnm::nn::{Linear, ParamStore, Tape, Tensor};
use atnm::ram::{glimpse_extract, location_step, Location, LocationSource, RamVariant};
use atnm::training::{evaluate_model, split_train_val, train_on_split, Architecture, EarlyStopping, TrainConfig};
use common::grad_suite::{self, END_TO_END_TOL, LINEAR_TOL, RECURRENT_TOL};
use common::oracle::{direct_bce, direct_focal, naive_glimpse};
use common::{random_spectrogram, rng, small_mil};
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const GRADIENT_BUDGET: Duration = Duration::from_secs(300);
const SIMPLEX_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-12;
const FOCAL_CLOSED_FORM_TOL: f64 = 1e-9;
const DRAWS: usize = 1000;

const TOY_SAMPLES: usize = 100_000;
const TOY_MEAN: [f64; 2] = [0.9, -0.5];
const TOY_SIGMA: f64 = 0.17;
const TOY_STANDARD_ERRORS: f64 = 3.0;

const LEARN_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LEARN_EPOCHS: usize = 50;
const LEARN_MIN_F1: f64 = 0.90;
const RUN_BUDGET: Duration = Duration::from_secs(600);

const PATIENCE: usize = 10;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] criterion {n} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn gradient_integrity(rep: &mut Report) {
    let t0 = Instant::now();
    let checks: Vec<(&str, f64, f64)> = vec![
        ("linear+activations", grad_suite::linear_and_activations(), LINEAR_TOL),
        ("gru+rnn", grad_suite::recurrent_cells(), RECURRENT_TOL),
        ("rect conv", grad_suite::rect_conv(), RECURRENT_TOL),
        ("patch embedding", grad_suite::patch_embedding(), RECURRENT_TOL),
        ("AttTF", grad_suite::mil_family(MilVariant::AttTF), END_TO_END_TOL),
        ("AttTFid", grad_suite::mil_family(MilVariant::AttTFid), END_TO_END_TOL),
        ("AttT", grad_suite::mil_family(MilVariant::AttT), END_TO_END_TOL),
        ("FC", grad_suite::mil_family(MilVariant::Fc), END_TO_END_TOL),
        ("SR16", grad_suite::ram_family(RamVariant::Sr16), END_TO_END_TOL),
        ("SR16-FL", grad_suite::ram_family(RamVariant::Sr16Fl), END_TO_END_TOL),
        ("RAM16-RNN", grad_suite::ram_family(RamVariant::Ram16Rnn), END_TO_END_TOL),
        ("RAM16-GRU", grad_suite::ram_family(RamVariant::Ram16Gru), END_TO_END_TOL),
    ];
    let elapsed = t0.elapsed();
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, e, tol)| !(e < tol))
        .map(|(n, e, tol)| format!("{n} {e:.2e} >= {tol:.0e}"))
        .collect();
    let worst = checks.iter().map(|c| c.1 / c.2).fold(0.0, f64::max);
    let pass = bad.is_empty() && elapsed < GRADIENT_BUDGET;
    rep.line(
        1,
        "gradient integrity",
        pass,
        format!(
            "{} checks x 5 seeds, worst error/tolerance {worst:.2e}, {:.1}s{}",
            checks.len(),
            elapsed.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!("; over: {}", bad.join(", ")) }
        ),
    );
}

/// Attention maps of random models and inputs; weights are scaled up to push
/// the sigmoids into saturation.
fn attention_draws(mut each: impl FnMut(&atnm::mil::AttentionOutput)) {
    let mut r = rng(2024);
    let variants = [MilVariant::AttTF, MilVariant::AttTFid, MilVariant::AttT];
    for i in 0..DRAWS {
        let cfg = small_mil(variants[i % 3]);
        let mut store = ParamStore::new();
        let model = MilModel::new(cfg.clone(), &mut store, &mut r).unwrap();
        let scale = r.gen_range(0.1..20.0);
        for p in store.iter_mut() {
            p.value = p.value.map(|v| v * scale);
        }
        let x = random_spectrogram(cfg.frames, cfg.bins, &mut r);
        each(&model.attention_map(&store, &x).unwrap().unwrap());
    }
}

fn attention_simplex(rep: &mut Report) {
    let mut worst_sum: f64 = 0.0;
    let mut outside = 0;
    attention_draws(|out| {
        let (n, c) = out.attention.as_matrix();
        for k in 0..c {
            let s: f64 = (0..n).map(|i| out.attention.get2(i, k)).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
            let col: Vec<f64> = (0..n).map(|i| out.instance_preds.get2(i, k)).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(lo <= out.final_pred[k] && out.final_pred[k] <= hi) {
                outside += 1;
            }
        }
    });
    rep.line(
        2,
        "attention simplex",
        worst_sum < SIMPLEX_TOL && outside == 0,
        format!("{DRAWS} draws, max |sum - 1| {worst_sum:.2e}, {outside} predictions outside the instance range"),
    );
}

fn random_loss_case(r: &mut impl Rng) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let c = r.gen_range(1..21);
    let pred = (0..c).map(|_| r.gen_range(0.01..0.99)).collect();
    let labels = (0..c).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let mut mask: Vec<bool> = (0..c).map(|_| r.gen_bool(0.7)).collect();
    mask[r.gen_range(0..c)] = true;
    (pred, labels, mask)
}

fn oracle_equivalence(rep: &mut Report) {
    let mut r = rng(77);
    let corners = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
    let mut glimpse_mismatches = 0;
    for case in 0..DRAWS {
        let (frames, bins) = (r.gen_range(5..40), r.gen_range(5..30));
        let x = random_spectrogram(frames, bins, &mut r);
        let loc = if case < corners.len() {
            corners[case]
        } else {
            [r.gen_range(-1.0..=1.0), r.gen_range(-1.0..=1.0)]
        };
        let base = (r.gen_range(1..6), r.gen_range(1..6));
        let sizes: Vec<(usize, usize)> = (1..=r.gen_range(1..4)).map(|m| (base.0 * m, base.1 * m)).collect();
        let got = glimpse_extract(&x, Location::new(loc[0], loc[1]), &sizes).unwrap();
        let cells = base.0 * base.1;
        for (s, &size) in sizes.iter().enumerate() {
            if got.patches.data()[s * cells..(s + 1) * cells] != naive_glimpse(&x, loc, size, base)[..] {
                glimpse_mismatches += 1;
            }
        }
    }

    let mut agg_err: f64 = 0.0;
    attention_draws(|out| {
        let (n, c) = out.attention.as_matrix();
        for k in 0..c {
            let direct: f64 = (0..n).map(|i| out.attention.get2(i, k) * out.instance_preds.get2(i, k)).sum();
            agg_err = agg_err.max((direct - out.final_pred[k]).abs());
        }
    });

    let mut loss_err: f64 = 0.0;
    let mut not_invariant = 0;
    for _ in 0..DRAWS {
        let (pred, labels, mask) = random_loss_case(&mut r);
        let counts: Vec<usize> = (0..pred.len()).map(|_| r.gen_range(1..50)).collect();
        let w = ClassWeights::from_positive_counts(&counts);
        let bce = partial_bce(&pred, &labels, &mask).unwrap();
        let focal = partial_focal(&pred, &labels, &mask, 2.0, &w).unwrap();
        loss_err = loss_err
            .max((bce - direct_bce(&pred, &labels, &mask)).abs())
            .max((focal - direct_focal(&pred, &labels, &mask, 2.0, w.as_slice())).abs());
        let flipped: Vec<f64> = labels.iter().zip(&mask).map(|(&y, &k)| if k { y } else { 1.0 - y }).collect();
        if partial_bce(&pred, &flipped, &mask).unwrap() != bce || partial_focal(&pred, &flipped, &mask, 2.0, &w).unwrap() != focal {
            not_invariant += 1;
        }
    }
    rep.line(
        3,
        "oracle equivalence",
        glimpse_mismatches == 0 && agg_err < ORACLE_TOL && loss_err < ORACLE_TOL && not_invariant == 0,
        format!(
            "glimpse {glimpse_mismatches} mismatches in {DRAWS} cases; aggregation {agg_err:.2e}; losses {loss_err:.2e}; {not_invariant} masked-label sensitivities"
        ),
    );
}

fn loss_reductions(rep: &mut Report) {
    let mut r = rng(78);
    let mut err: f64 = 0.0;
    for _ in 0..DRAWS {
        let (pred, labels, mask) = random_loss_case(&mut r);
        let unit = ClassWeights::uniform(pred.len());
        let a = partial_focal(&pred, &labels, &mask, 0.0, &unit).unwrap();
        err = err.max((a - partial_bce(&pred, &labels, &mask).unwrap()).abs());
    }
    let v = partial_focal(&[0.5], &[1.0], &[true], 2.0, &ClassWeights::uniform(1)).unwrap();
    let closed = (v - 0.25 * 2f64.ln()).abs();
    rep.line(
        4,
        "loss reductions",
        err < ORACLE_TOL && closed < FOCAL_CLOSED_FORM_TOL,
        format!("focal(gamma=0) vs BCE max {err:.2e} over {DRAWS} cases; |focal(0.5) - ln2/4| {closed:.2e}"),
    );
}

/// `d/dμ E[−clamp(z)²]` and `E[−clamp(z)²]` for `z ~ N(μ, σ²)`, one axis.
fn toy_truth(mu: f64, sigma: f64) -> (f64, f64) {
    let n = Normal::new(0.0, 1.0).unwrap();
    let (a, b) = ((-1.0 - mu) / sigma, (1.0 - mu) / sigma);
    let inside = n.cdf(b) - n.cdf(a);
    let ex = n.pdf(a) - n.pdf(b);
    let ex2 = inside + a * n.pdf(a) - b * n.pdf(b);
    // E[z 1{|z|<1}] and E[z² 1{|z|<1}]
    let m1 = mu * inside + sigma * ex;
    let m2 = mu * mu * inside + 2.0 * mu * sigma * ex + sigma * sigma * ex2;
    let outside = 1.0 - inside;
    (-2.0 * m1, -(m2 + outside))
}

struct Moments {
    n: f64,
    sum: [f64; 2],
    sq: [f64; 2],
}

impl Moments {
    fn new() -> Self {
        Self { n: 0.0, sum: [0.0; 2], sq: [0.0; 2] }
    }
    fn push(&mut self, g: [f64; 2]) {
        self.n += 1.0;
        for d in 0..2 {
            self.sum[d] += g[d];
            self.sq[d] += g[d] * g[d];
        }
    }
    fn mean(&self, d: usize) -> f64 {
        self.sum[d] / self.n
    }
    fn var(&self, d: usize) -> f64 {
        (self.sq[d] - self.sum[d] * self.sum[d] / self.n) / (self.n - 1.0)
    }
}

/// REINFORCE on a frozen policy `μ = tanh(b)` with reward `−‖clamp(z)‖²`,
/// through the same location step and surrogate as the models.
fn policy_gradient(rep: &mut Report) {
    let mut store = ParamStore::new();
    let layer = Linear::new(&mut store, "loc", 1, 2, &mut rng(0)).unwrap();
    *store.value_mut(layer.weight) = Tensor::zeros(&[1, 2]);
    *store.value_mut(layer.bias) = Tensor::new(&[2], TOY_MEAN.iter().map(|m| m.atanh()).collect()).unwrap();
    let truth = [toy_truth(TOY_MEAN[0], TOY_SIGMA), toy_truth(TOY_MEAN[1], TOY_SIGMA)];
    let baseline = truth[0].1 + truth[1].1;

    let mut r = rng(5);
    let mut plain = Moments::new();
    let mut with_baseline = Moments::new();
    for _ in 0..TOY_SAMPLES {
        let mut tape = Tape::new(&store);
        let h = tape.constant(Tensor::zeros(&[1, 1]));
        let s = location_step(&mut tape, h, &layer, TOY_SIGMA, &mut LocationSource::Sample(&mut r), 2).unwrap();
        let l = s.location.as_array();
        let reward = -(l[0] * l[0] + l[1] * l[1]);
        let mut estimate = |adv: f64| {
            let loss = tape.affine(s.logprob, -adv, 0.0);
            let g = tape.backward(loss).dense(&store, layer.bias);
            // loss gradient w.r.t. the bias is −adv ∇_μ log π · (1 − μ²)
            [0, 1].map(|d| -g.data()[d] / (1.0 - s.mean[d] * s.mean[d]))
        };
        plain.push(estimate(reward));
        with_baseline.push(estimate(reward - baseline));
    }
    let mut z_max: f64 = 0.0;
    let mut lower = true;
    for d in 0..2 {
        let se = (plain.var(d) / plain.n).sqrt();
        z_max = z_max.max((plain.mean(d) - truth[d].0).abs() / se);
        lower &= with_baseline.var(d) < plain.var(d);
    }
    rep.line(
        5,
        "policy-gradient correctness",
        z_max < TOY_STANDARD_ERRORS && lower,
        format!(
            "MC [{:.4}, {:.4}] vs analytic [{:.4}, {:.4}], max {z_max:.2} SE; variance without/with baseline [{:.4}, {:.4}] / [{:.4}, {:.4}]",
            plain.mean(0),
            plain.mean(1),
            truth[0].0,
            truth[1].0,
            plain.var(0),
            plain.var(1),
            with_baseline.var(0),
            with_baseline.var(1)
        ),
    );
}

/// Separable 8-class data: one frequency band per class, notes covering
/// 10–30 % of a 48-frame clip, plus label-free broadband bursts (four per
/// clip on average) that mean pooling cannot discount.
fn learnability_data() -> SynthConfig {
    SynthConfig {
        classes: 8,
        examples: 2000,
        frames: 48,
        bins: 32,
        known_prob: 0.8,
        duty_cycle: (0.1, 0.3),
        amplitude: (1.0, 2.0),
        noise_std: 0.5,
        burst_rate: 4.0,
        burst_amplitude: 1.5,
        seed: 0,
        ..SynthConfig::default()
    }
}

fn learnability_config(variant: &str, seed: u64) -> TrainConfig {
    TrainConfig {
        variant: variant.into(),
        lr: 2e-3,
        max_epochs: LEARN_EPOCHS,
        patience: PATIENCE,
        seed,
        glimpses: 16,
        architecture: Architecture {
            grid_rows: 8,
            grid_cols: 4,
            patch_hidden: 32,
            feature_dim: 32,
            hidden: 64,
            scales: Some(vec![(12, 12)]),
            conv_maps: 4,
        },
        ..TrainConfig::default()
    }
}

fn learnability(rep: &mut Report) {
    let synth = learnability_data();
    let data = synth_generate(&synth).unwrap();
    let names = default_class_names(synth.classes);
    let (test, rest) = data.split_at(data.len() / 5);
    let variants = ["AttTF", "AttTFid", "AttT", "FC", "RAM16-GRU", "RAM16-RNN"];
    let mut scores = vec![Vec::new(); variants.len()];
    let mut slowest = Duration::ZERO;
    for seed in LEARN_SEEDS {
        let (train, val) = split_train_val(rest, 0.15, seed).unwrap();
        for (v, variant) in variants.iter().enumerate() {
            let cfg = learnability_config(variant, seed);
            let t0 = Instant::now();
            let out = train_on_split(&cfg, &train, &val, &names, |_| {}).unwrap();
            let f1 = evaluate_model(&out.model, &out.store, test, &names, cfg.eval_seed()).unwrap().macro_f1;
            let took = t0.elapsed();
            slowest = slowest.max(took);
            eprintln!("  {variant} seed {seed}: test macro F1 {f1:.4} (best epoch {}, {:.1}s)", out.record.best_epoch, took.as_secs_f64());
            scores[v].push(f1);
        }
    }
    let mean = |v: usize| scores[v].iter().sum::<f64>() / scores[v].len() as f64;
    let att_tf_min = scores[0].iter().cloned().fold(f64::INFINITY, f64::min);
    let best_attention = (0..3).map(mean).fold(f64::NEG_INFINITY, f64::max);
    let checks = [
        ("AttTF >= 0.90 on every seed", att_tf_min >= LEARN_MIN_F1),
        ("FC < best attention", mean(3) < best_attention),
        ("RAM16-GRU >= RAM16-RNN", mean(4) >= mean(5)),
        ("each run < 10 min", slowest < RUN_BUDGET),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let means: Vec<String> = variants.iter().enumerate().map(|(v, n)| format!("{n} {:.4}", mean(v))).collect();
    rep.line(
        6,
        "learnability",
        failed.is_empty(),
        format!(
            "5-seed test macro F1: {}; AttTF min {att_tf_min:.4}; slowest run {:.0}s{}",
            means.join(", "),
            slowest.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    );
}

fn small_data(seed: u64) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let cfg = SynthConfig {
        classes: 4,
        examples: 160,
        frames: 24,
        bins: 16,
        bandwidth: (1, 2),
        seed,
        ..SynthConfig::default()
    };
    split_train_val(&synth_generate(&cfg).unwrap(), 0.25, seed).unwrap()
}

fn small_train_config(variant: &str, lr: f64) -> TrainConfig {
    TrainConfig {
        variant: variant.into(),
        lr,
        batch_size: 16,
        max_epochs: 40,
        patience: PATIENCE,
        seed: 3,
        glimpses: 16,
        architecture: Architecture {
            grid_rows: 4,
            grid_cols: 2,
            patch_hidden: 8,
            feature_dim: 8,
            hidden: 8,
            scales: Some(vec![(8, 8), (16, 16)]),
            conv_maps: 2,
        },
        ..TrainConfig::default()
    }
}

fn protocol_fidelity(rep: &mut Report, scratch: &Path) {
    let (train, val) = small_data(1);
    let names = default_class_names(4);
    let mut notes = Vec::new();
    let mut pass = true;

    // a frozen model gives a flat validation curve: best at epoch 1
    let flat = train_on_split(&small_train_config("AttT", 0.0), &train, &val, &names, |_| {}).unwrap();
    let stop = flat.record.epochs.len();
    pass &= flat.record.best_epoch == 1 && stop == 1 + PATIENCE;
    notes.push(format!("plateau: best {} stop {stop}", flat.record.best_epoch));

    let mut es = EarlyStopping::new(PATIENCE);
    let curve = [0.1, 0.3, 0.5, 0.6, 0.6, 0.55, 0.6, 0.59, 0.6, 0.6, 0.58, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6];
    let mut stopped = None;
    for (i, &f1) in curve.iter().enumerate() {
        es.observe(i + 1, f1);
        if es.should_stop(i + 1) {
            stopped = Some(i + 1);
            break;
        }
    }
    pass &= stopped == Some(14);
    notes.push(format!("constructed curve: best 4 stop {stopped:?}"));

    for variant in ["AttTF", "SR16"] {
        let cfg = small_train_config(variant, 3e-3);
        let a = train_on_split(&cfg, &train, &val, &names, |_| {}).unwrap();
        let b = train_on_split(&cfg, &train, &val, &names, |_| {}).unwrap();
        let path = scratch.join(format!("{variant}.atnm"));
        a.checkpoint.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let (model, store) = loaded.restore().unwrap();
        let f1 = evaluate_model(&model, &store, &val, &names, cfg.eval_seed()).unwrap().macro_f1;
        let identical = a.checkpoint.to_bytes().unwrap() == b.checkpoint.to_bytes().unwrap();
        let early = a.record.epochs.len() < cfg.max_epochs;
        let stop_ok = !early || a.record.epochs.len() == a.record.best_epoch + PATIENCE;
        pass &= f1 == a.record.best_val_macro_f1 && identical && stop_ok;
        notes.push(format!(
            "{variant}: reload F1 {f1:.6} vs recorded {:.6}, byte-identical {identical}, stop {} after best {}",
            a.record.best_val_macro_f1,
            a.record.epochs.len(),
            a.record.best_epoch
        ));
    }
    rep.line(7, "protocol fidelity", pass, notes.join("; "));
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = main_with(std::iter::once("atnm").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn trace_contract(rep: &mut Report, scratch: &Path) {
    let root = scratch.join("trace");
    fs::create_dir_all(&root).unwrap();
    let cfg = serde_json::json!({
        "seeds": [0],
        "test_fraction": 0.2,
        "synth": { "classes": 4, "examples": 120, "frames": 24, "bins": 16, "bandwidth": [1, 2] },
        "train": serde_json::to_value(TrainConfig { max_epochs: 8, ..small_train_config("SR16", 3e-3) }).unwrap(),
    });
    let cfg_path = root.join("experiment.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let c = cfg_path.to_str().unwrap();
    let ok = cli(&["gen-data", "--config", c]).0 == 0 && cli(&["train", "--config", c]).0 == 0;
    let ck = root.join("runs/SR16/seed0/checkpoint.atnm");
    let data = root.join("data");
    let (code, out) = if ok {
        cli(&["trace", ck.to_str().unwrap(), "--data", data.to_str().unwrap()])
    } else {
        (-1, String::new())
    };

    let (mut traces, mut bad_len, mut out_of_bounds, mut inexact) = (0, 0, 0, 0);
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let steps = v["trace"].as_array().unwrap();
        traces += 1;
        if steps.len() != 16 {
            bad_len += 1;
        }
        let mut prev = 0.0;
        for s in steps {
            let loc: Vec<f64> = s["loc"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            if loc.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                out_of_bounds += 1;
            }
            let (r, big_r) = (s["reward"].as_f64().unwrap(), s["cumulative_reward"].as_f64().unwrap());
            if big_r - prev != r {
                inexact += 1;
            }
            prev = big_r;
        }
    }
    rep.line(
        8,
        "trace contract",
        code == 0 && traces > 0 && bad_len + out_of_bounds + inexact == 0,
        format!(
            "exit {code}, {traces} trajectories, {bad_len} not 16 steps, {out_of_bounds} locations out of bounds, {inexact} inexact reward differences"
        ),
    );
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let scratch = tempfile::TempDir::new().unwrap();
    let mut rep = Report { failures: 0 };
    if run(1) {
        gradient_integrity(&mut rep);
    }
    if run(2) {
        attention_simplex(&mut rep);
    }
    if run(3) {
        oracle_equivalence(&mut rep);
    }
    if run(4) {
        loss_reductions(&mut rep);
    }
    if run(5) {
        policy_gradient(&mut rep);
    }
    if run(6) {
        learnability(&mut rep);
    }
    if run(7) {
        protocol_fidelity(&mut rep, scratch.path());
    }
    if run(8) {
        trace_contract(&mut rep, scratch.path());
    }
    println!("acceptance: {} failing", rep.failures);
    if rep.failures > 0 && std::env::var_os("ATNM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
