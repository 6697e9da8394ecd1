//! `atnm` command line: gen-data, train, eval, trace.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::features::{
    default_class_names, load_dataset, save_dataset, synth_generate, Dataset, LabeledExample, Manifest,
    ManifestEntry, Split,
};
use crate::metrics::MetricsReport;
use crate::model::Model;
use crate::training::{eval_episode_seed, evaluate_model, train, train_on_split, RunRecord, TrainConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.atnm";
pub const THREADS_ENV: &str = "ATNM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "atnm", version, about = "Attention models for multi-label spectrogram tagging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one run per seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train a single run with this seed instead of the seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score checkpoints; several checkpoints are seed-averaged.
    Eval {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Episode seed for stochastic variants.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export glimpse trajectories of a recurrent-attention checkpoint.
    Trace {
        checkpoint: PathBuf,
        /// Comma-separated example ids; the whole split when absent.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData { config, seed, out } => cmd_gen_data(config.as_deref(), seed, out, stdout),
        Command::Train {
            config,
            seed,
            out,
            data,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(d) = data {
                cfg.dataset = d;
            }
            cmd_train(&cfg, stdout).map(|_| ())
        }
        Command::Eval {
            checkpoints,
            config,
            data,
            split,
            seed,
            out,
        } => {
            let dataset = load_dataset(dataset_dir(config.as_deref(), data)?)?;
            let report = cmd_eval(&checkpoints, &dataset, split, seed, out.as_deref())?;
            write_out(stdout, &report.to_csv())
        }
        Command::Trace {
            checkpoint,
            ids,
            config,
            data,
            split,
            seed,
            out,
        } => {
            let dataset = load_dataset(dataset_dir(config.as_deref(), data)?)?;
            let traces = cmd_trace(&checkpoint, &dataset, split, &ids, seed)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    for (id, json) in &traces {
                        write_file(&dir.join(format!("{id}.trace.json")), json)?;
                    }
                    write_out(stdout, &format!("wrote {} traces to {}\n", traces.len(), dir.display()))
                }
                None => {
                    for (id, json) in &traces {
                        write_out(stdout, &format!("{{\"id\":{},\"trace\":{json}}}\n", serde_json::to_string(id)?))?;
                    }
                    Ok(())
                }
            }
        }
    }
}

fn write_out(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dataset_dir(config: Option<&Path>, data: Option<PathBuf>) -> Result<PathBuf> {
    match (data, config) {
        (Some(d), _) => Ok(d),
        (None, Some(c)) => Ok(ExperimentConfig::load(c)?.dataset),
        (None, None) => Err(Error::config("no dataset given; pass --data or --config")),
    }
}

/// Deterministic test-split assignment: a shuffled `round(fraction·N)` go to test.
pub fn assign_splits(ids: &[String], test_fraction: f64, seed: u64) -> Vec<ManifestEntry> {
    let n_test = (test_fraction * ids.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; ids.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    ids.iter()
        .zip(is_test)
        .map(|(id, t)| ManifestEntry {
            id: id.clone(),
            split: if t { Split::Test } else { Split::Train },
        })
        .collect()
}

pub fn cmd_gen_data(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.synth.seed = s;
    }
    let dir = out.unwrap_or(cfg.dataset.clone());
    let examples = synth_generate(&cfg.synth)?;
    let ids: Vec<String> = examples.iter().map(|e| e.id.clone()).collect();
    let manifest = Manifest {
        class_names: default_class_names(cfg.synth.classes),
        frames: cfg.synth.frames,
        bins: cfg.synth.bins,
        examples: assign_splits(&ids, cfg.test_fraction, cfg.synth.seed),
        source: Some(serde_json::json!({ "synth": cfg.synth, "test_fraction": cfg.test_fraction })),
    };
    save_dataset(&dir, &manifest, &examples)?;
    let mut summary = format!("wrote {} examples to {}\nclass,positive_rate,known\n", examples.len(), dir.display());
    for (c, name) in manifest.class_names.iter().enumerate() {
        let known = examples.iter().filter(|e| e.known[c]).count();
        let pos = examples.iter().filter(|e| e.known[c] && e.labels[c] >= 0.5).count();
        let rate = if known == 0 { 0.0 } else { pos as f64 / known as f64 };
        summary.push_str(&format!("{name},{rate:.4},{known}\n"));
    }
    write_out(stdout, &summary)
}

/// Directory of one run under the output root.
pub fn run_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(variant).join(format!("seed{seed}"))
}

fn parallelism() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn train_one(cfg: &TrainConfig, dataset: &Dataset, out: &Path) -> Result<RunRecord> {
    let names = &dataset.manifest.class_names;
    let train_set = dataset.split(Split::Train);
    let val_set = dataset.split(Split::Val);
    let outcome = if val_set.is_empty() {
        train(cfg, &train_set, names)?
    } else {
        train_on_split(cfg, &train_set, &val_set, names, |_| {})?
    };
    let dir = run_dir(out, &cfg.variant, cfg.seed);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    outcome.checkpoint.save(&ck_path)?;
    let mut record = outcome.record;
    record.checkpoint_path = Some(ck_path.display().to_string());
    write_file(&dir.join("run.jsonl"), &record.to_json_lines()?)?;
    write_file(&dir.join("run.json"), &(serde_json::to_string_pretty(&record)? + "\n"))?;
    Ok(record)
}

/// One independent run per seed; seeds run on up to `ATNM_THREADS` threads.
pub fn cmd_train(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    let root = cfg.out_dir.join(&cfg.train.variant);
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    write_file(&root.join("experiment.json"), &(cfg.to_json()? + "\n"))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord>>>> = Mutex::new((0..cfg.seeds.len()).map(|_| None).collect());
    let threads = parallelism().min(cfg.seeds.len());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let tc = TrainConfig {
                    seed,
                    ..cfg.train.clone()
                };
                let r = train_one(&tc, &dataset, &cfg.out_dir);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });

    let mut records = Vec::new();
    let mut first_err = None;
    for (seed, r) in cfg.seeds.iter().zip(results.into_inner().expect("result lock")) {
        match r.expect("every seed ran") {
            Ok(rec) => {
                write_out(
                    stdout,
                    &format!(
                        "{} seed {seed}: best epoch {} val macro F1 {:.4} ({} epochs)\n",
                        cfg.train.variant,
                        rec.best_epoch,
                        rec.best_val_macro_f1,
                        rec.epochs.len()
                    ),
                )?;
                records.push(rec);
            }
            Err(e) => {
                eprintln!("{} seed {seed}: {e}", cfg.train.variant);
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

fn check_compatible(ck: &Checkpoint, dataset: &Dataset) -> Result<()> {
    let m = &dataset.manifest;
    let (frames, bins) = match &ck.header.model {
        crate::model::ModelConfig::Mil(c) => (c.frames, c.bins),
        crate::model::ModelConfig::Ram(c) => (c.frames, c.bins),
    };
    if ck.header.model.classes() != m.class_names.len() || frames != m.frames || bins != m.bins {
        return Err(Error::format(
            12,
            format!(
                "checkpoint expects {} classes of {frames}x{bins}, dataset has {} classes of {}x{}",
                ck.header.model.classes(),
                m.class_names.len(),
                m.frames,
                m.bins
            ),
        ));
    }
    Ok(())
}

fn recorded_eval_seed(ck: &Checkpoint) -> u64 {
    ck.header
        .metadata
        .get("eval_seed")
        .and_then(|v| v.as_u64())
        .unwrap_or(0)
}

/// Per-checkpoint reports are written as `metrics_{i}.*`, the final (averaged
/// when several) table as `metrics.*`.
pub fn cmd_eval(
    checkpoints: &[PathBuf],
    dataset: &Dataset,
    split: Split,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<MetricsReport> {
    let examples = dataset.split(split);
    if examples.is_empty() {
        return Err(Error::config(format!("split {split:?} of the dataset is empty")));
    }
    let mut reports = Vec::with_capacity(checkpoints.len());
    let mut variant: Option<String> = None;
    for path in checkpoints {
        let ck = Checkpoint::load(path)?;
        match &variant {
            Some(v) if *v != ck.header.variant => {
                return Err(Error::format(
                    12,
                    format!("{} holds {}, expected {v}", path.display(), ck.header.variant),
                ))
            }
            _ => variant = Some(ck.header.variant.clone()),
        }
        check_compatible(&ck, dataset)?;
        let (model, store) = ck.restore()?;
        let eval_seed = seed.unwrap_or(recorded_eval_seed(&ck));
        reports.push(evaluate_model(&model, &store, &examples, &dataset.manifest.class_names, eval_seed)?);
    }
    let report = if reports.len() == 1 {
        reports[0].clone()
    } else {
        MetricsReport::averaged(&reports)?
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if reports.len() > 1 {
            for (i, r) in reports.iter().enumerate() {
                write_file(&dir.join(format!("metrics_{i}.csv")), &r.to_csv())?;
                write_file(&dir.join(format!("metrics_{i}.json")), &(r.to_json()? + "\n"))?;
            }
        }
        write_file(&dir.join("metrics.csv"), &report.to_csv())?;
        write_file(&dir.join("metrics.json"), &(report.to_json()? + "\n"))?;
    }
    Ok(report)
}

/// Trajectory JSON per requested example, in request order.
pub fn cmd_trace(
    checkpoint: &Path,
    dataset: &Dataset,
    split: Split,
    ids: &[String],
    seed: Option<u64>,
) -> Result<Vec<(String, String)>> {
    let ck = Checkpoint::load(checkpoint)?;
    check_compatible(&ck, dataset)?;
    let (model, store) = ck.restore()?;
    let Model::Ram(ram) = model else {
        return Err(Error::Unsupported(format!(
            "trace needs a recurrent-attention checkpoint, {} has none",
            ck.header.variant
        )));
    };
    let eval_seed = seed.unwrap_or(recorded_eval_seed(&ck));
    let selected: Vec<LabeledExample> = if ids.is_empty() {
        dataset.split(split)
    } else {
        let by_id = dataset.by_id();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|e| (*e).clone())
                    .ok_or_else(|| Error::config(format!("no example with id {id:?}")))
            })
            .collect::<Result<_>>()?
    };
    let mut out = Vec::with_capacity(selected.len());
    for ex in &selected {
        let mut rng = ChaCha8Rng::seed_from_u64(eval_episode_seed(eval_seed, &ex.id));
        let traj = ram.trace(&store, ex, &mut rng)?;
        out.push((ex.id.clone(), serde_json::to_string(&traj)?));
    }
    Ok(out)
}
