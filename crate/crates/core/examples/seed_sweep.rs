//! Trains several variants over a few seeds and prints the seed-averaged
//! per-class F1 table for each.
//!
//! `cargo run --release --example seed_sweep -- AttT FC RAM16-GRU`

use atnm::features::{default_class_names, synth_generate, SynthConfig};
use atnm::metrics::MetricsReport;
use atnm::training::{evaluate_model, split_train_val, train_on_split, Architecture, TrainConfig};

fn main() -> atnm::Result<()> {
    let mut variants: Vec<String> = std::env::args().skip(1).collect();
    if variants.is_empty() {
        variants = vec!["AttTF".into(), "AttT".into(), "FC".into()];
    }
    let synth = SynthConfig {
        classes: 5,
        examples: 600,
        frames: 48,
        bins: 32,
        ..SynthConfig::default()
    };
    let data = synth_generate(&synth)?;
    let names = default_class_names(synth.classes);
    let (test, rest) = data.split_at(120);

    for variant in &variants {
        let mut reports = Vec::new();
        for seed in 0..3 {
            let (train, val) = split_train_val(rest, 0.15, seed)?;
            let cfg = TrainConfig {
                variant: variant.clone(),
                lr: 2e-3,
                max_epochs: 20,
                seed,
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
            };
            cfg.validate()?;
            let out = train_on_split(&cfg, &train, &val, &names, |_| {})?;
            let report = evaluate_model(&out.model, &out.store, test, &names, cfg.eval_seed())?;
            println!("{variant} seed {seed}: macro F1 {:.4} (best epoch {})", report.macro_f1, out.record.best_epoch);
            reports.push(report);
        }
        print!("{variant} averaged over 3 seeds\n{}\n", MetricsReport::averaged(&reports)?.to_csv());
    }
    Ok(())
}
