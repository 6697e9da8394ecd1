//! Trains AttTF on synthetic clips and prints, for one test clip, where the
//! attention of each sounding class lands on the time-frequency grid.

use atnm::features::{default_class_names, synth_generate, SynthConfig};
use atnm::model::Model;
use atnm::training::{evaluate_model, split_train_val, train_on_split, Architecture, TrainConfig};

fn main() -> atnm::Result<()> {
    let synth = SynthConfig {
        classes: 4,
        examples: 600,
        frames: 48,
        bins: 32,
        duty_cycle: (0.1, 0.3),
        ..SynthConfig::default()
    };
    let data = synth_generate(&synth)?;
    let names = default_class_names(synth.classes);
    let (test, rest) = data.split_at(100);
    let (train, val) = split_train_val(rest, 0.15, 0)?;
    let cfg = TrainConfig {
        variant: "AttTF".into(),
        lr: 2e-3,
        max_epochs: 25,
        architecture: Architecture {
            grid_rows: 8,
            grid_cols: 4,
            patch_hidden: 32,
            feature_dim: 32,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    let out = train_on_split(&cfg, &train, &val, &names, |e| {
        println!("epoch {:>2}  loss {:.4}  val macro F1 {:.4}", e.epoch, e.train_loss, e.val_macro_f1)
    })?;
    let report = evaluate_model(&out.model, &out.store, test, &names, cfg.eval_seed())?;
    print!("\n{}", report.to_csv());

    let Model::Mil(mil) = &out.model else { unreachable!() };
    let ex = test.iter().find(|e| e.labels.iter().any(|&y| y == 1.0)).expect("a sounding clip");
    let map = mil.attention_map(&out.store, &ex.spectrogram)?.expect("attention variant");
    let (rows, cols) = (cfg.architecture.grid_rows, cfg.architecture.grid_cols);
    for c in (0..synth.classes).filter(|&c| ex.labels[c] == 1.0) {
        println!("\n{} in {}: prediction {:.3}; attention per tile, band up, time right", names[c], ex.id, map.final_pred[c]);
        for f in (0..cols).rev() {
            let row: Vec<String> = (0..rows).map(|t| format!("{:4.2}", map.attention.get2(t * cols + f, c))).collect();
            println!("  {}", row.join(" "));
        }
    }
    Ok(())
}
