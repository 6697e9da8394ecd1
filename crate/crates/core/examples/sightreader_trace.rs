//! Trains a small Sightreader (SR16) and prints the glimpse trajectory it
//! follows on one clip.

use atnm::features::{default_class_names, synth_generate, SynthConfig};
use atnm::model::Model;
use atnm::training::{eval_episode_seed, split_train_val, train_on_split, Architecture, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atnm::Result<()> {
    let synth = SynthConfig {
        classes: 4,
        examples: 300,
        frames: 48,
        bins: 32,
        ..SynthConfig::default()
    };
    let data = synth_generate(&synth)?;
    let names = default_class_names(synth.classes);
    let (train, val) = split_train_val(&data, 0.2, 0)?;
    let cfg = TrainConfig {
        variant: "SR16".into(),
        lr: 2e-3,
        max_epochs: 8,
        architecture: Architecture {
            hidden: 32,
            feature_dim: 32,
            conv_maps: 4,
            scales: Some(vec![(12, 12), (24, 24)]),
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    let out = train_on_split(&cfg, &train, &val, &names, |e| {
        println!("epoch {}  loss {:.4}  val macro F1 {:.4}", e.epoch, e.train_loss, e.val_macro_f1)
    })?;
    let Model::Ram(ram) = &out.model else { unreachable!() };

    let ex = &val[0];
    let mut rng = ChaCha8Rng::seed_from_u64(eval_episode_seed(cfg.eval_seed(), &ex.id));
    let traj = ram.trace(&out.store, ex, &mut rng)?;
    println!("\n{} labels {:?}", ex.id, ex.labels);
    println!("step   time   freq  frame  bin  reward  cumulative");
    for s in &traj.steps {
        let loc = atnm::ram::Location::new(s.loc[0], s.loc[1]);
        let (t, f) = loc.to_cell(synth.frames, synth.bins);
        println!(
            "{:>4} {:>6.3} {:>6.3} {:>6} {:>4} {:>7.3} {:>11.3}",
            s.step, s.loc[0], s.loc[1], t, f, s.reward, s.cumulative_reward
        );
    }
    let pred: Vec<String> = traj.final_prediction().iter().map(|p| format!("{p:.2}")).collect();
    println!("final prediction [{}]", pred.join(", "));
    Ok(())
}
