//! Finite differences against the tape for a GRU cell and a full AttTF model.

use atnm::features::{synth_generate, SynthConfig};
use atnm::losses::ClassificationLoss;
use atnm::mil::{MilConfig, MilModel, MilVariant};
use atnm::nn::{GradCheck, GruCell, ParamStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atnm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mut store = ParamStore::new();
    let gru = GruCell::new(&mut store, "gru", 3, 4, &mut rng)?;
    let xs: Vec<Tensor> = (0..5).map(|t| Tensor::full(&[1, 3], 0.2 * t as f64 - 0.4)).collect();
    let report = GradCheck::default().run(&mut store, |s| {
        let mut tape = Tape::new(s);
        let mut h = tape.constant(Tensor::zeros(&[1, 4]));
        for x in &xs {
            let xv = tape.constant(x.clone());
            h = gru.step(&mut tape, h, xv)?;
        }
        let loss = tape.sum_all(h);
        Ok((tape.value(loss).data()[0], tape.backward(loss)))
    })?;
    println!("GRU over 5 steps: max relative error {:.2e} ({} coordinates)", report.max_rel_error, report.coords_checked);

    let data = synth_generate(&SynthConfig {
        classes: 3,
        examples: 1,
        frames: 16,
        bins: 12,
        ..SynthConfig::default()
    })?;
    let cfg = MilConfig {
        variant: MilVariant::AttTF,
        classes: 3,
        frames: 16,
        bins: 12,
        grid_rows: 4,
        grid_cols: 3,
        patch_hidden: 6,
        feature_dim: 5,
    };
    let mut store = ParamStore::new();
    let model = MilModel::new(cfg, &mut store, &mut rng)?;
    let loss_fn = ClassificationLoss::bce(3);
    let ex = &data[0];
    let report = GradCheck::default().run(&mut store, |s| {
        let mut tape = Tape::new(s);
        let out = model.forward(&mut tape, &ex.spectrogram)?;
        let loss = loss_fn.on_tape(&mut tape, out.final_pred, &ex.labels, &ex.known)?;
        Ok((tape.value(loss).data()[0], tape.backward(loss)))
    })?;
    println!(
        "AttTF end to end: max relative error {:.2e} at {}[{}]",
        report.max_rel_error, report.worst_param, report.worst_index
    );
    Ok(())
}
