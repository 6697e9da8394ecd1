#![allow(dead_code)]

pub mod grad_suite;
pub mod oracle;

use atnm::features::{LabeledExample, Spectrogram};
use atnm::mil::{MilConfig, MilVariant};
use atnm::ram::{RamConfig, RamVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spectrogram(frames: usize, bins: usize, rng: &mut impl Rng) -> Spectrogram {
    let values = (0..frames * bins).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    Spectrogram::new(frames, bins, values).unwrap()
}

/// Random example with at least one known label.
pub fn random_example(frames: usize, bins: usize, classes: usize, rng: &mut impl Rng) -> LabeledExample {
    let labels = (0..classes).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
    let mut known: Vec<bool> = (0..classes).map(|_| rng.gen_bool(0.7)).collect();
    let k = rng.gen_range(0..classes);
    known[k] = true;
    LabeledExample::new("rand", random_spectrogram(frames, bins, rng), labels, known).unwrap()
}

pub fn small_mil(variant: MilVariant) -> MilConfig {
    MilConfig {
        variant,
        classes: 3,
        frames: 12,
        bins: 8,
        grid_rows: 3,
        grid_cols: 2,
        patch_hidden: 7,
        feature_dim: 5,
    }
}

pub fn small_ram(variant: RamVariant) -> RamConfig {
    let base = RamConfig::new(variant);
    let scales = match variant {
        RamVariant::Sr16 | RamVariant::Sr16Fl => vec![(8, 8), (16, 16)],
        _ => vec![(6, 6)],
    };
    RamConfig {
        classes: 3,
        frames: 20,
        bins: 12,
        glimpses: 4,
        scales,
        hidden: 6,
        feature_dim: 5,
        conv_maps: 2,
        ..base
    }
}
