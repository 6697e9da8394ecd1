//! Spectrogram containers, instance tiling with the trainable patch encoder,
//! and the synthetic dataset generator.

mod container;
mod spectrogram;
mod synth;
mod tiling;

pub use container::{
    decode_example, encode_example, load_dataset, load_example, load_manifest, save_dataset,
    save_example, Dataset, Manifest, ManifestEntry, Split, MANIFEST_FILE, SPEC_MAGIC, SPEC_VERSION,
};
pub use spectrogram::{
    default_class_names, LabeledExample, Spectrogram, DEFAULT_BINS, DEFAULT_CLASSES,
    DEFAULT_FRAMES, INSTRUMENT_NAMES,
};
pub use synth::{example_rng, synth_example, synth_generate, SynthConfig};
pub use tiling::{tile_shape, tile_spectrogram, PatchEmbedding, TileGrid};
