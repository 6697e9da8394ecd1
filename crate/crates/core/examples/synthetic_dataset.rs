//! Generates a small weakly labelled dataset, writes it to disk, reads it
//! back and draws one clip.

use atnm::features::{load_dataset, save_dataset, synth_generate, Manifest, ManifestEntry, Split, SynthConfig};

fn main() -> atnm::Result<()> {
    let cfg = SynthConfig {
        classes: 4,
        examples: 200,
        frames: 40,
        bins: 24,
        known_prob: 0.7,
        burst_rate: 0.5,
        ..SynthConfig::default()
    };
    let examples = synth_generate(&cfg)?;
    let manifest = Manifest {
        class_names: atnm::features::default_class_names(cfg.classes),
        frames: cfg.frames,
        bins: cfg.bins,
        examples: examples
            .iter()
            .enumerate()
            .map(|(i, e)| ManifestEntry {
                id: e.id.clone(),
                split: if i % 5 == 0 { Split::Test } else { Split::Train },
            })
            .collect(),
        source: None,
    };
    let dir = std::env::temp_dir().join("atnm-synthetic-example");
    save_dataset(&dir, &manifest, &examples)?;
    let back = load_dataset(&dir)?;
    println!("{} examples in {}", back.examples.len(), dir.display());

    println!("class          positives  unknown");
    for (c, name) in manifest.class_names.iter().enumerate() {
        let pos = examples.iter().filter(|e| e.known[c] && e.labels[c] == 1.0).count();
        let unknown = examples.iter().filter(|e| !e.known[c]).count();
        println!("{name:<14} {pos:>9}  {unknown:>7}");
    }

    let ex = &examples[0];
    let labels: Vec<String> = (0..cfg.classes)
        .map(|c| if ex.known[c] { format!("{}", ex.labels[c]) } else { "?".into() })
        .collect();
    println!("\n{} labels [{}]; frequency up, time right", ex.id, labels.join(", "));
    let shades = [' ', '.', ':', '+', '#'];
    for f in (0..cfg.bins).rev() {
        let row: String = (0..cfg.frames)
            .map(|t| {
                let v = ex.spectrogram.get(t, f).clamp(0.0, 2.0);
                shades[((v / 2.0) * 4.0).round() as usize]
            })
            .collect();
        println!("{f:>3} |{row}");
    }
    Ok(())
}
