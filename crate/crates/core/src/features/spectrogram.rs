use crate::error::{Error, Result};

pub const DEFAULT_FRAMES: usize = 998;
pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_CLASSES: usize = 20;

/// The twenty instrument categories used for report labels.
pub const INSTRUMENT_NAMES: [&str; 20] = [
    "accordion",
    "banjo",
    "bass",
    "cello",
    "clarinet",
    "cymbals",
    "drums",
    "flute",
    "guitar",
    "mallet_percussion",
    "mandolin",
    "organ",
    "piano",
    "saxophone",
    "synthesizer",
    "trombone",
    "trumpet",
    "ukulele",
    "violin",
    "voice",
];

/// Class names for `count` classes: instrument names first, then `class_<i>`.
pub fn default_class_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            INSTRUMENT_NAMES
                .get(i)
                .map_or_else(|| format!("class_{i}"), |s| s.to_string())
        })
        .collect()
}

/// Time-major grid of log-magnitude values, stored at single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    values: Vec<f32>,
}

impl Spectrogram {
    pub fn new(frames: usize, bins: usize, values: Vec<f32>) -> Result<Self> {
        if frames == 0 || bins == 0 {
            return Err(Error::dim(format!("empty spectrogram {frames}x{bins}")));
        }
        if values.len() != frames * bins {
            return Err(Error::dim(format!(
                "{frames}x{bins} spectrogram needs {} values, got {}",
                frames * bins,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::dim("spectrogram contains non-finite values"));
        }
        Ok(Self {
            frames,
            bins,
            values,
        })
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            values: vec![0.0; frames * bins],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.bins + bin] as f64
    }

    pub fn set(&mut self, frame: usize, bin: usize, value: f32) {
        self.values[frame * self.bins + bin] = value;
    }
}

/// A spectrogram with per-class labels and a mask of which labels are known.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub spectrogram: Spectrogram,
    pub labels: Vec<f64>,
    pub known: Vec<bool>,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, spectrogram: Spectrogram, labels: Vec<f64>, known: Vec<bool>) -> Result<Self> {
        if labels.len() != known.len() {
            return Err(Error::dim(format!(
                "{} labels but {} mask entries",
                labels.len(),
                known.len()
            )));
        }
        if labels.iter().any(|y| !(0.0..=1.0).contains(y)) {
            return Err(Error::dim("labels must lie in [0, 1]"));
        }
        Ok(Self {
            id: id.into(),
            spectrogram,
            labels,
            known,
        })
    }

    pub fn classes(&self) -> usize {
        self.labels.len()
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }

    pub fn has_known_labels(&self) -> bool {
        self.known.iter().any(|&k| k)
    }
}
