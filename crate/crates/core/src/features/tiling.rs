use std::ops::Range;

use rand::Rng;

use super::spectrogram::Spectrogram;
use crate::error::{Error, Result};
use crate::nn::{Linear, ParamStore, Tape, Tensor, Var};

/// Non-overlapping tiles of a spectrogram on a `rows × cols` grid.
///
/// Row `i` of `tiles` is instance `(t, f)` with `i = t·cols + f`, holding the
/// flattened (time-major) cells of that tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    pub rows: usize,
    pub cols: usize,
    pub tile_frames: usize,
    pub tile_bins: usize,
    pub tiles: Tensor,
}

impl TileGrid {
    pub fn instances(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cells_per_tile(&self) -> usize {
        self.tile_frames * self.tile_bins
    }

    pub fn frame_range(&self, t: usize) -> Range<usize> {
        t * self.tile_frames..(t + 1) * self.tile_frames
    }

    pub fn bin_range(&self, f: usize) -> Range<usize> {
        f * self.tile_bins..(f + 1) * self.tile_bins
    }

    pub fn tile(&self, t: usize, f: usize) -> &[f64] {
        self.tiles.row(t * self.cols + f)
    }
}

/// Tile size `(⌊T/T'⌋, ⌊F/F'⌋)` for a grid, or a dimension error.
pub fn tile_shape(frames: usize, bins: usize, rows: usize, cols: usize) -> Result<(usize, usize)> {
    if rows == 0 || cols == 0 {
        return Err(Error::dim("tile grid must be at least 1x1"));
    }
    if rows > frames || cols > bins {
        return Err(Error::dim(format!(
            "grid {rows}x{cols} exceeds spectrogram {frames}x{bins}"
        )));
    }
    Ok((frames / rows, bins / cols))
}

/// Partitions `x` into a `rows × cols` grid; trailing frames and bins that do
/// not fill a whole tile are dropped.
pub fn tile_spectrogram(x: &Spectrogram, rows: usize, cols: usize) -> Result<TileGrid> {
    let (tf, tb) = tile_shape(x.frames(), x.bins(), rows, cols)?;
    let mut data = Vec::with_capacity(rows * cols * tf * tb);
    for t in 0..rows {
        for f in 0..cols {
            for i in t * tf..(t + 1) * tf {
                for j in f * tb..(f + 1) * tb {
                    data.push(x.get(i, j));
                }
            }
        }
    }
    Ok(TileGrid {
        rows,
        cols,
        tile_frames: tf,
        tile_bins: tb,
        tiles: Tensor::new(&[rows * cols, tf * tb], data)?,
    })
}

/// Trainable tile encoder: a shared projection of each flattened tile to
/// `hidden` units with ReLU, then one projection to `dim` per frequency
/// column so that every frequency ordinate owns its weights.
#[derive(Debug, Clone)]
pub struct PatchEmbedding {
    pub shared: Linear,
    pub columns: Vec<Linear>,
    pub rows: usize,
    pub cols: usize,
}

impl PatchEmbedding {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        cells: usize,
        rows: usize,
        cols: usize,
        hidden: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let shared = Linear::new(store, "patch.shared", cells, hidden, rng)?;
        let columns = (0..cols)
            .map(|f| Linear::new(store, &format!("patch.column{f}"), hidden, dim, rng))
            .collect::<Result<_>>()?;
        Ok(Self {
            shared,
            columns,
            rows,
            cols,
        })
    }

    /// `tiles` is `(rows·cols) × cells`; returns `(rows·cols) × dim` in the same
    /// instance order.
    pub fn forward(&self, tape: &mut Tape, tiles: Var) -> Result<Var> {
        let expected = self.rows * self.cols;
        if tape.shape(tiles)[0] != expected {
            return Err(Error::dim(format!(
                "expected {expected} tiles, got {}",
                tape.shape(tiles)[0]
            )));
        }
        let h = self.shared.forward(tape, tiles)?;
        let h = tape.relu(h);
        let mut per_column = Vec::with_capacity(self.cols);
        for (f, layer) in self.columns.iter().enumerate() {
            let rows: Vec<usize> = (0..self.rows).map(|t| t * self.cols + f).collect();
            let g = tape.gather_rows(h, &rows)?;
            per_column.push(layer.forward(tape, g)?);
        }
        // stacked column-major: row f·rows + t
        let stacked = tape.concat_rows(&per_column)?;
        let perm: Vec<usize> = (0..expected)
            .map(|i| (i % self.cols) * self.rows + i / self.cols)
            .collect();
        tape.gather_rows(stacked, &perm)
    }
}
