//! Naive reference implementations shared by the oracle tests and the
//! acceptance report.

use atnm::features::Spectrogram;

/// Window of `h × w` cells around the nearest cell, zero outside, then
/// block means down to `base`.
pub fn naive_glimpse(x: &Spectrogram, loc: [f64; 2], size: (usize, usize), base: (usize, usize)) -> Vec<f64> {
    let (frames, bins) = (x.frames() as i64, x.bins() as i64);
    let ct = ((loc[0] + 1.0) / 2.0 * (frames - 1) as f64).round() as i64;
    let cf = ((loc[1] + 1.0) / 2.0 * (bins - 1) as f64).round() as i64;
    let (h, w) = (size.0 as i64, size.1 as i64);
    let mut window = vec![vec![0.0; w as usize]; h as usize];
    for (i, row) in window.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let t = ct - h / 2 + i as i64;
            let f = cf - w / 2 + j as i64;
            if (0..frames).contains(&t) && (0..bins).contains(&f) {
                *cell = x.get(t as usize, f as usize);
            }
        }
    }
    let (ph, pw) = (size.0 / base.0, size.1 / base.1);
    let mut out = Vec::new();
    for i in 0..base.0 {
        for j in 0..base.1 {
            let mut s = 0.0;
            for a in 0..ph {
                for b in 0..pw {
                    s += window[i * ph + a][j * pw + b];
                }
            }
            out.push(s / (ph * pw) as f64);
        }
    }
    out
}

pub fn direct_focal(pred: &[f64], y: &[f64], mask: &[bool], gamma: f64, w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for c in 0..pred.len() {
        if mask[c] {
            let p = if y[c] == 1.0 { pred[c] } else { 1.0 - pred[c] };
            total += -w[c] * (1.0 - p).powf(gamma) * p.ln();
            n += 1.0;
        }
    }
    total / n
}

pub fn direct_bce(pred: &[f64], y: &[f64], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for c in 0..pred.len() {
        if mask[c] {
            total += -(y[c] * pred[c].ln() + (1.0 - y[c]) * (1.0 - pred[c]).ln());
            n += 1.0;
        }
    }
    total / n
}
