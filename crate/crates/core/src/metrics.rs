//! Masked multi-label F1: per-class counts, instrument-wise and macro F1,
//! seed averaging, and CSV/JSON reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub known: u64,
}

impl Counts {
    /// `2tp / (2tp + fp + fn)`, zero when the denominator is zero.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Per-class confusion counts over known labels only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub classes: Vec<Counts>,
}

impl ClassCounts {
    pub fn new(classes: usize) -> Self {
        Self {
            classes: vec![Counts::default(); classes],
        }
    }

    /// Binarises `pred` at `threshold` and counts wherever `mask` is true.
    pub fn accumulate(&mut self, pred: &[f64], labels: &[f64], mask: &[bool], threshold: f64) -> Result<()> {
        let c = self.classes.len();
        if pred.len() != c || labels.len() != c || mask.len() != c {
            return Err(Error::dim(format!(
                "expected {c} classes, got pred {} labels {} mask {}",
                pred.len(),
                labels.len(),
                mask.len()
            )));
        }
        for (k, counts) in self.classes.iter_mut().enumerate() {
            if !mask[k] {
                continue;
            }
            counts.known += 1;
            let p = pred[k] >= threshold;
            let y = labels[k] >= 0.5;
            match (p, y) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(())
    }

    /// Exact merge of two disjoint accumulations.
    pub fn merge(&mut self, other: &ClassCounts) -> Result<()> {
        if other.classes.len() != self.classes.len() {
            return Err(Error::dim("cannot merge counts with different class counts"));
        }
        for (a, b) in self.classes.iter_mut().zip(&other.classes) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
            a.known += b.known;
        }
        Ok(())
    }

    pub fn f1_per_class(&self) -> Vec<f64> {
        self.classes.iter().map(Counts::f1).collect()
    }

    /// Unweighted mean F1 over classes with at least one known label.
    pub fn macro_f1(&self) -> f64 {
        let scored: Vec<f64> = self
            .classes
            .iter()
            .filter(|c| c.known > 0)
            .map(Counts::f1)
            .collect();
        if scored.is_empty() {
            0.0
        } else {
            scored.iter().sum::<f64>() / scored.len() as f64
        }
    }
}

/// Cell-wise mean of equally shaped per-class F1 tables (one per seed).
pub fn seed_average(tables: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = tables
        .first()
        .ok_or_else(|| Error::dim("no tables to average"))?;
    if tables.iter().any(|t| t.len() != first.len()) {
        return Err(Error::dim("per-seed tables differ in shape"));
    }
    let n = tables.len() as f64;
    Ok((0..first.len())
        .map(|i| tables.iter().map(|t| t[i]).sum::<f64>() / n)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub class: String,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub known: u64,
}

/// Instrument-wise rows followed by a `macro` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub macro_f1: f64,
}

impl MetricsReport {
    pub fn from_counts(class_names: &[String], counts: &ClassCounts) -> Result<Self> {
        if class_names.len() != counts.classes.len() {
            return Err(Error::dim("class name count differs from count table"));
        }
        let mut rows: Vec<MetricsRow> = class_names
            .iter()
            .zip(&counts.classes)
            .map(|(name, c)| MetricsRow {
                class: name.clone(),
                f1: c.f1(),
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                known: c.known,
            })
            .collect();
        let total = counts.classes.iter().fold(Counts::default(), |a, c| Counts {
            tp: a.tp + c.tp,
            fp: a.fp + c.fp,
            fn_: a.fn_ + c.fn_,
            known: a.known + c.known,
        });
        let macro_f1 = counts.macro_f1();
        rows.push(MetricsRow {
            class: "macro".into(),
            f1: macro_f1,
            tp: total.tp,
            fp: total.fp,
            fn_: total.fn_,
            known: total.known,
        });
        Ok(Self { rows, macro_f1 })
    }

    /// Report built from seed-averaged F1 values; counts are summed.
    pub fn averaged(reports: &[MetricsReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::dim("no reports to average"))?;
        if reports.iter().any(|r| {
            r.rows.len() != first.rows.len()
                || r.rows.iter().zip(&first.rows).any(|(a, b)| a.class != b.class)
        }) {
            return Err(Error::dim("reports differ in class layout"));
        }
        let tables: Vec<Vec<f64>> = reports
            .iter()
            .map(|r| r.rows.iter().map(|row| row.f1).collect())
            .collect();
        let mean = seed_average(&tables)?;
        let rows = first
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| MetricsRow {
                class: row.class.clone(),
                f1: mean[i],
                tp: reports.iter().map(|r| r.rows[i].tp).sum(),
                fp: reports.iter().map(|r| r.rows[i].fp).sum(),
                fn_: reports.iter().map(|r| r.rows[i].fn_).sum(),
                known: reports.iter().map(|r| r.rows[i].known).sum(),
            })
            .collect::<Vec<_>>();
        let macro_f1 = rows.last().map_or(0.0, |r| r.f1);
        Ok(Self { rows, macro_f1 })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,f1,tp,fp,fn,known\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{},{},{},{}\n",
                r.class, r.f1, r.tp, r.fp, r.fn_, r.known
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_conventions() {
        assert_eq!(Counts::default().f1(), 0.0);
        let c = Counts { tp: 5, fp: 0, fn_: 0, known: 5 };
        assert_eq!(c.f1(), 1.0);
        let c = Counts { tp: 3, fp: 1, fn_: 2, known: 9 };
        assert!((c.f1() - 6.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn unknown_labels_are_never_counted() {
        let mut c = ClassCounts::new(2);
        c.accumulate(&[0.9, 0.9], &[0.0, 1.0], &[false, true], 0.5).unwrap();
        assert_eq!(c.classes[0], Counts::default());
        assert_eq!(c.classes[1].tp, 1);
    }

    #[test]
    fn three_example_enumeration() {
        let preds = [[0.8, 0.2], [0.6, 0.7], [0.1, 0.9]];
        let labels = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let masks = [[true, true], [true, false], [true, true]];
        let mut c = ClassCounts::new(2);
        for i in 0..3 {
            c.accumulate(&preds[i], &labels[i], &masks[i], 0.5).unwrap();
        }
        // class 0: tp(ex0) fp(ex1) fn(ex2); class 1: tn(ex0) tp(ex2)
        assert_eq!(c.classes[0], Counts { tp: 1, fp: 1, fn_: 1, known: 3 });
        assert_eq!(c.classes[1], Counts { tp: 1, fp: 0, fn_: 0, known: 2 });
        assert!((c.macro_f1() - (0.5 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn macro_skips_classes_without_known_labels() {
        let mut c = ClassCounts::new(3);
        c.accumulate(&[0.9, 0.1, 0.9], &[1.0, 0.0, 1.0], &[true, true, false], 0.5)
            .unwrap();
        // class 1 has a known negative only: F1 = 0 but it still counts
        assert!((c.macro_f1() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn seed_average_cases() {
        let t = vec![0.2, 0.4];
        assert_eq!(seed_average(&[t.clone(), t.clone()]).unwrap(), t);
        assert_eq!(seed_average(&[t.clone()]).unwrap(), t);
        assert_eq!(
            seed_average(&[vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap(),
            vec![0.25, 0.5]
        );
        assert!(seed_average(&[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn csv_has_header_and_macro_row() {
        let mut c = ClassCounts::new(2);
        c.accumulate(&[0.9, 0.1], &[1.0, 0.0], &[true, true], 0.5).unwrap();
        let names = vec!["bass".to_string(), "flute".to_string()];
        let csv = MetricsReport::from_counts(&names, &c).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,f1,tp,fp,fn,known");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("macro,"));
    }
}
