use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::{Gradients, ParamId, ParamStore};
use crate::error::Result;

/// Central finite-difference comparison against reverse-mode gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub eps: f64,
    /// Coordinates checked per tensor; smaller tensors are checked exhaustively.
    pub coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            coords_per_tensor: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coords_checked: usize,
}

impl GradCheck {
    /// Checks every parameter in `store`.
    pub fn run<F>(&self, store: &mut ParamStore, f: F) -> Result<GradCheckReport>
    where
        F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
    {
        let ids: Vec<ParamId> = store.ids().collect();
        self.run_on(store, &ids, f)
    }

    /// Checks only the listed parameters. `f` must be deterministic.
    pub fn run_on<F>(&self, store: &mut ParamStore, ids: &[ParamId], f: F) -> Result<GradCheckReport>
    where
        F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
    {
        let (_, analytic) = f(store)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst_param: String::new(),
            worst_index: 0,
            coords_checked: 0,
        };
        for &id in ids {
            let n = store.value(id).len();
            let grad = analytic.dense(store, id);
            let coords: Vec<usize> = if n <= self.coords_per_tensor {
                (0..n).collect()
            } else {
                sample(&mut rng, n, self.coords_per_tensor).into_vec()
            };
            for i in coords {
                let orig = store.value(id).data()[i];
                store.value_mut(id).data_mut()[i] = orig + self.eps;
                let plus = f(store)?.0;
                store.value_mut(id).data_mut()[i] = orig - self.eps;
                let minus = f(store)?.0;
                store.value_mut(id).data_mut()[i] = orig;
                let numeric = (plus - minus) / (2.0 * self.eps);
                let a = grad.data()[i];
                let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
                report.coords_checked += 1;
                if rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst_param = store.get(id).name.clone();
                    report.worst_index = i;
                }
            }
        }
        Ok(report)
    }
}
