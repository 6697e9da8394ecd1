//! Score-function gradient of a clamped Gaussian location policy with reward
//! `−‖l‖²`, with and without a baseline.

use atnm::losses::gaussian_logprob;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let mu = [0.9, -0.5];
    let sigma = 0.17;
    let n = 50_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, sigma).unwrap();

    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let z = [mu[0] + noise.sample(&mut rng), mu[1] + noise.sample(&mut rng)];
        let l = z.map(|v: f64| v.clamp(-1.0, 1.0));
        draws.push((z, -(l[0] * l[0] + l[1] * l[1])));
    }
    let baseline = draws.iter().map(|d| d.1).sum::<f64>() / n as f64;
    println!("mean reward {baseline:.4}");

    for (label, b) in [("no baseline", 0.0), ("mean baseline", baseline)] {
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for (z, r) in &draws {
            let (_, score) = gaussian_logprob(z, &mu, sigma);
            for d in 0..2 {
                let g = (r - b) * score[d];
                sum[d] += g;
                sq[d] += g * g;
            }
        }
        let mean = sum.map(|s| s / n as f64);
        let var = [0, 1].map(|d| sq[d] / n as f64 - mean[d] * mean[d]);
        println!(
            "{label:<14} gradient [{:+.4}, {:+.4}]  per-sample variance [{:.3}, {:.3}]",
            mean[0], mean[1], var[0], var[1]
        );
    }
    // the clamp removes the payoff of pushing past the edge, so the first
    // component is smaller in magnitude than the unclamped −2μ
    println!("unclamped gradient [{:+.4}, {:+.4}]", -2.0 * mu[0], -2.0 * mu[1]);
}
