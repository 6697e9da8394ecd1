//! Masked BCE against class-weighted focal loss, and the per-step reward of
//! the glimpse policy.

use atnm::losses::{cumulative_rewards, partial_bce, partial_focal, quantize_reward, step_reward, ClassWeights};

fn main() -> atnm::Result<()> {
    // class 2 is unannotated for this clip
    let labels = [1.0, 0.0, 1.0, 0.0];
    let known = [true, true, false, true];
    let weights = ClassWeights::from_positive_counts(&[120, 40, 300, 15]);
    println!("focal class weights {:?}", weights.as_slice());

    println!("\n  p(true class)     BCE   focal g=2");
    for p in [0.5, 0.7, 0.9, 0.99] {
        let pred = [p, 1.0 - p, 0.3, 1.0 - p];
        println!(
            "  {p:>12.2} {:>7.4} {:>11.4}",
            partial_bce(&pred, &labels, &known)?,
            partial_focal(&pred, &labels, &known, 2.0, &weights)?
        );
    }

    // the unknown label never matters
    let flipped = [1.0, 0.0, 0.0, 0.0];
    let pred = [0.8, 0.3, 0.9, 0.1];
    assert_eq!(partial_bce(&pred, &labels, &known)?, partial_bce(&pred, &flipped, &known)?);

    println!("\nrewards along an episode whose predictions sharpen:");
    let episode = [[0.4, 0.6, 0.5, 0.4], [0.6, 0.6, 0.5, 0.4], [0.7, 0.3, 0.5, 0.6], [0.9, 0.1, 0.5, 0.2]];
    let rewards: Vec<f64> = episode
        .iter()
        .map(|p| quantize_reward(step_reward(p, &labels, &known, 0.5)))
        .collect();
    for (j, (r, big_r)) in rewards.iter().zip(cumulative_rewards(&rewards)).enumerate() {
        println!("  step {} r = {r:.4}  R = {big_r:.4}", j + 1);
    }
    Ok(())
}
