//! Split counts of adaptive trees on the noiseless linear model.

use forest_lab::adaptive::{adaptive_forest_counts, SubsetSampling};

fn main() -> forest_lab::Result<()> {
    let beta = [0.9, -0.6, 0.45, 0.3, -0.2, 0.1, 0.05, 0.02];
    let counts = adaptive_forest_counts(&beta, beta.len(), 1024, SubsetSampling::WithoutReplacement, 50, 8)?;
    for (j, b) in beta.iter().enumerate() {
        let ks: Vec<u32> = counts.iter().map(|c| c.k[j]).collect();
        let (lo, hi) = (ks.iter().min().unwrap(), ks.iter().max().unwrap());
        println!(
            "beta = {b:>6.2}  K in [{lo}, {hi}]  log2|beta| - K = {:.2}",
            b.abs().log2() - f64::from(*lo)
        );
    }
    Ok(())
}
