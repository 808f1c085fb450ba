//! `E[2^{-½Σ|M − M′|}]` for two independent multinomials: enumeration,
//! sampling, the upper bound and the two-category normal approximation.

use forest_lab::analytics::{halving_exact, halving_mc, multibound_upper, normal_approx_check};

fn main() -> forest_lab::Result<()> {
    let p = [0.5, 0.3, 0.2];
    println!(
        "{:>3} {:>10} {:>10} {:>9} {:>10}",
        "m", "exact", "sampled", "stderr", "upper"
    );
    for m in 1..=8 {
        let mc = halving_mc(m, &p, 50_000, m)?;
        println!(
            "{m:>3} {:>10.6} {:>10.6} {:>9.1e} {:>10.6}",
            halving_exact(m, &p)?,
            mc.mean,
            mc.stderr,
            multibound_upper(m, &p)?
        );
    }
    for m in [10, 100, 1000] {
        let c = normal_approx_check(m, 0.5)?;
        println!(
            "m = {m}: exact {:.6} approx {:.6} ratio {:.4}",
            c.exact, c.approx, c.ratio
        );
    }
    Ok(())
}
