//! Rate exponents by number of strong variables and the tuned leaf count.

use forest_lab::bounds::{optimal_leaf_count, reference_rates};

fn main() -> forest_lab::Result<()> {
    println!("{:>3} {:>8} {:>8} {:>8} {:>8}", "S", "new", "biau", "minimax", "approx");
    for s in 1..=10 {
        let r = reference_rates(s, 10)?;
        println!(
            "{s:>3} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.new, r.biau, r.minimax_s, r.approx_new
        );
    }
    for s in 1..=3 {
        println!(
            "S = {s}: k_n at n = 10^4 is {:.1}",
            optimal_leaf_count(1e4, s, 1.0, 0.5)?
        );
    }
    Ok(())
}
