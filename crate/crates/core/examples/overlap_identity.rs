//! Two trees, one query: the geometric leaf intersection against the
//! split-count identity, then the expected overlap by enumeration and by
//! sampling tree pairs.

use std::sync::Arc;

use forest_lab::analytics::{expected_overlap, tree_pair_overlap_mc, HalvingMode};
use forest_lab::{overlap_via_counts, overlap_volume, CenteredTree, SelectionProbs};

fn main() -> forest_lab::Result<()> {
    let probs = Arc::new(SelectionProbs::new(vec![0.5, 0.3, 0.2])?);
    let a = CenteredTree::new(10, 9, probs.clone());
    let b = CenteredTree::new(11, 9, probs.clone());
    let x = [0.3, 0.62, 0.9];
    let (ca, cb) = (a.route(&x)?.cell, b.route(&x)?.cell);
    println!("K  = {:?}\nK' = {:?}", ca.counts(), cb.counts());
    println!(
        "geometric {:e}  identity {:e}",
        overlap_volume(&ca, &cb)?,
        overlap_via_counts(&x, &a, &b)?
    );

    for depth in [2, 4, 8] {
        let exact = expected_overlap(probs.as_slice(), depth, HalvingMode::Exact)?;
        let mc = tree_pair_overlap_mc(probs.clone(), depth, 20_000, depth.into())?;
        println!(
            "D = {depth}: exact {:.6e}  sampled {:.6e} +/- {:.1e}",
            exact.mean, mc.mean, mc.stderr
        );
    }
    Ok(())
}
