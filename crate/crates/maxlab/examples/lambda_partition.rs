//! Density-controlled partitions: splitting a box so that no child's
//! average exceeds lambda times its parent's.
//!
//! For lambda >= 2 a midpoint cut always works; below 2 the cut slides
//! toward the heavy side until both parts obey the ratio, which is what
//! makes interval-like families "lambda-dense" for every lambda > 1. The
//! verifier re-derives all seven defining properties of the filtration
//! from raw grid data — it never trusts the statistics cached in the tree.

use maxlab::builtins::linear_ramp;
use maxlab::partition::{build_filtration, verify_density, AxisBox, StopRule};

fn main() -> maxlab::Result<()> {
    let g = linear_ramp()?;
    let root = AxisBox::new(vec![0.0], vec![1.0])?;
    let tree = build_filtration(&g, &root, 1.5, 2.0, StopRule {
        max_depth: None,
        min_diam: Some(0.03125),
    })?;
    println!("ramp f(x) = x on [0,1], lambda = 1.5, min_diam = 1/32: {} nodes", tree.nodes.len());

    // First generation of cuts: the ramp is heavier on the right, so cuts
    // land right of the midpoint to keep the right child's mean in check.
    println!("\nfirst cuts (node, interval, mean, cut):");
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let n = &tree.nodes[i];
        if n.depth > 2 {
            continue;
        }
        let cut = n.cut.as_ref().map_or("leaf".into(), |c| format!("x = {:.4}", c.coord));
        println!("  {:>3}  [{:.4}, {:.4}]  mean {:.4}  {}",
            i, n.region.lo[0], n.region.hi[0], n.x, cut);
        stack.extend(n.children.iter().rev());
    }

    let report = verify_density(&tree, &g, 1.5)?;
    println!("\ndefining properties:");
    for item in &report.items {
        println!("  {:<12} {}  worst {:+.2e}  ({})",
            item.name,
            if item.pass { "pass" } else { "FAIL" },
            item.worst,
            item.detail);
    }
    assert!(report.pass);

    // The same splitter refuses ratios that cannot be enforced.
    assert!(build_filtration(&g, &root, 1.0, 2.0, StopRule {
        max_depth: Some(3),
        min_diam: None,
    })
    .is_err());
    Ok(())
}
