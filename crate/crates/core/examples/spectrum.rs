//! Bottom of the spectrum, bands and truncated eigenvalues for a few trees.

use treefront::spectral::*;
use treefront::{logistic, RegularTree};

fn main() -> treefront::Result<()> {
    for (b, r) in [(2u32, 1.0), (3, 1.0), (2, 0.5)] {
        let tree = RegularTree::homogeneous(b, r)?;
        let e0 = e0_homogeneous(b, r)?;
        println!("homogeneous({b}, {r}): E0 = {e0:.12}");
        for (l, (lo, hi)) in spectrum_bands(b, r, 3)?.iter().enumerate() {
            println!("  band {}: [{lo:.6}, {hi:.6}]", l + 1);
        }
        for n in [2, 4, 8, 12] {
            let ev = principal_eigenvalue_truncated(&tree, n, 32)?;
            println!(
                "  λ_0,{n:<2} = {:.6}  (residual {:.1e})",
                ev.lambda, ev.residual
            );
        }
        println!(
            "  L = {:.12}, B = {:.6}",
            series_l(&tree, 1e-14)?,
            compute_b(&tree, 1e-10)?
        );
        let sb = speed_bounds(&tree, &logistic(1.0)?, None)?;
        println!("  logistic(1): č = {:?}, ĉ = {:.6}", sb.c_check, sb.c_hat);
    }
    Ok(())
}
