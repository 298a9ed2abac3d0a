//! Build each barrier profile and print its verification summary.

use treefront::barriers::*;
use treefront::spectral::e0_homogeneous;
use treefront::{logistic, RegularTree};

fn summary(name: &str, rep: &ResidualReport) {
    println!(
        "{name:<14} {} checks, {} unexpected failures, {} declared defects",
        rep.entries.len(),
        rep.unexpected_failures,
        rep.expected_failures
    );
}

fn main() -> treefront::Result<()> {
    let (b, r) = (2, 1.0);
    let tree = RegularTree::homogeneous(b, r)?;
    let e0 = e0_homogeneous(b, r)?;
    let f = logistic(1.0)?;

    let g = build_g(b, r, 0.5 * e0, None)?;
    summary("g", &verify_barrier(&g, None, None, 64)?);
    summary("h", &verify_barrier(&build_h(b, r)?, None, None, 64)?);
    let ht = build_h_tilde(b, r, 0.5, 1.5, 0.9 * h_tilde_k_max(b, 0.5, 1.5))?;
    summary("h_tilde", &verify_barrier(&ht, None, None, 64)?);

    let c = 1.05 * m_speed_threshold(&tree, &f, MVariant::Repaired)?;
    for v in [MVariant::Verbatim, MVariant::Repaired] {
        let m = build_m(&tree, v)?;
        summary(
            &format!("m {v:?}"),
            &verify_barrier(&m, Some(&f), Some(c), 64)?,
        );
    }

    let shot = shoot_psi(&tree, f.fprime0(), 1.0, 1, 64, PsiRecursion::Exact)?;
    println!(
        "ψ: μ* = {:.9}, N = {}, tried {:?}",
        shot.mu, shot.n, shot.tried
    );
    summary("psi", &verify_barrier(&shot.build.profile, None, None, 64)?);
    let sub = build_psi_eps(&shot.build, &f, None)?;
    println!(
        "ε ψ: ε = {:.3e}, min residual {:.3e}",
        sub.eps, sub.min_residual
    );

    let eig = build_eigen_subsolution(&tree, &f, 8, 32, None)?;
    println!(
        "eigen subsolution: λ_0,8 = {:.6}, ε = {:.3e}",
        eig.lambda, eig.eps
    );
    Ok(())
}
