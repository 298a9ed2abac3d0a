//! Bottom of the spectrum and related quantities.
//!
//! Closed forms exist for homogeneous trees: with `R = (b + 1)/(2√b)` and
//! `θ = arccos(1/R)`, `E0 = θ²/r²` and the radial spectrum is the union of
//! bands `[((π(l−1)+θ)/r)², ((πl−θ)/r)²]`. For general regular trees only the
//! two-sided bracket from `B(T)` and truncated eigenvalues are available.

pub mod tridiag;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pde::grid::{make_grid_half_line, BoundaryCondition};
use crate::reaction::Nonlinearity;
use crate::tree::RegularTree;

use tridiag::SymTridiag;

/// `R = (b + 1)/(2√b)`.
pub fn big_r(b: u32) -> f64 {
    let b = b as f64;
    (b + 1.0) / (2.0 * b.sqrt())
}

/// `θ = arccos(2√b/(b + 1))`.
pub fn theta(b: u32) -> f64 {
    (1.0 / big_r(b)).acos()
}

fn check_homogeneous(b: u32, r: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::OutOfRange(format!("b must be ≥ 2, got {b}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::OutOfRange(format!("r must be positive, got {r}")));
    }
    Ok(())
}

/// `E0 = θ²/r²` for the homogeneous tree `(b, r)`.
pub fn e0_homogeneous(b: u32, r: f64) -> Result<f64> {
    check_homogeneous(b, r)?;
    Ok((theta(b) / r).powi(2))
}

/// First `l_max` bands of the radial spectrum.
pub fn spectrum_bands(b: u32, r: f64, l_max: usize) -> Result<Vec<(f64, f64)>> {
    check_homogeneous(b, r)?;
    let th = theta(b);
    Ok((1..=l_max)
        .map(|l| {
            let l = l as f64;
            (
                ((PI * (l - 1.0) + th) / r).powi(2),
                ((PI * l - th) / r).powi(2),
            )
        })
        .collect())
}

/// Band membership through the band list.
pub fn in_bands(bands: &[(f64, f64)], lambda: f64) -> bool {
    bands.iter().any(|&(lo, hi)| lo <= lambda && lambda <= hi)
}

/// Roots of `α² − 2R cos(√λ r) α + 1 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticRoots {
    pub big_r: f64,
    pub lambda: f64,
    pub alpha_minus: Option<f64>,
    pub alpha_plus: Option<f64>,
}

impl QuadraticRoots {
    pub fn has_real_roots(&self) -> bool {
        self.alpha_plus.is_some()
    }
}

pub fn quadratic_roots(b: u32, r: f64, lambda: f64) -> Result<QuadraticRoots> {
    check_homogeneous(b, r)?;
    if !(lambda > 0.0) {
        return Err(Error::OutOfRange(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    let rr = big_r(b);
    let q = rr * (lambda.sqrt() * r).cos();
    let (lo, hi) = if q.abs() > 1.0 {
        let s = (q * q - 1.0).sqrt();
        // the larger-magnitude root first, its partner from the unit product
        let big = q + q.signum() * s;
        let small = 1.0 / big;
        if big > small {
            (Some(small), Some(big))
        } else {
            (Some(big), Some(small))
        }
    } else {
        (None, None)
    };
    Ok(QuadraticRoots {
        big_r: rr,
        lambda,
        alpha_minus: lo,
        alpha_plus: hi,
    })
}

fn require_h0(tree: &RegularTree, what: &str) -> Result<()> {
    if !tree.h0() {
        return Err(Error::hypothesis(
            "H0",
            format!("{what} needs b_n nondecreasing and gaps nonincreasing"),
        ));
    }
    Ok(())
}

/// Partial sums of `L(T)` until the geometric tail bound drops below `tol`.
/// Returns `(terms used, partial sum)`.
fn l_partial(tree: &RegularTree, tol: f64) -> Result<(usize, f64)> {
    let rho1 = tree.rho(1)?;
    let b1 = tree.b(1)? as f64;
    let mut sum = 0.0;
    let mut k = 0;
    loop {
        // remainder after k terms ≤ ρ_1 Σ_{j ≥ k} b_1^{-j}
        let tail = rho1 * b1.powi(-(k as i32)) * b1 / (b1 - 1.0);
        if tail < tol {
            return Ok((k, sum));
        }
        k += 1;
        if let Some(avail) = tree.intervals_available() {
            if k > avail {
                return Err(Error::PrefixExhausted {
                    needed: k,
                    available: avail,
                });
            }
        }
        sum += tree.gap(k)? / tree.product(k - 1)?;
    }
}

/// `L(T) = Σ_k (ρ_k − ρ_{k−1})/A_{k−1}` with remainder below `tol`.
pub fn series_l(tree: &RegularTree, tol: f64) -> Result<f64> {
    require_h0(tree, "L(T)")?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange("tol must be positive".into()));
    }
    Ok(l_partial(tree, tol)?.1)
}

/// `B(T) = sup_t V(t) W(t)` with `W(t) = ∫_t^∞ dρ/β`.
///
/// Each interval is sampled on 64 points plus its endpoints, doubling until the
/// interval maximum moves by less than `tol`; intervals are scanned until
/// their maxima stabilize. For explicit prefixes the remainder of `W` beyond
/// the prefix is replaced by its geometric majorant.
pub fn compute_b(tree: &RegularTree, tol: f64) -> Result<f64> {
    require_h0(tree, "B(T)")?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange("tol must be positive".into()));
    }
    let max_intervals = tree.intervals_available().unwrap_or(400);
    // W at each ρ_n, from the back
    let mut w_at = vec![0.0; max_intervals + 1];
    w_at[max_intervals] = match tree.intervals_available() {
        Some(k) => {
            // b_K may lie past the prefix; H0 gives b_K ≥ b_{K−1}
            let bk = match tree.b(k) {
                Ok(b) => b as f64,
                Err(_) => tree.b(k - 1)? as f64,
            };
            tree.gap(k)? / (tree.product(k - 1)? * bk) * bk / (bk - 1.0)
        }
        None => {
            let l = series_l(tree, tol * 1e-6)?;
            let mut head = 0.0;
            for k in 1..=max_intervals {
                head += tree.gap(k)? / tree.product(k - 1)?;
            }
            (l - head).max(0.0)
        }
    };
    for n in (0..max_intervals).rev() {
        w_at[n] = w_at[n + 1] + tree.gap(n + 1)? / tree.product(n)?;
    }
    let mut best: f64 = 0.0;
    let mut prev_interval_max = f64::NAN;
    let mut v_lo = 0.0;
    for n in 1..=max_intervals {
        let lo = tree.rho(n - 1)?;
        let hi = tree.rho(n)?;
        let beta = tree.beta_on_interval(n)?;
        let p = |t: f64| (v_lo + beta * (t - lo)) * (w_at[n] + (hi - t) / beta);
        let mut samples = 64;
        let mut m = sample_max(&p, lo, hi, samples);
        loop {
            samples *= 2;
            let m2 = sample_max(&p, lo, hi, samples);
            let done = (m2 - m).abs() < tol;
            m = m2;
            if done || samples > 1 << 20 {
                break;
            }
        }
        best = best.max(m);
        v_lo += beta * (hi - lo);
        if n >= 3 && (m - prev_interval_max).abs() < tol {
            break;
        }
        prev_interval_max = m;
    }
    Ok(best)
}

fn sample_max(p: &impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| p(lo + (hi - lo) * i as f64 / samples as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Principal eigenpair of the truncated radial problem on `(0, ρ_N)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrincipalEigen {
    pub generations: usize,
    pub cells_per_edge: usize,
    pub lambda: f64,
    /// Cell-centre values, positive, `Σ m_i v_i² = 1`.
    pub vector: Vec<f64>,
    pub centers: Vec<f64>,
    /// `‖K v − λ M v‖_∞`.
    pub residual: f64,
}

/// Smallest eigenvalue of `−(β u')'/β` on `(0, ρ_N)`, Neumann at 0 and
/// Dirichlet at `ρ_N`, on the same finite-volume stencil as the solver.
pub fn principal_eigenvalue_truncated(
    tree: &RegularTree,
    generations: usize,
    cells_per_edge: usize,
) -> Result<PrincipalEigen> {
    let grid = make_grid_half_line(
        tree,
        generations,
        cells_per_edge,
        BoundaryCondition::Dirichlet0,
    )?;
    let k = grid.stiffness_tridiag();
    let mass = grid.mass();
    let s: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let d = SymTridiag::new(
        k.diag.iter().zip(mass).map(|(a, m)| a / m).collect(),
        k.off
            .iter()
            .enumerate()
            .map(|(i, o)| o / (s[i] * s[i + 1]))
            .collect(),
    );
    let lambda = d.eigenvalue_bisection(0, 400)?;
    let shift = lambda - 1e-9 * lambda.abs().max(1e-300);
    let n = d.len();
    let mut y = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..8 {
        let z = d.solve_shifted(shift, &y)?;
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sign = if z.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        let next: Vec<f64> = z.iter().map(|x| sign * x / norm).collect();
        let change = next
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        y = next;
        if change < 1e-15 {
            break;
        }
    }
    let vector: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a / b).collect();
    if vector.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical(
            "principal eigenvector is not positive".into(),
        ));
    }
    let kv = k.matvec(&vector);
    let residual = kv
        .iter()
        .zip(mass)
        .zip(&vector)
        .map(|((a, m), v)| (a - lambda * m * v).abs())
        .fold(0.0, f64::max);
    Ok(PrincipalEigen {
        generations,
        cells_per_edge,
        lambda,
        vector,
        centers: grid.centers().to_vec(),
        residual,
    })
}

/// Where the `E0` used for `č` came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum E0Source {
    ClosedForm,
    /// `λ_{0,N} ≥ E0`, so the resulting `č` underestimates the true value.
    Truncation {
        generations: usize,
        cells_per_edge: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedBounds {
    /// `2√(f'(0) − E0)`, absent when `f'(0) < E0`.
    pub c_check: Option<f64>,
    /// `M ρ_1 b_1/(b_1 − 1)`.
    pub c_hat: f64,
    pub e0: f64,
    pub e0_source: E0Source,
}

/// `č` and `ĉ`; non-homogeneous trees use `λ_{0,N}` at the given truncation.
pub fn speed_bounds(
    tree: &RegularTree,
    f: &Nonlinearity,
    truncation: Option<(usize, usize)>,
) -> Result<SpeedBounds> {
    if !f.m().is_finite() {
        return Err(Error::hypothesis("H3", "M must be finite"));
    }
    let rho1 = tree.rho(1)?;
    let b1 = tree.b(1)? as f64;
    let c_hat = f.m() * rho1 * b1 / (b1 - 1.0);
    let (e0, source) = match tree.homogeneous_params() {
        Some((b, r)) => (e0_homogeneous(b, r)?, E0Source::ClosedForm),
        None => {
            let (n, cpe) = truncation.ok_or_else(|| {
                Error::OutOfRange(
                    "non-homogeneous tree: E0 needs a truncation (N, cells_per_edge)".into(),
                )
            })?;
            let ev = principal_eigenvalue_truncated(tree, n, cpe)?;
            (
                ev.lambda,
                E0Source::Truncation {
                    generations: n,
                    cells_per_edge: cpe,
                },
            )
        }
    };
    let gap = f.fprime0() - e0;
    let c_check = if gap >= 0.0 {
        Some(2.0 * gap.sqrt())
    } else {
        None
    };
    Ok(SpeedBounds {
        c_check,
        c_hat,
        e0,
        e0_source: source,
    })
}

/// Both sides of `2√(M r² − θ²) < M r² b/(b − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedGap {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn check_speed_gap(b: u32, r: f64, m: f64) -> Result<SpeedGap> {
    check_homogeneous(b, r)?;
    let th = theta(b);
    let mr2 = m * r * r;
    if !(mr2 > th * th) {
        return Err(Error::hypothesis(
            "f'(0) > E0",
            format!("M r² = {mr2} ≤ θ² = {}", th * th),
        ));
    }
    let lhs = 2.0 * (mr2 - th * th).sqrt();
    let rhs = mr2 * b as f64 / (b as f64 - 1.0);
    Ok(SpeedGap {
        holds: lhs < rhs,
        lhs,
        rhs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub e0_closed: Option<f64>,
    /// `(1/(4B), 1/B)`.
    pub e0_bounds: (f64, f64),
    /// `(b_1 − 1)²/(4 (b_1 ρ_1)²)`.
    pub e0_lower_from_l: f64,
    pub l: f64,
    pub b: f64,
    pub bands: Vec<(f64, f64)>,
    pub lambda0_by_truncation: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralOptions {
    pub tol: f64,
    pub l_max: usize,
    pub truncations: Vec<usize>,
    pub cells_per_edge: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-10,
            l_max: 3,
            truncations: vec![2, 4, 8, 12],
            cells_per_edge: 64,
        }
    }
}

pub fn spectral_report(tree: &RegularTree, opts: &SpectralOptions) -> Result<SpectralReport> {
    let l = series_l(tree, opts.tol)?;
    let b = compute_b(tree, opts.tol)?;
    let rho1 = tree.rho(1)?;
    let b1 = tree.b(1)? as f64;
    let (e0_closed, bands) = match tree.homogeneous_params() {
        Some((bb, r)) => (
            Some(e0_homogeneous(bb, r)?),
            spectrum_bands(bb, r, opts.l_max)?,
        ),
        None => (None, Vec::new()),
    };
    let lambda0_by_truncation = opts
        .truncations
        .iter()
        .map(|&n| {
            principal_eigenvalue_truncated(tree, n, opts.cells_per_edge).map(|e| (n, e.lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralReport {
        e0_closed,
        e0_bounds: (1.0 / (4.0 * b), 1.0 / b),
        e0_lower_from_l: (b1 - 1.0).powi(2) / (4.0 * (b1 * rho1).powi(2)),
        l,
        b,
        bands,
        lambda0_by_truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::logistic;

    #[test]
    fn closed_forms() {
        assert!((e0_homogeneous(3, 1.0).unwrap() - (PI / 6.0).powi(2)).abs() < 1e-15);
        assert!((e0_homogeneous(2, 1.0).unwrap() - 0.115489).abs() < 1e-6);
        assert!((theta(2) - 0.339837).abs() < 1e-6);
        for b in 2..8 {
            let a = e0_homogeneous(b, 1.0).unwrap();
            let c = e0_homogeneous(b, 2.0).unwrap();
            assert!((c - a / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bands_of_ternary_tree() {
        let bands = spectrum_bands(3, 1.0, 2).unwrap();
        assert!((bands[0].0 - 0.27416).abs() < 1e-5);
        assert!((bands[0].1 - 6.85389).abs() < 1e-5);
        assert_eq!(bands[0].0, e0_homogeneous(3, 1.0).unwrap());
        assert!(bands[0].1 < bands[1].0);
    }

    #[test]
    fn roots() {
        let q = quadratic_roots(3, 1.0, 0.2).unwrap();
        assert!((q.alpha_plus.unwrap() - 1.3310).abs() < 1e-4);
        assert!((q.alpha_minus.unwrap() - 0.7513).abs() < 1e-4);
        assert!((q.alpha_plus.unwrap() * q.alpha_minus.unwrap() - 1.0).abs() < 1e-12);
        assert!(!quadratic_roots(3, 1.0, 1.0).unwrap().has_real_roots());
    }

    #[test]
    fn l_series() {
        for b in [2u32, 3, 5] {
            let t = RegularTree::homogeneous(b, 1.0).unwrap();
            let l = series_l(&t, 1e-14).unwrap();
            assert!((l - b as f64 / (b as f64 - 1.0)).abs() < 1e-12);
        }
        let t = RegularTree::new(vec![1, 2, 3], vec![0.0, 1.0, 1.5]).unwrap();
        assert!(matches!(
            series_l(&t, 1e-6),
            Err(Error::PrefixExhausted { .. })
        ));
        let t = RegularTree::new(vec![1, 3, 2], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(series_l(&t, 1e-6), Err(Error::Hypothesis { .. })));
    }

    #[test]
    fn b_functional_against_homogeneous_oracle() {
        // independent closed form for homogeneous trees: the supremum is the
        // limit of the per-interval maxima, (r (b + 1)/(2 (b − 1)))²
        for &(b, r) in &[(2u32, 1.0), (3, 1.0), (5, 1.0), (2, 0.5)] {
            let t = RegularTree::homogeneous(b, r).unwrap();
            let got = compute_b(&t, 1e-10).unwrap();
            let bf = b as f64;
            let oracle = (r * (bf + 1.0) / (2.0 * (bf - 1.0))).powi(2);
            assert!(
                (got - oracle).abs() < 1e-6,
                "b={b} r={r}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn speed_bound_values() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let s = speed_bounds(&t, &logistic(1.0).unwrap(), None).unwrap();
        assert_eq!(s.c_hat, 2.0);
        assert!((s.c_check.unwrap() - 1.8809687663251309).abs() < 1e-12);
        let e0 = e0_homogeneous(2, 1.0).unwrap();
        let s = speed_bounds(&t, &logistic(e0).unwrap(), None).unwrap();
        assert_eq!(s.c_check, Some(0.0));
    }

    #[test]
    fn speed_gap_values() {
        let p = check_speed_gap(2, 1.0, 1.0).unwrap();
        assert!(p.holds);
        assert!((p.lhs - 1.8810).abs() < 1e-4);
        assert_eq!(p.rhs, 2.0);
        let p = check_speed_gap(2, 1.0, 0.5).unwrap();
        assert!(!p.holds);
        assert!((p.lhs - 1.2402).abs() < 1e-4);
        assert!(check_speed_gap(2, 1.0, 0.1).is_err());
    }

    #[test]
    fn single_interval_eigenvalue() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let e = principal_eigenvalue_truncated(&t, 1, 256).unwrap();
        assert!((e.lambda - (PI / 2.0).powi(2)).abs() < 1e-3);
        let g = make_grid_half_line(&t, 1, 256, BoundaryCondition::Dirichlet0).unwrap();
        assert!((g.weighted_l2(&e.vector) - 1.0).abs() < 1e-12);
        assert!(e.vector.iter().all(|&v| v > 0.0));
        assert!(e.residual < 1e-8);
    }
}
