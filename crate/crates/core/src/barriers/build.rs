use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::grid::{make_grid_half_line, BoundaryCondition};
use crate::reaction::Nonlinearity;
use crate::spectral::{e0_homogeneous, principal_eigenvalue_truncated, quadratic_roots};
use crate::tree::RegularTree;

use super::profile::{
    BarrierKind, BarrierProfile, DifferentialRelation, ExpectedDefect, Factor, Formula,
    JumpRelation, PieceSource, Relation,
};

fn params(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Supersolution `g` for `0 < λ < E0`; `alpha` defaults to the smaller root `α_−`.
pub fn build_g(b: u32, r: f64, lambda: f64, alpha: Option<f64>) -> Result<BarrierProfile> {
    let tree = RegularTree::homogeneous(b, r)?;
    let e0 = e0_homogeneous(b, r)?;
    if !(lambda > 0.0 && lambda < e0) {
        return Err(Error::OutOfRange(format!(
            "λ = {lambda} outside the admissible range (0, E0) with E0 = {e0}"
        )));
    }
    let roots = quadratic_roots(b, r, lambda)?;
    let (alpha_minus, alpha_plus) = match (roots.alpha_minus, roots.alpha_plus) {
        (Some(m), Some(p)) => (m, p),
        _ => return Err(Error::Numerical(format!("no real roots at λ = {lambda}"))),
    };
    let alpha = alpha.unwrap_or(alpha_minus);
    if !(alpha >= alpha_minus && alpha < 1.0) {
        return Err(Error::OutOfRange(format!(
            "α = {alpha} outside [α_−, 1) = [{alpha_minus}, 1)"
        )));
    }
    let sb = (b as f64).sqrt();
    Ok(BarrierProfile {
        kind: BarrierKind::GSuper,
        tree,
        pieces: PieceSource::GeometricSinPair {
            k: lambda.sqrt(),
            left: sb,
            right: alpha,
            s0: 1.0 / sb,
            q: alpha / sb,
        },
        support: None,
        jump: JumpRelation {
            value: Factor::Const(1.0),
            derivative: Some((Factor::Const(b as f64), Relation::Ge)),
        },
        boundary: Relation::Le,
        differential: vec![
            DifferentialRelation::Helmholtz { k2: lambda },
            DifferentialRelation::Nonincreasing { strict: false },
            DifferentialRelation::Bounds { lo: 0.0, hi: 1.0 },
        ],
        vanishes_at_support_end: false,
        expected_defects: Vec::new(),
        params: params(&[
            ("b", b as f64),
            ("r", r),
            ("lambda", lambda),
            ("alpha", alpha),
            ("alpha_minus", alpha_minus),
            ("alpha_plus", alpha_plus),
            ("e0", e0),
        ]),
    })
}

/// Ground state `h` of the homogeneous tree at `λ = E0`.
pub fn build_h(b: u32, r: f64) -> Result<BarrierProfile> {
    let tree = RegularTree::homogeneous(b, r)?;
    let e0 = e0_homogeneous(b, r)?;
    let sb = (b as f64).sqrt();
    Ok(BarrierProfile {
        kind: BarrierKind::HGround,
        tree,
        pieces: PieceSource::GeometricSinPair {
            k: e0.sqrt(),
            left: sb,
            right: 1.0,
            s0: 1.0,
            q: 1.0,
        },
        support: None,
        jump: JumpRelation {
            value: Factor::Const(sb),
            derivative: Some((Factor::Const(sb), Relation::Eq)),
        },
        boundary: Relation::Le,
        differential: vec![
            DifferentialRelation::Helmholtz { k2: e0 },
            DifferentialRelation::Nonincreasing { strict: false },
            DifferentialRelation::Bounds { lo: 0.0, hi: sb },
        ],
        vanishes_at_support_end: false,
        expected_defects: Vec::new(),
        params: params(&[("b", b as f64), ("r", r), ("e0", e0)]),
    })
}

/// Upper limit on `k` for the rescaled ground state.
pub fn h_tilde_k_max(b: u32, sigma: f64, p0: f64) -> f64 {
    (sigma / (1.0 + sigma)).powf(1.0 / (p0 - 1.0)) / (b as f64).sqrt()
}

/// `h̃ = k h/√β`: continuous, with derivative factor `b` at every breakpoint.
pub fn build_h_tilde(b: u32, r: f64, sigma: f64, p0: f64, k: f64) -> Result<BarrierProfile> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::OutOfRange(format!(
            "σ must lie in (0, 1), got {sigma}"
        )));
    }
    if !(p0 > 1.0 && p0.is_finite()) {
        return Err(Error::OutOfRange(format!("p0 must exceed 1, got {p0}")));
    }
    let k_max = h_tilde_k_max(b, sigma, p0);
    if !(k > 0.0 && k < k_max) {
        return Err(Error::OutOfRange(format!(
            "k = {k} outside (0, {k_max}) for σ = {sigma}, p0 = {p0}"
        )));
    }
    let mut out = build_h(b, r)?;
    let sb = (b as f64).sqrt();
    out.kind = BarrierKind::HTilde;
    out.pieces = PieceSource::GeometricSinPair {
        k: out.params["e0"].sqrt(),
        left: sb,
        right: 1.0,
        s0: k,
        q: 1.0 / sb,
    };
    out.jump = JumpRelation {
        value: Factor::Const(1.0),
        derivative: Some((Factor::Const(b as f64), Relation::Eq)),
    };
    let cap = (sigma / (1.0 + sigma)).powf(1.0 / (p0 - 1.0));
    out.differential[2] = DifferentialRelation::Bounds { lo: 0.0, hi: cap };
    out.params.insert("sigma".into(), sigma);
    out.params.insert("p0".into(), p0);
    out.params.insert("k".into(), k);
    Ok(out)
}

/// Largest `σ ≤ 0.99` with `f(u) ≤ E0 u^{p0}` on a logarithmic sample of `(0, σ)`.
pub fn power_domination_threshold(f: &Nonlinearity, e0: f64, p0: f64) -> Option<f64> {
    let n = 4000;
    let (lo, hi) = (1e-12f64.ln(), 0.99f64.ln());
    let mut last_ok = None;
    for i in 0..=n {
        let u = (lo + (hi - lo) * i as f64 / n as f64).exp();
        if f.eval(u) > e0 * u.powf(p0) * (1.0 + 1e-12) {
            return last_ok;
        }
        last_ok = Some(u);
    }
    last_ok
}

/// `(σ, p0, k)` for a power-type `f` on the homogeneous tree: `p0 = (1 + p)/2`,
/// `σ` the domination threshold and `k` at 90% of its upper limit.
pub fn h_tilde_parameters(b: u32, r: f64, f: &Nonlinearity) -> Result<(f64, f64, f64)> {
    let p = f
        .p()
        .ok_or_else(|| Error::hypothesis("H5", format!("{} declares no exponent p", f.name())))?;
    if !(p > 1.0) {
        return Err(Error::hypothesis(
            "H5",
            format!("exponent p = {p} must exceed 1"),
        ));
    }
    let p0 = 0.5 * (1.0 + p);
    let e0 = e0_homogeneous(b, r)?;
    let sigma = power_domination_threshold(f, e0, p0).ok_or_else(|| {
        Error::hypothesis(
            "H5",
            format!("f(u) ≤ E0 u^p0 fails already near 0 (p0 = {p0})"),
        )
    })?;
    Ok((sigma, p0, 0.9 * h_tilde_k_max(b, sigma, p0)))
}

/// Which `m` to build: as written (`m_1 ≡ 1`, discontinuous at `ρ_1`) or the continuous repair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MVariant {
    #[default]
    Verbatim,
    Repaired,
}

/// Piecewise-linear supersolution profile `m`.
pub fn build_m(tree: &RegularTree, variant: MVariant) -> Result<BarrierProfile> {
    if !tree.h0() {
        return Err(Error::hypothesis(
            "H0",
            "branching must be nondecreasing and gaps nonincreasing",
        ));
    }
    let repaired = variant == MVariant::Repaired;
    let p1 = tree.product(1)?;
    let mut expected_defects = Vec::new();
    if !repaired {
        expected_defects.push(ExpectedDefect {
            check: "continuity".into(),
            breakpoint: 1,
            magnitude: 1.0 - p1.powf(-0.5),
        });
    }
    let mut prm = params(&[("kappa_2", kappa(tree, 2)?)]);
    if repaired {
        prm.insert("kappa_1".into(), (1.0 - p1.powf(-0.5)) / tree.rho(1)?);
    }
    prm.insert("repaired".into(), if repaired { 1.0 } else { 0.0 });
    Ok(BarrierProfile {
        kind: BarrierKind::MSuper,
        tree: tree.clone(),
        pieces: PieceSource::MLinear {
            repaired,
            scale: 1.0,
        },
        support: None,
        jump: JumpRelation {
            value: Factor::Const(1.0),
            derivative: Some((Factor::Branching, Relation::Ge)),
        },
        boundary: Relation::Le,
        differential: vec![
            DifferentialRelation::TravellingSuper,
            DifferentialRelation::Nonincreasing { strict: false },
            DifferentialRelation::Bounds { lo: 0.0, hi: 1.0 },
        ],
        vanishes_at_support_end: false,
        expected_defects,
        params: prm,
    })
}

/// Slope magnitude `κ_n` of `m` on `I_n`, `n ≥ 2`.
pub fn kappa(tree: &RegularTree, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::OutOfRange("κ_n is defined for n ≥ 2".into()));
    }
    let p_prev = tree.product(n - 2)?;
    let p_next = tree.product(n)?;
    Ok((p_prev.powf(-0.5) - p_next.powf(-0.5)) / tree.gap(n)?)
}

/// Lower bound on `c` for `m`: `ĉ = M ρ_1 b_1/(b_1 − 1)`, or
/// `M ρ_1 √b_1/(√b_1 − 1)` for the repaired variant.
pub fn m_speed_threshold(tree: &RegularTree, f: &Nonlinearity, variant: MVariant) -> Result<f64> {
    let rho1 = tree.rho(1)?;
    let b1 = tree.b(1)? as f64;
    Ok(match variant {
        MVariant::Verbatim => f.m() * rho1 * b1 / (b1 - 1.0),
        MVariant::Repaired => f.m() * rho1 * b1.sqrt() / (b1.sqrt() - 1.0),
    })
}

/// `U_c(ρ, t) = m(ρ − ct)` ahead of the front, `1` behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TravellingEnvelope {
    pub m: BarrierProfile,
    pub c: f64,
    pub threshold: f64,
}

impl TravellingEnvelope {
    pub fn eval(&self, rho: f64, t: f64) -> Result<f64> {
        let s = rho - self.c * t;
        if s <= 0.0 {
            Ok(1.0)
        } else {
            self.m.eval(s)
        }
    }
}

#[allow(non_snake_case)]
pub fn build_U(
    tree: &RegularTree,
    f: &Nonlinearity,
    c: f64,
    variant: MVariant,
) -> Result<TravellingEnvelope> {
    if !f.m().is_finite() {
        return Err(Error::hypothesis("H3", "M must be finite"));
    }
    let threshold = m_speed_threshold(tree, f, variant)?;
    let ok = match variant {
        MVariant::Verbatim => c > threshold,
        MVariant::Repaired => c >= threshold,
    };
    if !ok {
        return Err(Error::hypothesis(
            "c > ĉ",
            format!("travelling supersolution needs c above {threshold}, got {c}"),
        ));
    }
    Ok(TravellingEnvelope {
        m: build_m(tree, variant)?,
        c,
        threshold,
    })
}

/// Recursion for `(A_n, B_n)`. `Exact` enforces the derivative jump identity;
/// `Verbatim` drops the damping term `(c/2ω)(1 − 1/b_n) A_n sin(ω r_n)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiRecursion {
    #[default]
    Exact,
    Verbatim,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiBuild {
    pub profile: BarrierProfile,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `ψ_N(ρ_N)`; not assumed zero.
    pub mismatch: f64,
    pub omega: f64,
    pub mu: f64,
    pub c: f64,
    pub n: usize,
}

impl PsiBuild {
    /// All `A_n (n < N)` and `B_n` strictly positive.
    pub fn coefficients_positive(&self) -> bool {
        let n = self.n;
        self.a[..n - 1].iter().all(|&x| x > 0.0) && self.b.iter().all(|&x| x > 0.0)
    }

    pub fn max_abs_a(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn e0_if_known(tree: &RegularTree) -> Option<f64> {
    tree.homogeneous_params()
        .and_then(|(b, r)| e0_homogeneous(b, r).ok())
}

/// Compactly supported profile `ψ` on `[0, ρ_N]` for the moving-frame problem.
pub fn build_psi(
    tree: &RegularTree,
    fprime0: f64,
    c: f64,
    mu: f64,
    n: usize,
    recursion: PsiRecursion,
) -> Result<PsiBuild> {
    if n == 0 {
        return Err(Error::OutOfRange("ψ needs N ≥ 1".into()));
    }
    if !(fprime0 > 0.0) {
        return Err(Error::hypothesis(
            "f'(0) > 0",
            format!("got f'(0) = {fprime0}"),
        ));
    }
    if !(c > 0.0) {
        return Err(Error::OutOfRange(format!("c must be positive, got {c}")));
    }
    if !(mu < 0.0) {
        return Err(Error::OutOfRange(format!("μ must be negative, got {mu}")));
    }
    if let Some(e0) = e0_if_known(tree) {
        if !(mu > -e0) {
            return Err(Error::OutOfRange(format!("μ = {mu} ≤ −E0 = {}", -e0)));
        }
        if fprime0 > e0 && !(c < 2.0 * (fprime0 - e0).sqrt()) {
            return Err(Error::OutOfRange(format!(
                "c = {c} not below č = {}",
                2.0 * (fprime0 - e0).sqrt()
            )));
        }
    }
    let w2 = fprime0 + mu - 0.25 * c * c;
    if !(w2 > 0.0) {
        return Err(Error::OutOfRange(format!(
            "ω² = f'(0) + μ − c²/4 = {w2} must be positive"
        )));
    }
    let omega = w2.sqrt();
    let rho1 = tree.rho(1)?;
    if !(rho1 < std::f64::consts::FRAC_PI_2 / fprime0.sqrt()) {
        return Err(Error::hypothesis(
            "ρ_1 < π/(2√f'(0))",
            format!("ρ_1 = {rho1}, f'(0) = {fprime0}"),
        ));
    }
    let mut gaps = Vec::with_capacity(n);
    for k in 1..=n {
        let g = tree.gap(k)?;
        if !(omega * g < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Numerical(format!(
                "sign control lost: ω·(ρ_{k} − ρ_{}) = {} ≥ π/2",
                k - 1,
                omega * g
            )));
        }
        gaps.push(g);
    }
    let (s1, c1) = (omega * gaps[0]).sin_cos();
    let den = c * s1 + 2.0 * omega * c1;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Numerical("zero denominator in B_1".into()));
    }
    let mut a = vec![1.0];
    let mut bcoef = vec![2.0 * omega / den];
    let mut expected_defects = Vec::new();
    for k in 1..n {
        let bk = tree.b(k)? as f64;
        let (sk, ck) = (omega * gaps[k - 1]).sin_cos();
        let (sn, cn) = (omega * gaps[k]).sin_cos();
        let (ak, bkc) = (a[k - 1], bcoef[k - 1]);
        let b_next = ak * sk / sn;
        let damping = c / (2.0 * omega) * (1.0 - 1.0 / bk) * ak * sk;
        let mut a_next = cn * b_next + (ck * ak - bkc) / bk;
        match recursion {
            PsiRecursion::Exact => a_next += damping,
            PsiRecursion::Verbatim => {
                // Derivative jump is off by b_n·ω·e^{−cρ_n/2}·damping.
                let rn = tree.rho(k)?;
                expected_defects.push(ExpectedDefect {
                    check: "derivative_jump".into(),
                    breakpoint: k,
                    magnitude: bk * omega * (-0.5 * c * rn).exp() * damping,
                });
            }
        }
        a.push(a_next);
        bcoef.push(b_next);
    }
    let formulas: Vec<Formula> = a
        .iter()
        .zip(&bcoef)
        .map(|(&ai, &bi)| Formula::DampedSinPair {
            half_c: 0.5 * c,
            omega,
            a: ai,
            b: bi,
            scale: 1.0,
        })
        .collect();
    let rn = tree.rho(n)?;
    let mismatch = (-0.5 * c * rn).exp() * a[n - 1] * (omega * gaps[n - 1]).sin();
    let profile = BarrierProfile {
        kind: BarrierKind::PsiSub,
        tree: tree.clone(),
        pieces: PieceSource::Explicit(formulas),
        support: Some(n),
        jump: JumpRelation {
            value: Factor::Const(1.0),
            derivative: Some((Factor::Branching, Relation::Eq)),
        },
        boundary: Relation::Eq,
        differential: vec![
            DifferentialRelation::DampedHelmholtz {
                c,
                k2: fprime0 + mu,
            },
            DifferentialRelation::Nonincreasing { strict: true },
            DifferentialRelation::Bounds {
                lo: 0.0,
                hi: f64::INFINITY,
            },
        ],
        vanishes_at_support_end: false,
        expected_defects,
        params: params(&[
            ("c", c),
            ("mu", mu),
            ("omega", omega),
            ("fprime0", fprime0),
            ("n", n as f64),
        ]),
    };
    Ok(PsiBuild {
        profile,
        a,
        b: bcoef,
        mismatch,
        omega,
        mu,
        c,
        n,
    })
}

/// Result of shooting in `μ` for `ψ_N(ρ_N) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootResult {
    pub mu: f64,
    pub n: usize,
    pub build: PsiBuild,
    /// Values of `N` tried, in order.
    pub tried: Vec<usize>,
}

const SHOOT_SCAN_POINTS: usize = 512;

/// Admissible interval for `μ`: above `−E0` and above `c²/4 − f'(0)` so `ω² > 0`.
fn mu_range(tree: &RegularTree, fprime0: f64, c: f64) -> (f64, f64) {
    let e0 = e0_if_known(tree).unwrap_or(f64::INFINITY);
    let lo = (-e0).max(0.25 * c * c - fprime0);
    let eps = 1e-9 * lo.abs().max(1e-12);
    (lo + eps, -eps)
}

fn shoot_at(
    tree: &RegularTree,
    fprime0: f64,
    c: f64,
    n: usize,
    recursion: PsiRecursion,
) -> Result<Option<PsiBuild>> {
    let (lo, hi) = mu_range(tree, fprime0, c);
    if !(lo < hi) {
        return Err(Error::OutOfRange(format!(
            "no admissible μ: need max(−E0, c²/4 − f'(0)) < 0, c = {c}, f'(0) = {fprime0}"
        )));
    }
    let eval = |mu: f64| build_psi(tree, fprime0, c, mu, n, recursion).ok();
    let mut prev: Option<(f64, PsiBuild)> = None;
    for i in (0..=SHOOT_SCAN_POINTS).rev() {
        let mu = lo + (hi - lo) * i as f64 / SHOOT_SCAN_POINTS as f64;
        let cur = match eval(mu) {
            Some(b) => b,
            None => {
                prev = None;
                continue;
            }
        };
        if let Some((mu_p, bp)) = &prev {
            if bp.mismatch == 0.0 || (bp.mismatch > 0.0) != (cur.mismatch > 0.0) {
                if let Some(root) = bisect(&eval, *mu_p, bp.clone(), mu, cur.clone())? {
                    if root.coefficients_positive() {
                        return Ok(Some(root));
                    }
                }
            }
        }
        prev = Some((mu, cur));
    }
    Ok(None)
}

fn bisect(
    eval: &dyn Fn(f64) -> Option<PsiBuild>,
    mut x0: f64,
    mut b0: PsiBuild,
    mut x1: f64,
    mut b1: PsiBuild,
) -> Result<Option<PsiBuild>> {
    for _ in 0..200 {
        if b0.mismatch.abs() <= 1e-10 * b0.max_abs_a() && (x1 - x0).abs() <= 1e-12 * x0.abs() {
            break;
        }
        let xm = 0.5 * (x0 + x1);
        if xm == x0 || xm == x1 {
            break;
        }
        let bm = match eval(xm) {
            Some(b) => b,
            None => return Ok(None),
        };
        if (bm.mismatch > 0.0) == (b0.mismatch > 0.0) && bm.mismatch != 0.0 {
            x0 = xm;
            b0 = bm;
        } else {
            x1 = xm;
            b1 = bm;
        }
    }
    let best = if b0.mismatch.abs() <= b1.mismatch.abs() {
        b0
    } else {
        b1
    };
    if best.mismatch.abs() <= 1e-10 * best.max_abs_a() {
        Ok(Some(best))
    } else {
        Ok(None)
    }
}

/// Find `μ*` with `ψ_N(ρ_N; μ*) = 0` and all coefficients positive, trying
/// `N = n_start, n_start + 1, …, n_budget`.
///
/// The admissible window in `N` can be a single value (for `b = 2`, `r = 1`,
/// `f'(0) = 1`, `c = 1` only `N = 5` works), so doubling would step over it.
pub fn shoot_psi(
    tree: &RegularTree,
    fprime0: f64,
    c: f64,
    n_start: usize,
    n_budget: usize,
    recursion: PsiRecursion,
) -> Result<ShootResult> {
    let mut n = n_start.max(1);
    let mut tried = Vec::new();
    while n <= n_budget {
        tried.push(n);
        if let Some(mut build) = shoot_at(tree, fprime0, c, n, recursion)? {
            build.profile.vanishes_at_support_end = true;
            return Ok(ShootResult {
                mu: build.mu,
                n,
                build,
                tried,
            });
        }
        n += 1;
    }
    Err(Error::Budget(format!(
        "no admissible (μ, N) for c = {c}; tried N = {tried:?}"
    )))
}

/// Scaled `εψ` extended by zero, with its positive travelling residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiEps {
    pub profile: BarrierProfile,
    pub eps: f64,
    /// Minimum of `εψ'' + cεψ' + f(εψ)` over the interior verification grid.
    pub min_residual: f64,
    pub halvings: usize,
}

const EPS_START: f64 = 1e-2;
const MAX_HALVINGS: usize = 40;
const RESIDUAL_POINTS: usize = 64;

fn psi_eps_residual(profile: &BarrierProfile, f: &Nonlinearity, c: f64, n: usize) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for k in 1..=n {
        let p = profile.piece(k)?;
        for i in 0..RESIDUAL_POINTS {
            let x = p.lo + (p.hi - p.lo) * (i as f64 + 0.5) / RESIDUAL_POINTS as f64;
            let j = p.jet(x);
            worst = worst.min(j.d2 + c * j.d1 + f.eval(j.v));
        }
    }
    Ok(worst)
}

/// `εψ` for a given `ε`, or the first of `10⁻², 10⁻²/2, …` whose residual is positive.
pub fn build_psi_eps(psi: &PsiBuild, f: &Nonlinearity, eps: Option<f64>) -> Result<PsiEps> {
    let candidates: Vec<f64> = match eps {
        Some(e) => {
            if !(e > 0.0) {
                return Err(Error::OutOfRange(format!("ε must be positive, got {e}")));
            }
            vec![e]
        }
        None => (0..=MAX_HALVINGS)
            .map(|k| EPS_START * 0.5f64.powi(k as i32))
            .collect(),
    };
    let mut last = f64::NAN;
    for (k, &e) in candidates.iter().enumerate() {
        let mut profile = psi.profile.scaled(e);
        profile.differential = vec![
            DifferentialRelation::TravellingSub,
            DifferentialRelation::Nonincreasing { strict: true },
            DifferentialRelation::Bounds { lo: 0.0, hi: 1.0 },
        ];
        profile.params.insert("eps".into(), e);
        let r = psi_eps_residual(&profile, f, psi.c, psi.n)?;
        let sup = profile.sup_on(psi.n, RESIDUAL_POINTS)?;
        if r > 0.0 && sup <= 1.0 {
            return Ok(PsiEps {
                profile,
                eps: e,
                min_residual: r,
                halvings: k,
            });
        }
        last = r;
    }
    Err(Error::Numerical(format!(
        "εψ residual not positive (last minimum {last}); try a smaller ε"
    )))
}

/// `εφ` built from the truncated principal eigenvector (sup-normalized).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenSubsolution {
    pub profile: BarrierProfile,
    pub eps: f64,
    pub lambda: f64,
    /// `μ_{0,N} = λ_{0,N} − f'(0) < 0`.
    pub mu: f64,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-cell `(−K w + M f(w))_i / m_i`.
    pub residual: Vec<f64>,
}

pub fn build_eigen_subsolution(
    tree: &RegularTree,
    f: &Nonlinearity,
    n: usize,
    cells_per_edge: usize,
    eps: Option<f64>,
) -> Result<EigenSubsolution> {
    let ev = principal_eigenvalue_truncated(tree, n, cells_per_edge)?;
    if !(f.fprime0() > ev.lambda) {
        return Err(Error::OutOfRange(format!(
            "f'(0) = {} ≤ λ_0,{n} = {}; increase N",
            f.fprime0(),
            ev.lambda
        )));
    }
    let grid = make_grid_half_line(tree, n, cells_per_edge, BoundaryCondition::Dirichlet0)?;
    let top = ev.vector.iter().cloned().fold(0.0, f64::max);
    let phi: Vec<f64> = ev.vector.iter().map(|v| v / top).collect();
    let candidates: Vec<f64> = match eps {
        Some(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::OutOfRange(format!("ε must lie in (0, 1], got {e}")));
            }
            vec![e]
        }
        None => (0..=MAX_HALVINGS)
            .map(|k| EPS_START * 0.5f64.powi(k as i32))
            .collect(),
    };
    let mut last = f64::NAN;
    for &e in &candidates {
        let w: Vec<f64> = phi.iter().map(|v| e * v).collect();
        let kw = grid.stiffness_apply(&w);
        let residual: Vec<f64> = kw
            .iter()
            .zip(grid.mass())
            .zip(&w)
            .map(|((k, m), &x)| (-k + m * f.eval(x)) / m)
            .collect();
        let min = residual.iter().cloned().fold(f64::INFINITY, f64::min);
        if min >= 0.0 {
            let rho_n = tree.rho(n)?;
            let mut x = Vec::with_capacity(w.len() + 2);
            let mut y = Vec::with_capacity(w.len() + 2);
            x.push(0.0);
            y.push(w[0]);
            x.extend_from_slice(grid.centers());
            y.extend_from_slice(&w);
            x.push(rho_n);
            y.push(0.0);
            let table = Formula::Table { x, y };
            let profile = BarrierProfile {
                kind: BarrierKind::EigenSub,
                tree: tree.clone(),
                pieces: PieceSource::Explicit(vec![table; n]),
                support: Some(n),
                jump: JumpRelation {
                    value: Factor::Const(1.0),
                    derivative: None,
                },
                boundary: Relation::Eq,
                differential: vec![
                    DifferentialRelation::DiscreteSub { min_residual: min },
                    DifferentialRelation::Bounds { lo: 0.0, hi: 1.0 },
                ],
                vanishes_at_support_end: true,
                expected_defects: Vec::new(),
                params: params(&[
                    ("eps", e),
                    ("lambda", ev.lambda),
                    ("mu", ev.lambda - f.fprime0()),
                    ("n", n as f64),
                ]),
            };
            return Ok(EigenSubsolution {
                profile,
                eps: e,
                lambda: ev.lambda,
                mu: ev.lambda - f.fprime0(),
                centers: grid.centers().to_vec(),
                values: w,
                residual,
            });
        }
        last = min;
    }
    Err(Error::Numerical(format!(
        "discrete subsolution residual negative (last minimum {last}); try a smaller ε"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{logistic, power_kpp};

    #[test]
    fn g_frozen_values() {
        let (b, r, lam) = (2u32, 1.0f64, 0.08f64);
        let g = build_g(b, r, lam, None).unwrap();
        assert!((g.eval(0.0).unwrap() - (lam.sqrt() * r).sin()).abs() < 1e-14);
        let alpha = g.params["alpha"];
        let d0 = (lam / b as f64).sqrt() * (alpha - (b as f64).sqrt() * (lam.sqrt() * r).cos());
        assert!((g.derivative_at_origin().unwrap() - d0).abs() < 1e-14);
        for n in 1..6 {
            let lo = g.tree().rho(n - 1).unwrap();
            let want = (alpha / (b as f64).sqrt()).powi(n as i32 - 1) * (lam.sqrt() * r).sin();
            assert!((g.piece(n).unwrap().jet(lo).v - want).abs() < 1e-14);
        }
        assert!(build_g(b, r, 0.2, None).is_err());
        assert!(build_g(b, r, lam, Some(1.0)).is_err());
    }

    #[test]
    fn h_frozen_values() {
        let h = build_h(3, 1.0).unwrap();
        assert!((h.eval(0.0).unwrap() - 3f64.sqrt() * 0.5).abs() < 1e-12);
        let d = h.derivative_at_origin().unwrap();
        assert!((d + std::f64::consts::PI / 12.0).abs() < 1e-12);
    }

    #[test]
    fn h_tilde_sup_and_range() {
        let f = power_kpp(1.0, 3.0).unwrap();
        let (s, p0, k) = h_tilde_parameters(2, 1.0, &f).unwrap();
        let ht = build_h_tilde(2, 1.0, s, p0, k).unwrap();
        assert!(ht.sup_on(5, 64).unwrap() <= k * 2f64.sqrt() + 1e-15);
        assert!(build_h_tilde(2, 1.0, s, p0, 2.0 * k).is_err());
    }

    #[test]
    fn m_frozen_values() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let m = build_m(&t, MVariant::Verbatim).unwrap();
        assert!((kappa(&t, 2).unwrap() - 0.5).abs() < 1e-15);
        let (_, right) = m.values_at_breakpoint(1).unwrap();
        assert!((right - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((m.eval(2.0).unwrap() - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
        let rep = build_m(&t, MVariant::Repaired).unwrap();
        let (l, r) = rep.values_at_breakpoint(1).unwrap();
        assert!((l - r).abs() < 1e-15);
        assert_eq!(rep.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn u_envelope() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let f = logistic(1.0).unwrap();
        assert!(build_U(&t, &f, 2.0, MVariant::Verbatim).is_err());
        let u = build_U(&t, &f, 2.5, MVariant::Verbatim).unwrap();
        assert_eq!(u.eval(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(u.eval(1.5, 0.0).unwrap(), u.m.eval(1.5).unwrap());
        assert!(build_U(&t, &f, 2.5, MVariant::Repaired).is_err());
    }

    #[test]
    fn psi_coefficients_and_shooting() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let s = shoot_psi(&t, 1.0, 1.0, 1, 64, PsiRecursion::Exact).unwrap();
        assert!(s.mu < 0.0 && s.mu > -e0_homogeneous(2, 1.0).unwrap());
        assert!(s.build.mismatch.abs() <= 1e-10 * s.build.max_abs_a());
        assert!(s.build.profile.derivative_at_origin().unwrap().abs() < 1e-12);
        let e = build_psi_eps(&s.build, &logistic(1.0).unwrap(), Some(1e-3)).unwrap();
        assert!(e.min_residual > 0.0);
    }

    #[test]
    fn eigen_subsolution_builds() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let f = logistic(0.5).unwrap();
        let s = build_eigen_subsolution(&t, &f, 12, 32, Some(1e-4)).unwrap();
        assert!(s.residual.iter().all(|&r| r >= 0.0));
        assert!(s.values.iter().all(|&v| v <= 1.0));
        assert!(build_eigen_subsolution(&t, &logistic(0.05).unwrap(), 12, 32, None).is_err());
    }
}
