use serde::Serialize;

use crate::error::{Error, Result};
use crate::reaction::Nonlinearity;

use super::build::power_domination_threshold;
use super::profile::{BarrierKind, BarrierProfile};

/// Time factor of a separable envelope `z̄(ρ, t) = q(ρ)·T(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "temporal", rename_all = "snake_case")]
pub enum Temporal {
    /// `T(t) = e^{−rate·t}`.
    Exponential { rate: f64 },
    /// `T(t) = ζ(t) e^{−E0 t}` with
    /// `ζ = {1 − H^{p0−1}[1 − e^{−(p0−1)E0 t}]}^{−1/(p0−1)}`, `H = ‖h̃‖_∞`.
    Zeta { sup: f64, p0: f64, e0: f64 },
}

impl Temporal {
    /// `(T(t), T'(t))`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        match *self {
            Temporal::Exponential { rate } => {
                let v = (-rate * t).exp();
                (v, -rate * v)
            }
            Temporal::Zeta { sup, p0, e0 } => {
                let q = p0 - 1.0;
                let hq = sup.powf(q);
                let decay = (-q * e0 * t).exp();
                let zeta = (1.0 - hq * (1.0 - decay)).powf(-1.0 / q);
                let dzeta = zeta.powf(p0) * hq * e0 * decay;
                let ex = (-e0 * t).exp();
                (zeta * ex, dzeta * ex - e0 * zeta * ex)
            }
        }
    }

    /// `ζ(t)`; identically 1 for the exponential form.
    pub fn zeta(&self, t: f64) -> f64 {
        match *self {
            Temporal::Exponential { .. } => 1.0,
            Temporal::Zeta { e0, .. } => self.at(t).0 * (e0 * t).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeEnvelope {
    pub profile: BarrierProfile,
    pub temporal: Temporal,
    /// `‖q‖_∞`.
    pub profile_sup: f64,
}

impl TimeEnvelope {
    pub fn eval(&self, rho: f64, t: f64) -> Result<f64> {
        Ok(self.profile.eval(rho)? * self.temporal.at(t).0)
    }

    /// Upper bound on `sup_ρ z̄(ρ, t)`.
    pub fn sup_bound(&self, t: f64) -> f64 {
        match self.temporal {
            Temporal::Exponential { .. } => self.profile_sup * self.temporal.at(t).0,
            Temporal::Zeta { sup, p0, e0 } => {
                let q = p0 - 1.0;
                sup / (1.0 - sup.powf(q)).powf(1.0 / q) * (-e0 * t).exp()
            }
        }
    }
}

/// `z̄ = g e^{−(λ − f'(0))t}` for KPP-type `f` below the bottom of the spectrum.
pub fn build_extinction_envelope_kpp(g: &BarrierProfile, f: &Nonlinearity) -> Result<TimeEnvelope> {
    if g.kind != BarrierKind::GSuper {
        return Err(Error::OutOfRange(
            "exponential envelope needs a g profile".into(),
        ));
    }
    if !f.flags().h4 {
        return Err(Error::hypothesis(
            "H4",
            format!("{} does not declare f(u) ≤ f'(0)u", f.name()),
        ));
    }
    let lambda = g.params["lambda"];
    if !(lambda > f.fprime0()) {
        return Err(Error::OutOfRange(format!(
            "λ = {lambda} must exceed f'(0) = {}",
            f.fprime0()
        )));
    }
    Ok(TimeEnvelope {
        profile: g.clone(),
        temporal: Temporal::Exponential {
            rate: lambda - f.fprime0(),
        },
        // g is maximal at the root.
        profile_sup: g.eval(0.0)?,
    })
}

/// `z̄ = h̃ ζ(t) e^{−E0 t}` for power-type `f` with `f(u) ≤ E0 u^{p0}` on `(0, σ)`.
pub fn build_extinction_envelope_power(
    h_tilde: &BarrierProfile,
    f: &Nonlinearity,
) -> Result<TimeEnvelope> {
    if h_tilde.kind != BarrierKind::HTilde {
        return Err(Error::OutOfRange("ζ envelope needs an h̃ profile".into()));
    }
    let p0 = h_tilde.params["p0"];
    let e0 = h_tilde.params["e0"];
    let sigma = h_tilde.params["sigma"];
    match f.p() {
        Some(p) if p >= p0 => {}
        other => {
            return Err(Error::hypothesis(
                "H5",
                format!("exponent {other:?} must be at least p0 = {p0}"),
            ))
        }
    }
    let reach = power_domination_threshold(f, e0, p0).unwrap_or(0.0);
    if reach < sigma {
        return Err(Error::hypothesis(
            "H5",
            format!("f(u) ≤ E0 u^p0 holds only up to u = {reach} < σ = {sigma}"),
        ));
    }
    let sup = h_tilde.eval(0.0)?;
    if !(sup < 1.0) {
        return Err(Error::OutOfRange(format!("‖h̃‖_∞ = {sup} ≥ 1: ζ blows up")));
    }
    Ok(TimeEnvelope {
        profile: h_tilde.clone(),
        temporal: Temporal::Zeta { sup, p0, e0 },
        profile_sup: sup,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    /// Minimum of `z̄_t − z̄_ρρ − f(z̄)` over interior sample points.
    pub min_residual: f64,
    pub at: (f64, f64),
    pub passed: bool,
}

/// Supersolution residual sampled on `intervals × points` radii and the given times.
pub fn verify_envelope(
    env: &TimeEnvelope,
    f: &Nonlinearity,
    intervals: usize,
    points: usize,
    times: &[f64],
) -> Result<EnvelopeReport> {
    let mut worst = (f64::INFINITY, (0.0, 0.0));
    for n in 1..=intervals {
        let p = env.profile.piece(n)?;
        for i in 0..points {
            let rho = p.lo + (p.hi - p.lo) * (i as f64 + 0.5) / points as f64;
            let j = p.jet(rho);
            for &t in times {
                let (tv, td) = env.temporal.at(t);
                let z = j.v * tv;
                let r = j.v * td - j.d2 * tv - f.eval(z);
                if r < worst.0 {
                    worst = (r, (rho, t));
                }
            }
        }
    }
    Ok(EnvelopeReport {
        min_residual: worst.0,
        at: worst.1,
        passed: worst.0 >= -1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::build::{build_g, build_h_tilde, h_tilde_parameters};
    use crate::reaction::{logistic, power_kpp};

    #[test]
    fn kpp_envelope_rate_and_residual() {
        let g = build_g(2, 1.0, 0.08, None).unwrap();
        let f = logistic(0.05).unwrap();
        let env = build_extinction_envelope_kpp(&g, &f).unwrap();
        assert!(
            matches!(env.temporal, Temporal::Exponential { rate } if (rate - 0.03).abs() < 1e-15)
        );
        assert_eq!(env.eval(0.3, 0.0).unwrap(), g.eval(0.3).unwrap());
        let rep = verify_envelope(&env, &f, 8, 32, &[0.0, 1.0, 10.0, 100.0]).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(build_extinction_envelope_kpp(&g, &logistic(0.1).unwrap()).is_err());
    }

    #[test]
    fn zeta_envelope() {
        let f = power_kpp(1.0, 3.0).unwrap();
        let (s, p0, k) = h_tilde_parameters(2, 1.0, &f).unwrap();
        let ht = build_h_tilde(2, 1.0, s, p0, k).unwrap();
        let env = build_extinction_envelope_power(&ht, &f).unwrap();
        assert!((env.temporal.zeta(0.0) - 1.0).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 1..50 {
            let z = env.temporal.zeta(i as f64);
            assert!(z >= prev);
            prev = z;
        }
        let rep = verify_envelope(&env, &f, 8, 32, &[0.0, 0.5, 5.0, 50.0]).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(env.sup_bound(200.0) < 1e-8);
    }
}
