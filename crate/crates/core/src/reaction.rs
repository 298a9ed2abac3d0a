//! Forcing terms `f` together with the metadata the theory keys on.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared hypothesis flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypotheses {
    /// `f(0) = f(1) = 0` and `f > 0` on `(0, 1)`.
    pub h2: bool,
    /// `sup f(u)/u = M < ∞`.
    pub h3: bool,
    /// `sup f(u)/u = f'(0)`.
    pub h4: bool,
    /// `limsup u^{-p} f(u) < ∞` near 0.
    pub h5: bool,
}

#[derive(Clone)]
enum Kind {
    Logistic { a: f64 },
    Power { a: f64, p: f64 },
    Table { u: Vec<f64>, f: Vec<f64> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A forcing term with declared `f'(0)`, `M = sup f(u)/u`, optional exponent `p`.
#[derive(Clone)]
pub struct Nonlinearity {
    kind: Kind,
    name: String,
    fprime0: f64,
    m: f64,
    p: Option<f64>,
    flags: Hypotheses,
    builtin: bool,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("fprime0", &self.fprime0)
            .field("m", &self.m)
            .field("p", &self.p)
            .field("flags", &self.flags)
            .finish()
    }
}

/// `f(u) = a u (1 − u)`.
pub fn logistic(a: f64) -> Result<Nonlinearity> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::OutOfRange(format!("logistic needs a > 0, got {a}")));
    }
    Ok(Nonlinearity {
        kind: Kind::Logistic { a },
        name: format!("logistic(a={a})"),
        fprime0: a,
        m: a,
        p: None,
        flags: Hypotheses {
            h2: true,
            h3: true,
            h4: true,
            h5: false,
        },
        builtin: true,
    })
}

/// `f(u) = a u^p (1 − u)` with `p > 1`.
pub fn power_kpp(a: f64, p: f64) -> Result<Nonlinearity> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::OutOfRange(format!("power_kpp needs a > 0, got {a}")));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::OutOfRange(format!("power_kpp needs p > 1, got {p}")));
    }
    // sup of a u^{p-1}(1-u) sits at u = (p-1)/p
    let us = (p - 1.0) / p;
    let m = a * us.powf(p - 1.0) * (1.0 - us);
    Ok(Nonlinearity {
        kind: Kind::Power { a, p },
        name: format!("power(a={a}, p={p})"),
        fprime0: 0.0,
        m,
        p: Some(p),
        flags: Hypotheses {
            h2: true,
            h3: true,
            h4: false,
            h5: true,
        },
        builtin: true,
    })
}

/// Declared metadata for user-supplied forcing terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Declared {
    pub fprime0: f64,
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub flags: Hypotheses,
}

impl Nonlinearity {
    /// Piecewise-linear forcing through tabulated `(u, f(u))` pairs covering `[0, 1]`.
    pub fn table(name: &str, u: Vec<f64>, f: Vec<f64>, declared: Declared) -> Result<Self> {
        if u.len() != f.len() || u.len() < 2 {
            return Err(Error::OutOfRange(
                "table needs matching u/f arrays with at least two points".into(),
            ));
        }
        if u[0] != 0.0 || *u.last().unwrap() != 1.0 {
            return Err(Error::OutOfRange("table must span u = 0 to u = 1".into()));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::OutOfRange(
                "table u values must increase strictly".into(),
            ));
        }
        Ok(Nonlinearity {
            kind: Kind::Table { u, f },
            name: name.to_string(),
            fprime0: declared.fprime0,
            m: declared.m,
            p: declared.p,
            flags: declared.flags,
            builtin: false,
        })
    }

    /// Arbitrary closure with declared metadata.
    pub fn custom<F>(name: &str, f: F, declared: Declared) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Nonlinearity {
            kind: Kind::Custom(Arc::new(f)),
            name: name.to_string(),
            fprime0: declared.fprime0,
            m: declared.m,
            p: declared.p,
            flags: declared.flags,
            builtin: false,
        }
    }

    /// `f ≡ 0`; pure diffusion.
    pub fn zero() -> Self {
        Nonlinearity::custom(
            "zero",
            |_| 0.0,
            Declared {
                fprime0: 0.0,
                m: 0.0,
                p: None,
                flags: Hypotheses::default(),
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn fprime0(&self) -> f64 {
        self.fprime0
    }

    /// `M = sup_{u∈(0,1]} f(u)/u`.
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn p(&self) -> Option<f64> {
        self.p
    }

    pub fn flags(&self) -> Hypotheses {
        self.flags
    }

    pub fn is_builtin(&self) -> bool {
        self.builtin
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Logistic { a } => a * u * (1.0 - u),
            Kind::Power { a, p } => {
                if u <= 0.0 {
                    0.0
                } else {
                    a * u.powf(*p) * (1.0 - u)
                }
            }
            Kind::Table { u: us, f } => {
                let i = us.partition_point(|&x| x < u).clamp(1, us.len() - 1);
                let (x0, x1) = (us[i - 1], us[i]);
                f[i - 1] + (f[i] - f[i - 1]) * (u - x0) / (x1 - x0)
            }
            Kind::Custom(func) => func(u),
        }
    }

    /// Exact derivative for the built-in families.
    pub fn derivative(&self, u: f64) -> Option<f64> {
        match &self.kind {
            Kind::Logistic { a } => Some(a * (1.0 - 2.0 * u)),
            Kind::Power { a, p } => {
                if u <= 0.0 {
                    Some(0.0)
                } else {
                    Some(a * (p * u.powf(p - 1.0) - (p + 1.0) * u.powf(*p)))
                }
            }
            _ => None,
        }
    }
}

/// Upper bound on `sup |f'|` over `[0, 1]` from difference quotients on a
/// dense grid, inflated by 5%.
pub fn lipschitz_bound(f: &Nonlinearity) -> f64 {
    const SAMPLES: usize = 8192;
    let mut best: f64 = 0.0;
    let mut prev = f.eval(0.0);
    for i in 1..=SAMPLES {
        let u = i as f64 / SAMPLES as f64;
        let cur = f.eval(u);
        best = best.max(((cur - prev) * SAMPLES as f64).abs());
        prev = cur;
    }
    for k in 1..=12 {
        let h = 10f64.powi(-k);
        best = best.max(((f.eval(h) - f.eval(0.0)) / h).abs());
        best = best.max(((f.eval(1.0) - f.eval(1.0 - h)) / h).abs());
    }
    1.05 * best
}

/// Outcome of sampling a forcing term against its declared metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub name: String,
    pub declared: Hypotheses,
    pub measured: Hypotheses,
    pub m_declared: f64,
    pub m_estimate: f64,
    pub fprime0_declared: f64,
    pub fprime0_estimate: f64,
    pub p: Option<f64>,
    pub lipschitz: f64,
}

fn golden_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..100 {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - phi * (hi - lo);
            g1 = g(x1);
        }
    }
    g1.max(g2)
}

/// Sample `f` and cross-check its declared flags and constants.
///
/// Declared flags that sampling contradicts produce an error naming the
/// hypothesis; undeclared flags that happen to hold are only reported.
pub fn verify_hypotheses(f: &Nonlinearity, grid_size: usize) -> Result<HypothesisReport> {
    if grid_size < 1000 {
        return Err(Error::OutOfRange(format!(
            "grid_size must be ≥ 1000, got {grid_size}"
        )));
    }
    let mut us: Vec<f64> = (1..grid_size)
        .map(|i| i as f64 / grid_size as f64)
        .collect();
    us.extend((1..=12).map(|k| 10f64.powi(-k)));
    us.extend((1..=12).map(|k| 1.0 - 10f64.powi(-k)));
    us.sort_by(f64::total_cmp);

    let endpoints_zero = f.eval(0.0) == 0.0 && f.eval(1.0) == 0.0;
    let negative_at = us.iter().copied().find(|&u| !(f.eval(u) > 0.0));
    let h2 = endpoints_zero && negative_at.is_none();

    // sup f(u)/u: best sample, then golden refinement around it
    let ratio = |u: f64| f.eval(u) / u;
    let (imax, _) = us.iter().enumerate().map(|(i, &u)| (i, ratio(u))).fold(
        (0, f64::NEG_INFINITY),
        |acc, x| if x.1 > acc.1 { x } else { acc },
    );
    let lo = if imax == 0 { us[0] * 0.5 } else { us[imax - 1] };
    let hi = if imax + 1 == us.len() {
        1.0
    } else {
        us[imax + 1]
    };
    let m_estimate = ratio(us[imax])
        .max(golden_max(ratio, lo, hi))
        .max(ratio(1.0));
    let h3 = m_estimate.is_finite();

    let u_small = 1e-12;
    let fprime0_estimate = ratio(u_small);
    let tol = 1e-6;
    let fprime0_ok = if f.fprime0 == 0.0 {
        // f(u)/u must vanish as u → 0: decreasing along the 10^{-k} ladder
        let ladder: Vec<f64> = (6..=12).map(|k| ratio(10f64.powi(-k)).abs()).collect();
        ladder.windows(2).all(|w| w[1] <= w[0]) && ladder[ladder.len() - 1] < 1e-2
    } else {
        (fprime0_estimate - f.fprime0).abs() <= tol * f.fprime0.abs()
    };
    let h4 =
        (m_estimate - fprime0_estimate).abs() <= tol * m_estimate.abs().max(1e-300) && fprime0_ok;

    let h5 = match f.p {
        Some(p) => {
            let r6 = f.eval(1e-6) / 1e-6f64.powf(p);
            let r12 = f.eval(1e-12) / 1e-12f64.powf(p);
            r12.is_finite() && (r6 <= 0.0 || (r12 / r6).ln() / 1e6f64.ln() <= 1e-3)
        }
        None => false,
    };

    let measured = Hypotheses { h2, h3, h4, h5 };
    let lipschitz = lipschitz_bound(f);

    if f.flags.h2 && !h2 {
        let detail = match negative_at {
            Some(u) => format!("f({u}) = {} is not positive", f.eval(u)),
            None => format!("f(0) = {}, f(1) = {}", f.eval(0.0), f.eval(1.0)),
        };
        return Err(Error::hypothesis("H2", detail));
    }
    if !fprime0_ok {
        return Err(Error::hypothesis(
            "f'(0)",
            format!(
                "declared {} but f(u)/u near 0 is {}",
                f.fprime0, fprime0_estimate
            ),
        ));
    }
    if f.flags.h3 {
        if !h3 {
            return Err(Error::hypothesis("H3", "sup f(u)/u is not finite"));
        }
        let rel = (m_estimate - f.m).abs() / f.m.abs().max(1e-300);
        if rel > tol {
            return Err(Error::hypothesis(
                "H3",
                format!(
                    "declared M = {} but sampled sup f(u)/u = {}",
                    f.m, m_estimate
                ),
            ));
        }
    }
    if f.flags.h4 && !h4 {
        return Err(Error::hypothesis(
            "H4",
            format!(
                "sup f(u)/u = {m_estimate} differs from f'(0) = {}",
                f.fprime0
            ),
        ));
    }
    if f.flags.h4 && (f.m - f.fprime0).abs() > tol * f.m.abs() {
        return Err(Error::hypothesis(
            "H4",
            "declared M differs from declared f'(0)",
        ));
    }
    if f.flags.h5 && !h5 {
        return Err(Error::hypothesis(
            "H5",
            format!("u^(-p) f(u) grows as u → 0 for p = {:?}", f.p),
        ));
    }

    Ok(HypothesisReport {
        name: f.name.clone(),
        declared: f.flags,
        measured,
        m_declared: f.m,
        m_estimate,
        fprime0_declared: f.fprime0,
        fprime0_estimate,
        p: f.p,
        lipschitz,
    })
}

/// Serializable forcing description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Logistic {
        a: f64,
    },
    Power {
        a: f64,
        p: f64,
    },
    Table {
        #[serde(default = "default_table_name")]
        name: String,
        u: Vec<f64>,
        f: Vec<f64>,
        fprime0: f64,
        m: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        flags: Hypotheses,
    },
}

fn default_table_name() -> String {
    "table".to_string()
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        match self {
            NonlinearitySpec::Logistic { a } => logistic(*a),
            NonlinearitySpec::Power { a, p } => power_kpp(*a, *p),
            NonlinearitySpec::Table {
                name,
                u,
                f,
                fprime0,
                m,
                p,
                flags,
            } => Nonlinearity::table(
                name,
                u.clone(),
                f.clone(),
                Declared {
                    fprime0: *fprime0,
                    m: *m,
                    p: *p,
                    flags: *flags,
                },
            ),
        }
    }
}
