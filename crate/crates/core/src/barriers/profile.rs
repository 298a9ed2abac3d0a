use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::RegularTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BarrierKind {
    GSuper,
    HGround,
    HTilde,
    MSuper,
    PsiSub,
    EigenSub,
}

/// Closed form of a profile on one interval `I_n = (lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "formula", rename_all = "snake_case")]
pub enum Formula {
    /// `left·sin(k(hi − ρ)) + right·sin(k(ρ − lo))`.
    SinPair {
        k: f64,
        left: f64,
        right: f64,
    },
    /// `scale·e^{−hρ}{a·sin(ω(ρ − lo)) + b·sin(ω(hi − ρ))}` with `h = c/2`.
    DampedSinPair {
        half_c: f64,
        omega: f64,
        a: f64,
        b: f64,
        scale: f64,
    },
    /// `value + slope·(ρ − lo)`.
    Linear {
        value: f64,
        slope: f64,
    },
    /// Piecewise-linear interpolant through `(x, y)` knots.
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    Zero,
}

/// Value and first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Formula {
    pub fn jet(&self, rho: f64, lo: f64, hi: f64) -> Jet {
        match self {
            Formula::SinPair { k, left, right } => {
                let (s1, c1) = (k * (hi - rho)).sin_cos();
                let (s2, c2) = (k * (rho - lo)).sin_cos();
                let v = left * s1 + right * s2;
                Jet {
                    v,
                    d1: k * (-left * c1 + right * c2),
                    d2: -k * k * v,
                }
            }
            Formula::DampedSinPair {
                half_c,
                omega,
                a,
                b,
                scale,
            } => {
                let (s1, c1) = (omega * (rho - lo)).sin_cos();
                let (s2, c2) = (omega * (hi - rho)).sin_cos();
                let phi = a * s1 + b * s2;
                let dphi = omega * (a * c1 - b * c2);
                let d2phi = -omega * omega * phi;
                let e = scale * (-half_c * rho).exp();
                Jet {
                    v: e * phi,
                    d1: e * (dphi - half_c * phi),
                    d2: e * (d2phi - 2.0 * half_c * dphi + half_c * half_c * phi),
                }
            }
            Formula::Linear { value, slope } => Jet {
                v: value + slope * (rho - lo),
                d1: *slope,
                d2: 0.0,
            },
            Formula::Table { x, y } => {
                let i = x.partition_point(|&t| t < rho).clamp(1, x.len() - 1);
                let slope = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
                Jet {
                    v: y[i - 1] + slope * (rho - x[i - 1]),
                    d1: slope,
                    d2: 0.0,
                }
            }
            Formula::Zero => Jet {
                v: 0.0,
                d1: 0.0,
                d2: 0.0,
            },
        }
    }
}

/// Formula on a single interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Piece {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub formula: Formula,
}

impl Piece {
    pub fn jet(&self, rho: f64) -> Jet {
        self.formula.jet(rho, self.lo, self.hi)
    }
}

/// Multiplier in a jump relation at `ρ_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Const(f64),
    /// `b_n` at the breakpoint.
    Branching,
}

impl Factor {
    pub fn at(&self, tree: &RegularTree, n: usize) -> Result<f64> {
        match self {
            Factor::Const(c) => Ok(*c),
            Factor::Branching => Ok(tree.b(n)? as f64),
        }
    }
}

/// Direction of `lhs − rhs` relative to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Eq,
    Ge,
    Le,
    /// Strictly positive.
    Gt,
    /// Strictly negative.
    Lt,
}

/// Declared conditions at each breakpoint `ρ_n`:
/// `q_{n+1}(ρ_n) = value·q_n(ρ_n)` and, when present,
/// `q'_n(ρ_n⁻) − factor·q'_{n+1}(ρ_n⁺)` in the given relation to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRelation {
    pub value: Factor,
    pub derivative: Option<(Factor, Relation)>,
}

/// Pointwise conditions inside each interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum DifferentialRelation {
    /// `q'' + k2·q = 0`.
    Helmholtz { k2: f64 },
    /// `q'' + c·q' + k2·q = 0`.
    DampedHelmholtz { c: f64, k2: f64 },
    /// `q' ≤ 0`, or `q' < 0` when strict.
    Nonincreasing { strict: bool },
    /// `q'' + c q' + f(q) ≤ 0` for the travelling speed passed to the verifier.
    TravellingSuper,
    /// `q'' + c q' + f(q) > 0` on the support.
    TravellingSub,
    /// `lo ≤ q ≤ hi`.
    Bounds { lo: f64, hi: f64 },
    /// Cell-wise `Δ_h q + f(q) ≥ 0`, precomputed minimum.
    DiscreteSub { min_residual: f64 },
}

/// A check that is known to fail for a verbatim construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectedDefect {
    pub check: String,
    pub breakpoint: usize,
    pub magnitude: f64,
}

/// Piecewise closed-form radial profile with breakpoints at `{ρ_n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierProfile {
    pub kind: BarrierKind,
    #[serde(skip)]
    pub(crate) tree: RegularTree,
    #[serde(skip)]
    pub(crate) pieces: PieceSource,
    /// Last interval of the support; the profile is zero beyond `ρ_N`.
    pub support: Option<usize>,
    pub jump: JumpRelation,
    /// Relation of `q'(0⁺)` to 0.
    pub boundary: Relation,
    pub differential: Vec<DifferentialRelation>,
    /// Declared `q(ρ_N) = 0` with `q'(ρ_N⁻) < 0` at the end of the support.
    pub vanishes_at_support_end: bool,
    pub expected_defects: Vec<ExpectedDefect>,
    pub params: BTreeMap<String, f64>,
}

/// Generator of interval formulas; evaluated lazily so infinite profiles on
/// homogeneous trees cost nothing until sampled.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum PieceSource {
    /// `scale_n·{left·sin(k(ρ_n − ρ)) + right·sin(k(ρ − ρ_{n−1}))}`, `scale_n = s0·q^{n−1}`.
    GeometricSinPair {
        k: f64,
        left: f64,
        right: f64,
        s0: f64,
        q: f64,
    },
    /// Linear `m_n` built from the products `b_0⋯b_n`; `m_1` is constant unless repaired.
    MLinear {
        repaired: bool,
        scale: f64,
    },
    Explicit(Vec<Formula>),
}

impl BarrierProfile {
    pub fn tree(&self) -> &RegularTree {
        &self.tree
    }

    /// Formula on `I_n`.
    pub fn piece(&self, n: usize) -> Result<Piece> {
        if n == 0 {
            return Err(Error::OutOfRange("interval index starts at 1".into()));
        }
        let lo = self.tree.rho(n - 1)?;
        let hi = self.tree.rho(n)?;
        if let Some(last) = self.support {
            if n > last {
                return Ok(Piece {
                    n,
                    lo,
                    hi,
                    formula: Formula::Zero,
                });
            }
        }
        let formula = match &self.pieces {
            PieceSource::GeometricSinPair {
                k,
                left,
                right,
                s0,
                q,
            } => {
                let s = s0 * q.powi(n as i32 - 1);
                Formula::SinPair {
                    k: *k,
                    left: s * left,
                    right: s * right,
                }
            }
            PieceSource::MLinear { repaired, scale } => {
                let p_prev = if n >= 2 {
                    self.tree.product(n - 2)?
                } else {
                    1.0
                };
                let p_cur = self.tree.product(n - 1)?;
                let p_next = self.tree.product(n)?;
                if n == 1 && !repaired {
                    Formula::Linear {
                        value: *scale,
                        slope: 0.0,
                    }
                } else {
                    let kappa = (p_prev.powf(-0.5) - p_next.powf(-0.5)) / (hi - lo);
                    let w = scale * p_cur.powf(-0.5);
                    Formula::Linear {
                        value: w * p_prev.powf(-0.5),
                        slope: -w * kappa,
                    }
                }
            }
            PieceSource::Explicit(list) => list
                .get(n - 1)
                .cloned()
                .ok_or_else(|| Error::OutOfRange(format!("profile has no interval {n}")))?,
        };
        Ok(Piece { n, lo, hi, formula })
    }

    fn locate(&self, rho: f64) -> Result<usize> {
        if rho < 0.0 {
            return Err(Error::OutOfRange(format!(
                "profile evaluated at ρ = {rho} < 0"
            )));
        }
        if rho == 0.0 {
            return Ok(1);
        }
        if let Some(last) = self.support {
            if rho > self.tree.rho(last)? {
                return Ok(last + 1);
            }
        }
        self.tree.interval_of(rho)
    }

    /// Value, derivative and second derivative at `ρ` (left limits at breakpoints).
    pub fn jet(&self, rho: f64) -> Result<Jet> {
        let n = self.locate(rho)?;
        if let Some(last) = self.support {
            if n > last {
                return Ok(Jet {
                    v: 0.0,
                    d1: 0.0,
                    d2: 0.0,
                });
            }
        }
        Ok(self.piece(n)?.jet(rho))
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        Ok(self.jet(rho)?.v)
    }

    /// `(q_n(ρ_n), q_{n+1}(ρ_n))`.
    pub fn values_at_breakpoint(&self, n: usize) -> Result<(f64, f64)> {
        let rn = self.tree.rho(n)?;
        Ok((self.piece(n)?.jet(rn).v, self.piece(n + 1)?.jet(rn).v))
    }

    /// `(q'_n(ρ_n⁻), q'_{n+1}(ρ_n⁺))`.
    pub fn derivatives_at_breakpoint(&self, n: usize) -> Result<(f64, f64)> {
        let rn = self.tree.rho(n)?;
        Ok((self.piece(n)?.jet(rn).d1, self.piece(n + 1)?.jet(rn).d1))
    }

    /// `q'(0⁺)`.
    pub fn derivative_at_origin(&self) -> Result<f64> {
        Ok(self.piece(1)?.jet(0.0).d1)
    }

    /// Maximum over `[0, ρ_upto]` sampled on each interval plus the breakpoints.
    pub fn sup_on(&self, upto: usize, per_interval: usize) -> Result<f64> {
        let mut m: f64 = 0.0;
        for n in 1..=upto {
            let p = self.piece(n)?;
            for i in 0..=per_interval {
                let x = p.lo + (p.hi - p.lo) * i as f64 / per_interval as f64;
                m = m.max(p.jet(x).v);
            }
        }
        Ok(m)
    }

    /// Samples `(ρ, q, q')` over the first `upto` intervals.
    pub fn sample(&self, upto: usize, per_interval: usize) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = Vec::with_capacity(upto * (per_interval + 1));
        for n in 1..=upto {
            let p = self.piece(n)?;
            for i in 0..=per_interval {
                let x = p.lo + (p.hi - p.lo) * i as f64 / per_interval as f64;
                let j = p.jet(x);
                out.push((x, j.v, j.d1));
            }
        }
        Ok(out)
    }

    /// Same profile multiplied by `s`.
    pub fn scaled(&self, s: f64) -> BarrierProfile {
        let mut out = self.clone();
        out.pieces = match &self.pieces {
            PieceSource::GeometricSinPair {
                k,
                left,
                right,
                s0,
                q,
            } => PieceSource::GeometricSinPair {
                k: *k,
                left: *left,
                right: *right,
                s0: s0 * s,
                q: *q,
            },
            PieceSource::MLinear { repaired, scale } => PieceSource::MLinear {
                repaired: *repaired,
                scale: s * scale,
            },
            PieceSource::Explicit(list) => PieceSource::Explicit(
                list.iter()
                    .map(|f| match f {
                        Formula::SinPair { k, left, right } => Formula::SinPair {
                            k: *k,
                            left: s * left,
                            right: s * right,
                        },
                        Formula::DampedSinPair {
                            half_c,
                            omega,
                            a,
                            b,
                            scale,
                        } => Formula::DampedSinPair {
                            half_c: *half_c,
                            omega: *omega,
                            a: *a,
                            b: *b,
                            scale: s * scale,
                        },
                        Formula::Linear { value, slope } => Formula::Linear {
                            value: s * value,
                            slope: s * slope,
                        },
                        Formula::Table { x, y } => Formula::Table {
                            x: x.clone(),
                            y: y.iter().map(|v| s * v).collect(),
                        },
                        Formula::Zero => Formula::Zero,
                    })
                    .collect(),
            ),
        };
        out
    }
}
