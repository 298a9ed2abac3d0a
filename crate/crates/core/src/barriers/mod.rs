//! Piecewise closed-form sub- and supersolutions with exact one-sided limits,
//! and a verifier for their differential, jump and boundary relations.

pub mod build;
pub mod envelope;
pub mod profile;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use build::{
    build_U, build_eigen_subsolution, build_g, build_h, build_h_tilde, build_m, build_psi,
    build_psi_eps, h_tilde_k_max, h_tilde_parameters, kappa, m_speed_threshold, shoot_psi,
    EigenSubsolution, MVariant, PsiBuild, PsiEps, PsiRecursion, ShootResult, TravellingEnvelope,
};
pub use envelope::{
    build_extinction_envelope_kpp, build_extinction_envelope_power, verify_envelope,
    EnvelopeReport, Temporal, TimeEnvelope,
};
pub use profile::{BarrierKind, BarrierProfile, Formula, Jet, Piece};
pub use verify::{verify_barrier, verify_barrier_on, CheckEntry, Location, ResidualReport};

use crate::error::{Error, Result};
use crate::reaction::Nonlinearity;
use crate::tree::RegularTree;

fn default_n_budget() -> usize {
    64
}

fn default_cells() -> usize {
    64
}

/// Named profile request, as read from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierSpec {
    G {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    H,
    /// Missing parameters are derived from the forcing term.
    HTilde {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
    },
    M {
        #[serde(default)]
        variant: MVariant,
    },
    /// `ψ` at a given `μ`, or shot for `μ*` when `mu` is absent.
    Psi {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        n: usize,
        #[serde(default = "default_n_budget")]
        n_budget: usize,
        #[serde(default)]
        recursion: PsiRecursion,
    },
    PsiEps {
        c: f64,
        n: usize,
        #[serde(default = "default_n_budget")]
        n_budget: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        #[serde(default)]
        recursion: PsiRecursion,
    },
    Eigen {
        n: usize,
        #[serde(default = "default_cells")]
        cells_per_edge: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
}

/// A built profile together with the speed its travelling relations refer to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuiltBarrier {
    pub profile: BarrierProfile,
    pub c: Option<f64>,
}

fn homogeneous(tree: &RegularTree) -> Result<(u32, f64)> {
    tree.homogeneous_params().ok_or_else(|| {
        Error::OutOfRange("this profile is defined on homogeneous trees only".into())
    })
}

impl BarrierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BarrierSpec::G { .. } => "g",
            BarrierSpec::H => "h",
            BarrierSpec::HTilde { .. } => "h_tilde",
            BarrierSpec::M { .. } => "m",
            BarrierSpec::Psi { .. } => "psi",
            BarrierSpec::PsiEps { .. } => "psi_eps",
            BarrierSpec::Eigen { .. } => "eigen",
        }
    }

    pub fn build(&self, tree: &RegularTree, f: &Nonlinearity) -> Result<BuiltBarrier> {
        let plain = |profile| BuiltBarrier { profile, c: None };
        Ok(match *self {
            BarrierSpec::G { lambda, alpha } => {
                let (b, r) = homogeneous(tree)?;
                plain(build_g(b, r, lambda, alpha)?)
            }
            BarrierSpec::H => {
                let (b, r) = homogeneous(tree)?;
                plain(build_h(b, r)?)
            }
            BarrierSpec::HTilde { sigma, p0, k } => {
                let (b, r) = homogeneous(tree)?;
                let (s, p) = match (sigma, p0) {
                    (Some(s), Some(p)) => (s, p),
                    _ => {
                        let (s, p, _) = h_tilde_parameters(b, r, f)?;
                        (sigma.unwrap_or(s), p0.unwrap_or(p))
                    }
                };
                let kk = k.unwrap_or(0.9 * h_tilde_k_max(b, s, p));
                plain(build_h_tilde(b, r, s, p, kk)?)
            }
            BarrierSpec::M { variant } => {
                // The speed threshold of m makes a natural default for c.
                let c = m_speed_threshold(tree, f, variant)?;
                BuiltBarrier {
                    profile: build_m(tree, variant)?,
                    c: Some(c * 1.05),
                }
            }
            BarrierSpec::Psi {
                c,
                mu,
                n,
                n_budget,
                recursion,
            } => {
                let psi = match mu {
                    Some(mu) => build_psi(tree, f.fprime0(), c, mu, n, recursion)?,
                    None => shoot_psi(tree, f.fprime0(), c, n, n_budget, recursion)?.build,
                };
                BuiltBarrier {
                    profile: psi.profile,
                    c: Some(c),
                }
            }
            BarrierSpec::PsiEps {
                c,
                n,
                n_budget,
                eps,
                recursion,
            } => {
                let shot = shoot_psi(tree, f.fprime0(), c, n, n_budget, recursion)?;
                BuiltBarrier {
                    profile: build_psi_eps(&shot.build, f, eps)?.profile,
                    c: Some(c),
                }
            }
            BarrierSpec::Eigen {
                n,
                cells_per_edge,
                eps,
            } => plain(build_eigen_subsolution(tree, f, n, cells_per_edge, eps)?.profile),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        let specs = vec![
            BarrierSpec::G {
                lambda: 0.08,
                alpha: None,
            },
            BarrierSpec::H,
            BarrierSpec::M {
                variant: MVariant::Repaired,
            },
            BarrierSpec::Psi {
                c: 1.0,
                mu: None,
                n: 4,
                n_budget: 64,
                recursion: PsiRecursion::Exact,
            },
        ];
        for s in specs {
            let j = serde_json::to_string(&s).unwrap();
            let back: BarrierSpec = serde_json::from_str(&j).unwrap();
            assert_eq!(back, s);
        }
        assert!(
            serde_json::from_str::<BarrierSpec>(r#"{"kind":"g","lambda":0.1,"alpa":0.2}"#).is_err()
        );
    }
}
