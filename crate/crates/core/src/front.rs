//! Front tracking, extinction/propagation classification and speed fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{
    make_grid_half_line, solve, BoundaryCondition, Grid, InitialData, SolveParams, Trajectory,
};
use crate::reaction::{logistic, Nonlinearity};
use crate::spectral::{check_speed_gap, e0_homogeneous, speed_bounds, SpeedGap};
use crate::tree::RegularTree;

pub const DEFAULT_LEVEL: f64 = 0.5;
pub const DEFAULT_EPS_EXT: f64 = 1e-4;
pub const DEFAULT_EPS_PROP: f64 = 1e-2;
/// Relative tolerance on speed verdicts.
pub const DEFAULT_SPEED_TOL: f64 = 0.1;
/// Largest relative spread between the two resolutions of a speed fit.
pub const RESOLUTION_AGREEMENT: f64 = 0.02;
const MIN_FIT_SAMPLES: usize = 10;

/// Rightmost `ρ` where `values` drops through `level`, by linear interpolation.
pub fn level_position(centers: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let n = values.len().min(centers.len());
    if n == 0 {
        return None;
    }
    if values[n - 1] >= level {
        // Still above at the far end: no crossing inside the grid.
        return None;
    }
    let i = (0..n).rev().find(|&i| values[i] >= level)?;
    let (v0, v1) = (values[i], values[i + 1]);
    let w = (v0 - level) / (v0 - v1);
    Some(centers[i] + w * (centers[i + 1] - centers[i]))
}

/// Least-squares line `y = intercept + slope·x` with the slope standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub samples: usize,
}

pub fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let ssr: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        stderr,
        samples: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedReport {
    pub level: f64,
    pub positions: Vec<(f64, f64)>,
    pub c_emp: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Fit the level-set position against time. Without an explicit window the
/// last half of the snapshots with a defined crossing is used.
pub fn speed_estimate(
    grid: &Grid,
    traj: &Trajectory,
    level: f64,
    window: Option<(f64, f64)>,
) -> Result<SpeedReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfRange(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    let positions: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .filter_map(|s| level_position(grid.centers(), &s.values, level).map(|p| (s.t, p)))
        .collect();
    let used: Vec<(f64, f64)> = match window {
        Some((a, b)) => positions
            .iter()
            .cloned()
            .filter(|p| p.0 >= a && p.0 <= b)
            .collect(),
        None => positions[positions.len() / 2..].to_vec(),
    };
    if used.len() < MIN_FIT_SAMPLES {
        return Err(Error::Numerical(format!(
            "only {} level crossings in the fit window; need {MIN_FIT_SAMPLES}",
            used.len()
        )));
    }
    let fit = fit_line(&used).ok_or_else(|| Error::Numerical("degenerate fit window".into()))?;
    Ok(SpeedReport {
        level,
        window: (used[0].0, used[used.len() - 1].0),
        positions,
        c_emp: fit.slope,
        stderr: fit.stderr,
        samples: used.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Extinct,
    Propagating,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub sup_norms: Vec<(f64, f64)>,
    pub root_values: Vec<(f64, f64)>,
    /// `−d ln‖u‖_∞/dt` fitted over the last half, when the sup-norm stays positive.
    pub decay_rate: Option<f64>,
}

/// Fitted slope of `ln‖u(t)‖_∞` over snapshots with `t ∈ [t0, t1]`.
pub fn log_sup_slope(traj: &Trajectory, t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| (s.t, s.sup_norm()))
        .filter(|p| p.1 > 0.0)
        .map(|(t, v)| (t, v.ln()))
        .collect();
    fit_line(&pts).map(|f| f.slope)
}

/// Cell 0 is the cell next to the root on both grid kinds.
pub fn classify(traj: &Trajectory, eps_ext: f64, eps_prop: f64) -> Classification {
    let sup_norms: Vec<(f64, f64)> = traj.snapshots.iter().map(|s| (s.t, s.sup_norm())).collect();
    let root_values: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.t, s.values.first().copied().unwrap_or(0.0)))
        .collect();
    let t_end = traj.last().t;
    let quarter: Vec<usize> = (0..sup_norms.len())
        .filter(|&i| sup_norms[i].0 >= 0.75 * t_end)
        .collect();
    let extinct = sup_norms.last().is_some_and(|s| s.1 < eps_ext)
        && quarter
            .windows(2)
            .all(|w| sup_norms[w[1]].1 <= sup_norms[w[0]].1);
    let propagating =
        !quarter.is_empty() && quarter.iter().all(|&i| root_values[i].1 > 1.0 - eps_prop);
    let verdict = if extinct {
        Verdict::Extinct
    } else if propagating {
        Verdict::Propagating
    } else {
        Verdict::Undetermined
    };
    let decay_rate = log_sup_slope(traj, 0.5 * t_end, t_end).map(|s| -s);
    Classification {
        verdict,
        sup_norms,
        root_values,
        decay_rate,
    }
}

/// Half-line simulation setup shared by scans and speed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub generations: usize,
    pub cells_per_edge: usize,
    #[serde(default)]
    pub bc: BoundaryCondition,
    pub solve: SolveParams,
}

impl SimParams {
    pub fn grid(&self, tree: &RegularTree) -> Result<Grid> {
        make_grid_half_line(tree, self.generations, self.cells_per_edge, self.bc)
    }

    /// Same setup with half the cell width and half the time step.
    pub fn refined(&self) -> SimParams {
        let mut out = self.clone();
        out.cells_per_edge *= 2;
        out.solve.dt *= 0.5;
        out
    }
}

pub fn simulate(
    tree: &RegularTree,
    f: &Nonlinearity,
    u0: &InitialData,
    sim: &SimParams,
) -> Result<(Grid, Trajectory)> {
    let grid = sim.grid(tree)?;
    let init = u0.sample(&grid, tree, f)?;
    let traj = solve(&grid, &init, f, &sim.solve)?;
    Ok((grid, traj))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub a: f64,
    pub a_over_e0: f64,
    pub verdict: Option<Verdict>,
    pub decay_rate: Option<f64>,
    pub error: Option<String>,
}

/// One logistic simulation per `a`, in parallel; failures are reported per row.
pub fn threshold_scan(
    tree: &RegularTree,
    a_values: &[f64],
    u0: &InitialData,
    sim: &SimParams,
) -> Result<(f64, Vec<ScanRow>)> {
    let e0 = match tree.homogeneous_params() {
        Some((b, r)) => e0_homogeneous(b, r)?,
        None => {
            crate::spectral::principal_eigenvalue_truncated(
                tree,
                sim.generations,
                sim.cells_per_edge,
            )?
            .lambda
        }
    };
    let rows = a_values
        .par_iter()
        .map(|&a| {
            let run = logistic(a).and_then(|f| simulate(tree, &f, u0, sim));
            match run {
                Ok((_, traj)) => {
                    let c = classify(&traj, DEFAULT_EPS_EXT, DEFAULT_EPS_PROP);
                    ScanRow {
                        a,
                        a_over_e0: a / e0,
                        verdict: Some(c.verdict),
                        decay_rate: c.decay_rate,
                        error: None,
                    }
                }
                Err(e) => ScanRow {
                    a,
                    a_over_e0: a / e0,
                    verdict: None,
                    decay_rate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok((e0, rows))
}

/// Outermost 10% of cells below `1e−8`: the truncation has not been felt.
pub fn domain_adequate(values: &[f64]) -> bool {
    let n = values.len();
    let start = n - (n / 10).max(1);
    values[start..].iter().all(|&v| v < 1e-8)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedVsBounds {
    pub coarse: SpeedReport,
    pub fine: SpeedReport,
    /// `|c_fine − c_coarse|/c_fine`.
    pub resolution_spread: f64,
    pub resolutions_agree: bool,
    pub c_check: Option<f64>,
    pub c_hat: f64,
    pub tol: f64,
    pub above_lower: Option<bool>,
    pub below_upper: bool,
    /// Outcome of the exact `č < ĉ` check (homogeneous trees only).
    pub speed_gap: Option<SpeedGap>,
    pub note: Option<String>,
    pub domain_adequate: bool,
}

pub fn speed_vs_bounds(
    tree: &RegularTree,
    f: &Nonlinearity,
    u0: &InitialData,
    sim: &SimParams,
    level: f64,
) -> Result<SpeedVsBounds> {
    let bounds = speed_bounds(tree, f, Some((sim.generations, sim.cells_per_edge)))?;
    let fine_sim = sim.refined();
    let runs: Vec<Result<(Grid, Trajectory)>> = [sim, &fine_sim]
        .par_iter()
        .map(|s| simulate(tree, f, u0, s))
        .collect();
    let mut reports = Vec::new();
    let mut adequate = true;
    for r in runs {
        let (grid, traj) = r?;
        adequate &= domain_adequate(&traj.last().values);
        reports.push(speed_estimate(&grid, &traj, level, None)?);
    }
    let fine = reports.pop().expect("two runs");
    let coarse = reports.pop().expect("two runs");
    let spread = (fine.c_emp - coarse.c_emp).abs() / fine.c_emp.abs();
    let tol = DEFAULT_SPEED_TOL;
    let c = fine.c_emp;
    let speed_gap = match tree.homogeneous_params() {
        Some((b, r)) => check_speed_gap(b, r, f.m()).ok(),
        None => None,
    };
    let note = match speed_gap {
        Some(g) if !g.holds => Some(format!(
            "bound pair inconsistent: 2√(M r² − θ²) = {} ≥ M r² b/(b − 1) = {}",
            g.lhs, g.rhs
        )),
        _ => None,
    };
    Ok(SpeedVsBounds {
        resolution_spread: spread,
        resolutions_agree: spread <= RESOLUTION_AGREEMENT,
        above_lower: bounds.c_check.map(|cc| c >= cc * (1.0 - tol)),
        below_upper: c <= bounds.c_hat * (1.0 + tol),
        c_check: bounds.c_check,
        c_hat: bounds.c_hat,
        tol,
        coarse,
        fine,
        speed_gap,
        note,
        domain_adequate: adequate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Field;

    #[test]
    fn level_crossings() {
        let x: Vec<f64> = (0..100).map(|i| 0.1 * i as f64 + 0.05).collect();
        let step: Vec<f64> = x.iter().map(|&r| if r < 5.0 { 1.0 } else { 0.0 }).collect();
        let p = level_position(&x, &step, 0.5).unwrap();
        assert!((p - 5.0).abs() <= 0.1);
        assert!(level_position(&x, &vec![0.0; 100], 0.5).is_none());
        assert!(level_position(&x, &vec![1.0; 100], 0.5).is_none());
    }

    fn synthetic(speed: f64, shift: f64) -> (Grid, Trajectory) {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let g = make_grid_half_line(&t, 40, 8, BoundaryCondition::Dirichlet0).unwrap();
        let snapshots = (0..20)
            .map(|k| {
                let tt = k as f64 + shift;
                let front = 3.0 + speed * k as f64;
                Field {
                    t: tt,
                    values: g.sample(|x| (0.5 - (x - front)).clamp(0.0, 1.0)),
                }
            })
            .collect();
        (
            g,
            Trajectory {
                snapshots,
                stats: Default::default(),
            },
        )
    }

    #[test]
    fn exact_linear_front() {
        let (g, tr) = synthetic(1.5, 0.0);
        let r = speed_estimate(&g, &tr, 0.5, Some((0.0, 19.0))).unwrap();
        assert!((r.c_emp - 1.5).abs() < 1e-12);
        assert!(r.stderr < 1e-12);
        let (g, tr) = synthetic(1.5, 7.0);
        let s = speed_estimate(&g, &tr, 0.5, Some((0.0, 30.0))).unwrap();
        assert!((s.c_emp - r.c_emp).abs() < 1e-12);
        assert!(speed_estimate(&g, &tr, 0.5, Some((0.0, 10.0))).is_err());
    }

    #[test]
    fn zero_data_is_extinct() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let f = logistic(1.0).unwrap();
        let sim = SimParams {
            generations: 3,
            cells_per_edge: 4,
            bc: BoundaryCondition::Dirichlet0,
            solve: SolveParams {
                t_final: 5.0,
                dt: 0.1,
                theta: 1.0,
                snapshot_every: 0.5,
            },
        };
        let (_, tr) = simulate(&t, &f, &InitialData::Zero, &sim).unwrap();
        assert_eq!(classify(&tr, 1e-4, 1e-2).verdict, Verdict::Extinct);
    }
}
