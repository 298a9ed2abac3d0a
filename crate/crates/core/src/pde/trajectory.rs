use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reaction::{lipschitz_bound, Nonlinearity};

use super::grid::{Grid, GridMode};
use super::step::Stepper;

/// Solution values on the cells of a grid at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Field {
    pub t: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Time between recorded snapshots.
    pub snapshot_every: f64,
}

fn default_theta() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub dt: f64,
    pub theta: f64,
    /// Direct solves performed; each is an exact elimination.
    pub linear_solves: usize,
    /// Length of the final shortened step, if one was needed.
    pub final_partial_step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory is never empty")
    }
}

/// Integrate from `u0` to `t_final` with fixed `dt` (final partial step allowed).
pub fn solve(
    grid: &Grid,
    u0: &[f64],
    f: &Nonlinearity,
    params: &SolveParams,
) -> Result<Trajectory> {
    if u0.len() != grid.n_cells() {
        return Err(Error::OutOfRange(format!(
            "initial data has {} values for {} cells",
            u0.len(),
            grid.n_cells()
        )));
    }
    if let Some(v) = u0.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::OutOfRange(format!(
            "initial value {v} outside [0, 1]"
        )));
    }
    if !(params.t_final >= 0.0) || !(params.snapshot_every > 0.0) {
        return Err(Error::OutOfRange(
            "t_final ≥ 0 and snapshot_every > 0 required".into(),
        ));
    }
    let lip = lipschitz_bound(f);
    let stepper = Stepper::with_lipschitz(grid, f, params.dt, params.theta, lip)?;
    let full_steps = ((params.t_final / params.dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = params.t_final - full_steps as f64 * params.dt;
    let partial = if remainder > 1e-9 * params.dt {
        Some(remainder)
    } else {
        None
    };

    let mut snapshots = vec![Field {
        t: 0.0,
        values: u0.to_vec(),
    }];
    let mut next_snap = params.snapshot_every;
    let mut u = u0.to_vec();
    let mut stats = SolverStats {
        dt: params.dt,
        theta: params.theta,
        ..Default::default()
    };
    let fail = |e: Error, t: f64| match e {
        Error::OutOfRange(m) => Error::Numerical(format!("at t = {t}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("at t = {t}: {m}")),
        other => other,
    };
    for k in 1..=full_steps {
        let t = k as f64 * params.dt;
        u = stepper.step(&u).map_err(|e| fail(e, t))?;
        stats.steps += 1;
        stats.linear_solves += 1;
        if t >= next_snap - 1e-9 * params.dt && (k < full_steps || partial.is_some()) {
            snapshots.push(Field {
                t,
                values: u.clone(),
            });
            while next_snap <= t + 1e-9 * params.dt {
                next_snap += params.snapshot_every;
            }
        }
    }
    if let Some(h) = partial {
        let last = Stepper::with_lipschitz(grid, f, h, params.theta, lip)?;
        u = last.step(&u).map_err(|e| fail(e, params.t_final))?;
        stats.steps += 1;
        stats.linear_solves += 1;
        stats.final_partial_step = Some(h);
    }
    if params.t_final > 0.0 {
        snapshots.push(Field {
            t: params.t_final,
            values: u,
        });
    }
    Ok(Trajectory { snapshots, stats })
}

/// Generation-averaged copy of a full-tree trajectory on the matching
/// half-line grid, plus the largest spread between cells at the same radius.
pub fn symmetrize(full: &Grid, traj: &Trajectory, half: &Grid) -> Result<(Trajectory, f64)> {
    if full.mode() != GridMode::FullTree || half.mode() != GridMode::HalfLine {
        return Err(Error::OutOfRange(
            "symmetrize maps a full-tree grid onto a half-line grid".into(),
        ));
    }
    let n_half = half.n_cells();
    if full.cells_per_edge() != half.cells_per_edge() || full.generations() != half.generations() {
        return Err(Error::OutOfRange(
            "grid mismatch between full tree and half-line".into(),
        ));
    }
    for i in 0..full.n_cells() {
        let j = full.radial_index(i);
        if j >= n_half || (full.centers()[i] - half.centers()[j]).abs() > 1e-12 * half.domain_end()
        {
            return Err(Error::OutOfRange(format!(
                "grid mismatch at full-tree cell {i}"
            )));
        }
    }
    let mut asym: f64 = 0.0;
    let mut snapshots = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let mut sum = vec![0.0; n_half];
        let mut cnt = vec![0usize; n_half];
        let mut lo = vec![f64::INFINITY; n_half];
        let mut hi = vec![f64::NEG_INFINITY; n_half];
        for (i, &v) in snap.values.iter().enumerate() {
            let j = full.radial_index(i);
            sum[j] += v;
            cnt[j] += 1;
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
        for j in 0..n_half {
            asym = asym.max(hi[j] - lo[j]);
        }
        snapshots.push(Field {
            t: snap.t,
            values: sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect(),
        });
    }
    Ok((
        Trajectory {
            snapshots,
            stats: traj.stats,
        },
        asym,
    ))
}

/// Moving-frame trace `u(ρ0 + c t, t)` sampled at each snapshot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayTrace {
    pub samples: Vec<(f64, f64)>,
    /// Set when the ray left the grid before the last snapshot.
    pub truncated: bool,
}

/// Linear interpolation of a half-line field at `rho`; `None` past the last centre.
pub fn interpolate(grid: &Grid, values: &[f64], rho: f64) -> Option<f64> {
    let x = grid.centers();
    if rho <= x[0] {
        return Some(values[0]);
    }
    if rho > x[x.len() - 1] {
        return None;
    }
    let i = x.partition_point(|&c| c < rho);
    let w = (rho - x[i - 1]) / (x[i] - x[i - 1]);
    Some(values[i - 1] + w * (values[i] - values[i - 1]))
}

pub fn evaluate_along_ray(grid: &Grid, traj: &Trajectory, rho0: f64, c: f64) -> Result<RayTrace> {
    if grid.mode() != GridMode::HalfLine {
        return Err(Error::OutOfRange(
            "ray evaluation needs a half-line grid".into(),
        ));
    }
    let mut samples = Vec::with_capacity(traj.snapshots.len());
    let mut truncated = false;
    for snap in &traj.snapshots {
        match interpolate(grid, &snap.values, rho0 + c * snap.t) {
            Some(v) => samples.push((snap.t, v)),
            None => {
                truncated = true;
                break;
            }
        }
    }
    Ok(RayTrace { samples, truncated })
}
