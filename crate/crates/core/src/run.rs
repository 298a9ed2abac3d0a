//! Experiment orchestration behind the command-line driver.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::barriers::{
    build_g, build_h, build_h_tilde, build_m, h_tilde_parameters, m_speed_threshold, shoot_psi,
    verify_barrier, BarrierProfile, BarrierSpec, MVariant, PsiRecursion, ResidualReport,
};
use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::front::{
    classify, level_position, simulate, speed_vs_bounds, threshold_scan, Classification,
    DEFAULT_EPS_EXT, DEFAULT_EPS_PROP,
};
use crate::output::{Cell, ErrorRecord, Manifest, OutputSink};
use crate::pde::{make_grid_full_tree, make_grid_half_line, solve, symmetrize, Grid, Trajectory};
use crate::plot::{line_chart, Series};
use crate::reaction::Nonlinearity;
use crate::spectral::{
    check_speed_gap, e0_homogeneous, spectral_report, speed_bounds, SpeedBounds, SpeedGap,
};
use crate::tree::RegularTree;

/// Outcome of one invocation; the manifest has been written either way.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub error: Option<Error>,
}

/// Run `config` as experiment `kind`, writing all artifacts and `manifest.json` to `out`.
pub fn execute(config: RunConfig, kind: ExperimentKind, out: &Path, plots: bool) -> RunOutcome {
    let start = Instant::now();
    let resolved = config.resolve(kind);
    let mut sink = match OutputSink::new(out) {
        Ok(s) => s,
        Err(e) => {
            return RunOutcome {
                exit_code: e.exit_code(),
                error: Some(e),
            }
        }
    };
    let (cfg_json, result) = match resolved {
        Ok(mut cfg) => {
            cfg.plots |= plots;
            let r = run(&cfg, kind, &mut sink);
            (
                serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null),
                r,
            )
        }
        Err(e) => (serde_json::Value::Null, Err(e)),
    };
    let (exit_code, error) = match &result {
        Ok(()) => (0, None),
        Err(e) => (
            e.exit_code(),
            Some(ErrorRecord {
                category: e.category().to_string(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        ),
    };
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: kind.as_str().to_string(),
        status: if exit_code == 0 {
            "ok".into()
        } else {
            "error".into()
        },
        exit_code,
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        config: cfg_json,
        outputs: sink.entries().to_vec(),
        error,
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|s| std::fs::write(out.join("manifest.json"), s + "\n").map_err(Error::from));
    match (result, written) {
        (Err(e), _) | (Ok(()), Err(e)) => RunOutcome {
            exit_code: e.exit_code(),
            error: Some(e),
        },
        (Ok(()), Ok(())) => RunOutcome {
            exit_code: 0,
            error: None,
        },
    }
}

fn forcing(cfg: &RunConfig) -> Result<Nonlinearity> {
    cfg.f
        .as_ref()
        .ok_or_else(|| Error::Config("field `f` missing".into()))?
        .build()
}

/// Dispatch on the experiment kind; `cfg` must already be validated for it.
pub fn run(cfg: &RunConfig, kind: ExperimentKind, sink: &mut OutputSink) -> Result<()> {
    let tree = cfg.tree.build()?;
    match kind {
        ExperimentKind::Spectrum => run_spectrum(cfg, &tree, sink),
        ExperimentKind::Barriers => run_barriers(cfg, &tree, sink),
        ExperimentKind::ValidateBarriers => run_validate(cfg, &tree, sink),
        ExperimentKind::Simulate => run_simulate(cfg, &tree, sink),
        ExperimentKind::SimulateTree => run_simulate_tree(cfg, &tree, sink),
        ExperimentKind::Scan => run_scan(cfg, &tree, sink),
        ExperimentKind::Speed => run_speed(cfg, &tree, sink),
    }
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    report: &'a crate::spectral::SpectralReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_bounds: Option<SpeedBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_gap: Option<SpeedGap>,
}

fn run_spectrum(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let opts = cfg.spectral.options();
    let report = spectral_report(tree, &opts)?;
    let (bounds, gap) = match &cfg.f {
        Some(spec) => {
            let f = spec.build()?;
            let n = *opts.truncations.iter().max().unwrap_or(&8);
            let bounds = speed_bounds(tree, &f, Some((n, opts.cells_per_edge)))?;
            let gap = match tree.homogeneous_params() {
                Some((b, r)) => check_speed_gap(b, r, f.m()).ok(),
                None => None,
            };
            (Some(bounds), gap)
        }
        None => (None, None),
    };
    sink.json(
        "spectrum.json",
        "E0, L, B, bands, truncated eigenvalues and speed bounds",
        &SpectrumOut {
            report: &report,
            speed_bounds: bounds,
            speed_gap: gap,
        },
    )?;
    let rows: Vec<Vec<Cell>> = report
        .lambda0_by_truncation
        .iter()
        .map(|&(n, l)| vec![n.into(), l.into()])
        .collect();
    sink.csv(
        "truncations.csv",
        "λ_0,N by truncation depth",
        &["generations", "lambda"],
        &rows,
    )?;
    if !report.bands.is_empty() {
        let rows: Vec<Vec<Cell>> = report
            .bands
            .iter()
            .enumerate()
            .map(|(l, &(a, b))| vec![(l + 1).into(), a.into(), b.into()])
            .collect();
        sink.csv(
            "bands.csv",
            "spectral bands of the homogeneous tree",
            &["band", "lower", "upper"],
            &rows,
        )?;
    }
    if cfg.plots {
        let pts: Vec<(f64, f64)> = report
            .lambda0_by_truncation
            .iter()
            .map(|&(n, l)| (n as f64, l))
            .collect();
        let mut series = vec![Series {
            name: "λ_0,N",
            points: &pts,
        }];
        let e0_line: Vec<(f64, f64)>;
        if let Some(e0) = report.e0_closed {
            e0_line = vec![(pts[0].0, e0), (pts[pts.len() - 1].0, e0)];
            series.push(Series {
                name: "E0",
                points: &e0_line,
            });
        }
        sink.svg(
            "truncations.svg",
            "truncated eigenvalues against depth",
            &line_chart("Truncated principal eigenvalue", "N", "λ", &series),
        )?;
    }
    Ok(())
}

fn profile_rows(profile: &BarrierProfile) -> Result<Vec<Vec<Cell>>> {
    let upto = profile.support.unwrap_or(10);
    Ok(profile
        .sample(upto, 64)?
        .into_iter()
        .map(|(x, v, d)| vec![x.into(), v.into(), d.into()])
        .collect())
}

#[derive(Serialize)]
struct NamedReport {
    name: String,
    passed: bool,
    report: ResidualReport,
    profile: BarrierProfile,
}

fn verify_and_write(
    cfg: &RunConfig,
    items: Vec<(String, BarrierProfile, Option<f64>)>,
    f: &Nonlinearity,
    sink: &mut OutputSink,
) -> Result<Vec<NamedReport>> {
    let mut reports = Vec::new();
    for (i, (name, profile, c)) in items.into_iter().enumerate() {
        let rows = profile_rows(&profile)?;
        let file = format!("barrier_{i:02}_{name}.csv");
        sink.csv(
            &file,
            &format!("sampled {name} profile"),
            &["rho", "value", "derivative"],
            &rows,
        )?;
        if cfg.plots {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| match (&r[0], &r[1]) {
                    (Cell::Num(x), Cell::Num(v)) => (*x, *v),
                    _ => (f64::NAN, f64::NAN),
                })
                .collect();
            sink.svg(
                &format!("barrier_{i:02}_{name}.svg"),
                &format!("{name} profile"),
                &line_chart(
                    &name,
                    "ρ",
                    "value",
                    &[Series {
                        name: &name,
                        points: &pts,
                    }],
                ),
            )?;
        }
        let report = verify_barrier(&profile, Some(f), c, cfg.quad_points)?;
        reports.push(NamedReport {
            name,
            passed: report.passed(),
            report,
            profile,
        });
    }
    Ok(reports)
}

fn run_barriers(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let f = forcing(cfg)?;
    let mut items = Vec::new();
    for spec in &cfg.barriers {
        let built = spec.build(tree, &f)?;
        items.push((spec.name().to_string(), built.profile, built.c));
    }
    let reports = verify_and_write(cfg, items, &f, sink)?;
    sink.json("residuals.json", "residual reports per profile", &reports)
}

/// Profiles checked by `validate-barriers` when the config lists none.
fn default_suite(
    tree: &RegularTree,
    f: &Nonlinearity,
) -> Result<Vec<(String, BarrierProfile, Option<f64>)>> {
    let mut items = Vec::new();
    if let Some((b, r)) = tree.homogeneous_params() {
        let e0 = e0_homogeneous(b, r)?;
        for frac in [0.25, 0.5, 0.75] {
            items.push((format!("g_{frac}"), build_g(b, r, frac * e0, None)?, None));
        }
        items.push(("h".into(), build_h(b, r)?, None));
        if let Ok((s, p0, k)) = h_tilde_parameters(b, r, f) {
            items.push(("h_tilde".into(), build_h_tilde(b, r, s, p0, k)?, None));
        }
        if f.fprime0() > e0 {
            let c_check = 2.0 * (f.fprime0() - e0).sqrt();
            if let Ok(shot) =
                shoot_psi(tree, f.fprime0(), 0.5 * c_check, 1, 64, PsiRecursion::Exact)
            {
                items.push(("psi".into(), shot.build.profile, Some(0.5 * c_check)));
            }
        }
    }
    if tree.h0() {
        for (name, v) in [
            ("m_verbatim", MVariant::Verbatim),
            ("m_repaired", MVariant::Repaired),
        ] {
            let c = 1.05 * m_speed_threshold(tree, f, v)?;
            items.push((name.into(), build_m(tree, v)?, Some(c)));
        }
    }
    Ok(items)
}

fn run_validate(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let f = forcing(cfg)?;
    let items = if cfg.barriers.is_empty() {
        default_suite(tree, &f)?
    } else {
        cfg.barriers
            .iter()
            .map(|s: &BarrierSpec| {
                s.build(tree, &f)
                    .map(|b| (s.name().to_string(), b.profile, b.c))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let reports = verify_and_write(cfg, items, &f, sink)?;
    let rows: Vec<Vec<Cell>> = reports
        .iter()
        .map(|r| {
            vec![
                r.name.as_str().into(),
                r.report.entries.len().into(),
                r.report.unexpected_failures.into(),
                r.report.expected_failures.into(),
            ]
        })
        .collect();
    sink.csv(
        "validation.csv",
        "per-profile check counts",
        &[
            "profile",
            "checks",
            "unexpected_failures",
            "expected_failures",
        ],
        &rows,
    )?;
    sink.json("residuals.json", "residual reports per profile", &reports)?;
    let bad: usize = reports.iter().map(|r| r.report.unexpected_failures).sum();
    if bad > 0 {
        return Err(Error::Numerical(format!(
            "{bad} unexpected residual failures"
        )));
    }
    Ok(())
}

fn snapshot_rows(grid: &Grid, traj: &Trajectory) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        for (i, (&x, &v)) in grid.centers().iter().zip(&s.values).enumerate() {
            rows.push(vec![s.t.into(), i.into(), x.into(), v.into()]);
        }
    }
    rows
}

fn write_trajectory(
    cfg: &RunConfig,
    grid: &Grid,
    traj: &Trajectory,
    sink: &mut OutputSink,
) -> Result<Classification> {
    sink.csv(
        "snapshots.csv",
        "solution at each snapshot",
        &["t", "cell", "rho", "value"],
        &snapshot_rows(grid, traj),
    )?;
    let class = classify(traj, DEFAULT_EPS_EXT, DEFAULT_EPS_PROP);
    let rows: Vec<Vec<Cell>> = class
        .sup_norms
        .iter()
        .zip(&class.root_values)
        .map(|(&(t, s), &(_, r))| {
            let pos = level_position(
                grid.centers(),
                &traj.snapshots.iter().find(|x| x.t == t).unwrap().values,
                cfg.level,
            );
            vec![t.into(), s.into(), r.into(), pos.into()]
        })
        .collect();
    sink.csv(
        "history.csv",
        "sup-norm, root value and level position over time",
        &["t", "sup_norm", "root_value", "level_position"],
        &rows,
    )?;
    sink.json(
        "classification.json",
        "extinction/propagation verdict",
        &class,
    )?;
    if cfg.plots {
        let pts: Vec<(f64, f64)> = class.sup_norms.clone();
        sink.svg(
            "sup_norm.svg",
            "sup-norm against time",
            &line_chart(
                "Sup-norm",
                "t",
                "‖u‖∞",
                &[Series {
                    name: "sup",
                    points: &pts,
                }],
            ),
        )?;
        if grid.mode() == crate::pde::GridMode::HalfLine {
            let k = traj.snapshots.len();
            let picks: Vec<usize> = (0..6).map(|j| j * (k - 1) / 5).collect();
            let curves: Vec<(String, Vec<(f64, f64)>)> = picks
                .iter()
                .map(|&j| {
                    let s = &traj.snapshots[j];
                    (
                        format!("t={:.3}", s.t),
                        grid.centers()
                            .iter()
                            .cloned()
                            .zip(s.values.iter().cloned())
                            .collect(),
                    )
                })
                .collect();
            let series: Vec<Series> = curves
                .iter()
                .map(|(n, p)| Series { name: n, points: p })
                .collect();
            sink.svg(
                "profiles.svg",
                "solution snapshots",
                &line_chart("Snapshots", "ρ", "u", &series),
            )?;
        }
    }
    Ok(class)
}

fn run_simulate(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let f = forcing(cfg)?;
    let u0 = cfg.u0.as_ref().expect("validated");
    let sim = cfg.sim.as_ref().expect("validated");
    let (grid, traj) = simulate(tree, &f, u0, sim)?;
    write_trajectory(cfg, &grid, &traj, sink)?;
    sink.json("solver_stats.json", "solver statistics", &traj.stats)
}

#[derive(Serialize)]
struct TreeRunSummary {
    cells: usize,
    edges: usize,
    asymmetry: f64,
    /// Largest gap to the half-line solve on the matching grid.
    half_line_difference: f64,
    stats: crate::pde::SolverStats,
}

fn run_simulate_tree(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let f = forcing(cfg)?;
    let u0 = cfg.u0.as_ref().expect("validated");
    let sim = cfg.sim.as_ref().expect("validated");
    let expansion = tree.expand(sim.generations, cfg.edge_budget)?;
    let full = make_grid_full_tree(&expansion, sim.cells_per_edge, sim.bc)?;
    let init = u0.sample(&full, tree, &f)?;
    let traj = solve(&full, &init, &f, &sim.solve)?;
    let half = make_grid_half_line(tree, sim.generations, sim.cells_per_edge, sim.bc)?;
    let (sym, asym) = symmetrize(&full, &traj, &half)?;
    let half_init = u0.sample(&half, tree, &f)?;
    let half_traj = solve(&half, &half_init, &f, &sim.solve)?;
    let mut diff: f64 = 0.0;
    for (a, b) in sym.snapshots.iter().zip(&half_traj.snapshots) {
        for (x, y) in a.values.iter().zip(&b.values) {
            diff = diff.max((x - y).abs());
        }
    }
    write_trajectory(cfg, &full, &traj, sink)?;
    sink.csv(
        "symmetrized.csv",
        "generation-averaged solution on the half-line grid",
        &["t", "cell", "rho", "value"],
        &snapshot_rows(&half, &sym),
    )?;
    sink.json(
        "tree_summary.json",
        "full-tree run summary",
        &TreeRunSummary {
            cells: full.n_cells(),
            edges: expansion.edges.len(),
            asymmetry: asym,
            half_line_difference: diff,
            stats: traj.stats,
        },
    )
}

fn run_scan(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let u0 = cfg.u0.as_ref().expect("validated");
    let sim = cfg.sim.as_ref().expect("validated");
    let (e0, rows) = threshold_scan(tree, &cfg.a_values, u0, sim)?;
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.a.into(),
                r.a_over_e0.into(),
                r.verdict
                    .map(|v| match v {
                        crate::front::Verdict::Extinct => "EXTINCT",
                        crate::front::Verdict::Propagating => "PROPAGATING",
                        crate::front::Verdict::Undetermined => "UNDETERMINED",
                    })
                    .unwrap_or("ERROR")
                    .into(),
                r.decay_rate.into(),
                Cell::Text(r.error.clone().unwrap_or_default()),
            ]
        })
        .collect();
    sink.csv(
        "scan.csv",
        "verdict per logistic amplitude",
        &["a", "a_over_e0", "verdict", "decay_rate", "error"],
        &table,
    )?;
    #[derive(Serialize)]
    struct ScanOut<'a> {
        e0: f64,
        rows: &'a [crate::front::ScanRow],
    }
    sink.json(
        "scan.json",
        "threshold scan with E0",
        &ScanOut { e0, rows: &rows },
    )
}

fn run_speed(cfg: &RunConfig, tree: &RegularTree, sink: &mut OutputSink) -> Result<()> {
    let f = forcing(cfg)?;
    let u0 = cfg.u0.as_ref().expect("validated");
    let sim = cfg.sim.as_ref().expect("validated");
    let rep = speed_vs_bounds(tree, &f, u0, sim, cfg.level)?;
    for (name, r) in [("coarse", &rep.coarse), ("fine", &rep.fine)] {
        let rows: Vec<Vec<Cell>> = r
            .positions
            .iter()
            .map(|&(t, x)| vec![t.into(), x.into()])
            .collect();
        sink.csv(
            &format!("positions_{name}.csv"),
            &format!("level position against time, {name} resolution"),
            &["t", "rho_level"],
            &rows,
        )?;
    }
    sink.json("speed.json", "fitted speed and bounds", &rep)?;
    if cfg.plots {
        sink.svg(
            "front.svg",
            "front position against time",
            &line_chart(
                "Front position",
                "t",
                "ρ",
                &[
                    Series {
                        name: "coarse",
                        points: &rep.coarse.positions,
                    },
                    Series {
                        name: "fine",
                        points: &rep.fine.positions,
                    },
                ],
            ),
        )?;
    }
    Ok(())
}
