//! Subcommand bodies. Each reads a validated [`RunConfig`], computes, and
//! writes its artifacts plus the effective `config.json` into `out`.

use std::path::Path;

use snapharvest_core::engine::simulate as run_simulation;
use snapharvest_core::explorer::{evaluate_design_point, DesignParameter, DesignPoint, PointStatus, Scenario};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{self, fmt_f64};
use crate::parallel;
use crate::report::{
    DesignSummary, ForceTableSummary, OptimizeSummary, PyroComparison, PyroReference,
    SimulateSummary, SweepSummary, ThresholdSummary, ThresholdsCommandSummary,
};

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.svg";
pub const FORCE_TABLE_FILE: &str = "force_table.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const OPTIMIZE_LOG_FILE: &str = "optimize_log.csv";

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    formats::write_text(&out.join(CONFIG_FILE), &cfg.to_json())
}

fn backend_name(s: &Scenario) -> &'static str {
    s.backend.source().as_str()
}

/// Time series, events, summary and (with `output.svg`) the trace plot.
pub fn simulate(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<()> {
    let scenario = cfg.scenario(base_dir)?;
    let force = parallel::force_model(&scenario)?;
    let params = scenario.harvester.lumped()?;
    let result = run_simulation(
        &scenario.sim,
        &params,
        scenario.geometry.contact_limit,
        &force,
        &scenario.profile,
    )?;
    let thresholds = scenario.thresholds(&force)?;
    prepare(cfg, out)?;
    formats::write_timeseries(&out.join(TIMESERIES_FILE), &result.samples)?;
    formats::write_events(&out.join(EVENTS_FILE), &result.events)?;
    formats::write_json(
        &out.join(SUMMARY_FILE),
        &SimulateSummary::new(&scenario, &result, &thresholds),
    )?;
    if cfg.output.svg {
        formats::write_text(&out.join(TRACE_FILE), &formats::trace_svg(&result.samples))?;
    }
    Ok(())
}

pub fn thresholds(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<()> {
    let scenario = cfg.scenario(base_dir)?;
    let force = parallel::force_model(&scenario)?;
    let report = scenario.thresholds(&force)?;
    prepare(cfg, out)?;
    formats::write_json(
        &out.join(SUMMARY_FILE),
        &ThresholdsCommandSummary {
            command: "thresholds",
            backend: backend_name(&scenario),
            thresholds: ThresholdSummary::new(&report, &scenario),
            pyroelectric_reference: PyroReference::default(),
        },
    )
}

/// Force table on the configured grid with the configured backend.
pub fn force_table(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<()> {
    let scenario = cfg.scenario(base_dir)?;
    let table = parallel::build_force_table(&scenario, &scenario.backend)?;
    prepare(cfg, out)?;
    formats::write_force_table(&out.join(FORCE_TABLE_FILE), &table)?;
    let (x, t) = (table.x_grid(), table.t_grid());
    formats::write_json(
        &out.join(SUMMARY_FILE),
        &ForceTableSummary {
            command: "force-table",
            source: table.source().as_str(),
            x_points: x.len(),
            t_points: t.len(),
            x_range_m: [x[0], x[x.len() - 1]],
            t_range_c: [t[0], t[t.len() - 1]],
            antisymmetry_defect: table.antisymmetry_defect(),
        },
    )
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One row per grid point, last sweep axis varying fastest.
pub fn sweep(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<()> {
    let scenario = cfg.scenario(base_dir)?;
    let grid = cfg.sweep_grid();
    if grid.is_empty() {
        return Err(Error::invalid("/explorer/sweep", "no sweep axes configured"));
    }
    let rows = parallel::sweep(&scenario, &grid);
    prepare(cfg, out)?;

    let path = out.join(SWEEP_FILE);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| csv_io(&path, e))?;
    let mut header: Vec<String> = grid.iter().map(|(p, _)| p.name().to_string()).collect();
    header.extend(
        [
            "energy_j",
            "density_device_j_m3",
            "density_active_j_m3",
            "t_release_c",
            "t_capture_c",
            "hysteresis_c",
            "status",
            "diagnosis",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(|e| csv_io(&path, e))?;
    for r in &rows {
        let mut rec: Vec<String> = r.assignments.iter().map(|&(_, v)| fmt_f64(v)).collect();
        let th = r.thresholds.as_ref();
        rec.push(fmt_f64(r.energy_j));
        rec.push(fmt_f64(r.density_device_j_m3));
        rec.push(fmt_f64(r.density_active_j_m3));
        rec.push(opt_cell(th.and_then(|t| t.t_release)));
        rec.push(opt_cell(th.and_then(|t| t.t_capture)));
        rec.push(opt_cell(th.and_then(|t| t.hysteresis_width)));
        rec.push(r.status.label().to_string());
        rec.push(r.status.diagnosis().unwrap_or("").to_string());
        w.write_record(&rec).map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let count = |label: &str| rows.iter().filter(|r| r.status.label() == label).count();
    // first row wins ties, matching the order of the CSV
    let best = rows
        .iter()
        .filter(|r| r.status == PointStatus::Ok)
        .fold(None::<&DesignPoint>, |acc, r| match acc {
            Some(b) if b.energy_j >= r.energy_j => Some(b),
            _ => Some(r),
        });
    let pyro = match best {
        Some(b) => Some(PyroComparison::new(
            &apply(&scenario, &b.assignments)?,
            b.energy_j,
            "one thermal period after a one-period warm-up, best sweep row",
        )),
        None => None,
    };
    formats::write_json(
        &out.join(SUMMARY_FILE),
        &SweepSummary {
            command: "sweep",
            backend: backend_name(&scenario),
            rows: rows.len(),
            ok: count("ok"),
            no_snap: count("no-snap"),
            failed: count("failed"),
            best: best.map(|b| DesignSummary::new(b, &scenario)),
            pyroelectric: pyro,
        },
    )
}

fn apply(
    base: &Scenario,
    assignments: &[(DesignParameter, f64)],
) -> Result<Scenario> {
    let mut s = base.clone();
    for &(p, v) in assignments {
        s = s.with(p, v)?;
    }
    Ok(s)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Evaluation log plus the best design. The best point is evaluated once
/// more to report its thresholds and energy densities.
pub fn optimize(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<()> {
    let scenario = cfg.scenario(base_dir)?;
    let vars = cfg.optimize_variables()?;
    if vars.is_empty() {
        return Err(Error::invalid("/explorer/optimize/variables", "no variables configured"));
    }
    let opts = cfg.optimize_options();
    let result = parallel::optimize(&scenario, &vars, cfg.explorer.optimize.seed.as_deref(), &opts)?;
    prepare(cfg, out)?;

    let path = out.join(OPTIMIZE_LOG_FILE);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| csv_io(&path, e))?;
    let mut header = vec!["evaluation".to_string(), "restart".to_string()];
    header.extend(vars.iter().map(|(p, _)| p.name().to_string()));
    header.extend(["energy_j", "feasible", "diagnosis"].map(String::from));
    w.write_record(&header).map_err(|e| csv_io(&path, e))?;
    for (i, e) in result.log.iter().enumerate() {
        let mut rec = vec![i.to_string(), e.restart.to_string()];
        rec.extend(e.point.iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(e.score.value));
        rec.push(e.score.feasible.to_string());
        rec.push(e.score.diagnosis.clone().unwrap_or_default());
        w.write_record(&rec).map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let assignments: Vec<_> = vars
        .iter()
        .map(|v| v.0)
        .zip(result.best.point.iter().copied())
        .collect();
    let best = evaluate_design_point(&scenario, &assignments);
    let best_scenario = apply(&scenario, &assignments)?;
    formats::write_json(
        &out.join(SUMMARY_FILE),
        &OptimizeSummary {
            command: "optimize",
            backend: backend_name(&scenario),
            evaluations: result.log.len(),
            restarts: result.restarts,
            best_restart: result.best.restart,
            best: DesignSummary::new(&best, &scenario),
            pyroelectric: PyroComparison::new(
                &best_scenario,
                best.energy_j,
                "one thermal period after a one-period warm-up, best design",
            ),
        },
    )
}

/// Redraw `trace.svg` from an existing time series.
pub fn plot(input: &Path, out: &Path) -> Result<()> {
    let samples = formats::read_timeseries(input)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    formats::write_text(&out.join(TRACE_FILE), &formats::trace_svg(&samples))
}

