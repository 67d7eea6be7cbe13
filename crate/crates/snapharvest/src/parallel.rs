//! Rayon drivers. Each splits work that the core runs sequentially into
//! independent pieces and reassembles them in input order, so results are
//! identical to the sequential core functions for any thread count.

use rayon::prelude::*;
use snapharvest_core::explorer::{
    design_objective, evaluate_design_point, grid_points, merge_restarts, plan_restarts,
    run_restart, Bound, DesignParameter, DesignPoint, OptimizeOptions, OptimizeResult, Scenario,
    ScenarioForce,
};
use snapharvest_core::magnetics::{AnalyticForceModel, ForceBackend, ForceTable};
use snapharvest_core::Result;

/// Force table over the scenario's grid, one temperature row per task.
pub fn build_force_table(scenario: &Scenario, backend: &ForceBackend) -> Result<ForceTable> {
    let builder = scenario.table_builder(backend)?;
    let rows = (0..builder.rows())
        .into_par_iter()
        .map(|j| builder.row(j))
        .collect::<Result<Vec<_>>>()?;
    builder.finish(rows)
}

/// Same model as [`Scenario::force_model`], with the table built in parallel.
pub fn force_model(scenario: &Scenario) -> Result<ScenarioForce> {
    match scenario.backend {
        ForceBackend::Analytic => Ok(ScenarioForce::Analytic(AnalyticForceModel::new(
            scenario.geometry,
            scenario.magnet,
            scenario.material,
        )?)),
        ForceBackend::Moment(_) => Ok(ScenarioForce::Table(build_force_table(
            scenario,
            &scenario.backend,
        )?)),
    }
}

/// Sweep rows in [`grid_points`] order, one design point per task.
pub fn sweep(base: &Scenario, grid: &[(DesignParameter, Vec<f64>)]) -> Vec<DesignPoint> {
    grid_points(grid)
        .par_iter()
        .map(|a| evaluate_design_point(base, a))
        .collect()
}

/// Multi-start optimization with one restart per task.
pub fn optimize(
    base: &Scenario,
    vars: &[(DesignParameter, Bound)],
    seed: Option<&[f64]>,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    base.validate()?;
    let params: Vec<DesignParameter> = vars.iter().map(|v| v.0).collect();
    let bounds: Vec<Bound> = vars.iter().map(|v| v.1).collect();
    let start: Vec<f64> = match seed {
        Some(s) => s.to_vec(),
        None => params.iter().map(|&p| base.get(p)).collect(),
    };
    let plans = plan_restarts(&start, &bounds, opts)?;
    let logs = plans
        .par_iter()
        .map(|plan| {
            let mut f = design_objective(base, &params);
            run_restart(plan, &bounds, opts, &mut *f)
        })
        .collect();
    merge_restarts(logs)
}
