//! Shapes of the `summary.json` documents.

use std::collections::BTreeMap;

use serde::Serialize;
use snapharvest_core::engine::{energy_balance_residual, EventKind, SimResult};
use snapharvest_core::explorer::{
    DesignPoint, Scenario, ThresholdReport, PYRO_ENERGY_DENSITY_J_M3, PYRO_PERIOD_S,
    PYRO_POWER_DENSITY_W_M3, PYRO_SWING_C,
};

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub t_release_c: Option<f64>,
    pub t_capture_c: Option<f64>,
    pub hysteresis_width_c: Option<f64>,
    pub bistable: bool,
    pub curie_temp_c: f64,
    /// Temperature interval searched, °C.
    pub band_c: [f64; 2],
}

impl ThresholdSummary {
    pub fn new(report: &ThresholdReport, scenario: &Scenario) -> Self {
        let (lo, hi) = scenario.threshold_band();
        ThresholdSummary {
            t_release_c: report.t_release,
            t_capture_c: report.t_capture,
            hysteresis_width_c: report.hysteresis_width,
            bistable: report.bistable,
            curie_temp_c: scenario.material.curie_temp,
            band_c: [lo, hi],
        }
    }
}

/// Energy accounting of one run, J. The balance reads
/// `work_magnetic = (final_stored − initial_stored) + damped + harvested + impact_lost`.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerSummary {
    pub work_magnetic_j: f64,
    pub initial_stored_j: f64,
    pub final_kinetic_j: f64,
    pub final_spring_j: f64,
    pub final_electrical_j: f64,
    pub damped_j: f64,
    pub harvested_j: f64,
    pub impact_lost_j: f64,
    /// Relative imbalance of the equation above.
    pub residual: f64,
}

impl LedgerSummary {
    pub fn new(result: &SimResult) -> Self {
        let l = &result.ledger;
        LedgerSummary {
            work_magnetic_j: l.work_magnetic,
            initial_stored_j: result.initial_energy.total(),
            final_kinetic_j: l.energy_kinetic,
            final_spring_j: l.energy_spring,
            final_electrical_j: l.energy_electrical_stored,
            damped_j: l.energy_damped,
            harvested_j: l.energy_harvested,
            impact_lost_j: l.energy_impact_lost,
            residual: energy_balance_residual(result),
        }
    }
}

/// The pyroelectric figure used as a yardstick: 1 μW/cm³ over a 10 °C,
/// 20 s swing.
#[derive(Debug, Clone, Serialize)]
pub struct PyroReference {
    pub power_density_uw_cm3: f64,
    pub power_density_w_m3: f64,
    pub swing_c: f64,
    pub period_s: f64,
    pub energy_density_j_m3: f64,
}

impl Default for PyroReference {
    fn default() -> Self {
        PyroReference {
            // 1 W/m³ = 1 μW/cm³
            power_density_uw_cm3: PYRO_POWER_DENSITY_W_M3,
            power_density_w_m3: PYRO_POWER_DENSITY_W_M3,
            swing_c: PYRO_SWING_C,
            period_s: PYRO_PERIOD_S,
            energy_density_j_m3: PYRO_ENERGY_DENSITY_J_M3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PyroComparison {
    pub reference: PyroReference,
    /// Harvested energy per thermal period compared against the reference, J.
    pub energy_per_period_j: f64,
    pub energy_basis: &'static str,
    pub device_volume_m3: f64,
    pub active_volume_m3: f64,
    pub density_device_j_m3: f64,
    pub density_active_j_m3: f64,
    pub ratio_device: f64,
    pub ratio_active: f64,
    pub volume_note: &'static str,
}

const VOLUME_NOTE: &str = "device volume is the bounding box of both sheets and the beam; \
active volume is the piezoelectric material only";

impl PyroComparison {
    pub fn new(scenario: &Scenario, energy_per_period_j: f64, energy_basis: &'static str) -> Self {
        let device = scenario.device_volume();
        let active = scenario.harvester.active_volume();
        let dd = energy_per_period_j / device;
        let da = energy_per_period_j / active;
        PyroComparison {
            reference: PyroReference::default(),
            energy_per_period_j,
            energy_basis,
            device_volume_m3: device,
            active_volume_m3: active,
            density_device_j_m3: dd,
            density_active_j_m3: da,
            ratio_device: dd / PYRO_ENERGY_DENSITY_J_M3,
            ratio_active: da / PYRO_ENERGY_DENSITY_J_M3,
            volume_note: VOLUME_NOTE,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventCounts {
    pub release: usize,
    pub stick: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub command: &'static str,
    pub backend: &'static str,
    pub dt_s: f64,
    pub t_end_s: f64,
    pub steps: u64,
    pub samples: usize,
    pub events: EventCounts,
    pub ledger: LedgerSummary,
    pub thresholds: ThresholdSummary,
    pub pyroelectric: PyroComparison,
}

impl SimulateSummary {
    pub fn new(scenario: &Scenario, result: &SimResult, thresholds: &ThresholdReport) -> Self {
        let steps = match result.termination {
            snapharvest_core::engine::Termination::Completed { steps } => steps,
        };
        let count = |k: EventKind| result.events.iter().filter(|e| e.kind == k).count();
        let periods = scenario.sim.t_end / scenario.profile.period();
        SimulateSummary {
            command: "simulate",
            backend: scenario.backend.source().as_str(),
            dt_s: scenario.sim.dt,
            t_end_s: scenario.sim.t_end,
            steps,
            samples: result.samples.len(),
            events: EventCounts {
                release: count(EventKind::Release),
                stick: count(EventKind::Stick),
            },
            ledger: LedgerSummary::new(result),
            thresholds: ThresholdSummary::new(thresholds, scenario),
            pyroelectric: PyroComparison::new(
                scenario,
                result.ledger.energy_harvested / periods,
                "harvested energy of the run divided by the number of thermal periods simulated",
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdsCommandSummary {
    pub command: &'static str,
    pub backend: &'static str,
    pub thresholds: ThresholdSummary,
    pub pyroelectric_reference: PyroReference,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForceTableSummary {
    pub command: &'static str,
    pub source: &'static str,
    pub x_points: usize,
    pub t_points: usize,
    pub x_range_m: [f64; 2],
    pub t_range_c: [f64; 2],
    pub antisymmetry_defect: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSummary {
    pub parameters: BTreeMap<&'static str, f64>,
    pub energy_j: f64,
    pub status: &'static str,
    pub diagnosis: Option<String>,
    pub thresholds: Option<ThresholdSummary>,
}

impl DesignSummary {
    pub fn new(point: &DesignPoint, scenario: &Scenario) -> Self {
        DesignSummary {
            parameters: point.assignments.iter().map(|&(p, v)| (p.name(), v)).collect(),
            energy_j: point.energy_j,
            status: point.status.label(),
            diagnosis: point.status.diagnosis().map(str::to_string),
            thresholds: point.thresholds.as_ref().map(|t| ThresholdSummary::new(t, scenario)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub command: &'static str,
    pub backend: &'static str,
    pub rows: usize,
    pub ok: usize,
    pub no_snap: usize,
    pub failed: usize,
    pub best: Option<DesignSummary>,
    pub pyroelectric: Option<PyroComparison>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub command: &'static str,
    pub backend: &'static str,
    pub evaluations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub best: DesignSummary,
    pub pyroelectric: PyroComparison,
}
