//! Static thresholds, harvested energy per thermal cycle, parameter sweeps
//! and a bounded multi-start Nelder–Mead search.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{Event, SimConfig, Simulator};
use crate::harvester::{derive_lumped, BimorphConfig, LumpedParams};
use crate::magnetics::{
    linspace, AnalyticForceModel, ForceBackend, ForceModel, ForceTable, ForceTableBuilder,
    MagnetSpec, SheetPairGeometry,
};
use crate::materials::ThermoMagneticMaterial;
use crate::thermal::ThermalProfile;
use crate::{Error, Result};

/// Bisection stops once the bracket is narrower than this, °C.
pub const THRESHOLD_TOLERANCE: f64 = 1e-4;
/// Finite-difference step for the centre stiffness, m.
pub const STIFFNESS_STEP: f64 = 1e-6;

/// Pyroelectric comparison: 1 μW·cm⁻³ sustained over a 20 s, 10 °C swing.
pub const PYRO_POWER_DENSITY_W_M3: f64 = 1.0;
pub const PYRO_PERIOD_S: f64 = 20.0;
pub const PYRO_SWING_C: f64 = 10.0;
pub const PYRO_ENERGY_DENSITY_J_M3: f64 = PYRO_POWER_DENSITY_W_M3 * PYRO_PERIOD_S;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    /// Heating threshold at which the stuck tip lets go, °C.
    pub t_release: Option<f64>,
    /// Cooling threshold at which the centre turns unstable, °C.
    pub t_capture: Option<f64>,
    pub hysteresis_width: Option<f64>,
    pub bistable: bool,
}

/// `F(x_c, T) − k·x_c`; positive while a stuck tip holds.
pub fn hold_residual(force: &dyn ForceModel, k: f64, contact_limit: f64, temp: f64) -> Result<f64> {
    Ok(force.force(contact_limit, temp)? - k * contact_limit)
}

/// `∂F/∂x(0, T) − k`; positive while the centre is unstable.
pub fn centre_stiffness_residual(force: &dyn ForceModel, k: f64, temp: f64) -> Result<f64> {
    let h = STIFFNESS_STEP;
    let slope = (force.force(h, temp)? - force.force(-h, temp)?) / (2.0 * h);
    Ok(slope - k)
}

/// Root of a function that decreases in `T`, or `None` when it keeps one
/// sign across `[lo, hi]`.
fn bisect_decreasing(lo: f64, hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let (mut a, mut b) = (lo, hi);
    if !(f(a)? > 0.0) || !(f(b)? <= 0.0) {
        return Ok(None);
    }
    while b - a > THRESHOLD_TOLERANCE {
        let m = 0.5 * (a + b);
        if f(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

pub fn find_release_temperature(
    force: &dyn ForceModel,
    k: f64,
    contact_limit: f64,
    band: (f64, f64),
) -> Result<Option<f64>> {
    bisect_decreasing(band.0, band.1, |t| hold_residual(force, k, contact_limit, t))
}

pub fn find_capture_temperature(
    force: &dyn ForceModel,
    k: f64,
    band: (f64, f64),
) -> Result<Option<f64>> {
    bisect_decreasing(band.0, band.1, |t| centre_stiffness_residual(force, k, t))
}

pub fn thresholds(
    force: &dyn ForceModel,
    k: f64,
    contact_limit: f64,
    band: (f64, f64),
) -> Result<ThresholdReport> {
    let t_release = find_release_temperature(force, k, contact_limit, band)?;
    let t_capture = find_capture_temperature(force, k, band)?;
    let hysteresis_width = match (t_release, t_capture) {
        (Some(r), Some(c)) => Some(r - c),
        _ => None,
    };
    Ok(ThresholdReport {
        t_release,
        t_capture,
        hysteresis_width,
        bistable: hysteresis_width.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HarvesterModel {
    /// Lumped parameters given directly, with enough beam data to rescale
    /// them and to size the device.
    Lumped {
        params: LumpedParams,
        beam_length: f64,
        beam_width: f64,
        /// Part of `m_eff` carried at the tip, kg.
        tip_mass: f64,
        /// Piezoelectric volume, m³.
        active_volume: f64,
    },
    Bimorph(BimorphConfig),
}

impl Default for HarvesterModel {
    fn default() -> Self {
        let b = BimorphConfig::default();
        HarvesterModel::Lumped {
            params: LumpedParams::default(),
            beam_length: b.length,
            beam_width: b.width,
            tip_mass: b.tip_mass,
            active_volume: b.active_volume(),
        }
    }
}

impl HarvesterModel {
    pub fn lumped(&self) -> Result<LumpedParams> {
        match self {
            HarvesterModel::Lumped { params, .. } => {
                params.validate()?;
                Ok(*params)
            }
            HarvesterModel::Bimorph(b) => derive_lumped(b),
        }
    }

    pub fn beam_length(&self) -> f64 {
        match self {
            HarvesterModel::Lumped { beam_length, .. } => *beam_length,
            HarvesterModel::Bimorph(b) => b.length,
        }
    }

    pub fn beam_width(&self) -> f64 {
        match self {
            HarvesterModel::Lumped { beam_width, .. } => *beam_width,
            HarvesterModel::Bimorph(b) => b.width,
        }
    }

    pub fn active_volume(&self) -> f64 {
        match self {
            HarvesterModel::Lumped { active_volume, .. } => *active_volume,
            HarvesterModel::Bimorph(b) => b.active_volume(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let HarvesterModel::Lumped {
            params,
            beam_length,
            beam_width,
            tip_mass,
            active_volume,
        } = self
        {
            for (name, v) in [
                ("beam_length", *beam_length),
                ("beam_width", *beam_width),
                ("active_volume", *active_volume),
            ] {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be finite and > 0")));
                }
            }
            if !(*tip_mass > 0.0 && *tip_mass < params.m_eff) {
                return Err(Error::invalid("tip_mass must lie in (0, m_eff)"));
            }
        }
        self.lumped().map(|_| ())
    }
}

/// Nodes of the cached force table used by the moment backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableGrid {
    pub x_points: usize,
    pub t_points: usize,
}

impl Default for TableGrid {
    fn default() -> Self {
        TableGrid {
            x_points: 81,
            t_points: 61,
        }
    }
}

/// Everything needed to evaluate one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub material: ThermoMagneticMaterial,
    pub magnet: MagnetSpec,
    /// Magnet density, kg/m³, used when the magnet volume changes.
    pub magnet_density: f64,
    pub geometry: SheetPairGeometry,
    pub harvester: HarvesterModel,
    pub profile: ThermalProfile,
    pub sim: SimConfig,
    pub backend: ForceBackend,
    pub table: TableGrid,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            material: ThermoMagneticMaterial::default(),
            magnet: MagnetSpec::default(),
            magnet_density: 7500.0,
            geometry: SheetPairGeometry::default(),
            harvester: HarvesterModel::default(),
            profile: ThermalProfile::default(),
            sim: SimConfig::default(),
            backend: ForceBackend::Analytic,
            table: TableGrid::default(),
        }
    }
}

/// Force model resolved from a scenario's backend.
#[derive(Debug, Clone)]
pub enum ScenarioForce {
    Analytic(AnalyticForceModel),
    Table(ForceTable),
}

impl ForceModel for ScenarioForce {
    fn force(&self, x: f64, temp: f64) -> Result<f64> {
        match self {
            ScenarioForce::Analytic(m) => m.force(x, temp),
            ScenarioForce::Table(t) => t.force(x, temp),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.magnet.validate()?;
        self.geometry.validate()?;
        self.harvester.validate()?;
        self.profile.validate()?;
        self.sim.validate()?;
        if !(self.magnet_density > 0.0) || !self.magnet_density.is_finite() {
            return Err(Error::invalid("magnet_density must be finite and > 0"));
        }
        if self.table.x_points < 2 || self.table.t_points < 2 {
            return Err(Error::invalid("force table needs at least 2 nodes per axis"));
        }
        Ok(())
    }

    /// Temperature interval searched for thresholds and covered by the
    /// force table: the profile band and the Curie point, widened 10 °C
    /// below and 1 °C above.
    pub fn threshold_band(&self) -> (f64, f64) {
        let (lo, hi) = self.profile.band();
        let tc = self.material.curie_temp;
        (lo.min(tc) - 10.0, hi.max(tc) + 1.0)
    }

    /// Temperature nodes of the force table, with the Curie point added.
    pub fn table_temperatures(&self) -> Vec<f64> {
        let (lo, hi) = self.threshold_band();
        let mut t = linspace(lo, hi, self.table.t_points);
        let tc = self.material.curie_temp;
        if !t.contains(&tc) {
            let i = t.partition_point(|&v| v < tc);
            t.insert(i, tc);
        }
        t
    }

    pub fn table_builder(&self, backend: &ForceBackend) -> Result<ForceTableBuilder> {
        let xc = self.geometry.contact_limit;
        ForceTableBuilder::new(
            backend,
            linspace(-xc, xc, self.table.x_points),
            self.table_temperatures(),
            &self.geometry,
            &self.magnet,
            &self.material,
        )
    }

    /// Direct analytic model, or a sequentially built moment-method table.
    pub fn force_model(&self) -> Result<ScenarioForce> {
        match self.backend {
            ForceBackend::Analytic => Ok(ScenarioForce::Analytic(AnalyticForceModel::new(
                self.geometry,
                self.magnet,
                self.material,
            )?)),
            ForceBackend::Moment(_) => {
                let b = self.table_builder(&self.backend)?;
                let rows = (0..b.rows()).map(|j| b.row(j)).collect::<Result<Vec<_>>>()?;
                Ok(ScenarioForce::Table(b.finish(rows)?))
            }
        }
    }

    /// Box enclosing both sheets and the beam: `2(g + t)` across the gap,
    /// the wider of sheet and beam, and the beam length plus half a sheet.
    pub fn device_volume(&self) -> f64 {
        let g = &self.geometry;
        let across = 2.0 * (g.half_gap + g.sheet_thickness);
        let wide = g.sheet_width.max(self.harvester.beam_width());
        let long = self.harvester.beam_length() + 0.5 * g.sheet_height;
        across * wide * long
    }

    pub fn thresholds(&self, force: &dyn ForceModel) -> Result<ThresholdReport> {
        let p = self.harvester.lumped()?;
        thresholds(force, p.k, self.geometry.contact_limit, self.threshold_band())
    }

    pub fn get(&self, param: DesignParameter) -> f64 {
        match param {
            DesignParameter::HalfGap => self.geometry.half_gap,
            DesignParameter::BeamLength => self.harvester.beam_length(),
            DesignParameter::MagnetVolume => self.magnet.volume,
            DesignParameter::LoadResistance => match &self.harvester {
                HarvesterModel::Lumped { params, .. } => params.load_resistance,
                HarvesterModel::Bimorph(b) => b.load_resistance,
            },
        }
    }

    /// Copy with one design parameter changed.
    ///
    /// Changing the half gap keeps the magnet-to-sheet standoff `g − x_c`.
    /// Changing the beam length rescales the lumped parameters. Changing
    /// the magnet volume moves its mass into the tip mass at fixed damping
    /// ratio.
    pub fn with(&self, param: DesignParameter, value: f64) -> Result<Scenario> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::invalid(format!("{} must be finite and > 0", param.name())));
        }
        let mut s = self.clone();
        match param {
            DesignParameter::HalfGap => {
                let standoff = s.geometry.half_gap - s.geometry.contact_limit;
                s.geometry.half_gap = value;
                s.geometry.contact_limit = value - standoff;
            }
            DesignParameter::BeamLength => match &mut s.harvester {
                HarvesterModel::Lumped {
                    params,
                    beam_length,
                    tip_mass,
                    active_volume,
                    ..
                } => {
                    *params = params.rescaled_length(*tip_mass, *beam_length, value)?;
                    *active_volume *= value / *beam_length;
                    *beam_length = value;
                }
                HarvesterModel::Bimorph(b) => b.length = value,
            },
            DesignParameter::MagnetVolume => {
                let dm = s.magnet_density * (value - s.magnet.volume);
                s.magnet.volume = value;
                match &mut s.harvester {
                    HarvesterModel::Lumped {
                        params, tip_mass, ..
                    } => {
                        let zeta = params.damping_ratio();
                        *tip_mass += dm;
                        *params = LumpedParams::from_damping_ratio(
                            params.m_eff + dm,
                            params.k,
                            zeta,
                            params.theta,
                            params.c_p,
                            params.load_resistance,
                        )?;
                    }
                    HarvesterModel::Bimorph(b) => b.tip_mass += dm,
                }
            }
            DesignParameter::LoadResistance => match &mut s.harvester {
                HarvesterModel::Lumped { params, .. } => params.load_resistance = value,
                HarvesterModel::Bimorph(b) => b.load_resistance = value,
            },
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleStatus {
    Ok,
    /// No snap-through: either statics rule out bistability or the
    /// measured period saw no contact events.
    NoSnap,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Ok => "ok",
            CycleStatus::NoSnap => "no-snap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleEnergy {
    pub status: CycleStatus,
    pub diagnosis: Option<String>,
    /// `∫v²/R dt` over the measured period, J.
    pub energy_j: f64,
    pub device_volume_m3: f64,
    pub active_volume_m3: f64,
    pub density_device_j_m3: f64,
    pub density_active_j_m3: f64,
    /// Device-volume density over [`PYRO_ENERGY_DENSITY_J_M3`].
    pub pyro_ratio_device: f64,
    pub pyro_ratio_active: f64,
    pub thresholds: ThresholdReport,
    /// Start and end of the measured period, s.
    pub window: (f64, f64),
    pub events: Vec<Event>,
}

/// Harvested energy over one thermal period after one warm-up period.
///
/// A table profile is not periodic; it is measured once over its span,
/// which must start at `t = 0`.
pub fn energy_per_cycle(scenario: &Scenario, force: &dyn ForceModel) -> Result<CycleEnergy> {
    scenario.validate()?;
    let params = scenario.harvester.lumped()?;
    let th = scenario.thresholds(force)?;
    let device = scenario.device_volume();
    let active = scenario.harvester.active_volume();
    let window = match &scenario.profile {
        ThermalProfile::Table { samples } => {
            if samples[0].0 != 0.0 {
                return Err(Error::invalid("temperature table must start at t = 0"));
            }
            (0.0, samples[samples.len() - 1].0)
        }
        p => (p.period(), 2.0 * p.period()),
    };
    let mut out = CycleEnergy {
        status: CycleStatus::NoSnap,
        diagnosis: None,
        energy_j: 0.0,
        device_volume_m3: device,
        active_volume_m3: active,
        density_device_j_m3: 0.0,
        density_active_j_m3: 0.0,
        pyro_ratio_device: 0.0,
        pyro_ratio_active: 0.0,
        thresholds: th,
        window,
        events: Vec::new(),
    };
    if !th.bistable {
        out.diagnosis = Some(match (th.t_release, th.t_capture) {
            (None, _) => "no release threshold in the search band".to_string(),
            _ => "centre never loses stability in the search band".to_string(),
        });
        return Ok(out);
    }
    let mut sim = Simulator::new(
        &scenario.sim,
        &params,
        scenario.geometry.contact_limit,
        force,
        &scenario.profile,
    )?;
    sim.advance_to(window.0)?;
    let before = sim.ledger().energy_harvested;
    let first_event = sim.events().len();
    sim.advance_to(window.1)?;
    let energy = sim.ledger().energy_harvested - before;
    out.events = sim.events()[first_event..].to_vec();
    out.energy_j = energy;
    out.density_device_j_m3 = energy / device;
    out.density_active_j_m3 = energy / active;
    out.pyro_ratio_device = out.density_device_j_m3 / PYRO_ENERGY_DENSITY_J_M3;
    out.pyro_ratio_active = out.density_active_j_m3 / PYRO_ENERGY_DENSITY_J_M3;
    if out.events.is_empty() {
        out.diagnosis = Some("no contact events in the measured period".to_string());
    } else {
        out.status = CycleStatus::Ok;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignParameter {
    HalfGap,
    BeamLength,
    MagnetVolume,
    LoadResistance,
}

impl DesignParameter {
    pub const ALL: [DesignParameter; 4] = [
        DesignParameter::HalfGap,
        DesignParameter::BeamLength,
        DesignParameter::MagnetVolume,
        DesignParameter::LoadResistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DesignParameter::HalfGap => "half_gap",
            DesignParameter::BeamLength => "beam_length",
            DesignParameter::MagnetVolume => "magnet_volume",
            DesignParameter::LoadResistance => "load_resistance",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok,
    NoSnap(String),
    Failed(String),
}

impl PointStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::NoSnap(_) => "no-snap",
            PointStatus::Failed(_) => "failed",
        }
    }

    pub fn diagnosis(&self) -> Option<&str> {
        match self {
            PointStatus::Ok => None,
            PointStatus::NoSnap(d) | PointStatus::Failed(d) => Some(d),
        }
    }
}

/// One evaluated design; also a sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub assignments: Vec<(DesignParameter, f64)>,
    pub energy_j: f64,
    pub density_device_j_m3: f64,
    pub density_active_j_m3: f64,
    pub thresholds: Option<ThresholdReport>,
    pub status: PointStatus,
}

/// Apply `assignments` to `base` and measure its energy per cycle.
/// Failures are reported in the status, never as an error.
pub fn evaluate_design_point(base: &Scenario, assignments: &[(DesignParameter, f64)]) -> DesignPoint {
    let failed = |msg: String| DesignPoint {
        assignments: assignments.to_vec(),
        energy_j: 0.0,
        density_device_j_m3: 0.0,
        density_active_j_m3: 0.0,
        thresholds: None,
        status: PointStatus::Failed(msg),
    };
    let mut s = base.clone();
    for &(p, v) in assignments {
        s = match s.with(p, v) {
            Ok(s) => s,
            Err(e) => return failed(e.to_string()),
        };
    }
    let run = s.force_model().and_then(|f| energy_per_cycle(&s, &f));
    match run {
        Ok(c) => DesignPoint {
            assignments: assignments.to_vec(),
            energy_j: c.energy_j.max(0.0),
            density_device_j_m3: c.density_device_j_m3.max(0.0),
            density_active_j_m3: c.density_active_j_m3.max(0.0),
            thresholds: Some(c.thresholds),
            status: match c.status {
                CycleStatus::Ok => PointStatus::Ok,
                CycleStatus::NoSnap => PointStatus::NoSnap(c.diagnosis.unwrap_or_default()),
            },
        },
        Err(e) => failed(e.to_string()),
    }
}

/// Cartesian product of a parameter grid, last parameter fastest.
pub fn grid_points(grid: &[(DesignParameter, Vec<f64>)]) -> Vec<Vec<(DesignParameter, f64)>> {
    let mut out: Vec<Vec<(DesignParameter, f64)>> = vec![Vec::new()];
    for (p, values) in grid {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut row = prefix.clone();
                    row.push((*p, v));
                    row
                })
            })
            .collect();
    }
    out
}

/// Sequential sweep; rows follow [`grid_points`] order.
pub fn sweep(base: &Scenario, grid: &[(DesignParameter, Vec<f64>)]) -> Vec<DesignPoint> {
    grid_points(grid)
        .iter()
        .map(|a| evaluate_design_point(base, a))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bound [{lo}, {hi}] must be finite with lo < hi")));
        }
        Ok(Bound { lo, hi })
    }

    fn to_unit(self, v: f64) -> f64 {
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn at_unit(self, u: f64) -> f64 {
        if u >= 1.0 {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * u
        }
    }
}

/// Objective value at one point. Infeasible points never win over feasible
/// ones; failed evaluations should use `−∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub value: f64,
    pub feasible: bool,
    pub diagnosis: Option<String>,
}

impl Score {
    pub fn feasible(value: f64) -> Self {
        Score {
            value,
            feasible: true,
            diagnosis: None,
        }
    }

    pub fn infeasible(value: f64, diagnosis: impl Into<String>) -> Self {
        Score {
            value,
            feasible: false,
            diagnosis: Some(diagnosis.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub score: Score,
    pub restart: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Total objective evaluations across all restarts.
    pub budget: usize,
    pub restarts: usize,
    /// Initial simplex edge as a fraction of each bound's width.
    pub initial_step: f64,
    /// A restart stops early once its simplex spans less than this
    /// fraction of the box on every axis.
    pub x_tolerance: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            budget: 60,
            restarts: 5,
            initial_step: 0.1,
            x_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartPlan {
    pub index: usize,
    pub start: Vec<f64>,
    pub budget: usize,
}

/// `i`-th element (from 1) of the van der Corput sequence in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Restart starts and budgets: the seed first, then Halton points of the
/// box. Each restart needs room for a simplex plus one step, so small
/// budgets get fewer restarts; leftover evaluations go to the first ones.
pub fn plan_restarts(seed: &[f64], bounds: &[Bound], opts: &OptimizeOptions) -> Result<Vec<RestartPlan>> {
    let d = bounds.len();
    if d == 0 || d > PRIMES.len() {
        return Err(Error::invalid(format!("optimizer supports 1 to {} variables", PRIMES.len())));
    }
    if seed.len() != d {
        return Err(Error::invalid("seed dimension does not match bounds"));
    }
    if opts.budget < d + 2 {
        return Err(Error::invalid(format!(
            "budget {} is below dimension + 2 = {}",
            opts.budget,
            d + 2
        )));
    }
    let n = opts.restarts.max(1).min(opts.budget / (d + 2));
    let share = opts.budget / n;
    let extra = opts.budget % n;
    Ok((0..n)
        .map(|i| RestartPlan {
            index: i,
            start: if i == 0 {
                seed.iter().zip(bounds).map(|(&v, b)| v.clamp(b.lo, b.hi)).collect()
            } else {
                bounds
                    .iter()
                    .zip(PRIMES)
                    .map(|(b, p)| b.at_unit(radical_inverse(i, p)))
                    .collect()
            },
            budget: share + usize::from(i < extra),
        })
        .collect())
}

/// One bounded Nelder–Mead run maximizing `f`. Work happens in unit box
/// coordinates and trial points are projected onto the box.
pub fn run_restart(
    plan: &RestartPlan,
    bounds: &[Bound],
    opts: &OptimizeOptions,
    f: &mut dyn FnMut(&[f64]) -> Score,
) -> Vec<Evaluation> {
    let d = bounds.len();
    let mut log = Vec::with_capacity(plan.budget);
    let mut eval = |u: &[f64], log: &mut Vec<Evaluation>| -> f64 {
        let x: Vec<f64> = u.iter().zip(bounds).map(|(&u, b)| b.at_unit(u)).collect();
        let score = f(&x);
        // minimize the negated objective; infeasible points rank last
        let cost = if score.feasible { -score.value } else { f64::INFINITY };
        log.push(Evaluation {
            point: x,
            score,
            restart: plan.index,
        });
        cost
    };
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|u| u.clamp(0.0, 1.0)).collect() };

    let u0: Vec<f64> = plan.start.iter().zip(bounds).map(|(&v, b)| b.to_unit(v)).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let c0 = eval(&u0, &mut log);
    simplex.push((u0.clone(), c0));
    for i in 0..d {
        if log.len() >= plan.budget {
            break;
        }
        let mut u = u0.clone();
        u[i] = if u0[i] + opts.initial_step <= 1.0 {
            u0[i] + opts.initial_step
        } else {
            u0[i] - opts.initial_step
        };
        let c = eval(&u, &mut log);
        simplex.push((u, c));
    }
    if simplex.len() < d + 1 {
        return log;
    }

    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
    };
    loop {
        sort(&mut simplex);
        let spread = (0..d).fold(0.0f64, |m, j| {
            let (lo, hi) = simplex.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0[j]), hi.max(p.0[j]))
            });
            m.max(hi - lo)
        });
        if spread < opts.x_tolerance || plan.budget - log.len() < 2 {
            break;
        }
        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p.0[j]).sum::<f64>() / d as f64)
            .collect();
        let xr = clamp(combine(&centroid, &worst.0, -1.0));
        let cr = eval(&xr, &mut log);
        if cr < simplex[0].1 {
            let xe = clamp(combine(&centroid, &worst.0, -2.0));
            let ce = eval(&xe, &mut log);
            simplex[d] = if ce < cr { (xe, ce) } else { (xr, cr) };
            continue;
        }
        if cr < simplex[d - 1].1 {
            simplex[d] = (xr, cr);
            continue;
        }
        let (xc, cc) = if cr < worst.1 {
            let xc = combine(&centroid, &xr, 0.5);
            let cc = eval(&xc, &mut log);
            (xc, cc)
        } else {
            let xc = combine(&centroid, &worst.0, 0.5);
            let cc = eval(&xc, &mut log);
            (xc, cc)
        };
        if cc < worst.1.min(cr) {
            simplex[d] = (xc, cc);
            continue;
        }
        if plan.budget - log.len() < d {
            break;
        }
        let best = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            let u = combine(&best, &p.0, 0.5);
            let c = eval(&u, &mut log);
            *p = (u, c);
        }
    }
    log
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best: Evaluation,
    /// Every evaluation, grouped by restart in restart order.
    pub log: Vec<Evaluation>,
    pub restarts: usize,
}

/// Best feasible evaluation across restart logs; ties go to the earliest.
pub fn merge_restarts(logs: Vec<Vec<Evaluation>>) -> Result<OptimizeResult> {
    let restarts = logs.len();
    let log: Vec<Evaluation> = logs.into_iter().flatten().collect();
    let best = log
        .iter()
        .filter(|e| e.score.feasible)
        .fold(None::<&Evaluation>, |acc, e| match acc {
            Some(b) if b.score.value >= e.score.value => Some(b),
            _ => Some(e),
        })
        .cloned();
    match best {
        Some(best) => Ok(OptimizeResult {
            best,
            log,
            restarts,
        }),
        None => {
            let attempt = log
                .iter()
                .max_by(|a, b| a.score.value.total_cmp(&b.score.value))
                .and_then(|e| e.score.diagnosis.clone())
                .unwrap_or_else(|| "no evaluations".to_string());
            Err(Error::invalid(format!(
                "no feasible point among {} evaluations; best attempt: {attempt}",
                log.len()
            )))
        }
    }
}

/// Sequential multi-start maximization of `f` inside `bounds`.
pub fn optimize_objective(
    f: &mut dyn FnMut(&[f64]) -> Score,
    seed: &[f64],
    bounds: &[Bound],
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    let plans = plan_restarts(seed, bounds, opts)?;
    let logs = plans.iter().map(|p| run_restart(p, bounds, opts, f)).collect();
    merge_restarts(logs)
}

/// Energy per cycle as an optimizer score.
pub fn design_score(point: &DesignPoint) -> Score {
    match &point.status {
        PointStatus::Ok => Score::feasible(point.energy_j),
        PointStatus::NoSnap(d) => Score::infeasible(0.0, format!("no-snap: {d}")),
        PointStatus::Failed(d) => Score::infeasible(f64::NEG_INFINITY, format!("failed: {d}")),
    }
}

/// Boxed objective, as returned by [`design_objective`].
pub type Objective<'a> = Box<dyn FnMut(&[f64]) -> Score + 'a>;

/// Objective over the given design parameters of `base`.
pub fn design_objective<'a>(base: &'a Scenario, params: &'a [DesignParameter]) -> Objective<'a> {
    Box::new(move |x: &[f64]| {
        let a: Vec<(DesignParameter, f64)> = params.iter().copied().zip(x.iter().copied()).collect();
        design_score(&evaluate_design_point(base, &a))
    })
}

/// Maximize energy per cycle over `vars`, seeded at `seed` or at the base
/// scenario's own values.
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
    let mut f = design_objective(base, &params);
    optimize_objective(&mut *f, &start, &bounds, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::PermeabilityLaw;
    use proptest::prelude::*;

    fn baseline() -> (Scenario, ScenarioForce) {
        let s = Scenario::default();
        let f = s.force_model().unwrap();
        (s, f)
    }

    /// First scan node where a decreasing function turns non-positive.
    fn scan_root(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
        let n = ((hi - lo) / 1e-3).round() as usize;
        let mut prev = f(lo);
        for i in 1..=n {
            let t = lo + i as f64 * 1e-3;
            let v = f(t);
            if prev > 0.0 && v <= 0.0 {
                return Some(t - 5e-4);
            }
            prev = v;
        }
        None
    }

    #[test]
    fn baseline_thresholds_match_dense_scan() {
        let (s, f) = baseline();
        let k = s.harvester.lumped().unwrap().k;
        let band = s.threshold_band();
        let r = s.thresholds(&f).unwrap();
        let rel = r.t_release.unwrap();
        let cap = r.t_capture.unwrap();
        assert!(r.bistable && cap < rel && rel < 45.0);
        assert!(rel > 40.0 && rel < 45.0);
        let scan_rel = scan_root(band.0, band.1, |t| f.force(0.0085, t).unwrap() - k * 0.0085).unwrap();
        let scan_cap = scan_root(band.0, band.1, |t| {
            (f.force(1e-6, t).unwrap() - f.force(-1e-6, t).unwrap()) / 2e-6 - k
        })
        .unwrap();
        assert!((rel - scan_rel).abs() < 1e-3, "{rel} vs {scan_rel}");
        assert!((cap - scan_cap).abs() < 1e-3, "{cap} vs {scan_cap}");
    }

    #[test]
    fn release_falls_when_spring_stiffens() {
        let (s, f) = baseline();
        let k = s.harvester.lumped().unwrap().k;
        let band = s.threshold_band();
        let a = find_release_temperature(&f, k, 0.0085, band).unwrap().unwrap();
        let b = find_release_temperature(&f, 2.0 * k, 0.0085, band).unwrap();
        assert!(b.is_none_or(|b| b < a));
    }

    #[test]
    fn no_magnetism_means_no_thresholds() {
        let mut s = Scenario::default();
        s.material.mu_max = 1.0;
        s.material.law = PermeabilityLaw::Tanh;
        let f = s.force_model().unwrap();
        let r = s.thresholds(&f).unwrap();
        assert_eq!(r.t_capture, None);
        assert_eq!(r.t_release, None);
        assert!(!r.bistable);
        let c = energy_per_cycle(&s, &f).unwrap();
        assert_eq!((c.status, c.energy_j), (CycleStatus::NoSnap, 0.0));
    }

    #[test]
    fn residuals_are_negative_above_curie() {
        let (_, f) = baseline();
        for t in [45.0, 46.0, 60.0] {
            assert_eq!(hold_residual(&f, 70.0, 0.0085, t).unwrap(), -70.0 * 0.0085);
            assert_eq!(centre_stiffness_residual(&f, 70.0, t).unwrap(), -70.0);
        }
    }

    #[test]
    fn grid_order_is_row_major() {
        let g = [
            (DesignParameter::HalfGap, vec![1.0, 2.0]),
            (DesignParameter::LoadResistance, vec![3.0, 4.0, 5.0]),
        ];
        let pts = grid_points(&g);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![(DesignParameter::HalfGap, 1.0), (DesignParameter::LoadResistance, 4.0)]);
        assert_eq!(pts[3][0].1, 2.0);
    }

    #[test]
    fn half_gap_change_keeps_standoff() {
        let s = Scenario::default().with(DesignParameter::HalfGap, 0.012).unwrap();
        assert!((s.geometry.contact_limit - 0.0105).abs() < 1e-15);
        assert!(Scenario::default().with(DesignParameter::HalfGap, 0.001).is_err());
    }

    #[test]
    fn magnet_volume_moves_tip_mass() {
        let s = Scenario::default();
        let v = s.magnet.volume;
        let t = s.with(DesignParameter::MagnetVolume, 2.0 * v).unwrap();
        let (a, b) = (s.harvester.lumped().unwrap(), t.harvester.lumped().unwrap());
        assert!((b.m_eff - a.m_eff - 7500.0 * v).abs() < 1e-15);
        assert!((b.damping_ratio() - a.damping_ratio()).abs() < 1e-14);
    }

    #[test]
    fn halton_points_are_in_the_box() {
        let b = [Bound::new(-1.0, 1.0).unwrap(), Bound::new(10.0, 20.0).unwrap()];
        let plans = plan_restarts(&[0.0, 15.0], &b, &OptimizeOptions::default()).unwrap();
        assert_eq!(plans.len(), 5);
        assert_eq!(plans.iter().map(|p| p.budget).sum::<usize>(), 60);
        assert_eq!(plans[1].start[0], 0.0);
        assert!((plans[1].start[1] - (10.0 + 10.0 / 3.0)).abs() < 1e-12);
        for p in &plans {
            assert!(p.start.iter().zip(&b).all(|(v, b)| *v >= b.lo && *v <= b.hi));
        }
    }

    fn quadratic(p: &[f64]) -> Score {
        Score::feasible(-(p[0] - 0.3).powi(2) - (p[1] + 0.1).powi(2))
    }

    #[test]
    fn finds_quadratic_optimum() {
        let b = [Bound::new(-1.0, 1.0).unwrap(), Bound::new(-1.0, 1.0).unwrap()];
        let opts = OptimizeOptions {
            budget: 200,
            ..OptimizeOptions::default()
        };
        let r = optimize_objective(&mut quadratic, &[0.0, 0.0], &b, &opts).unwrap();
        assert!(r.log.len() <= 200);
        let p = &r.best.point;
        assert!((p[0] - 0.3).abs() < 1e-3 && (p[1] + 0.1).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn minimal_budget_evaluates_initial_simplex_only() {
        let b = [Bound::new(-1.0, 1.0).unwrap(), Bound::new(-1.0, 1.0).unwrap()];
        let opts = OptimizeOptions {
            budget: 4,
            ..OptimizeOptions::default()
        };
        let r = optimize_objective(&mut quadratic, &[0.0, 0.0], &b, &opts).unwrap();
        assert_eq!(r.log.len(), 3);
        assert_eq!(r.restarts, 1);
    }

    #[test]
    fn all_infeasible_is_an_error_with_diagnosis() {
        let b = [Bound::new(0.0, 1.0).unwrap()];
        let mut f = |_: &[f64]| Score::infeasible(0.0, "no-snap: flat");
        let e = optimize_objective(&mut f, &[0.5], &b, &OptimizeOptions::default()).unwrap_err();
        assert!(e.to_string().contains("no-snap: flat"));
    }

    #[test]
    fn infeasible_points_never_win() {
        let b = [Bound::new(0.0, 1.0).unwrap()];
        let mut f = |x: &[f64]| {
            if x[0] > 0.5 {
                Score::infeasible(10.0, "no-snap")
            } else {
                Score::feasible(x[0])
            }
        };
        let r = optimize_objective(&mut f, &[0.2], &b, &OptimizeOptions::default()).unwrap();
        assert!(r.best.score.feasible && r.best.point[0] <= 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn best_dominates_log(cx in -1.0f64..1.0, cy in -1.0f64..1.0, budget in 4usize..80) {
            let b = [Bound::new(-1.0, 1.0).unwrap(), Bound::new(-1.0, 1.0).unwrap()];
            let mut f = |p: &[f64]| Score::feasible(-(p[0] - cx).abs() - 2.0 * (p[1] - cy).powi(2));
            let opts = OptimizeOptions { budget, ..OptimizeOptions::default() };
            let r = optimize_objective(&mut f, &[0.0, 0.0], &b, &opts).unwrap();
            prop_assert!(r.log.len() <= budget);
            prop_assert!(r.log.iter().all(|e| e.score.value <= r.best.score.value));
            prop_assert!(r.log.iter().any(|e| e == &r.best));
        }
    }
}
