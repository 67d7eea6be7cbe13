//! JSON run configuration.
//!
//! Every field is optional and falls back to the baseline device; unknown
//! keys are rejected. Validation errors carry a JSON pointer to the
//! offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snapharvest_core::engine::{InitialCondition, SimConfig};
use snapharvest_core::explorer::{
    Bound, DesignParameter, HarvesterModel, OptimizeOptions, Scenario, TableGrid,
};
use snapharvest_core::harvester::{BimorphConfig, LumpedParams, Side, Wiring};
use snapharvest_core::magnetics::{ForceBackend, MagnetSpec, SheetPairGeometry};
use snapharvest_core::materials::{PermeabilityLaw, ThermoMagneticMaterial};
use snapharvest_core::moment::MeshDensity;
use snapharvest_core::thermal::ThermalProfile;

use crate::error::{Error, Result};
use crate::formats;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub material: MaterialConfig,
    pub magnet: MagnetConfig,
    pub geometry: GeometryConfig,
    pub harvester: HarvesterConfig,
    pub thermal: ThermalConfig,
    pub sim: SimSection,
    pub force: ForceConfig,
    pub explorer: ExplorerConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    #[default]
    Tanh,
    LinearRamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub curie_temp_c: f64,
    pub mu_max: f64,
    pub transition_scale_c: f64,
    pub law: LawName,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = ThermoMagneticMaterial::default();
        MaterialConfig {
            curie_temp_c: m.curie_temp,
            mu_max: m.mu_max,
            transition_scale_c: m.transition_scale,
            law: LawName::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagnetConfig {
    pub remanence_t: f64,
    pub volume_m3: f64,
    pub density_kg_m3: f64,
}

impl Default for MagnetConfig {
    fn default() -> Self {
        let m = MagnetSpec::default();
        MagnetConfig {
            remanence_t: m.remanence,
            volume_m3: m.volume,
            density_kg_m3: Scenario::default().magnet_density,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub half_gap_m: f64,
    pub contact_limit_m: f64,
    pub sheet_width_m: f64,
    pub sheet_height_m: f64,
    pub sheet_thickness_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = SheetPairGeometry::default();
        GeometryConfig {
            half_gap_m: g.half_gap,
            contact_limit_m: g.contact_limit,
            sheet_width_m: g.sheet_width,
            sheet_height_m: g.sheet_height,
            sheet_thickness_m: g.sheet_thickness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarvesterKind {
    #[default]
    Lumped,
    Bimorph,
}

/// Both parameter sets are kept; `model` picks the one in use.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarvesterConfig {
    pub model: HarvesterKind,
    pub lumped: LumpedConfig,
    pub bimorph: BimorphSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LumpedConfig {
    pub m_eff_kg: f64,
    pub k_n_m: f64,
    pub damping_ratio: f64,
    pub theta_n_v: f64,
    pub c_p_f: f64,
    pub load_resistance_ohm: f64,
    pub beam_length_m: f64,
    pub beam_width_m: f64,
    pub tip_mass_kg: f64,
    pub active_volume_m3: f64,
}

impl Default for LumpedConfig {
    fn default() -> Self {
        match HarvesterModel::default() {
            HarvesterModel::Lumped {
                params,
                beam_length,
                beam_width,
                tip_mass,
                active_volume,
            } => LumpedConfig {
                m_eff_kg: params.m_eff,
                k_n_m: params.k,
                damping_ratio: params.damping_ratio(),
                theta_n_v: params.theta,
                c_p_f: params.c_p,
                load_resistance_ohm: params.load_resistance,
                beam_length_m: beam_length,
                beam_width_m: beam_width,
                tip_mass_kg: tip_mass,
                active_volume_m3: active_volume,
            },
            HarvesterModel::Bimorph(_) => unreachable!("default harvester is lumped"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WiringName {
    #[default]
    Series,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BimorphSection {
    pub length_m: f64,
    pub width_m: f64,
    pub piezo_layer_thickness_m: f64,
    pub shim_thickness_m: f64,
    pub piezo_modulus_pa: f64,
    pub shim_modulus_pa: f64,
    pub piezo_d31_m_v: f64,
    pub piezo_permittivity_f_m: f64,
    pub piezo_density_kg_m3: f64,
    pub shim_density_kg_m3: f64,
    pub wiring: WiringName,
    pub damping_ratio: f64,
    pub tip_mass_kg: f64,
    pub load_resistance_ohm: f64,
}

impl Default for BimorphSection {
    fn default() -> Self {
        let b = BimorphConfig::default();
        BimorphSection {
            length_m: b.length,
            width_m: b.width,
            piezo_layer_thickness_m: b.piezo_layer_thickness,
            shim_thickness_m: b.shim_thickness,
            piezo_modulus_pa: b.piezo_modulus,
            shim_modulus_pa: b.shim_modulus,
            piezo_d31_m_v: b.piezo_d31,
            piezo_permittivity_f_m: b.piezo_permittivity,
            piezo_density_kg_m3: b.piezo_density,
            shim_density_kg_m3: b.shim_density,
            wiring: WiringName::Series,
            damping_ratio: b.damping_ratio,
            tip_mass_kg: b.tip_mass,
            load_resistance_ohm: b.load_resistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    Triangle,
    Sine,
    Table,
}

/// Triangle uses `rate_c_s`, sine uses `period_s`. A table profile takes
/// either inline `table_samples` or a two-column CSV at `table_path`
/// (relative paths resolve against the config file's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    pub profile: ProfileKind,
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub rate_c_s: f64,
    pub period_s: f64,
    pub phase_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_samples: Option<Vec<[f64; 2]>>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            profile: ProfileKind::Triangle,
            t_min_c: 40.0,
            t_max_c: 50.0,
            rate_c_s: 0.1,
            period_s: 200.0,
            phase_s: 0.0,
            table_path: None,
            table_samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    #[default]
    StuckTop,
    StuckBottom,
    Free,
}

/// `x_m`, `xdot_m_s` and `v_volt` are only read in `free` mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub mode: InitialMode,
    pub x_m: f64,
    pub xdot_m_s: f64,
    pub v_volt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt_s: f64,
    pub t_end_s: f64,
    pub event_tolerance_s: f64,
    pub decimation: usize,
    pub coupling: bool,
    pub initial: InitialSection,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        SimSection {
            dt_s: s.dt,
            t_end_s: s.t_end,
            event_tolerance_s: s.event_tolerance,
            decimation: s.decimation,
            coupling: s.coupling,
            initial: InitialSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    #[default]
    Analytic,
    Moment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub width: usize,
    pub height: usize,
    pub thickness: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let m = MeshDensity::default();
        MeshConfig {
            width: m.width,
            height: m.height,
            thickness: m.thickness,
        }
    }
}

/// Force backend plus the mesh and table grid used by the moment method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForceConfig {
    pub backend: BackendName,
    pub mesh: MeshConfig,
    pub table_x_points: usize,
    pub table_t_points: usize,
}

impl Default for ForceConfig {
    fn default() -> Self {
        let t = TableGrid::default();
        ForceConfig {
            backend: BackendName::Analytic,
            mesh: MeshConfig::default(),
            table_x_points: t.x_points,
            table_t_points: t.t_points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterName {
    HalfGap,
    BeamLength,
    MagnetVolume,
    LoadResistance,
}

impl From<ParameterName> for DesignParameter {
    fn from(p: ParameterName) -> Self {
        match p {
            ParameterName::HalfGap => DesignParameter::HalfGap,
            ParameterName::BeamLength => DesignParameter::BeamLength,
            ParameterName::MagnetVolume => DesignParameter::MagnetVolume,
            ParameterName::LoadResistance => DesignParameter::LoadResistance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: ParameterName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableBound {
    pub parameter: ParameterName,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub variables: Vec<VariableBound>,
    /// Start of the first restart; the base design when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<f64>>,
    pub budget: usize,
    pub restarts: usize,
    pub initial_step: f64,
    pub x_tolerance: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        OptimizeSection {
            variables: vec![
                VariableBound {
                    parameter: ParameterName::HalfGap,
                    lo: 0.009,
                    hi: 0.011,
                },
                VariableBound {
                    parameter: ParameterName::BeamLength,
                    lo: 0.035,
                    hi: 0.045,
                },
                VariableBound {
                    parameter: ParameterName::LoadResistance,
                    lo: 3e4,
                    hi: 3e5,
                },
            ],
            seed: None,
            budget: o.budget,
            restarts: o.restarts,
            initial_step: o.initial_step,
            x_tolerance: o.x_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorerConfig {
    pub sweep: Vec<SweepAxis>,
    pub optimize: OptimizeSection,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig {
            sweep: vec![
                SweepAxis {
                    parameter: ParameterName::HalfGap,
                    values: vec![0.009, 0.010, 0.011],
                },
                SweepAxis {
                    parameter: ParameterName::BeamLength,
                    values: vec![0.035, 0.040, 0.045],
                },
                SweepAxis {
                    parameter: ParameterName::LoadResistance,
                    values: vec![3e4, 1e5, 3e5],
                },
            ],
            optimize: OptimizeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            svg: false,
        }
    }
}

impl RunConfig {
    /// Parse and validate config text. An empty or all-whitespace text is
    /// the default configuration.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = if text.trim().is_empty() {
            RunConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| Error::Parse {
                line: e.line(),
                column: e.column(),
                message: strip_position(&e.to_string()),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Pretty JSON with every float at 17 significant digits.
    pub fn to_json(&self) -> String {
        formats::to_json_string(self)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.material;
        finite("/material/curie_temp_c", m.curie_temp_c)?;
        at_least("/material/mu_max", m.mu_max, 1.0)?;
        positive("/material/transition_scale_c", m.transition_scale_c)?;

        let mg = &self.magnet;
        at_least("/magnet/remanence_t", mg.remanence_t, 0.0)?;
        positive("/magnet/volume_m3", mg.volume_m3)?;
        positive("/magnet/density_kg_m3", mg.density_kg_m3)?;

        let g = &self.geometry;
        positive("/geometry/half_gap_m", g.half_gap_m)?;
        positive("/geometry/contact_limit_m", g.contact_limit_m)?;
        if !(g.contact_limit_m < g.half_gap_m) {
            return Err(Error::invalid(
                "/geometry/contact_limit_m",
                format!(
                    "/geometry/contact_limit_m ({}) must be smaller than /geometry/half_gap_m ({})",
                    g.contact_limit_m, g.half_gap_m
                ),
            ));
        }
        positive("/geometry/sheet_width_m", g.sheet_width_m)?;
        positive("/geometry/sheet_height_m", g.sheet_height_m)?;
        positive("/geometry/sheet_thickness_m", g.sheet_thickness_m)?;

        self.validate_harvester()?;
        self.validate_thermal()?;

        let s = &self.sim;
        positive("/sim/dt_s", s.dt_s)?;
        positive("/sim/t_end_s", s.t_end_s)?;
        positive("/sim/event_tolerance_s", s.event_tolerance_s)?;
        if !(s.event_tolerance_s < s.dt_s) {
            return Err(Error::invalid(
                "/sim/event_tolerance_s",
                format!("must be smaller than /sim/dt_s ({})", s.dt_s),
            ));
        }
        if s.decimation == 0 {
            return Err(Error::invalid("/sim/decimation", "must be >= 1"));
        }
        if s.initial.mode == InitialMode::Free {
            finite("/sim/initial/x_m", s.initial.x_m)?;
            finite("/sim/initial/xdot_m_s", s.initial.xdot_m_s)?;
            finite("/sim/initial/v_volt", s.initial.v_volt)?;
            if s.initial.x_m.abs() > g.contact_limit_m {
                return Err(Error::invalid(
                    "/sim/initial/x_m",
                    format!("|x| must not exceed /geometry/contact_limit_m ({})", g.contact_limit_m),
                ));
            }
        }

        let f = &self.force;
        for (path, n) in [
            ("/force/mesh/width", f.mesh.width),
            ("/force/mesh/height", f.mesh.height),
            ("/force/mesh/thickness", f.mesh.thickness),
        ] {
            if n == 0 {
                return Err(Error::invalid(path, "must be >= 1"));
            }
        }
        if f.table_x_points < 2 {
            return Err(Error::invalid("/force/table_x_points", "must be >= 2"));
        }
        if f.table_t_points < 2 {
            return Err(Error::invalid("/force/table_t_points", "must be >= 2"));
        }

        self.validate_explorer()?;

        if self.output.dir.is_empty() {
            return Err(Error::invalid("/output/dir", "must not be empty"));
        }
        // anything the field checks above missed
        self.scenario_without_table()?
            .validate().map_err(|e| Error::invalid("", e.to_string()))
    }

    fn validate_harvester(&self) -> Result<()> {
        match self.harvester.model {
            HarvesterKind::Lumped => {
                let l = &self.harvester.lumped;
                for (path, v) in [
                    ("/harvester/lumped/m_eff_kg", l.m_eff_kg),
                    ("/harvester/lumped/k_n_m", l.k_n_m),
                    ("/harvester/lumped/theta_n_v", l.theta_n_v),
                    ("/harvester/lumped/c_p_f", l.c_p_f),
                    ("/harvester/lumped/load_resistance_ohm", l.load_resistance_ohm),
                    ("/harvester/lumped/beam_length_m", l.beam_length_m),
                    ("/harvester/lumped/beam_width_m", l.beam_width_m),
                    ("/harvester/lumped/tip_mass_kg", l.tip_mass_kg),
                    ("/harvester/lumped/active_volume_m3", l.active_volume_m3),
                ] {
                    positive(path, v)?;
                }
                unit_open("/harvester/lumped/damping_ratio", l.damping_ratio)?;
                if !(l.tip_mass_kg < l.m_eff_kg) {
                    return Err(Error::invalid(
                        "/harvester/lumped/tip_mass_kg",
                        format!("must be smaller than /harvester/lumped/m_eff_kg ({})", l.m_eff_kg),
                    ));
                }
            }
            HarvesterKind::Bimorph => {
                let b = &self.harvester.bimorph;
                for (path, v) in [
                    ("/harvester/bimorph/length_m", b.length_m),
                    ("/harvester/bimorph/width_m", b.width_m),
                    ("/harvester/bimorph/piezo_layer_thickness_m", b.piezo_layer_thickness_m),
                    ("/harvester/bimorph/shim_thickness_m", b.shim_thickness_m),
                    ("/harvester/bimorph/piezo_modulus_pa", b.piezo_modulus_pa),
                    ("/harvester/bimorph/shim_modulus_pa", b.shim_modulus_pa),
                    ("/harvester/bimorph/piezo_d31_m_v", b.piezo_d31_m_v),
                    ("/harvester/bimorph/piezo_permittivity_f_m", b.piezo_permittivity_f_m),
                    ("/harvester/bimorph/piezo_density_kg_m3", b.piezo_density_kg_m3),
                    ("/harvester/bimorph/shim_density_kg_m3", b.shim_density_kg_m3),
                    ("/harvester/bimorph/tip_mass_kg", b.tip_mass_kg),
                    ("/harvester/bimorph/load_resistance_ohm", b.load_resistance_ohm),
                ] {
                    positive(path, v)?;
                }
                unit_open("/harvester/bimorph/damping_ratio", b.damping_ratio)?;
            }
        }
        Ok(())
    }

    fn validate_thermal(&self) -> Result<()> {
        let t = &self.thermal;
        match t.profile {
            ProfileKind::Triangle | ProfileKind::Sine => {
                finite("/thermal/t_min_c", t.t_min_c)?;
                finite("/thermal/t_max_c", t.t_max_c)?;
                if !(t.t_min_c < t.t_max_c) {
                    return Err(Error::invalid(
                        "/thermal/t_min_c",
                        format!(
                            "/thermal/t_min_c ({}) must be smaller than /thermal/t_max_c ({})",
                            t.t_min_c, t.t_max_c
                        ),
                    ));
                }
                at_least("/thermal/phase_s", t.phase_s, 0.0)?;
                if t.profile == ProfileKind::Triangle {
                    positive("/thermal/rate_c_s", t.rate_c_s)?;
                } else {
                    positive("/thermal/period_s", t.period_s)?;
                }
            }
            ProfileKind::Table => match (&t.table_path, &t.table_samples) {
                (Some(_), Some(_)) | (None, None) => {
                    return Err(Error::invalid(
                        "/thermal",
                        "a table profile needs exactly one of table_path and table_samples",
                    ))
                }
                (Some(p), None) if p.is_empty() => {
                    return Err(Error::invalid("/thermal/table_path", "must not be empty"))
                }
                (None, Some(samples)) => {
                    let profile = ThermalProfile::Table {
                        samples: samples.iter().map(|s| (s[0], s[1])).collect(),
                    };
                    profile
                        .validate()
                        .map_err(|e| Error::invalid("/thermal/table_samples", e.to_string()))?;
                    if samples[0][0] != 0.0 {
                        return Err(Error::invalid("/thermal/table_samples/0/0", "table must start at t = 0"));
                    }
                }
                (Some(_), None) => {}
            },
        }
        Ok(())
    }

    fn validate_explorer(&self) -> Result<()> {
        let e = &self.explorer;
        let standoff = self.geometry.half_gap_m - self.geometry.contact_limit_m;
        let check_value = |path: String, p: ParameterName, v: f64| -> Result<()> {
            positive(&path, v)?;
            if p == ParameterName::HalfGap && !(v > standoff) {
                return Err(Error::invalid(
                    path,
                    format!("half gap {v} leaves no contact travel for the standoff {standoff}"),
                ));
            }
            Ok(())
        };
        for (i, axis) in e.sweep.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::invalid(format!("/explorer/sweep/{i}/values"), "must not be empty"));
            }
            if e.sweep[..i].iter().any(|a| a.parameter == axis.parameter) {
                return Err(Error::invalid(
                    format!("/explorer/sweep/{i}/parameter"),
                    "parameter appears twice in the sweep",
                ));
            }
            for (j, &v) in axis.values.iter().enumerate() {
                check_value(format!("/explorer/sweep/{i}/values/{j}"), axis.parameter, v)?;
            }
        }
        let o = &e.optimize;
        for (i, b) in o.variables.iter().enumerate() {
            check_value(format!("/explorer/optimize/variables/{i}/lo"), b.parameter, b.lo)?;
            check_value(format!("/explorer/optimize/variables/{i}/hi"), b.parameter, b.hi)?;
            if !(b.lo < b.hi) {
                return Err(Error::invalid(
                    format!("/explorer/optimize/variables/{i}/lo"),
                    format!("lo ({}) must be smaller than hi ({})", b.lo, b.hi),
                ));
            }
            if o.variables[..i].iter().any(|a| a.parameter == b.parameter) {
                return Err(Error::invalid(
                    format!("/explorer/optimize/variables/{i}/parameter"),
                    "parameter appears twice among the variables",
                ));
            }
        }
        if let Some(seed) = &o.seed {
            if seed.len() != o.variables.len() {
                return Err(Error::invalid(
                    "/explorer/optimize/seed",
                    format!("has {} entries for {} variables", seed.len(), o.variables.len()),
                ));
            }
            for (i, (&v, b)) in seed.iter().zip(&o.variables).enumerate() {
                if !(v >= b.lo && v <= b.hi) {
                    return Err(Error::invalid(
                        format!("/explorer/optimize/seed/{i}"),
                        format!("{v} lies outside [{}, {}]", b.lo, b.hi),
                    ));
                }
            }
        }
        let d = o.variables.len();
        if o.budget < d + 2 {
            return Err(Error::invalid(
                "/explorer/optimize/budget",
                format!("must be at least the number of variables + 2 = {}", d + 2),
            ));
        }
        if o.restarts == 0 {
            return Err(Error::invalid("/explorer/optimize/restarts", "must be >= 1"));
        }
        if !(o.initial_step > 0.0 && o.initial_step <= 1.0) {
            return Err(Error::invalid("/explorer/optimize/initial_step", "must lie in (0, 1]"));
        }
        positive("/explorer/optimize/x_tolerance", o.x_tolerance)
    }

    /// Scenario with the thermal table read from disk when the config
    /// points at one. `base_dir` resolves a relative `table_path`.
    pub fn scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let mut s = self.scenario_without_table()?;
        if let Some(path) = &self.thermal.table_path {
            let full = resolve(base_dir, path);
            let samples = formats::read_thermal_table(&full)?;
            let profile = ThermalProfile::Table { samples };
            profile.validate().map_err(|e| Error::Format {
                what: "thermal table",
                path: full.clone(),
                message: e.to_string(),
            })?;
            s.profile = profile;
        }
        s.validate().map_err(|e| Error::invalid("", e.to_string()))?;
        Ok(s)
    }

    /// A table profile read from a file is left as a two-point placeholder.
    fn scenario_without_table(&self) -> Result<Scenario> {
        let m = &self.material;
        let material = ThermoMagneticMaterial {
            curie_temp: m.curie_temp_c,
            mu_max: m.mu_max,
            transition_scale: m.transition_scale_c,
            law: match m.law {
                LawName::Tanh => PermeabilityLaw::Tanh,
                LawName::LinearRamp => PermeabilityLaw::LinearRamp,
            },
        };
        let magnet = MagnetSpec {
            remanence: self.magnet.remanence_t,
            volume: self.magnet.volume_m3,
        };
        let g = &self.geometry;
        let geometry = SheetPairGeometry {
            half_gap: g.half_gap_m,
            contact_limit: g.contact_limit_m,
            sheet_width: g.sheet_width_m,
            sheet_height: g.sheet_height_m,
            sheet_thickness: g.sheet_thickness_m,
        };
        let harvester = match self.harvester.model {
            HarvesterKind::Lumped => {
                let l = &self.harvester.lumped;
                let params = LumpedParams::from_damping_ratio(
                    l.m_eff_kg,
                    l.k_n_m,
                    l.damping_ratio,
                    l.theta_n_v,
                    l.c_p_f,
                    l.load_resistance_ohm,
                )
                .map_err(|e| Error::invalid("/harvester/lumped", e.to_string()))?;
                HarvesterModel::Lumped {
                    params,
                    beam_length: l.beam_length_m,
                    beam_width: l.beam_width_m,
                    tip_mass: l.tip_mass_kg,
                    active_volume: l.active_volume_m3,
                }
            }
            HarvesterKind::Bimorph => {
                let b = &self.harvester.bimorph;
                HarvesterModel::Bimorph(BimorphConfig {
                    length: b.length_m,
                    width: b.width_m,
                    piezo_layer_thickness: b.piezo_layer_thickness_m,
                    shim_thickness: b.shim_thickness_m,
                    piezo_modulus: b.piezo_modulus_pa,
                    shim_modulus: b.shim_modulus_pa,
                    piezo_d31: b.piezo_d31_m_v,
                    piezo_permittivity: b.piezo_permittivity_f_m,
                    piezo_density: b.piezo_density_kg_m3,
                    shim_density: b.shim_density_kg_m3,
                    wiring: match b.wiring {
                        WiringName::Series => Wiring::Series,
                        WiringName::Parallel => Wiring::Parallel,
                    },
                    damping_ratio: b.damping_ratio,
                    tip_mass: b.tip_mass_kg,
                    load_resistance: b.load_resistance_ohm,
                })
            }
        };
        let t = &self.thermal;
        let profile = match t.profile {
            ProfileKind::Triangle => ThermalProfile::Triangle {
                t_min: t.t_min_c,
                t_max: t.t_max_c,
                rate: t.rate_c_s,
                phase: t.phase_s,
            },
            ProfileKind::Sine => ThermalProfile::Sine {
                t_min: t.t_min_c,
                t_max: t.t_max_c,
                period: t.period_s,
                phase: t.phase_s,
            },
            ProfileKind::Table => match &t.table_samples {
                Some(samples) => ThermalProfile::Table {
                    samples: samples.iter().map(|s| (s[0], s[1])).collect(),
                },
                None => ThermalProfile::Table {
                    samples: vec![(0.0, 0.0), (1.0, 1.0)],
                },
            },
        };
        let s = &self.sim;
        let sim = SimConfig {
            dt: s.dt_s,
            t_end: s.t_end_s,
            event_tolerance: s.event_tolerance_s,
            decimation: s.decimation,
            coupling: s.coupling,
            initial: match s.initial.mode {
                InitialMode::StuckTop => InitialCondition::Stuck(Side::Top),
                InitialMode::StuckBottom => InitialCondition::Stuck(Side::Bottom),
                InitialMode::Free => InitialCondition::Free {
                    x: s.initial.x_m,
                    x_dot: s.initial.xdot_m_s,
                    v: s.initial.v_volt,
                },
            },
        };
        let f = &self.force;
        let backend = match f.backend {
            BackendName::Analytic => ForceBackend::Analytic,
            BackendName::Moment => {
                ForceBackend::Moment(MeshDensity::new(f.mesh.width, f.mesh.height, f.mesh.thickness))
            }
        };
        Ok(Scenario {
            material,
            magnet,
            magnet_density: self.magnet.density_kg_m3,
            geometry,
            harvester,
            profile,
            sim,
            backend,
            table: TableGrid {
                x_points: f.table_x_points,
                t_points: f.table_t_points,
            },
        })
    }

    pub fn sweep_grid(&self) -> Vec<(DesignParameter, Vec<f64>)> {
        self.explorer
            .sweep
            .iter()
            .map(|a| (a.parameter.into(), a.values.clone()))
            .collect()
    }

    pub fn optimize_variables(&self) -> Result<Vec<(DesignParameter, Bound)>> {
        self.explorer
            .optimize
            .variables
            .iter()
            .map(|v| Ok((v.parameter.into(), Bound::new(v.lo, v.hi)?)))
            .collect()
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        let o = &self.explorer.optimize;
        OptimizeOptions {
            budget: o.budget,
            restarts: o.restarts,
            initial_step: o.initial_step,
            x_tolerance: o.x_tolerance,
        }
    }
}

fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(path, format!("{v} is not finite")));
    }
    Ok(())
}

fn positive(path: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(path, format!("{v} must be finite and > 0")));
    }
    Ok(())
}

fn at_least(path: &str, v: f64, min: f64) -> Result<()> {
    if !(v >= min) || !v.is_finite() {
        return Err(Error::invalid(path, format!("{v} must be finite and >= {min}")));
    }
    Ok(())
}

fn unit_open(path: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(path, format!("{v} must lie in (0, 1)")));
    }
    Ok(())
}
