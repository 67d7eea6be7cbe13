//! Lumped electromechanical model of the bimorph with its magnet tip mass.
//!
//! Free motion follows
//!
//! ```text
//! m ẍ = F_mag − k x − c ẋ − Θ v
//! C_p v̇ = Θ ẋ − v / R
//! ```
//!
//! and contact with a sheet is perfectly inelastic: the tip sticks at
//! `±x_c` until the net outward force no longer holds it there.

use crate::magnetics::ForceModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Wiring {
    #[default]
    Series,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimorphConfig {
    /// Free length, m.
    pub length: f64,
    pub width: f64,
    /// Thickness of each of the two piezoelectric layers, m.
    pub piezo_layer_thickness: f64,
    pub shim_thickness: f64,
    pub piezo_modulus: f64,
    pub shim_modulus: f64,
    /// Magnitude of d31, m/V.
    pub piezo_d31: f64,
    /// Permittivity ε33 at constant stress, F/m.
    pub piezo_permittivity: f64,
    pub piezo_density: f64,
    pub shim_density: f64,
    pub wiring: Wiring,
    pub damping_ratio: f64,
    /// Tip mass including the magnet, kg.
    pub tip_mass: f64,
    pub load_resistance: f64,
}

impl Default for BimorphConfig {
    /// PZT-5A layers on a brass shim.
    fn default() -> Self {
        BimorphConfig {
            length: 0.040,
            width: 0.0045,
            piezo_layer_thickness: 150e-6,
            shim_thickness: 100e-6,
            piezo_modulus: 62e9,
            shim_modulus: 100e9,
            piezo_d31: 190e-12,
            piezo_permittivity: 1800.0 * 8.854e-12,
            piezo_density: 7750.0,
            shim_density: 8500.0,
            wiring: Wiring::Series,
            damping_ratio: 0.02,
            tip_mass: 0.00487,
            load_resistance: 100e3,
        }
    }
}

impl BimorphConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("piezo_layer_thickness", self.piezo_layer_thickness),
            ("shim_thickness", self.shim_thickness),
            ("piezo_modulus", self.piezo_modulus),
            ("shim_modulus", self.shim_modulus),
            ("piezo_d31", self.piezo_d31),
            ("piezo_permittivity", self.piezo_permittivity),
            ("piezo_density", self.piezo_density),
            ("shim_density", self.shim_density),
            ("tip_mass", self.tip_mass),
            ("load_resistance", self.load_resistance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(alloc::format!("bimorph {name} must be finite and > 0")));
            }
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(Error::invalid("damping_ratio must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Composite flexural rigidity of shim plus both layers about the
    /// (symmetric) neutral axis, N·m².
    pub fn flexural_rigidity(&self) -> f64 {
        let (w, ts, tp) = (self.width, self.shim_thickness, self.piezo_layer_thickness);
        let shim = self.shim_modulus * w * ts * ts * ts / 12.0;
        let offset = 0.5 * (ts + tp);
        let layer = self.piezo_modulus * w * (tp * tp * tp / 12.0 + tp * offset * offset);
        shim + 2.0 * layer
    }

    pub fn beam_mass(&self) -> f64 {
        self.width
            * self.length
            * (self.shim_density * self.shim_thickness
                + 2.0 * self.piezo_density * self.piezo_layer_thickness)
    }

    /// Volume of piezoelectric material, m³.
    pub fn active_volume(&self) -> f64 {
        2.0 * self.width * self.length * self.piezo_layer_thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedParams {
    pub m_eff: f64,
    /// Spring constant `k` of `F_P = k·x`, N/m.
    pub k: f64,
    /// Viscous damping, N·s/m.
    pub c: f64,
    /// Electromechanical coupling Θ, N/V.
    pub theta: f64,
    /// Piezo capacitance, F.
    pub c_p: f64,
    pub load_resistance: f64,
}

impl Default for LumpedParams {
    fn default() -> Self {
        LumpedParams::from_damping_ratio(0.005, 70.0, 0.02, 2.5e-4, 10e-9, 100e3)
            .expect("default lumped parameters are valid")
    }
}

impl LumpedParams {
    pub fn from_damping_ratio(
        m_eff: f64,
        k: f64,
        damping_ratio: f64,
        theta: f64,
        c_p: f64,
        load_resistance: f64,
    ) -> Result<Self> {
        if !(damping_ratio > 0.0 && damping_ratio < 1.0) {
            return Err(Error::invalid("damping_ratio must lie in (0, 1)"));
        }
        let p = LumpedParams {
            m_eff,
            k,
            c: 2.0 * damping_ratio * libm::sqrt(k * m_eff),
            theta,
            c_p,
            load_resistance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_eff", self.m_eff),
            ("k", self.k),
            ("c", self.c),
            ("theta", self.theta),
            ("c_p", self.c_p),
            ("load_resistance", self.load_resistance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(alloc::format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }

    pub fn damping_ratio(&self) -> f64 {
        self.c / (2.0 * libm::sqrt(self.k * self.m_eff))
    }

    /// Coupling figure `κ² = Θ²/(k·C_p)`.
    pub fn coupling_figure(&self) -> f64 {
        self.theta * self.theta / (self.k * self.c_p)
    }

    pub fn natural_frequency_hz(&self) -> f64 {
        libm::sqrt(self.k / self.m_eff) / (2.0 * core::f64::consts::PI)
    }

    /// Electrical time constant `R·C_p`, s.
    pub fn time_constant(&self) -> f64 {
        self.load_resistance * self.c_p
    }

    /// Rescale to a different free length with the Euler–Bernoulli laws:
    /// `k ∝ L⁻³`, beam mass and `C_p ∝ L`, `Θ ∝ L⁻¹` (so κ² is unchanged).
    /// `tip_mass` is the part of `m_eff` that does not scale with the beam.
    pub fn rescaled_length(&self, tip_mass: f64, from: f64, to: f64) -> Result<Self> {
        if !(from > 0.0 && to > 0.0) {
            return Err(Error::invalid("beam lengths must be > 0"));
        }
        if !(tip_mass > 0.0 && tip_mass < self.m_eff) {
            return Err(Error::invalid("tip mass must lie in (0, m_eff)"));
        }
        let s = to / from;
        let zeta = self.damping_ratio();
        let m_eff = tip_mass + (self.m_eff - tip_mass) * s;
        let k = self.k / (s * s * s);
        Self::from_damping_ratio(
            m_eff,
            k,
            zeta,
            self.theta / s,
            self.c_p * s,
            self.load_resistance,
        )
    }
}

/// Reduce a bimorph to its first-mode lumped parameters.
pub fn derive_lumped(cfg: &BimorphConfig) -> Result<LumpedParams> {
    cfg.validate()?;
    let l = cfg.length;
    let k = 3.0 * cfg.flexural_rigidity() / (l * l * l);
    let m_eff = cfg.tip_mass + 33.0 / 140.0 * cfg.beam_mass();
    let c_layer = cfg.piezo_permittivity * cfg.width * l / cfg.piezo_layer_thickness;
    // charge per unit tip deflection of one layer: e31·w·h_p·θ_tip/δ with
    // θ_tip/δ = 3/(2L) for a tip-loaded cantilever
    let e31 = cfg.piezo_d31 * cfg.piezo_modulus;
    let h_p = 0.5 * (cfg.shim_thickness + cfg.piezo_layer_thickness);
    let theta_layer = e31 * cfg.width * h_p * 1.5 / l;
    let (theta, c_p) = match cfg.wiring {
        Wiring::Series => (theta_layer, 0.5 * c_layer),
        Wiring::Parallel => (2.0 * theta_layer, 2.0 * c_layer),
    };
    LumpedParams::from_damping_ratio(m_eff, k, cfg.damping_ratio, theta, c_p, cfg.load_resistance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Top => 1.0,
            Side::Bottom => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Top => "top",
            Side::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Free,
    Stuck(Side),
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Free => "FREE",
            Mode::Stuck(Side::Top) => "STUCK_TOP",
            Mode::Stuck(Side::Bottom) => "STUCK_BOTTOM",
        }
    }

    pub fn from_label(s: &str) -> Option<Mode> {
        match s {
            "FREE" => Some(Mode::Free),
            "STUCK_TOP" => Some(Mode::Stuck(Side::Top)),
            "STUCK_BOTTOM" => Some(Mode::Stuck(Side::Bottom)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvesterState {
    pub t: f64,
    pub temp: f64,
    pub x: f64,
    pub x_dot: f64,
    pub v: f64,
    pub mode: Mode,
}

impl HarvesterState {
    pub fn at_rest(x: f64) -> Self {
        HarvesterState {
            t: 0.0,
            temp: 0.0,
            x,
            x_dot: 0.0,
            v: 0.0,
            mode: Mode::Free,
        }
    }

    pub fn stuck(side: Side, contact_limit: f64) -> Self {
        HarvesterState {
            t: 0.0,
            temp: 0.0,
            x: side.sign() * contact_limit,
            x_dot: 0.0,
            v: 0.0,
            mode: Mode::Stuck(side),
        }
    }

    pub fn validate(&self, contact_limit: f64) -> Result<()> {
        if !(self.x.abs() <= contact_limit) {
            return Err(Error::invalid("initial |x| exceeds the contact limit"));
        }
        if let Mode::Stuck(side) = self.mode {
            if self.x != side.sign() * contact_limit || self.x_dot != 0.0 {
                return Err(Error::invalid(
                    "a stuck state must sit at its contact limit with zero velocity",
                ));
            }
        }
        Ok(())
    }

    pub fn kinetic_energy(&self, p: &LumpedParams) -> f64 {
        0.5 * p.m_eff * self.x_dot * self.x_dot
    }

    pub fn spring_energy(&self, p: &LumpedParams) -> f64 {
        0.5 * p.k * self.x * self.x
    }

    pub fn electrical_energy(&self, p: &LumpedParams) -> f64 {
        0.5 * p.c_p * self.v * self.v
    }

    pub fn harvested_power(&self, p: &LumpedParams) -> f64 {
        self.v * self.v / p.load_resistance
    }
}

/// Time derivatives `(ẋ, ẍ, v̇)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub x_dot: f64,
    pub x_ddot: f64,
    pub v_dot: f64,
}

/// Right-hand side of the coupled equations. Stuck states only carry the
/// electrical discharge through the load.
pub fn rhs(state: &HarvesterState, params: &LumpedParams, f_mag: f64) -> Derivatives {
    match state.mode {
        Mode::Free => Derivatives {
            x_dot: state.x_dot,
            x_ddot: (f_mag - params.k * state.x - params.c * state.x_dot - params.theta * state.v)
                / params.m_eff,
            v_dot: (params.theta * state.x_dot - state.v / params.load_resistance) / params.c_p,
        },
        Mode::Stuck(_) => Derivatives {
            x_dot: 0.0,
            x_ddot: 0.0,
            v_dot: -state.v / (params.load_resistance * params.c_p),
        },
    }
}

/// Net outward force holding a tip against the `side` stop:
/// `±(F_M(±x_c) − k·(±x_c) − Θ·v)`. Positive means the tip stays.
pub fn hold_margin(
    side: Side,
    v: f64,
    params: &LumpedParams,
    contact_limit: f64,
    force: &dyn ForceModel,
    temp: f64,
) -> Result<f64> {
    let s = side.sign();
    let x = s * contact_limit;
    let f = force.force(x, temp)?;
    Ok(s * (f - params.k * x - params.theta * v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    None,
    Stick { side: Side, impact_energy: f64 },
    Release { side: Side },
}

/// Apply the contact rules to `state` in place.
///
/// A free tip at or beyond `±x_c` moving outward sticks there and loses its
/// kinetic energy. A stuck tip is released once its hold margin turns
/// negative.
pub fn mode_transition(
    state: &mut HarvesterState,
    params: &LumpedParams,
    contact_limit: f64,
    force: &dyn ForceModel,
) -> Result<Transition> {
    match state.mode {
        Mode::Free => {
            let side = if state.x >= contact_limit && state.x_dot > 0.0 {
                Side::Top
            } else if state.x <= -contact_limit && state.x_dot < 0.0 {
                Side::Bottom
            } else {
                return Ok(Transition::None);
            };
            let impact_energy = state.kinetic_energy(params);
            state.x = side.sign() * contact_limit;
            state.x_dot = 0.0;
            state.mode = Mode::Stuck(side);
            Ok(Transition::Stick {
                side,
                impact_energy,
            })
        }
        Mode::Stuck(side) => {
            let margin = hold_margin(side, state.v, params, contact_limit, force, state.temp)?;
            if margin < 0.0 {
                state.mode = Mode::Free;
                Ok(Transition::Release { side })
            } else {
                Ok(Transition::None)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    /// `∫F_mag·ẋ dt`.
    pub work_magnetic: f64,
    pub energy_kinetic: f64,
    pub energy_spring: f64,
    pub energy_electrical_stored: f64,
    /// `∫c·ẋ² dt`.
    pub energy_damped: f64,
    /// `∫v²/R dt`.
    pub energy_harvested: f64,
    pub energy_impact_lost: f64,
}

impl EnergyLedger {
    pub fn total_dissipated(&self) -> f64 {
        self.energy_damped + self.energy_harvested + self.energy_impact_lost
    }

    pub fn stored(&self) -> f64 {
        self.energy_kinetic + self.energy_spring + self.energy_electrical_stored
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::{AnalyticForceModel, MagnetSpec, SheetPairGeometry};
    use crate::materials::ThermoMagneticMaterial;
    use proptest::prelude::*;

    struct NoForce;
    impl ForceModel for NoForce {
        fn force(&self, _: f64, _: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn free(x: f64, x_dot: f64, v: f64) -> HarvesterState {
        HarvesterState {
            t: 0.0,
            temp: 40.0,
            x,
            x_dot,
            v,
            mode: Mode::Free,
        }
    }

    #[test]
    fn stiffness_scales_inverse_cube_in_length() {
        let base = BimorphConfig::default();
        let long = BimorphConfig {
            length: 2.0 * base.length,
            ..base
        };
        let (a, b) = (derive_lumped(&base).unwrap(), derive_lumped(&long).unwrap());
        assert!((a.k / b.k - 8.0).abs() < 1e-12);
        assert!((long.beam_mass() / base.beam_mass() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wiring_preserves_coupling_figure() {
        let s = derive_lumped(&BimorphConfig::default()).unwrap();
        let p = derive_lumped(&BimorphConfig {
            wiring: Wiring::Parallel,
            ..BimorphConfig::default()
        })
        .unwrap();
        let (ks, kp) = (s.theta * s.theta / s.c_p, p.theta * p.theta / p.c_p);
        assert!((ks - kp).abs() <= 1e-12 * ks);
        assert!((p.c_p / s.c_p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn composite_stiffness_hand_calculation() {
        // spreadsheet-style: layer EI = E·(b h³/12 + b h·d²) per layer
        let cfg = BimorphConfig::default();
        let b = 0.0045;
        let shim = 100e9 * (b * 1e-4f64.powi(3) / 12.0);
        let d = 0.5 * (100e-6 + 150e-6);
        let layer = 62e9 * (b * 150e-6f64.powi(3) / 12.0 + b * 150e-6 * d * d);
        let k_hand = 3.0 * (shim + 2.0 * layer) / 0.04f64.powi(3);
        let k = derive_lumped(&cfg).unwrap().k;
        assert!((k - k_hand).abs() <= 1e-9 * k_hand);
        let m_hand = 0.00487 + 33.0 / 140.0 * (b * 0.04 * (8500.0 * 100e-6 + 2.0 * 7750.0 * 150e-6));
        assert!((derive_lumped(&cfg).unwrap().m_eff - m_hand).abs() < 1e-15);
    }

    #[test]
    fn default_bimorph_is_near_lumped_baseline() {
        let p = derive_lumped(&BimorphConfig::default()).unwrap();
        assert!((p.k - 70.0).abs() < 2.0, "k = {}", p.k);
        assert!((p.m_eff - 0.005).abs() < 3e-4, "m = {}", p.m_eff);
    }

    #[test]
    fn rhs_examples() {
        let p = LumpedParams::default();
        let d = rhs(&free(0.0, 0.0, 0.0), &p, 0.0);
        assert_eq!((d.x_dot, d.x_ddot, d.v_dot), (0.0, 0.0, 0.0));
        let d = rhs(&free(0.0, 0.0, 1.0), &p, 0.0);
        assert!((d.x_ddot + p.theta / p.m_eff).abs() < 1e-15);
        assert!((d.v_dot + 1.0 / (p.load_resistance * p.c_p)).abs() < 1e-9);
        let s = free(0.0, 0.0, 2.0);
        assert!((s.harvested_power(&p) - 40e-6).abs() < 1e-18);
        let mut stuck = HarvesterState::stuck(Side::Top, 0.0085);
        stuck.v = 3.0;
        let d = rhs(&stuck, &p, 1.0);
        assert_eq!((d.x_dot, d.x_ddot), (0.0, 0.0));
        assert!((d.v_dot + 3.0 / p.time_constant()).abs() < 1e-9);
    }

    #[test]
    fn power_identity_at_random_states() {
        let p = LumpedParams::default();
        // deterministic pseudo-random states
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..1000 {
            let s = free(0.0085 * next(), 2.0 * next(), 20.0 * next());
            let f = 5.0 * next();
            let d = rhs(&s, &p, f);
            let lhs = p.m_eff * s.x_dot * d.x_ddot + p.k * s.x * d.x_dot + p.c_p * s.v * d.v_dot;
            let rhs_p = f * s.x_dot - p.c * s.x_dot * s.x_dot - s.v * s.v / p.load_resistance;
            let scale = (f * s.x_dot).abs()
                + p.c * s.x_dot * s.x_dot
                + s.v * s.v / p.load_resistance
                + (p.theta * s.v * s.x_dot).abs()
                + (p.k * s.x * s.x_dot).abs();
            assert!((lhs - rhs_p).abs() <= 1e-12 * scale, "{lhs} vs {rhs_p}");
        }
    }

    #[test]
    fn stick_on_outward_contact() {
        let p = LumpedParams::default();
        let mut s = free(0.0085, 0.7, 1.0);
        let t = mode_transition(&mut s, &p, 0.0085, &NoForce).unwrap();
        assert_eq!(s.mode, Mode::Stuck(Side::Top));
        assert_eq!(s.x_dot, 0.0);
        match t {
            Transition::Stick { side, impact_energy } => {
                assert_eq!(side, Side::Top);
                assert!((impact_energy - 0.5 * p.m_eff * 0.49).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        // moving inward at the stop does not stick
        let mut s = free(-0.0085, 0.3, 0.0);
        assert_eq!(mode_transition(&mut s, &p, 0.0085, &NoForce).unwrap(), Transition::None);
    }

    #[test]
    fn release_above_curie_and_hold_when_cold() {
        let p = LumpedParams::default();
        let model = AnalyticForceModel::new(
            SheetPairGeometry::default(),
            MagnetSpec::default(),
            ThermoMagneticMaterial::default(),
        )
        .unwrap();
        let mut s = HarvesterState::stuck(Side::Top, 0.0085);
        s.temp = 45.0;
        let t = mode_transition(&mut s, &p, 0.0085, &model).unwrap();
        assert_eq!(t, Transition::Release { side: Side::Top });
        assert_eq!(s.mode, Mode::Free);

        let mut s = HarvesterState::stuck(Side::Bottom, 0.0085);
        s.temp = 35.0;
        let margin = hold_margin(Side::Bottom, 0.0, &p, 0.0085, &model, 35.0).unwrap();
        assert!(margin > 0.0);
        assert_eq!(mode_transition(&mut s, &p, 0.0085, &model).unwrap(), Transition::None);
        assert_eq!(s.mode, Mode::Stuck(Side::Bottom));
    }

    #[test]
    fn voltage_term_enters_hold_margin() {
        let p = LumpedParams::default();
        let top = hold_margin(Side::Top, 10.0, &p, 0.0085, &NoForce, 40.0).unwrap();
        let bottom = hold_margin(Side::Bottom, 10.0, &p, 0.0085, &NoForce, 40.0).unwrap();
        assert!((top - (-p.k * 0.0085 - 10.0 * p.theta)).abs() < 1e-15);
        assert!((bottom - (-p.k * 0.0085 + 10.0 * p.theta)).abs() < 1e-15);
    }

    #[test]
    fn length_rescaling_matches_derivation() {
        let cfg = BimorphConfig::default();
        let long = BimorphConfig {
            length: 0.05,
            ..cfg
        };
        let a = derive_lumped(&cfg).unwrap();
        let b = derive_lumped(&long).unwrap();
        let r = a.rescaled_length(cfg.tip_mass, 0.04, 0.05).unwrap();
        for (x, y) in [(r.k, b.k), (r.m_eff, b.m_eff), (r.theta, b.theta), (r.c_p, b.c_p), (r.c, b.c)] {
            assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = BimorphConfig {
            damping_ratio: 1.5,
            ..BimorphConfig::default()
        };
        assert!(derive_lumped(&bad).is_err());
        let bad = BimorphConfig {
            width: 0.0,
            ..BimorphConfig::default()
        };
        assert!(derive_lumped(&bad).is_err());
        assert!(LumpedParams::from_damping_ratio(0.005, -1.0, 0.02, 1e-4, 1e-8, 1e5).is_err());
    }

    proptest! {
        #[test]
        fn damping_from_ratio(m in 1e-4f64..1.0, k in 1.0f64..1e4, z in 0.001f64..0.9) {
            let p = LumpedParams::from_damping_ratio(m, k, z, 1e-4, 1e-8, 1e5).unwrap();
            prop_assert!((p.c - 2.0 * z * (k * m).sqrt()).abs() <= 1e-12 * p.c);
            prop_assert!((p.damping_ratio() - z).abs() <= 1e-12);
        }
    }
}
