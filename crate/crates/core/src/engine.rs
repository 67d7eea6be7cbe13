//! Hybrid integrator: fixed-step RK4 for free flight, exact voltage decay
//! while stuck, and bisection of contact crossings inside a step.
//!
//! The time grid is `t_n = n·dt`. Samples are taken every `decimation`
//! steps; events are kept at full resolution. Work and dissipation
//! integrals ride along in the RK4 stages, so the energy ledger closes to
//! the integrator's own order.

use alloc::format;
use alloc::vec::Vec;

use crate::harvester::{
    mode_transition, EnergyLedger, HarvesterState, LumpedParams, Mode, Side, Transition,
};
use crate::magnetics::ForceModel;
use crate::thermal::ThermalProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Held against a sheet with the piezo discharged.
    Stuck(Side),
    Free { x: f64, x_dot: f64, v: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Stuck(Side::Top)
    }
}

impl InitialCondition {
    pub fn state(&self, contact_limit: f64) -> HarvesterState {
        match *self {
            InitialCondition::Stuck(side) => HarvesterState::stuck(side, contact_limit),
            InitialCondition::Free { x, x_dot, v } => HarvesterState {
                x_dot,
                v,
                ..HarvesterState::at_rest(x)
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Width of the bracket left around a contact time, s.
    pub event_tolerance: f64,
    /// Keep one sample every `decimation` steps.
    pub decimation: usize,
    /// With coupling off, Θ is treated as zero.
    pub coupling: bool,
    pub initial: InitialCondition,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            t_end: 400.0,
            event_tolerance: 1e-9,
            decimation: 100,
            coupling: true,
            initial: InitialCondition::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be finite and > 0"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end must be finite and > 0"));
        }
        if !(self.event_tolerance > 0.0 && self.event_tolerance < self.dt) {
            return Err(Error::invalid("event_tolerance must lie in (0, dt)"));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation must be >= 1"));
        }
        Ok(())
    }

    /// Number of grid steps needed to reach `t`.
    pub fn steps_to(&self, t: f64) -> u64 {
        let n = t / self.dt;
        let r = libm::round(n);
        if (n - r).abs() <= 1e-9 * r.max(1.0) {
            r as u64
        } else {
            libm::ceil(n) as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub temp: f64,
    pub x: f64,
    pub x_dot: f64,
    pub v: f64,
    pub mode: Mode,
    /// `v²/R`, W.
    pub p_harv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Stick,
    Release,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Stick => "stick",
            EventKind::Release => "release",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub side: Side,
    pub temp: f64,
    /// Kinetic energy lost on a stick, J; zero for releases.
    pub impact_energy: f64,
}

/// Kinetic, spring and electrical energy of one state, J.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StoredEnergy {
    pub kinetic: f64,
    pub spring: f64,
    pub electrical: f64,
}

impl StoredEnergy {
    pub fn of(state: &HarvesterState, p: &LumpedParams) -> Self {
        StoredEnergy {
            kinetic: state.kinetic_energy(p),
            spring: state.spring_energy(p),
            electrical: state.electrical_energy(p),
        }
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.spring + self.electrical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed { steps: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Integrals since `t = 0`, with the stored terms taken at the end.
    pub ledger: EnergyLedger,
    pub initial_energy: StoredEnergy,
    pub final_state: HarvesterState,
    pub termination: Termination,
}

/// A simulation that can be advanced piecewise, so callers can read the
/// ledger at intermediate times.
pub struct Simulator<'a> {
    cfg: SimConfig,
    params: LumpedParams,
    contact_limit: f64,
    force: &'a dyn ForceModel,
    profile: &'a ThermalProfile,
    state: HarvesterState,
    /// Force at the current state, reused as the first RK4 stage.
    f_cur: f64,
    step: u64,
    ledger: EnergyLedger,
    initial_energy: StoredEnergy,
    samples: Vec<Sample>,
    events: Vec<Event>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        cfg: &SimConfig,
        params: &LumpedParams,
        contact_limit: f64,
        force: &'a dyn ForceModel,
        profile: &'a ThermalProfile,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        profile.validate()?;
        if !(contact_limit > 0.0) || !contact_limit.is_finite() {
            return Err(Error::invalid("contact_limit must be finite and > 0"));
        }
        let mut params = *params;
        if !cfg.coupling {
            params.theta = 0.0;
        }
        let mut state = cfg.initial.state(contact_limit);
        state.validate(contact_limit)?;
        state.temp = profile.temperature_at(0.0)?;
        let f_cur = force.force(state.x, state.temp)?;
        let mut sim = Simulator {
            cfg: *cfg,
            params,
            contact_limit,
            force,
            profile,
            state,
            f_cur,
            step: 0,
            ledger: EnergyLedger::default(),
            initial_energy: StoredEnergy::of(&state, &params),
            samples: Vec::new(),
            events: Vec::new(),
        };
        sim.record_sample();
        Ok(sim)
    }

    pub fn state(&self) -> &HarvesterState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Ledger so far, with stored terms for the current state.
    pub fn ledger(&self) -> EnergyLedger {
        let e = StoredEnergy::of(&self.state, &self.params);
        EnergyLedger {
            energy_kinetic: e.kinetic,
            energy_spring: e.spring,
            energy_electrical_stored: e.electrical,
            ..self.ledger
        }
    }

    /// Step until the grid time reaches `t` (rounded up to the grid).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = self.cfg.steps_to(t);
        while self.step < target {
            self.advance_step()?;
            if self.step.is_multiple_of(self.cfg.decimation as u64) {
                self.record_sample();
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> SimResult {
        if self.samples.last().map(|s| s.t) != Some(self.state.t) {
            self.record_sample();
        }
        SimResult {
            ledger: self.ledger(),
            samples: self.samples,
            events: self.events,
            initial_energy: self.initial_energy,
            final_state: self.state,
            termination: Termination::Completed { steps: self.step },
        }
    }

    fn record_sample(&mut self) {
        let s = &self.state;
        self.samples.push(Sample {
            t: s.t,
            temp: s.temp,
            x: s.x,
            x_dot: s.x_dot,
            v: s.v,
            mode: s.mode,
            p_harv: s.harvested_power(&self.params),
        });
    }

    fn temp_at(&self, t: f64) -> Result<f64> {
        self.profile.temperature_at(t)
    }

    fn advance_step(&mut self) -> Result<()> {
        let t0 = self.step as f64 * self.cfg.dt;
        let t1 = (self.step + 1) as f64 * self.cfg.dt;
        let h = t1 - t0;
        if let Mode::Stuck(_) = self.state.mode {
            self.state.temp = self.temp_at(t0)?;
            let tr = mode_transition(&mut self.state, &self.params, self.contact_limit, self.force)?;
            if let Transition::Release { side } = tr {
                self.events.push(Event {
                    t: t0,
                    kind: EventKind::Release,
                    side,
                    temp: self.state.temp,
                    impact_energy: 0.0,
                });
            }
        }
        match self.state.mode {
            Mode::Stuck(_) => self.stuck_span(h)?,
            Mode::Free => self.free_step(t0, h)?,
        }
        self.step += 1;
        self.state.t = t1;
        self.state.temp = self.temp_at(t1)?;
        if let Mode::Stuck(_) = self.state.mode {
            self.f_cur = self.force.force(self.state.x, self.state.temp)?;
        }
        if !(self.state.x.is_finite() && self.state.x_dot.is_finite() && self.state.v.is_finite())
        {
            return Err(Error::numerical(format!("non-finite state at t = {t1} s")));
        }
        Ok(())
    }

    /// Exact discharge of the piezo through the load over `h` seconds.
    fn stuck_span(&mut self, h: f64) -> Result<()> {
        let rc = self.params.time_constant();
        let v0 = self.state.v;
        self.state.v = v0 * libm::exp(-h / rc);
        self.ledger.energy_harvested +=
            0.5 * self.params.c_p * v0 * v0 * (-libm::expm1(-2.0 * h / rc));
        Ok(())
    }

    fn free_step(&mut self, t0: f64, h: f64) -> Result<()> {
        let xc = self.contact_limit;
        let mut step = self.rk4(t0, h)?;
        let mut span = h;
        let crossed = step.state.x.abs() >= xc;
        if crossed {
            let (mut lo, mut hi) = (0.0, h);
            let mut x_lo = self.state.x.abs();
            let mut x_hi = step.state.x.abs();
            while hi - lo > self.cfg.event_tolerance {
                let mid = 0.5 * (lo + hi);
                let s = self.rk4(t0, mid)?;
                if s.state.x.abs() >= xc {
                    hi = mid;
                    x_hi = s.state.x.abs();
                } else {
                    lo = mid;
                    x_lo = s.state.x.abs();
                }
            }
            // secant inside the final bracket lands on the stop to O(tol²)
            span = if x_hi > x_lo {
                lo + (hi - lo) * ((xc - x_lo) / (x_hi - x_lo)).clamp(0.0, 1.0)
            } else {
                hi
            };
            step = self.rk4(t0, span)?;
        }
        self.ledger.work_magnetic += step.work;
        self.ledger.energy_damped += step.damped;
        self.ledger.energy_harvested += step.harvested;
        self.state.x = step.state.x;
        self.state.x_dot = step.state.x_dot;
        self.state.v = step.state.v;
        self.f_cur = step.force;
        if crossed {
            let te = t0 + span;
            let side = if self.state.x > 0.0 { Side::Top } else { Side::Bottom };
            // the secant may stop a hair short of the stop; place it there
            self.state.x = side.sign() * xc;
            self.state.temp = self.temp_at(te)?;
            let tr = mode_transition(&mut self.state, &self.params, xc, self.force)?;
            if let Transition::Stick { side, impact_energy } = tr {
                self.ledger.energy_impact_lost += impact_energy;
                self.events.push(Event {
                    t: te,
                    kind: EventKind::Stick,
                    side,
                    temp: self.state.temp,
                    impact_energy,
                });
                self.stuck_span(h - span)?;
            }
        }
        Ok(())
    }

    /// One classical RK4 step of length `h` from the current state, with the
    /// ledger integrands carried as extra components so that work and
    /// dissipation are integrated to the same order as the state.
    fn rk4(&self, t0: f64, h: f64) -> Result<RkStep> {
        let p = &self.params;
        let s0 = self.state;
        let tm = self.temp_at(t0 + 0.5 * h)?;
        let te = self.temp_at(t0 + h)?;
        let deriv = |x: f64, xd: f64, v: f64, f: f64| {
            [
                xd,
                (f - p.k * x - p.c * xd - p.theta * v) / p.m_eff,
                (p.theta * xd - v / p.load_resistance) / p.c_p,
                f * xd,
                p.c * xd * xd,
                v * v / p.load_resistance,
            ]
        };
        let at = |k: &[f64; 6], a: f64| (s0.x + a * k[0], s0.x_dot + a * k[1], s0.v + a * k[2]);
        let k1 = deriv(s0.x, s0.x_dot, s0.v, self.f_cur);
        let (x2, xd2, v2) = at(&k1, 0.5 * h);
        let k2 = deriv(x2, xd2, v2, self.force.force(x2, tm)?);
        let (x3, xd3, v3) = at(&k2, 0.5 * h);
        let k3 = deriv(x3, xd3, v3, self.force.force(x3, tm)?);
        let (x4, xd4, v4) = at(&k3, h);
        let k4 = deriv(x4, xd4, v4, self.force.force(x4, te)?);
        let sixth = h / 6.0;
        let inc = |i: usize| sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        let state = HarvesterState {
            t: t0 + h,
            temp: te,
            x: s0.x + inc(0),
            x_dot: s0.x_dot + inc(1),
            v: s0.v + inc(2),
            mode: Mode::Free,
        };
        if !(state.x.is_finite() && state.x_dot.is_finite() && state.v.is_finite()) {
            return Err(Error::numerical(format!("non-finite state at t = {} s", t0 + h)));
        }
        let force = self.force.force(state.x, te)?;
        Ok(RkStep {
            state,
            force,
            work: inc(3),
            damped: inc(4),
            harvested: inc(5),
        })
    }
}

struct RkStep {
    state: HarvesterState,
    /// Force at the end state.
    force: f64,
    work: f64,
    damped: f64,
    harvested: f64,
}

/// Run a full simulation from `t = 0` to `cfg.t_end`.
pub fn simulate(
    cfg: &SimConfig,
    params: &LumpedParams,
    contact_limit: f64,
    force: &dyn ForceModel,
    profile: &ThermalProfile,
) -> Result<SimResult> {
    let mut sim = Simulator::new(cfg, params, contact_limit, force, profile)?;
    sim.advance_to(cfg.t_end)?;
    Ok(sim.finish())
}

/// Normalized violation of the energy identity
/// `W_mag = ΔE_stored + E_damped + E_harvested + E_impact`.
pub fn energy_balance_residual(result: &SimResult) -> f64 {
    let l = &result.ledger;
    let d_stored = l.stored() - result.initial_energy.total();
    let violation = l.work_magnetic - d_stored - l.total_dissipated();
    let reference = l.work_magnetic.abs().max(l.total_dissipated()).max(1e-15);
    violation.abs() / reference
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::{AnalyticForceModel, MagnetSpec, SheetPairGeometry};
    use crate::materials::ThermoMagneticMaterial;

    struct NoForce;
    impl ForceModel for NoForce {
        fn force(&self, _: f64, _: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    fn hot() -> ThermalProfile {
        ThermalProfile::Triangle {
            t_min: 60.0,
            t_max: 70.0,
            rate: 0.1,
            phase: 0.0,
        }
    }

    fn baseline_model() -> AnalyticForceModel {
        AnalyticForceModel::new(
            SheetPairGeometry::default(),
            MagnetSpec::default(),
            ThermoMagneticMaterial::default(),
        )
        .unwrap()
    }

    #[test]
    fn rest_above_curie_stays_put() {
        let cfg = SimConfig {
            t_end: 1.0,
            initial: InitialCondition::Free {
                x: 0.0,
                x_dot: 0.0,
                v: 0.0,
            },
            ..SimConfig::default()
        };
        let model = baseline_model();
        let r = simulate(&cfg, &LumpedParams::default(), 0.0085, &model, &hot()).unwrap();
        assert!(r.samples.iter().all(|s| s.x == 0.0 && s.v == 0.0));
        assert_eq!(r.ledger, EnergyLedger::default());
        assert_eq!(energy_balance_residual(&r), 0.0);
        assert!(r.events.is_empty());
        assert_eq!(r.termination, Termination::Completed { steps: 10_000 });
    }

    #[test]
    fn free_linear_oscillator_matches_closed_form() {
        // undamped and uncoupled limit of the lumped model
        let p = LumpedParams {
            c: 1e-300,
            ..LumpedParams::default()
        };
        let cfg = SimConfig {
            t_end: 0.5,
            coupling: false,
            decimation: 1,
            initial: InitialCondition::Free {
                x: 0.001,
                x_dot: 0.0,
                v: 0.0,
            },
            ..SimConfig::default()
        };
        let r = simulate(&cfg, &p, 0.0085, &NoForce, &hot()).unwrap();
        let w = libm::sqrt(p.k / p.m_eff);
        for s in &r.samples {
            assert!((s.x - 0.001 * libm::cos(w * s.t)).abs() < 1e-10, "t = {}", s.t);
        }
    }

    #[test]
    fn impact_sticks_at_the_limit_with_zero_velocity() {
        let cfg = SimConfig {
            t_end: 0.05,
            decimation: 1,
            coupling: false,
            initial: InitialCondition::Free {
                x: 0.0,
                x_dot: 2.0,
                v: 0.0,
            },
            ..SimConfig::default()
        };
        let p = LumpedParams {
            c: 1e-300,
            ..LumpedParams::default()
        };
        let r = simulate(&cfg, &p, 0.0085, &NoForce, &hot()).unwrap();
        // with no magnet the spring pulls the tip off again one step later
        let kinds: Vec<_> = r.events.iter().map(|e| (e.kind, e.side)).collect();
        assert_eq!(kinds, [(EventKind::Stick, Side::Top), (EventKind::Release, Side::Top)]);
        let e = r.events[0];
        // undamped free flight x = (v0/ω) sin ωt reaches x_c
        let w = libm::sqrt(p.k / p.m_eff);
        let t_hit = libm::asin(0.0085 * w / 2.0) / w;
        assert!((e.t - t_hit).abs() < 1e-8, "{} vs {t_hit}", e.t);
        assert!(r.events[1].t - e.t <= cfg.dt);
        let stuck = r.samples.iter().find(|s| s.mode != Mode::Free).unwrap();
        assert_eq!((stuck.x, stuck.x_dot, stuck.mode), (0.0085, 0.0, Mode::Stuck(Side::Top)));
        assert!(r.samples.iter().all(|s| s.x.abs() <= 0.0085 + 1e-12));
        assert!(energy_balance_residual(&r) < 1e-6);
    }

    #[test]
    fn stuck_discharge_is_exponential() {
        let p = LumpedParams::default();
        let cfg = SimConfig {
            t_end: 0.01,
            decimation: 1,
            initial: InitialCondition::Stuck(Side::Bottom),
            ..SimConfig::default()
        };
        let profile = ThermalProfile::Triangle {
            t_min: 20.0,
            t_max: 30.0,
            rate: 0.1,
            phase: 0.0,
        };
        let model = baseline_model();
        let mut sim = Simulator::new(&cfg, &p, 0.0085, &model, &profile).unwrap();
        sim.state.v = 5.0;
        let e0 = sim.state.electrical_energy(&p);
        sim.advance_to(0.01).unwrap();
        let tau = p.time_constant();
        assert!((sim.state.v - 5.0 * libm::exp(-0.01 / tau)).abs() < 1e-12);
        let l = sim.ledger();
        assert!((l.energy_harvested + l.energy_electrical_stored - e0).abs() < 1e-15);
    }

    #[test]
    fn baseline_first_period_events() {
        let cfg = SimConfig {
            t_end: 200.0,
            ..SimConfig::default()
        };
        let model = baseline_model();
        let r = simulate(
            &cfg,
            &LumpedParams::default(),
            0.0085,
            &model,
            &ThermalProfile::default(),
        )
        .unwrap();
        let kinds: Vec<_> = r.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::Release, EventKind::Stick]);
        assert!(r.events[0].t < 100.0 && r.events[1].t > 100.0);
        assert!(r.samples.iter().all(|s| s.x.abs() <= 0.0085 + 1e-12));
        assert!(energy_balance_residual(&r) < 1e-3);
        assert!(r.ledger.energy_harvested > 0.0);
    }

    #[test]
    fn runs_are_bit_identical() {
        let cfg = SimConfig {
            t_end: 60.0,
            initial: InitialCondition::Free {
                x: 0.002,
                x_dot: 0.0,
                v: 0.0,
            },
            ..SimConfig::default()
        };
        let model = baseline_model();
        let profile = ThermalProfile::Sine {
            t_min: 40.0,
            t_max: 50.0,
            period: 50.0,
            phase: 0.0,
        };
        let a = simulate(&cfg, &LumpedParams::default(), 0.0085, &model, &profile).unwrap();
        let b = simulate(&cfg, &LumpedParams::default(), 0.0085, &model, &profile).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SimConfig {
            event_tolerance: 1e-3,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg = SimConfig {
            initial: InitialCondition::Free {
                x: 0.01,
                x_dot: 0.0,
                v: 0.0,
            },
            ..SimConfig::default()
        };
        let model = baseline_model();
        assert!(simulate(&cfg, &LumpedParams::default(), 0.0085, &model, &hot()).is_err());
    }
}
