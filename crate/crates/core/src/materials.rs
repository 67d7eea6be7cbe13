//! Temperature-dependent relative permeability of the soft ferromagnetic
//! (FeNi) sheets.
//!
//! Above the Curie temperature the sheets are non-magnetic (`μ_r = 1`).
//! Below it the permeability rises toward `mu_max` following a pluggable
//! [`PermeabilityLaw`].

use crate::{Error, Result};

/// Shape of `μ_r(T)` below the Curie temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermeabilityLaw {
    /// `μ_r = 1 + (μ_max − 1)·tanh((T_C − T)/scale)`.
    #[default]
    Tanh,
    /// `μ_r = 1 + (μ_max − 1)·min(1, (T_C − T)/scale)`.
    LinearRamp,
}

impl PermeabilityLaw {
    /// Saturation fraction in `[0, 1]` for `depth = (T_C − T)/scale ≥ 0`.
    fn fraction(self, depth: f64) -> f64 {
        match self {
            PermeabilityLaw::Tanh => libm::tanh(depth),
            PermeabilityLaw::LinearRamp => depth.min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoMagneticMaterial {
    /// Curie temperature, °C.
    pub curie_temp: f64,
    /// Relative permeability deep below the Curie temperature.
    pub mu_max: f64,
    /// Temperature scale of the transition, °C.
    pub transition_scale: f64,
    pub law: PermeabilityLaw,
}

impl Default for ThermoMagneticMaterial {
    fn default() -> Self {
        ThermoMagneticMaterial {
            curie_temp: 45.0,
            mu_max: 50.0,
            transition_scale: 10.0,
            law: PermeabilityLaw::Tanh,
        }
    }
}

impl ThermoMagneticMaterial {
    pub fn new(curie_temp: f64, mu_max: f64, transition_scale: f64) -> Result<Self> {
        let mat = ThermoMagneticMaterial {
            curie_temp,
            mu_max,
            transition_scale,
            law: PermeabilityLaw::Tanh,
        };
        mat.validate()?;
        Ok(mat)
    }

    pub fn with_law(mut self, law: PermeabilityLaw) -> Self {
        self.law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.curie_temp.is_finite() {
            return Err(Error::invalid("curie_temp must be finite"));
        }
        if !(self.mu_max >= 1.0) || !self.mu_max.is_finite() {
            return Err(Error::invalid("mu_max must be finite and >= 1"));
        }
        if !(self.transition_scale > 0.0) || !self.transition_scale.is_finite() {
            return Err(Error::invalid("transition_scale must be finite and > 0"));
        }
        Ok(())
    }

    pub fn relative_permeability(&self, temp: f64) -> Result<f64> {
        if !temp.is_finite() {
            return Err(Error::invalid("temperature must be finite"));
        }
        if temp >= self.curie_temp {
            return Ok(1.0);
        }
        let depth = (self.curie_temp - temp) / self.transition_scale;
        Ok(1.0 + (self.mu_max - 1.0) * self.law.fraction(depth))
    }

    /// `χ = μ_r − 1`.
    pub fn susceptibility(&self, temp: f64) -> Result<f64> {
        Ok(self.relative_permeability(temp)? - 1.0)
    }
}

/// Free-function form of [`ThermoMagneticMaterial::relative_permeability`].
pub fn relative_permeability(mat: &ThermoMagneticMaterial, temp: f64) -> Result<f64> {
    mat.relative_permeability(temp)
}
