//! Conversion of experimental parameters into the dimensionless rotor problem.

use std::f64::consts::PI;

use crate::constants::{HBAR, MU_0, PLANCK, ZETA_3};
use crate::error::{Error, Result};

/// Experimental inputs in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Particle radius R (m).
    pub radius: f64,
    /// Plate separation L (m).
    pub separation: f64,
    /// Particle mass density (kg/m³).
    pub density: f64,
    /// Saturation magnetization M_s (A/m).
    pub magnetization: f64,
    /// Applied field along x (T).
    pub b_x: f64,
    /// Applied field along z (T).
    pub b_z: f64,
}

impl PhysicalParams {
    /// Reference configuration: 1 nm particle in an 84 nm gap.
    pub fn table() -> Self {
        PhysicalParams {
            radius: 1.0e-9,
            separation: 8.4e-8,
            density: 7.5e3,
            magnetization: 1.0e6,
            b_x: 0.0,
            b_z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("separation", self.separation),
            ("density", self.density),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::domain(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.magnetization >= 0.0) || !self.magnetization.is_finite() {
            return Err(Error::domain(
                "magnetization",
                format!("must be non-negative, got {}", self.magnetization),
            ));
        }
        if !self.b_x.is_finite() {
            return Err(Error::domain("b_x", "must be finite"));
        }
        if !self.b_z.is_finite() {
            return Err(Error::domain("b_z", "must be finite"));
        }
        if self.radius >= 0.5 * self.separation {
            return Err(Error::domain(
                "radius",
                format!(
                    "particle does not fit the gap: R = {} >= L/2 = {}",
                    self.radius,
                    0.5 * self.separation
                ),
            ));
        }
        Ok(())
    }
}

/// Scales derived from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// Magnetic moment μ (A·m²).
    pub moment: f64,
    /// Mass (kg).
    pub mass: f64,
    /// Moment of inertia I (kg·m²).
    pub inertia: f64,
    /// Kinetic quantum E_k = ħ²/(2I) (J).
    pub kinetic_energy: f64,
    /// E_k/ħ (s⁻¹); converts dimensionless time and rates.
    pub rate_scale: f64,
    /// Barrier height V₀ (J).
    pub barrier: f64,
    pub v0: f64,
    pub hx: f64,
    pub hz: f64,
}

impl DerivedScales {
    /// Energy in units of E_k to joules.
    pub fn energy(&self, e: f64) -> f64 {
        e * self.kinetic_energy
    }

    /// Dimensionless angular frequency to rad/s.
    pub fn angular_frequency(&self, omega: f64) -> f64 {
        omega * self.rate_scale
    }

    /// Dimensionless time to seconds.
    pub fn seconds(&self, t: f64) -> f64 {
        t / self.rate_scale
    }

    /// Seconds to dimensionless time.
    pub fn dimensionless_time(&self, seconds: f64) -> f64 {
        seconds * self.rate_scale
    }

    /// Energy splitting in units of E_k to Hz.
    pub fn frequency(&self, de: f64) -> f64 {
        de * self.kinetic_energy / PLANCK
    }
}

pub fn derive_scales(p: &PhysicalParams) -> Result<DerivedScales> {
    p.validate()?;
    let volume = 4.0 / 3.0 * PI * p.radius.powi(3);
    let moment = p.magnetization * volume;
    let mass = p.density * volume;
    let inertia = 0.4 * mass * p.radius * p.radius;
    let kinetic_energy = HBAR * HBAR / (2.0 * inertia);
    let barrier = MU_0 * moment * moment * ZETA_3 / (8.0 * p.separation.powi(3) * PI);
    Ok(DerivedScales {
        moment,
        mass,
        inertia,
        kinetic_energy,
        rate_scale: kinetic_energy / HBAR,
        barrier,
        v0: barrier / kinetic_energy,
        hx: moment * p.b_x / kinetic_energy,
        hz: moment * p.b_z / kinetic_energy,
    })
}

/// Field in tesla corresponding to the dimensionless field `h`.
pub fn field_from_dimensionless(h: f64, s: &DerivedScales) -> Result<f64> {
    if !(s.moment > 0.0) {
        return Err(Error::domain("moment", "zero magnetic moment has no field scale"));
    }
    Ok(h * s.kinetic_energy / s.moment)
}
