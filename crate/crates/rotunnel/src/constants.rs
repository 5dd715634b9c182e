//! Physical constants (CODATA 2018) and zeta values.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permeability, N/A².
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Atomic mass constant, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848_461_929e-15;

/// Apéry's constant ζ(3).
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;
/// ζ(5).
pub const ZETA_5: f64 = 1.036_927_755_143_369_9;
