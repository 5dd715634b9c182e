//! Closed-form decoherence rates for the physical environments and the ranked budget.

use std::f64::consts::PI;

use crate::constants::{FLUX_QUANTUM, HBAR, K_B, MU_0, ZETA_3, ZETA_5};
use crate::error::{Error, Result};
use crate::open::bose_occupation;
use crate::quad;
use crate::units::{DerivedScales, PhysicalParams};

/// Angular constant of the gas-scattering rate.
pub const GAS_SIGMA: f64 = 2.16;
/// Geometric factor of the plate eddy-current rate back-solved from the 1.07e5 s⁻¹ prefactor.
pub const I0_FIXED: f64 = 2.3e2;

/// K = 93ζ(5)/(4ζ(3)).
pub fn geometry_constant() -> f64 {
    93.0 * ZETA_5 / (4.0 * ZETA_3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasParams {
    /// Molecule mass (kg).
    pub mass: f64,
    /// Number density (m⁻³).
    pub density: f64,
    /// Temperature (K).
    pub temperature: f64,
    /// Born strength a (J).
    pub born_strength: f64,
    /// |b₁| (m³); |b₋₁| = |b₁|.
    pub b1: f64,
}

impl GasParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("density", self.density),
            ("temperature", self.temperature),
            ("born_strength", self.born_strength),
            ("b1", self.b1),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// |b₁| = (Δr/R)·√(2π)·R³.
pub fn roughness_to_b1(rel_roughness: f64, radius: f64) -> Result<f64> {
    if !(rel_roughness >= 0.0) {
        return Err(Error::domain("roughness", format!("must be non-negative, got {rel_roughness}")));
    }
    Ok(rel_roughness * (2.0 * PI).sqrt() * radius.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossSection {
    /// σ = πR²
    Geometric,
    /// σ = 4πR²
    Full,
}

/// a = 3ħ²√σ/(2 m_gas R³).
pub fn born_strength(radius: f64, gas_mass: f64, mode: CrossSection) -> Result<f64> {
    if !(radius > 0.0) || !(gas_mass > 0.0) {
        return Err(Error::domain("born_strength", "radius and gas mass must be positive"));
    }
    let sigma = match mode {
        CrossSection::Geometric => PI * radius * radius,
        CrossSection::Full => 4.0 * PI * radius * radius,
    };
    Ok(3.0 * HBAR * HBAR * sigma.sqrt() / (2.0 * gas_mass * radius.powi(3)))
}

/// Λ_R = 96 m²/(π²ħ⁴)·n·Σ·a²·⟨v⟩·(|b₁|² + |b₋₁|²), ⟨v⟩ = √(8k_BT/(πm)).
pub fn gas_localization_rate(g: &GasParams) -> Result<f64> {
    g.validate()?;
    if g.mass == 0.0 {
        return Ok(0.0);
    }
    let v_mean = (8.0 * K_B * g.temperature / (PI * g.mass)).sqrt();
    Ok(96.0 * g.mass * g.mass / (PI * PI * HBAR.powi(4))
        * g.density
        * GAS_SIGMA
        * g.born_strength.powi(2)
        * v_mean
        * 2.0
        * g.b1
        * g.b1)
}

/// Eddy-current damping inside the particle.
pub fn eddy_particle_rate(p: &PhysicalParams, scales: &DerivedScales, conductivity: f64) -> Result<f64> {
    if !(conductivity >= 0.0) {
        return Err(Error::domain("conductivity", "must be non-negative"));
    }
    Ok(2.0 * PI * MU_0 * MU_0 * ZETA_3 * ZETA_3 / 135.0 * p.magnetization.powi(2) * conductivity
        * p.radius.powi(11)
        / (scales.inertia * p.separation.powi(6)))
}

/// Normal-fluid fraction exp(−1.76 T_c/T), clipped to [0, 1].
pub fn quasiparticle_fraction(temperature: f64, critical_temperature: f64) -> f64 {
    if !(temperature > 0.0) {
        return 0.0;
    }
    (-1.76 * critical_temperature / temperature).exp().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum I0Mode {
    Fixed,
    Quadrature,
}

/// Truncated image series of the particle field at a plate point, in units μ₀μ/(4πL³).
fn image_field_sq(x: f64, y: f64, z: f64, images: i64) -> f64 {
    let mut bx = [0.0f64; 2];
    let mut by = [0.0f64; 2];
    for n in -images..=images {
        // μ_n = (−i, 0, (−1)ⁿ): real part (0,0,±1), imaginary part (−1,0,0)
        let dz = z - n as f64;
        let r2 = x * x + y * y + dz * dz;
        let r5 = r2 * r2 * r2.sqrt();
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        let mr = s * dz;
        bx[0] += 3.0 * mr * x / r5;
        by[0] += 3.0 * mr * y / r5;
        bx[1] += (r2 - 3.0 * x * x) / r5;
        by[1] -= 3.0 * x * y / r5;
    }
    bx[0] * bx[0] + bx[1] * bx[1] + by[0] * by[0] + by[1] * by[1]
}

/// I₀ = 16π²L⁴/(μ₀²μ²)∫dA |B∥|² over the plate at z = −L/2, images |n| ≤ 50.
pub fn i0_quadrature() -> Result<f64> {
    i0_quadrature_with(50, 1e-5)
}

pub fn i0_quadrature_with(images: i64, rel_tol: f64) -> Result<f64> {
    let z = -0.5;
    // ρ = u/(1 − u) maps [0, 1) onto [0, ∞)
    let radial = |u: f64| -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let rho = u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        let ring = quad::integrate(
            |phi| image_field_sq(rho * phi.cos(), rho * phi.sin(), z, images),
            0.0,
            2.0 * PI,
            1e-10,
        )
        .unwrap_or(f64::NAN);
        ring * rho * jac
    };
    let coarse = quad::integrate(radial, 0.0, 1.0, 1e-3)?;
    let value = quad::integrate(radial, 0.0, 1.0, rel_tol * coarse.abs())?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("I0 quadrature produced a non-finite value ({images} images)")));
    }
    Ok(value)
}

/// Eddy-current damping in the plates.
pub fn eddy_plate_rate(
    p: &PhysicalParams,
    scales: &DerivedScales,
    normal_conductivity: f64,
    london_depth: f64,
    fraction: f64,
    mode: I0Mode,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::domain("quasiparticle_fraction", format!("must lie in [0, 1], got {fraction}")));
    }
    let i0 = match mode {
        I0Mode::Fixed => I0_FIXED,
        I0Mode::Quadrature => i0_quadrature()?,
    };
    Ok(eddy_plate_prefactor(p, scales, normal_conductivity, london_depth) * i0 * fraction)
}

/// Plate rate per unit I₀ and unit quasiparticle fraction.
pub fn eddy_plate_prefactor(p: &PhysicalParams, scales: &DerivedScales, normal_conductivity: f64, london_depth: f64) -> f64 {
    MU_0 * MU_0 / 18.0 * normal_conductivity * p.magnetization.powi(2) * p.radius.powi(6) * london_depth.powi(3)
        / (scales.inertia * p.separation.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    /// Plate density (kg/m³).
    pub density: f64,
    /// Longitudinal sound speed (m/s).
    pub c_l: f64,
    /// Transverse sound speed (m/s).
    pub c_t: f64,
}

impl ElasticParams {
    pub fn tantalum() -> Self {
        ElasticParams { density: 16.65e3, c_l: 4146.0, c_t: 2032.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(Error::domain("density", "must be positive"));
        }
        if !(self.c_t > 0.0 && self.c_l > self.c_t) {
            return Err(Error::domain("sound_speed", "requires c_l > c_t > 0"));
        }
        Ok(())
    }
}

/// Below this the closed forms lose ~1e-8 to cancellation; the four-term series is exact to ~1e-12 here.
const SERIES_SWITCH: f64 = 0.1;

/// Angular integrals (Φ_l, Φ_t) of the plate-width spectral density.
pub fn phonon_angular_integrals(a: f64) -> (f64, f64) {
    if a.abs() <= SERIES_SWITCH {
        let b2 = 4.0 * a * a;
        let mut pl = 0.0;
        let mut pt = 0.0;
        let mut term = 1.0; // (2a)^{2k}/(2k)!
        for k in 1..=4 {
            let kk = 2 * k;
            term *= b2 / ((kk - 1) * kk) as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            pl += sign * term * 2.0 / (kk + 3) as f64;
            pt += sign * term * (2.0 / (kk + 1) as f64 - 2.0 / (kk + 3) as f64);
        }
        return (pl, pt);
    }
    let (s, c) = (2.0 * a).sin_cos();
    let pl = 2.0 / 3.0 - s / a - c / (a * a) + s / (2.0 * a.powi(3));
    let pt = 4.0 / 3.0 + c / (a * a) - s / (2.0 * a.powi(3));
    (pl, pt)
}

/// Width-fluctuation spectral density J_L(ω).
pub fn width_spectral_density(omega: f64, separation: f64, e: &ElasticParams) -> f64 {
    let (pl, _) = phonon_angular_integrals(omega * separation / (2.0 * e.c_l));
    let (_, pt) = phonon_angular_integrals(omega * separation / (2.0 * e.c_t));
    HBAR * omega / (4.0 * PI * PI * e.density) * (pl / e.c_l.powi(3) + pt / e.c_t.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcousticRates {
    /// Channel strength Γ at ω_T (s⁻¹).
    pub gamma: f64,
    /// Γ(n_T + 1)
    pub down: f64,
    /// Γ·n_T
    pub up: f64,
    /// ω_T·L/c_t < 0.1, closed form used.
    pub long_wavelength: bool,
}

/// One-phonon rates of the cos2θ coupling at the tunneling angular frequency ω_T (rad/s).
pub fn acoustic_phonon_rate(omega_t: f64, barrier: f64, separation: f64, e: &ElasticParams, temperature: f64) -> Result<AcousticRates> {
    e.validate()?;
    let long_wavelength = omega_t * separation / e.c_t < 0.1;
    let gamma = if long_wavelength {
        3.0 * barrier * barrier * omega_t.powi(3) / (40.0 * PI * HBAR * e.density)
            * (3.0 / e.c_l.powi(5) + 2.0 / e.c_t.powi(5))
    } else {
        2.0 * PI / (HBAR * HBAR) * 9.0 * barrier * barrier / (4.0 * separation * separation)
            * width_spectral_density(omega_t, separation, e)
    };
    let n = bose_occupation(omega_t, temperature)?;
    Ok(AcousticRates { gamma, down: gamma * (n + 1.0), up: gamma * n, long_wavelength })
}

/// γ = (2/ħ²)(K V₀ S_z/L²)² Δf with S_z = (√S_z)².
pub fn seismic_rate(sqrt_sz: f64, bandwidth: f64, barrier: f64, separation: f64) -> Result<f64> {
    if !(sqrt_sz >= 0.0) || !(bandwidth >= 0.0) {
        return Err(Error::domain("seismic", "noise amplitude and bandwidth must be non-negative"));
    }
    let sz = sqrt_sz * sqrt_sz;
    let c = geometry_constant() * barrier * sz / (separation * separation);
    Ok(2.0 / (HBAR * HBAR) * c * c * bandwidth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquidParams {
    /// Level splitting Δ (rad/s).
    pub splitting: f64,
    /// Persistent current (A).
    pub persistent_current: f64,
    pub t1: f64,
    pub t2: f64,
    /// Operating temperature (K).
    pub temperature: f64,
    /// Flux amplitude Φ₁ (Wb).
    pub flux_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquidRates {
    pub full: f64,
    /// Δ ≫ κ limit.
    pub dispersive: f64,
    pub kappa: f64,
}

pub fn squid_backaction_rate(sq: &SquidParams) -> Result<SquidRates> {
    if !(sq.splitting > 0.0 && sq.t1 > 0.0 && sq.t2 > 0.0) {
        return Err(Error::domain("squid", "splitting, T1 and T2 must be positive"));
    }
    let zeta = 2.0 * FLUX_QUANTUM * sq.persistent_current / HBAR;
    let nb = bose_occupation(sq.splitting, sq.temperature)?;
    let kappa = 2.0 * PI * (1.0 / sq.t2 + (2.0 * nb + 1.0) / (2.0 * sq.t1));
    let num = 2.0 * zeta * zeta * sq.flux_amplitude * sq.flux_amplitude * kappa;
    Ok(SquidRates {
        full: num / (sq.splitting * sq.splitting + kappa * kappa),
        dispersive: num / (sq.splitting * sq.splitting),
        kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EddyPlateParams {
    pub normal_conductivity: f64,
    pub london_depth: f64,
    pub critical_temperature: f64,
    pub temperature: f64,
    pub i0_mode: I0Mode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeismicParams {
    pub sqrt_sz: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcousticParams {
    pub elastic: ElasticParams,
    pub temperature: f64,
}

/// Channel inputs; `None` means not configured.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BudgetInputs {
    pub seismic: Option<SeismicParams>,
    pub gas: Option<GasParams>,
    pub eddy_plate: Option<EddyPlateParams>,
    /// Particle conductivity (S/m).
    pub eddy_particle: Option<f64>,
    pub acoustic: Option<AcousticParams>,
    pub squid: Option<SquidParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEntry {
    pub channel: &'static str,
    pub formula: &'static str,
    /// s⁻¹
    pub rate: f64,
    pub inputs: Vec<(&'static str, f64)>,
    /// rate/(2πf_T)
    pub ratio_to_tunneling: f64,
    /// rate/Λ_R when the gas channel is configured with Λ_R > 0.
    pub ratio_to_gas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// f_T (Hz).
    pub tunneling_frequency: f64,
    pub entries: Vec<RateEntry>,
    /// Indices into `entries` of the strictly positive rates, descending.
    pub ranking: Vec<usize>,
    pub not_configured: Vec<&'static str>,
}

impl RateReport {
    pub fn rate(&self, channel: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.channel == channel).map(|e| e.rate)
    }

    pub fn ranked_channels(&self) -> Vec<&'static str> {
        self.ranking.iter().map(|&i| self.entries[i].channel).collect()
    }
}

/// Evaluate every configured channel and rank by rate.
pub fn decoherence_budget(
    inputs: &BudgetInputs,
    p: &PhysicalParams,
    scales: &DerivedScales,
    tunneling_frequency: f64,
) -> Result<RateReport> {
    let omega_t = 2.0 * PI * tunneling_frequency;
    let mut raw: Vec<(&'static str, &'static str, f64, Vec<(&'static str, f64)>)> = Vec::new();
    let mut missing = Vec::new();

    match inputs.seismic {
        Some(s) => raw.push((
            "seismic",
            "(2/hbar^2)(K V0 S_z/L^2)^2 df",
            seismic_rate(s.sqrt_sz, s.bandwidth, scales.barrier, p.separation)?,
            vec![("sqrt_sz_m_per_rthz", s.sqrt_sz), ("bandwidth_hz", s.bandwidth)],
        )),
        None => missing.push("seismic"),
    }
    let mut lambda = None;
    match inputs.gas {
        Some(g) => {
            let r = gas_localization_rate(&g)?;
            lambda = Some(r);
            raw.push((
                "gas",
                "96 m^2/(pi^2 hbar^4) n Sigma a^2 <v> 2|b1|^2",
                r,
                vec![
                    ("mass_kg", g.mass),
                    ("density_m3", g.density),
                    ("temperature_k", g.temperature),
                    ("born_strength_j", g.born_strength),
                    ("b1_m3", g.b1),
                ],
            ));
        }
        None => missing.push("gas"),
    }
    match inputs.eddy_plate {
        Some(e) => {
            let frac = quasiparticle_fraction(e.temperature, e.critical_temperature);
            raw.push((
                "eddy_plate",
                "I0 mu0^2/18 sigma_n Ms^2 R^6 lambda_L^3/(I L^4) n_n/n",
                eddy_plate_rate(p, scales, e.normal_conductivity, e.london_depth, frac, e.i0_mode)?,
                vec![
                    ("normal_conductivity_s_m", e.normal_conductivity),
                    ("london_depth_m", e.london_depth),
                    ("critical_temperature_k", e.critical_temperature),
                    ("temperature_k", e.temperature),
                    ("quasiparticle_fraction", frac),
                ],
            ));
        }
        None => missing.push("eddy_plate"),
    }
    match inputs.eddy_particle {
        Some(sigma) => raw.push((
            "eddy_particle",
            "2 pi mu0^2 zeta3^2/135 Ms^2 sigma R^11/(I L^6)",
            eddy_particle_rate(p, scales, sigma)?,
            vec![("conductivity_s_m", sigma)],
        )),
        None => missing.push("eddy_particle"),
    }
    match inputs.acoustic {
        Some(a) => {
            let r = acoustic_phonon_rate(omega_t, scales.barrier, p.separation, &a.elastic, a.temperature)?;
            raw.push((
                "acoustic",
                "Gamma(n_T+1), Gamma = 3 V0^2 w_T^3/(40 pi hbar rho_s)(3/c_l^5 + 2/c_t^5)",
                r.down,
                vec![
                    ("gamma_s", r.gamma),
                    ("gamma_up_s", r.up),
                    ("plate_density_kg_m3", a.elastic.density),
                    ("c_l_m_s", a.elastic.c_l),
                    ("c_t_m_s", a.elastic.c_t),
                    ("temperature_k", a.temperature),
                ],
            ));
        }
        None => missing.push("acoustic"),
    }
    match inputs.squid {
        Some(sq) => {
            let r = squid_backaction_rate(&sq)?;
            raw.push((
                "squid",
                "2 zeta^2 Phi1^2 kappa/(Delta^2 + kappa^2)",
                r.full,
                vec![
                    ("splitting_rad_s", sq.splitting),
                    ("persistent_current_a", sq.persistent_current),
                    ("t1_s", sq.t1),
                    ("t2_s", sq.t2),
                    ("temperature_k", sq.temperature),
                    ("flux_amplitude_wb", sq.flux_amplitude),
                    ("dispersive_s", r.dispersive),
                ],
            ));
        }
        None => missing.push("squid"),
    }

    let entries: Vec<RateEntry> = raw
        .into_iter()
        .map(|(channel, formula, rate, inputs)| RateEntry {
            channel,
            formula,
            rate,
            inputs,
            ratio_to_tunneling: if omega_t > 0.0 { rate / omega_t } else { f64::INFINITY },
            ratio_to_gas: lambda.filter(|l| *l > 0.0).map(|l| rate / l),
        })
        .collect();
    let mut ranking: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].rate > 0.0).collect();
    ranking.sort_by(|&a, &b| entries[b].rate.total_cmp(&entries[a].rate));
    Ok(RateReport { tunneling_frequency, entries, ranking, not_configured: missing })
}
