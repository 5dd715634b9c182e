//! GKLS master equation: secular jump operators in the energy eigenbasis, the non-secular
//! rotational-localization dissipator, and fixed-step integrators.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::rotor::{operator_matrix, OperatorKind, Spectrum};
use crate::units::DerivedScales;
use crate::unitary::{well_kernel, StateVector, TimeSeries, TimeUnit};

/// Default Bohr-frequency grouping tolerance (units of E_k/ħ).
pub const DEFAULT_OMEGA_TOL: f64 = 1e-7;
/// Default RK4 step-bound factor: dt ≤ 1/(factor·rate).
pub const DEFAULT_STEP_FACTOR: f64 = 50.0;
/// Coupling matrix elements below this (relative to the largest) are treated as exact zeros.
pub const ENTRY_CUTOFF: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralType {
    /// γ(ω) = Γ(n+1) or Γn; zero frequency Γ(2n(ω_T)+1).
    FlatEffective,
    /// Extra factor |ω|/ω_T; zero frequency Γ·2k_BT/(ħω_T).
    Ohmic,
    /// Extra factor (|ω|/ω_T)³; no zero-frequency dephasing.
    SuperOhmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUnit {
    PerSecond,
    /// Units of E_k/ħ.
    Dimensionless,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladChannel {
    pub coupling: OperatorKind,
    pub gamma: f64,
    pub unit: RateUnit,
    /// Bath temperature (K).
    pub temperature: f64,
    pub spectral: SpectralType,
}

impl LindbladChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::domain("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::domain("temperature", format!("must be non-negative, got {}", self.temperature)));
        }
        if !self.coupling.is_hermitian() {
            return Err(Error::domain("coupling", format!("{} is not a Hermitian coupling", self.coupling)));
        }
        Ok(())
    }

    fn to_dimensionless(&self, rate: f64, scales: &DerivedScales) -> f64 {
        match self.unit {
            RateUnit::PerSecond => rate / scales.rate_scale,
            RateUnit::Dimensionless => rate,
        }
    }
}

/// n(ω) = 1/(exp(ħω/k_BT) − 1) for ω in rad/s.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::domain("omega", format!("must be positive, got {omega}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature", format!("must be non-negative, got {temperature}")));
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// γ(ω) for a Bohr frequency ω ≠ 0 (rad/s); positive ω is emission. Same unit as `ch.gamma`.
pub fn transition_rate(ch: &LindbladChannel, omega: f64, omega_ref: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::domain("omega", "zero frequency is handled by zero_frequency_rate"));
    }
    let w = omega.abs();
    let weight = match ch.spectral {
        SpectralType::FlatEffective => 1.0,
        SpectralType::Ohmic => w / omega_ref,
        SpectralType::SuperOhmic => (w / omega_ref).powi(3),
    };
    let n = bose_occupation(w, ch.temperature)?;
    Ok(ch.gamma * weight * if omega > 0.0 { n + 1.0 } else { n })
}

/// Dephasing rate of the zero-frequency component; `omega_ref` is the tunneling angular frequency.
pub fn zero_frequency_rate(ch: &LindbladChannel, omega_ref: f64) -> Result<f64> {
    Ok(match ch.spectral {
        SpectralType::FlatEffective => ch.gamma * (2.0 * bose_occupation(omega_ref, ch.temperature)? + 1.0),
        SpectralType::Ohmic => ch.gamma * 2.0 * K_B * ch.temperature / (HBAR * omega_ref),
        SpectralType::SuperOhmic => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Angular-momentum basis |n⟩.
    Number,
    /// Eigenbasis |ψ_m⟩.
    Energy,
}

/// Sparse jump operator √γ·S(ω).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub basis: Basis,
    pub dim: usize,
    /// (row, column, value) with √γ folded in.
    pub entries: Vec<(usize, usize, Complex64)>,
    /// Bohr frequency (units of E_k/ħ); `None` for non-secular operators.
    pub omega: Option<f64>,
    /// γ (units of E_k/ħ unless stated otherwise by the constructor).
    pub rate: f64,
}

impl JumpOperator {
    pub fn dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C0);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// max |[H, S(ω)] + ωS(ω)| for diagonal H = diag(e), using the unscaled S(ω).
    pub fn eigenoperator_residual(&self, energies: &[f64]) -> f64 {
        let (Some(w), true) = (self.omega, self.rate > 0.0) else {
            return 0.0;
        };
        let s = self.rate.sqrt();
        self.entries
            .iter()
            .map(|&(m, k, v)| ((energies[m] - energies[k] + w) * v / s).norm())
            .fold(0.0, f64::max)
    }
}

/// Group the energy-basis coupling `s_e` by Bohr frequency ω = e_k − e_m of each entry
/// ⟨ψ_m|S|ψ_k⟩. `rate(ω)` gives γ for ω ≠ 0; `zero_rate` is used for |ω| < ω_tol.
pub fn group_by_frequency<F>(
    energies: &[f64],
    s_e: &DMatrix<Complex64>,
    omega_tol: f64,
    mut rate: F,
    zero_rate: f64,
) -> Result<Vec<JumpOperator>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let d = energies.len();
    if s_e.nrows() != d || s_e.ncols() != d {
        return Err(Error::domain("coupling", "dimension does not match the spectrum"));
    }
    if !(omega_tol > 0.0) {
        return Err(Error::domain("omega_tol", "must be positive"));
    }
    let smax = s_e.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let cutoff = ENTRY_CUTOFF * smax.max(1.0);
    let mut zero = Vec::new();
    let mut moving: Vec<(f64, usize, usize, Complex64)> = Vec::new();
    for m in 0..d {
        for k in 0..d {
            let v = s_e[(m, k)];
            if v.norm() <= cutoff {
                continue;
            }
            let w = energies[k] - energies[m];
            if w.abs() < omega_tol {
                zero.push((m, k, v));
            } else {
                moving.push((w, m, k, v));
            }
        }
    }
    let mut out = Vec::new();
    if zero_rate > 0.0 && !zero.is_empty() {
        let s = zero_rate.sqrt();
        out.push(JumpOperator {
            basis: Basis::Energy,
            dim: d,
            entries: zero.into_iter().map(|(m, k, v)| (m, k, v * s)).collect(),
            omega: Some(0.0),
            rate: zero_rate,
        });
    }
    moving.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut i = 0;
    while i < moving.len() {
        let mut j = i + 1;
        while j < moving.len() && moving[j].0 - moving[j - 1].0 < omega_tol {
            j += 1;
        }
        let group = &moving[i..j];
        let diameter = group[group.len() - 1].0 - group[0].0;
        if diameter > 10.0 * omega_tol {
            return Err(Error::Numeric(format!(
                "Bohr-frequency group near ω = {} spans {diameter:e} > 10·ω_tol through chaining; use a smaller ω_tol",
                group[0].0
            )));
        }
        let w = group.iter().map(|g| g.0).sum::<f64>() / group.len() as f64;
        let g = rate(w)?;
        if g > 0.0 {
            let s = g.sqrt();
            out.push(JumpOperator {
                basis: Basis::Energy,
                dim: d,
                entries: group.iter().map(|&(_, m, k, v)| (m, k, v * s)).collect(),
                omega: Some(w),
                rate: g,
            });
        }
        i = j;
    }
    Ok(out)
}

/// Secular jump operators of a thermal channel. Rates are returned in units of E_k/ħ.
pub fn build_jump_operators(
    s: &Spectrum,
    ch: &LindbladChannel,
    scales: &DerivedScales,
    omega_tol: f64,
) -> Result<Vec<JumpOperator>> {
    ch.validate()?;
    if ch.gamma == 0.0 {
        return Ok(Vec::new());
    }
    let op = operator_matrix(ch.coupling, s.n_max)?;
    let s_e = s.to_energy_basis(&op);
    let omega_ref = scales.angular_frequency(s.splitting());
    if !(omega_ref > 0.0) {
        return Err(Error::domain("spectrum", "tunneling splitting must be positive"));
    }
    let zero = ch.to_dimensionless(zero_frequency_rate(ch, omega_ref)?, scales);
    group_by_frequency(
        &s.energies,
        &s_e,
        omega_tol,
        |w| Ok(ch.to_dimensionless(transition_rate(ch, scales.angular_frequency(w), omega_ref)?, scales)),
        zero,
    )
}

/// L± = √(Λ/4)·e^{±iθ} on the |n⟩ basis, without any Bohr-frequency decomposition.
/// `rate` is carried in whatever unit Λ is given.
pub fn gas_dissipator(lambda: f64, n_max: usize) -> Result<Vec<JumpOperator>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain("lambda", format!("must be non-negative, got {lambda}")));
    }
    let d = 2 * n_max + 1;
    let a = Complex64::new((lambda / 4.0).sqrt(), 0.0);
    let up = (0..d - 1).map(|i| (i + 1, i, a)).collect();
    let down = (0..d - 1).map(|i| (i, i + 1, a)).collect();
    Ok(vec![
        JumpOperator { basis: Basis::Number, dim: d, entries: up, omega: None, rate: lambda / 4.0 },
        JumpOperator { basis: Basis::Number, dim: d, entries: down, omega: None, rate: lambda / 4.0 },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dissipator {
    /// Secular energy-basis jumps (rates in units of E_k/ħ).
    Secular(Vec<JumpOperator>),
    /// Rotational localization with jumps √(Λ/4)e^{±iθ}; Λ in units of E_k/ħ.
    Localization { lambda: f64 },
}

impl Dissipator {
    pub fn none() -> Self {
        Dissipator::Secular(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub data: DMatrix<Complex64>,
    pub basis: Basis,
}

impl DensityMatrix {
    pub fn pure(psi: &StateVector) -> Self {
        DensityMatrix { data: &psi.coeffs * psi.coeffs.adjoint(), basis: Basis::Number }
    }

    pub fn in_basis(&self, basis: Basis, s: &Spectrum) -> DensityMatrix {
        let data = match (self.basis, basis) {
            (Basis::Number, Basis::Energy) => s.vectors.adjoint() * &self.data * &s.vectors,
            (Basis::Energy, Basis::Number) => &s.vectors * &self.data * s.vectors.adjoint(),
            _ => self.data.clone(),
        };
        DensityMatrix { data, basis }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.data.nrows();
        let mut e = 0.0f64;
        for i in 0..d {
            for j in i..d {
                e = e.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        e
    }

    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::domain("rho", format!("trace {tr} differs from 1")));
        }
        let h = self.hermiticity_error();
        if h > 1e-10 {
            return Err(Error::domain("rho", format!("not Hermitian ({h:e})")));
        }
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(Error::domain("rho", format!("negative eigenvalue {m:e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact block propagators for secular jumps, exact-flow Strang splitting for localization.
    Auto,
    /// Classical RK4 in the Schrödinger picture with the full step bound. Slow; for small N.
    LabFrameRk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub method: Method,
    /// Step bound dt ≤ 1/(step_factor·rate scale).
    pub step_factor: f64,
    /// Fail when the minimum eigenvalue drops below −1e-8.
    pub check_positivity: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { method: Method::Auto, step_factor: DEFAULT_STEP_FACTOR, check_positivity: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenTrajectory {
    pub series: TimeSeries,
    pub purity: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub hermiticity_error: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    /// Largest internal step used.
    pub step: f64,
    pub steps: usize,
    pub method: &'static str,
    /// State at the last output time, |n⟩ basis.
    pub final_state: DensityMatrix,
}

impl OpenTrajectory {
    pub fn max_trace_error(&self) -> f64 {
        self.trace_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.hermiticity_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Recorder {
    w: DMatrix<Complex64>,
    check: bool,
    out: OpenTrajectory,
}

impl Recorder {
    fn new(w: DMatrix<Complex64>, check: bool, d: usize, n: usize) -> Self {
        Recorder {
            w,
            check,
            out: OpenTrajectory {
                series: TimeSeries { times: Vec::with_capacity(n), unit: TimeUnit::Dimensionless, p_plus: Vec::with_capacity(n) },
                purity: Vec::with_capacity(n),
                trace_error: Vec::with_capacity(n),
                hermiticity_error: Vec::with_capacity(n),
                min_eigenvalue: Vec::with_capacity(n),
                step: 0.0,
                steps: 0,
                method: "",
                final_state: DensityMatrix { data: DMatrix::zeros(d, d), basis: Basis::Number },
            },
        }
    }

    /// `rho` and `w` must share a basis; `p₊ = Tr(ρW)`.
    fn record(&mut self, t: f64, rho: &DensityMatrix) -> Result<()> {
        let d = rho.data.nrows();
        let mut p = C0;
        for m in 0..d {
            for k in 0..d {
                p += rho.data[(m, k)] * self.w[(k, m)];
            }
        }
        let min_eig = rho.min_eigenvalue();
        if self.check && min_eig < -POSITIVITY_TOL {
            return Err(Error::Numeric(format!(
                "density matrix lost positivity at t = {t}: min eigenvalue {min_eig:e}; use a smaller step (larger step factor)"
            )));
        }
        let o = &mut self.out;
        o.series.times.push(t);
        o.series.p_plus.push(p.re);
        o.purity.push(rho.purity());
        let tr = rho.trace();
        o.trace_error.push(((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt());
        o.hermiticity_error.push(rho.hermiticity_error());
        o.min_eigenvalue.push(min_eig);
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::domain("times", "empty"));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("times", "must be non-negative and strictly increasing"));
    }
    Ok(())
}

/// Integrate from t = 0 and record at `times` (dimensionless, ascending).
pub fn integrate_master_equation(
    rho0: &DensityMatrix,
    s: &Spectrum,
    dissipator: &Dissipator,
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<OpenTrajectory> {
    check_times(times)?;
    rho0.validate()?;
    if rho0.data.nrows() != s.dim() {
        return Err(Error::domain("rho", "dimension does not match the spectrum"));
    }
    if !(opts.step_factor > 0.0) {
        return Err(Error::domain("step_factor", "must be positive"));
    }
    match (opts.method, dissipator) {
        (Method::LabFrameRk4, _) => lab_frame_rk4(rho0, s, dissipator, times, opts),
        (Method::Auto, Dissipator::Secular(jumps)) => secular_exact(rho0, s, jumps, times, opts),
        (Method::Auto, Dissipator::Localization { lambda }) => localization_strang(rho0, s, *lambda, times, opts),
    }
}

/// Σ_j [L_j ρ L_j† − ½{L_j†L_j, ρ}] as a sparse list out[a] += c·ρ[b] over flat column-major
/// indices a = row + col·d.
fn dissipator_terms(jumps: &[JumpOperator], d: usize) -> Vec<(usize, usize, Complex64)> {
    let mut terms = Vec::new();
    let mut kd = DMatrix::from_element(d, d, C0);
    for j in jumps {
        for &(mi, ki, si) in &j.entries {
            for &(mj, kj, sj) in &j.entries {
                // (LρL†)[mi, mj] += s_i ρ[ki, kj] s_j*
                terms.push((mi + mj * d, ki + kj * d, si * sj.conj()));
                if mi == mj {
                    kd[(ki, kj)] += si.conj() * sj;
                }
            }
        }
    }
    let half = Complex64::new(0.5, 0.0);
    for r in 0..d {
        for c in 0..d {
            let v = kd[(r, c)];
            if v == C0 {
                continue;
            }
            for j in 0..d {
                // −½ K ρ and −½ ρ K
                terms.push((r + j * d, c + j * d, -v * half));
                terms.push((j + c * d, j + r * d, -v * half));
            }
        }
    }
    terms.sort_by_key(|x| (x.0, x.1));
    let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(terms.len());
    for (a, b, c) in terms {
        match merged.last_mut() {
            Some(last) if last.0 == a && last.1 == b => last.2 += c,
            _ => merged.push((a, b, c)),
        }
    }
    merged
}

fn substeps(dt_out: f64, dt_max: f64) -> usize {
    if dt_out <= 0.0 {
        0
    } else {
        ((dt_out / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// The secular dissipator only couples ρ_ab to ρ_a'b' of (nearly) equal Bohr frequency, so it
/// splits into small invariant blocks that are exponentiated exactly.
struct SecularBlocks {
    /// Flat indices and generator of each block; untouched entries are constant.
    blocks: Vec<(Vec<usize>, DMatrix<Complex64>)>,
    d: usize,
}

impl SecularBlocks {
    fn new(jumps: &[JumpOperator], d: usize) -> Self {
        let terms = dissipator_terms(jumps, d);
        let mut parent: Vec<usize> = (0..d * d).collect();
        for &(a, b, _) in &terms {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); d * d];
        let mut touched = vec![false; d * d];
        for &(a, b, _) in &terms {
            touched[a] = true;
            touched[b] = true;
        }
        for i in 0..d * d {
            if touched[i] {
                let r = find(&mut parent, i);
                members[r].push(i);
            }
        }
        let mut local = vec![(usize::MAX, 0usize); d * d];
        let mut blocks = Vec::new();
        for m in members.into_iter().filter(|m| !m.is_empty()) {
            let bi = blocks.len();
            for (k, &i) in m.iter().enumerate() {
                local[i] = (bi, k);
            }
            let n = m.len();
            blocks.push((m, DMatrix::from_element(n, n, C0)));
        }
        for &(a, b, c) in &terms {
            let (bi, ka) = local[a];
            let (_, kb) = local[b];
            blocks[bi].1[(ka, kb)] += c;
        }
        SecularBlocks { blocks, d }
    }

    /// e^{G dt} per block. With rates up to ~1e6 the rounding in G alone breaks trace
    /// preservation at the 1e-10 level per step, so the exact constraint Σ_a P[aa, b] = δ_b,diag
    /// is restored on the diagonal rows.
    fn propagators(&self, dt: f64) -> Vec<DMatrix<Complex64>> {
        self.blocks
            .iter()
            .map(|(idx, g)| {
                let mut p = (g * Complex64::new(dt, 0.0)).exp();
                let diag: Vec<usize> = (0..idx.len()).filter(|&k| idx[k] % (self.d + 1) == 0).collect();
                if let Some(&first) = diag.first() {
                    for c in 0..idx.len() {
                        let on_diag = idx[c] % (self.d + 1) == 0;
                        let sum: Complex64 = diag.iter().map(|&k| p[(k, c)]).sum();
                        let target = if on_diag { Complex64::new(1.0, 0.0) } else { C0 };
                        p[(if on_diag { c } else { first }, c)] += target - sum;
                    }
                }
                p
            })
            .collect()
    }

    fn apply(&self, props: &[DMatrix<Complex64>], rho: &mut DMatrix<Complex64>) {
        let flat = rho.as_mut_slice();
        let mut buf = Vec::new();
        for ((idx, _), p) in self.blocks.iter().zip(props) {
            buf.clear();
            buf.extend(idx.iter().map(|&i| flat[i]));
            for (r, &i) in idx.iter().enumerate() {
                let mut acc = C0;
                for (c, v) in buf.iter().enumerate() {
                    acc += p[(r, c)] * v;
                }
                flat[i] = acc;
            }
        }
    }
}

/// Secular GKLS: the dissipator commutes with the Hamiltonian superoperator, so
/// ρ(t) = e^{−iHt}(e^{𝒟t}ρ₀)e^{iHt}; e^{𝒟t} is applied block by block and the phases exactly.
fn secular_exact(
    rho0: &DensityMatrix,
    s: &Spectrum,
    jumps: &[JumpOperator],
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<OpenTrajectory> {
    let d = s.dim();
    if jumps.iter().any(|j| j.basis != Basis::Energy || j.dim != d) {
        return Err(Error::domain("jumps", "secular jumps must be energy-basis operators of matching dimension"));
    }
    let blocks = SecularBlocks::new(jumps, d);
    let w_e = s.to_energy_basis(&well_kernel(s.n_max));
    let mut rec = Recorder::new(w_e, opts.check_positivity, d, times.len());
    let mut rho = rho0.in_basis(Basis::Energy, s).data;
    let frame = |rho: &DMatrix<Complex64>, t: f64| -> DensityMatrix {
        let data = DMatrix::from_fn(d, d, |m, k| rho[(m, k)] * Complex64::from_polar(1.0, -(s.energies[m] - s.energies[k]) * t));
        DensityMatrix { data, basis: Basis::Energy }
    };
    // Uniform output grids reuse one set of propagators.
    let mut cache: Option<(f64, Vec<DMatrix<Complex64>>)> = None;
    let mut t = 0.0;
    let mut steps = 0;
    let mut step_used = 0.0f64;
    for &target in times {
        let dt = target - t;
        if dt > 0.0 && !blocks.blocks.is_empty() {
            let reuse = matches!(&cache, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cache = Some((dt, blocks.propagators(dt)));
            }
            if let Some((_, props)) = &cache {
                blocks.apply(props, &mut rho);
            }
            steps += 1;
            step_used = step_used.max(dt);
        }
        t = target;
        rec.record(t, &frame(&rho, t))?;
    }
    let mut out = rec.out;
    out.step = step_used;
    out.steps = steps;
    out.method = "secular block exponential";
    out.final_state = frame(&rho, t).in_basis(Basis::Number, s);
    Ok(out)
}

/// Exact flow of the localization dissipator, stripe by stripe: the coherences ρ_{n,n+k} of a
/// fixed k form a closed tridiagonal system.
struct StripeFlow {
    /// exp(G_k τ) for k = 0..d−1 (real symmetric).
    props: Vec<DMatrix<f64>>,
}

impl StripeFlow {
    fn new(lambda: f64, n_max: usize, tau: f64) -> Self {
        let d = 2 * n_max + 1;
        let g = |i: usize| -> f64 { (if i + 1 < d { 1.0 } else { 0.0 }) + (if i > 0 { 1.0 } else { 0.0 }) };
        let props = (0..d)
            .map(|k| {
                let len = d - k;
                let gen = DMatrix::from_fn(len, len, |a, b| {
                    if a == b {
                        -lambda / 8.0 * (g(a) + g(a + k))
                    } else if a.abs_diff(b) == 1 {
                        lambda / 4.0
                    } else {
                        0.0
                    }
                });
                let eig = SymmetricEigen::new(gen);
                let q = &eig.eigenvectors;
                let e = eig.eigenvalues.map(|x| (x * tau).exp());
                q * DMatrix::from_diagonal(&e) * q.transpose()
            })
            .collect();
        StripeFlow { props }
    }

    fn apply(&self, rho: &mut DMatrix<Complex64>, buf: &mut Vec<Complex64>) {
        let d = rho.nrows();
        for k in 0..d {
            let p = &self.props[k];
            let len = d - k;
            for sign in [0usize, 1] {
                if k == 0 && sign == 1 {
                    continue;
                }
                // sign 0: ρ[a, a+k]; sign 1: ρ[a+k, a]
                buf.clear();
                for a in 0..len {
                    buf.push(if sign == 0 { rho[(a, a + k)] } else { rho[(a + k, a)] });
                }
                for a in 0..len {
                    let mut acc = C0;
                    for b in 0..len {
                        acc += buf[b] * p[(a, b)];
                    }
                    if sign == 0 {
                        rho[(a, a + k)] = acc;
                    } else {
                        rho[(a + k, a)] = acc;
                    }
                }
            }
        }
    }
}

/// Strang splitting e^{𝒟τ/2} e^{ℋτ} e^{𝒟τ/2} with both flows exact; every step is a composition of
/// CPTP maps, so trace, Hermiticity and positivity are preserved to round-off.
fn localization_strang(
    rho0: &DensityMatrix,
    s: &Spectrum,
    lambda: f64,
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<OpenTrajectory> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain("lambda", format!("must be non-negative, got {lambda}")));
    }
    let d = s.dim();
    let w = well_kernel(s.n_max);
    let mut rec = Recorder::new(w, opts.check_positivity, d, times.len());
    let mut rho = rho0.in_basis(Basis::Number, s).data;
    let scale = lambda.max(s.splitting().abs());
    let dt_max = 1.0 / (opts.step_factor * scale);
    let mut cache: Option<(f64, DMatrix<Complex64>, StripeFlow)> = None;
    let mut buf = Vec::with_capacity(d);
    let mut t = 0.0;
    let mut steps = 0;
    let mut step_used = 0.0f64;
    for &target in times {
        let n = if lambda == 0.0 { 1 } else { substeps(target - t, dt_max) };
        if target > t {
            let h = (target - t) / n as f64;
            step_used = step_used.max(h);
            let fresh = match &cache {
                Some((h0, _, _)) => ((h0 - h) / h).abs() > 1e-13,
                None => true,
            };
            if fresh {
                let phases = nalgebra::DVector::from_fn(d, |m, _| Complex64::from_polar(1.0, -s.energies[m] * h));
                let u = &s.vectors * DMatrix::from_diagonal(&phases) * s.vectors.adjoint();
                cache = Some((h, u, StripeFlow::new(lambda, s.n_max, 0.5 * h)));
            }
            let (_, u, flow) = cache.as_ref().expect("propagator cache");
            let ud = u.adjoint();
            for _ in 0..n {
                if lambda > 0.0 {
                    flow.apply(&mut rho, &mut buf);
                }
                rho = u * &rho * &ud;
                if lambda > 0.0 {
                    flow.apply(&mut rho, &mut buf);
                }
            }
            steps += n;
        }
        t = target;
        rec.record(t, &DensityMatrix { data: rho.clone(), basis: Basis::Number })?;
    }
    let mut out = rec.out;
    out.step = step_used;
    out.steps = steps;
    out.method = "localization strang splitting (exact sub-flows)";
    out.final_state = DensityMatrix { data: rho, basis: Basis::Number };
    Ok(out)
}

/// Reference integrator: RK4 on dρ/dt = −i[H,ρ] + Σ LρL† − ½{L†L,ρ} in the Schrödinger picture with
/// dt ≤ 1/(factor·max(max|e_m − e_n|, ‖Σ L†L‖)). Secular jumps are applied entry by entry in the energy
/// basis; localization runs in the |n⟩ basis.
fn lab_frame_rk4(
    rho0: &DensityMatrix,
    s: &Spectrum,
    dissipator: &Dissipator,
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<OpenTrajectory> {
    let d = s.dim();
    let (basis, h, jumps) = match dissipator {
        Dissipator::Secular(j) => {
            if j.iter().any(|j| j.basis != Basis::Energy || j.dim != d) {
                return Err(Error::domain("jumps", "secular jumps must be energy-basis operators of matching dimension"));
            }
            let h = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |m, _| Complex64::new(s.energies[m], 0.0)));
            (Basis::Energy, h, j.clone())
        }
        Dissipator::Localization { lambda } => {
            let h = &s.vectors
                * DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |m, _| Complex64::new(s.energies[m], 0.0)))
                * s.vectors.adjoint();
            (Basis::Number, h, gas_dissipator(*lambda, s.n_max)?)
        }
    };
    let mut k = DMatrix::from_element(d, d, C0);
    for j in &jumps {
        k += j.dense().adjoint() * j.dense();
    }
    let heff = &h - &k * Complex64::new(0.0, 0.5);
    let spread = s.energies[d - 1] - s.energies[0];
    let knorm = (0..d).map(|r| (0..d).map(|c| k[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let dt_max = 1.0 / (opts.step_factor * spread.max(knorm));
    let rhs = |rho: &DMatrix<Complex64>| -> DMatrix<Complex64> {
        let mut g = &heff * rho * Complex64::new(0.0, -1.0);
        for j in &jumps {
            for &(mi, ki, si) in &j.entries {
                for &(mj, kj, sj) in &j.entries {
                    g[(mi, mj)] += si * rho[(ki, kj)] * sj.conj() * 0.5;
                }
            }
        }
        let gd = g.adjoint();
        g + gd
    };
    let w = match basis {
        Basis::Energy => s.to_energy_basis(&well_kernel(s.n_max)),
        Basis::Number => well_kernel(s.n_max),
    };
    let mut rec = Recorder::new(w, opts.check_positivity, d, times.len());
    let mut rho = rho0.in_basis(basis, s).data;
    let mut t = 0.0;
    let mut steps = 0;
    let mut step_used = 0.0f64;
    for &target in times {
        let n = substeps(target - t, dt_max);
        if n > 0 {
            let dt = (target - t) / n as f64;
            step_used = step_used.max(dt);
            let c = |x: f64| Complex64::new(x, 0.0);
            for _ in 0..n {
                let a = rhs(&rho);
                let b = rhs(&(&rho + &a * c(0.5 * dt)));
                let cc = rhs(&(&rho + &b * c(0.5 * dt)));
                let e = rhs(&(&rho + &cc * c(dt)));
                rho += (a + (b + cc) * c(2.0) + e) * c(dt / 6.0);
            }
            steps += n;
        }
        t = target;
        rec.record(t, &DensityMatrix { data: rho.clone(), basis })?;
    }
    let mut out = rec.out;
    out.step = step_used;
    out.steps = steps;
    out.method = "lab-frame rk4";
    out.final_state = DensityMatrix { data: rho, basis }.in_basis(Basis::Number, s);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Mean of p₊ over the last quartile.
    pub p_inf: f64,
    /// Peak-to-peak spread of the last quartile is below 1e-3.
    pub converged: bool,
    /// Decay rate of |p₊ − p∞| (inverse time units of the series).
    pub rate: Option<f64>,
    pub relaxation_time: Option<f64>,
}

/// Long-time value and envelope decay rate of p₊(t).
pub fn steady_state_diagnostics(ts: &TimeSeries) -> Result<SteadyState> {
    let n = ts.p_plus.len();
    if n < 8 {
        return Err(Error::domain("trajectory", "needs at least 8 samples"));
    }
    let tail = &ts.p_plus[3 * n / 4..];
    let p_inf = tail.iter().sum::<f64>() / tail.len() as f64;
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    if spread >= 1e-3 {
        return Ok(SteadyState { p_inf, converged: false, rate: None, relaxation_time: None });
    }
    // Envelope: local maxima of |p − p∞| above the tail noise, or all points if there are too few.
    let dev: Vec<f64> = ts.p_plus.iter().map(|p| (p - p_inf).abs()).collect();
    let floor = (spread * 2.0).max(1e-9);
    let mut pts: Vec<(f64, f64)> = (1..n - 1)
        .filter(|&i| dev[i] >= dev[i - 1] && dev[i] >= dev[i + 1] && dev[i] > floor)
        .map(|i| (ts.times[i], dev[i].ln()))
        .collect();
    if pts.len() < 3 {
        pts = (0..n).filter(|&i| dev[i] > floor).map(|i| (ts.times[i], dev[i].ln())).collect();
    }
    if pts.len() < 3 {
        return Ok(SteadyState { p_inf, converged: true, rate: None, relaxation_time: None });
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    let slope = sxy / sxx;
    let rate = -slope;
    Ok(SteadyState {
        p_inf,
        converged: true,
        rate: (rate > 0.0).then_some(rate),
        relaxation_time: (rate > 0.0).then(|| 1.0 / rate),
    })
}

