//! Initial states, closed-system evolution, well probabilities and visibility.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::rotor::Spectrum;

/// Noise floor for the three-point local-maximum test.
pub const MAXIMUM_FLOOR: f64 = 1e-6;
/// Default visibility window after the first maximum, in tunneling periods.
pub const DEFAULT_WINDOW_PERIODS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n_max: usize,
    /// c_n for n = −N..N.
    pub coeffs: DVector<Complex64>,
}

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    /// t·E_k/ħ
    Dimensionless,
    Seconds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub unit: TimeUnit,
    pub p_plus: Vec<f64>,
}

/// Left-well Gaussian packet centred at θ = −π/2 with angular width σ.
pub fn gaussian_packet(sigma: f64, n_max: usize) -> Result<StateVector> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::domain("sigma", format!("must lie in (0, 1), got {sigma}")));
    }
    if n_max < 10 {
        return Err(Error::domain("n_max", format!("must be at least 10, got {n_max}")));
    }
    let g = |x: f64| (-(x + 0.5 * PI).powi(2) / (2.0 * sigma * sigma)).exp();
    let norm2 = quad::integrate(|x| g(x) * g(x), -PI, 0.0, 1e-14)?;
    let amp = 1.0 / norm2.sqrt();
    let d = 2 * n_max + 1;
    let mut c = DVector::from_element(d, Complex64::new(0.0, 0.0));
    let s = 1.0 / (2.0 * PI).sqrt();
    for i in 0..d {
        let n = i as f64 - n_max as f64;
        let re = quad::integrate(|x| g(x) * (n * x).cos(), -PI, 0.0, 1e-13)?;
        let im = quad::integrate(|x| -g(x) * (n * x).sin(), -PI, 0.0, 1e-13)?;
        c[i] = Complex64::new(re, im) * (amp * s);
    }
    let kept = c.norm_squared();
    if 1.0 - kept > 1e-6 {
        return Err(Error::Numeric(format!(
            "basis cutoff N = {n_max} keeps only {kept} of the packet norm; increase N"
        )));
    }
    c.unscale_mut(kept.sqrt());
    Ok(StateVector { n_max, coeffs: c })
}

/// W_mn = ∫₀^π e^{i(n−m)θ} dθ/(2π); p₊ = c† W c.
pub fn well_kernel(n_max: usize) -> DMatrix<Complex64> {
    let d = 2 * n_max + 1;
    DMatrix::from_fn(d, d, |m, n| {
        let k = n as i64 - m as i64;
        if k == 0 {
            Complex64::new(0.5, 0.0)
        } else if k % 2 == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            // (e^{ikπ} − 1)/(2πik) = −2/(2πik) = i/(πk)
            Complex64::new(0.0, 1.0 / (PI * k as f64))
        }
    })
}

/// Right-well probability p₊.
pub fn well_probability(psi: &StateVector) -> f64 {
    let w = well_kernel(psi.n_max);
    (psi.coeffs.adjoint() * w * &psi.coeffs)[(0, 0)].re
}

/// (ψ₀ + e^{iφ}ψ₁)/√2 with φ chosen to minimize p₊, i.e. localized in the left well.
pub fn doublet_state(s: &Spectrum) -> Result<StateVector> {
    if s.dim() < 2 {
        return Err(Error::domain("spectrum", "needs at least two levels"));
    }
    let w = well_kernel(s.n_max);
    let v0 = s.vectors.column(0);
    let v1 = s.vectors.column(1);
    let w01 = v0.dotc(&(&w * v1));
    // p₊ = (W00 + W11)/2 + Re(e^{iφ} W01); minimal when e^{iφ}W01 = −|W01|
    let phase = if w01.norm() > 0.0 { -w01.conj() / w01.norm() } else { Complex64::new(1.0, 0.0) };
    let c = (v0 + v1 * phase) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { n_max: s.n_max, coeffs: c })
}

/// Ψ(t) = Σ_m e^{−i e_m t}⟨ψ_m|Ψ₀⟩|ψ_m⟩, t dimensionless.
pub fn evolve_state(psi0: &StateVector, s: &Spectrum, t: f64) -> StateVector {
    let a = s.vectors.adjoint() * &psi0.coeffs;
    let phased = DVector::from_fn(a.len(), |m, _| a[m] * Complex64::from_polar(1.0, -s.energies[m] * t));
    StateVector { n_max: s.n_max, coeffs: &s.vectors * phased }
}

/// p₊(t) on the given dimensionless times.
pub fn evolve(psi0: &StateVector, s: &Spectrum, times: &[f64]) -> Result<TimeSeries> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("times", "must be strictly increasing"));
    }
    let a = s.vectors.adjoint() * &psi0.coeffs;
    let total = a.norm_squared();
    let active: Vec<usize> = (0..a.len()).filter(|&m| a[m].norm_sqr() > 1e-30 * total).collect();
    let w = well_kernel(s.n_max);
    let wv: Vec<DVector<Complex64>> = active.iter().map(|&k| &w * s.vectors.column(k)).collect();
    let k = active.len();
    // W in the energy basis restricted to populated levels.
    let mut we = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    for (i, &m) in active.iter().enumerate() {
        for j in 0..k {
            we[(i, j)] = s.vectors.column(m).dotc(&wv[j]);
        }
    }
    let mut p = Vec::with_capacity(times.len());
    for &t in times {
        let c: Vec<Complex64> = active
            .iter()
            .map(|&m| a[m] * Complex64::from_polar(1.0, -s.energies[m] * t))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..k {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..k {
                row += we[(i, j)] * c[j];
            }
            acc += c[i].conj() * row;
        }
        p.push(acc.re);
    }
    Ok(TimeSeries {
        times: times.to_vec(),
        unit: TimeUnit::Dimensionless,
        p_plus: p,
    })
}

/// Uniform grid of `samples` points on [0, t_end].
pub fn time_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

/// Index of the first three-point local maximum rising or falling by more than the noise floor.
pub fn first_maximum(p: &[f64]) -> Option<usize> {
    (1..p.len().saturating_sub(1)).find(|&i| {
        p[i] >= p[i - 1]
            && p[i] >= p[i + 1]
            && (p[i] - p[i - 1] > MAXIMUM_FLOOR || p[i] - p[i + 1] > MAXIMUM_FLOOR)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityWindow {
    pub value: f64,
    /// Time of the first maximum; `None` when p₊ has none.
    pub start: Option<f64>,
    pub end: Option<f64>,
}

/// max − min of p₊ from its first maximum over `window_periods`·`period` (clipped to the data).
pub fn visibility_window(ts: &TimeSeries, period: f64, window_periods: f64) -> Result<VisibilityWindow> {
    if !(period > 0.0) {
        return Err(Error::domain("period", "must be positive"));
    }
    let Some(i0) = first_maximum(&ts.p_plus) else {
        return Ok(VisibilityWindow { value: 0.0, start: None, end: None });
    };
    let t0 = ts.times[i0];
    let t_last = *ts.times.last().unwrap_or(&t0);
    if t_last - t0 < period * (1.0 - 1e-9) {
        return Err(Error::domain(
            "window",
            format!("only {} after the first maximum, shorter than one tunneling period {period}", t_last - t0),
        ));
    }
    let t_end = (t0 + window_periods * period).min(t_last);
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (t, p) in ts.times.iter().zip(&ts.p_plus).skip(i0) {
        if *t > t_end * (1.0 + 1e-12) {
            break;
        }
        hi = hi.max(*p);
        lo = lo.min(*p);
    }
    Ok(VisibilityWindow { value: hi - lo, start: Some(t0), end: Some(t_end) })
}

/// Visibility with the default five-period window.
pub fn visibility(ts: &TimeSeries, period: f64) -> Result<f64> {
    Ok(visibility_window(ts, period, DEFAULT_WINDOW_PERIODS)?.value)
}
