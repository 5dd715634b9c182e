//! Rotor Hamiltonian in the truncated angular-momentum basis |n⟩, n ∈ {−N..N}.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::DerivedScales;

/// Eigenvalues closer than this (units of E_k) form a degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Dimensionless problem: H/E_k = −∂²_θ + (v₀/2)(1 + cos2θ) − h_z cosθ − h_x sinθ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessConfig {
    pub v0: f64,
    pub hx: f64,
    pub hz: f64,
    /// Basis cutoff N.
    pub n_max: usize,
}

impl DimensionlessConfig {
    pub fn new(v0: f64, hx: f64, hz: f64, n_max: usize) -> Self {
        DimensionlessConfig { v0, hx, hz, n_max }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 >= 0.0) || !self.v0.is_finite() {
            return Err(Error::domain("v0", format!("must be non-negative, got {}", self.v0)));
        }
        if !self.hx.is_finite() {
            return Err(Error::domain("hx", "must be finite"));
        }
        if !self.hz.is_finite() {
            return Err(Error::domain("hz", "must be finite"));
        }
        if self.n_max < 2 {
            return Err(Error::domain("n_max", format!("must be at least 2, got {}", self.n_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Cos,
    Sin,
    Cos2,
    Sin2,
    /// Angular momentum L_θ (units of ħ).
    AngularMomentum,
    /// e^{+iθ}
    Raise,
    /// e^{−iθ}
    Lower,
}

impl OperatorKind {
    /// The five bath-coupling operators.
    pub const COUPLINGS: [OperatorKind; 5] = [
        OperatorKind::Cos,
        OperatorKind::Sin,
        OperatorKind::Cos2,
        OperatorKind::Sin2,
        OperatorKind::AngularMomentum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Cos => "cos",
            OperatorKind::Sin => "sin",
            OperatorKind::Cos2 => "cos2",
            OperatorKind::Sin2 => "sin2",
            OperatorKind::AngularMomentum => "l_theta",
            OperatorKind::Raise => "exp_plus",
            OperatorKind::Lower => "exp_minus",
        }
    }

    pub fn is_hermitian(&self) -> bool {
        !matches!(self, OperatorKind::Raise | OperatorKind::Lower)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos" | "cos_theta" => Ok(OperatorKind::Cos),
            "sin" | "sin_theta" => Ok(OperatorKind::Sin),
            "cos2" | "cos_2theta" => Ok(OperatorKind::Cos2),
            "sin2" | "sin_2theta" => Ok(OperatorKind::Sin2),
            "l_theta" | "l" => Ok(OperatorKind::AngularMomentum),
            "exp_plus" => Ok(OperatorKind::Raise),
            "exp_minus" => Ok(OperatorKind::Lower),
            other => Err(Error::domain("operator", format!("unknown kind '{other}'"))),
        }
    }
}

/// Matrix ⟨n|A|m⟩ over n, m ∈ {−N..N}; row/column index i = n + N.
pub fn operator_matrix(kind: OperatorKind, n_max: usize) -> Result<DMatrix<Complex64>> {
    if n_max < 2 {
        return Err(Error::domain("n_max", format!("must be at least 2, got {n_max}")));
    }
    let d = 2 * n_max + 1;
    let mut a = DMatrix::from_element(d, d, C0);
    let half = Complex64::new(0.5, 0.0);
    // 1/(2i) = −i/2
    let sin_up = Complex64::new(0.0, -0.5);
    match kind {
        OperatorKind::Cos | OperatorKind::Cos2 => {
            let s = if kind == OperatorKind::Cos { 1 } else { 2 };
            for i in 0..d - s {
                a[(i + s, i)] = half;
                a[(i, i + s)] = half;
            }
        }
        OperatorKind::Sin | OperatorKind::Sin2 => {
            let s = if kind == OperatorKind::Sin { 1 } else { 2 };
            for i in 0..d - s {
                a[(i + s, i)] = sin_up;
                a[(i, i + s)] = -sin_up;
            }
        }
        OperatorKind::AngularMomentum => {
            for i in 0..d {
                a[(i, i)] = Complex64::new(i as f64 - n_max as f64, 0.0);
            }
        }
        OperatorKind::Raise => {
            for i in 0..d - 1 {
                a[(i + 1, i)] = Complex64::new(1.0, 0.0);
            }
        }
        OperatorKind::Lower => {
            for i in 0..d - 1 {
                a[(i, i + 1)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    Ok(a)
}

/// Hamiltonian in units of E_k.
pub fn build_hamiltonian(cfg: &DimensionlessConfig) -> Result<DMatrix<Complex64>> {
    cfg.validate()?;
    let n = cfg.n_max as f64;
    let d = cfg.dim();
    let mut h = DMatrix::from_element(d, d, C0);
    for i in 0..d {
        let k = i as f64 - n;
        h[(i, i)] = Complex64::new(k * k + 0.5 * cfg.v0, 0.0);
    }
    let band2 = Complex64::new(0.25 * cfg.v0, 0.0);
    for i in 0..d - 2 {
        h[(i + 2, i)] = band2;
        h[(i, i + 2)] = band2;
    }
    // ⟨n+1|H|n⟩ = −h_z/2 − h_x/(2i)
    let lower = Complex64::new(-0.5 * cfg.hz, 0.5 * cfg.hx);
    for i in 0..d - 1 {
        h[(i + 1, i)] = lower;
        h[(i, i + 1)] = lower.conj();
    }
    Ok(h)
}

/// Parity labels; `None` where the symmetry does not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Parity {
    /// Eigenvalue under θ → θ + π.
    pub t: Option<i8>,
    /// Eigenvalue under θ → −θ.
    pub r: Option<i8>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub n_max: usize,
    /// Ascending eigenvalues in units of E_k.
    pub energies: Vec<f64>,
    /// Columns are |ψ_m⟩ in the |n⟩ basis.
    pub vectors: DMatrix<Complex64>,
    pub parities: Vec<Parity>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Tunneling splitting e₁ − e₀.
    pub fn splitting(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// Index ranges of consecutive eigenvalues closer than [`DEGENERACY_TOL`].
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        clusters_of(&self.energies)
    }

    /// ⟨ψ_m|A|ψ_n⟩ for all m, n.
    pub fn to_energy_basis(&self, a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.vectors.adjoint() * a * &self.vectors
    }

    pub fn matrix_element(&self, a: &DMatrix<Complex64>, m: usize, n: usize) -> Complex64 {
        let av = a * self.vectors.column(n);
        self.vectors.column(m).dotc(&av)
    }
}

fn clusters_of(energies: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i == energies.len() || energies[i] - energies[i - 1] >= DEGENERACY_TOL {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Multiply each column by a phase so that its largest coefficient is real and positive.
/// Ties within a relative 1e-8 go to the lowest index, so symmetric states get a fixed sign.
pub(crate) fn fix_phases(v: &mut DMatrix<Complex64>, cols: std::ops::Range<usize>) {
    for j in cols {
        let mut best = 0.0f64;
        for i in 0..v.nrows() {
            best = best.max(v[(i, j)].norm());
        }
        let pivot = (0..v.nrows())
            .find(|&i| v[(i, j)].norm() >= best * (1.0 - 1e-8))
            .unwrap_or(0);
        let c = v[(pivot, j)];
        if c.norm() == 0.0 {
            continue;
        }
        let phase = c.conj() / c.norm();
        for i in 0..v.nrows() {
            v[(i, j)] *= phase;
        }
        v[(pivot, j)] = Complex64::new(v[(pivot, j)].re, 0.0);
    }
}

fn orthonormalize(v: &mut DMatrix<Complex64>, cols: std::ops::Range<usize>) {
    for j in cols.clone() {
        for k in cols.start..j {
            let proj = v.column(k).dotc(&v.column(j));
            let ck = v.column(k).clone_owned();
            v.column_mut(j).axpy(-proj, &ck, Complex64::new(1.0, 0.0));
        }
        let norm = v.column(j).norm();
        v.column_mut(j).unscale_mut(norm);
    }
}

/// Dense Hermitian diagonalization. Degenerate clusters are re-orthonormalized; parities are
/// left unassigned (see [`crate::symmetry::assign_parities`]).
pub fn diagonalize(h: &DMatrix<Complex64>) -> Result<Spectrum> {
    let d = h.nrows();
    if d != h.ncols() || d % 2 == 0 || d < 5 {
        return Err(Error::domain("hamiltonian", format!("expected odd square dimension >= 5, got {}x{}", d, h.ncols())));
    }
    let scale = h.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    let herm = (h - h.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if herm > 1e-12 * scale {
        return Err(Error::domain("hamiltonian", format!("not Hermitian: max|H - H†| = {herm:e}")));
    }
    let real = h.iter().all(|z| z.im == 0.0);
    let (values, vectors) = if real {
        let hr = h.map(|z| z.re);
        let eig = SymmetricEigen::try_new(hr, f64::EPSILON, 0).ok_or_else(|| {
            Error::Numeric(format!("eigensolver did not converge (real symmetric, dim {d}, max|H| {scale:e})"))
        })?;
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0).ok_or_else(|| {
            Error::Numeric(format!("eigensolver did not converge (complex Hermitian, dim {d}, max|H| {scale:e})"))
        })?;
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let energies: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut v = DMatrix::from_fn(d, d, |i, j| vectors[(i, order[j])]);

    for c in clusters_of(&energies) {
        if c.len() > 1 {
            orthonormalize(&mut v, c);
        }
    }
    fix_phases(&mut v, 0..d);

    let emax = energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
    let hv = h * &v;
    for j in 0..d {
        let mut r = 0.0f64;
        for i in 0..d {
            r = r.max((hv[(i, j)] - v[(i, j)] * energies[j]).norm());
        }
        if r > 1e-9 * emax {
            return Err(Error::Numeric(format!(
                "eigenpair {j} residual {r:e} exceeds 1e-9·max|e| (dim {d}, max|e| {emax:e})"
            )));
        }
    }
    Ok(Spectrum {
        n_max: (d - 1) / 2,
        energies,
        vectors: v,
        parities: vec![Parity::default(); d],
    })
}

/// Build, diagonalize and label parities.
pub fn solve(cfg: &DimensionlessConfig) -> Result<Spectrum> {
    let h = build_hamiltonian(cfg)?;
    let s = diagonalize(&h)?;
    crate::symmetry::assign_parities(s, cfg)
}

/// Largest |e_m(N) − e_m(2N)| over m ≤ `levels`.
pub fn cutoff_drift(cfg: &DimensionlessConfig, levels: usize) -> Result<f64> {
    let a = diagonalize(&build_hamiltonian(cfg)?)?;
    let mut big = *cfg;
    big.n_max = 2 * cfg.n_max;
    let b = diagonalize(&build_hamiltonian(&big)?)?;
    let top = levels.min(a.dim() - 1);
    Ok((0..=top).map(|m| (a.energies[m] - b.energies[m]).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingObservables {
    /// E₁ − E₀ (J).
    pub splitting: f64,
    /// (E₁ − E₀)/h (Hz).
    pub frequency: f64,
}

pub fn tunneling_observables(s: &Spectrum, scales: &DerivedScales) -> Result<TunnelingObservables> {
    if s.dim() < 2 {
        return Err(Error::domain("spectrum", "needs at least two levels"));
    }
    let de = s.splitting();
    Ok(TunnelingObservables {
        splitting: scales.energy(de),
        frequency: scales.frequency(de),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    /// Approximate lower barrier v₀ − |h_z|.
    pub barrier: f64,
    /// e₁ below the barrier.
    pub in_regime: bool,
}

pub fn tunneling_regime(cfg: &DimensionlessConfig) -> Result<Regime> {
    if cfg.hx != 0.0 {
        return Err(Error::domain(
            "hx",
            "regime criterion is defined for h_x = 0 only; use the visibility analysis instead",
        ));
    }
    let s = diagonalize(&build_hamiltonian(cfg)?)?;
    let barrier = cfg.v0 - cfg.hz.abs();
    Ok(Regime {
        barrier,
        in_regime: s.energies[1] < barrier,
    })
}

/// v₀ at which e₁ = v₀ − |h_z|, by bisection on [lo, hi].
pub fn regime_crossing(hz: f64, n_max: usize, lo: f64, hi: f64) -> Result<f64> {
    let f = |v0: f64| -> Result<f64> {
        let cfg = DimensionlessConfig::new(v0, 0.0, hz, n_max);
        let s = diagonalize(&build_hamiltonian(&cfg)?)?;
        Ok(s.energies[1] - (v0 - hz.abs()))
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::domain("crossing", format!("no sign change of e1 - barrier on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a < 1e-12 {
            break;
        }
        let fm = f(m)?;
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
