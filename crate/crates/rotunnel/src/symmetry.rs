//! Translation T (θ → θ + π) and reflection R (θ → −θ), parity labels and selection rules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rotor::{
    build_hamiltonian, fix_phases, operator_matrix, DimensionlessConfig, OperatorKind, Parity, Spectrum, DEGENERACY_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    /// θ → θ + π, T|n⟩ = (−1)ⁿ|n⟩.
    Translation,
    /// θ → −θ, R|n⟩ = |−n⟩.
    Reflection,
}

pub fn symmetry_matrix(kind: SymmetryKind, n_max: usize) -> DMatrix<Complex64> {
    let d = 2 * n_max + 1;
    let mut s = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for i in 0..d {
        match kind {
            SymmetryKind::Translation => {
                let n = i as i64 - n_max as i64;
                s[(i, i)] = Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            }
            SymmetryKind::Reflection => s[(d - 1 - i, i)] = Complex64::new(1.0, 0.0),
        }
    }
    s
}

/// Which symmetries survive the applied fields.
pub fn applicable(cfg: &DimensionlessConfig) -> (bool, bool) {
    let r = cfg.hx == 0.0;
    (r && cfg.hz == 0.0, r)
}

/// Transformation signs (t_U, r_U) of a coupling operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingSignature {
    pub kind: OperatorKind,
    pub t: i8,
    pub r: i8,
}

pub fn coupling_signature(kind: OperatorKind) -> Result<CouplingSignature> {
    let (t, r) = match kind {
        OperatorKind::Cos => (-1, 1),
        OperatorKind::Sin => (-1, -1),
        OperatorKind::Cos2 => (1, 1),
        OperatorKind::Sin2 => (1, -1),
        OperatorKind::AngularMomentum => (1, -1),
        other => {
            return Err(Error::domain("coupling", format!("{other} is not a Hermitian coupling")));
        }
    };
    Ok(CouplingSignature { kind, t, r })
}

/// Runs of eigenvalues within 1e-6·max(1, |e|) of each other; wider than the degeneracy
/// tolerance so that tunneling doublets of excited levels are symmetrized too.
fn near_degenerate(energies: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i == energies.len() || energies[i] - energies[i - 1] >= 1e-6 * energies[i].abs().max(1.0) {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Eigenvalues and eigenvectors of a small Hermitian matrix, descending or ascending.
fn hermitian_eig(m: &DMatrix<Complex64>, descending: bool) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(herm, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("diagonalization inside a near-degenerate cluster failed".into()))?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if descending {
        order.reverse();
    }
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok((vals, DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])])))
}

fn expectation(s: &DMatrix<Complex64>, v: &DMatrix<Complex64>, j: usize) -> (f64, f64) {
    let sv = s * v.column(j);
    let sigma = v.column(j).dotc(&sv).re;
    let sign = if sigma >= 0.0 { 1.0 } else { -1.0 };
    let mut res = 0.0f64;
    for i in 0..v.nrows() {
        res = res.max((sv[i] - v[(i, j)] * sign).norm());
    }
    (sign, res)
}

/// Rotate degenerate and near-degenerate clusters into simultaneous eigenstates of the applicable symmetries and
/// label every state. Fails if a non-degenerate state has no definite parity.
pub fn assign_parities(mut s: Spectrum, cfg: &DimensionlessConfig) -> Result<Spectrum> {
    let (use_t, use_r) = applicable(cfg);
    let d = s.dim();
    if !use_t && !use_r {
        s.parities = vec![Parity::default(); d];
        return Ok(s);
    }
    let t = symmetry_matrix(SymmetryKind::Translation, s.n_max);
    let r = symmetry_matrix(SymmetryKind::Reflection, s.n_max);
    // Distinct eigenvalues r + 3t separate all four parity combinations.
    let combo = if use_t { &r + &t * Complex64::new(3.0, 0.0) } else { r.clone() };
    let h = build_hamiltonian(cfg)?;

    for c in near_degenerate(&s.energies) {
        if c.len() < 2 {
            continue;
        }
        let block = s.vectors.columns(c.start, c.len()).clone_owned();
        let (vals, w) = hermitian_eig(&(block.adjoint() * &combo * &block), true)?;
        let mut rotated = block * w;
        // Resolve any same-parity pair with the Hamiltonian.
        let mut i = 0;
        while i < c.len() {
            let mut j = i + 1;
            while j < c.len() && (vals[j] - vals[i]).abs() < 0.5 {
                j += 1;
            }
            if j - i > 1 {
                let sub = rotated.columns(i, j - i).clone_owned();
                let (_, u) = hermitian_eig(&(sub.adjoint() * &h * &sub), false)?;
                rotated.columns_mut(i, j - i).copy_from(&(sub * u));
            }
            i = j;
        }
        let hr = rotated.adjoint() * &h * &rotated;
        let e: Vec<f64> = (0..c.len()).map(|k| hr[(k, k)].re).collect();
        let spread = e.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - e.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let mut order: Vec<usize> = (0..c.len()).collect();
        if spread >= DEGENERACY_TOL {
            order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
            for (k, &o) in order.iter().enumerate() {
                s.energies[c.start + k] = e[o];
            }
        }
        let ordered = DMatrix::from_fn(rotated.nrows(), c.len(), |i, j| rotated[(i, order[j])]);
        s.vectors.columns_mut(c.start, c.len()).copy_from(&ordered);
        fix_phases(&mut s.vectors, c.clone());
    }

    let mut labels = Vec::with_capacity(d);
    for j in 0..d {
        let mut p = Parity::default();
        for (apply, m, slot) in [(use_t, &t, 0), (use_r, &r, 1)] {
            if !apply {
                continue;
            }
            let (sign, res) = expectation(m, &s.vectors, j);
            if res > 1e-8 {
                return Err(Error::Numeric(format!(
                    "state {j} (e = {}) has no definite {} parity: residual {res:e}",
                    s.energies[j],
                    if slot == 0 { "T" } else { "R" }
                )));
            }
            if slot == 0 {
                p.t = Some(sign as i8);
            } else {
                p.r = Some(sign as i8);
            }
            // Project out the residual so selection-rule zeros hold to rounding.
            let v = s.vectors.column(j).clone_owned();
            let mut proj = (m * &v * Complex64::new(sign, 0.0) + v) * Complex64::new(0.5, 0.0);
            proj.unscale_mut(proj.norm());
            s.vectors.set_column(j, &proj);
        }
        labels.push(p);
    }
    s.parities = labels;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionCheck {
    pub predicted_zero: bool,
    /// |⟨ψ_m|U|ψ_n⟩|
    pub actual: f64,
    /// Symmetry responsible for the zero, if any.
    pub forbidden_by: Option<SymmetryKind>,
}

pub fn check_selection_rule(s: &Spectrum, u: CouplingSignature, m: usize, n: usize) -> Result<SelectionCheck> {
    if m >= s.dim() || n >= s.dim() {
        return Err(Error::domain("level", format!("index out of range 0..{}", s.dim())));
    }
    let op = operator_matrix(u.kind, s.n_max)?;
    let actual = s.matrix_element(&op, m, n).norm();
    let (pm, pn) = (s.parities[m], s.parities[n]);
    let forbidden_by = match (pm.t, pn.t, pm.r, pn.r) {
        (Some(tm), Some(tn), _, _) if u.t * tm * tn == -1 => Some(SymmetryKind::Translation),
        (_, _, Some(rm), Some(rn)) if u.r * rm * rn == -1 => Some(SymmetryKind::Reflection),
        _ => None,
    };
    Ok(SelectionCheck {
        predicted_zero: forbidden_by.is_some(),
        actual,
        forbidden_by,
    })
}
