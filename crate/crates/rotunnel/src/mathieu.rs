//! Characteristic values a_n(q), b_n(q) of Mathieu's equation y'' + (a − 2q cos2x) y = 0.
//!
//! Each of the four Fourier families (cos 2kx, cos (2k+1)x, sin (2k+1)x, sin (2k+2)x) gives a
//! symmetric tridiagonal recurrence. The Sturm sequence of that recurrence is its continued
//! fraction; counting its negative terms locates the n-th characteristic value by bisection.
//! Independent of the rotor Hamiltonian.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MathieuParity {
    /// a_n, cosine-type solutions.
    Even,
    /// b_n, sine-type solutions.
    Odd,
}

struct Family {
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn family(q: f64, n: usize, parity: MathieuParity, size: usize) -> (Family, usize) {
    let (first, step_start, index, first_off): (Option<f64>, usize, usize, f64) = match (parity, n % 2) {
        // cos 2kx: A0 couples to A2 with 2q; symmetrized to √2 q
        (MathieuParity::Even, 0) => (None, 0, n / 2, std::f64::consts::SQRT_2 * q),
        // cos (2k+1)x: first diagonal 1 + q
        (MathieuParity::Even, _) => (Some(1.0 + q), 1, (n - 1) / 2, q),
        // sin (2k+1)x: first diagonal 1 − q
        (MathieuParity::Odd, 1) => (Some(1.0 - q), 1, (n - 1) / 2, q),
        // sin (2k+2)x
        (MathieuParity::Odd, _) => (None, 2, n / 2 - 1, q),
    };
    let mut diag: Vec<f64> = (0..size)
        .map(|k| {
            let m = (step_start + 2 * k) as f64;
            m * m
        })
        .collect();
    if let Some(f) = first {
        diag[0] = f;
    }
    let mut off = vec![q; size - 1];
    off[0] = first_off;
    (Family { diag, off }, index)
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(f: &Family, x: f64) -> usize {
    let mut count = 0;
    let mut p = f.diag[0] - x;
    if p < 0.0 {
        count += 1;
    }
    for k in 1..f.diag.len() {
        let denom = if p == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { p };
        p = f.diag[k] - x - f.off[k - 1] * f.off[k - 1] / denom;
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

fn kth_eigenvalue(f: &Family, k: usize) -> Result<f64> {
    let centre = f.diag[k.min(f.diag.len() - 1)];
    let mut width = 1.0 + 4.0 * f.off.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut lo, mut hi);
    let mut tries = 0;
    loop {
        lo = centre - width;
        hi = centre + width;
        if sturm_count(f, lo) <= k && sturm_count(f, hi) > k {
            break;
        }
        width *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numeric("Mathieu bracket widening failed".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(f, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// a_n(q) for `Even`, b_n(q) for `Odd`.
pub fn characteristic(q: f64, n: usize, parity: MathieuParity) -> Result<f64> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::domain("q", format!("must be non-negative, got {q}")));
    }
    if parity == MathieuParity::Odd && n == 0 {
        return Err(Error::domain("n", "b_n requires n >= 1"));
    }
    let mut size = n + 16 + (4.0 * q.sqrt()) as usize;
    let mut previous: Option<f64> = None;
    while size <= 4096 {
        let (f, k) = family(q, n, parity, size);
        let value = kth_eigenvalue(&f, k)?;
        if let Some(p) = previous {
            if (value - p).abs() <= 1e-14 * value.abs().max(1.0) {
                return Ok(value);
            }
        }
        previous = Some(value);
        size *= 2;
    }
    Err(Error::Numeric(format!(
        "Mathieu characteristic value did not converge in the Fourier truncation (q = {q}, n = {n})"
    )))
}

/// Field-free rotor level e_m = char + v₀/2 with q = v₀/4: even m ↦ a_{m/2}, odd m ↦ b_{(m+1)/2}.
pub fn rotor_level(v0: f64, m: usize) -> Result<f64> {
    let q = 0.25 * v0;
    let c = if m % 2 == 0 {
        characteristic(q, m / 2, MathieuParity::Even)?
    } else {
        characteristic(q, m.div_ceil(2), MathieuParity::Odd)?
    };
    Ok(c + 0.5 * v0)
}
