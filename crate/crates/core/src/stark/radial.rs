//! Hydrogen bound-state radial functions and their dipole integrals.
//!
//! Radial functions are real and positive at large r (positive coefficient of
//! the highest power of r in the polynomial part). Integrals use the
//! trapezoidal rule in u = ln r on an exponentially spaced grid, which
//! converges exponentially for these smooth, doubly decaying integrands.
//! Normalization constants and the Laguerre recurrence are carried in log
//! space so nothing overflows for n up to a few hundred.

use crate::error::{Error, Result};

/// Smallest node count of any grid built here.
pub const MIN_GRID_NODES: usize = 6000;

const R_MIN: f64 = 1e-4;
const RESCALE: f64 = 1e200;

/// ln k! for k = 0..len.
pub(crate) fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=len {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exponentially spaced radial quadrature grid.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub r: Vec<f64>,
    /// Trapezoid weights for ∫ g(r) dr.
    pub weight: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, nodes: usize) -> Self {
        assert!(r_min > 0.0 && r_max > r_min && nodes >= 2);
        let (u0, u1) = (r_min.ln(), r_max.ln());
        let h = (u1 - u0) / (nodes - 1) as f64;
        let r: Vec<f64> = (0..nodes).map(|i| (u0 + h * i as f64).exp()).collect();
        let weight = r
            .iter()
            .enumerate()
            .map(|(i, &ri)| if i == 0 || i == nodes - 1 { 0.5 * h * ri } else { h * ri })
            .collect();
        Self { r, weight }
    }

    /// Grid adequate for every state with principal quantum number ≤ `n_max`.
    pub fn for_max_n(n_max: u32) -> Self {
        let n = n_max as f64;
        let r_max = n * (3.0 * n + 60.0);
        let nodes = MIN_GRID_NODES.max(40 * n_max as usize);
        Self::new(R_MIN, r_max, nodes)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

fn check_state(n: u32, l: u32) -> Result<()> {
    if n == 0 || l >= n {
        return Err(Error::QuantumNumbers(format!("need 0 ≤ l < n, got n = {n}, l = {l}")));
    }
    Ok(())
}

/// R_{nl}(r) at every node of `grid`.
pub fn radial_values(n: u32, l: u32, grid: &RadialGrid) -> Result<Vec<f64>> {
    check_state(n, l)?;
    let lnf = ln_factorials((n + l) as usize);
    Ok(radial_values_with(n, l, &grid.r, &lnf))
}

pub(crate) fn radial_values_with(n: u32, l: u32, r: &[f64], ln_fact: &[f64]) -> Vec<f64> {
    assert!((n as usize) < RECIPROCALS.len(), "n = {n} is beyond the supported range");
    let nf = n as f64;
    let degree = (n - l - 1) as usize;
    let alpha = (2 * l + 1) as f64;
    let ln_norm = 0.5
        * (3.0 * (2.0 / nf).ln() + ln_fact[degree] - (2.0 * nf).ln() - ln_fact[(n + l) as usize]);
    let sign = if degree % 2 == 0 { 1.0 } else { -1.0 };
    // Inner cut from |L_k^α(x)| ≤ C(k+α, k) e^{x/2}; outer cut from the
    // leading term x^k / k! once x is past the last node.
    let ln_binom = ln_fact[degree + 2 * l as usize + 1] - ln_fact[degree] - ln_fact[2 * l as usize + 1];
    let ln_base = |x: f64| ln_norm + l as f64 * x.ln();
    let lo = r
        .iter()
        .position(|&ri| ln_base(2.0 * ri / nf) + ln_binom >= -740.0)
        .unwrap_or(r.len());
    let x_tail = 4.0 * nf + 2.0 * alpha + 20.0;
    let hi = r
        .iter()
        .rposition(|&ri| {
            let x = 2.0 * ri / nf;
            x < x_tail || ln_norm + (n - 1) as f64 * x.ln() - ln_fact[degree] - 0.5 * x >= -800.0
        })
        .map_or(lo, |i| (i + 1).max(lo));

    let x: Vec<f64> = r[lo..hi].iter().map(|&ri| 2.0 * ri / nf).collect();
    let mut ln_scale: Vec<f64> = x.iter().map(|&xi| ln_base(xi) - 0.5 * xi).collect();
    let mut p_prev = vec![1.0; x.len()];
    let mut p = vec![1.0; x.len()];
    if degree >= 1 {
        for (pi, xi) in p.iter_mut().zip(&x) {
            *pi = 1.0 + alpha - xi;
        }
        for k in 1..degree {
            let kf = k as f64;
            let (a, b, inv) = (2.0 * kf + 1.0 + alpha, kf + alpha, RECIPROCALS[k + 1]);
            for ((pi, qi), xi) in p.iter_mut().zip(p_prev.iter_mut()).zip(&x) {
                let next = ((a - xi) * *pi - b * *qi) * inv;
                *qi = *pi;
                *pi = next;
            }
            // Growth per step is far below 1e6, so checking every 16 steps
            // keeps everything finite.
            if k % 16 == 0 {
                rescale(&mut p, &mut p_prev, &mut ln_scale);
            }
        }
    }

    let mut out = vec![0.0; r.len()];
    for ((pi, si), o) in p.iter().zip(&ln_scale).zip(&mut out[lo..hi]) {
        if *pi == 0.0 {
            continue;
        }
        let ln_mag = si + pi.abs().ln();
        if ln_mag >= -740.0 {
            *o = sign * pi.signum() * ln_mag.exp();
        }
    }
    out
}

fn rescale(p: &mut [f64], p_prev: &mut [f64], ln_scale: &mut [f64]) {
    for ((pi, qi), si) in p.iter_mut().zip(p_prev.iter_mut()).zip(ln_scale.iter_mut()) {
        if pi.abs() > RESCALE {
            *pi /= RESCALE;
            *qi /= RESCALE;
            *si += RESCALE.ln();
        }
    }
}

const RECIPROCALS: [f64; 1024] = {
    let mut t = [0.0; 1024];
    let mut i = 1;
    while i < 1024 {
        t[i] = 1.0 / i as f64;
        i += 1;
    }
    t
};

/// ∫₀^∞ R_{n l}(r) r³ R_{n2 l2}(r) dr in atomic units, for |l − l2| = 1.
pub fn radial_dipole(n: u32, l: u32, n2: u32, l2: u32) -> Result<f64> {
    check_state(n, l)?;
    check_state(n2, l2)?;
    if l.abs_diff(l2) != 1 {
        return Err(Error::QuantumNumbers(format!(
            "dipole selection rule needs |l - l2| = 1, got l = {l}, l2 = {l2}"
        )));
    }
    let grid = RadialGrid::for_max_n(n.max(n2));
    Ok(radial_integral_on(n, l, n2, l2, &grid))
}

pub(crate) fn radial_integral_on(n: u32, l: u32, n2: u32, l2: u32, grid: &RadialGrid) -> f64 {
    let lnf = ln_factorials((n.max(n2) + l.max(l2)) as usize);
    let a = radial_values_with(n, l, &grid.r, &lnf);
    let b = radial_values_with(n2, l2, &grid.r, &lnf);
    a.iter()
        .zip(&b)
        .zip(grid.r.iter().zip(&grid.weight))
        .map(|((x, y), (r, w))| x * y * r * r * r * w)
        .sum()
}

/// Angular factor ⟨l m| cos θ |l2 m⟩ for spherical harmonics.
pub fn angular_cos(l: u32, l2: u32, m: i32) -> f64 {
    let (lo, hi) = match (l, l2) {
        (a, b) if b == a + 1 => (a, b),
        (a, b) if a == b + 1 => (b, a),
        _ => return 0.0,
    };
    if m.unsigned_abs() > lo {
        return 0.0;
    }
    let mm = (m.unsigned_abs() as f64).powi(2);
    let (hf, lf) = (hi as f64, lo as f64);
    ((hf * hf - mm) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt()
}
