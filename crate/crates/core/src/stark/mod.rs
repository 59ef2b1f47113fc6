//! Extremal Stark-state basis and its dipole matrix.
//!
//! Each n-manifold of fixed m is represented by a single parabolic state
//! with maximal |n1 − n2|. The z matrix between these states is assembled
//! from their spherical expansions, the cos θ angular factors and the radial
//! dipole integrals.

mod cache;
mod clebsch;
mod radial;

pub use cache::{cache_file_name, load_or_build, read_cache, write_cache, write_matrix_csv, CACHE_CONVENTION};
pub use clebsch::clebsch_gordan;
pub use radial::{angular_cos, radial_dipole, radial_values, RadialGrid, MIN_GRID_NODES};

use crate::error::{Error, Result};

/// Hydrogen state labelled by parabolic quantum numbers, n = n1 + n2 + |m| + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParabolicState {
    pub n: u32,
    pub n1: u32,
    pub n2: u32,
    pub m: i32,
}

impl ParabolicState {
    pub fn new(n: u32, n1: u32, n2: u32, m: i32) -> Result<Self> {
        if n == 0 || n1 + n2 + m.unsigned_abs() + 1 != n {
            return Err(Error::QuantumNumbers(format!(
                "need n = n1 + n2 + |m| + 1, got n = {n}, n1 = {n1}, n2 = {n2}, m = {m}"
            )));
        }
        Ok(Self { n, n1, n2, m })
    }

    /// First-order Stark dipole ⟨z⟩ = (3/2) n (n1 − n2).
    pub fn stark_dipole(&self) -> f64 {
        1.5 * self.n as f64 * (self.n1 as f64 - self.n2 as f64)
    }

    pub fn energy(&self) -> f64 {
        -0.5 / (self.n as f64).powi(2)
    }
}

/// Which end of the Stark manifold represents each n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Extremum {
    /// n2 = 0: largest positive ⟨z⟩.
    #[default]
    Uphill,
    /// n1 = 0: mirror image, ⟨z⟩ < 0.
    Downhill,
}

impl Extremum {
    pub fn tag(self) -> &'static str {
        match self {
            Extremum::Uphill => "uphill",
            Extremum::Downhill => "downhill",
        }
    }
}

fn check_nm(n: u32, m: i32) -> Result<()> {
    if n == 0 || m.unsigned_abs() >= n {
        return Err(Error::QuantumNumbers(format!("need n ≥ 1 and |m| ≤ n − 1, got n = {n}, m = {m}")));
    }
    Ok(())
}

/// The uphill extremal state n2 = 0, n1 = n − |m| − 1.
pub fn extremal_state(n: u32, m: i32) -> Result<ParabolicState> {
    extremal_state_with(n, m, Extremum::Uphill)
}

pub fn extremal_state_with(n: u32, m: i32, side: Extremum) -> Result<ParabolicState> {
    check_nm(n, m)?;
    let k = n - m.unsigned_abs() - 1;
    let (n1, n2) = match side {
        Extremum::Uphill => (k, 0),
        Extremum::Downhill => (0, k),
    };
    Ok(ParabolicState { n, n1, n2, m })
}

/// Coefficients of a parabolic state in the spherical basis |n l m⟩,
/// `coefficients[i]` belonging to l = `l_min + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalExpansion {
    pub l_min: u32,
    pub coefficients: Vec<f64>,
}

impl SphericalExpansion {
    pub fn get(&self, l: u32) -> f64 {
        l.checked_sub(self.l_min)
            .and_then(|i| self.coefficients.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

/// Spherical expansion c_l = ⟨j μ1 j μ2 | l m⟩ with j = (n − 1)/2,
/// μ1 = (m + n1 − n2)/2 and μ2 = (m − n1 + n2)/2.
pub fn parabolic_to_spherical(s: &ParabolicState) -> SphericalExpansion {
    let two_j = s.n as i64 - 1;
    let (n1, n2, m) = (s.n1 as i64, s.n2 as i64, s.m as i64);
    let two_mu1 = m + n1 - n2;
    let two_mu2 = m - n1 + n2;
    let l_min = s.m.unsigned_abs();
    let coefficients = (l_min..s.n)
        .map(|l| clebsch_gordan(two_j, two_mu1, two_j, two_mu2, 2 * l as i64, 2 * m))
        .collect();
    SphericalExpansion { l_min, coefficients }
}

/// Dipole z between two states with the same m, via their spherical
/// expansions and individual radial integrals. Slow; intended for spot
/// checks. [`build_dipole_matrix`] evaluates the same sum in bulk.
pub fn dipole_element(a: &ParabolicState, b: &ParabolicState) -> Result<f64> {
    if a.m != b.m {
        return Err(Error::QuantumNumbers(format!("z conserves m, got {} and {}", a.m, b.m)));
    }
    let ca = parabolic_to_spherical(a);
    let cb = parabolic_to_spherical(b);
    let grid = RadialGrid::for_max_n(a.n.max(b.n));
    let mut z = 0.0;
    for l in ca.l_min..a.n {
        for l2 in [l.wrapping_sub(1), l + 1] {
            if l2 < cb.l_min || l2 >= b.n {
                continue;
            }
            let ang = angular_cos(l, l2, a.m);
            if ang == 0.0 {
                continue;
            }
            z += ca.get(l) * cb.get(l2) * ang * radial::radial_integral_on(a.n, l, b.n, l2, &grid);
        }
    }
    Ok(z)
}

/// Extremal Stark basis for fixed m over n_min..=n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct StarkBasis {
    pub m: i32,
    pub n_min: u32,
    pub n_max: u32,
    pub extremum: Extremum,
    pub states: Vec<ParabolicState>,
    /// E_n = −1/(2n²).
    pub energies: Vec<f64>,
    /// Row-major symmetric z matrix.
    pub dipole: Vec<f64>,
}

impl StarkBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.dipole[i * self.dim() + j]
    }

    /// Position of manifold `n` in the basis.
    pub fn index_of(&self, n: u32) -> Option<usize> {
        (self.n_min..=self.n_max).contains(&n).then(|| (n - self.n_min) as usize)
    }

    /// Largest relative asymmetry |z_ij − z_ji| / max|z|.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let scale = self.dipole.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..i {
                worst = worst.max((self.z(i, j) - self.z(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Copy of this basis restricted to manifolds n_min..=n_max (a sub-block).
    pub fn truncated(&self, n_max: u32) -> Result<StarkBasis> {
        if n_max < self.n_min || n_max > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate basis {}..={} to n_max = {n_max}",
                self.n_min, self.n_max
            )));
        }
        let d = (n_max - self.n_min + 1) as usize;
        let full = self.dim();
        let mut dipole = Vec::with_capacity(d * d);
        for i in 0..d {
            dipole.extend_from_slice(&self.dipole[i * full..i * full + d]);
        }
        Ok(StarkBasis {
            m: self.m,
            n_min: self.n_min,
            n_max,
            extremum: self.extremum,
            states: self.states[..d].to_vec(),
            energies: self.energies[..d].to_vec(),
            dipole,
        })
    }
}

/// Uphill extremal basis for m over n_min..=n_max. Manifolds with n ≤ |m|
/// hold no state with this m, so n_min is raised to |m| + 1 if needed.
pub fn build_dipole_matrix(m: i32, n_min: u32, n_max: u32) -> Result<StarkBasis> {
    build_dipole_matrix_with(m, n_min, n_max, Extremum::Uphill)
}

pub fn build_dipole_matrix_with(m: i32, n_min: u32, n_max: u32, extremum: Extremum) -> Result<StarkBasis> {
    if n_min == 0 || n_max < n_min {
        return Err(Error::InvalidArgument(format!("invalid basis bounds {n_min}..={n_max}")));
    }
    let n_min = n_min.max(m.unsigned_abs() + 1);
    if n_max < n_min {
        return Err(Error::InvalidArgument(format!(
            "basis ..={n_max} holds no manifold with |m| = {}",
            m.unsigned_abs()
        )));
    }
    let states: Vec<ParabolicState> = (n_min..=n_max)
        .map(|n| extremal_state_with(n, m, extremum))
        .collect::<Result<_>>()?;
    let expansions: Vec<SphericalExpansion> = states.iter().map(parabolic_to_spherical).collect();
    let energies = states.iter().map(ParabolicState::energy).collect();

    let grid = RadialGrid::for_max_n(n_max);
    let dipole = assemble_dipole(m, n_min, n_max, &expansions, &grid);
    Ok(StarkBasis { m, n_min, n_max, extremum, states, energies, dipole })
}

/// z = Σ_l (M_l + M_lᵀ), M_l[n][n′] = c^n_l c^{n′}_{l+1} ⟨l|cos θ|l+1⟩ ∫ R_{n l} R_{n′ l+1} r³ dr.
///
/// For fixed l every M_l is a single matrix product over the radial grid, so
/// each radial function is evaluated exactly once.
fn assemble_dipole(m: i32, n_min: u32, n_max: u32, expansions: &[SphericalExpansion], grid: &RadialGrid) -> Vec<f64> {
    let dim = (n_max - n_min + 1) as usize;
    let npts = grid.len();
    let ln_fact = radial::ln_factorials(2 * n_max as usize + 2);
    let l_min = m.unsigned_abs();
    let r3w: Vec<f64> = grid.r.iter().zip(&grid.weight).map(|(r, w)| r * r * r * w).collect();

    // Rows of manifolds n > l (all n ≥ n_min), each holding c^n_l R_{nl}(r_i).
    let layer = |l: u32| -> (usize, Vec<f64>) {
        let first = n_min.max(l + 1);
        if first > n_max {
            return (dim, Vec::new());
        }
        let offset = (first - n_min) as usize;
        let mut out = Vec::with_capacity((dim - offset) * npts);
        for n in first..=n_max {
            let c = expansions[(n - n_min) as usize].get(l);
            let values = radial::radial_values_with(n, l, &grid.r, &ln_fact);
            out.extend(values.into_iter().map(|v| c * v));
        }
        (offset, out)
    };

    let mut z = vec![0.0; dim * dim];
    let mut block = vec![0.0; dim * dim];
    let mut current = layer(l_min);
    for l in l_min..n_max.saturating_sub(1) {
        let next = layer(l + 1);
        let (off_a, ref a) = current;
        let (off_b, ref b) = next;
        if !a.is_empty() && !b.is_empty() {
            let rows_a = dim - off_a;
            let rows_b = dim - off_b;
            let ang = angular_cos(l, l + 1, m);
            let weighted: Vec<f64> = a
                .chunks_exact(npts)
                .flat_map(|row| row.iter().zip(&r3w).map(move |(v, w)| ang * v * w))
                .collect();
            // block[rows_a × rows_b] = weighted · bᵀ
            unsafe {
                matrixmultiply::dgemm(
                    rows_a,
                    npts,
                    rows_b,
                    1.0,
                    weighted.as_ptr(),
                    npts as isize,
                    1,
                    b.as_ptr(),
                    1,
                    npts as isize,
                    0.0,
                    block.as_mut_ptr(),
                    rows_b as isize,
                    1,
                );
            }
            for i in 0..rows_a {
                for j in 0..rows_b {
                    let v = block[i * rows_b + j];
                    let (gi, gj) = (off_a + i, off_b + j);
                    z[gi * dim + gj] += v;
                    z[gj * dim + gi] += v;
                }
            }
        }
        current = next;
    }
    z
}
