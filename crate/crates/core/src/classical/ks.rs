//! Kustaanheimo-Stiefel regularization of the driven Kepler problem.
//!
//! State layout: u (4), u′ = du/ds (4), Kepler energy h, time τ.
//! With ds = dt / r the Coulomb singularity disappears and the unperturbed
//! motion is a four-dimensional harmonic oscillator.

use super::rkf78::System;
use super::Vec3;
use crate::quantum::DriveProtocol;

pub(super) const T: usize = 9;
const H: usize = 8;

/// Regularized phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsState {
    pub u: [f64; 4],
    pub du: [f64; 4],
    /// Kepler energy p²/2 − 1/r.
    pub energy: f64,
    pub time: f64,
}

fn l_matrix(u: &[f64; 4]) -> [[f64; 4]; 4] {
    let [u1, u2, u3, u4] = *u;
    [[u1, -u2, -u3, u4], [u2, u1, -u4, -u3], [u3, u4, u1, u2], [u4, -u3, u2, -u1]]
}

impl KsState {
    pub fn from_cartesian(x: &Vec3, p: &Vec3, time: f64) -> Self {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let u = if x[0] >= 0.0 {
            let u1 = (0.5 * (r + x[0])).sqrt();
            [u1, x[1] / (2.0 * u1), x[2] / (2.0 * u1), 0.0]
        } else {
            let u2 = (0.5 * (r - x[0])).sqrt();
            [x[1] / (2.0 * u2), u2, 0.0, x[2] / (2.0 * u2)]
        };
        let l = l_matrix(&u);
        // u′ = ½ Lᵀ(u) (p, 0)
        let du = [0, 1, 2, 3].map(|i| 0.5 * (l[0][i] * p[0] + l[1][i] * p[1] + l[2][i] * p[2]));
        let energy = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0 / r;
        Self { u, du, energy, time }
    }

    pub fn radius(&self) -> f64 {
        self.u.iter().map(|v| v * v).sum()
    }

    pub fn to_cartesian(&self) -> (Vec3, Vec3) {
        let l = l_matrix(&self.u);
        let r = self.radius();
        let row = |k: usize, v: &[f64; 4]| l[k].iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let x = [row(0, &self.u), row(1, &self.u), row(2, &self.u)];
        let p = [2.0 * row(0, &self.du) / r, 2.0 * row(1, &self.du) / r, 2.0 * row(2, &self.du) / r];
        (x, p)
    }

    pub(super) fn to_array(self) -> [f64; 10] {
        let mut y = [0.0; 10];
        y[..4].copy_from_slice(&self.u);
        y[4..8].copy_from_slice(&self.du);
        y[H] = self.energy;
        y[T] = self.time;
        y
    }

    pub(super) fn from_array(y: &[f64; 10]) -> Self {
        Self { u: [y[0], y[1], y[2], y[3]], du: [y[4], y[5], y[6], y[7]], energy: y[H], time: y[T] }
    }
}

/// Rescale u′ so that 2|u′|² − 1 = h r holds exactly, keeping the
/// Cartesian energy equal to the integrated energy element.
pub(super) fn project_energy(y: &mut [f64; 10]) {
    let r = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    let dd: f64 = y[4..8].iter().map(|v| v * v).sum();
    let target = 0.5 * (1.0 + y[H] * r);
    if dd > 0.0 && target > 0.0 {
        let f = (target / dd).sqrt();
        for v in &mut y[4..8] {
            *v *= f;
        }
    }
}

/// Equations of motion under H = p²/2 − 1/r + F(t) z. For backward
/// integration (`direction` = −1) the time slot holds −t and u′ is negated,
/// which leaves the second-order equations unchanged.
pub(super) struct Perturbed<'a> {
    pub drive: &'a DriveProtocol,
    pub direction: f64,
}

impl Perturbed<'_> {
    pub fn normalize_time(&self, y: &mut [f64; 10]) {
        y[T] *= self.direction;
        for v in &mut y[4..8] {
            *v *= self.direction;
        }
    }

    pub fn restore_time(&self, y: &mut [f64; 10]) {
        self.normalize_time(y);
    }
}

impl System<10> for Perturbed<'_> {
    fn derivative(&self, _s: f64, y: &[f64; 10], dy: &mut [f64; 10]) {
        let [u1, u2, u3, u4] = [y[0], y[1], y[2], y[3]];
        let [d1, d2, d3, d4] = [y[4], y[5], y[6], y[7]];
        let r = u1 * u1 + u2 * u2 + u3 * u3 + u4 * u4;
        let pz = -self.drive.field(self.direction * y[T]);
        let h = y[H];
        dy[..4].copy_from_slice(&[d1, d2, d3, d4]);
        let c = 0.5 * r * pz;
        dy[4] = 0.5 * h * u1 + c * u3;
        dy[5] = 0.5 * h * u2 + c * u4;
        dy[6] = 0.5 * h * u3 + c * u1;
        dy[7] = 0.5 * h * u4 + c * u2;
        dy[H] = 2.0 * pz * (u3 * d1 + u4 * d2 + u1 * d3 + u2 * d4);
        dy[T] = r;
    }

    fn error_scale(&self, y: &[f64; 10], y_new: &[f64; 10], rtol: f64, scale: &mut [f64; 10]) {
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let su = sq(&y[..4]).max(sq(&y_new[..4]));
        let sd = sq(&y[4..8]).max(sq(&y_new[4..8]));
        let se = y[H].abs().max(y_new[H].abs()).max(1e-8);
        scale[..4].fill(rtol * su);
        scale[4..8].fill(rtol * sd);
        scale[H] = rtol * se;
        scale[T] = rtol * (y_new[T] - y[T]).abs().max(1e-300);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_round_trip() {
        for (x, p) in [
            ([3.0, -4.0, 12.0], [0.1, 0.2, -0.3]),
            ([-5.0, 1.0, -2.0], [-0.05, 0.0, 0.4]),
            ([0.0, 0.0, 7.0], [0.3, 0.0, 0.0]),
            ([-2.0, 0.0, 0.0], [0.0, 0.5, 0.0]),
        ] {
            let ks = KsState::from_cartesian(&x, &p, 0.0);
            let (x2, p2) = ks.to_cartesian();
            for k in 0..3 {
                assert!((x[k] - x2[k]).abs() < 1e-12, "{x:?} {x2:?}");
                assert!((p[k] - p2[k]).abs() < 1e-12, "{p:?} {p2:?}");
            }
            let r = ks.radius();
            let e2 = (2.0 * ks.du.iter().map(|v| v * v).sum::<f64>() - 1.0) / r;
            assert!((e2 - ks.energy).abs() < 1e-12);
        }
    }
}
