//! Classical trajectory counterpart of the quantum calculation.
//!
//! Orbits are drawn from the microcanonical ensemble of shell n0 and
//! integrated through the same drive in Kustaanheimo-Stiefel coordinates
//! with the regularized time ds = dt / r. A trajectory counts as ionized
//! when its final Kepler energy is non-negative or its classical action
//! exceeds the cut-off n_cut.

mod ks;
mod rkf78;

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ks::KsState;

use crate::error::{Error, Result};
use crate::quantum::DriveProtocol;

pub type Vec3 = [f64; 3];

/// Phase-space point of the electron with derived bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub position: Vec3,
    pub momentum: Vec3,
    /// Kepler energy p²/2 − 1/r.
    pub energy: f64,
    /// n_cl = 1/√(−2E) for bound orbits, +∞ otherwise.
    pub classical_action: f64,
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl TrajectoryState {
    pub fn new(position: Vec3, momentum: Vec3) -> Self {
        let energy = 0.5 * (momentum[0].powi(2) + momentum[1].powi(2) + momentum[2].powi(2)) - 1.0 / norm(&position);
        let classical_action = if energy < 0.0 { 1.0 / (-2.0 * energy).sqrt() } else { f64::INFINITY };
        Self { position, momentum, energy, classical_action }
    }

    pub fn angular_momentum(&self) -> Vec3 {
        cross(&self.position, &self.momentum)
    }

    /// Ionized by the experimental convention: unbound, or bound above n_cut.
    pub fn is_ionized(&self, n_cut: u32) -> bool {
        self.energy >= 0.0 || self.classical_action > n_cut as f64
    }
}

/// Draws orbits uniformly from the energy shell of n0, optionally restricted
/// to an L_z window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrocanonicalSampler {
    pub n0: u32,
    pub seed: u64,
    /// Inclusive L_z range in atomic units.
    pub lz_window: Option<(f64, f64)>,
}

/// Half-width of the L_z window used for a per-m₀ classical curve.
pub const LZ_HALF_WIDTH: f64 = 2.5;

impl MicrocanonicalSampler {
    pub fn new(n0: u32, seed: u64) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::InvalidArgument("n0 must be ≥ 1".into()));
        }
        Ok(Self { n0, seed, lz_window: None })
    }

    /// Restrict L_z to [m0 − 2.5, m0 + 2.5].
    pub fn with_m_window(mut self, m0: i32) -> Result<Self> {
        let n = self.n0 as f64;
        let (lo, hi) = (m0 as f64 - LZ_HALF_WIDTH, m0 as f64 + LZ_HALF_WIDTH);
        if hi < -n || lo > n {
            return Err(Error::InvalidArgument(format!("L_z window around m0 = {m0} misses shell n0 = {}", self.n0)));
        }
        self.lz_window = Some((lo.max(-n), hi.min(n)));
        Ok(self)
    }

    /// Deterministic generator for trajectory `index` of field point `field_index`.
    pub fn rng_for(&self, field_index: u64, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(mix(mix(self.seed) ^ field_index) ^ index))
    }

    /// One orbit on the shell E = −1/(2n0²): (L, L_z) uniform on
    /// |L_z| ≤ L ≤ n0 (within the window, if any), angles uniform.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> TrajectoryState {
        let n = self.n0 as f64;
        let (lz_lo, lz_hi) = self.lz_window.unwrap_or((-n, n));
        // Marginal density of L_z on the triangle is ∝ n0 − |L_z|.
        let peak = n - if lz_lo <= 0.0 && lz_hi >= 0.0 { 0.0 } else { lz_lo.abs().min(lz_hi.abs()) };
        let lz = loop {
            let lz = rng.gen_range(lz_lo..=lz_hi);
            if rng.gen::<f64>() * peak <= n - lz.abs() {
                break lz;
            }
        };
        let ell = loop {
            // L > |L_z|, strictly, so the inclination is defined.
            let ell = lz.abs() + (n - lz.abs()) * rng.gen::<f64>();
            if ell > 0.0 {
                break ell;
            }
        };
        let mean_anomaly = rng.gen_range(0.0..2.0 * PI);
        let periapsis = rng.gen_range(0.0..2.0 * PI);
        let node = rng.gen_range(0.0..2.0 * PI);
        kepler_orbit(n, ell, lz, mean_anomaly, periapsis, node)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Phase-space point of the Kepler orbit with action n (a = n²), angular
/// momentum `ell`, projection `lz` and the three Delaunay angles.
pub fn kepler_orbit(n: f64, ell: f64, lz: f64, mean_anomaly: f64, periapsis: f64, node: f64) -> TrajectoryState {
    let a = n * n;
    let e = (1.0 - (ell / n).powi(2)).max(0.0).sqrt();
    let ecc_anomaly = solve_kepler(mean_anomaly, e);
    let (se, ce) = ecc_anomaly.sin_cos();
    let b = a * (1.0 - e * e).sqrt();
    let mean_motion = 1.0 / (a * n);
    let denom = 1.0 - e * ce;
    let xp = [a * (ce - e), b * se];
    let vp = [-a * mean_motion * se / denom, b * mean_motion * ce / denom];

    let cos_i = (lz / ell).clamp(-1.0, 1.0);
    let sin_i = (1.0 - cos_i * cos_i).sqrt();
    let (sw, cw) = periapsis.sin_cos();
    let (so, co) = node.sin_cos();
    // Columns of R_z(Ω) R_x(i) R_z(ω) for the in-plane unit vectors.
    let p = [co * cw - so * sw * cos_i, so * cw + co * sw * cos_i, sw * sin_i];
    let q = [-co * sw - so * cw * cos_i, -so * sw + co * cw * cos_i, cw * sin_i];
    let position = [0, 1, 2].map(|k| xp[0] * p[k] + xp[1] * q[k]);
    let momentum = [0, 1, 2].map(|k| vp[0] * p[k] + vp[1] * q[k]);
    TrajectoryState::new(position, momentum)
}

/// Eccentric anomaly E with E − e sin E = M.
fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let m = mean_anomaly.rem_euclid(2.0 * PI);
    let mut ea = if e < 0.8 { m } else { PI };
    for _ in 0..100 {
        let f = ea - e * ea.sin() - m;
        let fp = 1.0 - e * ea.cos();
        let step = f / fp;
        ea -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    ea
}

/// Knobs of [`integrate_trajectory_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOptions {
    /// Per-step relative error tolerance.
    pub rtol: f64,
    /// Smallest regularized step before giving up.
    pub min_step: f64,
    pub id: u64,
}

pub const DEFAULT_RTOL: f64 = 1e-10;

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self { rtol: DEFAULT_RTOL, min_step: 1e-12, id: 0 }
    }
}

/// Integrate through the full drive (`drive.total_cycles` field cycles).
pub fn integrate_trajectory(t0: &TrajectoryState, drive: &DriveProtocol) -> Result<TrajectoryState> {
    integrate_trajectory_with(t0, drive, &ClassicalOptions::default())
}

pub fn integrate_trajectory_with(t0: &TrajectoryState, drive: &DriveProtocol, opts: &ClassicalOptions) -> Result<TrajectoryState> {
    drive.validate()?;
    let t_end = drive.total_cycles * drive.period();
    integrate_span(t0, drive, 0.0, t_end, opts)
}

/// Integrate from physical time `t_start` to `t_end` (either direction).
pub fn integrate_span(
    t0: &TrajectoryState,
    drive: &DriveProtocol,
    t_start: f64,
    t_end: f64,
    opts: &ClassicalOptions,
) -> Result<TrajectoryState> {
    let sys = ks::Perturbed { drive, direction: if t_end >= t_start { 1.0 } else { -1.0 } };
    let mut y = ks::KsState::from_cartesian(&t0.position, &t0.momentum, t_start).to_array();
    sys.normalize_time(&mut y);
    let target = sys.direction * t_end;

    // Initial step: a small fraction of the local oscillator period in s.
    let mut h = 0.01 * (t0.energy.abs().max(1e-8)).powf(-0.5);
    let mut s = 0.0;
    let land_tol = 1e-14 * (t_end - t_start).abs() + 1e-9;
    loop {
        let remaining = target - y[ks::T];
        if remaining <= land_tol {
            break;
        }
        // t′ = r, so Δs ≈ Δt / r; do not overshoot the end time by much.
        let r = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
        let cap = 1.05 * remaining / r.max(1e-300);
        let attempt = h.min(cap);
        if h < opts.min_step {
            return Err(Error::StepUnderflow { id: opts.id, t: sys.direction * y[ks::T], r });
        }
        let mut trial = y;
        match rkf78::try_step(&sys, s, &mut trial, attempt, opts.rtol) {
            rkf78::StepResult::Accepted { h_used, h_next } => {
                if trial[ks::T] > target + land_tol {
                    // Overshot the end: retry with the step scaled to the gap.
                    let overshoot_ratio = remaining / (trial[ks::T] - y[ks::T]);
                    h = h_used * overshoot_ratio.clamp(0.1, 0.999);
                    continue;
                }
                y = trial;
                ks::project_energy(&mut y);
                s += h_used;
                if attempt < cap {
                    h = h_next;
                } else {
                    h = h.max(h_next);
                }
            }
            rkf78::StepResult::Rejected { h_next } => h = h_next,
        }
    }
    sys.restore_time(&mut y);
    let ks_state = ks::KsState::from_array(&y);
    let (position, momentum) = ks_state.to_cartesian();
    Ok(TrajectoryState::new(position, momentum))
}

/// Fraction of `n_trajectories` sampled orbits that end ionized.
/// `field_index` selects the deterministic sub-seeds of this field point.
pub fn classical_ionization_probability(
    sampler: &MicrocanonicalSampler,
    drive: &DriveProtocol,
    n_trajectories: usize,
    n_cut: u32,
    field_index: u64,
) -> Result<f64> {
    let outcomes = run_ensemble(sampler, drive, n_trajectories, n_cut, field_index, &ClassicalOptions::default())?;
    Ok(ionized_fraction(&outcomes))
}

/// Per-trajectory result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutcome {
    pub id: u64,
    pub final_energy: f64,
    pub final_action: f64,
    pub ionized: bool,
}

pub fn ionized_fraction(outcomes: &[TrajectoryOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.ionized).count() as f64 / outcomes.len() as f64
}

pub fn run_ensemble(
    sampler: &MicrocanonicalSampler,
    drive: &DriveProtocol,
    n_trajectories: usize,
    n_cut: u32,
    field_index: u64,
    opts: &ClassicalOptions,
) -> Result<Vec<TrajectoryOutcome>> {
    if n_trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    (0..n_trajectories as u64)
        .map(|id| {
            let mut rng = sampler.rng_for(field_index, id);
            let start = sampler.sample(&mut rng);
            let end = if drive.epsilon == 0.0 {
                start
            } else {
                integrate_trajectory_with(&start, drive, &ClassicalOptions { id, ..*opts })?
            };
            Ok(TrajectoryOutcome {
                id,
                final_energy: end.energy,
                final_action: end.classical_action,
                ionized: end.is_ionized(n_cut),
            })
        })
        .collect()
}

/// CSV dump `trajectory_id,final_energy,final_n_cl,ionized`.
pub fn write_outcomes<W: Write>(mut out: W, outcomes: &[TrajectoryOutcome]) -> std::io::Result<()> {
    writeln!(out, "trajectory_id,final_energy,final_n_cl,ionized")?;
    for o in outcomes {
        writeln!(out, "{},{},{},{}", o.id, o.final_energy, o.final_action, u8::from(o.ionized))?;
    }
    Ok(())
}
