//! Time-dependent Schrödinger propagation in an extremal Stark basis.
//!
//! The amplitudes obey i ċ_n = E_n c_n + F(t) Σ z_{nn′} c_{n′} with
//! F(t) = ε f(t/T) sin(ωt + φ), integrated by the classic fixed-step
//! fourth-order Runge-Kutta scheme. After every completed field cycle the
//! amplitudes of manifolds n ≥ n_cut are removed and their probability is
//! booked as ionized.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stark::StarkBasis;
use crate::units;

/// Switch-on/switch-off logistic envelope, times in field cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub t_on: f64,
    pub w_on: f64,
    pub t_off: f64,
    pub w_off: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { t_on: 92.22, w_on: 13.35, t_off: 409.72, w_off: 15.86 }
    }
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.t_on, self.w_on, self.t_off, self.w_off].iter().all(|x| x.is_finite());
        if !finite || self.t_on >= self.t_off || self.w_on <= 0.0 || self.w_off <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid envelope {self:?}")));
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// f(t′) = [1 + e^{−(t′−t_on)/w_on}]⁻¹ − [1 + e^{−(t′−t_off)/w_off}]⁻¹.
pub fn envelope(t_cycles: f64, p: &EnvelopeParams) -> f64 {
    logistic((t_cycles - p.t_on) / p.w_on) - logistic((t_cycles - p.t_off) / p.w_off)
}

/// Microwave drive in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveProtocol {
    /// Peak field amplitude ε.
    pub epsilon: f64,
    /// Angular frequency ω.
    pub omega: f64,
    pub envelope: EnvelopeParams,
    /// Integration length in field cycles.
    pub total_cycles: f64,
    pub steps_per_cycle: usize,
    /// Phase φ of sin(ωt + φ) at t = 0.
    pub phase: f64,
}

pub const DEFAULT_TOTAL_CYCLES: f64 = 500.0;
pub const DEFAULT_STEPS_PER_CYCLE: usize = 1000;
pub const MIN_STEPS_PER_CYCLE: usize = 200;
pub const DEFAULT_N_CUT: u32 = 91;

impl DriveProtocol {
    /// Drive with the default envelope, 500 cycles and zero phase.
    pub fn new(epsilon: f64, omega: f64) -> Result<Self> {
        let d = Self {
            epsilon,
            omega,
            envelope: EnvelopeParams::default(),
            total_cycles: DEFAULT_TOTAL_CYCLES,
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            phase: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    /// Drive from laboratory units: field in V/cm, frequency in GHz.
    pub fn from_lab(field_v_per_cm: f64, frequency_ghz: f64) -> Result<Self> {
        Self::new(units::field_to_au(field_v_per_cm)?, units::frequency_to_au(frequency_ghz)?)
    }

    pub fn with_steps_per_cycle(mut self, steps: usize) -> Result<Self> {
        self.steps_per_cycle = steps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_total_cycles(mut self, cycles: f64) -> Result<Self> {
        self.total_cycles = cycles;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.envelope.validate()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("field amplitude must be ≥ 0, got {}", self.epsilon));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("angular frequency must be > 0, got {}", self.omega));
        }
        if !(self.total_cycles > self.envelope.t_off && self.total_cycles.is_finite()) {
            return bad(format!(
                "total cycles {} must exceed the switch-off center {}",
                self.total_cycles, self.envelope.t_off
            ));
        }
        if self.steps_per_cycle < MIN_STEPS_PER_CYCLE {
            return bad(format!(
                "steps per cycle must be ≥ {MIN_STEPS_PER_CYCLE}, got {}",
                self.steps_per_cycle
            ));
        }
        if !self.phase.is_finite() {
            return bad("phase must be finite".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        units::cycle_period_au(self.omega)
    }

    /// Instantaneous field F(t) at time t in atomic units.
    pub fn field(&self, t: f64) -> f64 {
        let cycles = t / self.period();
        self.epsilon * envelope(cycles, &self.envelope) * (self.omega * t + self.phase).sin()
    }
}

/// Amplitudes over a [`StarkBasis`] plus the probability removed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Vec<Complex64>,
    pub absorbed_probability: f64,
    pub t_cycles: f64,
}

impl QuantumState {
    /// Unit amplitude on the basis state of manifold `n0`.
    pub fn initial(basis: &StarkBasis, n0: u32) -> Result<Self> {
        let i0 = basis.index_of(n0).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "n0 = {n0} outside basis {}..={}",
                basis.n_min, basis.n_max
            ))
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[i0] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, absorbed_probability: 0.0, t_cycles: 0.0 })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// dc/dt = −i (E c + F(t) z c) at time t (atomic units).
pub fn rhs(state: &QuantumState, basis: &StarkBasis, drive: &DriveProtocol, t: f64) -> Result<Vec<Complex64>> {
    let d = basis.dim();
    if state.amplitudes.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: state.amplitudes.len() });
    }
    let f = drive.field(t);
    Ok((0..d)
        .map(|i| {
            let row = &basis.dipole[i * d..(i + 1) * d];
            let zc: Complex64 = row.iter().zip(&state.amplitudes).map(|(z, c)| c * z).sum();
            let h = state.amplitudes[i] * basis.energies[i] + zc * f;
            Complex64::new(h.im, -h.re)
        })
        .collect())
}

/// One line of the per-cycle diagnostic trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Σ|c_n|² over the whole basis after absorption.
    pub norm: f64,
    pub absorbed_probability: f64,
    /// Probability left in manifolds below n_cut.
    pub bound_probability: f64,
    /// Probability in manifolds above `feedback_n` (before absorption).
    pub high_probability: f64,
}

/// When amplitude above the tag manifold is moved into the tagged part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagAt {
    /// After every time step, field-dressed admixture included.
    EveryStep,
    /// Every half cycle, where the field vanishes (phase 0, even step count).
    FieldZeros,
}

/// Knobs of [`propagate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOptions {
    /// Manifolds n ≥ n_cut are absorbed and never count as bound.
    pub n_cut: u32,
    /// Zero the n ≥ n_cut amplitudes after each cycle.
    pub absorber: bool,
    /// Fail when |Σ|c|² + absorbed − 1| exceeds this at a cycle boundary.
    pub norm_tolerance: f64,
    /// Keep per-cycle records.
    pub trace: bool,
    pub integrator: Integrator,
    /// Track, after every step, the amplitude that has been above this
    /// manifold; see [`Propagation::tagged_bound`].
    pub tag_above: Option<u32>,
    pub tag_at: TagAt,
    /// Report the probability above this manifold in the trace.
    pub feedback_n: Option<u32>,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { n_cut: DEFAULT_N_CUT, absorber: true, norm_tolerance: 1e-4, trace: false, integrator: Integrator::Split4, tag_above: None, tag_at: TagAt::FieldZeros, feedback_n: None }
    }
}

/// Outcome of a propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// P_I = 1 − Σ_{n < n_cut} |c_n|².
    pub p_ion: f64,
    pub state: QuantumState,
    /// Largest |Σ|c|² + absorbed − 1| seen at a cycle boundary.
    pub max_norm_drift: f64,
    pub trace: Vec<CycleRecord>,
    /// Bound probability carried by amplitude that was above `tag_above` at
    /// some step; zero without tagging.
    pub tagged_bound: f64,
}

/// Ionization probability of the extremal state n0 after the full drive,
/// with absorption at `n_cut`.
pub fn propagate(basis: &StarkBasis, drive: &DriveProtocol, n0: u32, n_cut: u32) -> Result<f64> {
    let opts = PropagationOptions { n_cut, ..PropagationOptions::default() };
    Ok(propagate_with(basis, drive, n0, &opts)?.p_ion)
}

pub fn propagate_with(basis: &StarkBasis, drive: &DriveProtocol, n0: u32, opts: &PropagationOptions) -> Result<Propagation> {
    drive.validate()?;
    let state = QuantumState::initial(basis, n0)?;
    let i0 = basis.index_of(n0).unwrap_or(0);
    Propagator::new(basis, drive, i0, opts.integrator).run(state, opts)
}

/// Standard basis bounds and the extended upper bound of the convergence check.
pub const BASIS_N_MIN: u32 = 30;
pub const BASIS_N_MAX: u32 = 100;
pub const EXTENDED_N_MAX: u32 = 150;

/// P_I with bases 30…100 and 30…150 for the same drive.
pub fn convergence_pair(m: i32, n0: u32, drive: &DriveProtocol) -> Result<(f64, f64)> {
    let small = crate::stark::build_dipole_matrix(m, BASIS_N_MIN, BASIS_N_MAX)?;
    let large = crate::stark::build_dipole_matrix(m, BASIS_N_MIN, EXTENDED_N_MAX)?;
    Ok((propagate(&small, drive, n0, DEFAULT_N_CUT)?, propagate(&large, drive, n0, DEFAULT_N_CUT)?))
}

/// How much probability re-enters the bound manifolds after visiting n > `n_high`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    /// Final probability in n < n_cut.
    pub bound: f64,
    /// The part of `bound` carried by amplitude that was above `n_high` at
    /// some time step.
    pub returned: f64,
    /// Largest probability found above `n_high` at a cycle boundary.
    pub max_high: f64,
}

/// Standard run (absorber at `n_cut` each cycle) with the amplitude that
/// passes above `n_high` tagged at every step. The absorber clears n ≥ n_cut
/// at cycle boundaries, so tagged amplitude can only come back within a cycle.
pub fn feedback(basis: &StarkBasis, drive: &DriveProtocol, n0: u32, n_cut: u32, n_high: u32, tag_at: TagAt) -> Result<Feedback> {
    if n_high < n_cut || n_high >= basis.n_max {
        return Err(Error::InvalidArgument(format!(
            "need n_cut = {n_cut} ≤ n_high = {n_high} < n_max = {}",
            basis.n_max
        )));
    }
    let opts = PropagationOptions { n_cut, trace: true, feedback_n: Some(n_high), tag_above: Some(n_high), tag_at, ..Default::default() };
    let p = propagate_with(basis, drive, n0, &opts)?;
    Ok(Feedback {
        bound: 1.0 - p.p_ion,
        returned: p.tagged_bound,
        max_high: p.trace.iter().map(|r| r.high_probability).fold(0.0, f64::max),
    })
}

/// Evolve `state` without absorption from `t_start` to `t_end` (in field
/// cycles, either direction) with the drive's step size. Energies are
/// measured from `basis.energies[reference]`, which only changes a global
/// phase.
pub fn evolve(
    basis: &StarkBasis,
    drive: &DriveProtocol,
    state: &QuantumState,
    t_start: f64,
    t_end: f64,
    integrator: Integrator,
    reference: usize,
) -> Result<QuantumState> {
    drive.validate()?;
    let d = basis.dim();
    if state.amplitudes.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: state.amplitudes.len() });
    }
    if reference >= d {
        return Err(Error::InvalidArgument(format!("reference index {reference} outside basis of {d}")));
    }
    let p = Propagator::new(basis, drive, reference, integrator);
    let steps = ((t_end - t_start).abs() * drive.steps_per_cycle as f64).round() as usize;
    let period = drive.period();
    let h = if steps == 0 { 0.0 } else { (t_end - t_start) * period / steps as f64 };
    let mut re: Vec<f64> = state.amplitudes.iter().map(|c| c.re).collect();
    let mut im: Vec<f64> = state.amplitudes.iter().map(|c| c.im).collect();
    let mut work = p.workspace(d);
    for k in 0..steps {
        p.step(t_start * period + k as f64 * h, h, &mut re, &mut im, &mut work);
    }
    Ok(QuantumState {
        amplitudes: re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect(),
        absorbed_probability: state.absorbed_probability,
        t_cycles: t_end,
    })
}

/// Time stepper for the amplitude equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Fourth-order unitary splitting: triple-jump composition of
    /// e^{−iEh/2} e^{−iF z h} e^{−iEh/2}, with the coupling exponentiated in
    /// the eigenbasis of z. Norm is preserved to round-off at any step size.
    #[default]
    Split4,
    /// Classic fixed-step fourth-order Runge-Kutta on the full equations.
    /// Stiff for this problem: needs ~10⁴ steps per cycle to be stable.
    Rk4,
}

impl Integrator {
    pub fn tag(self) -> &'static str {
        match self {
            Integrator::Split4 => "split4",
            Integrator::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split4" => Ok(Integrator::Split4),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::InvalidArgument(format!("unknown integrator '{other}' (split4 or rk4)"))),
        }
    }
}

/// Eigen-decomposition z = V diag(λ) Vᵀ used by the splitting scheme.
struct Coupling {
    /// Row-major V.
    vectors: Vec<f64>,
    values: Vec<f64>,
}

/// Triple-jump weights w₁, w₀, w₁ with 2w₁ + w₀ = 1.
fn triple_jump() -> [f64; 3] {
    let c = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - c);
    [w1, -c * w1, w1]
}

struct Propagator<'a> {
    basis: &'a StarkBasis,
    drive: &'a DriveProtocol,
    /// Energies measured from a reference level: a global phase, invisible in |c|².
    shifted: Vec<f64>,
    coupling: Option<Coupling>,
}

enum Workspace {
    Rk4(Scratch),
    Split { tr: Vec<f64>, ti: Vec<f64>, drift: Vec<(f64, Vec<(f64, f64)>)> },
}

impl<'a> Propagator<'a> {
    fn new(basis: &'a StarkBasis, drive: &'a DriveProtocol, reference: usize, integrator: Integrator) -> Self {
        let e0 = basis.energies[reference];
        let shifted = basis.energies.iter().map(|e| e - e0).collect();
        let coupling = match integrator {
            Integrator::Rk4 => None,
            Integrator::Split4 => {
                let d = basis.dim();
                let eig = nalgebra::DMatrix::from_row_slice(d, d, &basis.dipole).symmetric_eigen();
                let vectors = (0..d).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| eig.eigenvectors[(i, k)]).collect();
                Some(Coupling { vectors, values: eig.eigenvalues.iter().copied().collect() })
            }
        };
        Self { basis, drive, shifted, coupling }
    }

    fn workspace(&self, d: usize) -> Workspace {
        match self.coupling {
            None => Workspace::Rk4(Scratch::new(d)),
            Some(_) => Workspace::Split { tr: vec![0.0; d], ti: vec![0.0; d], drift: Vec::new() },
        }
    }

    /// k = −i (E c + f z c) for c = (re, im).
    fn derivative(&self, f: f64, re: &[f64], im: &[f64], k_re: &mut [f64], k_im: &mut [f64]) {
        let d = re.len();
        let z = &self.basis.dipole;
        for i in 0..d {
            let row = &z[i * d..(i + 1) * d];
            let (mut sr, mut si) = (0.0, 0.0);
            for ((zij, r), m) in row.iter().zip(re).zip(im) {
                sr += zij * r;
                si += zij * m;
            }
            let hr = self.shifted[i] * re[i] + f * sr;
            let hi = self.shifted[i] * im[i] + f * si;
            k_re[i] = hi;
            k_im[i] = -hr;
        }
    }

    fn step(&self, t: f64, h: f64, re: &mut [f64], im: &mut [f64], work: &mut Workspace) {
        match work {
            Workspace::Rk4(s) => self.rk4_step(t, h, re, im, s),
            Workspace::Split { tr, ti, drift } => {
                let coupling = self.coupling.as_ref().expect("splitting workspace without coupling");
                let mut t = t;
                for w in triple_jump() {
                    let hh = w * h;
                    let phases = drift_phases(drift, &self.shifted, 0.5 * hh);
                    rotate(re, im, phases);
                    let f = self.drive.field(t + 0.5 * hh);
                    kick(coupling, f * hh, re, im, tr, ti);
                    let phases = drift_phases(drift, &self.shifted, 0.5 * hh);
                    rotate(re, im, phases);
                    t += hh;
                }
            }
        }
    }

    fn run(&self, mut state: QuantumState, opts: &PropagationOptions) -> Result<Propagation> {
        let d = self.basis.dim();
        let cut = opts
            .n_cut
            .checked_sub(self.basis.n_min)
            .map_or(0, |k| (k as usize).min(d));
        let period = self.drive.period();
        let spc = self.drive.steps_per_cycle;
        let h = period / spc as f64;
        let full_cycles = self.drive.total_cycles.floor() as usize;
        let tail_steps = ((self.drive.total_cycles - full_cycles as f64) * spc as f64).round() as usize;

        let mut re: Vec<f64> = state.amplitudes.iter().map(|c| c.re).collect();
        let mut im: Vec<f64> = state.amplitudes.iter().map(|c| c.im).collect();
        let mut work = self.workspace(d);
        let mut trace = Vec::new();
        let mut max_drift = 0.0f64;
        let mut absorbed = state.absorbed_probability;
        let tag_index = opts
            .tag_above
            .map(|n| (n.saturating_sub(self.basis.n_min).saturating_add(1) as usize).min(d));
        // Linear evolution: ψ = a + b with b the part that has been above the
        // tag manifold at some step. ψ is stepped as usual, b alongside it.
        let tag_every = match opts.tag_at {
            TagAt::EveryStep => 1,
            TagAt::FieldZeros => {
                if opts.tag_above.is_some() && (self.drive.phase != 0.0 || spc % 2 != 0) {
                    return Err(Error::InvalidArgument("tagging at field zeros needs phase 0 and an even step count".into()));
                }
                spc / 2
            }
        };
        let (mut tre, mut tim) = match tag_index {
            Some(_) => (vec![0.0; d], vec![0.0; d]),
            None => (Vec::new(), Vec::new()),
        };
        let feedback_index = opts
            .feedback_n
            .map(|n| n.saturating_sub(self.basis.n_min).saturating_add(1) as usize)
            .unwrap_or(d)
            .min(d);

        let mut step_index = 0usize;
        let total_blocks = full_cycles + usize::from(tail_steps > 0);
        for cycle in 0..total_blocks {
            let steps = if cycle < full_cycles { spc } else { tail_steps };
            for _ in 0..steps {
                let t = step_index as f64 * h;
                self.step(t, h, &mut re, &mut im, &mut work);
                step_index += 1;
                if let Some(k) = tag_index {
                    self.step(t, h, &mut tre, &mut tim, &mut work);
                    if tag_every > 0 && step_index % tag_every == 0 {
                        tre[k..].copy_from_slice(&re[k..]);
                        tim[k..].copy_from_slice(&im[k..]);
                    }
                }
            }
            let above_cut: f64 = (cut..d).map(|i| re[i] * re[i] + im[i] * im[i]).sum();
            let high: f64 = (feedback_index..d).map(|i| re[i] * re[i] + im[i] * im[i]).sum();
            if opts.absorber {
                absorbed += above_cut;
                re[cut..].iter_mut().for_each(|x| *x = 0.0);
                im[cut..].iter_mut().for_each(|x| *x = 0.0);
                if tag_index.is_some() {
                    tre[cut..].iter_mut().for_each(|x| *x = 0.0);
                    tim[cut..].iter_mut().for_each(|x| *x = 0.0);
                }
            }
            let norm: f64 = re.iter().chain(&im).map(|x| x * x).sum();
            let drift = (norm + absorbed - 1.0).abs();
            max_drift = max_drift.max(drift);
            if !(drift <= opts.norm_tolerance) {
                return Err(Error::NormDrift { drift, limit: opts.norm_tolerance, cycle: cycle + 1 });
            }
            if opts.trace {
                let bound: f64 = (0..cut).map(|i| re[i] * re[i] + im[i] * im[i]).sum();
                trace.push(CycleRecord {
                    cycle: cycle + 1,
                    norm,
                    absorbed_probability: absorbed,
                    bound_probability: bound,
                    high_probability: high,
                });
            }
        }

        let bound: f64 = (0..cut).map(|i| re[i] * re[i] + im[i] * im[i]).sum();
        let tagged_bound = if tag_index.is_some() { (0..cut).map(|i| tre[i] * tre[i] + tim[i] * tim[i]).sum() } else { 0.0 };
        state.amplitudes = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        state.absorbed_probability = absorbed;
        state.t_cycles = step_index as f64 / spc as f64;
        Ok(Propagation { p_ion: (1.0 - bound).clamp(0.0, 1.0), state, max_norm_drift: max_drift, trace, tagged_bound })
    }

    fn rk4_step(&self, t: f64, h: f64, re: &mut [f64], im: &mut [f64], s: &mut Scratch) {
        let f0 = self.drive.field(t);
        let fm = self.drive.field(t + 0.5 * h);
        let f1 = self.drive.field(t + h);
        let d = re.len();

        self.derivative(f0, re, im, &mut s.k1r, &mut s.k1i);
        for i in 0..d {
            s.yr[i] = re[i] + 0.5 * h * s.k1r[i];
            s.yi[i] = im[i] + 0.5 * h * s.k1i[i];
        }
        self.derivative(fm, &s.yr, &s.yi, &mut s.k2r, &mut s.k2i);
        for i in 0..d {
            s.yr[i] = re[i] + 0.5 * h * s.k2r[i];
            s.yi[i] = im[i] + 0.5 * h * s.k2i[i];
        }
        self.derivative(fm, &s.yr, &s.yi, &mut s.k3r, &mut s.k3i);
        for i in 0..d {
            s.yr[i] = re[i] + h * s.k3r[i];
            s.yi[i] = im[i] + h * s.k3i[i];
        }
        self.derivative(f1, &s.yr, &s.yi, &mut s.k4r, &mut s.k4i);
        let w = h / 6.0;
        for i in 0..d {
            re[i] += w * (s.k1r[i] + 2.0 * (s.k2r[i] + s.k3r[i]) + s.k4r[i]);
            im[i] += w * (s.k1i[i] + 2.0 * (s.k2i[i] + s.k3i[i]) + s.k4i[i]);
        }
    }
}

/// Cached (cos, sin) of E·τ for the few distinct drift lengths τ.
fn drift_phases<'w>(cache: &'w mut Vec<(f64, Vec<(f64, f64)>)>, energies: &[f64], tau: f64) -> &'w [(f64, f64)] {
    let pos = match cache.iter().position(|(t, _)| *t == tau) {
        Some(p) => p,
        None => {
            cache.push((tau, energies.iter().map(|e| { let (s, c) = (e * tau).sin_cos(); (c, s) }).collect()));
            cache.len() - 1
        }
    };
    &cache[pos].1
}

/// c ← e^{−iθ} c componentwise.
fn rotate(re: &mut [f64], im: &mut [f64], phases: &[(f64, f64)]) {
    for ((r, m), &(c, s)) in re.iter_mut().zip(im.iter_mut()).zip(phases) {
        let (a, b) = (*r, *m);
        *r = c * a + s * b;
        *m = c * b - s * a;
    }
}

/// c ← V e^{−iλθ} Vᵀ c.
fn kick(coupling: &Coupling, theta: f64, re: &mut [f64], im: &mut [f64], tr: &mut [f64], ti: &mut [f64]) {
    if theta == 0.0 {
        return;
    }
    let d = re.len();
    let v = &coupling.vectors;
    tr.fill(0.0);
    ti.fill(0.0);
    for i in 0..d {
        let (a, b) = (re[i], im[i]);
        let row = &v[i * d..(i + 1) * d];
        for ((x, y), vk) in tr.iter_mut().zip(ti.iter_mut()).zip(row) {
            *x += vk * a;
            *y += vk * b;
        }
    }
    for ((x, y), lambda) in tr.iter_mut().zip(ti.iter_mut()).zip(&coupling.values) {
        let (s, c) = (lambda * theta).sin_cos();
        let (a, b) = (*x, *y);
        *x = c * a + s * b;
        *y = c * b - s * a;
    }
    for i in 0..d {
        let row = &v[i * d..(i + 1) * d];
        let (mut sr, mut si) = (0.0, 0.0);
        for ((vk, x), y) in row.iter().zip(tr.iter()).zip(ti.iter()) {
            sr += vk * x;
            si += vk * y;
        }
        re[i] = sr;
        im[i] = si;
    }
}

struct Scratch {
    k1r: Vec<f64>,
    k1i: Vec<f64>,
    k2r: Vec<f64>,
    k2i: Vec<f64>,
    k3r: Vec<f64>,
    k3i: Vec<f64>,
    k4r: Vec<f64>,
    k4i: Vec<f64>,
    yr: Vec<f64>,
    yi: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        let z = || vec![0.0; d];
        Self { k1r: z(), k1i: z(), k2r: z(), k2i: z(), k3r: z(), k3i: z(), k4r: z(), k4i: z(), yr: z(), yi: z() }
    }
}

/// Write a trace as CSV `cycle,norm,absorbed_probability,bound_probability`.
pub fn write_trace<W: Write>(mut out: W, trace: &[CycleRecord]) -> std::io::Result<()> {
    writeln!(out, "cycle,norm,absorbed_probability,bound_probability")?;
    for r in trace {
        writeln!(out, "{},{},{},{}", r.cycle, r.norm, r.absorbed_probability, r.bound_probability)?;
    }
    Ok(())
}
