//! Field grid × m₀ × method sweeps with a worker pool and resumable checkpoints.
//!
//! Checkpoint file schema (text, one record per line):
//!
//! ```text
//! mwion-checkpoint v1
//! fingerprint <sha256 of the result-relevant configuration>
//! <kind> <m0> <field_index> <p_ion> <runtime_s> <attempts>
//! ```
//!
//! Records are only ever added. Every flush writes the whole file to a
//! temporary sibling and renames it over the old one.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::classical::{self, ClassicalOptions, MicrocanonicalSampler};
use crate::ensemble::{self, CurveLabel, CurveMeta, DroopProfile, IonizationCurve, Method, COMPUTED_M0};
use crate::error::{Error, Result};
use crate::quantum::{self, DriveProtocol, EnvelopeParams, Integrator, PropagationOptions};
use crate::stark::{self, Extremum, StarkBasis};

/// Kind of work a task performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Quantum,
    Classical,
    /// Standard basis on the convergence grid.
    ConvergenceBase,
    /// Extended basis on the convergence grid.
    ConvergenceExtended,
}

impl TaskKind {
    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::Quantum => "quantum",
            TaskKind::Classical => "classical",
            TaskKind::ConvergenceBase => "conv-base",
            TaskKind::ConvergenceExtended => "conv-ext",
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [TaskKind::Quantum, TaskKind::Classical, TaskKind::ConvergenceBase, TaskKind::ConvergenceExtended]
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task kind '{s}'")))
    }
}

/// One (field, m₀, kind) unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Task {
    pub kind: TaskKind,
    pub m0: i32,
    pub field_index: usize,
}

/// Which methods a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSet {
    Quantum,
    Classical,
    Both,
}

impl MethodSet {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSet::Quantum => vec![Method::Quantum],
            MethodSet::Classical => vec![Method::Classical],
            MethodSet::Both => vec![Method::Quantum, Method::Classical],
        }
    }
}

impl FromStr for MethodSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(MethodSet::Quantum),
            "classical" => Ok(MethodSet::Classical),
            "both" => Ok(MethodSet::Both),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}' (quantum, classical or both)"))),
        }
    }
}

/// Uniform field grid lo, lo + step, …, hi in V/cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    pub lo: f64,
    pub hi: f64,
    /// Whole number of V/cm; values above 1 are interpolated onto 1 V/cm.
    pub step: f64,
}

impl FieldGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let g = Self { lo, hi, step };
        g.validate(0.0)?;
        Ok(g)
    }

    fn validate(&self, min_lo: f64) -> Result<()> {
        let integral = |x: f64| x.is_finite() && (x - x.round()).abs() < 1e-9;
        if !(integral(self.lo) && integral(self.hi)) || self.lo < min_lo || self.hi < self.lo {
            return Err(Error::InvalidArgument(format!(
                "field range {}..{} V/cm must be whole numbers with {min_lo} ≤ lo ≤ hi",
                self.lo, self.hi
            )));
        }
        if !(integral(self.step) && self.step >= 1.0) {
            return Err(Error::InvalidArgument(format!("field step {} must be a whole number ≥ 1 V/cm", self.step)));
        }
        if !integral((self.hi - self.lo) / self.step) {
            return Err(Error::InvalidArgument(format!(
                "field range {}..{} is not a multiple of the step {}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> f64 {
        self.lo + index as f64 * self.step
    }
}

/// Basis-convergence comparison: the standard basis against one extended to `n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceConfig {
    pub m0: i32,
    pub n_max: u32,
    pub grid: FieldGrid,
}

/// Everything a sweep needs. `workers` does not affect results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n0: u32,
    pub grid: FieldGrid,
    pub m0_set: Vec<i32>,
    pub methods: MethodSet,
    pub basis_n_min: u32,
    pub basis_n_max: u32,
    pub n_cut: u32,
    pub frequency_ghz: f64,
    pub envelope: EnvelopeParams,
    pub total_cycles: f64,
    pub steps_per_cycle: usize,
    pub phase: f64,
    pub integrator: Integrator,
    /// Classical trajectories per (field, m₀).
    pub trajectories: usize,
    pub classical_rtol: f64,
    pub seed: u64,
    pub convergence: Option<ConvergenceConfig>,
    pub droop: DroopProfile,
    pub workers: usize,
    /// Extra attempts for a failing task.
    pub max_retries: usize,
    /// Directory for cached dipole matrices.
    pub cache_dir: Option<PathBuf>,
}

impl SweepConfig {
    /// n0 = 37 at 9.92 GHz, m₀ ∈ {0, 5, …, 35}, basis 30…100, n_cut = 91,
    /// 500 cycles, 300…420 V/cm, quantum only.
    pub fn preset_n37() -> Self {
        Self {
            n0: 37,
            grid: FieldGrid { lo: 300.0, hi: 420.0, step: 1.0 },
            m0_set: COMPUTED_M0.to_vec(),
            methods: MethodSet::Quantum,
            basis_n_min: quantum::BASIS_N_MIN,
            basis_n_max: quantum::BASIS_N_MAX,
            n_cut: quantum::DEFAULT_N_CUT,
            frequency_ghz: 9.92,
            envelope: EnvelopeParams::default(),
            total_cycles: quantum::DEFAULT_TOTAL_CYCLES,
            steps_per_cycle: quantum::DEFAULT_STEPS_PER_CYCLE,
            phase: 0.0,
            integrator: Integrator::Split4,
            trajectories: 25,
            classical_rtol: classical::DEFAULT_RTOL,
            seed: 1,
            convergence: None,
            droop: DroopProfile::default(),
            workers: 1,
            max_retries: 1,
            cache_dir: None,
        }
    }

    /// Desk-scale reproduction of all three figures: 260…540 V/cm sampled
    /// every 5 V/cm for both methods, 64 trajectories per (field, m₀) so the
    /// averaged classical curve rests on 512 trajectories per field, and the
    /// m₀ = 10 basis comparison over 300…420 V/cm.
    pub fn preset_n37_desk() -> Self {
        Self {
            grid: FieldGrid { lo: 260.0, hi: 540.0, step: 5.0 },
            methods: MethodSet::Both,
            trajectories: 64,
            convergence: Some(ConvergenceConfig {
                m0: 10,
                n_max: quantum::EXTENDED_N_MAX,
                grid: FieldGrid { lo: 300.0, hi: 420.0, step: 10.0 },
            }),
            ..Self::preset_n37()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(1.0)
    }

    fn validate_with(&self, min_lo: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n0 < 1 {
            return bad("n0 must be ≥ 1".into());
        }
        self.grid.validate(min_lo)?;
        if self.m0_set.is_empty() {
            return bad("m0 set is empty".into());
        }
        if let Some(m0) = self.m0_set.iter().find(|m| m.unsigned_abs() >= self.n0) {
            return bad(format!("|m0| = {} must be ≤ n0 − 1 = {}", m0.abs(), self.n0 - 1));
        }
        let mut sorted = self.m0_set.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.m0_set.len() {
            return bad("m0 set has duplicates".into());
        }
        if self.runs(Method::Quantum) {
            if !(self.basis_n_min..=self.basis_n_max).contains(&self.n0) {
                return bad(format!("n0 = {} outside basis {}..={}", self.n0, self.basis_n_min, self.basis_n_max));
            }
            if self.n_cut <= self.n0 {
                return bad(format!("n_cut = {} must exceed n0 = {}", self.n_cut, self.n0));
            }
        }
        if self.runs(Method::Classical) {
            if self.trajectories == 0 {
                return bad("need at least one trajectory per field".into());
            }
            if !(self.classical_rtol > 0.0 && self.classical_rtol < 1e-3) {
                return bad(format!("classical tolerance {} out of range", self.classical_rtol));
            }
        }
        if let Some(c) = &self.convergence {
            c.grid.validate(min_lo)?;
            if c.n_max <= self.basis_n_max || c.m0.unsigned_abs() >= self.n0 {
                return bad(format!("convergence basis must extend past n = {}", self.basis_n_max));
            }
        }
        if self.workers == 0 {
            return bad("worker count must be ≥ 1".into());
        }
        if self.droop.nodes == 0 || !(0.0..1.0).contains(&self.droop.drop) {
            return bad(format!("invalid droop profile {:?}", self.droop));
        }
        self.drive(self.grid.lo).map(|_| ())
    }

    pub fn runs(&self, method: Method) -> bool {
        self.methods.methods().contains(&method)
    }

    pub fn drive(&self, field_v_per_cm: f64) -> Result<DriveProtocol> {
        let mut d = DriveProtocol::from_lab(field_v_per_cm, self.frequency_ghz)?;
        d.envelope = self.envelope;
        d.total_cycles = self.total_cycles;
        d.steps_per_cycle = self.steps_per_cycle;
        d.phase = self.phase;
        d.validate()?;
        Ok(d)
    }

    /// Canonical description of every result-relevant setting.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n0={}", self.n0);
        let _ = writeln!(s, "grid={:?},{:?},{:?}", self.grid.lo, self.grid.hi, self.grid.step);
        let _ = writeln!(s, "m0={:?}", self.m0_set);
        let _ = writeln!(s, "methods={:?}", self.methods);
        let _ = writeln!(s, "basis={}..{}", self.basis_n_min, self.basis_n_max);
        let _ = writeln!(s, "n_cut={}", self.n_cut);
        let _ = writeln!(s, "ghz={:?}", self.frequency_ghz);
        let e = &self.envelope;
        let _ = writeln!(s, "envelope={:?},{:?},{:?},{:?}", e.t_on, e.w_on, e.t_off, e.w_off);
        let _ = writeln!(s, "cycles={:?}", self.total_cycles);
        let _ = writeln!(s, "spc={}", self.steps_per_cycle);
        let _ = writeln!(s, "phase={:?}", self.phase);
        let _ = writeln!(s, "integrator={}", self.integrator.tag());
        let _ = writeln!(s, "trajectories={}", self.trajectories);
        let _ = writeln!(s, "rtol={:?}", self.classical_rtol);
        let _ = writeln!(s, "seed={}", self.seed);
        if let Some(c) = &self.convergence {
            let _ = writeln!(s, "convergence={},{},{:?},{:?},{:?}", c.m0, c.n_max, c.grid.lo, c.grid.hi, c.grid.step);
        }
        let _ = writeln!(s, "droop={:?},{}", self.droop.drop, self.droop.nodes);
        s
    }

    pub fn fingerprint(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }

    /// Every task of this configuration in canonical order.
    pub fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for method in self.methods.methods() {
            let kind = match method {
                Method::Quantum => TaskKind::Quantum,
                Method::Classical => TaskKind::Classical,
            };
            for &m0 in &self.m0_set {
                for field_index in 0..self.grid.len() {
                    tasks.push(Task { kind, m0, field_index });
                }
            }
        }
        if let Some(c) = &self.convergence {
            for kind in [TaskKind::ConvergenceBase, TaskKind::ConvergenceExtended] {
                for field_index in 0..c.grid.len() {
                    tasks.push(Task { kind, m0: c.m0, field_index });
                }
            }
        }
        tasks
    }

    pub fn field_of(&self, task: &Task) -> f64 {
        match task.kind {
            TaskKind::Quantum | TaskKind::Classical => self.grid.value(task.field_index),
            TaskKind::ConvergenceBase | TaskKind::ConvergenceExtended => {
                self.convergence.as_ref().map_or(f64::NAN, |c| c.grid.value(task.field_index))
            }
        }
    }

    pub fn describe(&self, task: &Task) -> String {
        format!("{} m0={} field={} V/cm", task.kind.tag(), task.m0, self.field_of(task))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Stored outcome of a completed task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRecord {
    pub p_ion: f64,
    pub runtime_s: f64,
    pub attempts: usize,
}

/// Completed tasks of one configuration, persisted as described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub records: BTreeMap<Task, TaskRecord>,
}

const CHECKPOINT_MAGIC: &str = "mwion-checkpoint v1";

impl Checkpoint {
    pub fn new(fingerprint: String) -> Self {
        Self { fingerprint, records: BTreeMap::new() }
    }

    /// Load `path`; a missing file gives an empty checkpoint.
    pub fn load(path: &Path, fingerprint: &str) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::new(fingerprint.to_string()));
        }
        let text = fs::read_to_string(path)?;
        let bad = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, CHECKPOINT_MAGIC)) => {}
            _ => return Err(bad(1, "not a checkpoint file".into())),
        }
        let stored = match lines.next() {
            Some((_, l)) => l.strip_prefix("fingerprint ").ok_or_else(|| bad(2, "missing fingerprint".into()))?,
            None => return Err(bad(2, "missing fingerprint".into())),
        };
        if stored != fingerprint {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                msg: format!("written for configuration {stored}, current is {fingerprint}"),
            });
        }
        let mut records = BTreeMap::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(' ').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, format!("expected 6 fields, found {}", f.len())));
            }
            let num = |k: usize| -> Result<f64> { f[k].parse().map_err(|_| bad(i + 1, format!("bad number '{}'", f[k]))) };
            let int = |k: usize| -> Result<usize> { f[k].parse().map_err(|_| bad(i + 1, format!("bad integer '{}'", f[k]))) };
            let task = Task {
                kind: f[0].parse().map_err(|_| bad(i + 1, format!("bad task kind '{}'", f[0])))?,
                m0: f[1].parse().map_err(|_| bad(i + 1, format!("bad m0 '{}'", f[1])))?,
                field_index: int(2)?,
            };
            let rec = TaskRecord { p_ion: num(3)?, runtime_s: num(4)?, attempts: int(5)? };
            if records.insert(task, rec).is_some() {
                return Err(bad(i + 1, "duplicate task".into()));
            }
        }
        Ok(Self { fingerprint: fingerprint.to_string(), records })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(s, "fingerprint {}", self.fingerprint);
        for (t, r) in &self.records {
            let _ = writeln!(s, "{} {} {} {} {:.3} {}", t.kind.tag(), t.m0, t.field_index, r.p_ion, r.runtime_s, r.attempts);
        }
        s
    }

    /// Write atomically: temporary sibling, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, self.render())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Test hook deciding whether an attempt should fail artificially.
pub type FailHook = Arc<dyn Fn(&Task, usize) -> bool + Send + Sync>;

/// Run-time knobs that do not change results.
#[derive(Clone, Default)]
pub struct SweepControl {
    pub checkpoint: Option<PathBuf>,
    /// Stop (as if killed) after this many newly completed tasks.
    pub stop_after: Option<usize>,
    /// Tasks per checkpoint flush; defaults to the worker count.
    pub batch_size: Option<usize>,
    /// Print one line per completed task to stderr.
    pub verbose: bool,
    pub fail_hook: Option<FailHook>,
}

/// Result of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: BTreeMap<Task, TaskRecord>,
    /// Tasks executed in this call (the rest came from the checkpoint).
    pub executed: usize,
    /// False when `stop_after` interrupted the sweep.
    pub complete: bool,
}

impl SweepOutcome {
    /// Per-(method, m₀) curves on the 1 V/cm grid.
    pub fn curves(&self, cfg: &SweepConfig) -> Result<BTreeMap<(Method, i32), IonizationCurve>> {
        let mut out = BTreeMap::new();
        for method in cfg.methods.methods() {
            let kind = match method {
                Method::Quantum => TaskKind::Quantum,
                Method::Classical => TaskKind::Classical,
            };
            for &m0 in &cfg.m0_set {
                let meta = CurveMeta { n0: cfg.n0, label: CurveLabel::M(m0), method, droop: false };
                out.insert((method, m0), self.curve_of(kind, m0, &cfg.grid, meta)?);
            }
        }
        Ok(out)
    }

    /// Standard and extended basis curves of the convergence check.
    pub fn convergence_curves(&self, cfg: &SweepConfig) -> Result<Option<(IonizationCurve, IonizationCurve)>> {
        let Some(c) = &cfg.convergence else { return Ok(None) };
        let meta = CurveMeta { n0: cfg.n0, label: CurveLabel::M(c.m0), method: Method::Quantum, droop: false };
        Ok(Some((
            self.curve_of(TaskKind::ConvergenceBase, c.m0, &c.grid, meta)?,
            self.curve_of(TaskKind::ConvergenceExtended, c.m0, &c.grid, meta)?,
        )))
    }

    fn curve_of(&self, kind: TaskKind, m0: i32, grid: &FieldGrid, meta: CurveMeta) -> Result<IonizationCurve> {
        let samples = (0..grid.len())
            .map(|field_index| {
                self.records
                    .get(&Task { kind, m0, field_index })
                    .map(|r| (grid.value(field_index), r.p_ion))
                    .ok_or_else(|| Error::Curve(format!("{} m0={m0} field index {field_index} not computed", kind.tag())))
            })
            .collect::<Result<Vec<_>>>()?;
        IonizationCurve::from_samples(&samples, meta)
    }
}

/// Immutable inputs shared by all workers.
struct Prepared {
    bases: BTreeMap<(i32, u32), StarkBasis>,
}

fn basis_for(cfg: &SweepConfig, m0: i32, n_max: u32) -> Result<StarkBasis> {
    match &cfg.cache_dir {
        Some(dir) => stark::load_or_build(dir, m0, cfg.basis_n_min, n_max, Extremum::Uphill),
        None => stark::build_dipole_matrix(m0, cfg.basis_n_min, n_max),
    }
}

fn prepare(cfg: &SweepConfig, pending: &[Task]) -> Result<Prepared> {
    let mut wanted: Vec<(i32, u32)> = pending
        .iter()
        .filter_map(|t| match t.kind {
            TaskKind::Quantum | TaskKind::ConvergenceBase => Some((t.m0, cfg.basis_n_max)),
            TaskKind::ConvergenceExtended => cfg.convergence.as_ref().map(|c| (t.m0, c.n_max)),
            TaskKind::Classical => None,
        })
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let bases = wanted
        .into_par_iter()
        .map(|(m0, n_max)| Ok(((m0, n_max), basis_for(cfg, m0, n_max)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Prepared { bases })
}

/// Sub-seed of one (m₀) stream so windows do not share trajectories.
fn m0_seed(seed: u64, m0: i32) -> u64 {
    seed ^ (u64::from(m0 as u32)).wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

/// The sampler a sweep uses for the classical tasks of `m0`.
pub fn classical_sampler(cfg: &SweepConfig, m0: i32) -> Result<MicrocanonicalSampler> {
    MicrocanonicalSampler::new(cfg.n0, m0_seed(cfg.seed, m0))?.with_m_window(m0)
}

fn execute(cfg: &SweepConfig, prep: &Prepared, task: &Task) -> Result<f64> {
    let field = cfg.field_of(task);
    let drive = cfg.drive(field)?;
    match task.kind {
        TaskKind::Classical => {
            let sampler = classical_sampler(cfg, task.m0)?;
            let opts = ClassicalOptions { rtol: cfg.classical_rtol, ..ClassicalOptions::default() };
            let outcomes = classical::run_ensemble(&sampler, &drive, cfg.trajectories, cfg.n_cut, task.field_index as u64, &opts)?;
            Ok(classical::ionized_fraction(&outcomes))
        }
        kind => {
            let n_max = match kind {
                TaskKind::ConvergenceExtended => cfg.convergence.as_ref().map_or(cfg.basis_n_max, |c| c.n_max),
                _ => cfg.basis_n_max,
            };
            let basis = prep
                .bases
                .get(&(task.m0, n_max))
                .ok_or_else(|| Error::InvalidArgument(format!("basis m={} n_max={n_max} not prepared", task.m0)))?;
            if drive.epsilon == 0.0 {
                return Ok(0.0);
            }
            let opts = PropagationOptions { n_cut: cfg.n_cut, integrator: cfg.integrator, ..PropagationOptions::default() };
            Ok(quantum::propagate_with(basis, &drive, cfg.n0, &opts)?.p_ion)
        }
    }
}

fn run_with_retries(cfg: &SweepConfig, prep: &Prepared, task: &Task, hook: Option<&FailHook>) -> (Task, Result<TaskRecord, (usize, Error)>) {
    let start = Instant::now();
    let mut last = None;
    for attempt in 1..=cfg.max_retries + 1 {
        let result = if hook.is_some_and(|h| h(task, attempt)) {
            Err(Error::InvalidArgument("injected failure".into()))
        } else {
            execute(cfg, prep, task)
        };
        match result {
            Ok(p_ion) => {
                return (*task, Ok(TaskRecord { p_ion, runtime_s: start.elapsed().as_secs_f64(), attempts: attempt }));
            }
            Err(e) => last = Some((attempt, e)),
        }
    }
    (*task, Err(last.expect("at least one attempt")))
}

/// Run (or resume) every task of `cfg`.
///
/// On persistent failure of a task the completed records are saved and a
/// `<checkpoint>.partial` manifest lists completed and failed tasks.
pub fn run_sweep(cfg: &SweepConfig, control: &SweepControl) -> Result<SweepOutcome> {
    cfg.validate()?;
    run_tasks(cfg, control)
}

fn run_tasks(cfg: &SweepConfig, control: &SweepControl) -> Result<SweepOutcome> {
    let fingerprint = cfg.fingerprint();
    let mut ckpt = match &control.checkpoint {
        Some(p) => Checkpoint::load(p, &fingerprint)?,
        None => Checkpoint::new(fingerprint),
    };
    let all = cfg.tasks();
    let pending: Vec<Task> = all.iter().filter(|t| !ckpt.records.contains_key(t)).copied().collect();
    let budget = control.stop_after.unwrap_or(usize::MAX).min(pending.len());
    let todo = &pending[..budget];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let prep = pool.install(|| prepare(cfg, todo))?;
    let batch = control.batch_size.unwrap_or(cfg.workers).max(1);

    let mut executed = 0;
    for chunk in todo.chunks(batch) {
        let results: Vec<_> = pool.install(|| {
            chunk.par_iter().map(|t| run_with_retries(cfg, &prep, t, control.fail_hook.as_ref())).collect()
        });
        let mut failure = None;
        for (task, r) in results {
            match r {
                Ok(rec) => {
                    if control.verbose {
                        eprintln!("done {} p_ion={} ({:.1} s)", cfg.describe(&task), rec.p_ion, rec.runtime_s);
                    }
                    ckpt.records.insert(task, rec);
                    executed += 1;
                }
                Err((attempts, e)) => {
                    failure.get_or_insert((task, attempts, e));
                }
            }
        }
        if let Some(p) = &control.checkpoint {
            ckpt.save(p)?;
        }
        if let Some((task, attempts, e)) = failure {
            if let Some(p) = &control.checkpoint {
                write_partial_manifest(p, cfg, &ckpt, &task, &e)?;
            }
            return Err(Error::TaskFailed {
                task: cfg.describe(&task),
                attempts,
                msg: e.to_string(),
                numerical: e.is_numerical(),
            });
        }
    }
    Ok(SweepOutcome { records: ckpt.records, executed, complete: budget == pending.len() })
}

fn write_partial_manifest(ckpt_path: &Path, cfg: &SweepConfig, ckpt: &Checkpoint, failed: &Task, err: &Error) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "status failed");
    let _ = writeln!(s, "fingerprint {}", ckpt.fingerprint);
    let _ = writeln!(s, "failed {} : {err}", cfg.describe(failed));
    let _ = writeln!(s, "completed {} of {}", ckpt.records.len(), cfg.tasks().len());
    for t in ckpt.records.keys() {
        let _ = writeln!(s, "done {}", cfg.describe(t));
    }
    let mut path = ckpt_path.as_os_str().to_owned();
    path.push(".partial");
    fs::write(PathBuf::from(path), s)?;
    Ok(())
}

/// One curve without checkpointing; unlike sweeps the grid may start at 0 V/cm.
pub fn compute_curve(cfg: &SweepConfig, method: Method, m0: i32) -> Result<IonizationCurve> {
    let cfg = SweepConfig {
        m0_set: vec![m0],
        methods: match method {
            Method::Quantum => MethodSet::Quantum,
            Method::Classical => MethodSet::Classical,
        },
        convergence: None,
        ..cfg.clone()
    };
    cfg.validate_with(0.0)?;
    let outcome = run_tasks(&cfg, &SweepControl::default())?;
    let mut curves = outcome.curves(&cfg)?;
    Ok(curves.remove(&(method, m0)).expect("requested curve"))
}

/// Curves of a full reproduction run.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureBundle {
    pub per_m0: BTreeMap<(Method, i32), IonizationCurve>,
    pub per_m0_droop: BTreeMap<(Method, i32), IonizationCurve>,
    pub averaged: BTreeMap<Method, IonizationCurve>,
    pub averaged_droop: BTreeMap<Method, IonizationCurve>,
    pub convergence: Option<(IonizationCurve, IonizationCurve)>,
    /// Relative paths of written files, in writing order.
    pub files: Vec<PathBuf>,
    pub outcome: SweepOutcome,
}

/// Run the sweep and write the curve bundle under `out_dir`:
/// `curves/m{m0}_{method}.csv`, `curves/m{m0}_{method}_droop.csv`,
/// `curves/averaged_{method}.csv`, `curves/averaged_{method}_droop.csv`,
/// `curves/convergence_m{m0}_n{n_max}.csv` and `plots.gp`.
///
/// Averages need every computed |m₀|; droop curves need a grid reaching
/// down to the lowest local field. Outputs whose inputs are missing are
/// left out.
pub fn reproduce_figure(cfg: &SweepConfig, out_dir: &Path, control: &SweepControl) -> Result<FigureBundle> {
    let outcome = run_sweep(cfg, control)?;
    if !outcome.complete {
        return Err(Error::Checkpoint {
            path: control.checkpoint.clone().unwrap_or_default(),
            msg: format!("sweep stopped early after {} tasks", outcome.executed),
        });
    }
    let per_m0 = outcome.curves(cfg)?;
    let per_m0_droop: BTreeMap<_, _> = per_m0
        .iter()
        .filter_map(|(k, c)| ensemble::droop_correct(c, &cfg.droop).ok().map(|d| (*k, d)))
        .collect();

    let mut averaged = BTreeMap::new();
    let mut averaged_droop = BTreeMap::new();
    let has_all = COMPUTED_M0.iter().all(|m| cfg.m0_set.iter().any(|k| k.abs() == *m)) && cfg.m0_set.len() == COMPUTED_M0.len();
    if has_all {
        for method in cfg.methods.methods() {
            let curves: BTreeMap<i32, IonizationCurve> =
                per_m0.iter().filter(|((m, _), _)| *m == method).map(|((_, m0), c)| (*m0, c.clone())).collect();
            let avg = ensemble::m_average(&curves)?;
            if let Ok(d) = ensemble::droop_correct(&avg, &cfg.droop) {
                averaged_droop.insert(method, d);
            }
            averaged.insert(method, avg);
        }
    }
    let convergence = outcome.convergence_curves(cfg)?;

    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir)?;
    let mut files = Vec::new();
    let mut emit = |name: String, curve: &IonizationCurve| -> Result<()> {
        let rel = PathBuf::from("curves").join(name);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf)?;
        fs::write(out_dir.join(&rel), buf)?;
        files.push(rel);
        Ok(())
    };
    for ((method, m0), c) in &per_m0 {
        emit(format!("m{m0}_{method}.csv"), c)?;
    }
    for ((method, m0), c) in &per_m0_droop {
        emit(format!("m{m0}_{method}_droop.csv"), c)?;
    }
    for (method, c) in &averaged {
        emit(format!("averaged_{method}.csv"), c)?;
    }
    for (method, c) in &averaged_droop {
        emit(format!("averaged_{method}_droop.csv"), c)?;
    }
    if let (Some((base, ext)), Some(c)) = (&convergence, &cfg.convergence) {
        emit(format!("convergence_m{}_n{}.csv", c.m0, cfg.basis_n_max), base)?;
        emit(format!("convergence_m{}_n{}.csv", c.m0, c.n_max), ext)?;
    }
    let script = plot_script(&files);
    fs::write(out_dir.join("plots.gp"), script)?;
    files.push(PathBuf::from("plots.gp"));

    Ok(FigureBundle { per_m0, per_m0_droop, averaged, averaged_droop, convergence, files, outcome })
}

/// gnuplot script drawing every curve file, grouped by figure.
fn plot_script(files: &[PathBuf]) -> String {
    let names: Vec<String> = files.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 'field (V/cm)'");
    let _ = writeln!(s, "set ylabel 'ionization probability'");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let groups: [(&str, &dyn Fn(&str) -> bool); 3] = [
        ("per_m0.png", &|n: &str| n.contains("/m") && n.ends_with("_droop.csv")),
        ("averaged.png", &|n: &str| n.contains("/averaged_")),
        ("convergence.png", &|n: &str| n.contains("/convergence_")),
    ];
    for (png, pick) in groups {
        let chosen: Vec<&String> = names.iter().filter(|n| pick(n)).collect();
        if chosen.is_empty() {
            continue;
        }
        let _ = writeln!(s, "set output '{png}'");
        let parts: Vec<String> = chosen
            .iter()
            .map(|n| {
                let title = n.trim_start_matches("curves/").trim_end_matches(".csv");
                format!("'{n}' using 1:2 with lines title '{title}'")
            })
            .collect();
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    }
    s
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} m0={} #{}", self.kind.tag(), self.m0, self.field_index)
    }
}
