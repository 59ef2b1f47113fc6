//! Configuration files and flag/file/default precedence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use mwion_core::quantum::{EnvelopeParams, Integrator};
use mwion_core::sweep::{FieldGrid, MethodSet, SweepConfig};
use serde::Deserialize;

use crate::Failure;

/// Keys accepted in a TOML configuration file. Units as for the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n0: Option<u32>,
    pub m0: Option<i32>,
    pub field_lo: Option<f64>,
    pub field_hi: Option<f64>,
    pub field_step: Option<f64>,
    pub cycles: Option<f64>,
    pub basis_lo: Option<u32>,
    pub basis_hi: Option<u32>,
    pub steps_per_cycle: Option<usize>,
    pub frequency_ghz: Option<f64>,
    pub n_cut: Option<u32>,
    pub phase: Option<f64>,
    pub integrator: Option<String>,
    pub trajectories: Option<usize>,
    pub classical_rtol: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub method: Option<String>,
    pub m0_set: Option<Vec<i32>>,
    pub droop_drop: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub envelope: Option<EnvelopeFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeFile {
    pub t_on: f64,
    pub w_on: f64,
    pub t_off: f64,
    pub w_off: f64,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
    }
}

/// Model and grid flags shared by the computing subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// TOML file with defaults for any of these flags (flags win).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Initial principal quantum number n0.
    #[arg(long)]
    pub n0: Option<u32>,
    /// Lowest field of the grid, V/cm.
    #[arg(long, value_name = "V/cm")]
    pub field_lo: Option<f64>,
    /// Highest field of the grid, V/cm.
    #[arg(long, value_name = "V/cm")]
    pub field_hi: Option<f64>,
    /// Spacing of computed fields, whole V/cm; results are interpolated onto 1 V/cm.
    #[arg(long, value_name = "V/cm")]
    pub field_step: Option<f64>,
    /// Protocol length in field cycles [default: 500].
    #[arg(long, value_name = "CYCLES")]
    pub cycles: Option<f64>,
    /// Lowest manifold of the quantum basis [default: 30].
    #[arg(long)]
    pub basis_lo: Option<u32>,
    /// Highest manifold of the quantum basis [default: 100].
    #[arg(long)]
    pub basis_hi: Option<u32>,
    /// Time steps per field cycle [default: 1000].
    #[arg(long)]
    pub steps_per_cycle: Option<usize>,
    /// Microwave frequency, GHz [default: 9.92].
    #[arg(long, value_name = "GHz")]
    pub frequency_ghz: Option<f64>,
    /// Manifolds n ≥ n_cut count as ionized [default: 91].
    #[arg(long)]
    pub n_cut: Option<u32>,
    /// Quantum time stepper: split4 or rk4 [default: split4].
    #[arg(long)]
    pub integrator: Option<String>,
    /// Classical trajectories per field (and m0) [default: 25].
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Seed of the classical sampler [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: 1].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for cached dipole matrices.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

impl ModelArgs {
    /// Merge flags over `file` over `base`.
    pub fn apply(&self, file: &FileConfig, mut cfg: SweepConfig) -> Result<SweepConfig, Failure> {
        fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
            flag.clone().or_else(|| file.clone())
        }
        if let Some(v) = pick(&self.n0, &file.n0) {
            cfg.n0 = v;
        }
        let lo = pick(&self.field_lo, &file.field_lo).unwrap_or(cfg.grid.lo);
        let hi = pick(&self.field_hi, &file.field_hi).unwrap_or(cfg.grid.hi);
        let step = pick(&self.field_step, &file.field_step).unwrap_or(cfg.grid.step);
        cfg.grid = FieldGrid { lo, hi, step };
        if let Some(v) = pick(&self.cycles, &file.cycles) {
            cfg.total_cycles = v;
        }
        if let Some(v) = pick(&self.basis_lo, &file.basis_lo) {
            cfg.basis_n_min = v;
        }
        if let Some(v) = pick(&self.basis_hi, &file.basis_hi) {
            cfg.basis_n_max = v;
        }
        if let Some(v) = pick(&self.steps_per_cycle, &file.steps_per_cycle) {
            cfg.steps_per_cycle = v;
        }
        if let Some(v) = pick(&self.frequency_ghz, &file.frequency_ghz) {
            cfg.frequency_ghz = v;
        }
        if let Some(v) = pick(&self.n_cut, &file.n_cut) {
            cfg.n_cut = v;
        }
        if let Some(v) = pick(&self.integrator, &file.integrator) {
            cfg.integrator = v.parse::<Integrator>().map_err(Failure::from)?;
        }
        if let Some(v) = pick(&self.trajectories, &file.trajectories) {
            cfg.trajectories = v;
        }
        if let Some(v) = pick(&self.seed, &file.seed) {
            cfg.seed = v;
        }
        if let Some(v) = pick(&self.workers, &file.workers) {
            cfg.workers = v;
        }
        if let Some(v) = pick(&self.cache_dir, &file.cache_dir) {
            cfg.cache_dir = Some(v);
        }
        if let Some(v) = file.phase {
            cfg.phase = v;
        }
        if let Some(v) = file.classical_rtol {
            cfg.classical_rtol = v;
        }
        if let Some(v) = &file.m0_set {
            cfg.m0_set = v.clone();
        }
        if let Some(v) = &file.method {
            cfg.methods = v.parse::<MethodSet>().map_err(Failure::from)?;
        }
        if let Some(v) = file.droop_drop {
            cfg.droop.drop = v;
        }
        if let Some(e) = &file.envelope {
            cfg.envelope = EnvelopeParams { t_on: e.t_on, w_on: e.w_on, t_off: e.t_off, w_off: e.w_off };
        }
        Ok(cfg)
    }

    /// Curve commands need n0 and the field range from a flag or the file.
    pub fn require_curve_inputs(&self, file: &FileConfig) -> Result<(), Failure> {
        let missing: Vec<&str> = [
            ("--n0", self.n0.is_some() || file.n0.is_some()),
            ("--field-lo", self.field_lo.is_some() || file.field_lo.is_some()),
            ("--field-hi", self.field_hi.is_some() || file.field_hi.is_some()),
        ]
        .into_iter()
        .filter(|(_, present)| !present)
        .map(|(name, _)| name)
        .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Failure::usage(format!("missing required {}", missing.join(", "))))
        }
    }
}
