//! On-disk cache of dipole matrices.
//!
//! Text format, one `key value` header line each, then `---` and one matrix
//! row per line. `sha256` covers the body exactly as written, so a truncated
//! or edited file is detected and rebuilt.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{build_dipole_matrix_with, extremal_state_with, Extremum, ParabolicState, RadialGrid, StarkBasis};
use crate::error::{Error, Result};

/// Bumped whenever phase conventions or quadrature change the stored numbers.
pub const CACHE_CONVENTION: &str = "cs-radial-positive-tail/v1";
const MAGIC: &str = "mwion-dipole-cache";

/// File name for a basis in a cache directory.
pub fn cache_file_name(m: i32, n_min: u32, n_max: u32, extremum: Extremum) -> String {
    format!("dipole_m{m}_n{n_min}-{n_max}_{}.txt", extremum.tag())
}

fn body_of(basis: &StarkBasis) -> String {
    let d = basis.dim();
    let mut body = String::with_capacity(d * d * 24);
    for i in 0..d {
        for j in 0..d {
            if j > 0 {
                body.push(' ');
            }
            // Display for f64 prints the shortest string that round-trips.
            let _ = write!(body, "{}", basis.z(i, j));
        }
        body.push('\n');
    }
    body
}

fn digest(body: &str) -> String {
    Sha256::digest(body.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Write `basis` to `path`, replacing any previous file atomically.
pub fn write_cache(path: &Path, basis: &StarkBasis) -> Result<()> {
    let body = body_of(basis);
    let mut text = String::new();
    let _ = writeln!(text, "{MAGIC}");
    let _ = writeln!(text, "convention {CACHE_CONVENTION}");
    let _ = writeln!(text, "m {}", basis.m);
    let _ = writeln!(text, "n_min {}", basis.n_min);
    let _ = writeln!(text, "n_max {}", basis.n_max);
    let _ = writeln!(text, "extremum {}", basis.extremum.tag());
    let _ = writeln!(text, "grid_nodes {}", RadialGrid::for_max_n(basis.n_max).len());
    let _ = writeln!(text, "sha256 {}", digest(&body));
    text.push_str("---\n");
    text.push_str(&body);

    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a cache file; every header field and the checksum must match.
pub fn read_cache(path: &Path, m: i32, n_min: u32, n_max: u32, extremum: Extremum) -> Result<StarkBasis> {
    let bad = |msg: String| Error::Cache { path: path.to_path_buf(), msg };
    let text = fs::read_to_string(path)?;
    let (head, body) = text.split_once("---\n").ok_or_else(|| bad("missing header separator".into()))?;
    let mut lines = head.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("not a dipole cache file".into()));
    }
    let expected = [
        ("convention", CACHE_CONVENTION.to_string()),
        ("m", m.to_string()),
        ("n_min", n_min.to_string()),
        ("n_max", n_max.to_string()),
        ("extremum", extremum.tag().to_string()),
        ("grid_nodes", RadialGrid::for_max_n(n_max).len().to_string()),
    ];
    let mut checksum = None;
    let mut seen = 0;
    for line in lines {
        let (key, value) = line.split_once(' ').ok_or_else(|| bad(format!("bad header line '{line}'")))?;
        if key == "sha256" {
            checksum = Some(value.to_string());
            continue;
        }
        match expected.iter().find(|(k, _)| *k == key) {
            Some((_, v)) if v == value => seen += 1,
            Some((_, v)) => return Err(bad(format!("{key} is {value}, expected {v}"))),
            None => return Err(bad(format!("unknown header key '{key}'"))),
        }
    }
    if seen != expected.len() {
        return Err(bad("incomplete header".into()));
    }
    if checksum.as_deref() != Some(digest(body).as_str()) {
        return Err(bad("checksum mismatch".into()));
    }

    let d = (n_max - n_min + 1) as usize;
    let mut dipole = Vec::with_capacity(d * d);
    for (row, line) in body.lines().enumerate() {
        let before = dipole.len();
        for tok in line.split(' ') {
            dipole.push(tok.parse::<f64>().map_err(|e| bad(format!("row {row}: {e}")))?);
        }
        if dipole.len() - before != d {
            return Err(bad(format!("row {row} has {} entries, expected {d}", dipole.len() - before)));
        }
    }
    if dipole.len() != d * d {
        return Err(bad(format!("{} entries, expected {}", dipole.len(), d * d)));
    }
    let states: Vec<ParabolicState> = (n_min..=n_max).map(|n| extremal_state_with(n, m, extremum)).collect::<Result<_>>()?;
    let energies = states.iter().map(ParabolicState::energy).collect();
    Ok(StarkBasis { m, n_min, n_max, extremum, states, energies, dipole })
}

/// Cached basis from `dir`, building and storing it when absent or stale.
pub fn load_or_build(dir: &Path, m: i32, n_min: u32, n_max: u32, extremum: Extremum) -> Result<StarkBasis> {
    let n_min = n_min.max(m.unsigned_abs() + 1);
    let path: PathBuf = dir.join(cache_file_name(m, n_min, n_max, extremum));
    if path.exists() {
        if let Ok(basis) = read_cache(&path, m, n_min, n_max, extremum) {
            return Ok(basis);
        }
    }
    let basis = build_dipole_matrix_with(m, n_min, n_max, extremum)?;
    fs::create_dir_all(dir)?;
    write_cache(&path, &basis)?;
    Ok(basis)
}

/// CSV `n,n_prime,z` over all pairs.
pub fn write_matrix_csv<W: std::io::Write>(out: W, basis: &StarkBasis) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "n_prime", "z"]).map_err(csv_err)?;
    for (i, a) in basis.states.iter().enumerate() {
        for (j, b) in basis.states.iter().enumerate() {
            w.write_record([a.n.to_string(), b.n.to_string(), basis.z(i, j).to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
