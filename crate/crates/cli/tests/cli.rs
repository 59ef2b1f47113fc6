use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TOY: &str = r#"
n0 = 10
basis_lo = 6
basis_hi = 20
n_cut = 16
frequency_ghz = 6580.0
cycles = 5.0
steps_per_cycle = 200
trajectories = 8
field_lo = 60000
field_hi = 64000
field_step = 2000
m0_set = [0, 3, 6]

[envelope]
t_on = 1.0
w_on = 0.25
t_off = 4.0
w_off = 0.25
"#;

fn mwion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwion")).args(args).output().expect("run mwion")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy_config(dir: &Path) -> PathBuf {
    let p = dir.join("toy.toml");
    fs::write(&p, TOY).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_n0_is_a_usage_error() {
    let o = mwion(&["quantum-curve", "--field-lo", "300", "--field-hi", "301"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--n0"), "{err}");
    assert!(err.contains("Usage: quantum-curve"), "{err}");
}

#[test]
fn zero_trajectories_is_rejected() {
    let o = mwion(&["classical-curve", "--n0", "37", "--field-lo", "300", "--field-hi", "301", "--trajectories", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("trajectories"));
}

#[test]
fn bad_arguments_exit_2() {
    for args in [
        &["quantum-curve", "--n0", "37", "--field-lo", "300", "--field-hi", "290"][..],
        &["quantum-curve", "--n0", "37", "--m0", "37", "--field-lo", "300", "--field-hi", "300"][..],
        &["quantum-curve", "--n0", "37", "--field-lo", "300", "--field-hi", "300", "--integrator", "euler"][..],
        &["quantum-curve", "--n0", "37", "--field-lo", "300", "--field-hi", "300", "--bogus"][..],
    ] {
        let o = mwion(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "n0 = 37\nfeild_lo = 300\n").unwrap();
    let o = mwion(&["quantum-curve", "--config", s(&cfg), "--field-lo", "0", "--field-hi", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("feild_lo"), "{}", stderr(&o));
}

#[test]
fn zero_field_gives_a_single_zero_row() {
    for cmd in ["quantum-curve", "classical-curve"] {
        let o = mwion(&[cmd, "--n0", "37", "--field-lo", "0", "--field-hi", "0", "--trajectories", "3"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), "field_V_per_cm,p_ion\n0,0\n");
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let o = mwion(&["quantum-curve", "--config", s(&cfg), "--integrator", "rk4", "--frequency-ghz", "658", "--field-lo", "60000", "--field-hi", "60000"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("norm drift"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let from_file = mwion(&["quantum-curve", "--config", s(&cfg)]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(stdout(&from_file).lines().count(), 1 + 4001);

    let narrowed = mwion(&["quantum-curve", "--config", s(&cfg), "--field-hi", "62000"]);
    let text = stdout(&narrowed);
    assert_eq!(text.lines().count(), 1 + 2001);
    assert_eq!(text.lines().nth(1), stdout(&from_file).lines().nth(1));
}

#[test]
fn fixed_seed_reproduces_bytes_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let dump = dir.path().join("traj");
    for (out, extra) in [(&a, None), (&b, Some(&dump))] {
        let mut args = vec!["classical-curve", "--config", s(&cfg), "--seed", "7", "--out", s(out)];
        if let Some(d) = extra {
            args.extend(["--dump-dir", s(d)]);
        }
        let o = mwion(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let traj = fs::read_to_string(dump.join("trajectories_m0_E62000.csv")).unwrap();
    assert!(traj.starts_with("trajectory_id,final_energy,final_n_cl,ionized\n"));
    assert_eq!(traj.lines().count(), 1 + 8);

    let manifest = fs::read_to_string(dir.path().join("a.csv.manifest")).unwrap();
    assert!(manifest.starts_with("mwion-manifest v1\n"));
    assert!(manifest.contains("config seed=7"));
    assert!(manifest.contains("config methods=Classical"));
    let line = manifest.lines().find(|l| l.starts_with("output ")).unwrap();
    let bytes = fs::read(&a).unwrap();
    let digest: String = {
        use sha2::{Digest, Sha256};
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    };
    assert!(line.ends_with(&format!("sha256={digest}")), "{line}");
}

fn write_synthetic_curves(dir: &Path, method: &str) {
    for (k, m0) in [0, 5, 10, 15, 20, 25, 30, 35].into_iter().enumerate() {
        let mut text = String::from("field_V_per_cm,p_ion\n");
        for e in 250..=450 {
            let x = (f64::from(e) - 330.0 - 6.0 * k as f64) / 8.0;
            text.push_str(&format!("{e},{}\n", 1.0 / (1.0 + (-x).exp())));
        }
        fs::write(dir.join(format!("m{m0}_{method}.csv")), text).unwrap();
    }
}

#[test]
fn average_then_droop_equals_average_with_droop() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_curves(dir.path(), "classical");
    let plain = dir.path().join("avg.csv");
    let o = mwion(&["average", "--in-dir", s(dir.path()), "--method", "classical", "--out", s(&plain)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let two_pass = mwion(&["droop", "--in", s(&plain)]);
    assert!(two_pass.status.success(), "{}", stderr(&two_pass));
    let one_pass = mwion(&["average", "--in-dir", s(dir.path()), "--method", "classical", "--droop", "on"]);
    assert!(one_pass.status.success());

    let parse = |t: String| -> Vec<(f64, f64)> {
        t.lines()
            .skip(1)
            .map(|l| {
                let (a, b) = l.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect()
    };
    let (x, y) = (parse(stdout(&two_pass)), parse(stdout(&one_pass)));
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty());
    for ((ea, pa), (eb, pb)) in x.iter().zip(&y) {
        assert_eq!(ea, eb);
        assert!((pa - pb).abs() <= 1e-12);
    }
}

#[test]
fn average_reports_missing_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_curves(dir.path(), "quantum");
    fs::remove_file(dir.path().join("m25_quantum.csv")).unwrap();
    let o = mwion(&["average", "--in-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m25_quantum.csv"), "{}", stderr(&o));

    write_synthetic_curves(dir.path(), "quantum");
    let bad = dir.path().join("m10_quantum.csv");
    let text = fs::read_to_string(&bad).unwrap().replacen("253,", "253,oops", 1);
    fs::write(&bad, text).unwrap();
    let o = mwion(&["average", "--in-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("m10_quantum.csv") && err.contains("row 5"), "{err}");
}

#[test]
fn dry_run_counts_tasks() {
    let o = mwion(&["reproduce", "--preset", "n37-desk", "--dry-run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("tasks 938\n"), "{out}");
    assert!(out.contains("classical 456") && out.contains("conv-ext 13"));

    let o = mwion(&["reproduce", "--dry-run", "--method", "both", "--field-lo", "340", "--field-hi", "350"]);
    assert!(stdout(&o).starts_with("tasks 176\n"), "{}", stdout(&o));
}

#[test]
fn reproduce_toy_writes_bundle_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = dir.path().join("out");
    let o = mwion(&["reproduce", "--config", s(&cfg), "--method", "both", "--out-dir", s(&out), "--stop-after", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("stopped after 3"));
    assert!(!out.join("manifest.txt").exists());

    let o = mwion(&["reproduce", "--config", s(&cfg), "--method", "both", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("output curves/m0_quantum.csv sha256="));
    assert!(manifest.contains("output plots.gp sha256="));
    assert_eq!(manifest.lines().filter(|l| l.starts_with("task ")).count(), 2 * 3 * 3);
}

#[test]
fn matelem_dumps_csv_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwion(&["matelem", "--m", "-2", "--basis-lo", "3", "--basis-hi", "6", "--cache-dir", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("n,n_prime,z\n3,3,"));
    assert_eq!(text.lines().count(), 1 + 16);
    assert!(dir.path().join("dipole_m-2_n3-6_uphill.txt").exists());

    let again = mwion(&["matelem", "--m", "-2", "--basis-lo", "3", "--basis-hi", "6", "--cache-dir", s(dir.path())]);
    assert_eq!(stdout(&again), text);
}
