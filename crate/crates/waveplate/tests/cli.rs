//! End-to-end checks of the command-line interface: exit codes, output
//! formats and byte-level determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_waveplate"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_RECT: &str = "\
mesh = rect\n\
mesh.n = 4\n\
x0.x = 0.0\n\
x0.y = 0.5\n\
mu = 0.3\n\
dt = 0.01\n\
T = 1\n\
stride = 10\n\
seed = 11\n\
smooth = 1\n";

#[test]
fn missing_config_exits_2_naming_path() {
    let out = bin()
        .args(["simulate", "--config", "/nonexistent/path.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/path.cfg"), "{stderr}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_set_key_exits_2() {
    let out = bin()
        .args(["mesh-gen", "--set", "bogus=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "mesh-gen",
        "check-geometry",
        "simulate",
        "eigs",
        "resolvent-sweep",
        "witness",
        "decay-fit",
    ] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--config"), "{sub} help misses --config");
    }
}

#[test]
fn check_geometry_rectangle_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_RECT);
    let out = bin()
        .args(["check-geometry", "--no-surrogate"])
        .arg("--config")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("77.753311") || stdout.contains("\"pass\": false"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("geometry.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(false));
    assert_eq!(report["delta"].as_f64().unwrap(), 0.5);
}

#[test]
fn simulate_strict_refuses_noncompliant_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_RECT);
    let out = bin()
        .args(["simulate", "--strict"])
        .arg("--config")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_outputs_are_deterministic_and_well_formed() {
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let cfg1 = write_config(dir1.path(), TINY_RECT);
    let cfg2 = write_config(dir2.path(), TINY_RECT);
    for (cfg, dir) in [(&cfg1, &dir1), (&cfg2, &dir2)] {
        let out = bin()
            .arg("simulate")
            .arg("--config")
            .arg(cfg)
            .arg("--output-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir1.path().join("energy.csv")).unwrap();
    let b = std::fs::read(dir2.path().join("energy.csv")).unwrap();
    assert_eq!(a, b, "identical config + seed must give identical CSV");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,E,D_eta,D_xi,D_zeta,mean_u,mean_w,mean_wx1,mean_wx2"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0.0000000000000000e0,"), "{first}");

    // A different seed changes the trace.
    let dir3 = tempfile::tempdir().unwrap();
    let cfg3 = write_config(dir3.path(), &TINY_RECT.replace("seed = 11", "seed = 12"));
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg3)
        .arg("--output-dir")
        .arg(dir3.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let c = std::fs::read(dir3.path().join("energy.csv")).unwrap();
    assert_ne!(text.as_bytes(), c.as_slice());
}

#[test]
fn mesh_gen_roundtrips_through_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_RECT);
    let out = bin()
        .arg("mesh-gen")
        .arg("--config")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let mesh = waveplate::mesh::load_mesh(dir.path().join("mesh.txt")).unwrap();
    assert_eq!(mesh.vertices.len(), 9 * 5);
    assert_eq!(mesh.triangles.len(), 64);
}

#[test]
fn decay_fit_reads_trace_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    // Synthetic exact 1/t trace.
    let mut csv = String::from("t,E,D_eta,D_xi,D_zeta,mean_u,mean_w,mean_wx1,mean_wx2\n");
    for i in 1..=200 {
        let t = i as f64 * 0.5;
        csv.push_str(&format!("{t:.16e},{:.16e},0,0,0,0,0,0,0\n", 1.0 / t));
    }
    let trace = dir.path().join("energy.csv");
    std::fs::write(&trace, csv).unwrap();
    let out = bin()
        .args(["decay-fit", "--da-norm", "2.0"])
        .arg("--trace")
        .arg(&trace)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("decay.json")).unwrap())
            .unwrap();
    let slope = report["loglog_slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 1e-9, "slope {slope}");
    assert!((report["sup_te"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn spectral_commands_emit_csvs_on_a_small_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let body = TINY_RECT.to_string() + "eigs.count = 6\nsweep.points = 5\n";
    let cfg = write_config(dir.path(), &body);
    for sub in ["eigs", "witness", "resolvent-sweep"] {
        let out = bin()
            .arg(sub)
            .arg("--config")
            .arg(&cfg)
            .arg("--output-dir")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let eigs = std::fs::read_to_string(dir.path().join("eigs.csv")).unwrap();
    assert!(eigs.starts_with("n,mu,residual\n"));
    assert_eq!(eigs.lines().count(), 7);
    let wit = std::fs::read_to_string(dir.path().join("witness.csv")).unwrap();
    assert!(wit.starts_with("mu,U_norm,F_norm,residual\n"));
    let sweep = std::fs::read_to_string(dir.path().join("resolvent.csv")).unwrap();
    assert!(sweep.starts_with("beta,resnorm\n"));
    assert_eq!(sweep.lines().count(), 6);
}
