//! End-to-end tests of the `randlat` binary: exit codes, output formats,
//! and determinism of the user-facing surface.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn randlat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randlat"))
        .args(args)
        .output()
        .expect("running the randlat binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("randlat-cli-test-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("creating scratch dir");
    dir.join(name)
}

#[test]
fn sample_is_deterministic_and_well_formed() {
    let args = ["sample", "--d", "2", "--seed", "9", "--count", "3"];
    let a = randlat(&args);
    let b = randlat(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b), "same seed must reproduce the dump");

    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).expect("JSON line");
        assert_eq!(v["d"], 2);
        assert_eq!(v["seed"], 9);
        assert_eq!(v["stream"], i as u64);
        let basis = v["basis"].as_array().expect("basis array");
        assert_eq!(basis.len(), 2);
        assert_eq!(basis[0].as_array().unwrap().len(), 2);
        assert!(v["shortest_norm"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn sample_affine_includes_reduced_offset() {
    let out = randlat(&["sample", "--d", "2", "--seed", "4", "--count", "2", "--affine"]);
    assert!(out.status.success());
    for line in stdout(&out).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let offset = v["offset"].as_array().expect("affine dump has offset");
        assert_eq!(offset.len(), 2);
        // The offset is reduced modulo the lattice: its coefficients in
        // the dumped basis must lie in [0, 1). Invert the 2×2 basis by
        // hand (columns b0, b1; determinant 1 for a unimodular lattice).
        let col = |j: usize, i: usize| v["basis"][j][i].as_f64().unwrap();
        let (x, y) = (offset[0].as_f64().unwrap(), offset[1].as_f64().unwrap());
        let det = col(0, 0) * col(1, 1) - col(1, 0) * col(0, 1);
        let t0 = (x * col(1, 1) - y * col(1, 0)) / det;
        let t1 = (y * col(0, 0) - x * col(0, 1)) / det;
        for t in [t0, t1] {
            assert!(
                (-1e-9..1.0 + 1e-9).contains(&t),
                "basis coefficient {} of offset not reduced",
                t
            );
        }
    }
}

#[test]
fn count_square_lattice_examples() {
    let basis = scratch("z2.txt");
    fs::write(&basis, "1 0\n0 1\n").unwrap();
    let basis = basis.to_str().unwrap();

    // Z² ∩ Ball(0, 1.2): the origin and the four unit vectors; the
    // diagonals stay outside (√2 > 1.2).
    let out = randlat(&[
        "count",
        "--basis",
        basis,
        "--region",
        r#"{"type":"ball","center":[0,0],"radius":1.2}"#,
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["count"], 5);

    // Same query with the points listed.
    let out = randlat(&[
        "count",
        "--basis",
        basis,
        "--region",
        r#"{"type":"ball","center":[0,0],"radius":1.2}"#,
        "--list-points",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 5);

    // Shifting by (1/2, 1/2) leaves the four nearest corners inside a
    // ball of radius 0.8 (distance √2/2 ≈ 0.707 each).
    let out = randlat(&[
        "count",
        "--basis",
        basis,
        "--offset",
        "[0.5,0.5]",
        "--region",
        r#"{"type":"ball","center":[0,0],"radius":0.8}"#,
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["count"], 4);
}

#[test]
fn count_rejects_non_unimodular_basis() {
    let basis = scratch("det2.txt");
    fs::write(&basis, "2 0\n0 1\n").unwrap();
    let out = randlat(&[
        "count",
        "--basis",
        basis.to_str().unwrap(),
        "--region",
        r#"{"type":"ball","center":[0,0],"radius":1.0}"#,
    ]);
    assert_eq!(out.status.code(), Some(2), "non-unimodular basis is a usage error");
}

#[test]
fn verify_mean_phase_writes_versioned_csv() {
    let csv = scratch("mean.csv");
    let out = randlat(&[
        "verify",
        "--phases",
        "mean",
        "--d2-trials",
        "2000",
        "--seed",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("[PASS]"));
    assert!(text.contains("9 checks"));

    let written = fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("# randlat-csv v1\n"));
    assert!(written.lines().nth(1).unwrap().starts_with("experiment_id,"));
    // Header comment + schema + nine data rows.
    assert_eq!(written.trim_end().lines().count(), 11);
}

#[test]
fn sweep_writes_csv_and_svg_plot() {
    let csv = scratch("sweep.csv");
    let svg = scratch("sweep.svg");
    let out = randlat(&[
        "sweep",
        "--volumes",
        "1,2",
        "--trials",
        "2000",
        "--seed",
        "4",
        "--out",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let written = fs::read_to_string(&csv).unwrap();
    assert!(written.starts_with("# randlat-csv v1\n"));
    assert_eq!(written.trim_end().lines().count(), 4, "schema plus one row per volume");

    let plot = fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg"));
    assert!(plot.contains("polyline"));
}

#[test]
fn spectra_accepts_radial_override() {
    let out = randlat(&[
        "spectra",
        "--d",
        "2",
        "--trials",
        "2000",
        "--seed",
        "5",
        "--radial",
        "[[0.3,2.0]]",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("spectrum"));
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        // exact2 is two-dimensional only.
        &["sample", "--d", "3", "--sampler", "exact2"],
        // Unknown sampler name.
        &["sample", "--sampler", "sobol"],
        // Unknown verify phase.
        &["verify", "--phases", "nosuch"],
        // Malformed radial JSON.
        &["spectra", "--radial", "not-json"],
        // Hecke prime that is not prime.
        &["sample", "--sampler", "hecke", "--hecke-prime", "10"],
        // Unknown subcommand (handled by the argument parser).
        &["frobnicate"],
    ];
    for args in cases {
        let out = randlat(args);
        assert_eq!(out.status.code(), Some(2), "expected usage error for {:?}", args);
    }
}
