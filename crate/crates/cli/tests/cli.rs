use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const COARSE: &str = "[grid]\nstep = 0.024\n";

fn adder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adder"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run adder")
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn reconstruct_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), COARSE);
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = adder(&[
            "reconstruct", "--config", cfg, "--protocol", "4", "--n", "2000", "--seed", "7", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = csv_files(&a);
    assert!(files.len() >= 8);
    for f in files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?} differs");
    }
    let manifest = fs::read_to_string(a.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("increment_curves = \"increment_curves.csv\""));
}

#[test]
fn simulate_writes_curves_and_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), COARSE);
    let out = tmp.path().join("sim");
    let o = adder(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["u.csv", "u_x.csv", "l_b.csv", "g_b.csv", "n_b.csv", "manifest.toml", "config.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let m: String = fs::read_to_string(out.join("manifest.toml")).unwrap();
    let lambda: f64 = m
        .lines()
        .find_map(|l| l.strip_prefix("lambda = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((lambda - 1.0).abs() < 0.02, "lambda {lambda}");
    let header = fs::read_to_string(out.join("u.csv")).unwrap();
    assert!(header.starts_with("a\\x,"));
}

#[test]
fn exit_codes_follow_the_error_family() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let bad = config(tmp.path(), "[model]\ngamma = -1.0\n");
    let o = adder(&["simulate", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = adder(&["simulate", "--config", "/nonexistent.toml", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let sizes = tmp.path().join("sizes.csv");
    fs::write(&sizes, "size\n1.0\n-1\n").unwrap();
    let o = adder(&[
        "experimental", "--sizes", sizes.to_str().unwrap(), "--tau", "0.0275", "--h3", "0.2", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    let cfg = config(tmp.path(), "[grid]\nstep = 0.024\n[solver]\nmax_steps = 5\n");
    let o = adder(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sample_then_experimental_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[grid]\nstep = 0.024\n[run]\nn_dividing = 1679\n");
    let data = tmp.path().join("data");
    let o = adder(&[
        "sample", "--config", cfg.to_str().unwrap(), "--n", "5000", "--seed", "3", "--out",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sizes = data.join("sizes.csv");
    let dividing = data.join("dividing.csv");
    let before = fs::read(&sizes).unwrap();
    let exp = tmp.path().join("exp");
    let o = adder(&[
        "experimental",
        "--sizes",
        sizes.to_str().unwrap(),
        "--dividing",
        dividing.to_str().unwrap(),
        "--tau",
        "1.0",
        "--h3",
        "0.25",
        "--out",
        exp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&sizes).unwrap(), before);
    let overlay = fs::read_to_string(exp.join("b_overlay.csv")).unwrap();
    assert!(overlay.starts_with("a,b,b_direct\n"));
    let m = fs::read_to_string(exp.join("manifest.toml")).unwrap();
    assert!(m.contains("n_dividing = 1679"));
    assert!(m.contains("h1 = 0.125"));
}

#[test]
fn mc_then_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "[grid]\nstep = 0.024\n[run]\nn_grid = [200, 800, 3200]\nm = 3\n");
    let out = tmp.path().join("mc");
    let o = adder(&["mc", "--config", cfg.to_str().unwrap(), "--h3", "0.25", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("study_n_star.csv").exists());
    assert!(out.join("band_b_n800.csv").exists());
    let o = adder(&["slopes", "--study", out.to_str().unwrap(), "--out", tmp.path().join("s").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(tmp.path().join("s/slopes.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("n_star,")));
}
