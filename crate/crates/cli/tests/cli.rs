use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pdaccel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdaccel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMOOTH: &str = "[problem]\nregime = \"smooth_h\"\ndim_x = 20\ndim_y = 10\nseed = 3\nconditioning = 16.0\n";

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "smooth.toml", SMOOTH);
    let out = dir.path().join("traces");
    let o = pdaccel(&["run", &cfg, "--algs", "ACV-I", "--max-iters", "300", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("smooth_h_seed3_ACV1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,lyapunov,envelope,kkt,wall_ns"));
    let iters: Vec<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(iters.len(), 301);
    assert!(iters.windows(2).all(|w| w[1] == w[0] + 1));
    let meta = fs::read_to_string(out.join("smooth_h_seed3_ACV1.json")).unwrap();
    for key in ["\"stepsizes\"", "\"theta\"", "\"constants\"", "\"seed\": 3", "\"artifact_choices\": true"] {
        assert!(meta.contains(key), "missing {key} in {meta}");
    }
}

#[test]
fn identical_seeds_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "smooth.toml", SMOOTH);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = pdaccel(&["run", &cfg, "--max-iters", "80", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let c = dir.path().join("c");
    let o = pdaccel(&["run", &cfg, "--max-iters", "80", "--sequential", "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    for alg in ["ACV1", "ACV2", "APDTR1", "APDTR2"] {
        let name = format!("smooth_h_seed3_{alg}.csv");
        let ta = fs::read(a.join(&name)).unwrap();
        assert_eq!(ta, fs::read(b.join(&name)).unwrap());
        assert_eq!(ta, fs::read(c.join(&name)).unwrap());
    }
    let d = dir.path().join("d");
    let o = pdaccel(&["run", &cfg, "--max-iters", "80", "--seed", "4", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(d.join("smooth_h_seed4_ACV1.csv").exists());
}

#[test]
fn verify_passes_on_default_smooth_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "smooth.toml", SMOOTH);
    let o = pdaccel(&["verify", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("APDTR2"));
    assert!(text.contains("ACV2=CV2"));
}

#[test]
fn doubled_eta_x_is_refused_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{SMOOTH}[run]\neta_x_scale = 2.0\n"));
    let out = dir.path().join("never");
    let o = pdaccel(&["verify", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("||K||^2*eta_x*eta_y + L_f*eta_x*eta_z <= 1"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn zero_mu_g_is_flagged_in_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.toml",
        "[problem]\nregime = \"two_function\"\ndim_x = 10\nmu_g = 0.0\nconditioning = 10.0\n",
    );
    let out = dir.path().join("t");
    let o = pdaccel(&["run", &cfg, "--algs", "APGD", "--max-iters", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no linear rate"));
    let meta = fs::read_to_string(out.join("two_function_seed0_APGD.json")).unwrap();
    assert!(meta.contains("\"no_linear_rate\": true"));
    assert!(meta.contains("\"step_source\": \"fallback\""));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "[problem]\nregime = \"nowhere\"\ndim_x = 3\n");
    assert_eq!(pdaccel(&["run", &bad]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "ok.toml", SMOOTH);
    assert_eq!(pdaccel(&["run", &cfg, "--algs", "APGD"]).status.code(), Some(2));
    assert_eq!(pdaccel(&["run", &cfg, "--algs", "XYZ"]).status.code(), Some(2));
    assert_eq!(pdaccel(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn rates_writes_csv_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rates.toml",
        "[problem]\nregime = \"two_function\"\ndim_x = 10\n[rates]\nconditioning = [4.0, 16.0, 64.0]\n",
    );
    let out = dir.path().join("r");
    let o = pdaccel(&["rates", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(out.join("rates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(stdout(&o).contains("predicted"));
}

#[test]
fn spectra_reads_matrix_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("k.txt");
    fs::write(&m, "2 3\n3 0 0\n0 4 0\n").unwrap();
    let o = pdaccel(&["spectra", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("2 x 3"));
    assert!(text.contains("op_norm        4.000000000000e0"), "{text}");
    assert!(text.contains("lambda_min     9.000000000000e0"), "{text}");
    fs::write(&m, "2 2\n1 2\n").unwrap();
    assert_eq!(pdaccel(&["spectra", m.to_str().unwrap()]).status.code(), Some(2));
}
