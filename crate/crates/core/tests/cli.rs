use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracbec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracbec"))
        .args(args)
        .current_dir(dir)
        .env_remove("FRACBEC_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn non_power_of_two_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[grid]\nn_points = 1000\n");
    let o = fracbec(&["-c", &cfg, "eig"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.n_points"), "{}", stderr(&o));
}

#[test]
fn exponent_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.toml", "[potentials.v1]\nzeros = [{ location = 0.0, exponent = 3.5 }]\n");
    let o = fracbec(&["-c", &cfg, "eig"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("integrable"), "{}", stderr(&o));
}

#[test]
fn missing_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracbec(&["-c", "nowhere.toml", "eig"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resolution_guard_refuses_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "guard.toml",
        "[sweep.grid]\nkind = \"fixed\"\nlength = 8.0\nn_points = 1024\n",
    );
    let o = fracbec(&["-q", "-c", &cfg, "-o", "out", "sweep"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("under-resolved") && err.contains("n_points >= 131072"), "{err}");
}

#[test]
fn ground_state_is_deterministic_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let a = fracbec(&["-q", "-o", "a", "ground-state"], dir.path());
    let b = fracbec(&["-q", "-o", "b", "ground-state"], dir.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let csv_a = fs::read(dir.path().join("a/ground_state.csv")).unwrap();
    let csv_b = fs::read(dir.path().join("b/ground_state.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for entry in fs::read_dir(dir.path().join("a")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(text.contains(&hash));
    }
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash: {hash}"));
    assert_eq!(lines.next().unwrap(), "x,q");
    assert_eq!(lines.count(), 8192);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fracbec"))
        .args(["-q", "eig"])
        .current_dir(dir.path())
        .env("FRACBEC_OUTPUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from-env/eig.json").exists());
    assert!(dir.path().join("from-env/eig.csv").exists());
}

#[test]
fn minimize_writes_state_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        "[grid]\nlength = 16.0\nn_points = 1024\n\n[params]\na1 = 1.0\na2 = 0.5\nbeta = 0.3\n\n[output]\ndirectory = \"m\"\nformats = [\"json\"]\n",
    );
    let o = fracbec(&["-q", "-c", &cfg, "minimize"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m/minimize.json")).unwrap()).unwrap();
    assert_eq!(doc["converged"], true);
    assert!(!dir.path().join("m/minimize.csv").exists());
    assert!(dir.path().join("m/energy_trace.dat").exists());
}

#[test]
fn sweep_writes_records_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "[sweep]\nbeta = 1.2\n\n[sweep.ladder]\npoints = 4\n");
    let o = fracbec(&["-q", "-c", &cfg, "-o", "s", "sweep"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert!(header.starts_with(
        "eps,energy,l4_1,l4_2,mu_1,mu_2,max_1,max_2,ratio_1,ratio_2,dist_l2_1,dist_l2_2,trial_upper"
    ));
    assert_eq!(csv.lines().count(), 2 + 4);
    let fits: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/fits.json")).unwrap()).unwrap();
    assert!(fits["energy"]["slope"].is_number());
    for name in ["energy_vs_gap.dat", "l4_1_vs_gap.dat", "rescaled_profile.dat", "predicted_profile.dat"] {
        assert!(dir.path().join("s").join(name).exists(), "{name}");
    }
}

#[test]
fn verify_passes_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracbec(&["-q", "-o", "v", "verify"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}\n{}", stderr(&o));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 15, "{stdout}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
}
