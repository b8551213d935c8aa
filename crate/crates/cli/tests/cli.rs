use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tpsim(args: &[&str], out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tpsim"));
    cmd.args(args).arg("--out").arg(out);
    for var in ["CONFIG", "OUT", "WORKERS", "IRF", "DIFFUSION", "GRID", "RANGE", "NO_PLOTS"] {
        cmd.env_remove(format!("TPSIM_{var}"));
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn small_map_writes_table_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = tpsim(&["tps", "--grid", "3"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("tps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert_eq!(csv.lines().next().unwrap(), "nu1_ghz,nu2_ghz,value");
    assert!(out.join("tps.json").exists());
    assert!(out.join("tps.gp").exists());
    assert!(out.join("tps.meta.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(tpsim(&["tps", "--grid", "7", "--workers", "1"], &a).status.success());
    assert!(tpsim(&["tps", "--grid", "7", "--workers", "3"], &b).status.success());
    for f in ["tps.csv", "tps.json", "tps.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn no_plots_flag_suppresses_scripts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(tpsim(&["csmap", "--grid", "5", "--no-plots"], &out).status.success());
    assert!(out.join("csmap.csv").exists());
    assert!(!out.join("csmap.gp").exists());
}

#[test]
fn csmap_plot_uses_diverging_log_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(tpsim(&["csmap", "--grid", "5"], &out).status.success());
    let gp = fs::read_to_string(out.join("csmap.gp")).unwrap();
    assert!(gp.contains("logscale cb"));
    assert!(gp.contains("palette"));
}

#[test]
fn dressed_prints_mixing_angles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[emitter]\nrabi_ghz = 1.6\ndetuning_ghz = 1.0\n");
    let o = tpsim(&["dressed", "--config", &cfg], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("c = 0.874642481"), "{text}");
    assert!(text.contains("s = 0.484768532"), "{text}");
    assert!(text.contains("omega_prime_ghz = 1.88679623"), "{text}");
}

#[test]
fn validate_agrees_with_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tpsim(&["validate"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("validate.csv")).unwrap();
    assert!(csv.lines().count() >= 6);
    for line in csv.lines().skip(1) {
        let rel: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel < 0.05, "{line}");
    }
}

#[test]
fn spectrum_peaks_at_mollow_sidebands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[emitter]\nrabi_ghz = 1.3\n[grid]\nn_points = 201\nrange_ghz = 3.0\nbandwidth_ghz = 0.05\n");
    let o = tpsim(&["spectrum", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    assert!((peak - 1.0).abs() < 1e-12);
    let side = rows.iter().filter(|r| r.0 > 0.8).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((side.0 - 1.3).abs() < 0.1, "sideband at {}", side.0);
}

#[test]
fn g2tau_sweep_writes_offset_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[emitter]\nrabi_ghz = 1.6\n\n[[filters]]\ncenter_ghz = 1.6\n\n[[filters]]\ncenter_ghz = -1.6\n\n\
         [tau]\nmin_ns = -2.0\nmax_ns = 2.0\nn_points = 41\ndetunings_ghz = [0.0, 1.0]\n",
    );
    let o = tpsim(&["g2tau", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("g2tau_1.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tau_ns,g2");
    assert_eq!(csv.lines().count(), 42);
    let gp = fs::read_to_string(tmp.path().join("g2tau.gp")).unwrap();
    assert!(gp.contains("offset by"), "{gp}");
}

#[test]
fn environment_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_tpsim"))
        .arg("tps")
        .env("TPSIM_OUT", &out)
        .env("TPSIM_GRID", "3")
        .env("TPSIM_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("tps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    let meta = fs::read_to_string(out.join("tps.meta.json")).unwrap();
    assert!(meta.contains("\"workers\": 2"), "{meta}");
}

#[test]
fn unknown_key_exits_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[emitter]\nrabi_ghz = 2.2\nrabbi = 1\n");
    let o = tpsim(&["dressed", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("rabbi"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tpsim(&["tps", "--range", "-1"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let cfg = write_config(tmp.path(), "[emitter]\nrabi_ghz = -1.0\n");
    assert_eq!(tpsim(&["dressed", "--config", &cfg], tmp.path()).status.code(), Some(2));
}

#[test]
fn g2tau_without_tau_section_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tpsim(&["g2tau"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau"));
}

#[test]
fn nonconvergent_sensor_limit_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[emitter]\nrabi_ghz = 2.2\n[sensor]\nepsilon_sequence = [1e-3, 9.99e-4]\ntolerance = 1e-12\n",
    );
    let o = tpsim(&["tps", "--grid", "3", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sensor_back_action_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[emitter]\nrabi_ghz = 2.2\n[sensor]\nepsilon_sequence = [3.0, 2.0]\n");
    let o = tpsim(&["tps", "--grid", "3", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = tpsim(&["tps", "--grid", "3"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
