use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nhsense_core::ResponseReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nhsense"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("NHSENSE_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const CHAIN: &str = r#"
[chain]
parity = "odd"
n_cells = 5
t1 = 0.5
t2 = 0.3
gamma1 = 0.7
gamma2 = 0.4
kappa = 0.05
m = 2

[drive]
theta = "pi/4"
phi_meas = "pi/8"
tau = 100
n_th = 0.3

[perturbation]
kind = "nhse"
phi = "pi/3"
epsilon = 1e-3
"#;

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn verify_default_config_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["failed"], 0);
    assert!(summary["passed"].as_u64().unwrap() > 100);
    assert_eq!(summary["suites"].as_array().unwrap().len(), 7);
}

#[test]
fn onsite_scaling_saturates_at_bound() {
    let cfg = configs().join("fig5.toml");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig5.csv");
    let out = run(&["scaling", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let (header, rows) = csv_rows(&text);
    assert_eq!(
        header[..11],
        [
            "N",
            "m",
            "signal_numeric",
            "signal_analytic",
            "noise_numeric",
            "noise_analytic",
            "n_tot_numeric",
            "n_tot_analytic",
            "snr",
            "snr_per_photon",
            "log10_signal"
        ]
    );
    assert_eq!(rows.len(), 40);
    let snr = header.iter().position(|h| h == "snr").unwrap();
    for row in rows.iter().filter(|r| r[0].parse::<usize>().unwrap() >= 35) {
        let v: f64 = row[snr].parse().unwrap();
        assert!((v - 800.0).abs() <= 1e-3 * 800.0, "N = {}: {v}", row[0]);
    }
    // numeric and analytic columns agree
    for row in &rows {
        let (a, b): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "N = {}", row[0]);
    }
}

fn small_grid(dir: &Path) -> String {
    let text = std::fs::read_to_string(configs().join("fig3a.toml"))
        .unwrap()
        .replace("max = 2.0, steps = 41", "max = 1.5, steps = 7")
        .replace("max = 2.5, steps = 51", "max = 2.4, steps = 9");
    write_config(dir, "grid.toml", &text)
}

#[test]
fn phase_diagram_labels_follow_inequalities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    let out = run(&["phase-diagram", "--config", &cfg, "--out", "-"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header[..6], ["t1", "t2", "regime", "onsite_winner", "nhse_enhanced", "stable"]);
    assert_eq!(rows.len(), 63);
    let (g1, g2) = (1.6f64, 2.0f64);
    for row in &rows {
        let (t1, t2): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        // regime I above the line t2 = γ2 − γ1 − t1, regime II below it
        let a = (g2 + t2).abs() > (g1 - t1).abs();
        let b = (g2 - t2).abs() > (g1 + t1).abs();
        let family = match (a, b) {
            (true, true) => "I",
            (false, false) => "III",
            _ => "II",
        };
        assert!(row[2].starts_with(family) && (family != "I" || row[2] == "I"), "{row:?}");
        let stable = t1.abs() < g1 && t2.abs() < g2;
        assert_eq!(row[5], stable.to_string(), "{row:?}");
        if !stable {
            assert!(row[3].is_empty() && row[4].is_empty(), "{row:?}");
        }
        if stable && row[2] == "I" {
            assert_eq!(row[3], "even", "{row:?}");
        }
    }
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    let one = run(&["phase-diagram", "--config", &cfg, "--out", "-", "--threads", "1"]);
    let four = run(&["phase-diagram", "--config", &cfg, "--out", "-", "--threads", "4"]);
    let env =
        bin().args(["phase-diagram", "--config", &cfg, "--out", "-"]).env("NHSENSE_THREADS", "3").output().unwrap();
    assert!(one.status.success() && four.status.success() && env.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, env.stdout);
}

#[test]
fn response_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "resp.toml", CHAIN);
    let out = run(&["response", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let report: ResponseReport = serde_json::from_str(&text).unwrap();
    assert!(report.signal > 0.0 && report.noise > 0.8);
    // identical config, identical bytes
    let again = run(&["response", "--config", &cfg]);
    assert_eq!(text, stdout(&again));
    let reparsed: ResponseReport = serde_json::from_str(&stdout(&again)).unwrap();
    assert_eq!(report, reparsed);
    assert!(text.contains("\"snr\": "));
    let snr_line = text.lines().find(|l| l.contains("\"snr\"")).unwrap();
    let mantissa = snr_line.split(':').nth(1).unwrap().trim().trim_end_matches(',').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{snr_line}");
}

#[test]
fn response_csv_and_analytic_source() {
    let dir = tempfile::tempdir().unwrap();
    let numeric = write_config(dir.path(), "n.toml", &format!("{CHAIN}\n[response]\norder = \"linear\"\n"));
    let analytic = write_config(
        dir.path(),
        "a.toml",
        &format!("{CHAIN}\n[response]\norder = \"linear\"\nsource = \"analytic\"\n"),
    );
    let a = run(&["response", "--config", &numeric, "--format", "csv"]);
    let b = run(&["response", "--config", &analytic, "--format", "csv"]);
    let (ha, ra) = csv_rows(&stdout(&a));
    let (_, rb) = csv_rows(&stdout(&b));
    assert_eq!(ha[0], "signal");
    let (x, y): (f64, f64) = (ra[0][0].parse().unwrap(), rb[0][0].parse().unwrap());
    assert!((x - y).abs() <= 1e-8 * x, "{x} {y}");
}

#[test]
fn stability_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", CHAIN);
    let out = run(&["stability", "--config", &cfg]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["stable"], true);
    assert!(v["max_real_eigenvalue"].as_f64().unwrap() < 0.0);

    let unstable = write_config(dir.path(), "u.toml", &CHAIN.replace("t1 = 0.5", "t1 = 0.9"));
    let out = run(&["stability", "--config", &unstable]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["stable"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let missing = run(&["response"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_record(&missing)["error"], "config");

    let typo = write_config(dir.path(), "typo.toml", &CHAIN.replace("kappa", "kapa"));
    let out = run(&["response", "--config", &typo]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["exit_code"], 2);
    assert!(rec["message"].as_str().unwrap().contains("kapa"));

    let angle = write_config(dir.path(), "angle.toml", &CHAIN.replace("\"pi/4\"", "\"quarter\""));
    assert_eq!(run(&["response", "--config", &angle]).status.code(), Some(2));

    let unstable = write_config(dir.path(), "u.toml", &CHAIN.replace("t1 = 0.5", "t1 = 0.9"));
    let out = run(&["response", "--config", &unstable]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"], "unstable");

    let scan = write_config(
        dir.path(),
        "scan.toml",
        &format!("{}\n[scaling]\nn_min = 1\nn_max = 3\n", CHAIN.replace("t1 = 0.5", "t1 = 0.9")),
    );
    assert_eq!(run(&["scaling", "--config", &scan]).status.code(), Some(3));

    // the on-site all-order closed form needs the fixed protocol
    let protocol = write_config(
        dir.path(),
        "p.toml",
        &format!(
            "{}\n[response]\nsource = \"analytic\"\n",
            CHAIN.replace("kind = \"nhse\"\nphi = \"pi/3\"", "kind = \"onsite\"")
        ),
    );
    assert_eq!(run(&["response", "--config", &protocol]).status.code(), Some(2));

    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn alpha_flag_moves_drive_cell() {
    let cfg = configs().join("fig6.toml");
    let out = run(&["scaling", "--config", cfg.to_str().unwrap(), "--out", "-", "--alpha", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&stdout(&out));
    for row in rows {
        let (n, m): (usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert_eq!(m, n / 2);
    }
    let bad = run(&["scaling", "--config", cfg.to_str().unwrap(), "--out", "-", "--alpha", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reference_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for (name, cmd) in [("fig4", "scaling"), ("fig6", "scaling"), ("fig3b", "phase-diagram")] {
        let cfg = configs().join(format!("{name}.toml"));
        let path = dir.path().join(format!("{name}.csv"));
        let out = run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(std::fs::metadata(&path).unwrap().len() > 100);
    }
}
