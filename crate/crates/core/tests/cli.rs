use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_blowuplab");

const ODE: &str = r#"
[params]
p = 2.0
domain_radius = 2.0
nx = 201
cfl = 0.5
t_end = 1.0
alpha = 3.0
boundary = "periodic"
snapshot_stride = 100

[initial_data.u0]
kind = "constant"
value = 0.0

[initial_data.u1]
kind = "constant"
value = 2.0
"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Column `name` of a CSV file, one entry per data row.
fn column(path: &Path, name: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_owned()).collect()
}

#[test]
fn simulate_then_rate_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ode.toml", ODE);
    let out = dir.path().join("run");
    let (code, stdout, stderr) = run(&["simulate", "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("BlowupDetected"), "{stdout}");
    for f in ["config.toml", "series.csv", "report.json", "trajectory.bin", "metadata.simulate.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("t,max_u,max_ut,l2_u,l2_ut\n"));

    let (code, stdout, stderr) = run(&["rate-check", "--run-dir", s(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rate_check.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    assert!((report["beta_hat"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn energy_on_a_stored_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.toml",
        &ODE.replace("nx = 201", "nx = 401")
            .replace("domain_radius = 2.0", "domain_radius = 4.0")
            .replace("\"periodic\"", "\"neumann\"")
            .replace("snapshot_stride = 100", "snapshot_stride = 10")
            .replace(
                "kind = \"constant\"\nvalue = 2.0",
                "kind = \"gaussian\"\namplitude = 2.0\nwidth = 1.0",
            ),
    );
    let out = dir.path().join("run");
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", s(&out)]).0, 0);
    let (code, stdout, stderr) = run(&["energy", "--run-dir", s(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    assert!(stdout.starts_with("E monotone: true"), "{stdout}");
    let rows = column(&out.join("energy.csv"), "E_total");
    assert_eq!(rows.len(), 251);
    let e: Vec<f64> = rows.iter().map(|v| v.parse().unwrap()).collect();
    assert!(e.first().unwrap() > e.last().unwrap());
    // the stored config is not overwritten by the analysis
    assert!(out.join("metadata.energy.json").exists());
    assert!(!out.join("config.energy.toml").exists());
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad_p = write(dir.path(), "p.toml", &ODE.replace("p = 2.0", "p = 0.5"));
    let (code, _, stderr) = run(&["simulate", "--config", &bad_p, "--out", s(&out)]);
    assert_eq!(code, 2);
    assert!(stderr.contains("0.5"), "{stderr}");

    let unknown = write(dir.path(), "u.toml", &format!("{ODE}\nbogus = 1\n"));
    assert_eq!(run(&["simulate", "--config", &unknown, "--out", s(&out)]).0, 2);
    assert_eq!(run(&["simulate", "--config", "/nonexistent.toml"]).0, 2);
    assert_eq!(run(&["simulate"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["criterion", "--config", &write(dir.path(), "n.toml", ODE)]).0, 2);
    assert!(!out.exists());
}

#[test]
fn file_profile_length_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("u1.txt"), "1 2 3\n").unwrap();
    let cfg = write(
        dir.path(),
        "f.toml",
        &ODE.replace("kind = \"constant\"\nvalue = 2.0", "kind = \"file\"\npath = \"u1.txt\""),
    );
    let (code, _, stderr) = run(&["simulate", "--config", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 2);
    assert!(stderr.contains("u1.txt"), "{stderr}");

    let values: Vec<String> = (0..201).map(|_| "2.0".to_string()).collect();
    std::fs::write(dir.path().join("u1.txt"), values.join("\n")).unwrap();
    let (code, stdout, stderr) = run(&["simulate", "--config", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("BlowupDetected"), "{stdout}");
}

#[test]
fn criterion_exit_codes_follow_the_prediction() {
    let dir = tempfile::tempdir().unwrap();
    // w0 = T'·u1 = 2 > 3/2: VIOLATED, and the run blows up at t = 1/2 < T'.
    let cfg = write(dir.path(), "c.toml", ODE);
    let out = dir.path().join("c");
    let (code, stdout, _) = run(&["criterion", "--config", &cfg, "--out", s(&out), "--frame-a", "0", "--frame-T", "1"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("VIOLATED") && stdout.contains("prediction PASS"), "{stdout}");

    // Same data with the forcing switched off never blows up.
    let linear = write(dir.path(), "l.toml", &ODE.replace("[params]", "[params]\nnonlinear = false"));
    let (code, stdout, _) = run(&["criterion", "--config", &linear, "--out", s(&out), "--frame-a", "0", "--frame-T", "1"]);
    assert_eq!(code, 3, "{stdout}");
    assert!(stdout.contains("prediction FAIL"), "{stdout}");

    // w0 = 0.4·2 < 3/2
    let (code, stdout, _) = run(&["criterion", "--config", &cfg, "--out", s(&out), "--frame-a", "0", "--frame-T", "0.4"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("SATISFIED") && stdout.contains("prediction NONE"), "{stdout}");
}

#[test]
fn one_point_sweep_reproduces_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ode.toml", ODE);
    let sweep = write(
        dir.path(),
        "sweep.toml",
        &format!("{ODE}\n[sweep]\n[[sweep.axes]]\npath = \"initial_data.u1.value\"\nvalues = [2.0]\n"),
    );
    let (a, b) = (dir.path().join("sim"), dir.path().join("sweep"));
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", s(&a)]).0, 0);
    let (code, stdout, stderr) = run(&["sweep", "--config", &sweep, "--out", s(&b)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    assert_eq!(
        std::fs::read(a.join("series.csv")).unwrap(),
        std::fs::read(b.join("run_0000/series.csv")).unwrap()
    );
    assert_eq!(column(&b.join("sweep.csv"), "run"), ["0"]);
}

#[test]
fn constant_velocity_sweep_flips_at_three_halves() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "sweep.toml",
        &format!(
            "{}\n[frame]\na = 0.0\nT_prime = 1.0\n\n[sweep]\nmax_parallel = 2\n[[sweep.axes]]\npath = \"initial_data.u1.value\"\nvalues = [1.0, 1.45, 1.55, 2.0]\n",
            ODE.replace("t_end = 1.0", "t_end = 1.2")
        ),
    );
    let out = dir.path().join("o");
    let (code, stdout, stderr) = run(&["sweep", "--config", &sweep, "--out", s(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let csv = out.join("sweep.csv");
    assert_eq!(
        column(&csv, "criterion_verdict"),
        ["SATISFIED", "SATISFIED", "VIOLATED", "VIOLATED"]
    );
    assert_eq!(column(&csv, "linkage")[2..], ["PASS", "PASS"]);
}

#[test]
fn exponent_sweep_recovers_beta() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(
        dir.path(),
        "sweep.toml",
        &format!(
            "{}\n[sweep]\n[[sweep.axes]]\npath = \"params.p\"\nvalues = [1.5, 2.0]\n",
            ODE.replace("t_end = 1.0", "t_end = 2.0").replace("alpha = 3.0", "alpha = 4.0")
        ),
    );
    let out = dir.path().join("o");
    let (code, stdout, stderr) = run(&["sweep", "--config", &sweep, "--out", s(&out)]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let beta: Vec<f64> = column(&out.join("sweep.csv"), "beta_hat")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((beta[0] - 2.0).abs() < 1e-2, "{beta:?}");
    assert!((beta[1] - 1.0).abs() < 1e-2, "{beta:?}");
}
