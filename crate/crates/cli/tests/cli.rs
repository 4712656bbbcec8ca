use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_squeezelab");

fn write_config(dir: &TempDir, name: &str, v: &Value) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    path
}

fn squeezelab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SQUEEZELAB_THREADS").output().unwrap()
}

fn run_config(v: &Value) -> Output {
    let dir = TempDir::new().unwrap();
    let p = write_config(&dir, "c.json", v);
    squeezelab(&["run", p.to_str().unwrap()])
}

fn validate_config(v: &Value) -> Output {
    let dir = TempDir::new().unwrap();
    let p = write_config(&dir, "c.json", v);
    squeezelab(&["validate", p.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows as columns; empty fields become `None`.
fn table(text: &str) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| match f {
                    "" => None,
                    "true" => Some(1.0),
                    "false" => Some(0.0),
                    x => Some(x.parse().unwrap()),
                })
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn homodyne_sweep() -> Value {
    json!({
        "topology": "single_arm",
        "preparation": {"alpha": 1.0, "sq1": {"r": 0.5}},
        "detection": "homodyne",
        "detectionParams": {"alphaR": 1e4},
        "sweep": {"parameter": "preparation.alpha", "from": 1.0, "to": 10.0, "steps": 10}
    })
}

fn caves(alpha: f64, r2: f64, steps: u64) -> Value {
    json!({
        "topology": "two_arm",
        "preparation": {"alpha": alpha, "sq2": {"r": r2}},
        "detection": "bound_only",
        "sweep": {"parameter": "preparation.sq2.r", "from": r2, "to": r2, "steps": steps},
        "oracle": {"enabled": true}
    })
}

#[test]
fn homodyne_sweep_approaches_squeezed_limit() {
    let out = run_config(&homodyne_sweep());
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 10);
    let (x, v) = (column(&h, "sweep_value"), column(&h, "realized_var"));
    for row in &rows {
        let alpha = row[x].unwrap();
        let expected = (-1.0f64).exp() / (4.0 * alpha * alpha);
        let got = row[v].unwrap();
        assert!(((got - expected) / expected).abs() < 1e-3, "alpha {alpha}: {got} vs {expected}");
    }
}

#[test]
fn caves_bound_decreases_with_dark_port_squeezing() {
    let mut c = caves(2.0, 0.0, 11);
    c["sweep"]["to"] = json!(1.0);
    c["oracle"]["enabled"] = json!(false);
    let out = run_config(&c);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 11);
    let v = column(&h, "qcrb_var_minus");
    for w in rows.windows(2) {
        assert!(w[1][v].unwrap() < w[0][v].unwrap());
    }
}

#[test]
fn single_step_gives_single_row() {
    let mut c = homodyne_sweep();
    c["sweep"]["steps"] = json!(1);
    let out = run_config(&c);
    assert!(out.status.success());
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&h, "sweep_value")], Some(1.0));
}

#[test]
fn output_header_and_metadata() {
    let out = run_config(&homodyne_sweep());
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("# squeezelab "));
    assert!(lines[1].starts_with("# config sha256 "));
    assert_eq!(
        lines[2],
        "sweep_value,qcrb_var_minus,qcrb_var_plus,realized_var,snl,sqz,hl,oracle_gap,well_posed"
    );
    assert!(lines[3].starts_with("1.0000000000000000e0,"));
}

#[test]
fn output_is_deterministic_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut c = homodyne_sweep();
    c["preparation"]["alpha"] = json!(1.5);
    c["sweep"] = json!({"parameter": "preparation.sq1.r", "from": 0.05, "to": 0.6, "steps": 12});
    c["oracle"] = json!({"enabled": true});
    let p = write_config(&dir, "c.json", &c);
    let a = squeezelab(&["run", p.to_str().unwrap()]);
    let b = squeezelab(&["run", p.to_str().unwrap()]);
    let single = Command::new(BIN)
        .args(["run", p.to_str().unwrap()])
        .env("SQUEEZELAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, single.stdout);
}

#[test]
fn output_file_matches_stdout() {
    let dir = TempDir::new().unwrap();
    let p = write_config(&dir, "c.json", &homodyne_sweep());
    let out_path = dir.path().join("out.csv");
    let to_file = squeezelab(&["run", p.to_str().unwrap(), "-o", out_path.to_str().unwrap()]);
    assert!(to_file.status.success());
    assert!(to_file.stdout.is_empty());
    let to_stdout = squeezelab(&["run", p.to_str().unwrap()]);
    assert_eq!(std::fs::read(&out_path).unwrap(), to_stdout.stdout);
}

#[test]
fn every_detection_runs() {
    let configs = [
        homodyne_sweep(),
        json!({
            "topology": "single_arm",
            "preparation": {"alpha": 2.0, "sq1": {"r": 0.5}},
            "detection": "su11_readout",
            "detectionParams": {"R": 3.0},
            "sweep": {"parameter": "detectionParams.R", "from": 1.0, "to": 4.0, "steps": 4}
        }),
        json!({
            "topology": "two_arm",
            "preparation": {"alpha": 3.0, "sq1": {"r": 0.4}, "sq2": {"r": 0.6}},
            "detection": "double_homodyne",
            "sweep": {"parameter": "preparation.alpha", "from": 1.0, "to": 10.0, "steps": 4, "scale": "log"}
        }),
        json!({
            "topology": "two_arm",
            "preparation": {"alpha": 2.0, "sq2": {"r": 0.5}},
            "detection": "double_direct",
            "sweep": {"parameter": "preparation.sq2.r", "from": 0.1, "to": 0.5, "steps": 3}
        }),
        json!({
            "topology": "two_arm",
            "preparation": {"alpha": 2.0, "su11_prep": {"r": 0.5}},
            "detection": "double_direct",
            "detectionParams": {"phiOffset": 0.6},
            "sweep": {"parameter": "preparation.alpha", "from": 1.0, "to": 2.0, "steps": 2}
        }),
        json!({
            "topology": "two_arm",
            "preparation": {"alpha": 2.0, "su11_prep": {"r": 0.5, "theta": 0.3}},
            "detection": "su11_two_arm_readout",
            "detectionParams": {"R": 2.0, "phiOffset": 0.2},
            "sweep": {"parameter": "detectionParams.R", "from": 1.0, "to": 3.0, "steps": 3}
        }),
        json!({
            "topology": "single_arm",
            "preparation": {"alpha": 2.0, "sq1": {"r_db": 6.0}},
            "detection": "bound_only",
            "sweep": {"parameter": "preparation.sq1.r_db", "from": 0.0, "to": 15.0, "steps": 4}
        }),
    ];
    for c in &configs {
        let out = run_config(c);
        assert!(out.status.success(), "{c}: {}", stderr(&out));
        let (h, rows) = table(&stdout(&out));
        assert_eq!(h.len(), 9);
        let wanted = c["sweep"]["steps"].as_u64().unwrap() as usize;
        assert_eq!(rows.len(), wanted, "{c}");
        let (q, v) = (column(&h, "qcrb_var_minus"), column(&h, "realized_var"));
        for row in &rows {
            assert!(row[q].unwrap() > 0.0);
            if c["detection"] == "bound_only" {
                assert!(row[v].is_none());
            } else {
                assert!(row[v].unwrap() > 0.0, "{c}");
            }
        }
    }
}

#[test]
fn realized_error_never_beats_the_bound() {
    let out = run_config(&homodyne_sweep());
    let (h, rows) = table(&stdout(&out));
    let (q, v) = (column(&h, "qcrb_var_minus"), column(&h, "realized_var"));
    for row in &rows {
        assert!(row[v].unwrap() >= row[q].unwrap() - 1e-9);
    }
}

#[test]
fn invalid_config_lists_every_violation() {
    let c = json!({
        "topology": "single_arm",
        "preparation": {"alpha": -1.0, "zeta": 0.3},
        "detection": "double_homodyne",
        "sweep": {"parameter": "preparation.alpha", "from": 2.0, "to": 1.0, "steps": 0}
    });
    let out = run_config(&c);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for path in ["preparation.alpha", "preparation.zeta", "detection", "sweep.steps"] {
        assert!(err.contains(path), "missing {path} in {err}");
    }
}

#[test]
fn schema_errors_name_the_path() {
    let mut c = homodyne_sweep();
    c["preparation"]["sq1"]["squeeze"] = json!(1.0);
    let out = run_config(&c);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("preparation.sq1"), "{}", stderr(&out));

    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, b"{not json").unwrap();
    assert_eq!(squeezelab(&["run", p.to_str().unwrap()]).status.code(), Some(2));
    let missing = squeezelab(&["run", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn validate_caves_agrees_with_oracle() {
    let out = validate_config(&caves(2.0, 0.5, 1));
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    for name in ["mean_gap", "cov_gap", "qfi_gap"] {
        let g = rows[0][column(&h, name)].unwrap();
        assert!(g < 1e-6, "{name} = {g}");
    }
}

#[test]
fn validate_vacuum_has_no_gap() {
    let c = json!({
        "topology": "two_arm",
        "preparation": {"alpha": 0.0},
        "detection": "bound_only",
        "sweep": {"parameter": "preparation.alpha", "from": 0.0, "to": 0.0, "steps": 1},
        "oracle": {"enabled": true}
    });
    let out = validate_config(&c);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    for name in ["mean_gap", "cov_gap", "qfi_gap", "norm_deficit"] {
        assert!(rows[0][column(&h, name)].unwrap() < 1e-14, "{name}");
    }
}

#[test]
fn validate_rejects_scenarios_outside_the_envelope() {
    let out = validate_config(&caves(5.0, 0.5, 1));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("envelope") && err.contains("preparation.alpha"), "{err}");

    let mut swept = caves(2.0, 0.5, 3);
    swept["sweep"]["to"] = json!(0.9);
    let out = validate_config(&swept);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("preparation.sq2"));
}

#[test]
fn validate_requires_the_oracle() {
    let mut c = caves(2.0, 0.5, 1);
    c["oracle"]["enabled"] = json!(false);
    assert_eq!(validate_config(&c).status.code(), Some(2));
}

#[test]
fn validate_fails_on_a_starved_cutoff() {
    let mut c = caves(2.0, 0.5, 1);
    c["oracle"]["cutoff"] = json!(4);
    let out = validate_config(&c);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn validate_su11_preparation() {
    let c = json!({
        "topology": "two_arm",
        "preparation": {"alpha": 1.5, "zeta": 0.4, "su11_prep": {"r": 0.4, "theta": 0.7}},
        "detection": "double_direct",
        "sweep": {"parameter": "preparation.su11_prep.theta", "from": 0.0, "to": 1.5, "steps": 3},
        "oracle": {"enabled": true}
    });
    let out = validate_config(&c);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert!(row[column(&h, "qfi_gap")].unwrap() < 1e-6);
    }
}

#[test]
fn run_with_oracle_fills_gap_column() {
    let mut c = caves(2.0, 0.0, 3);
    c["sweep"]["to"] = json!(0.5);
    let out = run_config(&c);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    for row in &rows {
        assert!(row[column(&h, "oracle_gap")].unwrap() < 1e-6);
    }
    let mut far = caves(5.0, 0.5, 1);
    far["oracle"]["enabled"] = json!(true);
    assert_eq!(run_config(&far).status.code(), Some(2));
}

#[test]
fn limits_prints_reference_errors() {
    let out = squeezelab(&["limits", "--n", "100", "--r", "0.5"]);
    assert!(out.status.success());
    let (h, rows) = table(&stdout(&out));
    assert_eq!(h, ["snl", "sqz", "hl"]);
    let snl = rows[0][0].unwrap();
    assert!((snl - 0.05).abs() < 1e-15);
    assert!((rows[0][1].unwrap() - (-0.5f64).exp() * 0.05).abs() < 1e-15);
    assert!((rows[0][2].unwrap() - 0.01).abs() < 1e-15);

    assert_eq!(squeezelab(&["limits", "--n", "0"]).status.code(), Some(2));
    assert_eq!(squeezelab(&["limits", "--n", "-3", "--r", "0.1"]).status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let p = write_config(&dir, "c.json", &homodyne_sweep());
    for bad in ["0", "many", "-2"] {
        let out = Command::new(BIN)
            .args(["run", p.to_str().unwrap()])
            .env("SQUEEZELAB_THREADS", bad)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(squeezelab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(squeezelab(&["run"]).status.code(), Some(2));
    assert!(Path::new(BIN).exists());
}
