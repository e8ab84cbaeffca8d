use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn dechist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dechist"))
        .args(args)
        .output()
        .expect("run dechist")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_str(&stdout(o)).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn tempdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dechist-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn params_scenario_a() {
    let v = json(&dechist(&["params", "--n", "4", "--t", "1.0471976"]));
    assert!((v["theta"].as_f64().unwrap() - 0.4478316).abs() < 1e-6);
    assert_eq!(v["x"].as_f64().unwrap(), 0.5);
}

#[test]
fn params_zero_time_is_identity() {
    let v = json(&dechist(&["params", "--n", "4", "--xt", "0"]));
    assert_eq!(v["f"]["re"].as_f64().unwrap(), 1.0);
    assert_eq!(v["f"]["im"].as_f64().unwrap(), 0.0);
    assert_eq!(v["b"]["re"].as_f64().unwrap(), 0.0);
    assert_eq!(v["b"]["im"].as_f64().unwrap(), 0.0);
}

#[test]
fn invalid_parameters_exit_2() {
    assert_eq!(
        dechist(&["params", "--n", "1", "--t", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(dechist(&["params", "--n", "1"]).status.code(), Some(2));
    assert_eq!(
        dechist(&["params", "--n", "4", "--t", "1", "--xt", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dechist(&["params", "--n", "4", "--t", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        dechist(&["params", "--n", "4", "--t", "1", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(dechist(&["bogus"]).status.code(), Some(2));
}

#[test]
fn branches_scenario_a() {
    let o = dechist(&["branches", "--n", "4", "--t", "1.0471976", "--k", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with(
        "history_bits,n_streaks,exact_re,exact_im,closed_re,closed_im,mag_diff,phase_diff\n"
    ));
    let (h, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    let order: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(order, ["00", "10", "01", "11"]);
    let r = &rows[2];
    assert!(r[col(&h, "mag_diff")].parse::<f64>().unwrap() <= 1e-12);
    assert!((r[col(&h, "phase_diff")].parse::<f64>().unwrap() - 0.2810349).abs() < 1e-6);
}

#[test]
fn branches_zero_time_two_nonzero() {
    let o = dechist(&["branches", "--n", "4", "--t", "0", "--k", "3"]);
    let (h, rows) = csv_rows(&stdout(&o));
    let nonzero = rows
        .iter()
        .filter(|r| {
            let re: f64 = r[col(&h, "exact_re")].parse().unwrap();
            let im: f64 = r[col(&h, "exact_im")].parse().unwrap();
            re.hypot(im) > 0.0
        })
        .count();
    assert_eq!(nonzero, 2);
}

#[test]
fn branches_too_long_exit_2() {
    assert_eq!(
        dechist(&["branches", "--n", "4", "--t", "1", "--k", "15"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gram_summaries() {
    let v = json(&dechist(&[
        "gram",
        "--n",
        "4",
        "--t",
        "1.0471976",
        "--k",
        "4",
    ]));
    assert!((v["summary"]["sum"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert!(v["summary"]["max_offdiag"].as_f64().unwrap() >= 0.05);
    assert!(v.get("matrix").is_none());

    let v = json(&dechist(&["gram", "--n", "4", "--t", "0", "--k", "4"]));
    assert!(v["summary"]["max_offdiag"].as_f64().unwrap() <= 1e-15);
}

#[test]
fn gram_full_dump() {
    let v = json(&dechist(&[
        "gram", "--n", "4", "--t", "1", "--k", "3", "--full",
    ]));
    assert_eq!(v["matrix"]["re"].as_array().unwrap().len(), 8);
    let o = dechist(&[
        "gram", "--n", "4", "--t", "1", "--k", "2", "--full", "--format", "csv",
    ]);
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(h, ["row", "col", "re", "im"]);
    assert_eq!(rows.len(), 16);
}

#[test]
fn gram_limits_exit_2() {
    assert_eq!(
        dechist(&["gram", "--n", "4", "--t", "1", "--k", "20", "--full"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dechist(&["gram", "--n", "4", "--t", "1", "--k", "13", "--full"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dechist(&["gram", "--n", "4", "--t", "1", "--k", "15"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn grover_scenario_b() {
    let v = json(&dechist(&[
        "grover", "--n", "10000", "--t", "10", "--format", "json",
    ]));
    assert_eq!(v["k_star"].as_u64().unwrap(), 17);
    assert!(v["pr_closed_at_k_star"].as_f64().unwrap() >= 0.95);
    assert_eq!(v["rows"].as_array().unwrap().len(), 34);
}

#[test]
fn delta_sweep_scenario_b() {
    let o = dechist(&[
        "delta-sweep",
        "--n",
        "10000",
        "--t",
        "10",
        "--k",
        "1,10,100",
        "--delta",
        "0,0.25,0.5,0.75,1",
    ]);
    assert!(o.status.success());
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        h,
        ["N", "t", "K", "delta", "pr_direct", "pr_closed", "rel_diff"]
    );
    assert_eq!(rows.len(), 15);
    let get = |r: &Vec<String>, name: &str| r[col(&h, name)].parse::<f64>().unwrap();
    for r in &rows {
        assert!(get(r, "rel_diff") <= 0.1);
        assert!((0.0..=1.0).contains(&get(r, "pr_direct")));
    }
    for chunk in rows.chunks(5) {
        let prs: Vec<f64> = chunk.iter().map(|r| get(r, "pr_direct")).collect();
        assert!(prs.windows(2).all(|w| w[1] >= w[0]) || prs.windows(2).all(|w| w[1] <= w[0]));
    }
    let k1: Vec<&str> = rows[..5]
        .iter()
        .map(|r| r[col(&h, "pr_direct")].as_str())
        .collect();
    assert!(k1.iter().all(|p| *p == k1[0]));
}

#[test]
fn delta_sweep_outside_closed_domain() {
    let dir = tempdir("domain");
    let out = dir.join("sweep.csv");
    let o = dechist(&[
        "delta-sweep",
        "--n",
        "4",
        "--t",
        "3.1415926",
        "--k",
        "2",
        "--delta",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",,"));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(manifest(&out)).unwrap()).unwrap();
    assert_eq!(m["warnings"].as_array().unwrap().len(), 1);
}

fn manifest(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", out.display()))
}

#[test]
fn manifest_written_next_to_data() {
    let dir = tempdir("manifest");
    let out = dir.join("params.json");
    let o = dechist(&[
        "params",
        "--n",
        "4",
        "--t",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(manifest(&out)).unwrap()).unwrap();
    for key in ["version", "config", "derived", "timings", "checks"] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(m["data_file"], "params.json");
    assert_eq!(m["derived"]["n"], 4);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempdir("config");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# four items\nn=4\nt=5\nformat=json\n").unwrap();
    let v = json(&dechist(&[
        "params",
        "--config",
        cfg.to_str().unwrap(),
        "--t",
        "1.0471976",
    ]));
    assert!((v["theta"].as_f64().unwrap() - 0.4478316).abs() < 1e-6);
    std::fs::write(&cfg, "n=4\nwidth=3\n").unwrap();
    assert_eq!(
        dechist(&["params", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn scaling_fits_and_unreachable_threshold() {
    let ns = "400,1600,6400,25600,102400";
    let o = dechist(&[
        "scaling",
        "--n",
        ns,
        "--t",
        "1",
        "--delta",
        "1",
        "--threshold",
        "0.5",
    ]);
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(h, ["N", "k_star", "exponent", "intercept", "residual"]);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5][0], "fit");
    assert!((rows[5][2].parse::<f64>().unwrap() - 0.5).abs() <= 0.05);

    let o = dechist(&[
        "scaling",
        "--n",
        ns,
        "--t",
        "1",
        "--delta",
        "0",
        "--threshold",
        "0.25",
    ]);
    let (_, rows) = csv_rows(&stdout(&o));
    assert!((rows[5][2].parse::<f64>().unwrap() - 1.0).abs() <= 0.05);

    let o = dechist(&[
        "scaling",
        "--n",
        ns,
        "--t",
        "1",
        "--delta",
        "0",
        "--threshold",
        "0.9",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("never reached"));

    let o = dechist(&["scaling", "--n", "400,1600,6400", "--delta", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_default_run() {
    let v = json(&dechist(&["verify"]));
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 12);
    for c in checks {
        assert!(c["passed"].as_bool().unwrap(), "{c}");
        for key in ["name", "measured", "tolerance"] {
            assert!(c.get(key).is_some());
        }
    }
}

#[test]
fn verify_forced_failure_exit_3() {
    let o = dechist(&["verify", "--quick", "--inject-tolerance", "0"]);
    assert_eq!(o.status.code(), Some(3));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn verify_quick_is_fast() {
    let start = Instant::now();
    let v = json(&dechist(&["verify", "--quick"]));
    assert!(start.elapsed() < Duration::from_secs(10));
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(!names.iter().any(|n| n.starts_with("scaling")));
}

#[test]
fn output_is_byte_deterministic() {
    let args = ["grover", "--n", "400", "--t", "1", "--format", "json"];
    assert_eq!(dechist(&args).stdout, dechist(&args).stdout);
    let sweep = |jobs| {
        dechist(&[
            "delta-sweep",
            "--n",
            "1600",
            "--xt",
            "0.1",
            "--k",
            "1..40",
            "--jobs",
            jobs,
        ])
        .stdout
    };
    assert_eq!(sweep("1"), sweep("8"));
}
