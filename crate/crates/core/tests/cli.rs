use std::path::Path;
use std::process::{Command, Output};

fn l2dens(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l2dens"))
        .args(args)
        .current_dir(dir)
        .env_remove("L2DENS_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_sample(path: &Path, rows: usize, d: usize) {
    let mut s = String::new();
    for i in 0..rows {
        let cells: Vec<String> = (0..d)
            .map(|j| format!("{}", ((i * 7 + j * 3) as f64 * 0.618_033_988_75).fract() - 0.5))
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn grid_prints_seven_members() {
    let dir = tempfile::tempdir().unwrap();
    let o = l2dens(&["grid", "--m", "100", "--d", "1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 8, "{text}");
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[1].parse::<f64>().unwrap(), (-1f64).exp());
}

#[test]
fn estimate_reads_csv_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    write_sample(&csv, 200, 2);
    let o = l2dens(&["estimate", "--input", "x.csv", "--isotropic"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["m"], 100);
    assert_eq!(v["d"], 2);
    let est = v["estimate"].as_f64().unwrap();
    assert!(est > 0.0);

    let obs = l2dens::io::read_observations(&csv, false, false).unwrap();
    std::fs::write(dir.path().join("x.bin"), l2dens::io::encode_binary(&obs)).unwrap();
    let o = l2dens(&["estimate", "--input", "x.bin", "--binary", "--isotropic"], dir.path());
    let v2: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v2["estimate"].as_f64().unwrap(), est);
}

#[test]
fn odd_sample_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_sample(&dir.path().join("odd.csv"), 101, 1);
    let o = l2dens(&["estimate", "--input", "odd.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n = 2m"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_names_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "1,2\n3,4\n5,oops\n6,7\n").unwrap();
    let o = l2dens(&["estimate", "--input", "bad.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("row 3, column 2"), "{}", stderr(&o));
    std::fs::write(dir.path().join("ragged.csv"), "1,2\n3\n").unwrap();
    let o = l2dens(&["estimate", "--input", "ragged.csv"], dir.path());
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn conflicting_and_unknown_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = l2dens(&["estimate", "--input", "x", "--header", "--binary"], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("--header") && e.contains("--binary"), "{e}");
    let o = l2dens(&["grid", "--m", "100", "--d", "1", "--nope"], dir.path());
    assert!(!o.status.success());
    assert!(l2dens(&["simulate", "--help"], dir.path()).status.success());
}

const CONFIG: &str = r#"
experiment = "risk"
m = [40, 80]
replications = 3
isotropic = true

[[densities]]
name = "gaussian_product"
d = 1

[check]
max_slope = -100.0
"#;

#[test]
fn simulate_is_seeded_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let run = |out: &str| {
        let o = l2dens(
            &["simulate", "--config", "exp.toml", "--seed", "7", "--output", out, "--plotdata"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("report.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert!(dir.path().join("a/plotdata/risk_gaussian_product_d1.csv").exists());
    let text = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
    let back = l2dens::sim::SimReport::from_json(&text).unwrap();
    assert_eq!(back.config.seed, 7);
    assert_eq!(back.to_csv().unwrap().as_bytes(), &a[..]);

    let o = l2dens(&["simulate", "--config", "exp.toml", "--output", "c", "--check"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment": "combiner", "m": [40], "replications": 2,
                 "densities": [{"name": "uniform_cube", "d": 1}], "threshold": 1e300}"#;
    std::fs::write(dir.path().join("c.json"), cfg).unwrap();
    let o = l2dens(&["simulate", "--config", "c.json", "--output", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("uniform_cube_d1.m40.parametric_frequency,1.0000000000000000e0"));
}

#[test]
fn oracle_rate_kernel_zoo() {
    let dir = tempfile::tempdir().unwrap();
    let o = l2dens(&["oracle", "--density", "gaussian", "--d", "1", "--m", "100", "--q", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 7);
    assert!(v["o_star"].as_f64().unwrap() > 0.0);

    let o = l2dens(&["rate", "--beta", "1,3", "--r", "inf,2", "--m", "500"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rate_exponent"].as_f64().unwrap() <= 0.5);
    assert!(v["optimal_bandwidth"]["h"].as_array().unwrap().len() == 2);

    let o = l2dens(&["kernel", "dump", "--b", "3"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["t"], 3.0);

    let o = l2dens(&["zoo", "list"], dir.path());
    assert!(stdout(&o).contains("laplace_product"));
    assert!(!l2dens(&["oracle", "--density", "cauchy", "--d", "1", "--m", "100"], dir.path()).status.success());
}
