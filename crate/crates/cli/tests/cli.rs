use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cindex-boost"));
    cmd.env_remove("CINDEX_BOOST_WORKERS");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn cli")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    ok(
        dir,
        &[
            "simulate",
            "--n",
            &n.to_string(),
            "--p",
            "12",
            "--censoring",
            "0.4",
            "--seed",
            &seed.to_string(),
            "-o",
            name,
        ],
    );
    dir.join(name)
}

fn model_field(path: &Path, key: &str) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in model file"))
}

#[test]
fn simulate_is_reproducible_and_writes_sidecar() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "a.csv", 80, 7);
    let b = simulate(dir.path(), "b.csv", 80, 7);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let header = fs::read_to_string(&a)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.starts_with("time,event,x1,x2"));

    let latent = fs::read_to_string(dir.path().join("a.csv.latent")).unwrap();
    let rate: f64 = latent
        .lines()
        .find_map(|l| l.strip_prefix("realized_censoring="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let etas = latent
        .lines()
        .skip_while(|l| *l != "eta_mu")
        .skip(1)
        .count();
    assert_eq!(etas, 80);
}

#[test]
fn select_writes_ranked_features() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "d.csv", 150, 3);
    ok(
        dir.path(),
        &["select", "--input", "d.csv", "--top", "4", "-o", "rank.csv"],
    );
    let text = fs::read_to_string(dir.path().join("rank.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "feature,concordance,score,rank");
    assert_eq!(rows.len(), 5);
    let scores: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(scores.iter().all(|&s| s >= 0.5));
}

#[test]
fn model_and_prediction_file_agree() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "learn.csv", 100, 11);
    simulate(dir.path(), "test.csv", 120, 12);
    ok(
        dir.path(),
        &[
            "fit",
            "--input",
            "learn.csv",
            "--mstop",
            "300",
            "-o",
            "model.txt",
        ],
    );
    let trace = fs::read_to_string(dir.path().join("model.txt.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 301);

    // risk score = -(sum of beta * (x - mean)), computed from the model file
    let model = fs::read_to_string(dir.path().join("model.txt")).unwrap();
    let terms: Vec<(String, f64, f64)> = model
        .lines()
        .skip_while(|l| *l != "feature\tmean\tcoefficient")
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    let test = fs::read_to_string(dir.path().join("test.csv")).unwrap();
    let mut lines = test.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut preds = String::from("risk_score\n");
    for line in lines {
        let values: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let eta: f64 = terms
            .iter()
            .map(|(name, mean, beta)| {
                let col = header.iter().position(|h| h == name).unwrap();
                beta * (values[col] - mean)
            })
            .sum();
        preds.push_str(&format!("{}\n", -eta));
    }
    fs::write(dir.path().join("preds.csv"), preds).unwrap();

    let parse = |s: &str| -> (f64, f64) {
        let get = |k: &str| {
            s.lines()
                .find_map(|l| l.strip_prefix(k))
                .unwrap()
                .parse::<f64>()
                .unwrap()
        };
        (get("uno="), get("harrell="))
    };
    let by_model = parse(&ok(
        dir.path(),
        &[
            "evaluate",
            "--learn",
            "learn.csv",
            "--test",
            "test.csv",
            "--model",
            "model.txt",
        ],
    ));
    let by_file = parse(&ok(
        dir.path(),
        &[
            "evaluate",
            "--learn",
            "learn.csv",
            "--test",
            "test.csv",
            "--predictions",
            "preds.csv",
        ],
    ));
    assert!((by_model.0 - by_file.0).abs() < 1e-12);
    assert!((by_model.1 - by_file.1).abs() < 1e-12);
    assert!(by_model.0 > 0.5);
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "d.csv", 60, 5);
    fs::write(
        dir.path().join("run.conf"),
        "# quick\nmstop=20\nsigma=0.25\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "fit", "--config", "run.conf", "--input", "d.csv", "--mstop", "30", "-o", "m1.txt",
        ],
    );
    let m1 = dir.path().join("m1.txt");
    assert_eq!(model_field(&m1, "m_stop"), "30");
    assert_eq!(model_field(&m1, "sigma"), "0.25");
    assert_eq!(model_field(&m1, "step_length"), "0.1");

    let out = run(
        dir.path(),
        &[
            "fit",
            "--config",
            "missing.conf",
            "--input",
            "d.csv",
            "-o",
            "m2.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(3));

    fs::write(dir.path().join("bad.conf"), "colour=blue\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "fit", "--config", "bad.conf", "--input", "d.csv", "-o", "m3.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "d.csv", 40, 1);
    let code = |args: &[&str]| run(dir.path(), args).status.code();

    assert_eq!(code(&["fit", "--input", "d.csv"]), Some(2));
    assert_eq!(
        code(&["fit", "--input", "d.csv", "--sl", "1.5", "-o", "m.txt"]),
        Some(2)
    );
    assert_eq!(
        code(&["fit", "--input", "absent.csv", "-o", "m.txt"]),
        Some(3)
    );

    fs::write(
        dir.path().join("bad.csv"),
        "time,event,x\n1,2,0.5\n2,1,0.1\n",
    )
    .unwrap();
    assert_eq!(code(&["fit", "--input", "bad.csv", "-o", "m.txt"]), Some(3));

    fs::write(
        dir.path().join("censored.csv"),
        "time,event,x\n1,0,0.5\n2,0,0.1\n3,0,0.7\n",
    )
    .unwrap();
    assert_eq!(
        code(&["fit", "--input", "censored.csv", "-o", "m.txt"]),
        Some(4)
    );
    assert!(!dir.path().join("m.txt").exists());
}

#[test]
fn benchmark_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let common = [
        "benchmark",
        "--B",
        "3",
        "--mstop",
        "40",
        "--p",
        "40",
        "--n-selection",
        "150",
        "--n-test",
        "150",
        "--seed",
        "9",
    ];
    let mut one = common.to_vec();
    one.extend(["--workers", "1", "-o", "w1"]);
    ok(dir.path(), &one);
    let mut two = common.to_vec();
    two.extend(["-o", "w2"]);
    bin()
        .current_dir(dir.path())
        .args(&two)
        .env("CINDEX_BOOST_WORKERS", "2")
        .output()
        .unwrap();
    for file in ["replicates.csv", "summary.csv", "summary.txt"] {
        assert_eq!(
            fs::read(dir.path().join("w1").join(file)).unwrap(),
            fs::read(dir.path().join("w2").join(file)).unwrap(),
            "{file}"
        );
    }
    let echo = fs::read_to_string(dir.path().join("w2/config.txt")).unwrap();
    assert!(echo.contains("mstop=40"));
    assert!(echo.contains("workers=2"));
    let summary = fs::read_to_string(dir.path().join("w1/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn benchmark_subsamples_an_input_dataset() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "d.csv", 90, 21);
    ok(
        dir.path(),
        &[
            "benchmark",
            "--input",
            "d.csv",
            "--B",
            "4",
            "--top",
            "4",
            "--mstop",
            "50",
            "-o",
            "sub",
        ],
    );
    let reps = fs::read_to_string(dir.path().join("sub/replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 5);
    let summary = fs::read_to_string(dir.path().join("sub/summary.csv")).unwrap();
    assert!(summary.starts_with("estimate,median,q1,q3\ntest_uno,"));
}

#[test]
fn help_shows_defaults() {
    let dir = TempDir::new().unwrap();
    let fit = ok(dir.path(), &["fit", "--help"]);
    for needle in ["[default: 0.1]", "[default: 10000]"] {
        assert!(fit.contains(needle), "{needle}");
    }
    let sim = ok(dir.path(), &["simulate", "--help"]);
    assert!(sim.contains("[default: 0.5]"));
    let bench = ok(dir.path(), &["benchmark", "--help"]);
    assert!(bench.contains("[default: 2/3]"));
    assert!(bench.contains("paper-table1"));
}
