use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

fn problems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn rhc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rhc"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run_problem(name: &str, out: &Path) -> i32 {
    let path = problems_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mode = v["mode"]
        .as_str()
        .expect("example problems name their mode");
    rhc(&[
        mode,
        "--problem",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .0
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// every file in problems/ must appear here with its documented exit code
const EXPECTED: &[(&str, i32)] = &[
    ("check-symmetry-fails.json", 2),
    ("check-symmetry.json", 0),
    ("hermitian-focusing.json", 0),
    ("hermitian-scalar.json", 0),
    ("identity.json", 0),
    ("idnls-defocusing.json", 0),
    ("idnls-soliton.json", 0),
    ("idnls-two-poles.json", 0),
    ("index-z.json", 0),
    ("rational-winding.json", 3),
    ("rational.json", 0),
    ("scalar-factorization.json", 0),
    ("two-circles.json", 0),
];

#[test]
fn example_problems_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut listed: Vec<String> = std::fs::read_dir(problems_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    listed.sort();
    let expected: Vec<String> = EXPECTED.iter().map(|(n, _)| n.to_string()).collect();
    assert_eq!(
        listed, expected,
        "problems/ and the expected exit codes disagree"
    );

    let start = Instant::now();
    for (name, code) in EXPECTED {
        let out = dir.path().join(format!("{name}.report"));
        assert_eq!(run_problem(name, &out), *code, "{name}");
        let r = report(&out);
        assert_eq!(r["version"], 1, "{name}");
    }
    assert!(
        start.elapsed().as_secs_f64() < 60.0,
        "examples took {:?}",
        start.elapsed()
    );
}

#[test]
fn documented_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");

    assert_eq!(run_problem("identity.json", &out), 0);
    assert_eq!(report(&out)["residual_jump"], 0.0);

    assert_eq!(run_problem("index-z.json", &out), 0);
    let r = report(&out);
    assert_eq!(
        (r["dim_ker"].as_u64(), r["dim_coker"].as_u64()),
        (Some(1), Some(0))
    );

    assert_eq!(run_problem("idnls-soliton.json", &out), 0);
    let r = report(&out);
    assert_eq!(
        (r["dim_ker"].as_u64(), r["dim_coker"].as_u64()),
        (Some(0), Some(0))
    );
    assert!(r["min_re_eig"].as_f64().unwrap() > 0.0);
    assert!(r["residual_jump"].as_f64().unwrap() <= 1e-8);

    assert_eq!(run_problem("rational-winding.json", &out), 3);
    assert_eq!(report(&out)["status"], "near-singular");
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for name in ["two-circles.json", "hermitian-focusing.json"] {
        assert_eq!(run_problem(name, &a), 0);
        assert_eq!(run_problem(name, &b), 0);
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn samples_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv_path = dir.path().join("s.csv");
    let problem = problems_dir().join("rational.json");
    let (code, err) = rhc(&[
        "solve",
        "--problem",
        problem.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--samples",
        csv_path.to_str().unwrap(),
        "--grid",
        "5x4",
        "--bbox",
        "-2,2,-1.7,1.7",
    ]);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["region", "re_z", "im_z", "row", "col", "re_m", "im_m"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // no grid point comes within the margin of |z| = 1
    assert_eq!(rows.len(), 20);
    for row in rows {
        let z = num_complex::Complex64::new(row[1].parse().unwrap(), row[2].parse().unwrap());
        let m = num_complex::Complex64::new(row[5].parse().unwrap(), row[6].parse().unwrap());
        let exact = if z.norm() < 1.0 {
            (z - 1.6) / (z - 2.5)
        } else {
            1.0.into()
        };
        assert_eq!(&row[0], if z.norm() < 1.0 { "plus" } else { "minus" });
        assert!((m - exact).norm() < 1e-10, "{z}: {m}");
    }
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let bad = dir.path().join("bad.json");
    let o = out.to_str().unwrap();

    std::fs::write(&bad, r#"{"version": 1, "contour": [{"center": [0, 0], "radius": 1, "orientation": "ccw"}], "jump": "z +"}"#).unwrap();
    let (code, err) = rhc(&["solve", "--problem", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 1);
    assert!(err.contains("position 3"), "{err}");
    assert_eq!(report(&out)["status"], "error");

    std::fs::write(&bad, r#"{"version": 1, "unknown": true}"#).unwrap();
    assert_eq!(
        rhc(&["solve", "--problem", bad.to_str().unwrap(), "--out", o]).0,
        1
    );

    let p = problems_dir().join("rational.json");
    let p = p.to_str().unwrap();
    assert_eq!(
        rhc(&["index", "--problem", p, "--out", o]).0,
        1,
        "mode mismatch"
    );
    assert_eq!(
        rhc(&["solve", "--problem", p, "--out", o, "--tol", "bogus=1"]).0,
        1
    );
    assert_eq!(
        rhc(&["solve", "--problem", p, "--out", o, "--grid", "0x3"]).0,
        1
    );
    assert_eq!(rhc(&["frobnicate", "--problem", p, "--out", o]).0, 1);
}

#[test]
fn overrides_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let p = problems_dir().join("two-circles.json");
    let (code, _) = rhc(&[
        "solve",
        "--problem",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--nodes",
        "32",
        "--timing",
    ]);
    assert_eq!(code, 0);
    let r = report(&out);
    assert_eq!(r["node_counts"], serde_json::json!([32, 32]));
    assert!(r["timing"]["total_seconds"].as_f64().unwrap() >= 0.0);

    // an impossible sigma floor turns the solve into a near-singular exit
    let (code, _) = rhc(&[
        "solve",
        "--problem",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--tol",
        "sigma_min=10",
    ]);
    assert_eq!(code, 3);
}
