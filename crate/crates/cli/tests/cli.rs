use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use gmm_reparam::data::load_trajectory;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmm-reparam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Demonstrations and a fitted model shared by every test in this file.
struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn model(&self) -> PathBuf {
        self.path("model.json")
    }
}

fn workspace() -> &'static Workspace {
    static WS: OnceLock<Workspace> = OnceLock::new();
    WS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&["synth", "--out", s(&root.join("demos"))]);
        let demos: Vec<String> = (0..5)
            .map(|j| {
                root.join(format!("demos/demo_{j}.csv"))
                    .to_string_lossy()
                    .into_owned()
            })
            .collect();
        let model = root.join("model.json");
        let mut args = vec!["fit", "--out", s(&model), "--demos"];
        args.extend(demos.iter().map(String::as_str));
        ok(&args);
        Workspace { _dir: dir, root }
    })
}

#[test]
fn missing_file_is_an_input_error() {
    let ws = workspace();
    let out = cli(&[
        "regress",
        "--model",
        s(&ws.path("nope.json")),
        "--out",
        s(&ws.path("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn invalid_scene_exits_with_two() {
    let ws = workspace();
    let scene = ws.path("bad_scene.json");
    fs::write(
        &scene,
        r#"{"slabs": [{"min": [0, 0, 0], "max": [-1, 1, 1]}], "box_dims": [0.2, 0.15, 0.12],
            "levels": [0.165], "length_range": [0.15, 0.65], "rest_depth": 0.15}"#,
    )
    .unwrap();
    let out = cli(&["synth", "--out", s(&ws.path("never")), "--scene", s(&scene)]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn too_many_components_exits_with_two() {
    let ws = workspace();
    let demo = ws.path("demos/demo_0.csv");
    let out = cli(&[
        "fit",
        "--demos",
        s(&demo),
        "--components",
        "100000",
        "--out",
        s(&ws.path("big.json")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn malformed_pose_exits_with_two() {
    let ws = workspace();
    let out = cli(&[
        "generalize",
        "--model",
        s(&ws.model()),
        "--start",
        "0.1,0.2",
        "--goal",
        "0,0,0,0,0,0",
        "--out",
        s(&ws.path("g.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_two() {
    let ws = workspace();
    let cfg = ws.path("typo.json");
    fs::write(&cfg, r#"{"trails": 3}"#).unwrap();
    let out = cli(&[
        "--config",
        s(&cfg),
        "regress",
        "--model",
        s(&ws.model()),
        "--out",
        s(&ws.path("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identity_generalization_matches_plain_regression() {
    let ws = workspace();
    // The first and last component means are the model's own endpoints.
    let plain = ws.path("plain.csv");
    ok(&["regress", "--model", s(&ws.model()), "--out", s(&plain)]);
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.model()).unwrap()).unwrap();
    let comps = model["components"].as_array().unwrap();
    let endpoint = |c: &serde_json::Value| {
        let mean = c["mu"].as_array().unwrap();
        mean[1..]
            .iter()
            .map(|v| v.as_f64().unwrap().to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let (start, goal) = (endpoint(&comps[0]), endpoint(comps.last().unwrap()));
    let traj = ws.path("identity.csv");
    ok(&[
        "generalize",
        "--model",
        s(&ws.model()),
        "--start",
        &start,
        "--goal",
        &goal,
        "--out",
        s(&ws.path("identity.json")),
        "--traj",
        s(&traj),
    ]);
    let a = load_trajectory(&plain).unwrap();
    let b = load_trajectory(&traj).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn ablation_changes_the_path_but_not_the_endpoints() {
    let ws = workspace();
    let (start, goal) = ("0.2,0.15,0.565,0,0,0.5", "0.6,0.15,0.165,0,0,-0.5");
    let run = |name: &str, extra: &[&str]| {
        let traj = ws.path(&format!("{name}.csv"));
        let model = ws.model();
        let mut args = vec![
            "generalize",
            "--model",
            s(&model),
            "--start",
            start,
            "--goal",
            goal,
        ];
        let out = ws.path(&format!("{name}.json"));
        args.extend(["--out", s(&out), "--traj", s(&traj)]);
        args.extend(extra);
        ok(&args);
        load_trajectory(&traj).unwrap()
    };
    let full = run("full", &[]);
    let ablated = run("ablated", &["--ablate-covariance"]);
    let gap = full
        .values()
        .iter()
        .zip(ablated.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1e-3, "paths differ by only {gap}");
    for t in [&full, &ablated] {
        let first = t.first_pose();
        let last = t.last_pose();
        assert!((first.position.x - 0.2).abs() < 2e-3 && (last.position.x - 0.6).abs() < 2e-3);
        assert!((first.position.z - 0.565).abs() < 2e-3 && (last.position.z - 0.165).abs() < 2e-3);
    }
}

#[test]
fn evaluate_prints_a_report() {
    let ws = workspace();
    let traj = ws.path("eval_source.csv");
    ok(&["regress", "--model", s(&ws.model()), "--out", s(&traj)]);
    let out = ok(&["evaluate", "--traj", s(&traj), "--model", s(&ws.model())]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["success"], true);
    assert!(report["shape_deviation"].as_f64().unwrap() < 1e-9);
}

#[test]
fn benchmark_writes_summary_and_trials() {
    let ws = workspace();
    let out = ws.path("bench");
    ok(&[
        "benchmark",
        "--model",
        s(&ws.model()),
        "--trials",
        "6",
        "--compare",
        "--sequential",
        "--out",
        s(&out),
    ]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split(',').count(), 13);
    assert!(lines[1].starts_with("full,") && lines[2].starts_with("ablated,"));
    let trials: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trials.json")).unwrap()).unwrap();
    assert_eq!(trials.as_array().unwrap().len(), 12);
}

#[test]
fn sequential_and_parallel_benchmarks_agree() {
    let ws = workspace();
    let run = |name: &str, extra: Option<&str>| {
        let out = ws.path(name);
        let model = ws.model();
        let mut args = vec![
            "benchmark",
            "--model",
            s(&model),
            "--mode",
            "combined",
            "--trials",
            "8",
            "--out",
            s(&out),
        ];
        args.extend(extra);
        ok(&args);
        fs::read(out.join("trials.json")).unwrap()
    };
    assert_eq!(run("par", None), run("seq", Some("--sequential")));
}

#[test]
fn plot_writes_svg_and_numbered_csvs() {
    let ws = workspace();
    let a = ws.path("demos/demo_0.csv");
    let b = ws.path("demos/demo_1.csv");
    let svg = ws.path("plots/fig.svg");
    let csv = ws.path("plots/data.csv");
    ok(&[
        "plot",
        "--traj",
        s(&a),
        s(&b),
        "--svg",
        s(&svg),
        "--csv",
        s(&csv),
    ]);
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 2 * 9);
    assert!(text.contains(r#"data-label="demo_1""#));
    assert!(ws.path("plots/data_0.csv").exists() && ws.path("plots/data_1.csv").exists());

    let out = cli(&["plot", "--traj", s(&a)]);
    assert_eq!(out.status.code(), Some(2));
}
