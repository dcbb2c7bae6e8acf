use std::path::Path;
use std::process::{Command, Output};

use mbd_bench::runner::{final_j_min_from_csv, mean_std, trace_path};
use mbd_bench::Aggregate;

fn mbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_aggregate(dir: &Path) -> Aggregate {
    serde_json::from_str(&std::fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap()
}

const PENDULUM: &str = r#"{
    "task": "pendulum_swingup", "method": "mbd", "horizon": 30,
    "mbd": {"n_steps": 20, "n_samples": 16},
    "seeds": [0, 1, 2, 3, 4, 5, 6, 7]
}"#;

#[test]
fn eight_seed_run_writes_traces_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), PENDULUM);
    let o = mbd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let agg = read_aggregate(&out);
    assert_eq!(agg.seeds.len(), 8);
    assert_eq!(agg.method, "mbd");
    assert!(agg.mean_cost.is_finite() && agg.std_cost.is_finite());
    assert!((0.0..=1.0).contains(&agg.success_rate));
    assert!(agg.mean_wall_time_ms >= 0.0);

    // statistics recomputed from the trace files alone
    let costs: Vec<f64> = (0..8)
        .map(|s| final_j_min_from_csv(&std::fs::read_to_string(trace_path(&out, s)).unwrap()).unwrap())
        .collect();
    let (m, sd) = mean_std(&costs);
    assert!((m - agg.mean_cost).abs() <= 1e-9 * m.abs().max(1.0), "{m} vs {}", agg.mean_cost);
    assert!((sd - agg.std_cost).abs() <= 1e-9 * sd.abs().max(1.0), "{sd} vs {}", agg.std_cost);
    for s in 0..8 {
        assert!(out.join(format!("seed_{s}.json")).exists());
        assert!(out.join(format!("seed_{s}_trajectory.csv")).exists());
    }
}

#[test]
fn repeated_runs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PENDULUM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = mbd(&["run", "--config", &cfg, "--seed-override", "3", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let ta = std::fs::read(trace_path(&a, 3)).unwrap();
    assert_eq!(ta, std::fs::read(trace_path(&b, 3)).unwrap());
    assert!(!a.join("seed_0_trace.csv").exists());
}

#[test]
fn unknown_task_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "lunar_lander", "method": "mbd", "seeds": [0]}"#);
    let o = mbd(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lunar_lander") && err.contains("TASK_UNKNOWN"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"task": "ackley_2d", "method": "mbd", "seeds": [0], "mbd": {"temperature": -1}}"#);
    let o = mbd(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CONFIG_INVALID"));
}

#[test]
fn missing_config_exits_with_three() {
    let o = mbd(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("IO_ERROR"));
}

#[test]
fn failed_seed_gives_nonzero_exit_and_partial_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    // a clearance this wide seals the car in, so every RRT call fails
    let cfg = write_config(
        dir.path(),
        r#"{"task": "car2d_umaze", "method": "mbd", "mbd": {"n_steps": 2, "n_samples": 4}, "seeds": [0, 1],
            "demo": {"source": "rrt", "rrt": {"clearance": 0.45, "max_iters": 50}}}"#,
    );
    let out = dir.path().join("out");
    let o = mbd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let agg = read_aggregate(&out);
    assert_eq!(agg.failed_seeds, vec![0, 1]);
    assert!(agg.seeds.is_empty());
}

#[test]
fn black_box_and_baseline_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("cem", r#"{"task": "rastrigin_3d", "method": "cem", "cem": {"n_iters": 5, "n_samples": 20, "elite_mode": {"kind": "top_k", "k": 4, "smoothing": 0.0}}, "seeds": [0]}"#),
        ("mppi", r#"{"task": "double_integrator_2d", "method": "mppi", "mppi": {"n_iters": 3, "n_samples": 8}, "seeds": [0]}"#),
        ("mbd", r#"{"task": "multimodal_1d", "method": "mbd", "success_threshold": 0.05, "seeds": [0, 1]}"#),
    ] {
        let out = dir.path().join(name);
        let cfg = write_config(dir.path(), body);
        let o = mbd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_aggregate(&out).method, name);
    }
}

#[test]
fn list_tasks_names_every_builtin() {
    let o = mbd(&["list-tasks"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for n in mbd_core::dynamics::TASK_NAMES {
        assert!(text.lines().any(|l| l == n), "{n}");
    }
    assert!(text.contains("mlp_spiral"));
}

#[test]
fn demo_gen_writes_a_readable_demonstration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo.csv");
    let path_out = dir.path().join("path.csv");
    let o = mbd(&[
        "demo-gen", "--task", "car2d_umaze", "--out", out.to_str().unwrap(), "--path-out", path_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let demo = mbd_core::demos::Demonstration::read_csv(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    let task = mbd_core::dynamics::car2d_umaze();
    demo.check_shape(&task).unwrap();
    assert_eq!(demo.demo_violation, 0.0);
    assert!(std::fs::read_to_string(&path_out).unwrap().starts_with("x,y\n"));

    let o = mbd(&["demo-gen", "--task", "pendulum_swingup", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_demo_attaches_to_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo.csv");
    assert!(mbd(&["demo-gen", "--task", "car2d_umaze", "--out", demo.to_str().unwrap()]).status.success());
    let body = format!(
        r#"{{"task": "car2d_umaze", "method": "mbd", "mbd": {{"n_steps": 3, "n_samples": 8}}, "seeds": [0],
            "demo": {{"source": "csv", "path": {:?}}}}}"#,
        demo.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = mbd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read_aggregate(&out).demo);
    assert!(out.join("layout.json").exists());
    assert!(out.join("seed_0_demo.csv").exists());
}

#[test]
fn plot_data_downsamples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PENDULUM);
    let out = dir.path().join("out");
    assert!(mbd(&["run", "--config", &cfg, "--seed-override", "0", "--out", out.to_str().unwrap()]).status.success());
    let trace = trace_path(&out, 0);
    let o = mbd(&["plot-data", "--trace", trace.to_str().unwrap(), "--max-rows", "5"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,j_min,j_mean_batch,ess,y_norm");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("20,") && lines[5].starts_with("1,"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = mbd_bench::RunConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
