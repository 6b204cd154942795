use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn streamlabel(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_streamlabel"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("STREAMLABEL_THREADS", t),
        None => cmd.env_remove("STREAMLABEL_THREADS"),
    };
    cmd.output().unwrap()
}

const DISCRETE: &str = r#"{
    "name": "cli-discrete",
    "task": { "kind": "discrete_gaussian", "num_types": 10 },
    "arrival": { "kind": "lopsided" },
    "policy": { "kind": "discrete_threshold" },
    "cost_b": 10, "lambda": 0.5, "sigma": 0.1,
    "horizon_t": 500, "trial_seeds": [0, 1, 2]
}"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_outputs_and_overrides_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISCRETE);
    let out = dir.path().join("out");
    let o = streamlabel(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--trials",
            "2",
            "--seed-base",
            "7",
        ],
        Some("1"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 1 + 2 * 500);
    assert!(rounds.starts_with(
        "trial,t,x_repr,labeled,prediction,true_value,error,cum_loss,uncertainty,threshold\n"
    ));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "t,mean_avg_loss,ci_halfwidth,mean_avg_error,err_ci_halfwidth,mean_cum_labels\n"
    ));
    let written = fs::read_to_string(out.join("config.json")).unwrap();
    assert!(
        written.contains("\"trial_seeds\": [\n    7,\n    8\n  ]"),
        "{written}"
    );
    for f in ["loss.svg", "error.svg"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn thread_cap_does_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISCRETE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(streamlabel(
        &["run", "--config", &cfg, "--out", a.to_str().unwrap()],
        Some("1")
    )
    .status
    .success());
    assert!(streamlabel(
        &["run", "--config", &cfg, "--out", b.to_str().unwrap()],
        Some("0")
    )
    .status
    .success());
    for f in ["rounds.csv", "summary.csv", "loss.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        &DISCRETE.replace("\"horizon_t\": 500", "\"horizon_t\": 0"),
    );
    assert_eq!(
        streamlabel(&["run", "--config", &bad], None).status.code(),
        Some(2)
    );
    let missing = dir.path().join("nope.json");
    assert_eq!(
        streamlabel(&["run", "--config", missing.to_str().unwrap()], None)
            .status
            .code(),
        Some(2)
    );
    let unknown = write_config(dir.path(), &DISCRETE.replace("\"sigma\"", "\"sgima\""));
    assert_eq!(
        streamlabel(&["run", "--config", &unknown], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        streamlabel(&["repro", "fig99"], None).status.code(),
        Some(2)
    );
    assert_eq!(streamlabel(&["repro", "fig4"], None).status.code(), Some(2));
    let good = write_config(dir.path(), DISCRETE);
    assert_eq!(
        streamlabel(
            &["ablate-lambda", "--config", &good, "--grid", "0.5,x"],
            None
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        streamlabel(&["run", "--config", &good], Some("many"))
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn data_and_output_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\n0.5,2\n0.9,3\n").unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "task": { "kind": "csv", "path": "d.csv", "feature_columns": ["x"], "label_column": "y" },
            "arrival": { "kind": "replay" },
            "policy": { "kind": "gp_threshold" },
            "cost_b": 1, "sigma": 0.1, "horizon_t": 3, "trial_seeds": [0]
        }"#,
    );
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert!(streamlabel(&["run", "--config", &cfg, "--out", out], None)
        .status
        .success());

    // an output directory that cannot be created is a runtime failure
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(
        streamlabel(
            &["run", "--config", &cfg, "--out", nested.to_str().unwrap()],
            None
        )
        .status
        .code(),
        Some(3)
    );

    // malformed or short data is caught before any trial runs
    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\nbad,2\n0.9,3\n").unwrap();
    let o = streamlabel(&["run", "--config", &cfg, "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    fs::write(dir.path().join("d.csv"), "x,y\n0.1,1\n").unwrap();
    assert_eq!(
        streamlabel(&["run", "--config", &cfg, "--out", out], None)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn ablate_lambda_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISCRETE);
    let out = dir.path().join("abl");
    let o = streamlabel(
        &[
            "ablate-lambda",
            "--config",
            &cfg,
            "--grid",
            "0.25, 0.5,1",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.lines().nth(1).unwrap().starts_with("0.25,"));
}

#[test]
fn repro_small_figure_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = streamlabel(
            &[
                "repro",
                "ablation-discrete",
                "--trials",
                "2",
                "--out",
                d.to_str().unwrap(),
            ],
            None,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let file = |root: &Path| {
        let mut entries: Vec<_> = fs::read_dir(root)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        fs::read(entries[0].join("lambda_0.5").join("rounds.csv")).unwrap()
    };
    assert_eq!(file(&a), file(&b));
}

#[test]
fn shipped_configs_run() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs");
    for name in [
        "discrete_k10_uniform.json",
        "branin_gp.json",
        "hartmann6_var_uncertainty.json",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = docs.join("configs").join(name);
        let o = streamlabel(
            &[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--trials",
                "2",
                "--out",
                dir.path().to_str().unwrap(),
            ],
            None,
        );
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    // recipes parse but point at data that is not bundled
    for name in ["parkinsons_uniform.json", "supernova.json"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = docs.join("recipes").join(name);
        let o = streamlabel(
            &[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.path().to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(
            String::from_utf8_lossy(&o.stderr).contains("data/"),
            "{name}"
        );
    }
}
