//! Canned configurations for the `repro` and λ-ablation runs.

use std::path::{Path, PathBuf};

use super::config::{ArrivalSpec, ExperimentConfig, GpSettings, PolicySpec, TaskSpec};
use super::output::{emit_ablation, emit_comparison, emit_outputs};
use super::runner::{run_experiment_with, Execution, ExperimentResults};
use crate::error::{Error, Result};
use crate::streams::load_csv_stream;

pub const FIGURE_IDS: [&str; 6] = [
    "fig2",
    "fig3",
    "fig4",
    "fig5",
    "ablation-discrete",
    "ablation-branin",
];

pub const PARKINSONS_FEATURES: [&str; 9] = [
    "age",
    "sex",
    "Jitter(%)",
    "Shimmer",
    "NHR",
    "HNR",
    "RPDE",
    "DFA",
    "PPE",
];
pub const PARKINSONS_LABEL: &str = "total_UPDRS";
pub const SUPERNOVA_FEATURES: [&str; 3] = ["h0", "omega_m", "omega_l"];
pub const SUPERNOVA_LABEL: &str = "label";

const SYNTHETIC_TRIALS: u64 = 10;
const REAL_TRIALS: u64 = 5;
const DISCRETE_SIGMA: f64 = 0.1;
const DISCRETE_HORIZON: usize = 10_000;
const GP_HORIZON: usize = 300;

#[derive(Debug, Clone)]
pub struct CannedRun {
    pub label: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct CannedPanel {
    pub name: String,
    pub runs: Vec<CannedRun>,
}

#[derive(Debug, Clone)]
pub struct CannedFigure {
    pub id: String,
    pub panels: Vec<CannedPanel>,
}

impl CannedFigure {
    pub fn configs(&self) -> impl Iterator<Item = &ExperimentConfig> {
        self.panels
            .iter()
            .flat_map(|p| p.runs.iter().map(|r| &r.config))
    }
}

fn base(
    name: String,
    task: TaskSpec,
    arrival: ArrivalSpec,
    policy: PolicySpec,
) -> ExperimentConfig {
    ExperimentConfig {
        name,
        task,
        arrival,
        policy,
        cost_b: 10.0,
        lambda: 1.0,
        sigma: DISCRETE_SIGMA,
        delta: 0.05,
        horizon_t: DISCRETE_HORIZON,
        trial_seeds: (0..SYNTHETIC_TRIALS).collect(),
        output_dir: None,
        gp: GpSettings::default(),
    }
}

fn lopsided() -> ArrivalSpec {
    ArrivalSpec::Lopsided {
        heavy_fraction: 0.2,
        heavy_mass: 0.8,
    }
}

fn arrival_name(a: &ArrivalSpec) -> &'static str {
    match a {
        ArrivalSpec::Uniform => "uniform",
        ArrivalSpec::Lopsided { .. } | ArrivalSpec::LopsidedBox { .. } => "lopsided",
        ArrivalSpec::Custom { .. } => "custom",
        ArrivalSpec::Replay => "replay",
    }
}

fn random_select() -> PolicySpec {
    PolicySpec::RandomSelect { probability: 0.5 }
}

fn run(label: &str, config: ExperimentConfig) -> CannedRun {
    CannedRun {
        label: label.to_string(),
        config,
    }
}

/// λ for the discrete comparison, indexed by K, B and arrival pattern.
pub fn discrete_lambda(k: usize, cost: f64, lopsided: bool) -> f64 {
    match (k, cost as u32, lopsided) {
        (10, 10, _) => 0.5,
        (10, _, _) => 0.25,
        (_, 10, _) => 2.0,
        (_, _, false) => 0.75,
        (_, _, true) => 0.5,
    }
}

/// One discrete panel: the threshold policy and both baselines.
pub fn discrete_panel(k: usize, cost: f64, arrival: ArrivalSpec) -> CannedPanel {
    let is_lopsided = !matches!(arrival, ArrivalSpec::Uniform);
    let name = format!("k{k}_b{cost}_{}", arrival_name(&arrival));
    let make = |policy: PolicySpec| {
        let mut c = base(
            name.clone(),
            TaskSpec::DiscreteGaussian { num_types: k },
            arrival.clone(),
            policy,
        );
        c.cost_b = cost;
        c.lambda = discrete_lambda(k, cost, is_lopsided);
        c
    };
    CannedPanel {
        name: name.clone(),
        runs: vec![
            run("threshold", make(PolicySpec::DiscreteThreshold)),
            run("random_select", make(random_select())),
            run("var_uncertainty", make(PolicySpec::VarUncertainty)),
        ],
    }
}

/// One continuous panel: GP threshold, naive discretized and both baselines.
#[allow(clippy::too_many_arguments)]
fn continuous_panel(
    name: &str,
    task: TaskSpec,
    arrival: ArrivalSpec,
    cost: f64,
    sigma: f64,
    gp_lambda: f64,
    naive_lambda: f64,
    horizon: usize,
    trials: u64,
) -> CannedPanel {
    let make = |policy: PolicySpec, lambda: f64| {
        let mut c = base(name.to_string(), task.clone(), arrival.clone(), policy);
        c.cost_b = cost;
        c.lambda = lambda;
        c.sigma = sigma;
        c.horizon_t = horizon;
        c.trial_seeds = (0..trials).collect();
        c
    };
    CannedPanel {
        name: name.to_string(),
        runs: vec![
            run("gp_threshold", make(PolicySpec::GpThreshold, gp_lambda)),
            run(
                "naive_discretized",
                make(PolicySpec::NaiveDiscretized, naive_lambda),
            ),
            run("random_select", make(random_select(), 1.0)),
            run("var_uncertainty", make(PolicySpec::VarUncertainty, 1.0)),
        ],
    }
}

fn fig2() -> CannedFigure {
    let mut panels = Vec::new();
    for k in [10, 100] {
        for cost in [10.0, 100.0] {
            for arrival in [ArrivalSpec::Uniform, lopsided()] {
                panels.push(discrete_panel(k, cost, arrival));
            }
        }
    }
    CannedFigure {
        id: "fig2".into(),
        panels,
    }
}

fn fig3() -> CannedFigure {
    let mut panels = Vec::new();
    for cost in [10.0, 100.0] {
        panels.push(continuous_panel(
            &format!("branin_b{cost}_uniform"),
            TaskSpec::Branin,
            ArrivalSpec::Uniform,
            cost,
            5.0,
            1.0,
            10.0,
            GP_HORIZON,
            SYNTHETIC_TRIALS,
        ));
    }
    for cost in [10.0, 100.0] {
        panels.push(continuous_panel(
            &format!("hartmann6_b{cost}_lopsided"),
            TaskSpec::Hartmann6,
            lopsided(),
            cost,
            0.5,
            0.5,
            10.0,
            GP_HORIZON,
            SYNTHETIC_TRIALS,
        ));
    }
    CannedFigure {
        id: "fig3".into(),
        panels,
    }
}

fn csv_task(path: PathBuf, features: &[&str], label: &str) -> Result<(TaskSpec, usize)> {
    let columns: Vec<String> = features.iter().map(|s| s.to_string()).collect();
    let (_, pattern) = load_csv_stream(&path, &columns, label, true, 0.0, 0)?;
    Ok((
        TaskSpec::Csv {
            path,
            feature_columns: columns,
            label_column: label.to_string(),
            normalize: true,
            shuffle_seed: None,
        },
        pattern.remaining().unwrap_or(0),
    ))
}

fn data_dir(data: Option<&Path>, id: &str) -> Result<PathBuf> {
    data.map(Path::to_path_buf).ok_or_else(|| {
        Error::Config(format!(
            "{id} replays an external dataset; pass its directory with --data (see docs/recipes)"
        ))
    })
}

fn fig4(data: Option<&Path>) -> Result<CannedFigure> {
    let dir = data_dir(data, "fig4")?;
    let mut panels = Vec::new();
    for (file, cost) in [
        ("parkinsons_uniform.csv", 10.0),
        ("parkinsons_lopsided.csv", 10.0),
        ("parkinsons_lopsided.csv", 100.0),
    ] {
        let (task, rows) = csv_task(dir.join(file), &PARKINSONS_FEATURES, PARKINSONS_LABEL)?;
        let stem = file.trim_end_matches(".csv");
        panels.push(continuous_panel(
            &format!("{stem}_b{cost}"),
            task,
            ArrivalSpec::Replay,
            cost,
            1.0,
            5.0,
            5.0,
            rows,
            REAL_TRIALS,
        ));
    }
    Ok(CannedFigure {
        id: "fig4".into(),
        panels,
    })
}

fn fig5(data: Option<&Path>) -> Result<CannedFigure> {
    let dir = data_dir(data, "fig5")?;
    let mut panels = Vec::new();
    for (cost, naive_lambda) in [(1.0, 50.0), (10.0, 30.0), (100.0, 10.0)] {
        let (task, rows) = csv_task(
            dir.join("supernova.csv"),
            &SUPERNOVA_FEATURES,
            SUPERNOVA_LABEL,
        )?;
        panels.push(continuous_panel(
            &format!("supernova_b{cost}"),
            task,
            ArrivalSpec::Replay,
            cost,
            10.0,
            1.0,
            naive_lambda,
            rows,
            REAL_TRIALS,
        ));
    }
    Ok(CannedFigure {
        id: "fig5".into(),
        panels,
    })
}

pub const DISCRETE_ABLATION_GRID: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];
pub const BRANIN_ABLATION_GRID: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

fn ablation_panel(config: &ExperimentConfig, grid: &[f64]) -> CannedPanel {
    CannedPanel {
        name: format!("{}_lambda", config.name),
        runs: grid
            .iter()
            .map(|&l| {
                let mut c = config.clone();
                c.lambda = l;
                run(&format!("lambda_{l}"), c)
            })
            .collect(),
    }
}

fn ablation_discrete() -> CannedFigure {
    let panels = [ArrivalSpec::Uniform, lopsided()]
        .into_iter()
        .map(|arrival| {
            let c = discrete_panel(10, 10.0, arrival).runs.remove(0).config;
            ablation_panel(&c, &DISCRETE_ABLATION_GRID)
        })
        .collect();
    CannedFigure {
        id: "ablation-discrete".into(),
        panels,
    }
}

fn ablation_branin() -> CannedFigure {
    let panels = [10.0, 100.0]
        .into_iter()
        .map(|cost| {
            let c = fig3_branin(cost);
            ablation_panel(&c, &BRANIN_ABLATION_GRID)
        })
        .collect();
    CannedFigure {
        id: "ablation-branin".into(),
        panels,
    }
}

fn fig3_branin(cost: f64) -> ExperimentConfig {
    fig3()
        .panels
        .into_iter()
        .find(|p| p.name == format!("branin_b{cost}_uniform"))
        .expect("branin panel")
        .runs
        .remove(0)
        .config
}

/// Looks up a canned figure. `data` is the dataset directory for the
/// real-data figures and is ignored otherwise.
pub fn canned_figure(id: &str, data: Option<&Path>) -> Result<CannedFigure> {
    match id {
        "fig2" => Ok(fig2()),
        "fig3" => Ok(fig3()),
        "fig4" => fig4(data),
        "fig5" => fig5(data),
        "ablation-discrete" => Ok(ablation_discrete()),
        "ablation-branin" => Ok(ablation_branin()),
        other => Err(Error::Config(format!(
            "unknown figure `{other}`; expected one of {}",
            FIGURE_IDS.join(", ")
        ))),
    }
}

/// Runs every configuration of `figure`, writing per-run outputs under
/// `out/<panel>/<run>/` and comparison charts under `out/<panel>/`.
pub fn run_figure(figure: &CannedFigure, out: &Path, execution: Execution) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for panel in &figure.panels {
        let panel_dir = out.join(&panel.name);
        let mut results = Vec::new();
        for r in &panel.runs {
            let res = run_experiment_with(&r.config, execution)?;
            written.extend(emit_outputs(&res, &panel_dir.join(&r.label))?);
            results.push((r.label.clone(), res));
        }
        let refs: Vec<(String, &ExperimentResults)> =
            results.iter().map(|(l, r)| (l.clone(), r)).collect();
        written.extend(emit_comparison(&panel.name, &refs, &panel_dir)?);
    }
    Ok(written)
}

/// Runs `config` once per λ in `grid`.
pub fn ablate_lambda(
    config: &ExperimentConfig,
    grid: &[f64],
    execution: Execution,
) -> Result<Vec<(f64, ExperimentResults)>> {
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    grid.iter()
        .map(|&lambda| {
            let mut c = config.clone();
            c.lambda = lambda;
            c.validate()?;
            Ok((lambda, run_experiment_with(&c, execution)?))
        })
        .collect()
}

/// [`ablate_lambda`] followed by [`emit_ablation`].
pub fn run_ablation(
    config: &ExperimentConfig,
    grid: &[f64],
    out: &Path,
    execution: Execution,
) -> Result<Vec<PathBuf>> {
    let runs = ablate_lambda(config, grid, execution)?;
    emit_ablation(&runs, out)
}
