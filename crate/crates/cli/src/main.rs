use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ecas_core::field::{parse_surface_csv, surface_to_csv};
use ecas_core::pipeline::{
    evaluate_tracks, parse_predictions_csv, predictions_to_csv, run_plan, ParamOverrides, PlanSettings, Predictor,
};
use ecas_core::planner::{parse_route_csv, route_to_csv, Termination};
use ecas_core::prediction::{aggregate, metrics_csv, train_desk_scale, Hyper, SrLstmModel, TrainingConfig};
use ecas_core::scenario::{load_trajectory_dataset, parse_scenario, Scenario};
use ecas_core::viz::{export_pgm, overlay_route, ColorScale, Layer, Overlay, RenderSpec};
use ecas_core::Execution;

const BUNDLED: &[(&str, &str)] = &[
    ("empty_corridor", include_str!("../scenarios/empty_corridor.json")),
    ("parallel_moving", include_str!("../scenarios/parallel_moving.json")),
    ("crossing_moving", include_str!("../scenarios/crossing_moving.json")),
];

/// Pedestrian-aware route planning for e-scooters.
#[derive(Parser)]
#[command(name = "ecas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict trajectories on a dataset and score them with MAD/FAD.
    Predict(PredictArgs),
    /// Plan a route through a scenario.
    Plan(PlanArgs),
    /// Render a surface (and optionally a route) as PGM and SVG.
    Render(RenderArgs),
    /// Train the recurrent predictor and write a checkpoint.
    Train(TrainArgs),
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Cv,
    Srlstm,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "cv")]
    model: ModelKind,
    /// Checkpoint for `--model srlstm`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    obs: usize,
    #[arg(long, default_value_t = 12)]
    pred: usize,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
}

impl ModelArgs {
    fn predictor(&self) -> Result<Predictor> {
        match (self.model, &self.checkpoint) {
            (ModelKind::Cv, _) => Ok(Predictor::ConstantVelocity),
            (ModelKind::Srlstm, None) => bail!("--model srlstm requires --checkpoint"),
            (ModelKind::Srlstm, Some(path)) => {
                let text = read(path)?;
                let model =
                    SrLstmModel::from_checkpoint(&text).with_context(|| format!("loading {}", path.display()))?;
                Ok(Predictor::SrLstm(Box::new(model)))
            }
        }
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    /// Whitespace-separated `frame_id ped_id x y` file.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Seconds between consecutive frames.
    #[arg(long, default_value_t = 0.4)]
    frame_interval: f64,
    /// Output prefix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    qstar: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    step_cap: Option<f64>,
    #[arg(long)]
    goal_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    Total,
    Attractive,
    Repulsive,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    surface: PathBuf,
    #[arg(long)]
    route: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "log")]
    scale: ScaleArg,
    /// Energy ceiling for the color map.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long, value_enum, default_value = "total")]
    layer: LayerArg,
    /// Output prefix; writes PREFIX.pgm and PREFIX.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    frame_interval: f64,
    #[arg(long, default_value_t = 8)]
    obs: usize,
    #[arg(long, default_value_t = 12)]
    pred: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 8)]
    embed: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path to write.
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    let text = if path.exists() {
        read(path)?
    } else if let Some((_, text)) = BUNDLED.iter().find(|(name, _)| *name == arg) {
        (*text).to_string()
    } else {
        bail!("no scenario file or bundled scenario named {arg:?}");
    };
    parse_scenario(&text).with_context(|| format!("scenario {arg}"))
}

fn cmd_predict(args: &PredictArgs) -> Result<ExitCode> {
    let predictor = args.model.predictor()?;
    let load = load_trajectory_dataset(&read(&args.dataset)?, args.frame_interval)?;
    let eval = evaluate_tracks(
        &load.tracks,
        &predictor,
        args.model.obs,
        args.model.pred,
        args.model.exec(),
    )?;
    write(
        &with_suffix(&args.out, "_predictions.csv"),
        &predictions_to_csv(&eval.histories, &eval.predictions),
    )?;
    write(&with_suffix(&args.out, "_metrics.csv"), &metrics_csv(&eval.rows))?;
    println!(
        "tracks evaluated: {} (skipped {}, dropped {})",
        eval.rows.len(),
        eval.skipped,
        load.dropped_short
    );
    match aggregate(&eval.rows) {
        Some((m, f)) => println!("MAD {m:.4} m, FAD {f:.4} m"),
        None => println!(
            "no track long enough for obs {} + pred {}",
            args.model.obs, args.model.pred
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(args: &PlanArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(&args.scenario)?;
    let overrides = ParamOverrides {
        resolution: args.resolution,
        h: args.h,
        alpha: args.alpha,
        q_star: args.qstar,
        delta: args.delta,
        gamma: args.gamma,
        step_cap: args.step_cap,
        goal_tolerance: args.goal_tol,
        max_iterations: args.max_iter,
        seed: args.seed,
    };
    overrides.apply(&mut scenario).context("applying parameter overrides")?;
    let settings = PlanSettings {
        predictor: args.model.predictor()?,
        obs_len: args.model.obs,
        pred_len: args.model.pred,
        exec: args.model.exec(),
    };
    let outcome = run_plan(&scenario, &settings)?;
    write(
        &with_suffix(&args.out, "_route.csv"),
        &route_to_csv(&outcome.route, scenario.goal),
    )?;
    write(
        &with_suffix(&args.out, "_surface.csv"),
        &surface_to_csv(&outcome.surface),
    )?;
    write(
        &with_suffix(&args.out, "_predictions.csv"),
        &predictions_to_csv(&scenario.pedestrians, &outcome.predictions),
    )?;
    let report = serde_json::to_string_pretty(&outcome.report)?;
    write(&with_suffix(&args.out, "_report.json"), &report)?;

    let r = &outcome.report.route;
    let clearance = r.min_clearance.map_or("n/a".to_string(), |c| format!("{c:.3} m"));
    println!(
        "{}: {} after {} steps, length {:.2} m, {} perturbation(s), min clearance {}",
        outcome.report.scenario, r.termination, r.steps, r.length, r.perturbation_count, clearance
    );
    Ok(match outcome.route.termination {
        Termination::GoalReached => ExitCode::SUCCESS,
        Termination::MaxIterations => ExitCode::from(2),
    })
}

fn cmd_render(args: &RenderArgs) -> Result<ExitCode> {
    let surface =
        parse_surface_csv(&read(&args.surface)?).with_context(|| format!("surface {}", args.surface.display()))?;
    let spec = RenderSpec {
        color_scale: match args.scale {
            ScaleArg::Linear => ColorScale::Linear,
            ScaleArg::Log => ColorScale::Log,
        },
        value_clip: args.clip,
        layer: match args.layer {
            LayerArg::Total => Layer::Total,
            LayerArg::Attractive => Layer::Attractive,
            LayerArg::Repulsive => Layer::Repulsive,
        },
        ..RenderSpec::default()
    };
    let pgm = export_pgm(&surface, &spec)?;
    let preds = match &args.predictions {
        Some(p) => parse_predictions_csv(&read(p)?)?,
        None => Default::default(),
    };
    let svg = match &args.route {
        Some(path) => {
            let file = parse_route_csv(&read(path)?).with_context(|| format!("route {}", path.display()))?;
            let Some(first) = file.route.waypoints.first() else {
                bail!("route {} has no waypoints", path.display());
            };
            let start = first.position;
            let goal = file
                .goal
                .unwrap_or_else(|| file.route.waypoints.last().map_or(start, |w| w.position));
            let overlay = Overlay {
                route: &file.route,
                start,
                goal,
                predictions: &preds.predictions,
                observed: &preds.observed,
            };
            overlay_route(&surface, &overlay, &spec).context("route does not fit the surface grid")?
        }
        None => ecas_core::viz::export_svg(&surface, &spec)?,
    };
    write(&with_suffix(&args.out, ".pgm"), &pgm)?;
    write(&with_suffix(&args.out, ".svg"), &svg)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let load = load_trajectory_dataset(&read(&args.dataset)?, args.frame_interval)?;
    let hyper = Hyper {
        hidden: args.hidden,
        embed: args.embed,
        ..Hyper::default()
    };
    let init = SrLstmModel::new(hyper, args.seed)?;
    let config = TrainingConfig {
        epochs: args.epochs,
        batch: args.batch,
        lr: args.lr,
        obs_len: args.obs,
        pred_len: args.pred,
    };
    let outcome = train_desk_scale(&init, &load.tracks, config)?;
    write(&args.out, &outcome.model.to_checkpoint())?;
    println!(
        "trained on {} sample(s) (skipped {}); final loss {}",
        outcome.samples_used,
        outcome.skipped,
        outcome
            .loss_trace
            .last()
            .map_or("n/a".to_string(), |l| format!("{l:.6} m^2"))
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Predict(a) => cmd_predict(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Render(a) => cmd_render(a),
        Command::Train(a) => cmd_train(a),
        Command::Scenarios => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECAS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
