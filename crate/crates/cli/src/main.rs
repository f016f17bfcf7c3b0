use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hvrp_core::bench::{run_experiment, write_report_csv, Suite};
use hvrp_core::clrp::{clrp_solve, io::load_clrp};
use hvrp_core::cvrp::{solve_heuristic, SolverConfig};
use hvrp_core::datagen::{
    load_dataset, phase1, phase2, phase3, to_graphs, write_dataset, BootstrapConfig, PhaseConfig,
};
use hvrp_core::estimators::{
    daganzo_estimate, figliozzi_estimate, CostEstimator, DaganzoEstimator, FigliozziParams,
};
use hvrp_core::ga::{solve_mdvrp, GaConfig, PipelineConfig};
use hvrp_core::instances::{
    generate_cvrp, generate_mdvrp, load_cvrp, load_mdvrp, write_cvrp, write_mdvrp, InstanceSpec,
};
use hvrp_core::nn::{
    load_checkpoint, save_checkpoint, train, ModelConfig, NnEstimator, PredictorModel, TrainConfig,
};

/// Hierarchical vehicle routing: generators, solvers, training, and
/// benchmarks.
#[derive(Parser)]
#[command(name = "hvrp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it to a file.
    Generate(GenerateArgs),
    /// Solve a single-depot instance with the built-in heuristic.
    CvrpSolve(CvrpSolveArgs),
    /// Estimate a single-depot instance's routing cost.
    Estimate(EstimateArgs),
    /// Generate labeled training data.
    Datagen(DatagenArgs),
    /// Train the cost predictor.
    Train(TrainArgs),
    /// Solve a multi-depot or location-routing instance end to end.
    Solve(SolveArgs),
    /// Run an experiment suite and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cvrp,
    Mdvrp,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "100")]
    n: usize,
    #[arg(long, default_value = "2")]
    depots: usize,
    #[arg(long, default_value = "R")]
    positioning: String,
    #[arg(long, default_value = "uniform")]
    demand: String,
    #[arg(long, default_value = "1000")]
    grid: u32,
    #[arg(long, default_value = "300")]
    capacity: u32,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, value_enum, default_value = "mdvrp")]
    kind: Kind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvrpSolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "1.0")]
    time_limit: f64,
    /// Iteration budget; replaces the wall clock for reproducible runs.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// daganzo | figliozzi | nn
    #[arg(long)]
    method: String,
    #[arg(long = "in")]
    input: PathBuf,
    /// Checkpoint for the nn method.
    #[arg(long)]
    nn: Option<PathBuf>,
    /// a1,a2,a3 for the figliozzi method.
    #[arg(long)]
    params: Option<String>,
    /// Shape constant k for the daganzo method.
    #[arg(long, default_value = "1.0")]
    shape_k: f64,
    /// Customers-per-vehicle constant for the daganzo method.
    #[arg(long, default_value = "6.52")]
    customers_per_vehicle: f64,
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long)]
    phase: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "2000")]
    count: usize,
    #[arg(long, default_value = "10")]
    min_n: usize,
    #[arg(long, default_value = "60")]
    max_n: usize,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, default_value = "60000")]
    label_budget: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    phase: u8,
    /// Dataset directory (read for phases 1/2, written for phase 3).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "30")]
    epochs: usize,
    #[arg(long, default_value = "1e-3")]
    lr: f64,
    #[arg(long, default_value = "64")]
    batch_size: usize,
    #[arg(long, default_value = "32")]
    hidden: usize,
    #[arg(long, default_value = "4")]
    heads: usize,
    #[arg(long, default_value = "2")]
    layers: usize,
    #[arg(long, default_value = "10")]
    knn: usize,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Phase-3 only: records to generate.
    #[arg(long, default_value = "2000")]
    count: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Predictor checkpoint; without it the analytical estimator is used.
    #[arg(long)]
    nn: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// JSON file with a pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mdvrp | clrp
    #[arg(long, default_value = "mdvrp")]
    mode: String,
    /// Use wall-clock limits instead of deterministic budgets.
    #[arg(long)]
    wall_clock: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// T | O | D1..D8 | cordeau | barreto
    #[arg(long)]
    suite: String,
    #[arg(long, default_value = "10")]
    repeats: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    nn: Option<PathBuf>,
    #[arg(long, default_value = "5")]
    instances: usize,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    seed: u64,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn estimator_from(nn: &Option<PathBuf>) -> Result<Box<dyn CostEstimator>> {
    match nn {
        Some(path) => {
            let model = load_checkpoint(path).context("loading checkpoint")?;
            Ok(Box::new(NnEstimator::new(model)))
        }
        None => {
            eprintln!("no checkpoint given; falling back to the analytical estimator");
            Ok(Box::new(DaganzoEstimator::default()))
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => {
            let spec = InstanceSpec {
                customers: args.n..=args.n,
                depots: args.depots..=args.depots,
                positioning: args.positioning.parse()?,
                demand: args.demand.parse()?,
                grid_size: args.grid,
                vehicle_capacity: args.capacity,
                cluster_decay: 40.0,
                seed: args.seed,
            };
            match args.kind {
                Kind::Cvrp => write_cvrp(&generate_cvrp(&spec, args.seed)?, &args.out)?,
                Kind::Mdvrp => write_mdvrp(&generate_mdvrp(&spec, args.seed)?, &args.out)?,
            }
            eprintln!("wrote {}", args.out.display());
        }
        Command::CvrpSolve(args) => {
            let inst = load_cvrp(&args.input)?;
            let cfg = SolverConfig {
                time_limit: args.time_limit,
                iteration_budget: args.iterations,
                seed: args.seed,
                ..SolverConfig::default()
            };
            let res = solve_heuristic(&inst, &cfg)?;
            eprintln!(
                "cost {:.4} with {} routes in {:.3}s",
                res.cost,
                res.routes.len(),
                res.elapsed
            );
            let json = serde_json::to_string_pretty(&res)?;
            match args.out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
        }
        Command::Estimate(args) => {
            let inst = load_cvrp(&args.input)?;
            let value = match args.method.as_str() {
                "daganzo" => daganzo_estimate(&inst, args.shape_k, args.customers_per_vehicle)?,
                "figliozzi" => {
                    let raw = args
                        .params
                        .context("figliozzi needs --params a1,a2,a3")?;
                    let parts: Vec<f64> = raw
                        .split(',')
                        .map(|p| p.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .context("parsing --params")?;
                    if parts.len() != 3 {
                        bail!("--params needs exactly three values");
                    }
                    let params = FigliozziParams {
                        a1: parts[0],
                        a2: parts[1],
                        a3: parts[2],
                    };
                    figliozzi_estimate(&inst, &params, None)?
                }
                "nn" => {
                    let path = args.nn.context("nn method needs --nn checkpoint")?;
                    let model = load_checkpoint(&path)?;
                    let est = NnEstimator::new(model);
                    est.estimate_batch(std::slice::from_ref(&inst))[0]
                }
                other => bail!("unknown method '{other}'"),
            };
            println!("{value}");
        }
        Command::Datagen(args) => {
            let cfg = PhaseConfig {
                count: args.count,
                size_range: args.min_n..=args.max_n,
                label_budget: args.label_budget,
                ..PhaseConfig::desk(args.seed)
            };
            let records = match args.phase {
                1 => phase1(&cfg)?,
                2 => phase2(&cfg)?,
                3 => {
                    let boot = BootstrapConfig::desk(args.seed);
                    let (records, model) = phase3(&cfg, &boot)?;
                    let ckpt = args.out.join("bootstrap.ckpt.json");
                    std::fs::create_dir_all(&args.out)?;
                    save_checkpoint(&model, &ckpt)?;
                    eprintln!("wrote bootstrap checkpoint {}", ckpt.display());
                    records
                }
                other => bail!("unknown phase {other}"),
            };
            write_dataset(&args.out, args.phase, &cfg, &records)?;
            eprintln!("wrote {} records to {}", records.len(), args.out.display());
        }
        Command::Train(args) => {
            let model_cfg = ModelConfig {
                hidden_dim: args.hidden,
                heads: args.heads,
                layers: args.layers,
                knn_k: args.knn,
            };
            let train_cfg = TrainConfig {
                learning_rate: args.lr,
                batch_size: args.batch_size,
                epochs: args.epochs,
                validation_split: 0.2,
                seed: args.seed,
            };
            let model = match args.phase {
                1 | 2 => {
                    let records = load_dataset(&args.data)
                        .context("loading dataset (run `hvrp datagen` first)")?;
                    let graphs = to_graphs(&records, model_cfg.knn_k);
                    let mut model = PredictorModel::new(&model_cfg, args.seed)?;
                    let history = train(&mut model, &graphs, &train_cfg)?;
                    for (epoch, (tl, vl)) in history
                        .train_loss
                        .iter()
                        .zip(&history.val_loss)
                        .enumerate()
                    {
                        eprintln!("epoch {epoch:3}  train {tl:.2}  val {vl:.2}");
                    }
                    eprintln!("best epoch {}", history.best_epoch);
                    model
                }
                3 => {
                    let cfg = PhaseConfig {
                        count: args.count,
                        ..PhaseConfig::desk(args.seed)
                    };
                    let boot = BootstrapConfig {
                        model: model_cfg,
                        train: train_cfg,
                        ..BootstrapConfig::desk(args.seed)
                    };
                    let (records, model) = phase3(&cfg, &boot)?;
                    write_dataset(&args.data, 3, &cfg, &records)?;
                    model
                }
                other => bail!("unknown phase {other}"),
            };
            save_checkpoint(&model, &args.out)?;
            eprintln!("wrote checkpoint {}", args.out.display());
        }
        Command::Solve(args) => {
            let estimator = estimator_from(&args.nn)?;
            let mut cfg: PipelineConfig = match &args.config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => PipelineConfig {
                    ga: GaConfig::default(),
                    deterministic: true,
                    solver_time_factor: 1.0,
                },
            };
            cfg.ga.seed = args.seed;
            if args.wall_clock {
                cfg.deterministic = false;
            }
            let started = Instant::now();
            let json = match args.mode.as_str() {
                "mdvrp" => {
                    let inst = load_mdvrp(&args.input)?;
                    let result = solve_mdvrp(&inst, estimator.as_ref(), &cfg)?;
                    eprintln!(
                        "predicted {:.2} actual {:.2} in {:.2}s ({} generations)",
                        result.predicted_cost,
                        result.actual_cost,
                        started.elapsed().as_secs_f64(),
                        result.generations
                    );
                    serde_json::to_string_pretty(&result)?
                }
                "clrp" => {
                    let inst = load_clrp(&args.input)?;
                    let result = clrp_solve(&inst, estimator.as_ref(), &cfg)?;
                    eprintln!(
                        "predicted {:.2} actual {:.2} ({} depots open) in {:.2}s",
                        result.predicted_cost,
                        result.actual_cost,
                        result.chromosome.open.iter().filter(|&&o| o).count(),
                        started.elapsed().as_secs_f64(),
                    );
                    serde_json::to_string_pretty(&result)?
                }
                other => bail!("unknown mode '{other}'"),
            };
            match args.out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
        }
        Command::Bench(args) => {
            let suite: Suite = args.suite.parse()?;
            let estimator = estimator_from(&args.nn)?;
            let cfg = hvrp_core::bench::ExperimentConfig {
                instances: args.instances,
                data_dir: args.data_dir,
                seed: args.seed,
                ..Default::default()
            };
            let report = run_experiment(suite, args.repeats, &cfg, estimator.as_ref())?;
            write_report_csv(&report, &args.out)?;
            if let Some(json) = args.json {
                std::fs::write(json, serde_json::to_string_pretty(&report)?)?;
            }
            eprintln!(
                "{} rows, {} instances -> {}",
                report.rows.len(),
                report.summary.len(),
                args.out.display()
            );
        }
    }
    Ok(())
}
