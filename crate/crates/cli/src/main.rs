use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arc_core::agents::{Actor, ScriptedExpert};
use arc_core::env::{generate_expert_dataset, write_trajectories_csv};
use arc_core::harness::{evaluate_policy, load_policy, parse_config, run_experiment, ExperimentConfig, Task};
use arc_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arc", version, about = "Actor residual critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config. Optional where the subcommand implies the task.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for artifacts; each experiment writes to <out>/<config_hash>.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the first seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Policy iteration with C and with Q on the grid world.
    Tabular(Common),
    /// Adversarial imitation or behavior cloning on car1d, planar_reach or planar_push.
    Train(Common),
    /// Evaluate a saved policy, or the scripted expert when no checkpoint is given.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Value and action-gradient error of Q-hat versus r + C-hat on Car1D.
    GradAccuracy(Common),
    /// Closed-form against simulated SNR of the r + C gradient.
    Snr(Common),
    /// Accurate approximations with arbitrarily wrong derivatives.
    Theorem2(Common),
    /// Write scripted-expert trajectories as CSV.
    ExpertGen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        trajectories: usize,
    },
}

fn load(common: &Common, default_task: Task, allowed: &[Task]) -> arc_core::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::from_value(serde_json::json!({ "task": default_task }))?,
    };
    if !allowed.contains(&config.task) {
        let names: Vec<&str> = allowed.iter().map(|t| t.name()).collect();
        return Err(Error::Config {
            field: "task".into(),
            message: format!("`{}` is not valid here; expected one of {}", config.task.name(), names.join(", ")),
        });
    }
    if let Some(seed) = common.seed {
        config.seeds[0] = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(common: &Common, default_task: Task, allowed: &[Task]) -> arc_core::Result<()> {
    let config = load(common, default_task, allowed)?;
    let output = run_experiment(&config, &common.out)?;
    log::info!("artifacts in {}", output.dir.display());
    println!("{}", serde_json::to_string_pretty(&output.summary)?);
    Ok(())
}

const TRAINING: [Task; 3] = [Task::Car1d, Task::PlanarReach, Task::PlanarPush];

fn eval(common: &Common, checkpoint: Option<&Path>) -> arc_core::Result<()> {
    let config = load(common, Task::PlanarReach, &TRAINING)?;
    let env_kind = config.task.env().expect("training task");
    let actor: Box<dyn Actor> = match checkpoint {
        Some(path) => Box::new(load_policy(path)?),
        None => Box::new(ScriptedExpert(env_kind)),
    };
    let mut env = env_kind.make();
    let seed = config.seeds[0];
    let (mean, std) = evaluate_policy(actor.as_ref(), env.as_mut(), config.eval_episodes, seed)?;
    let report = serde_json::json!({
        "task": config.task,
        "policy": checkpoint.map_or("scripted_expert".to_string(), |p| p.display().to_string()),
        "episodes": config.eval_episodes,
        "seed": seed,
        "mean_return": mean,
        "std_return": std,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn expert_gen(common: &Common, trajectories: usize) -> arc_core::Result<()> {
    let config = load(common, Task::PlanarReach, &TRAINING)?;
    if trajectories == 0 {
        return Err(Error::Config {
            field: "trajectories".into(),
            message: "must be positive".into(),
        });
    }
    let seed = config.seeds[0];
    let data = generate_expert_dataset(config.task.env().expect("training task"), trajectories, seed)?;
    std::fs::create_dir_all(&common.out)?;
    let path = common.out.join(format!("expert_{}_seed_{seed}.csv", config.task.name()));
    write_trajectories_csv(&data, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    println!("{}", path.display());
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::NonFinite(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tabular(c) => run(c, Task::GridworldPi, &[Task::GridworldPi]),
        Command::Train(c) => run(c, Task::PlanarReach, &TRAINING),
        Command::Eval { common, checkpoint } => eval(common, checkpoint.as_deref()),
        Command::GradAccuracy(c) => run(c, Task::GradAccuracy, &[Task::GradAccuracy]),
        Command::Snr(c) => run(c, Task::Snr, &[Task::Snr]),
        Command::Theorem2(c) => run(c, Task::Theorem2, &[Task::Theorem2]),
        Command::ExpertGen { common, trajectories } => expert_gen(common, *trajectories),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
