mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdnav::config::RunConfig;
use crowdnav::eval::{
    self, baseline, evaluate, Controller, LearnedController, SvgOptions, BASELINES,
};
use crowdnav::net::load_checkpoint;
use crowdnav::ppo::{self, Trainer};
use crowdnav::sim::{generate_scenario, Trajectory};
use crowdnav::Error;

use manifest::RunManifest;

const RUNS_DIR_ENV: &str = "CROWDNAV_RUNS_DIR";

#[derive(Parser)]
#[command(
    name = "crowdnav",
    version,
    about = "Train and evaluate crowd navigation policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO into a run directory.
    Train {
        /// Composite TOML config; defaults apply to anything omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory. Defaults to `$CROWDNAV_RUNS_DIR/<name>`.
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Run name used under the runs root.
        #[arg(long, default_value = "run")]
        name: String,
        /// Continue from the latest checkpoint of an existing run.
        #[arg(long)]
        resume: bool,
        /// Override a config field, e.g. `--set ppo.lr=1e-4`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Evaluate a checkpoint, run directory or baseline on a suite.
    Eval {
        /// Checkpoint file, run directory, or one of the baselines.
        #[arg(long)]
        policy: String,
        /// Evaluation suite, or `train` for a run's own training scenario.
        #[arg(long, default_value = "fov-360")]
        suite: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export CSV and SVG for the first K episodes.
        #[arg(long, default_value_t = 0)]
        trajectories: usize,
        /// Exit with status 3 if the success rate falls below this.
        #[arg(long)]
        min_success: Option<f64>,
    },
    /// Draw a trajectory CSV as SVG.
    Render {
        csv: PathBuf,
        out: PathBuf,
        /// Draw a field-of-view wedge of this many degrees.
        #[arg(long)]
        fov: Option<f64>,
    },
    /// Print the scenario generated for a seed as JSON.
    Scenario {
        #[arg(long, default_value = "fov-360")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the scenario section from a config file instead of a suite.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const TRAIN_SUITE: &str = "train";

enum Failure {
    User(String),
    Internal(String),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::Config { .. }
            | Error::Checkpoint { .. }
            | Error::Csv { .. }
            | Error::Io(_)
            | Error::Shape { .. }
            | Error::ScenarioGeneration { .. } => Failure::User(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            run_dir,
            name,
            resume,
            overrides,
            quiet,
        } => {
            let dir = run_dir.unwrap_or_else(|| runs_root().join(&name));
            cmd_train(config.as_deref(), &dir, resume, &overrides, quiet)
        }
        Command::Eval {
            policy,
            suite,
            n,
            seed_base,
            out,
            trajectories,
            min_success,
        } => cmd_eval(
            &policy,
            &suite,
            n,
            seed_base,
            out,
            trajectories,
            min_success,
        ),
        Command::Render { csv, out, fov } => cmd_render(&csv, &out, fov),
        Command::Scenario {
            suite,
            seed,
            config,
        } => cmd_scenario(&suite, seed, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("threshold not met: {msg}");
            ExitCode::from(3)
        }
    }
}

fn cmd_train(
    config_path: Option<&Path>,
    dir: &Path,
    resume: bool,
    overrides: &[String],
    quiet: bool,
) -> Result<(), Failure> {
    let mut trainer = if resume {
        if config_path.is_some() || !overrides.is_empty() {
            return Err(Failure::User(
                "a resumed run keeps its config snapshot; drop --config and --set".into(),
            ));
        }
        let mut manifest = RunManifest::load(dir)?;
        manifest.refresh_checkpoints(dir)?;
        let latest = manifest
            .latest()
            .ok_or_else(|| Failure::User(format!("run {} has no checkpoints", dir.display())))?;
        let ckpt = load_checkpoint(&dir.join(&latest.path))?;
        let trainer = Trainer::from_checkpoint(ckpt, Some(&manifest.config.network))?;
        if !quiet {
            eprintln!(
                "resuming {} at update {}",
                manifest.run_id, trainer.update_idx
            );
        }
        trainer
    } else {
        let base = match config_path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let config = base.with_overrides(overrides)?;
        if dir.join(manifest::MANIFEST_FILE).exists() {
            return Err(Failure::User(format!(
                "{} already holds a run; pass --resume or choose another directory",
                dir.display()
            )));
        }
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        let run_id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let manifest = RunManifest::new(&run_id, config.clone());
        manifest.save(dir)?;
        let mut trainer = Trainer::new(
            &config.scenario,
            &config.network,
            &config.ppo,
            config.train.seed,
        )?;
        trainer.run_info =
            serde_json::json!({ "run_id": run_id, "manifest": manifest::MANIFEST_FILE });
        trainer
    };

    let mut manifest = RunManifest::load(dir)?;
    let every = manifest.config.train.checkpoint_every;
    let total = trainer.total_updates();
    let result = ppo::train(&mut trainer, dir, every, |m| {
        if !quiet {
            eprintln!(
                "update {}/{} steps {} reward {:.3} success {:.3} policy {:.4} value {:.4}",
                m.update_idx + 1,
                total,
                m.env_steps,
                m.mean_reward,
                m.success_rate,
                m.policy_loss,
                m.value_loss
            );
        }
    });
    manifest.refresh_checkpoints(dir)?;
    manifest.save(dir)?;
    result?;
    if !quiet {
        eprintln!(
            "finished {} updates in {}",
            trainer.update_idx,
            dir.display()
        );
    }
    Ok(())
}

fn load_policy(policy: &str) -> Result<(Box<dyn Controller>, Option<PathBuf>), Failure> {
    let path = Path::new(policy);
    if path.is_dir() {
        let mut manifest = RunManifest::load(path)?;
        manifest.refresh_checkpoints(path)?;
        let latest = manifest
            .latest()
            .ok_or_else(|| Failure::User(format!("run {} has no checkpoints", path.display())))?;
        let ckpt = load_checkpoint(&path.join(&latest.path))?;
        let label = format!("{}@{}", manifest.run_id, latest.update_idx);
        return Ok((
            Box::new(LearnedController::new(ckpt.params, label)),
            Some(path.to_path_buf()),
        ));
    }
    if path.is_file() {
        let ckpt = load_checkpoint(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "policy".into());
        return Ok((Box::new(LearnedController::new(ckpt.params, label)), None));
    }
    if !BASELINES.contains(&policy) && (policy.contains('/') || policy.contains('.')) {
        return Err(Failure::User(format!(
            "no checkpoint or run directory at {policy}"
        )));
    }
    Ok((baseline(policy)?, None))
}

fn cmd_eval(
    policy: &str,
    suite_name: &str,
    n: usize,
    seed_base: u64,
    out: Option<PathBuf>,
    trajectories: usize,
    min_success: Option<f64>,
) -> Result<(), Failure> {
    let (mut controller, run_dir) = load_policy(policy)?;
    if n == 0 {
        return Err(Failure::User("--n must be at least 1".into()));
    }
    let config = match (suite_name, &run_dir) {
        (TRAIN_SUITE, Some(dir)) => RunManifest::load(dir)?.config.scenario,
        (TRAIN_SUITE, None) => {
            return Err(Failure::User(format!(
                "--suite {TRAIN_SUITE} needs a run directory as --policy"
            )))
        }
        _ => eval::suite(suite_name)?,
    };
    let (report, _) = evaluate(
        controller.as_mut(),
        &config,
        suite_name,
        n,
        seed_base,
        false,
    )?;
    let out = out.unwrap_or_else(|| match &run_dir {
        Some(d) => d.join("eval").join(suite_name),
        None => runs_root()
            .join("eval")
            .join(format!("{}-{suite_name}", controller.name())),
    });
    report.save(&out)?;
    for seed in seed_base..seed_base + trajectories.min(n) as u64 {
        let trace = eval::run_episode(controller.as_mut(), &config, seed, true)?;
        let stem = out.join("trajectories").join(format!("episode_{seed}"));
        std::fs::create_dir_all(stem.parent().unwrap()).map_err(Error::from)?;
        eval::export_trajectory(&trace.trajectory, &trace.svg_options(), &stem)?;
    }
    println!("{}", crowdnav::eval::EvalReport::TABLE_HEADER);
    println!("{}", report.table_row());
    if let Some(min) = min_success {
        if report.success_rate < min {
            return Err(Failure::Threshold(format!(
                "success rate {:.4} below {min}",
                report.success_rate
            )));
        }
    }
    Ok(())
}

fn cmd_render(csv: &Path, out: &Path, fov: Option<f64>) -> Result<(), Failure> {
    let traj = Trajectory::load_csv(csv)?;
    let opts = SvgOptions {
        fov_deg: fov,
        ..SvgOptions::default()
    };
    std::fs::write(out, eval::trajectory_svg(&traj, &opts)).map_err(Error::from)?;
    Ok(())
}

fn cmd_scenario(suite_name: &str, seed: u64, config: Option<&Path>) -> Result<(), Failure> {
    let scenario = match config {
        Some(p) => RunConfig::load(p)?.scenario,
        None => eval::suite(suite_name)?,
    };
    let world = generate_scenario(&scenario, seed)?;
    let text =
        serde_json::to_string_pretty(&world).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}
