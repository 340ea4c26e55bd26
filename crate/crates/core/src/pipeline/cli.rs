//! Command-line entry point.
//!
//! Every command resolves its settings from defaults, an optional
//! `--config` file and flags, writes them to `manifest.txt` in its output
//! directory, and can be repeated exactly with `lhz rerun <manifest>`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::chart::{Chart, Series};
use super::config::Settings;
use super::{
    bc_train, evaluate, mean_stderr, split_heldout, subgoal_trace, BaselineKind, EvalOptions, TrainConfig,
    TrainedModel,
};
use crate::envs::{generate_dataset, load_dataset, write_dataset, Dataset, EnvKind};
use crate::error::Error;
use crate::explorer::{overall_loop_with, Baseline, ExploreConfig, PpoConfig};
use crate::objective::{sequence_nll, ObjectiveConfig};
use crate::planner::{default_reward, mpc_episode, PlanConfig};
use crate::seqmodel::{DecodeMode, ModelConfig, SeqModel};
use crate::trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingFile(_) | Error::Config(_) => CliError::Usage(e.to_string()),
            e => CliError::Run(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lhz", version, about = "Train, evaluate and plan with long-horizon latent sequence models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// File of `key=value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate expert demonstrations.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Behavioral cloning on a dataset.
    Train(TrainArgs),
    /// Roll a trained model out and score it on held-out data.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Latent-space MPC episodes.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Alternate MPC, exploration and model training.
    Explore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Auxiliary cost along one episode, with subgoal events.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Importance-weighted negative log-likelihood of a dataset.
    Nll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Output directory, instead of the manifest's.
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    kl_start: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    obs_log_std_min: Option<f64>,
}

macro_rules! flags {
    ($($name:ident),* $(,)?) => {
        vec![$((stringify!($name), $name.as_ref().map(|v| v.to_string()))),*]
    };
}

const OBJECTIVE_DEFAULTS: &[(&str, &str)] = &[
    ("beta", "0.0005"),
    ("kl_start", "0.2"),
    ("kl_increment", "0.0005"),
    ("kl_cap", "1"),
    ("lr", "0.001"),
    ("chunk_len", "250"),
];

const MODEL_DEFAULTS: &[(&str, &str)] = &[
    ("hidden_dim", "32"),
    ("latent_dim", "8"),
    ("backward_hidden_dim", "32"),
    ("decoder_hidden", "32"),
    ("obs_log_std_min", "-8"),
];

/// Default settings of `command`.
pub fn defaults(command: &str) -> Option<Vec<(&'static str, &'static str)>> {
    let own: &[(&str, &str)] = match command {
        "gen-data" => &[("env", "grid"), ("n", "500"), ("seed", "1")],
        "train" => &[
            ("data", ""),
            ("kind", "full_model"),
            ("epochs", "10"),
            ("batch_size", "16"),
            ("seed", "0"),
            ("split", "heldout"),
        ],
        "eval" => &[
            ("model", ""),
            ("env", "grid"),
            ("data", ""),
            ("split", "heldout"),
            ("episodes", "50"),
            ("seed", "10000"),
            ("mode", "mode"),
            ("nll_samples", "100"),
        ],
        "plan" => &[
            ("model", ""),
            ("env", "points"),
            ("m", "256"),
            ("k", "5"),
            ("horizon", ""),
            ("episodes", "20"),
            ("seed", "10000"),
            ("episode_len", "200"),
            ("mode", "mode"),
        ],
        "explore" => &[
            ("env", "points"),
            ("model", ""),
            ("iterations", "10"),
            ("seed", "0"),
            ("checkpoint_every", "0"),
            ("warmup_trajectories", "50"),
            ("warmup_steps", "50"),
            ("trajectories", "8"),
            ("max_exploration_len", "64"),
            ("buffer_capacity", "1000"),
            ("model_steps", "10"),
            ("batch_size", "8"),
            ("fresh_fraction", "0.5"),
            ("policy_hidden_dim", "32"),
            ("policy_lr", "0.0003"),
            ("episode_len", "200"),
            ("m", "256"),
            ("k", "5"),
            ("horizon", ""),
            ("mode", "mode"),
            ("clip_ratio", "0.2"),
            ("ppo_epochs", "4"),
            ("minibatch_size", "4"),
            ("entropy_weight", "0.01"),
            ("baseline", "mean"),
        ],
        "trace" => &[("model", ""), ("env", "grid"), ("seed", "20000"), ("mode", "mode")],
        "nll" => &[("model", ""), ("data", ""), ("split", "heldout"), ("samples", "100"), ("seed", "0")],
        _ => return None,
    };
    let mut all: Vec<(&str, &str)> = own.to_vec();
    if matches!(command, "train" | "explore") {
        all.extend_from_slice(OBJECTIVE_DEFAULTS);
        all.extend_from_slice(MODEL_DEFAULTS);
    }
    let out = match command {
        "gen-data" => "runs/gen-data",
        "train" => "runs/train",
        "eval" => "runs/eval",
        "plan" => "runs/plan",
        "explore" => "runs/explore",
        "trace" => "runs/trace",
        _ => "runs/nll",
    };
    all.push(("out", out));
    Some(all)
}

fn resolve(command: &str, file: Option<&Path>, flags: &[(&str, Option<String>)]) -> CliResult<Settings> {
    let d = defaults(command).ok_or_else(|| CliError::Usage(format!("unknown command `{command}`")))?;
    Ok(Settings::resolve(command, &d, file, flags)?)
}

/// Parses arguments, runs the command and returns the process exit status.
/// Normal output goes to `stdout`, the one-line diagnostic to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command).and_then(|s| execute(&s, stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// [`run`] on the process arguments and standard streams.
pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(command: Command) -> CliResult<Settings> {
    match command {
        Command::GenData { common, env, n, seed } => {
            let Common { config, out } = common;
            resolve("gen-data", config.as_deref(), &flags!(env, n, seed, out))
        }
        Command::Train(a) => {
            let TrainArgs {
                common: Common { config, out },
                data,
                kind,
                beta,
                kl_start,
                lr,
                epochs,
                seed,
                obs_log_std_min,
            } = a;
            resolve(
                "train",
                config.as_deref(),
                &flags!(data, kind, beta, kl_start, lr, epochs, seed, obs_log_std_min, out),
            )
        }
        Command::Eval {
            common: Common { config, out },
            model,
            env,
            data,
            episodes,
            seed,
            mode,
        } => resolve("eval", config.as_deref(), &flags!(model, env, data, episodes, seed, mode, out)),
        Command::Plan {
            common: Common { config, out },
            model,
            env,
            m,
            k,
            horizon,
            episodes,
            seed,
        } => resolve("plan", config.as_deref(), &flags!(model, env, m, k, horizon, episodes, seed, out)),
        Command::Explore {
            common: Common { config, out },
            env,
            model,
            iterations,
            seed,
            checkpoint_every,
        } => resolve(
            "explore",
            config.as_deref(),
            &flags!(env, model, iterations, seed, checkpoint_every, out),
        ),
        Command::Trace {
            common: Common { config, out },
            model,
            env,
            seed,
        } => resolve("trace", config.as_deref(), &flags!(model, env, seed, out)),
        Command::Nll {
            common: Common { config, out },
            model,
            data,
            samples,
            seed,
        } => resolve("nll", config.as_deref(), &flags!(model, data, samples, seed, out)),
        Command::Rerun { manifest, out } => {
            let text = std::fs::read_to_string(&manifest).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::from(Error::MissingFile(manifest.clone())),
                _ => CliError::from(e),
            })?;
            let command = Settings::manifest_command(&text)?;
            resolve(&command, Some(&manifest), &flags!(out))
        }
    }
}

fn execute(s: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let out = PathBuf::from(s.required("out")?);
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("manifest.txt"), s.manifest())?;
    match s.command() {
        "gen-data" => gen_data(s, &out, stdout),
        "train" => train(s, &out, stdout),
        "eval" => eval(s, &out, stdout),
        "plan" => plan(s, &out, stdout),
        "explore" => explore(s, &out, stdout),
        "trace" => trace(s, &out, stdout),
        "nll" => nll(s, &out, stdout),
        c => Err(CliError::Usage(format!("unknown command `{c}`"))),
    }
}

fn open(path: &str) -> CliResult<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(PathBuf::from(path)).into(),
        _ => e.into(),
    })
}

fn load_model(s: &Settings) -> CliResult<TrainedModel> {
    Ok(TrainedModel::load(std::io::BufReader::new(open(s.required("model")?)?))?)
}

fn save_model(model: &TrainedModel, path: &Path) -> CliResult<()> {
    model.save(&[], BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn decode_mode(s: &Settings) -> CliResult<DecodeMode> {
    match s.raw("mode")? {
        "mode" => Ok(DecodeMode::Mode),
        "sample" => Ok(DecodeMode::Sample),
        m => Err(CliError::Usage(format!("unknown mode `{m}`, expected mode or sample"))),
    }
}

/// The dataset at `data`, narrowed to the configured split.
fn split_data(s: &Settings, held_out_side: bool) -> CliResult<Dataset> {
    let mut data = load_dataset(Path::new(s.required("data")?))?;
    match s.raw("split")? {
        "all" => {}
        "heldout" => {
            let (train, held) = split_heldout(&data.episodes);
            data.episodes = if held_out_side { held } else { train };
        }
        x => return Err(CliError::Usage(format!("unknown split `{x}`, expected heldout or all"))),
    }
    Ok(data)
}

fn objective_config(s: &Settings) -> CliResult<ObjectiveConfig> {
    Ok(ObjectiveConfig {
        beta: s.get("beta")?,
        kl_start: s.get("kl_start")?,
        kl_increment: s.get("kl_increment")?,
        kl_cap: s.get("kl_cap")?,
        learning_rate: s.get("lr")?,
        chunk_len: s.get("chunk_len")?,
    })
}

fn plan_config(s: &mut Settings) -> CliResult<PlanConfig> {
    let k: usize = s.get("k")?;
    if s.raw("horizon")?.is_empty() {
        s.set("horizon", 2 * k);
    }
    let cfg = PlanConfig {
        m: s.get("m")?,
        horizon: s.get("horizon")?,
        k,
        action_mode: decode_mode(s)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_chart(path: &Path, chart: &Chart) -> CliResult<()> {
    std::fs::write(path, chart.to_svg())?;
    Ok(())
}

fn gen_data(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let mut env = EnvKind::parse(s.raw("env")?)?.make();
    let data = generate_dataset(env.as_mut(), s.get("n")?, s.get("seed")?)?;
    let path = out.join("data.txt");
    write_dataset(BufWriter::new(File::create(&path)?), &data)?;
    writeln!(stdout, "wrote {} trajectories to {}", data.len(), path.display())?;
    Ok(())
}

fn train(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let data = split_data(s, false)?;
    let cfg = TrainConfig {
        kind: BaselineKind::parse(s.raw("kind")?)?,
        hidden_dim: s.get("hidden_dim")?,
        latent_dim: s.get("latent_dim")?,
        backward_hidden_dim: s.get("backward_hidden_dim")?,
        decoder_hidden_dims: s.list("decoder_hidden")?,
        obs_log_std_min: s.get("obs_log_std_min")?,
        epochs: s.get("epochs")?,
        batch_size: s.get("batch_size")?,
        objective: objective_config(s)?,
        seed: s.get("seed")?,
    };
    let outcome = bc_train(&data, &cfg)?;
    save_model(&outcome.model, &out.join("model.ckpt"))?;
    let csv = outcome.metrics_csv();
    std::fs::write(out.join("metrics.csv"), &csv)?;
    let losses: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
        .collect();
    write_chart(
        &out.join("loss.svg"),
        &Chart::new(format!("{} training loss", cfg.kind.as_str()), "step", "loss")
            .with_series(Series::indexed("total", &losses, 0.0)),
    )?;
    writeln!(
        stdout,
        "trained {} for {} steps on {} trajectories; final loss {}",
        cfg.kind.as_str(),
        losses.len(),
        data.len(),
        losses.last().copied().unwrap_or(f64::NAN)
    )?;
    Ok(())
}

fn eval(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let model = load_model(s)?;
    let mut env = EnvKind::parse(s.raw("env")?)?.make();
    let heldout: Vec<Trajectory> = if s.raw("data")?.is_empty() {
        Vec::new()
    } else {
        split_data(s, true)?.episodes
    };
    let opts = EvalOptions {
        episodes: s.get("episodes")?,
        seed: s.get("seed")?,
        mode: decode_mode(s)?,
        nll_samples: s.get("nll_samples")?,
    };
    let r = evaluate(&model, env.as_mut(), &opts, &heldout)?;
    let opt = |v: Option<f64>| v.map_or("absent".to_string(), |x| x.to_string());
    let report = format!(
        "kind={}\nmean_reward={}\nreward_stderr={}\nsuccess_rate={}\nobs_nll={}\ncombined_nll={}\nepisodes={}\n",
        r.kind.as_str(),
        r.mean_reward,
        opt(r.reward_stderr),
        r.success_rate,
        opt(r.obs_nll),
        opt(r.combined_nll),
        r.seeds.len()
    );
    std::fs::write(out.join("report.txt"), &report)?;
    if let Some(trace) = &r.aux_trace {
        let mut csv = String::from("step,aux_cost\n");
        for (i, c) in trace.iter().enumerate() {
            csv.push_str(&format!("{},{c}\n", i + 1));
        }
        std::fs::write(out.join("aux.csv"), csv)?;
        write_chart(
            &out.join("aux.svg"),
            &Chart::new("auxiliary cost, first episode", "step", "cost")
                .with_series(Series::indexed("aux", trace, 1.0)),
        )?;
    }
    write!(stdout, "{report}")?;
    Ok(())
}

fn plan(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let mut s = s.clone();
    let cfg = plan_config(&mut s)?;
    std::fs::write(out.join("manifest.txt"), s.manifest())?;
    let model = load_model(&s)?;
    let full = model.as_full()?;
    let kind = EnvKind::parse(s.raw("env")?)?;
    let mut env = kind.make();
    let reward = default_reward(kind);
    let episodes: usize = s.get("episodes")?;
    let seed: u64 = s.get("seed")?;
    let episode_len: usize = s.get("episode_len")?;
    let mut returns = Vec::with_capacity(episodes);
    let mut csv = String::from("episode,seed,return,steps,replans\n");
    for i in 0..episodes {
        let ep_seed = seed + i as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(ep_seed);
        let ep = mpc_episode(env.as_mut(), full, reward.as_ref(), &cfg, episode_len, ep_seed, &mut rng)?;
        let r = ep.total_reward();
        writeln!(stdout, "episode {i} seed {ep_seed} return {r}")?;
        csv.push_str(&format!("{i},{ep_seed},{r},{},{}\n", ep.trajectory.len(), ep.replans));
        returns.push(r);
    }
    std::fs::write(out.join("returns.csv"), csv)?;
    write_chart(
        &out.join("returns.svg"),
        &Chart::new("MPC return per episode", "episode", "return").with_series(Series::indexed("mpc", &returns, 0.0)),
    )?;
    let (mean, se) = mean_stderr(&returns);
    match se {
        Some(se) => writeln!(stdout, "mean return {mean} ± {se}")?,
        None => writeln!(stdout, "mean return {mean} (stderr needs >= 2 episodes)")?,
    }
    Ok(())
}

fn explore(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let mut s = s.clone();
    let plan = plan_config(&mut s)?;
    std::fs::write(out.join("manifest.txt"), s.manifest())?;
    let kind = EnvKind::parse(s.raw("env")?)?;
    let mut env = kind.make();
    let seed: u64 = s.get("seed")?;
    let model = if s.raw("model")?.is_empty() {
        let cfg = ModelConfig {
            obs_dim: env.obs_dim(),
            action_dim: env.action_dim(),
            action_kind: env.action_kind(),
            latent_dim: s.get("latent_dim")?,
            hidden_dim: s.get("hidden_dim")?,
            backward_hidden_dim: s.get("backward_hidden_dim")?,
            decoder_hidden_dims: s.list("decoder_hidden")?,
            obs_log_std_min: s.get("obs_log_std_min")?,
        };
        SeqModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else {
        load_model(&s)?.as_full()?.clone()
    };
    let baseline = match s.raw("baseline")? {
        "mean" => Baseline::MeanReward,
        "none" => Baseline::None,
        b => return Err(CliError::Usage(format!("unknown baseline `{b}`, expected mean or none"))),
    };
    let cfg = ExploreConfig {
        iterations: s.get("iterations")?,
        warmup_trajectories: s.get("warmup_trajectories")?,
        warmup_steps: s.get("warmup_steps")?,
        trajectories_per_iteration: s.get("trajectories")?,
        max_exploration_len: s.get("max_exploration_len")?,
        buffer_capacity: s.get("buffer_capacity")?,
        model_steps: s.get("model_steps")?,
        batch_size: s.get("batch_size")?,
        fresh_fraction: s.get("fresh_fraction")?,
        policy_hidden_dim: s.get("policy_hidden_dim")?,
        policy_learning_rate: s.get("policy_lr")?,
        mpc_episode_len: s.get("episode_len")?,
        plan,
        ppo: PpoConfig {
            clip_ratio: s.get("clip_ratio")?,
            epochs: s.get("ppo_epochs")?,
            minibatch_size: s.get("minibatch_size")?,
            entropy_weight: s.get("entropy_weight")?,
            baseline,
        },
        objective: objective_config(&s)?,
        seed,
    };
    let every: usize = s.get("checkpoint_every")?;
    let reward = default_reward(kind);
    let result = overall_loop_with(env.as_mut(), model, reward.as_ref(), &cfg, &mut |i, m| {
        if every > 0 && (i + 1) % every == 0 {
            let ckpt = TrainedModel::Full(m.clone());
            let path = out.join(format!("model_iter{}.ckpt", i + 1));
            let file = File::create(path)?;
            ckpt.save(&[], BufWriter::new(file))?;
        }
        Ok(())
    })?;
    std::fs::write(out.join("metrics.csv"), result.metrics_csv())?;
    let mpc: Vec<f64> = result.metrics.iter().map(|m| m.mpc_return).collect();
    let expl: Vec<f64> = result.metrics.iter().map(|m| m.mean_exploration_reward).collect();
    write_chart(
        &out.join("metrics.svg"),
        &Chart::new("exploration loop", "iteration", "value")
            .with_series(Series::indexed("mpc return", &mpc, 0.0))
            .with_series(Series::indexed("exploration reward", &expl, 0.0)),
    )?;
    write_dataset(
        BufWriter::new(File::create(out.join("buffer.txt"))?),
        &result.buffer.to_dataset(env.as_ref()),
    )?;
    save_model(&TrainedModel::Full(result.model), &out.join("model.ckpt"))?;
    for m in &result.metrics {
        writeln!(
            stdout,
            "iteration {} mpc_return {} exploration_reward {} model_loss {}",
            m.iteration, m.mpc_return, m.mean_exploration_reward, m.model_loss
        )?;
    }
    Ok(())
}

fn trace(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let model = load_model(s)?;
    let mut env = EnvKind::parse(s.raw("env")?)?.make();
    let t = subgoal_trace(&model, env.as_mut(), s.get("seed")?, decode_mode(s)?)?;
    std::fs::write(out.join("trace.csv"), t.csv())?;
    let mut chart = Chart::new("auxiliary cost", "step", "cost").with_series(Series::indexed("aux", &t.aux_costs, 1.0));
    for (k, e) in &t.events {
        chart = chart.with_marker((k + 1) as f64, format!("{e:?}"));
        writeln!(stdout, "step {} {e:?}", k + 1)?;
    }
    write_chart(&out.join("trace.svg"), &chart)?;
    let mean = t.aux_costs.iter().sum::<f64>() / t.aux_costs.len().max(1) as f64;
    writeln!(stdout, "steps {} mean aux cost {mean}", t.aux_costs.len())?;
    Ok(())
}

fn nll(s: &Settings, out: &Path, stdout: &mut dyn Write) -> CliResult<()> {
    let model = load_model(s)?;
    let data = split_data(s, true)?;
    if data.is_empty() {
        return Err(CliError::Usage("no trajectories to score".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.get("seed")?);
    let samples: usize = s.get("samples")?;
    let (mut obs, mut comb) = (0.0, 0.0);
    let mut has_obs = true;
    for t in &data.episodes {
        match &model {
            TrainedModel::Full(m) => {
                let est = sequence_nll(m, t, samples, &mut rng)?;
                obs += est.observation;
                comb += est.combined;
            }
            TrainedModel::Recurrent(r) => {
                let lb = r.loss(t)?;
                obs -= lb.obs_recon;
                comb += lb.total;
                has_obs = r.config.predict_obs;
            }
        }
    }
    let n = data.len() as f64;
    let obs_line = if has_obs { (obs / n).to_string() } else { "absent".into() };
    let text = format!(
        "kind={}\ntrajectories={}\nobs_nll={obs_line}\ncombined_nll={}\n",
        model.kind().as_str(),
        data.len(),
        comb / n
    );
    std::fs::write(out.join("nll.txt"), &text)?;
    write!(stdout, "{text}")?;
    Ok(())
}
