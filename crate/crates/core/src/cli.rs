//! Command-line front end behind the `softcoord` binary.
//!
//! Settings resolve in order: built-in defaults, the `--config` file
//! (`key = value` lines), `--set KEY=VALUE` flags, then dedicated flags.
//! Exit codes: 0 success, 1 usage, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::baselines::{ConstantPcc, Droop, DroopCurve, NoVar};
use crate::env::{
    run_day, settled_tap, write_episode_log, EnvConfig, EpisodeSummary, VarController, VoltVarEnv,
};
use crate::grid::ieee33::ieee33;
use crate::grid::{read_network_csv, validate_network, Feeder, NetworkModel};
use crate::rsac::{run_training, write_training_log, DaySource, Hyperparams, RsacPolicy, TrainingPlan};
use crate::scenario::{load_scenario_csv, DayScenario, Fluctuation};

pub const BUILTIN_NETWORK: &str = "builtin:ieee33";
pub const COMPARE_HEADER: &str = "controller,loss_kwh,tap_ops,violation_steps";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "softcoord", version, about = "Soft coordination of PV inverter Var and an LDC tap changer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `strong`, `mild` or a scenario CSV path.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Network CSV path or `builtin:ieee33`.
    #[arg(long)]
    pub network: Option<String>,
    /// Extra `KEY=VALUE` setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one day under a controller.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// `none`, `droop`, `constant-pcc` or `rsac:CHECKPOINT`.
        #[arg(long)]
        controller: Option<String>,
    },
    /// Train a recurrent SAC policy.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// `full` or `smoke` hyperparameter preset.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Run several controllers on the same day.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Repeat for each controller.
        #[arg(long = "controller")]
        controllers: Vec<String>,
    },
    /// Check a network file.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Everything a command needs, after layering files and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub network: String,
    pub scenario: String,
    pub seed: u64,
    pub out: PathBuf,
    pub dt_s: u32,
    pub controllers: Vec<String>,
    pub env: EnvConfig,
    pub hp: Hyperparams,
    pub droop: DroopCurve,
    pub pcc_v_ref: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: BUILTIN_NETWORK.into(),
            scenario: "strong".into(),
            seed: 1,
            out: PathBuf::from("."),
            dt_s: 60,
            controllers: Vec::new(),
            env: EnvConfig::default(),
            hp: Hyperparams::default(),
            droop: DroopCurve::default(),
            pcc_v_ref: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .or_else(|_| usage(format!("{key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    /// Applies one setting; unknown keys and ill-typed values are usage
    /// errors.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        let hp = &mut self.hp;
        let ldc = &mut self.env.ldc;
        let rw = &mut self.env.reward;
        match key.trim() {
            "network" => self.network = v.into(),
            "scenario" => self.scenario = v.into(),
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = v.into(),
            "dt_s" => self.dt_s = parse(key, v)?,
            "controller" | "controllers" => {
                self.controllers = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
            "preset" => {
                *hp = match v {
                    "full" => Hyperparams::default(),
                    "smoke" => Hyperparams::smoke(),
                    _ => return usage(format!("preset must be full or smoke, got {v:?}")),
                }
            }
            "rsac.gamma" => hp.gamma = parse(key, v)?,
            "rsac.alpha" => hp.alpha = parse(key, v)?,
            "rsac.lr" => hp.lr = parse(key, v)?,
            "rsac.beta" => hp.beta = parse(key, v)?,
            "rsac.target_tau_convention" => hp.target_tau_convention = parse(key, v)?,
            "rsac.batch_size" => hp.batch_size = parse(key, v)?,
            "rsac.buffer_capacity" => hp.buffer_capacity = parse(key, v)?,
            "rsac.episodes" | "episodes" => hp.episodes = parse(key, v)?,
            "rsac.horizon" | "horizon" => hp.horizon = parse(key, v)?,
            "rsac.updates_per_episode" => hp.updates_per_episode = parse(key, v)?,
            "rsac.gru_hidden" => hp.gru_hidden = parse(key, v)?,
            "rsac.head_hidden" => hp.head_hidden = parse_list(key, v)?,
            "rsac.critic_hidden" => hp.critic_hidden = parse_list(key, v)?,
            "rsac.checkpoint_every" => hp.checkpoint_every = parse(key, v)?,
            "rsac.day_pool" => hp.day_pool = parse(key, v)?,
            "ldc.v_target" => ldc.v_target = parse(key, v)?,
            "ldc.r" => ldc.r = parse(key, v)?,
            "ldc.x" => ldc.x = parse(key, v)?,
            "ldc.dead_band" => ldc.dead_band = parse(key, v)?,
            "ldc.delay_s" => ldc.delay_s = parse(key, v)?,
            "ldc.rating_mva" => ldc.rating_mva = parse(key, v)?,
            "reward.penalty" => rw.penalty = parse(key, v)?,
            "reward.incentive" => rw.incentive = parse(key, v)?,
            "reward.v_upper" => rw.v_upper = parse(key, v)?,
            "reward.v_lower" => rw.v_lower = parse(key, v)?,
            "solver.tolerance" => self.env.solver.tolerance = parse(key, v)?,
            "solver.max_iter" => self.env.solver.max_iter = parse(key, v)?,
            "droop.v_lo_sat" => self.droop.v_lo_sat = parse(key, v)?,
            "droop.v_lo_db" => self.droop.v_lo_db = parse(key, v)?,
            "droop.v_hi_db" => self.droop.v_hi_db = parse(key, v)?,
            "droop.v_hi_sat" => self.droop.v_hi_sat = parse(key, v)?,
            "pcc.v_ref" => self.pcc_v_ref = parse(key, v)?,
            other => return usage(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    /// Applies settings in order, presets first so they never clobber
    /// individual hyperparameters.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> CliResult<()> {
        for (k, v) in pairs.iter().filter(|(k, _)| k == "preset") {
            self.set(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            self.set(k, v)?;
        }
        Ok(())
    }
}

/// Splits `key = value` text; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((k.trim().to_string(), v.trim().to_string())),
            _ => return usage(format!("config line {}: expected key = value", n + 1)),
        }
    }
    Ok(out)
}

fn split_pair(s: &str) -> CliResult<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
        None => usage(format!("--set expects KEY=VALUE, got {s:?}")),
    }
}

fn resolve(common: &CommonArgs, flags: Vec<(String, String)>) -> CliResult<RunConfig> {
    let mut pairs = Vec::new();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        pairs.extend(parse_config_text(&text)?);
    }
    for s in &common.set {
        pairs.push(split_pair(s)?);
    }
    let mut direct = flags;
    if let Some(seed) = common.seed {
        direct.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &common.out {
        direct.push(("out".into(), out.display().to_string()));
    }
    if let Some(s) = &common.scenario {
        direct.push(("scenario".into(), s.clone()));
    }
    if let Some(n) = &common.network {
        direct.push(("network".into(), n.clone()));
    }
    // a preset flag must still precede file-level hyperparameters
    let (presets, rest): (Vec<_>, Vec<_>) = direct.into_iter().partition(|(k, _)| k == "preset");
    let mut cfg = RunConfig::default();
    cfg.apply(&presets)?;
    cfg.apply(&pairs)?;
    cfg.apply(&rest)?;
    cfg.hp.seed = cfg.seed;
    Ok(cfg)
}

pub fn load_network(spec: &str) -> crate::Result<NetworkModel> {
    if spec == BUILTIN_NETWORK {
        return Ok(ieee33());
    }
    let model = read_network_csv(spec)?;
    let report = validate_network(&model);
    if !report.is_empty() {
        return Err(crate::Error::InvalidNetwork(report.iter().map(ToString::to_string).collect()));
    }
    Ok(model)
}

fn build_env(cfg: &RunConfig) -> crate::Result<VoltVarEnv> {
    let feeder = Arc::new(Feeder::new(load_network(&cfg.network)?)?);
    let mut env_cfg = cfg.env.clone();
    let tap = &feeder.model().tap;
    env_cfg.ldc.tap_min = tap.tap_min;
    env_cfg.ldc.tap_max = tap.tap_max;
    env_cfg.ldc.step = tap.step;
    VoltVarEnv::new(feeder, env_cfg)
}

fn fluctuation(spec: &str) -> Option<Fluctuation> {
    match spec {
        "strong" => Some(Fluctuation::Strong),
        "mild" => Some(Fluctuation::Mild),
        _ => None,
    }
}

fn build_scenario(cfg: &RunConfig, model: &NetworkModel) -> CliResult<Arc<DayScenario>> {
    let day = match fluctuation(&cfg.scenario) {
        Some(mode) => DayScenario::generate(model, mode, cfg.dt_s, cfg.seed)?,
        None => {
            if !Path::new(&cfg.scenario).is_file() {
                return usage(format!("scenario must be strong, mild or an existing CSV, got {:?}", cfg.scenario));
            }
            load_scenario_csv(&cfg.scenario, model)?
        }
    };
    Ok(Arc::new(day))
}

/// Builds a controller from `NAME[:CHECKPOINT]`.
pub fn build_controller(spec: &str, cfg: &RunConfig) -> CliResult<Box<dyn VarController>> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    if arg.is_some() && name != "rsac" {
        return usage(format!("controller {name} takes no checkpoint"));
    }
    Ok(match name {
        "none" => Box::new(NoVar),
        "droop" => Box::new(Droop::new(cfg.droop.clone())?),
        "constant-pcc" => Box::new(ConstantPcc::new(cfg.pcc_v_ref)?),
        "rsac" => match arg {
            Some(path) if !path.is_empty() => Box::new(RsacPolicy::load(path)?),
            _ => return usage("rsac controller needs a checkpoint: rsac:PATH"),
        },
        other => return usage(format!("unknown controller {other:?}")),
    })
}

fn write_file(path: &Path, contents: &[u8]) -> crate::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

fn hash_record(day: &DayScenario) -> String {
    format!("scenario,seed,sha256\n{},{},{}\n", day.label, day.seed, day.content_hash())
}

fn summary_csv(s: &EpisodeSummary) -> String {
    format!("{}\n{}\n", EpisodeSummary::CSV_HEADER, s.csv_row())
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<()> {
    let spec = match cfg.controllers.as_slice() {
        [one] => one.clone(),
        [] => "none".to_string(),
        _ => return usage("simulate takes exactly one controller"),
    };
    let mut env = build_env(cfg)?;
    let mut controller = build_controller(&spec, cfg)?;
    let day = build_scenario(cfg, env.feeder().model())?;
    let tap = settled_tap(env.feeder(), env.config(), &day, 0)?;
    let (records, summary) = run_day(&mut env, controller.as_mut(), Arc::clone(&day), tap, 0)?;
    let mut log = Vec::new();
    write_episode_log(&records, env.site_count(), &mut log)?;
    fs::create_dir_all(&cfg.out)?;
    write_file(&cfg.out.join("episode_log.csv"), &log)?;
    write_file(&cfg.out.join("summary.csv"), summary_csv(&summary).as_bytes())?;
    write_file(&cfg.out.join("scenario_hash.csv"), hash_record(&day).as_bytes())?;
    println!("{} {}", controller.name(), summary.csv_row());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    cfg.hp.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let env = build_env(cfg)?;
    let days = match fluctuation(&cfg.scenario) {
        Some(mode) => DaySource::Generated { mode, dt_s: cfg.dt_s },
        None => DaySource::Fixed(build_scenario(cfg, env.feeder().model())?),
    };
    fs::create_dir_all(&cfg.out)?;
    let plan = TrainingPlan {
        env,
        days,
        hp: cfg.hp.clone(),
        checkpoint_dir: Some(cfg.out.clone()),
    };
    let outcome = run_training(plan, |row| {
        if (row.episode + 1) % 10 == 0 {
            eprintln!("episode {} avg50_reward {:.3}", row.episode + 1, row.avg50_reward);
        }
    })?;
    let mut log = Vec::new();
    write_training_log(&outcome.log, &mut log)?;
    write_file(&cfg.out.join("training_log.csv"), &log)?;
    match outcome.final_avg50() {
        Some(v) => println!("final avg50_reward {v}"),
        None => println!("no episodes run"),
    }
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig) -> CliResult<()> {
    if cfg.controllers.len() < 2 {
        return usage("compare needs at least two --controller values");
    }
    let mut env = build_env(cfg)?;
    let mut controllers = cfg
        .controllers
        .iter()
        .map(|s| build_controller(s, cfg))
        .collect::<CliResult<Vec<_>>>()?;
    let day = build_scenario(cfg, env.feeder().model())?;
    let tap = settled_tap(env.feeder(), env.config(), &day, 0)?;
    let mut table = format!("{COMPARE_HEADER}\n");
    let mut logs = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for c in controllers.iter_mut() {
        let (records, s) = run_day(&mut env, c.as_mut(), Arc::clone(&day), tap, 0)?;
        let base = c.name();
        let count = names.iter().filter(|n| n.split('#').next() == Some(base.as_str())).count();
        let name = if count == 0 { base } else { format!("{base}#{}", count + 1) };
        table += &format!("{name},{},{},{}\n", s.loss_kwh, s.tap_ops, s.violation_steps);
        let mut log = Vec::new();
        write_episode_log(&records, env.site_count(), &mut log)?;
        logs.push((format!("episode_log_{}.csv", name.replace('#', "_")), log));
        names.push(name);
    }
    fs::create_dir_all(&cfg.out)?;
    write_file(&cfg.out.join("compare.csv"), table.as_bytes())?;
    write_file(&cfg.out.join("scenario_hash.csv"), hash_record(&day).as_bytes())?;
    for (file, log) in logs {
        write_file(&cfg.out.join(file), &log)?;
    }
    print!("{table}");
    Ok(())
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<()> {
    let model = load_network(&cfg.network)?;
    Feeder::new(model.clone())?;
    println!(
        "{}: {} buses, {} lines, {} PV sites, ok",
        cfg.network,
        model.buses.len(),
        model.lines.len(),
        model.pv_sites.len()
    );
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common, controller } => {
            let flags = controller.map(|c| ("controller".to_string(), c)).into_iter().collect();
            cmd_simulate(&resolve(&common, flags)?)
        }
        Command::Train {
            common,
            episodes,
            horizon,
            preset,
        } => {
            let mut flags = Vec::new();
            if let Some(p) = preset {
                flags.push(("preset".to_string(), p));
            }
            if let Some(e) = episodes {
                flags.push(("episodes".to_string(), e.to_string()));
            }
            if let Some(h) = horizon {
                flags.push(("horizon".to_string(), h.to_string()));
            }
            cmd_train(&resolve(&common, flags)?)
        }
        Command::Compare { common, controllers } => {
            let flags = if controllers.is_empty() {
                Vec::new()
            } else {
                vec![("controllers".to_string(), controllers.join(","))]
            };
            cmd_compare(&resolve(&common, flags)?)
        }
        Command::Validate { common } => cmd_validate(&resolve(&common, Vec::new())?),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code, printing any error to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
