use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vipguard::config::{RunConfig, TrainMode};
use vipguard::marl::{
    evaluate, gradcheck as team_gradcheck, train, Batch, BodyguardController, Checkpoint, Dims, EvalReport,
    LearnedPolicy, QlbController, RandomPolicy, StationaryGuards, Team, Trainer,
};
use vipguard::nn::gradcheck::{check_mlp, random_case, GradReport};
use vipguard::records::{
    write_json, AblationRung, AblationTable, CrossEvalTable, CurveRow, CurveWriter, RunManifest, TABLE_SCHEMA,
};
use vipguard::seeds;
use vipguard::ScenarioId;

#[derive(Parser)]
#[command(name = "vipguard", version, about = "Train and evaluate VIP bodyguard teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a team and write its learning curve, checkpoints and manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a scripted controller on held-out episodes.
    Eval(EvalArgs),
    /// Evaluate four scenario-specific checkpoints on every scenario.
    CrossEval(CrossEvalArgs),
    /// Train the three ablation rungs with one shared config and seed.
    Ablation(AblationArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file (`key = value` lines, dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.lr=0.0005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_config_str(&text)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(())
    }

    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "maupg")]
    mode: TrainMode,
    /// Training scenario; required for maddpg_single. Sampling modes train
    /// on all four scenarios.
    #[arg(long)]
    scenario: Option<ScenarioId>,
    #[arg(long, conflicts_with = "paper_budget")]
    episodes: Option<usize>,
    /// Training seed (`seeds.train`).
    #[arg(long)]
    seed: Option<u64>,
    /// Full-length budgets: 8000 episodes for random_landmark, 5000 for the
    /// other scenarios, 9000 for sampling modes; batch 1024, 4 cycles, gamma 0.75.
    #[arg(long)]
    paper_budget: bool,
    /// Resolve the config and write the manifest without training.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Checkpoint path, or one of `qlb`, `none`, `random`.
    controller: String,
    #[arg(long)]
    scenario: ScenarioId,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Evaluation seed (`seeds.eval`).
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossEvalArgs {
    /// `SCENARIO=PATH`, once per scenario.
    #[arg(long = "checkpoint", value_name = "SCENARIO=PATH", required = true)]
    checkpoints: Vec<String>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblationArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, conflicts_with = "paper_budget")]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train each rung for the full universal budget (9000 episodes).
    #[arg(long)]
    paper_budget: bool,
    /// Resolve the config and write the manifest without training.
    #[arg(long)]
    dry_run: bool,
    /// Held-out episodes per scenario for the final evaluation.
    #[arg(long, default_value_t = 100)]
    eval_episodes: usize,
    /// Trailing training episodes averaged into the reward summary.
    #[arg(long, default_value_t = 500)]
    final_window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 64)]
    max_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::CrossEval(a) => cmd_cross_eval(a),
        Command::Ablation(a) => cmd_ablation(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn apply_paper_budget(cfg: &mut RunConfig) {
    cfg.train.batch_size = 1024;
    cfg.train.cycles_per_episode = 4;
    cfg.train.gamma = 0.75;
}

fn training_scenarios(mode: TrainMode, scenario: Option<ScenarioId>) -> Result<Vec<ScenarioId>> {
    match (mode, scenario) {
        (TrainMode::MaddpgSingle, Some(s)) => Ok(vec![s]),
        (TrainMode::MaddpgSingle, None) => bail!("--scenario is required for maddpg_single"),
        (_, Some(_)) => bail!("--scenario only applies to maddpg_single; {mode} samples all scenarios"),
        (_, None) => Ok(ScenarioId::ALL.to_vec()),
    }
}

/// Trains one run into `out`: `curve.csv`, `checkpoints/`, `checkpoint.json`.
fn run_training(cfg: RunConfig, mode: TrainMode, scenarios: &[ScenarioId], episodes: usize, out: &Path) -> Result<Trainer> {
    let ck_dir = out.join("checkpoints");
    fs::create_dir_all(&ck_dir).with_context(|| format!("creating {}", ck_dir.display()))?;
    let interval = cfg.train.checkpoint_interval;
    let mut trainer = Trainer::new(cfg, mode, scenarios, episodes)?;
    let curve_path = out.join("curve.csv");
    let file = File::create(&curve_path).with_context(|| format!("creating {}", curve_path.display()))?;
    let mut curve = CurveWriter::new(BufWriter::new(file))?;
    let mut window = (0.0, 0.0, 0usize);
    train(&mut trainer, |rec, t| {
        curve.write(&CurveRow::from(rec))?;
        window = (window.0 + rec.episode_crt, window.1 + rec.mean_agent_reward, window.2 + 1);
        let done = rec.episode + 1;
        if done % 100 == 0 || done == t.total_episodes() {
            let n = window.2 as f64;
            eprintln!(
                "{mode} episode {done}/{}: crt {:.4} reward {:.3} sigma {:.3}",
                t.total_episodes(),
                window.0 / n,
                window.1 / n,
                rec.noise_sigma
            );
            window = (0.0, 0.0, 0);
        }
        if interval > 0 && done % interval == 0 && done < t.total_episodes() {
            curve.flush()?;
            let ck = t.checkpoint();
            ck.save(&ck_dir.join(format!("episode-{done:06}.json")))?;
            ck.save(&out.join("checkpoint.json"))?;
        }
        Ok(())
    })?;
    curve.flush()?;
    let ck = trainer.checkpoint();
    ck.save(&ck_dir.join(format!("episode-{:06}.json", trainer.episode())))?;
    ck.save(&out.join("checkpoint.json"))?;
    Ok(trainer)
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::default();
    a.config.apply(&mut cfg)?;
    if let Some(s) = a.seed {
        cfg.seeds.train = s;
    }
    let scenarios = training_scenarios(a.mode, a.scenario)?;
    let episodes = if a.paper_budget {
        apply_paper_budget(&mut cfg);
        match a.mode {
            TrainMode::MaddpgSingle => cfg.train.budgets.per_scenario[scenarios[0].ordinal()],
            _ => cfg.train.budgets.universal,
        }
    } else {
        a.episodes.ok_or_else(|| anyhow!("--episodes is required unless --paper-budget is given"))?
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let manifest = RunManifest::new("train", &cfg)
        .with("mode", a.mode)?
        .with("scenarios", &scenarios)?
        .with("episodes", episodes)?
        .with("paper_budget", a.paper_budget)?;
    write_text(&a.out.join("manifest.json"), &write_json(&manifest)?)?;
    write_text(&a.out.join("config.txt"), &cfg.to_config_string())?;
    if a.dry_run {
        return Ok(ExitCode::SUCCESS);
    }
    run_training(cfg, a.mode, &scenarios, episodes, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

/// Evaluates a loaded checkpoint's greedy policy.
fn eval_checkpoint(ck: &Checkpoint, cfg: &RunConfig, scenario: ScenarioId, episodes: usize, label: &str) -> Result<EvalReport> {
    let g = ck.mode.conditions_on_scenario().then_some(scenario);
    let mut policy = LearnedPolicy::greedy(&ck.team, g);
    Ok(evaluate(
        &cfg.env,
        &mut policy,
        label,
        scenario,
        episodes,
        cfg.seeds.eval_base(),
        cfg.train.episode_length,
    )?)
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode> {
    let report = match a.controller.as_str() {
        name @ ("qlb" | "none" | "random") => {
            let mut cfg = a.config.load()?;
            if let Some(s) = a.seed {
                cfg.seeds.eval = s;
            }
            let mut controller: Box<dyn BodyguardController> = match name {
                "qlb" => Box::new(QlbController::new(cfg.qlb.clone())),
                "none" => Box::new(StationaryGuards),
                _ => Box::new(RandomPolicy {
                    rng: seeds::rng(cfg.seeds.eval, seeds::stream::RANDOM_POLICY),
                }),
            };
            evaluate(
                &cfg.env,
                controller.as_mut(),
                name,
                a.scenario,
                a.episodes,
                cfg.seeds.eval_base(),
                cfg.train.episode_length,
            )?
        }
        path => {
            let ck = Checkpoint::load(Path::new(path)).with_context(|| format!("loading checkpoint {path}"))?;
            let mut cfg = ck.config()?;
            a.config.apply(&mut cfg)?;
            if let Some(s) = a.seed {
                cfg.seeds.eval = s;
            }
            eval_checkpoint(&ck, &cfg, a.scenario, a.episodes, path)?
        }
    };
    eprintln!(
        "{} on {}: mean crt {:.4} (std {:.4}) over {} episodes",
        report.controller, report.scenario, report.mean_crt, report.std_crt, report.episodes
    );
    let text = write_json(&report)?;
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_cross_eval(a: CrossEvalArgs) -> Result<ExitCode> {
    let mut by_scenario: Vec<Option<(PathBuf, Checkpoint)>> = (0..ScenarioId::COUNT).map(|_| None).collect();
    for spec in &a.checkpoints {
        let (s, p) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("--checkpoint expects SCENARIO=PATH, got `{spec}`"))?;
        let id: ScenarioId = s.parse()?;
        let path = PathBuf::from(p);
        let ck = Checkpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        if by_scenario[id.ordinal()].replace((path, ck)).is_some() {
            bail!("two checkpoints given for {id}");
        }
    }
    let mut loaded = Vec::with_capacity(ScenarioId::COUNT);
    for (i, slot) in by_scenario.into_iter().enumerate() {
        let id = ScenarioId::from_ordinal(i).expect("scenario ordinal");
        loaded.push(slot.ok_or_else(|| anyhow!("missing checkpoint for {id}"))?);
    }

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut mean_crt = Vec::new();
    let mut std_crt = Vec::new();
    let mut ids = Vec::new();
    for (path, ck) in &loaded {
        let mut cfg = ck.config()?;
        if let Some(s) = a.seed {
            cfg.seeds.eval = s;
        }
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for col in ScenarioId::ALL {
            let r = eval_checkpoint(ck, &cfg, col, a.episodes, &path.display().to_string())?;
            eprintln!("trained on {} / eval {col}: mean crt {:.4}", ck.scenarios[0], r.mean_crt);
            means.push(r.mean_crt);
            stds.push(r.std_crt);
        }
        mean_crt.push(means);
        std_crt.push(stds);
        ids.push(serde_json::json!({
            "path": path.display().to_string(),
            "config_hash": ck.config_hash,
            "mode": ck.mode,
            "trained_on": ck.scenarios,
            "episodes": ck.episode,
        }));
    }
    let train_episodes = loaded.iter().map(|(_, ck)| ck.episode).min().unwrap_or(0);
    let table = CrossEvalTable {
        schema_version: TABLE_SCHEMA,
        train_episodes,
        eval_episodes: a.episodes,
        rows: ScenarioId::ALL.iter().map(|s| s.key().to_string()).collect(),
        cols: ScenarioId::ALL.to_vec(),
        mean_crt,
        std_crt,
    };
    write_text(&a.out.join("confusion.json"), &write_json(&table)?)?;
    write_text(&a.out.join("confusion.csv"), &table.to_csv())?;
    let mut cfg = loaded[0].1.config()?;
    if let Some(s) = a.seed {
        cfg.seeds.eval = s;
    }
    let manifest = RunManifest::new("cross-eval", &cfg)
        .with("checkpoints", ids)?
        .with("eval_seed", cfg.seeds.eval)?;
    write_text(&a.out.join("manifest.json"), &write_json(&manifest)?)?;
    print!("{}", table.to_csv());
    Ok(ExitCode::SUCCESS)
}

const ABLATION_RUNGS: [TrainMode; 3] = [TrainMode::MaddpgSampled, TrainMode::MaupgNoHindsight, TrainMode::Maupg];

fn cmd_ablation(a: AblationArgs) -> Result<ExitCode> {
    let mut cfg = a.config.load()?;
    if let Some(s) = a.seed {
        cfg.seeds.train = s;
    }
    let episodes = if a.paper_budget {
        apply_paper_budget(&mut cfg);
        cfg.train.budgets.universal
    } else {
        a.episodes.ok_or_else(|| anyhow!("--episodes is required unless --paper-budget is given"))?
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let manifest = RunManifest::new("ablation", &cfg)
        .with("modes", ABLATION_RUNGS)?
        .with("episodes", episodes)?
        .with("eval_episodes", a.eval_episodes)?
        .with("final_window", a.final_window)?
        .with("paper_budget", a.paper_budget)?;
    write_text(&a.out.join("manifest.json"), &write_json(&manifest)?)?;
    write_text(&a.out.join("config.txt"), &cfg.to_config_string())?;
    if a.dry_run {
        return Ok(ExitCode::SUCCESS);
    }

    let mut rungs = Vec::new();
    for mode in ABLATION_RUNGS {
        let dir = a.out.join(mode.key());
        fs::create_dir_all(&dir)?;
        let trainer = run_training(cfg.clone(), mode, &ScenarioId::ALL, episodes, &dir)?;
        let curve = fs::read_to_string(dir.join("curve.csv"))?;
        fs::copy(dir.join("curve.csv"), a.out.join(format!("curve_{}.csv", mode.key())))?;
        let rows = vipguard::records::read_curve(&curve)?;
        let tail = &rows[rows.len().saturating_sub(a.final_window)..];
        let final_mean_reward = tail.iter().map(|r| r.mean_agent_reward).sum::<f64>() / tail.len().max(1) as f64;

        let mut mean_crt = Vec::new();
        let mut std_crt = Vec::new();
        for s in ScenarioId::ALL {
            let g = mode.conditions_on_scenario().then_some(s);
            let mut policy = LearnedPolicy::greedy(trainer.team(), g);
            let r = evaluate(
                &cfg.env,
                &mut policy,
                mode.key(),
                s,
                a.eval_episodes,
                cfg.seeds.eval_base(),
                cfg.train.episode_length,
            )?;
            mean_crt.push(r.mean_crt);
            std_crt.push(r.std_crt);
        }
        let overall_crt = mean_crt.iter().sum::<f64>() / mean_crt.len() as f64;
        eprintln!("{mode}: final reward {final_mean_reward:.3}, held-out crt {overall_crt:.4}");
        rungs.push(AblationRung {
            mode: mode.key().to_string(),
            mean_crt,
            std_crt,
            overall_crt,
            final_mean_reward,
        });
    }
    let table = AblationTable {
        schema_version: TABLE_SCHEMA,
        train_episodes: episodes,
        eval_episodes: a.eval_episodes,
        final_window: a.final_window,
        scenarios: ScenarioId::ALL.to_vec(),
        rungs,
    };
    write_text(&a.out.join("summary.json"), &write_json(&table)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    let mut rng = seeds::rng(a.seed, 0);
    let mut total = GradReport::default();
    for case in 0..a.cases {
        let (net, x, proj) = random_case(&mut rng, a.max_dim, 3, 1e-3)?;
        let r = check_mlp(&net, &x, &proj, a.eps)?;
        println!(
            "mlp {case:2} sizes {:?}: params {} max rel err {:.2e}, inputs {} max rel err {:.2e}",
            net.sizes(),
            r.params_checked,
            r.max_param_rel_err,
            r.inputs_checked,
            r.max_input_rel_err
        );
        total.merge(&r);
    }

    let cfg = RunConfig::default();
    let dims = Dims::new(&cfg.env, TrainMode::Maupg);
    let mut team = Team::new(dims, 16, cfg.train.lr, a.seed)?;
    team.jitter(0.05, &mut rng);
    let batch = Batch::random(&dims, 32, &mut rng);
    let mut team_err: f64 = 0.0;
    for i in 0..dims.n_agents {
        let r = team_gradcheck(&team, i, &batch, cfg.train.gamma, cfg.train.action_bound_penalty, a.eps, 200, &mut rng)?;
        println!(
            "agent {i}: critic max rel err {:.2e}, actor max rel err {:.2e} ({} probes each, {} on kinks skipped)",
            r.critic_max_rel_err, r.actor_max_rel_err, r.probes, r.skipped
        );
        team_err = team_err.max(r.critic_max_rel_err).max(r.actor_max_rel_err);
    }

    let worst = total.max_rel_err().max(team_err);
    let ok = worst <= a.tolerance;
    println!(
        "{}: {} parameters and {} inputs checked, worst relative error {worst:.2e} (tolerance {:.0e})",
        if ok { "PASS" } else { "FAIL" },
        total.params_checked,
        total.inputs_checked,
        a.tolerance
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
