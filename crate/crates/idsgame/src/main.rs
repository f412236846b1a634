use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use idsgame::config::{default_out_dir, ExperimentConfig, Permute, ScenarioRef, StaticRole};
use idsgame::formats::resolve_policy;
use idsgame::run::{load_series, run_experiment, win_ratio_svg};
use idsgame::simulate::simulate;
use idsgame::trainer::evaluate_seeded;
use idsgame::load_scenario;
use idsgame_core::{Algo, Role};

#[derive(Parser)]
#[command(name = "idsgame", version, about = "Attacker/defender intrusion prevention game: training and inspection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent against a static heuristic opponent.
    Train(RunArgs),
    /// Train attacker and defender simultaneously with an opponent pool.
    Selfplay(RunArgs),
    /// Play evaluation games between two policies and print the outcome table.
    Eval {
        #[arg(long, default_value = "1")]
        scenario: ScenarioRef,
        /// Heuristic name or checkpoint path.
        #[arg(long, default_value = "attack-maximal")]
        attacker: String,
        #[arg(long, default_value = "defend-minimal")]
        defender: String,
        #[arg(long, default_value_t = 100)]
        games: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = idsgame_core::game::DEFAULT_MAX_ROUNDS)]
        max_rounds: u32,
    },
    /// Play one game and print a per-round transcript.
    Simulate {
        #[arg(long, default_value = "1")]
        scenario: ScenarioRef,
        #[arg(long, default_value = "attack-maximal")]
        attacker: String,
        #[arg(long, default_value = "defend-minimal")]
        defender: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = idsgame_core::game::DEFAULT_MAX_ROUNDS)]
        max_rounds: u32,
        /// Where to write the JSON state trace; defaults to OUT/trace-seed-S.json.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the initial attack and defense matrices of a scenario.
    ScenarioInspect {
        #[arg(long, default_value = "1")]
        scenario: ScenarioRef,
    },
    /// Render attacker win ratio curves from curve CSVs or run directories.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "attacker_win_ratio.svg")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<ScenarioRef>,
    /// Algorithm of the learning agent(s).
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algo>,
    #[arg(long, value_enum)]
    static_role: Option<StaticRole>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long, value_enum)]
    permute: Option<Permute>,
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: idsgame_core::Error| e.to_string())
}

impl RunArgs {
    fn resolve(self, selfplay: bool) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.scenario {
            c.scenario = s;
        }
        if let Some(r) = self.static_role {
            c.static_role = r;
        }
        if selfplay {
            if c.static_role != StaticRole::None {
                bail!("selfplay trains both agents; --static-role must be none");
            }
        } else if c.static_role == StaticRole::None {
            if self.static_role.is_some() {
                bail!("train needs a static opponent; use `selfplay` for dual learning");
            }
            c.static_role = StaticRole::Defender;
        }
        if let Some(a) = self.algo {
            c.attacker_algo = a;
            c.defender_algo = a;
        }
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        if let Some(s) = self.seeds {
            c.seeds = s;
        }
        if let Some(o) = self.out {
            c.out_dir = o;
        }
        if let Some(r) = self.max_rounds {
            c.hyperparams.max_rounds = r;
        }
        if let Some(p) = self.permute {
            c.permute = p;
        }
        c.validate()?;
        Ok(c)
    }
}

fn format_row(row: &[u32]) -> String {
    let cells: Vec<String> = row.iter().map(u32::to_string).collect();
    format!("[{}]", cells.join(","))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.resolve(false)?;
            report(run_experiment(&config)?, &config);
        }
        Command::Selfplay(args) => {
            let config = args.resolve(true)?;
            report(run_experiment(&config)?, &config);
        }
        Command::Eval {
            scenario,
            attacker,
            defender,
            games,
            seed,
            max_rounds,
        } => {
            if games == 0 {
                bail!("--games must be at least 1");
            }
            let spec = load_scenario(&scenario)?;
            let (n, m) = (spec.topology.node_count(), spec.constants.m);
            let att = resolve_policy(&attacker, Role::Attacker, n, m)?;
            let def = resolve_policy(&defender, Role::Defender, n, m)?;
            let t = evaluate_seeded(&spec, &att, &def, games, max_rounds, seed, 0)?;
            println!("{:<14} {:>6} {:>7}", "outcome", "games", "ratio");
            println!("{:<14} {:>6} {:>7.3}", "attacker wins", t.attacker_wins, t.attacker_win_ratio());
            println!("{:<14} {:>6} {:>7.3}", "defender wins", t.defender_wins, t.defender_win_ratio());
            println!("{:<14} {:>6} {:>7.3}", "draws", t.draws, t.draw_ratio());
            println!("{:<14} {:>6}", "total", t.games());
            println!("mean game length: {:.2} rounds", t.mean_length());
        }
        Command::Simulate {
            scenario,
            attacker,
            defender,
            seed,
            max_rounds,
            trace,
            out,
        } => {
            let spec = load_scenario(&scenario)?;
            let (n, m) = (spec.topology.node_count(), spec.constants.m);
            let att = resolve_policy(&attacker, Role::Attacker, n, m)?;
            let def = resolve_policy(&defender, Role::Defender, n, m)?;
            let (lines, game) = simulate(&spec, &att, &def, seed, max_rounds)?;
            for line in &lines {
                println!("{line}");
            }
            println!("outcome: {:?} after {} rounds", game.outcome, game.rounds.len());
            let path = trace.unwrap_or_else(|| {
                out.unwrap_or_else(default_out_dir)
                    .join(format!("trace-seed-{seed}.json"))
            });
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, serde_json::to_string_pretty(&game)?)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("state trace: {}", path.display());
        }
        Command::ScenarioInspect { scenario } => {
            let spec = load_scenario(&scenario)?;
            let t = &spec.topology;
            println!(
                "nodes: {}  start: n{}  data: n{}  m: {}  w: {}",
                t.node_count(),
                t.start_id(),
                t.data_id(),
                spec.constants.m,
                spec.constants.w
            );
            let edges: Vec<String> = t.edges().iter().map(|(a, b)| format!("n{a}-n{b}")).collect();
            println!("edges: {}", edges.join(" "));
            println!("defense (attack types 0..m-1, then detection):");
            for (node, row) in spec.initial_defense.iter().enumerate() {
                if node != t.start_id() {
                    println!("  n{node}: {}", format_row(row));
                }
            }
            println!("attack:");
            for (node, row) in spec.initial_attack.iter().enumerate() {
                println!("  n{node}: {}", format_row(row));
            }
        }
        Command::Plot { inputs, out } => {
            let series = inputs
                .iter()
                .map(|p| load_series(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            std::fs::write(&out, win_ratio_svg(&series))
                .with_context(|| format!("cannot write {}", out.display()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn report(outcome: idsgame::run::Outcome, config: &ExperimentConfig) {
    for (seed, rows) in &outcome.curves {
        if let Some(last) = rows.last() {
            println!(
                "seed {seed}: {} iterations, final attacker win ratio {:.2}",
                rows.len(),
                last.attacker_win_ratio
            );
        }
    }
    println!("artifacts in {}", config.out_dir.display());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
