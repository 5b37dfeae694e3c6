//! The `gtattr` command line.
//!
//! Exit status is 0 on success, 2 when a size guard refuses the request
//! (e.g. exact Shapley with more than 20 players) and 1 for any other error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::equivalence::{
    attention_sum_game, demonstrate_prop1, demonstrate_prop3, measure_prop2_gap_recomputed,
    run_prop1_trials, verify_prop2, TrialShape,
};
use crate::error::{Error, Result};
use crate::flow::{
    attention_flow_values, attention_rollout, build_network, load_attention, max_flow,
    recomputed_game, restriction_game, AttentionStack, FlowOptions, InputPlayers, RolloutResult,
    SinkMode,
};
use crate::game::{
    group_players, load_game, make_additive_game, make_majority_game, make_unanimity_game,
    Coalition, Game, MissingEntries,
};
use crate::report::AttributionReport;
use crate::shapley::{
    check_additivity, check_null_player, check_symmetry, exact_shapley_with, leave_one_out,
    monte_carlo_shapley, AdditivityVerdict, AxiomVerdict, EstimatorConfig,
};

pub const DEFAULT_SEED: u64 = 0;

/// Game-theoretic and attention-based attributions over attention graphs.
#[derive(Debug, Parser)]
#[command(name = "gtattr", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attention flow values: each player's outflow under a maximum flow.
    Flow(FlowArgs),
    /// Attention rollout: the product of the layer matrices.
    Rollout(RolloutArgs),
    /// Exact or sampled Shapley values of a payoff.
    Shapley(ShapleyArgs),
    /// Leave-one-out values of a payoff.
    Loo(GameArgs),
    /// Check one of the attention / leave-one-out / Shapley relationships.
    Verify(VerifyArgs),
    /// Check efficiency, null-player, symmetry and additivity for exact Shapley values.
    Axioms(AxiomsArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write here instead of stdout (atomically, via a temporary file).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PlayerArgs {
    /// Input tokens acting as players, e.g. `0,2,3` (default: all).
    #[arg(long, value_delimiter = ',', conflicts_with = "groups")]
    pub players: Option<Vec<usize>>,
    /// Groups of units acting as players, e.g. `0,1;2;3,4`.
    #[arg(long)]
    pub groups: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct NetworkArgs {
    /// `full` or `target:K`.
    #[arg(long, default_value = "full")]
    pub sink: SinkMode,
    /// Mix a residual identity into every layer.
    #[arg(long)]
    pub residual: bool,
    #[arg(long, default_value_t = 0.5, requires = "residual")]
    pub residual_weight: f64,
}

impl NetworkArgs {
    fn options(&self) -> FlowOptions {
        FlowOptions {
            sink: self.sink,
            residual: self.residual.then_some(self.residual_weight),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub players: PlayerArgs,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RolloutArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub residual: bool,
    #[arg(long, default_value_t = 0.5, requires = "residual")]
    pub residual_weight: f64,
    /// Report this output position's row instead of the column sums.
    #[arg(long)]
    pub target: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// A payoff family and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum PayoffSpec {
    /// A JSON payoff table (`--input`).
    Tabulated,
    /// Sum of member outflows under one max flow (`--input` attention file).
    FlowRestricted,
    /// A fresh max flow per coalition (`--input` attention file).
    FlowRecomputed,
    /// Total attention over a single-layer attention file (`--input`).
    AttentionSum,
    Additive(Vec<f64>),
    Unanimity {
        n: usize,
        carriers: Vec<usize>,
    },
    Majority {
        n: usize,
        quota: usize,
    },
}

impl FromStr for PayoffSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidInput(format!(
                "unknown payoff {s:?}; expected tabulated, flow-restricted, flow-recomputed, \
                 attention-sum, additive:W1,W2,.., unanimity:N:I,J,.. or majority:N:Q"
            ))
        };
        let mut parts = s.splitn(3, ':');
        let head = parts.next().unwrap_or_default();
        let list = |text: Option<&str>| -> Result<Vec<String>> {
            Ok(text
                .ok_or_else(bad)?
                .split(',')
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect())
        };
        let number = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
        match head {
            "tabulated" => Ok(PayoffSpec::Tabulated),
            "flow-restricted" => Ok(PayoffSpec::FlowRestricted),
            "flow-recomputed" => Ok(PayoffSpec::FlowRecomputed),
            "attention-sum" => Ok(PayoffSpec::AttentionSum),
            "additive" => {
                let weights = list(parts.next())?
                    .iter()
                    .map(|w| w.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PayoffSpec::Additive(weights))
            }
            "unanimity" => {
                let n = number(parts.next().ok_or_else(bad)?)?;
                let carriers = list(parts.next())?
                    .iter()
                    .map(|c| number(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PayoffSpec::Unanimity { n, carriers })
            }
            "majority" => {
                let n = number(parts.next().ok_or_else(bad)?)?;
                let quota = number(parts.next().ok_or_else(bad)?)?;
                Ok(PayoffSpec::Majority { n, quota })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// Payoff family; see `PayoffSpec`.
    #[arg(long, default_value = "tabulated")]
    pub payoff: PayoffSpec,
    /// Payoff table or attention file, depending on `--payoff`.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Treat coalitions missing from a payoff table as worth 0.
    #[arg(long)]
    pub zero_fill: bool,
    #[command(flatten)]
    pub players: PlayerArgs,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["exact", "samples"]))]
pub struct ShapleyArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Enumerate every coalition (at most 20 players).
    #[arg(long)]
    pub exact: bool,
    /// Estimate from this many sampled player orderings.
    #[arg(long, value_name = "M")]
    pub samples: Option<u64>,
    #[arg(long, env = "GTATTR_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Maximum worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VerifyTarget {
    Prop1,
    Prop2,
    Prop2Recomputed,
    Prop3,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub which: VerifyTarget,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "GTATTR_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1)]
    pub l_min: usize,
    #[arg(long, default_value_t = 4)]
    pub l_max: usize,
    /// prop1: a single-layer attention file to use instead of random trials.
    /// prop3: a payoff input (see `--payoff`).
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// prop3: the game to examine (default: unanimity over 3 players).
    #[arg(long)]
    pub payoff: Option<PayoffSpec>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AxiomsArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// A second payoff for the additivity check.
    #[arg(long)]
    pub with_payoff: Option<PayoffSpec>,
    #[arg(long)]
    pub with_input: Option<PathBuf>,
}

/// Axiom checks over every player and pair.
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub n: usize,
    pub efficiency_gap: f64,
    pub efficient: bool,
    pub null_player: Vec<PlayerVerdict>,
    pub symmetry: Vec<PairVerdict>,
    pub additivity: Option<AdditivityVerdict>,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlayerVerdict {
    pub player: usize,
    #[serde(flatten)]
    pub verdict: AxiomVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub verdict: AxiomVerdict,
}

#[derive(Debug, Clone, Serialize)]
struct RolloutOutput {
    #[serde(flatten)]
    rollout: RolloutResult,
    attribution: AttributionReport,
}

fn parse_groups(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidInput(format!("bad group list {text:?}")))
                })
                .collect()
        })
        .collect()
}

fn input_players(args: &PlayerArgs, n: usize) -> Result<InputPlayers> {
    if let Some(groups) = &args.groups {
        return Ok(InputPlayers::grouped(parse_groups(groups)?));
    }
    Ok(match &args.players {
        Some(tokens) => InputPlayers::tokens(tokens.clone()),
        None => InputPlayers::all(n),
    })
}

fn require_input(input: Option<&Path>, payoff: &str) -> Result<PathBuf> {
    input
        .map(Path::to_path_buf)
        .ok_or_else(|| Error::InvalidInput(format!("--payoff {payoff} needs --input")))
}

fn labelled(game: Game, stack: &AttentionStack) -> Result<Game> {
    match stack.tokens() {
        Some(tokens) if tokens.len() == game.n() => game.with_labels(tokens.to_vec()),
        _ => Ok(game),
    }
}

/// Builds the game named by `payoff`, grouping players as requested.
pub fn build_game(
    payoff: &PayoffSpec,
    input: Option<&Path>,
    zero_fill: bool,
    players: &PlayerArgs,
    network: &NetworkArgs,
) -> Result<Game> {
    let flow_game = |recomputed: bool, name: &str| -> Result<Game> {
        let stack = load_attention(require_input(input, name)?)?;
        let selection = input_players(players, stack.n())?;
        let net = build_network(&stack, &selection, &network.options())?;
        if recomputed {
            recomputed_game(&net)
        } else {
            restriction_game(&net, &max_flow(&net))
        }
    };
    let base = match payoff {
        PayoffSpec::FlowRestricted => return flow_game(false, "flow-restricted"),
        PayoffSpec::FlowRecomputed => return flow_game(true, "flow-recomputed"),
        PayoffSpec::Tabulated => {
            let missing = if zero_fill {
                MissingEntries::ZeroFill
            } else {
                MissingEntries::Reject
            };
            load_game(require_input(input, "tabulated")?, missing)?
        }
        PayoffSpec::AttentionSum => {
            let stack = load_attention(require_input(input, "attention-sum")?)?;
            if stack.depth() != 1 {
                return Err(Error::InvalidInput(
                    "attention-sum takes a single-layer attention file".into(),
                ));
            }
            let game = attention_sum_game(stack.layer(0), Coalition::full(stack.n()))?;
            labelled(game, &stack)?
        }
        PayoffSpec::Additive(weights) => make_additive_game(weights.clone())?,
        PayoffSpec::Unanimity { n, carriers } => {
            make_unanimity_game(*n, Coalition::from_indices(carriers.iter().copied()))?
        }
        PayoffSpec::Majority { n, quota } => make_majority_game(*n, *quota)?,
    };
    if let Some(groups) = &players.groups {
        return group_players(&base, parse_groups(groups)?);
    }
    if let Some(tokens) = &players.players {
        let all: Vec<usize> = (0..base.n()).collect();
        if tokens != &all {
            return Err(Error::InvalidInput(
                "--players selects input tokens of flow payoffs; use --groups for other games"
                    .into(),
            ));
        }
    }
    Ok(base)
}

fn game_of(args: &GameArgs) -> Result<Game> {
    build_game(
        &args.payoff,
        args.input.as_deref(),
        args.zero_fill,
        &args.players,
        &args.network,
    )
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, contents: &str) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            let written = stdout.write_all(contents.as_bytes()).and_then(|()| {
                if contents.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            match written {
                // a closed pipe (e.g. `| head`) is not a failure
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn emit_report(report: AttributionReport, out: &OutputArgs) -> Result<()> {
    let report = report.stamped_now();
    let text = match out.format {
        Format::Json => report.to_json()?,
        Format::Csv => emit_plot_table(&report),
    };
    emit(out.output.as_deref(), &text)
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    emit(output, &serde_json::to_string_pretty(value)?)
}

/// The CSV plot table for a report.
pub fn emit_plot_table(report: &AttributionReport) -> String {
    report.to_csv()
}

fn axioms(args: &AxiomsArgs) -> Result<AxiomReport> {
    let game = game_of(&args.game)?;
    let report = exact_shapley_with(&game, 1)?;
    let n = game.n();
    let mut null_player = Vec::with_capacity(n);
    for i in 0..n {
        null_player.push(PlayerVerdict {
            player: i,
            verdict: check_null_player(&game, i, &report)?,
        });
    }
    let mut symmetry = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            symmetry.push(PairVerdict {
                i,
                j,
                verdict: check_symmetry(&game, i, j, &report)?,
            });
        }
    }
    let additivity = match &args.with_payoff {
        Some(payoff) => {
            let other = build_game(
                payoff,
                args.with_input.as_deref(),
                args.game.zero_fill,
                &args.game.players,
                &args.game.network,
            )?;
            Some(check_additivity(&game, &other)?)
        }
        None => None,
    };
    let efficient = report.is_efficient(1e-9);
    let violations = usize::from(!efficient)
        + null_player.iter().filter(|v| v.verdict.violated()).count()
        + symmetry.iter().filter(|v| v.verdict.violated()).count()
        + additivity.as_ref().map_or(0, |a| usize::from(!a.holds));
    Ok(AxiomReport {
        n,
        efficiency_gap: report.efficiency_gap(),
        efficient,
        null_player,
        symmetry,
        additivity,
        violations,
    })
}

fn verify(args: &VerifyArgs) -> Result<crate::equivalence::PropositionVerdict> {
    let shape = TrialShape::new(args.n_min..=args.n_max, args.l_min..=args.l_max);
    match args.which {
        VerifyTarget::Prop1 => match &args.input {
            Some(path) => demonstrate_prop1(&load_attention(path)?),
            None => run_prop1_trials(args.trials, args.n_min..=args.n_max, args.seed),
        },
        VerifyTarget::Prop2 => verify_prop2(args.trials, &shape, args.seed),
        VerifyTarget::Prop2Recomputed => {
            measure_prop2_gap_recomputed(args.trials, &shape, args.seed)
        }
        VerifyTarget::Prop3 => {
            let payoff = args.payoff.clone().unwrap_or(PayoffSpec::Unanimity {
                n: 3,
                carriers: vec![0, 1, 2],
            });
            let no_players = PlayerArgs {
                players: None,
                groups: None,
            };
            let network = NetworkArgs {
                sink: SinkMode::Full,
                residual: false,
                residual_weight: 0.5,
            };
            let game = build_game(&payoff, args.input.as_deref(), false, &no_players, &network)?;
            demonstrate_prop3(&game)
        }
    }
}

/// Executes one command.
pub fn run(config: &RunConfig) -> Result<()> {
    match &config.command {
        Command::Flow(args) => {
            let stack = load_attention(&args.input)?;
            let players = input_players(&args.players, stack.n())?;
            let report = attention_flow_values(&stack, &players, &args.network.options())?;
            emit_report(report, &args.out)
        }
        Command::Rollout(args) => {
            let stack = load_attention(&args.input)?;
            let residual = args.residual.then_some(args.residual_weight);
            let rollout = attention_rollout(&stack, residual)?;
            if let Some(t) = args.target {
                if t >= stack.n() {
                    return Err(Error::TargetOutOfRange {
                        target: t,
                        n: stack.n(),
                    });
                }
            }
            let attribution = rollout
                .attribution(args.target)
                .with_labels(stack.tokens().map(<[String]>::to_vec))
                .with_description(format!(
                    "attention rollout over {} layers, {}",
                    stack.depth(),
                    match args.target {
                        Some(t) => format!("row of output position {t}"),
                        None => "column sums".to_string(),
                    }
                ));
            match args.out.format {
                Format::Csv => emit_report(attribution, &args.out),
                Format::Json => emit_json(
                    &RolloutOutput {
                        rollout,
                        attribution: attribution.stamped_now(),
                    },
                    args.out.output.as_deref(),
                ),
            }
        }
        Command::Shapley(args) => {
            let game = game_of(&args.game)?;
            let report = match args.samples {
                Some(m) if !args.exact => {
                    let cfg = EstimatorConfig::new(m, args.seed).with_workers(args.workers);
                    monte_carlo_shapley(&game, &cfg)?
                }
                _ => exact_shapley_with(&game, args.workers.max(1))?,
            };
            emit_report(report, &args.game.out)
        }
        Command::Loo(args) => {
            let game = game_of(args)?;
            emit_report(leave_one_out(&game)?, &args.out)
        }
        Command::Verify(args) => emit_json(&verify(args)?, args.output.as_deref()),
        Command::Axioms(args) => {
            if args.game.out.format == Format::Csv {
                return Err(Error::InvalidInput("axiom reports are JSON only".into()));
            }
            emit_json(&axioms(args)?, args.game.out.output.as_deref())
        }
    }
}

/// Parses `args`, runs, prints diagnostics to stderr and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gtattr: {e}");
            e.exit_code()
        }
    }
}
