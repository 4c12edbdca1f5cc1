//! `posopt`: build games, project them, construct and check equilibria.
//!
//! Exit codes: 0 on success, 2 when a check ran but its claim is false,
//! 1 when the command could not run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use posopt_core::mixed::{
    coverage_probability_seeded, coverage_union_bound, exact_symmetric_utility_with_budget, DEFAULT_SEED,
};
use posopt_core::pure::{dynamics, enumerate_pure_equilibria_with_budget, DynamicsOutcome};
use posopt_core::{
    check_mixed_bounds, check_pure_theorems, deviation_grid, fig6_curve, game_to_json, generate_pure,
    mc_symmetric_utility, parse_game, project, solve_two_point, verify_pure, CountVector, CoverageMode,
    GameDefinition, InstanceSpec, MixedStrategy, MoveRule, Position, PseudoSpace, PureProfile,
};

#[derive(Parser)]
#[command(name = "posopt", version, about = "Equilibria of position-optimization games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project the targets onto their closest positions.
    Project {
        #[command(flatten)]
        game: GameArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Named instances.
    #[command(subcommand)]
    Instance(InstanceCmd),
    /// Pure-strategy equilibria.
    #[command(subcommand)]
    Pure(PureCmd),
    /// Symmetric mixed equilibria.
    #[command(subcommand)]
    Mixed(MixedCmd),
    /// Run an acceptance scenario (1 to 12) or `all`.
    Repro {
        claim: String,
        /// Write the outcomes as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GameArg {
    /// Game file: an explicit game or a named instance.
    #[arg(long)]
    game: PathBuf,
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum InstanceCmd {
    /// Build an instance and write it as an explicit game file.
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Instance kind, e.g. three_node or forecasting.
    #[arg(long, required_unless_present = "spec")]
    kind: Option<String>,
    /// JSON file holding the instance parameters, including "kind".
    #[arg(long, conflicts_with = "kind")]
    spec: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// Comma-separated outcome probabilities.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Comma-separated masses of a separated game.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon1: Option<f64>,
    #[arg(long)]
    epsilon2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Any other parameter as key=JSON, e.g. masses=[0.2,0.8].
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand)]
enum PureCmd {
    /// Construct an equilibrium count vector over X*.
    Gen {
        #[command(flatten)]
        game: GameArg,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Look for a profitable unilateral deviation.
    Verify {
        #[command(flatten)]
        game: GameArg,
        #[command(flatten)]
        profile: ProfileArg,
        /// Deviation lattice resolution for geometric games.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// List every equilibrium count vector over X*.
    Enumerate {
        #[command(flatten)]
        game: GameArg,
        #[arg(long)]
        n: usize,
        /// Largest number of count vectors to scan.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u128,
        #[command(flatten)]
        out: OutArg,
    },
    /// Let players move one at a time until nobody improves.
    Dynamics {
        #[command(flatten)]
        game: GameArg,
        #[command(flatten)]
        profile: ProfileArg,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        #[arg(long, value_enum, default_value_t = Rule::Best)]
        rule: Rule,
        #[arg(long)]
        grid: Option<usize>,
        /// Write the step-by-step trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Coverage, per-position counts, utility window and KL rate.
    Bounds {
        #[command(flatten)]
        game: GameArg,
        /// Comma-separated counts over X*.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ProfileArg {
    /// Comma-separated counts over X*.
    #[arg(long, value_delimiter = ',', alias = "start")]
    counts: Option<Vec<usize>>,
    /// JSON array of positions: labels, site indices or coordinate arrays.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Best,
    First,
}

#[derive(Subcommand)]
enum MixedCmd {
    /// Equilibrium weight on the mass-p pseudo-target of a two-point game.
    Solve2 {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare a symmetric strategy with the projected distribution.
    Verify {
        #[command(flatten)]
        game: GameArg,
        #[command(flatten)]
        sigma: SigmaArg,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Expected share of one player at x while the others play sigma.
    Utility {
        #[command(flatten)]
        game: GameArg,
        #[command(flatten)]
        sigma: SigmaArg,
        #[arg(long)]
        n: usize,
        /// Position label or coordinates.
        #[arg(long)]
        x: String,
        /// Monte Carlo sample count; exact enumeration when absent.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u128,
        #[command(flatten)]
        out: OutArg,
    },
    /// Probability that independent draws hit every position.
    Coverage {
        /// Comma-separated weights.
        #[arg(long, value_delimiter = ',', required = true)]
        sigma: Vec<f64>,
        #[arg(long)]
        draws: usize,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Two-point equilibrium weight against p, as CSV.
    Curve {
        /// Comma-separated player counts.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct SigmaArg {
    /// Comma-separated weights over X*, or over --at when given.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<f64>,
    /// Support position, repeated once per weight.
    #[arg(long)]
    at: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Exact,
    Mc,
}

/// Whether the command's claim held.
enum Verdict {
    Holds,
    Fails,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(Verdict::Holds) => ExitCode::SUCCESS,
        Ok(Verdict::Fails) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("POSOPT_THREADS") else { return Ok(()) };
    let threads: usize = raw.trim().parse().with_context(|| format!("POSOPT_THREADS = `{raw}` is not a count"))?;
    if threads == 0 {
        bail!("POSOPT_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(command: Command) -> Result<Verdict> {
    match command {
        Command::Project { game, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game)?;
            emit(&out, &projection_json(&game, &ps))?;
            Ok(Verdict::Holds)
        }
        Command::Instance(InstanceCmd::Build(args)) => build_instance(args),
        Command::Pure(cmd) => run_pure(cmd),
        Command::Mixed(cmd) => run_mixed(cmd),
        Command::Repro { claim, output } => repro(&claim, output.as_deref()),
    }
}

fn load_game(path: &Path) -> Result<GameDefinition> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_game(&text).with_context(|| format!("loading {}", path.display()))
}

fn emit(out: &OutArg, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out.output.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn labels(game: &GameDefinition, positions: &[Position]) -> Vec<String> {
    positions.iter().map(|p| game.label(p)).collect()
}

fn projection_json(game: &GameDefinition, ps: &PseudoSpace) -> Value {
    json!({
        "pseudo_targets": labels(game, &ps.pseudo_targets),
        "positions": ps.pseudo_targets,
        "p": ps.p,
        "p0": ps.p0,
        "min_players": ps.min_players(),
        "target_map": ps.target_map,
    })
}

fn build_instance(args: BuildArgs) -> Result<Verdict> {
    let mut fields = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str(&text)? {
                Value::Object(map) => map,
                _ => bail!("{} must hold a JSON object", path.display()),
            }
        }
        None => Map::new(),
    };
    if let Some(kind) = &args.kind {
        fields.insert("kind".into(), json!(kind));
    }
    let typed = [
        ("m", args.m.map(|v| json!(v))),
        ("q", args.q.map(|v| json!(v))),
        ("p", args.p.map(|v| json!(v))),
        ("epsilon", args.epsilon.map(|v| json!(v))),
        ("epsilon1", args.epsilon1.map(|v| json!(v))),
        ("epsilon2", args.epsilon2.map(|v| json!(v))),
        ("n", args.n.map(|v| json!(v))),
        ("grid", args.grid.map(|v| json!(v))),
    ];
    for (key, value) in typed {
        if let Some(v) = value {
            fields.insert(key.into(), v);
        }
    }
    for raw in &args.params {
        let (key, text) = raw.split_once('=').ok_or_else(|| anyhow!("--param `{raw}` is not KEY=VALUE"))?;
        let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.into()));
        fields.insert(key.into(), value);
    }
    let spec: InstanceSpec = serde_json::from_value(Value::Object(fields)).context("instance parameters")?;
    let game = posopt_core::build(&spec)?;
    emit(&args.out, &game_to_json(&game))?;
    Ok(Verdict::Holds)
}

/// A profile from counts over X* or from a JSON list of positions.
fn read_profile(game: &GameDefinition, ps: Option<&PseudoSpace>, arg: &ProfileArg) -> Result<PureProfile> {
    if let Some(counts) = &arg.counts {
        let ps = ps.ok_or_else(|| anyhow!("--counts needs a game that projects"))?;
        if counts.len() != ps.len() {
            bail!("--counts has {} entries for {} pseudo-targets", counts.len(), ps.len());
        }
        return Ok(PureProfile::from_counts(&ps.pseudo_targets, counts));
    }
    let path = arg.profile.as_ref().expect("clap requires one of the two");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let items: Vec<Value> = serde_json::from_str(&text).context("profile must be a JSON array")?;
    let positions = items.iter().map(|item| parse_position_value(game, item)).collect::<Result<Vec<_>>>()?;
    Ok(PureProfile::new(positions))
}

fn parse_position_value(game: &GameDefinition, item: &Value) -> Result<Position> {
    let pos = match item {
        Value::String(s) => return Ok(game.parse_position(s)?),
        Value::Number(k) => Position::Site(k.as_u64().ok_or_else(|| anyhow!("bad site index {k}"))? as usize),
        Value::Array(xs) => Position::Point(
            xs.iter().map(|x| x.as_f64().ok_or_else(|| anyhow!("bad coordinate {x}"))).collect::<Result<_>>()?,
        ),
        other => bail!("cannot read a position from {other}"),
    };
    game.check_position(&pos)?;
    Ok(pos)
}

fn candidates(game: &GameDefinition, grid: Option<usize>) -> Result<Vec<Position>> {
    Ok(match grid {
        Some(r) => deviation_grid(game, r)?,
        None => game.candidates(),
    })
}

fn run_pure(cmd: PureCmd) -> Result<Verdict> {
    match cmd {
        PureCmd::Gen { game, n, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game)?;
            let k = generate_pure(&ps, n)?;
            emit(&out, &json!({ "n": n, "pseudo_targets": labels(&game, &ps.pseudo_targets), "counts": k.0 }))?;
            Ok(Verdict::Holds)
        }
        PureCmd::Verify { game, profile, grid, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game).ok();
            let profile = read_profile(&game, ps.as_ref(), &profile)?;
            let report = verify_pure(&game, &profile, &candidates(&game, grid)?)?;
            emit(&out, &report)?;
            match &report.witness {
                None => eprintln!("equilibrium ({} candidates checked)", report.candidates_checked),
                Some(w) => eprintln!(
                    "not an equilibrium: player {} gains {:e} moving {} -> {}",
                    w.player,
                    w.gain,
                    game.label(&w.from),
                    game.label(&w.to)
                ),
            }
            Ok(if report.is_equilibrium { Verdict::Holds } else { Verdict::Fails })
        }
        PureCmd::Enumerate { game, n, budget, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game)?;
            let found = enumerate_pure_equilibria_with_budget(&ps, &game, n, budget)?;
            let counts: Vec<&Vec<usize>> = found.iter().map(|k| &k.0).collect();
            emit(
                &out,
                &json!({
                    "n": n,
                    "pseudo_targets": labels(&game, &ps.pseudo_targets),
                    "count": found.len(),
                    "equilibria": counts,
                }),
            )?;
            eprintln!("{} equilibria", found.len());
            Ok(Verdict::Holds)
        }
        PureCmd::Dynamics { game, profile, max_steps, rule, grid, trace, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game).ok();
            let start = read_profile(&game, ps.as_ref(), &profile)?;
            let rule = match rule {
                Rule::Best => MoveRule::BestResponse,
                Rule::First => MoveRule::FirstImprovement,
            };
            let cands = candidates(&game, grid)?;
            let result = dynamics(&game, &start, max_steps, &cands, rule)?;
            if let Some(path) = &trace {
                write_trace(&game, &result, path)?;
            }
            emit(
                &out,
                &json!({
                    "outcome": result.outcome,
                    "steps": result.steps.len(),
                    "final_profile": labels(&game, result.final_profile.positions()),
                }),
            )?;
            eprintln!("{} after {} steps", outcome_name(&result.outcome), result.steps.len());
            Ok(Verdict::Holds)
        }
        PureCmd::Bounds { game, counts, c, out } => {
            let game = load_game(&game.game)?;
            let ps = project(&game)?;
            let k = CountVector(counts);
            let report = check_pure_theorems(&ps, &k, k.n(), c)?;
            emit(&out, &report)?;
            Ok(if report.all_pass() { Verdict::Holds } else { Verdict::Fails })
        }
    }
}

fn outcome_name(outcome: &DynamicsOutcome) -> String {
    match outcome {
        DynamicsOutcome::FixedPoint => "fixed point".into(),
        DynamicsOutcome::Cycle { first_visit, period } => format!("cycle of period {period} from step {first_visit}"),
        DynamicsOutcome::StepLimit => "step limit".into(),
    }
}

fn write_trace(game: &GameDefinition, trace: &posopt_core::pure::DynamicsTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["step", "player", "from", "to", "before", "after", "gain", "improving", "counts"])?;
    for (i, step) in trace.steps.iter().enumerate() {
        let m = &step.mover;
        let counts_of = step.profile.counts();
        let mut occupied: Vec<&(Position, usize)> = counts_of.iter().collect();
        occupied.sort_by_key(|(pos, _)| pos.key());
        let counts: Vec<String> = occupied.iter().map(|(pos, k)| format!("{}:{k}", game.label(pos))).collect();
        w.write_record([
            i.to_string(),
            m.player.to_string(),
            game.label(&m.from),
            game.label(&m.to),
            m.before.to_string(),
            m.after.to_string(),
            m.gain.to_string(),
            step.improving.len().to_string(),
            counts.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_sigma(game: &GameDefinition, arg: &SigmaArg) -> Result<(MixedStrategy, Option<PseudoSpace>)> {
    let ps = project(game).ok();
    let support = if arg.at.is_empty() {
        ps.as_ref().ok_or_else(|| anyhow!("the game does not project; give the support with --at"))?.pseudo_targets.clone()
    } else {
        arg.at.iter().map(|s| game.parse_position(s)).collect::<Result<Vec<_>, _>>()?
    };
    Ok((MixedStrategy::new(support, arg.sigma.clone())?, ps))
}

fn run_mixed(cmd: MixedCmd) -> Result<Verdict> {
    match cmd {
        MixedCmd::Solve2 { p, n, out } => {
            let sigma = solve_two_point(p, n)?;
            emit(&out, &json!({ "p": p, "n": n, "sigma": sigma }))?;
            Ok(Verdict::Holds)
        }
        MixedCmd::Verify { game, sigma, n, out } => {
            let game = load_game(&game.game)?;
            let (sigma, ps) = read_sigma(&game, &sigma)?;
            let ps = ps.ok_or_else(|| anyhow!("the game does not project"))?;
            let report = check_mixed_bounds(&ps, &sigma, n)?;
            emit(&out, &report)?;
            Ok(if report.bounds_hold() { Verdict::Holds } else { Verdict::Fails })
        }
        MixedCmd::Utility { game, sigma, n, x, samples, seed, budget, out } => {
            let game = load_game(&game.game)?;
            let (sigma, _) = read_sigma(&game, &sigma)?;
            let x = game.parse_position(&x)?;
            let value = match samples {
                None => {
                    let u = exact_symmetric_utility_with_budget(&game, &x, &sigma, n, budget)?;
                    json!({ "x": game.label(&x), "n": n, "method": "exact", "estimate": u })
                }
                Some(s) => {
                    let e = mc_symmetric_utility(&game, &x, &sigma, n, s, seed)?;
                    json!({
                        "x": game.label(&x), "n": n, "method": "monte_carlo", "seed": seed,
                        "estimate": e.estimate, "stderr": e.stderr, "samples": e.samples,
                    })
                }
            };
            emit(&out, &value)?;
            Ok(Verdict::Holds)
        }
        MixedCmd::Coverage { sigma, draws, mode, samples, seed, out } => {
            let mode = match mode {
                Mode::Auto => CoverageMode::Auto,
                Mode::Exact => CoverageMode::Exact,
                Mode::Mc => CoverageMode::MonteCarlo,
            };
            let e = coverage_probability_seeded(&sigma, draws, mode, samples, seed)?;
            emit(
                &out,
                &json!({
                    "draws": draws,
                    "estimate": e.estimate,
                    "stderr": e.stderr,
                    "samples": e.samples,
                    "union_bound": coverage_union_bound(&sigma, draws),
                }),
            )?;
            Ok(Verdict::Holds)
        }
        MixedCmd::Curve { n, grid, out } => {
            let rows = fig6_curve(&n, grid)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.serialize(row)?;
            }
            let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
            write_text(out.output.as_deref(), std::str::from_utf8(&bytes)?)?;
            Ok(Verdict::Holds)
        }
    }
}

fn repro(claim: &str, output: Option<&Path>) -> Result<Verdict> {
    let outcomes = if claim == "all" {
        posopt_core::repro::run_all()
    } else {
        let id: u32 = claim.parse().with_context(|| format!("`{claim}` is neither a criterion number nor `all`"))?;
        vec![posopt_core::repro::run_claim(id).ok_or_else(|| anyhow!("no criterion {id}; expected 1 to 12"))?]
    };
    for o in &outcomes {
        println!("{}", o.line());
    }
    if output.is_some() {
        emit(&OutArg { output: output.map(Path::to_path_buf) }, &outcomes)?;
    }
    Ok(if outcomes.iter().all(|o| o.passed) { Verdict::Holds } else { Verdict::Fails })
}
