use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arrival_core::analysis::hopeful_set;
use arrival_core::expand::{expand_game_within, explore, modified_matrix_within, DEFAULT_BUDGET};
use arrival_core::gadgets::{gen_double_exp, gen_majsat_rs, gen_ssat_rs1, gen_ssat_rs2, GadgetStats, SsatInstance};
use arrival_core::io::{parse_dimacs, parse_instance, serialize_instance};
use arrival_core::normalize::{
    geq_to_strict, prefix_coin, prune_dead_edges, swap_target_dead, to_simple_form, CoinBranch, ShiftVariant,
};
use arrival_core::play::Strategies;
use arrival_core::rational::{self, Rational};
use arrival_core::reductions::{dualize_players_within, player_to_random, random_to_player};
use arrival_core::simulate::{estimate_value, traversal_stats};
use arrival_core::solve::{decide_within, encoding_bits, solve, value_denominator_bound, Problem, SolveOptions};
use arrival_core::{ArrivalInstance, Error};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "arrival", version, about = "Exact analysis of switching, random and two-player reachability games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Instance file, or `-` for standard input.
    input: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Hopeful vertices and desperation distances.
    Analyze(Common),
    /// Apply a normalization pass and print the resulting instance.
    Normalize {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum, default_value = "simple")]
        op: NormalizeOp,
        /// Gadget depth for the strict-threshold shift.
        #[arg(long)]
        l: Option<u64>,
    },
    /// Translate between node-type variants.
    Reduce {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum)]
        to: ReduceTo,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Explicit state space: summary, substochastic system or product game.
    Expand {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum, default_value = "summary")]
        format: ExpandFormat,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Exact value with verdicts and optimal choices.
    Solve {
        #[command(flatten)]
        io: Common,
        /// Threshold for the quantitative verdict.
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Decide one of the threshold problems.
    Decide {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum)]
        problem: ProblemArg,
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Seeded Monte-Carlo runs; players follow optimal strategies.
    Simulate {
        #[command(flatten)]
        io: Common,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Emit a gadget instance.
    Generate {
        #[arg(long, value_enum)]
        family: Family,
        /// Chain length for the double-exponential family.
        #[arg(long)]
        n: Option<usize>,
        /// DIMACS formula for the SAT-based families.
        formula: Option<PathBuf>,
        /// Instance destination; gadget statistics then go to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Size measures of an instance.
    Stats(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeOp {
    Simple,
    Prune,
    Swap,
    CoinTarget,
    CoinDead,
    Strict,
    StrictDead,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceTo {
    /// Random nodes become Max nodes.
    Player,
    /// Max nodes become uniform random nodes.
    Random,
    /// Swap the players and the target with the dead node.
    Dual,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpandFormat {
    Summary,
    Triplets,
    Game,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Qual0,
    Qual1,
    Quant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    DoubleExp,
    SsatRs1,
    SsatRs2,
    MajsatRs,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Model(_) | Error::Contract(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Invariant(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_text(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::input(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> CliResult<ArrivalInstance> {
    let text = read_text(path)?;
    parse_instance(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn threshold(p: &str) -> CliResult<Rational> {
    rational::parse_ab(p).ok_or_else(|| Failure::usage(format!("--p expects a/b, got '{p}'")))
}

#[derive(Serialize)]
struct ExpandSummary {
    reachable_states: usize,
    retained_states: usize,
    dim: usize,
    star: usize,
    start: Option<usize>,
}

#[derive(Serialize)]
struct InstanceStats {
    kinds: String,
    vertices: usize,
    edges: usize,
    switch_nodes: usize,
    order_total: usize,
    max_order_len: usize,
    switch_positions: String,
    encoding_bits: usize,
    value_bound_k: String,
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Analyze(io) => {
            let inst = load(&io.input)?;
            emit(io.out.as_deref(), &json(&hopeful_set(&inst).to_json(&inst)))
        }
        Command::Normalize { io, op, l } => {
            let inst = load(&io.input)?;
            let out = match op {
                NormalizeOp::Simple => to_simple_form(&inst)?,
                NormalizeOp::Prune => prune_dead_edges(&inst)?,
                NormalizeOp::Swap => swap_target_dead(&inst)?,
                NormalizeOp::CoinTarget => prefix_coin(&inst, CoinBranch::ToTarget)?,
                NormalizeOp::CoinDead => prefix_coin(&inst, CoinBranch::ToDead)?,
                NormalizeOp::Strict => geq_to_strict(&inst, l, ShiftVariant::Strict)?,
                NormalizeOp::StrictDead => geq_to_strict(&inst, l, ShiftVariant::Dead)?,
            };
            emit(io.out.as_deref(), &serialize_instance(&out))
        }
        Command::Reduce { io, to, budget } => {
            let inst = load(&io.input)?;
            let out = match to {
                ReduceTo::Player => random_to_player(&inst),
                ReduceTo::Random => player_to_random(&inst)?,
                ReduceTo::Dual => {
                    let rep = dualize_players_within(&inst, budget)?;
                    if rep.stalling {
                        eprintln!("warning: a player can stall forever; the dual value may differ from 1 - value");
                    }
                    rep.instance
                }
            };
            emit(io.out.as_deref(), &serialize_instance(&out))
        }
        Command::Expand { io, format, budget } => {
            let inst = load(&io.input)?;
            let text = match format {
                ExpandFormat::Summary => {
                    let reachable = explore(&inst, budget)?.len();
                    let sys = modified_matrix_within(&inst, budget)?;
                    json(&ExpandSummary {
                        reachable_states: reachable,
                        retained_states: sys.states.len(),
                        dim: sys.dim(),
                        star: sys.star(),
                        start: sys.start,
                    })
                }
                ExpandFormat::Triplets => modified_matrix_within(&inst, budget)?.to_triplets(),
                ExpandFormat::Game => serialize_instance(&expand_game_within(&inst, budget)?),
            };
            emit(io.out.as_deref(), &text)
        }
        Command::Solve { io, p, budget } => {
            let inst = load(&io.input)?;
            let threshold = p.as_deref().map(threshold).transpose()?;
            let rep = solve(&inst, &SolveOptions { budget, threshold })?;
            emit(io.out.as_deref(), &json(&rep))
        }
        Command::Decide { io, problem, p, budget } => {
            let problem = match (problem, p) {
                (ProblemArg::Qual0, None) => Problem::Qual0,
                (ProblemArg::Qual1, None) => Problem::Qual1,
                (ProblemArg::Quant, Some(p)) => Problem::Quant(threshold(&p)?),
                (ProblemArg::Quant, None) => return Err(Failure::usage("--problem quant needs --p a/b")),
                (_, Some(_)) => return Err(Failure::usage("--p only applies to --problem quant")),
            };
            let inst = load(&io.input)?;
            emit(io.out.as_deref(), &json(&decide_within(&inst, &problem, budget)?))
        }
        Command::Simulate {
            io,
            samples,
            seed,
            budget,
        } => {
            if samples == 0 {
                return Err(Failure::usage("--samples must be at least 1"));
            }
            let inst = load(&io.input)?;
            let rep = if inst.kinds().has_players() {
                let strategies: Strategies = solve(
                    &inst,
                    &SolveOptions {
                        budget,
                        threshold: None,
                    },
                )?
                .strategies;
                estimate_value(&inst, &strategies, samples, seed)?
            } else {
                traversal_stats(&inst, samples, seed)?
            };
            emit(io.out.as_deref(), &json(&rep))
        }
        Command::Generate { family, n, formula, out } => {
            let (inst, stats): (ArrivalInstance, Option<GadgetStats>) = match family {
                Family::DoubleExp => {
                    if formula.is_some() {
                        return Err(Failure::usage("double-exp takes --n, not a formula"));
                    }
                    let n = n.ok_or_else(|| Failure::usage("double-exp needs --n"))?;
                    (gen_double_exp(n)?, None)
                }
                _ => {
                    let path = formula.ok_or_else(|| Failure::usage("this family needs a DIMACS formula"))?;
                    let text = read_text(&path)?;
                    let f = parse_dimacs(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                    let (inst, stats) = match family {
                        Family::MajsatRs => gen_majsat_rs(&f)?,
                        _ => {
                            if f.num_vars % 2 == 1 {
                                eprintln!("note: odd variable count, appending an unused random variable");
                            }
                            let ssat = SsatInstance::padded(f);
                            if matches!(family, Family::SsatRs1) {
                                gen_ssat_rs1(&ssat)?
                            } else {
                                gen_ssat_rs2(&ssat)?
                            }
                        }
                    };
                    (inst, Some(stats))
                }
            };
            let text = serialize_instance(&inst);
            match out {
                Some(path) => {
                    emit(Some(&path), &text)?;
                    if let Some(stats) = stats {
                        emit(None, &json(&stats))?;
                    }
                    Ok(())
                }
                None => {
                    if let Some(stats) = stats {
                        eprint!("{}", json(&stats));
                    }
                    emit(None, &text)
                }
            }
        }
        Command::Stats(io) => {
            let inst = load(&io.input)?;
            let stats = InstanceStats {
                kinds: inst.kinds().label(),
                vertices: inst.len(),
                edges: inst.edge_count(),
                switch_nodes: inst.switch_nodes().len(),
                order_total: inst.order_total(),
                max_order_len: inst.max_order_len(),
                switch_positions: inst.position_count().to_string(),
                encoding_bits: encoding_bits(&inst),
                value_bound_k: value_denominator_bound(&inst).to_string(),
            };
            emit(io.out.as_deref(), &json(&stats))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
