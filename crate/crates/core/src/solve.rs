//! Exact values and the qualitative and quantitative decision problems.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::analysis::{attractor_reach, hopeful_set};
use crate::error::{Error, Result};
use crate::expand::{explore, system_from_game, ExpandedGame, ExpandedSystem, DEFAULT_BUDGET};
use crate::io::serialize_instance;
use crate::linsolve::{satisfies, solve_reach, tarjan_scc, LinStats};
use crate::model::{ArrivalInstance, NodeKind};
use crate::play::Strategies;
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LinearSolve,
    PolicyIteration,
    StrategyIteration,
    Attractor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Problem {
    Qual0,
    Qual1,
    Quant(Rational),
}

/// Values and positional choices on an explored game.
#[derive(Clone, Debug)]
pub struct GameSolution {
    pub values: Vec<Rational>,
    /// Chosen successor state at every player state.
    pub choice: Vec<Option<u32>>,
    pub iterations: usize,
    pub lin: LinStats,
}

impl GameSolution {
    /// Converts state-indexed choices into strategy maps.
    pub fn strategies(&self, inst: &ArrivalInstance, game: &ExpandedGame) -> Strategies {
        let mut s = Strategies::default();
        for (i, c) in self.choice.iter().enumerate() {
            if let Some(c) = c {
                let to = game.vertex[*c as usize];
                match game.kind(inst, i) {
                    NodeKind::MaxPlayer => s.max.set(game.state(i), to),
                    NodeKind::MinPlayer => s.min.set(game.state(i), to),
                    _ => {}
                }
            }
        }
        s
    }
}

/// Hitting probabilities of the target class for every index of `sys`,
/// the target class itself included.
pub fn solve_chain(sys: &ExpandedSystem) -> Result<Vec<Rational>> {
    solve_chain_stats(sys, &mut LinStats::default())
}

pub fn solve_chain_stats(sys: &ExpandedSystem, stats: &mut LinStats) -> Result<Vec<Rational>> {
    let star = sys.star();
    let mut rows = Vec::with_capacity(star);
    let mut rhs = Vec::with_capacity(star);
    for row in &sys.rows[..star] {
        let mut b = Rational::zero();
        let mut r = Vec::with_capacity(row.len());
        for (j, p) in row {
            if *j == star {
                b += p;
            } else {
                r.push((*j, p.clone()));
            }
        }
        rows.push(r);
        rhs.push(b);
    }
    let mut h = solve_reach(&rows, &rhs, stats)?;
    if !satisfies(&rows, &rhs, &h) {
        return Err(Error::invariant("solution fails exact substitution"));
    }
    if let Some(i) = h.iter().position(|v| v.is_zero()) {
        return Err(Error::invariant(format!("retained state {i} has value zero")));
    }
    h.push(Rational::one());
    Ok(h)
}

struct Local<'a> {
    inst: &'a ArrivalInstance,
    game: &'a ExpandedGame,
    comp: &'a [usize],
    pos: std::collections::HashMap<usize, usize>,
}

impl Local<'_> {
    /// Rows of the chain induced by `pick` (successor slot per local state).
    /// States listed in `zero` are pinned to value 0.
    fn chain(
        &self,
        values: &[Rational],
        pick: &[usize],
        zero: &[bool],
    ) -> (Vec<Vec<(usize, Rational)>>, Vec<Rational>) {
        let mut rows = Vec::with_capacity(self.comp.len());
        let mut rhs = Vec::with_capacity(self.comp.len());
        for (k, &i) in self.comp.iter().enumerate() {
            let mut row: Vec<(usize, Rational)> = Vec::new();
            let mut b = Rational::zero();
            if !zero[k] {
                let mut add = |j: usize, p: Rational| match self.pos.get(&j) {
                    Some(&l) => row.push((l, p)),
                    None => b += p * &values[j],
                };
                let succ = &self.game.succ[i];
                match self.game.kind(self.inst, i) {
                    NodeKind::Random => {
                        for (s, &j) in succ.iter().enumerate() {
                            add(j as usize, self.game.prob(self.inst, i, s).clone());
                        }
                    }
                    NodeKind::Switch => add(succ[0] as usize, rational::one()),
                    _ => add(succ[pick[k]] as usize, rational::one()),
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        (rows, rhs)
    }

    fn value_of(&self, values: &[Rational], local: &[Rational], j: usize) -> Rational {
        match self.pos.get(&j) {
            Some(&l) => local[l].clone(),
            None => values[j].clone(),
        }
    }

    /// Strict improvement of `pick` at states of `kind`; returns whether
    /// anything changed. The incumbent is kept on ties.
    fn improve(
        &self,
        values: &[Rational],
        local: &[Rational],
        pick: &mut [usize],
        kind: NodeKind,
        frozen: &[bool],
    ) -> bool {
        let mut changed = false;
        for (k, &i) in self.comp.iter().enumerate() {
            if frozen[k] || self.game.kind(self.inst, i) != kind {
                continue;
            }
            let succ = &self.game.succ[i];
            let mut best = pick[k];
            let mut best_val = self.value_of(values, local, succ[best] as usize);
            for (s, &j) in succ.iter().enumerate() {
                let v = self.value_of(values, local, j as usize);
                let better = match kind {
                    NodeKind::MaxPlayer => v > best_val,
                    _ => v < best_val,
                };
                if better {
                    best = s;
                    best_val = v;
                }
            }
            if best != pick[k] {
                pick[k] = best;
                changed = true;
            }
        }
        changed
    }

    /// States where Min, facing Max's fixed `pick`, keeps the play inside
    /// the block without ever taking an exit of positive value.
    fn min_can_stall(&self, values: &[Rational], pick: &[usize]) -> Vec<bool> {
        let m = self.comp.len();
        let (pos_sink, neg_sink) = (m, m + 1);
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); m + 2];
        let mut adversarial = vec![false; m + 2];
        for (k, &i) in self.comp.iter().enumerate() {
            let kind = self.game.kind(self.inst, i);
            adversarial[k] = kind == NodeKind::MinPlayer;
            let all = &self.game.succ[i];
            let used: Vec<u32> = match kind {
                NodeKind::MaxPlayer => vec![all[pick[k]]],
                _ => all.clone(),
            };
            for j in used {
                let j = j as usize;
                succ[k].push(match self.pos.get(&j) {
                    Some(&l) => l,
                    None if values[j].is_positive() => pos_sink,
                    None => neg_sink,
                });
            }
        }
        let attr = attractor_reach(&succ, &adversarial, &[pos_sink]);
        attr[..m].iter().map(|a| !a).collect()
    }

    fn evaluate(
        &self,
        values: &[Rational],
        pick: &[usize],
        zero: &[bool],
        lin: &mut LinStats,
    ) -> Result<Vec<Rational>> {
        let (rows, rhs) = self.chain(values, pick, zero);
        solve_reach(&rows, &rhs, lin)
    }
}

/// Optimal values on an explored game, both players allowed.
///
/// Value-zero states are settled by an attractor first. The remaining graph
/// is solved one strongly connected block at a time, sinks first: blocks
/// without players by a linear solve, one-player blocks by policy iteration,
/// and two-player blocks by strategy iteration over Max strategies with an
/// exact Min best response at each step.
pub fn solve_game(inst: &ArrivalInstance, game: &ExpandedGame) -> Result<GameSolution> {
    let n = game.len();
    let kinds: Vec<NodeKind> = (0..n).map(|i| game.kind(inst, i)).collect();
    let succ: Vec<Vec<usize>> = game.succ.iter().map(|s| s.iter().map(|&j| j as usize).collect()).collect();
    let targets: Vec<usize> = (0..n).filter(|&i| kinds[i] == NodeKind::Target).collect();
    let adversarial: Vec<bool> = kinds.iter().map(|k| *k == NodeKind::MinPlayer).collect();
    let attr = attractor_reach(&succ, &adversarial, &targets);

    let mut values = vec![Rational::zero(); n];
    let mut choice: Vec<Option<u32>> = vec![None; n];
    let mut lin = LinStats::default();
    let mut iterations = 0;
    for i in 0..n {
        if kinds[i] == NodeKind::Target {
            values[i] = Rational::one();
        }
        if !attr[i] && kinds[i].is_player() {
            let pick = match kinds[i] {
                NodeKind::MinPlayer => game.succ[i].iter().copied().find(|&j| !attr[j as usize]),
                _ => None,
            };
            choice[i] = Some(pick.unwrap_or(game.succ[i][0]));
        }
    }
    let open: Vec<bool> = (0..n).map(|i| attr[i] && !kinds[i].is_absorbing()).collect();
    let inner: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if open[i] {
                succ[i].iter().copied().filter(|&j| open[j]).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    for comp in tarjan_scc(&inner) {
        if !open[comp[0]] {
            continue;
        }
        let single = comp.len() == 1 && !inner[comp[0]].contains(&comp[0]);
        if single {
            let i = comp[0];
            values[i] = match kinds[i] {
                NodeKind::Random => succ[i]
                    .iter()
                    .enumerate()
                    .map(|(s, &j)| game.prob(inst, i, s) * &values[j])
                    .sum(),
                NodeKind::Switch => values[succ[i][0]].clone(),
                k => {
                    let mut best = 0;
                    for s in 1..succ[i].len() {
                        let (v, b) = (&values[succ[i][s]], &values[succ[i][best]]);
                        if (k == NodeKind::MaxPlayer && v > b) || (k == NodeKind::MinPlayer && v < b) {
                            best = s;
                        }
                    }
                    choice[i] = Some(succ[i][best] as u32);
                    values[succ[i][best]].clone()
                }
            };
            continue;
        }
        let local = Local {
            inst,
            game,
            comp: &comp,
            pos: comp.iter().enumerate().map(|(k, &i)| (i, k)).collect(),
        };
        let m = comp.len();
        let has_max = comp.iter().any(|&i| kinds[i] == NodeKind::MaxPlayer);
        let has_min = comp.iter().any(|&i| kinds[i] == NodeKind::MinPlayer);
        let mut pick = vec![0usize; m];
        let none = vec![false; m];
        let result = match (has_max, has_min) {
            (false, false) => local.evaluate(&values, &pick, &none, &mut lin)?,
            (true, false) | (false, true) => {
                let kind = if has_max { NodeKind::MaxPlayer } else { NodeKind::MinPlayer };
                loop {
                    iterations += 1;
                    let v = local.evaluate(&values, &pick, &none, &mut lin)?;
                    if !local.improve(&values, &v, &mut pick, kind, &none) {
                        break v;
                    }
                }
            }
            (true, true) => loop {
                iterations += 1;
                let stall = local.min_can_stall(&values, &pick);
                for (k, &i) in comp.iter().enumerate() {
                    if stall[k] && kinds[i] == NodeKind::MinPlayer {
                        let s = game.succ[i]
                            .iter()
                            .position(|&j| local.pos.get(&(j as usize)).is_some_and(|&l| stall[l]) || {
                                let j = j as usize;
                                !local.pos.contains_key(&j) && values[j].is_zero()
                            })
                            .expect("stalling Min state keeps a stalling successor");
                        pick[k] = s;
                    }
                }
                let v = loop {
                    iterations += 1;
                    let v = local.evaluate(&values, &pick, &stall, &mut lin)?;
                    if !local.improve(&values, &v, &mut pick, NodeKind::MinPlayer, &stall) {
                        break v;
                    }
                };
                if !local.improve(&values, &v, &mut pick, NodeKind::MaxPlayer, &none) {
                    break v;
                }
            },
        };
        for (k, &i) in comp.iter().enumerate() {
            values[i] = result[k].clone();
            if kinds[i].is_player() {
                choice[i] = Some(game.succ[i][pick[k]]);
            }
        }
    }
    Ok(GameSolution {
        values,
        choice,
        iterations,
        lin,
    })
}

fn player_kinds(inst: &ArrivalInstance, game: &ExpandedGame) -> (bool, bool) {
    let mut max = false;
    let mut min = false;
    for i in 0..game.len() {
        match game.kind(inst, i) {
            NodeKind::MaxPlayer => max = true,
            NodeKind::MinPlayer => min = true,
            _ => {}
        }
    }
    (max, min)
}

/// Optimal values when exactly one player kind occurs in the game.
pub fn solve_mdp(inst: &ArrivalInstance, game: &ExpandedGame, objective: Objective) -> Result<GameSolution> {
    let (max, min) = player_kinds(inst, game);
    let ok = match objective {
        Objective::Max => max && !min,
        Objective::Min => min && !max,
    };
    if !ok {
        return Err(Error::contract(format!(
            "solve_mdp with objective {objective:?} needs exactly that player kind"
        )));
    }
    solve_game(inst, game)
}

pub fn solve_ssg(inst: &ArrivalInstance, game: &ExpandedGame) -> Result<GameSolution> {
    solve_game(inst, game)
}

/// Exponent `k = 2n * |V| * M^{|V_S|}` of the bound `4^k` on value
/// numerators and denominators.
pub fn value_denominator_bound(inst: &ArrivalInstance) -> BigUint {
    let n = BigUint::from(encoding_bits(inst));
    let m = BigUint::from(inst.max_order_len());
    let power = num_traits::pow(m, inst.switch_nodes().len());
    BigUint::from(2u32) * n * BigUint::from(inst.len()) * power
}

/// Size of the canonical text encoding in bits.
pub fn encoding_bits(inst: &ArrivalInstance) -> usize {
    8 * serialize_instance(inst).len()
}

/// Whether `q <= 4^k`.
pub fn within_bound(q: &BigInt, k: &BigUint) -> bool {
    let bits = BigUint::from(q.bits());
    let two_k = k * 2u32;
    if bits <= two_k {
        return true;
    }
    // only 4^k itself has 2k + 1 bits and stays within the bound
    bits == two_k + 1u32 && q.magnitude().count_ones() == 1
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    pub qual0: bool,
    pub qual1: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quant: Option<QuantVerdict>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantVerdict {
    #[serde(serialize_with = "rational::serialize_ab")]
    pub p: Rational,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub reachable_states: usize,
    pub retained_states: usize,
    pub pivots: usize,
    pub blocks: usize,
    pub largest_block: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub k: String,
    pub denominator_bits: u64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Choice {
    pub player: &'static str,
    pub state: String,
    pub choice: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(serialize_with = "rational::serialize_ab")]
    pub value: Rational,
    pub approx_decimal: String,
    pub method: Method,
    pub verdicts: Verdicts,
    pub stats: SolveStats,
    pub bound: BoundCheck,
    pub choices: Vec<Choice>,
    #[serde(skip)]
    pub strategies: Strategies,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub budget: usize,
    pub threshold: Option<Rational>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            budget: DEFAULT_BUDGET,
            threshold: None,
        }
    }
}

fn check_threshold(p: &Rational) -> Result<()> {
    if !p.is_positive() || *p >= Rational::one() {
        return Err(Error::contract(format!(
            "threshold {} outside (0, 1)",
            rational::to_ab(p)
        )));
    }
    Ok(())
}

/// Exact value of the instance.
pub fn value(inst: &ArrivalInstance) -> Result<Rational> {
    Ok(solve(inst, &SolveOptions::default())?.value)
}

pub fn solve(inst: &ArrivalInstance, opts: &SolveOptions) -> Result<SolveReport> {
    if let Some(p) = &opts.threshold {
        check_threshold(p)?;
    }
    let game = explore(inst, opts.budget)?;
    let (has_max, has_min) = player_kinds(inst, &game);
    let mut stats = SolveStats {
        reachable_states: game.len(),
        ..SolveStats::default()
    };
    let mut lin = LinStats::default();
    let (value, method, strategies) = if !has_max && !has_min && !inst.kinds().has_players() {
        let sys = system_from_game(inst, &game);
        stats.retained_states = sys.states.len();
        let h = solve_chain_stats(&sys, &mut lin)?;
        let v = sys.start.map(|s| h[s].clone()).unwrap_or_else(Rational::zero);
        (v, Method::LinearSolve, Strategies::default())
    } else {
        let sol = solve_game(inst, &game)?;
        lin = sol.lin;
        stats.iterations = sol.iterations;
        stats.retained_states = sol.values.iter().filter(|v| v.is_positive()).count();
        let method = match (has_max, has_min) {
            (true, true) => Method::StrategyIteration,
            (false, false) => Method::LinearSolve,
            _ => Method::PolicyIteration,
        };
        (sol.values[0].clone(), method, sol.strategies(inst, &game))
    };
    stats.pivots = lin.pivots;
    stats.blocks = lin.blocks;
    stats.largest_block = lin.largest_block;
    if !rational::in_unit_interval(&value) {
        return Err(Error::invariant("value outside [0, 1]"));
    }
    let k = value_denominator_bound(inst);
    let bound = BoundCheck {
        denominator_bits: value.denom().bits(),
        holds: within_bound(value.denom(), &k) && within_bound(value.numer(), &k),
        k: k.to_string(),
    };
    let verdicts = Verdicts {
        qual0: value.is_positive(),
        qual1: value.is_one(),
        quant: opts.threshold.as_ref().map(|p| QuantVerdict {
            p: p.clone(),
            holds: value > *p,
        }),
    };
    let mut choices: Vec<Choice> = strategies
        .max
        .iter()
        .map(|(s, w)| ("max", s, w))
        .chain(strategies.min.iter().map(|(s, w)| ("min", s, w)))
        .map(|(player, s, w)| Choice {
            player,
            state: s.label(inst),
            choice: inst.name(*w).to_string(),
        })
        .collect();
    choices.sort_by(|a, b| (a.player, &a.state).cmp(&(b.player, &b.state)));
    Ok(SolveReport {
        approx_decimal: rational::approx_decimal(&value),
        value,
        method,
        verdicts,
        stats,
        bound,
        choices,
        strategies,
    })
}

/// Positive-probability reachability, decided without linear algebra.
pub fn qual0_qualitative(inst: &ArrivalInstance, budget: usize) -> Result<bool> {
    if !inst.kinds().min {
        if !hopeful_set(inst).is_hopeful(inst.start()) {
            return Ok(false);
        }
        let det = crate::reductions::random_to_player(inst);
        let game = explore(&det, budget)?;
        return Ok(game.potential(&det)[0]);
    }
    let game = explore(inst, budget)?;
    let succ: Vec<Vec<usize>> = game.succ.iter().map(|s| s.iter().map(|&j| j as usize).collect()).collect();
    let adversarial: Vec<bool> = (0..game.len()).map(|i| game.kind(inst, i) == NodeKind::MinPlayer).collect();
    let targets: Vec<usize> = (0..game.len()).filter(|&i| game.is_target(inst, i)).collect();
    Ok(attractor_reach(&succ, &adversarial, &targets)[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct Decision {
    pub problem: String,
    pub verdict: bool,
    pub method: Method,
    #[serde(serialize_with = "rational::serialize_ab_opt")]
    pub value: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_decimal: Option<String>,
}

pub fn decide(inst: &ArrivalInstance, problem: &Problem) -> Result<bool> {
    Ok(decide_within(inst, problem, DEFAULT_BUDGET)?.verdict)
}

pub fn decide_within(inst: &ArrivalInstance, problem: &Problem, budget: usize) -> Result<Decision> {
    let exact = |threshold: Option<Rational>| {
        solve(
            inst,
            &SolveOptions {
                budget,
                threshold,
            },
        )
    };
    let with_value = |name: String, verdict: bool, method: Method, v: Rational| Decision {
        problem: name,
        verdict,
        method,
        approx_decimal: Some(rational::approx_decimal(&v)),
        value: Some(v),
    };
    match problem {
        Problem::Qual0 => Ok(Decision {
            problem: "qual0".into(),
            verdict: qual0_qualitative(inst, budget)?,
            method: Method::Attractor,
            value: None,
            approx_decimal: None,
        }),
        Problem::Qual1 => {
            let rep = exact(None)?;
            if inst.kinds().is_random_switch() {
                let swapped = crate::normalize::swap_target_dead(inst)?;
                let fast = !qual0_qualitative(&swapped, budget)?;
                if fast != rep.verdicts.qual1 {
                    return Err(Error::invariant("qual1 via the swapped instance disagrees with the exact value"));
                }
            }
            Ok(with_value("qual1".into(), rep.verdicts.qual1, rep.method, rep.value))
        }
        Problem::Quant(p) => {
            let rep = exact(Some(p.clone()))?;
            let holds = rep.verdicts.quant.as_ref().expect("threshold given").holds;
            Ok(with_value(
                format!("quant {}", rational::to_ab(p)),
                holds,
                rep.method,
                rep.value,
            ))
        }
    }
}
