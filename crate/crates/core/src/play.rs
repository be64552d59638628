//! Plays, strategies and seeded sampling of random transitions.

use std::collections::HashMap;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{switch_step, ArrivalInstance, GameState, NodeId, NodeKind};
use crate::rational;

/// Player choices keyed by expanded state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrategyMap {
    choice: HashMap<GameState, NodeId>,
}

impl StrategyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, state: GameState, succ: NodeId) {
        self.choice.insert(state, succ);
    }

    pub fn get(&self, state: &GameState) -> Option<NodeId> {
        self.choice.get(state).copied()
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GameState, &NodeId)> {
        self.choice.iter()
    }
}

/// Strategies for both players. Missing entries fall back to the first
/// out-edge in adjacency order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Strategies {
    pub max: StrategyMap,
    pub min: StrategyMap,
}

impl Strategies {
    pub fn choose(&self, inst: &ArrivalInstance, state: &GameState) -> Result<NodeId> {
        let v = state.vertex;
        let map = match inst.kind(v) {
            NodeKind::MaxPlayer => &self.max,
            NodeKind::MinPlayer => &self.min,
            _ => return Err(Error::contract("strategy queried at a non-player state")),
        };
        match map.get(state) {
            None => Ok(inst.successors(v)[0]),
            Some(w) if inst.has_edge(v, w) => Ok(w),
            Some(w) => Err(Error::contract(format!(
                "strategy at '{}' picks non-successor '{}'",
                state.label(inst),
                inst.name(w)
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    ReachedTarget,
    ReachedDead,
    Truncated { limit: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayTrace {
    pub states: Vec<GameState>,
    pub outcome: Outcome,
}

impl PlayTrace {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Integer weights of one random row over a common denominator.
#[derive(Clone, Debug)]
enum Row {
    Small { cumulative: Vec<u64>, total: u64 },
    Big { cumulative: Vec<BigUint>, total: BigUint },
}

/// Exact sampler for every random node of an instance.
///
/// Each row `p_1..p_k` is scaled to integers `w_i = p_i * L` with `L` the
/// lcm of the row's denominators; an index is then drawn uniformly from
/// `0..L` by rejection, so non-dyadic probabilities are sampled without bias.
#[derive(Clone, Debug)]
pub struct RowSampler {
    rows: Vec<Option<Row>>,
}

impl RowSampler {
    pub fn new(inst: &ArrivalInstance) -> Self {
        let rows = inst
            .nodes()
            .iter()
            .map(|n| {
                if n.kind() != NodeKind::Random {
                    return None;
                }
                let probs = n.probabilities();
                let l = rational::common_denominator(probs);
                let mut acc = BigUint::zero();
                let cumulative: Vec<BigUint> = probs
                    .iter()
                    .map(|p| {
                        let num = p.numer().to_biguint().expect("positive probability");
                        let den = p.denom().to_biguint().expect("positive denominator");
                        acc += num * (&l / den);
                        acc.clone()
                    })
                    .collect();
                Some(match l.to_u64() {
                    Some(total) => Row::Small {
                        cumulative: cumulative.iter().map(|c| c.to_u64().unwrap()).collect(),
                        total,
                    },
                    None => Row::Big { cumulative, total: l },
                })
            })
            .collect();
        RowSampler { rows }
    }

    /// Index into `inst.successors(v)` for random node `v`.
    pub fn sample<R: RngCore>(&self, v: NodeId, rng: &mut R) -> usize {
        match self.rows[v.0].as_ref().expect("sampling a non-random node") {
            Row::Small { cumulative, total } => {
                let total = *total;
                let zone = u64::MAX - (u64::MAX % total + 1) % total;
                let x = loop {
                    let x = rng.gen::<u64>();
                    if x <= zone {
                        break x % total;
                    }
                };
                cumulative.partition_point(|&c| c <= x)
            }
            Row::Big { cumulative, total } => {
                let x = rng.gen_biguint_below(total);
                cumulative.partition_point(|c| *c <= x)
            }
        }
    }
}

/// Generator for run `index` of a seeded batch.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Saturating `64 * |V| * prod |order(v)|`.
pub fn default_step_limit(inst: &ArrivalInstance) -> u64 {
    let mut limit = 64u64.saturating_mul(inst.len() as u64);
    for &v in inst.switch_nodes() {
        limit = limit.saturating_mul(inst.order(v).len() as u64);
    }
    limit
}

/// Samples one play from the initial state.
pub fn run_play(inst: &ArrivalInstance, strategies: &Strategies, seed: u64, step_limit: u64) -> Result<PlayTrace> {
    let sampler = RowSampler::new(inst);
    let mut rng = run_rng(seed, 0);
    run_play_with(inst, strategies, &sampler, &mut rng, step_limit)
}

pub fn run_play_with<R: RngCore>(
    inst: &ArrivalInstance,
    strategies: &Strategies,
    sampler: &RowSampler,
    rng: &mut R,
    step_limit: u64,
) -> Result<PlayTrace> {
    if step_limit == 0 {
        return Err(Error::contract("step limit 0 yields an empty trace"));
    }
    let mut state = inst.initial_state();
    let mut states = vec![state.clone()];
    let mut steps = 0;
    let outcome = loop {
        match inst.kind(state.vertex) {
            NodeKind::Target => break Outcome::ReachedTarget,
            NodeKind::Dead => break Outcome::ReachedDead,
            _ => {}
        }
        if steps == step_limit {
            break Outcome::Truncated { limit: step_limit };
        }
        let v = state.vertex;
        state = match inst.kind(v) {
            NodeKind::Switch => switch_step(inst, &state),
            NodeKind::Random => {
                let w = inst.successors(v)[sampler.sample(v, rng)];
                GameState { vertex: w, ..state }
            }
            _ => {
                let w = strategies.choose(inst, &state)?;
                GameState { vertex: w, ..state }
            }
        };
        states.push(state.clone());
        steps += 1;
    };
    Ok(PlayTrace { states, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{valid_successors, InstanceBuilder};
    use crate::rational::ratio;

    #[test]
    fn direct_edge_reaches_target_in_one_step() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        b.random_edge(s, t, ratio(1, 1)).start(s);
        let g = b.build().unwrap();
        let tr = run_play(&g, &Strategies::default(), 7, 10).unwrap();
        assert_eq!(tr.outcome, Outcome::ReachedTarget);
        assert_eq!(tr.steps(), 1);
    }

    #[test]
    fn switch_takes_first_entry_first() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Switch);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.order(s, vec![d, t]).start(s);
        let g = b.build().unwrap();
        let tr = run_play(&g, &Strategies::default(), 0, 10).unwrap();
        assert_eq!(tr.outcome, Outcome::ReachedDead);
    }

    #[test]
    fn zero_limit_is_rejected() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::MaxPlayer);
        let t = b.node("t", NodeKind::Target);
        b.edge(s, t).start(s);
        let g = b.build().unwrap();
        assert!(run_play(&g, &Strategies::default(), 0, 0).is_err());
    }

    #[test]
    fn truncation_and_trace_validity() {
        let mut b = InstanceBuilder::new();
        let a = b.node("a", NodeKind::Random);
        let c = b.node("c", NodeKind::Switch);
        let t = b.node("t", NodeKind::Target);
        b.random_edge(a, c, ratio(2, 3)).random_edge(a, t, ratio(1, 3));
        b.order(c, vec![a, a, t]).start(a);
        let g = b.build().unwrap();
        for seed in 0..50 {
            let tr = run_play(&g, &Strategies::default(), seed, 5).unwrap();
            assert!(tr.steps() <= 5);
            for w in tr.states.windows(2) {
                assert!(valid_successors(&g, &w[0]).unwrap().contains(&w[1]));
            }
            assert_eq!(tr, run_play(&g, &Strategies::default(), seed, 5).unwrap());
        }
    }

    #[test]
    fn sampler_matches_thirds() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.random_edge(s, t, ratio(1, 3)).random_edge(s, d, ratio(2, 3)).start(s);
        let g = b.build().unwrap();
        let sampler = RowSampler::new(&g);
        let mut rng = run_rng(11, 0);
        let n = 60_000;
        let hits = (0..n).filter(|_| sampler.sample(s, &mut rng) == 0).count() as f64;
        let p = 1.0 / 3.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 5.0 * sigma);
    }

    #[test]
    fn big_denominators_sample_in_range() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        let p = rational::pow2_neg(100);
        b.random_edge(s, t, p.clone()).random_edge(s, d, rational::one() - p).start(s);
        let g = b.build().unwrap();
        let sampler = RowSampler::new(&g);
        let mut rng = run_rng(3, 1);
        for _ in 0..100 {
            assert!(sampler.sample(s, &mut rng) < 2);
        }
    }
}
