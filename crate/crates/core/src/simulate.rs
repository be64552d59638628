//! Monte-Carlo value estimates and per-edge traversal statistics.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::hopeful_set;
use crate::error::{Error, Result};
use crate::model::{ArrivalInstance, GameState, NodeKind, SwitchPosition};
use crate::play::{default_step_limit, run_rng, RowSampler, Strategies};
use crate::rational::{self, Rational};

/// Upper bound on steps per run, whatever [`default_step_limit`] says.
pub const STEP_CAP: u64 = 10_000_000;

/// Allowance in standard errors before an edge mean is flagged.
pub const SIGMA_ALLOWANCE: f64 = 5.0;

#[derive(Clone, Debug, Serialize)]
pub struct HistogramBucket {
    /// Inclusive step range.
    pub min: u64,
    pub max: u64,
    pub count: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeStats {
    pub from: String,
    pub to: String,
    /// Desperation of the head; absent for edges into non-hopeful vertices.
    pub desperation: Option<usize>,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    /// `2^(k+1) - 1` for desperation `k`.
    pub bound: Option<f64>,
    pub exceeds_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    pub samples: u64,
    pub seed: u64,
    pub step_limit: u64,
    pub reached_target: u64,
    pub reached_dead: u64,
    pub truncated: u64,
    #[serde(serialize_with = "rational::serialize_ab")]
    pub reach_frequency: Rational,
    pub reach_frequency_approx: String,
    pub step_histogram: Vec<HistogramBucket>,
    pub edges: Vec<EdgeStats>,
    pub flagged_edges: usize,
}

impl SimReport {
    pub fn truncation_fraction(&self) -> f64 {
        self.truncated as f64 / self.samples as f64
    }
}

/// Step limit used by the estimators.
pub fn step_limit(inst: &ArrivalInstance) -> u64 {
    default_step_limit(inst).min(STEP_CAP)
}

/// Edge numbering: edges of `v` are `offset[v] .. offset[v + 1]`, in
/// successor order.
struct EdgeIndex {
    offset: Vec<usize>,
    /// For each switch node, the edge taken at each order position.
    order_edge: Vec<Vec<usize>>,
}

impl EdgeIndex {
    fn new(inst: &ArrivalInstance) -> Self {
        let mut offset = vec![0];
        for v in inst.node_ids() {
            offset.push(offset[v.0] + inst.successors(v).len());
        }
        let order_edge = inst
            .node_ids()
            .map(|v| {
                let succ = inst.successors(v);
                inst.order(v)
                    .iter()
                    .map(|w| offset[v.0] + succ.iter().position(|x| x == w).expect("order entry is an edge"))
                    .collect()
            })
            .collect();
        EdgeIndex { offset, order_edge }
    }

    fn len(&self) -> usize {
        *self.offset.last().unwrap()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    Target,
    Dead,
    Truncated,
}

#[derive(Clone)]
struct Acc {
    target: u64,
    dead: u64,
    truncated: u64,
    histogram: Vec<u64>,
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
}

impl Acc {
    fn new(edges: usize, track: bool) -> Self {
        let e = if track { edges } else { 0 };
        Acc {
            target: 0,
            dead: 0,
            truncated: 0,
            histogram: vec![0; 65],
            sum: vec![0; e],
            sum_sq: vec![0; e],
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.target += other.target;
        self.dead += other.dead;
        self.truncated += other.truncated;
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self
    }
}

struct Runner<'a> {
    inst: &'a ArrivalInstance,
    strategies: &'a Strategies,
    sampler: RowSampler,
    edges: EdgeIndex,
    limit: u64,
    track: bool,
}

impl Runner<'_> {
    /// One play; traversal counts are added to `counts` and the touched
    /// edges pushed to `touched`.
    fn run(&self, seed: u64, index: u64, counts: &mut [u64], touched: &mut Vec<usize>) -> Result<(End, u64)> {
        let inst = self.inst;
        let mut rng = run_rng(seed, index);
        let mut v = inst.start();
        let mut q = inst.initial_state().switches.0;
        let mut steps = 0u64;
        loop {
            match inst.kind(v) {
                NodeKind::Target => return Ok((End::Target, steps)),
                NodeKind::Dead => return Ok((End::Dead, steps)),
                _ => {}
            }
            if steps == self.limit {
                return Ok((End::Truncated, steps));
            }
            let edge = match inst.kind(v) {
                NodeKind::Switch => {
                    let slot = inst.switch_slot(v).expect("switch node has a slot");
                    let pos = q[slot] as usize;
                    q[slot] = ((pos + 1) % inst.order(v).len()) as u32;
                    self.edges.order_edge[v.0][pos]
                }
                NodeKind::Random => self.edges.offset[v.0] + self.sampler.sample(v, &mut rng),
                _ => {
                    let state = GameState {
                        vertex: v,
                        switches: SwitchPosition(q.clone()),
                    };
                    let w = self.strategies.choose(inst, &state)?;
                    let i = inst.successors(v).iter().position(|&x| x == w).expect("choice is a successor");
                    self.edges.offset[v.0] + i
                }
            };
            v = inst.successors(v)[edge - self.edges.offset[v.0]];
            steps += 1;
            if self.track {
                if counts[edge] == 0 {
                    touched.push(edge);
                }
                counts[edge] += 1;
            }
        }
    }

    fn batch(&self, samples: u64, seed: u64) -> Result<Acc> {
        let e = self.edges.len();
        (0..samples)
            .into_par_iter()
            .try_fold(
                || (Acc::new(e, self.track), vec![0u64; if self.track { e } else { 0 }], Vec::new()),
                |(mut acc, mut counts, mut touched), i| {
                    let (end, steps) = self.run(seed, i, &mut counts, &mut touched)?;
                    match end {
                        End::Target => acc.target += 1,
                        End::Dead => acc.dead += 1,
                        End::Truncated => acc.truncated += 1,
                    }
                    acc.histogram[(64 - steps.leading_zeros()) as usize] += 1;
                    for &k in &touched {
                        let c = counts[k];
                        acc.sum[k] += c;
                        acc.sum_sq[k] += u128::from(c) * u128::from(c);
                        counts[k] = 0;
                    }
                    touched.clear();
                    Ok::<_, Error>((acc, counts, touched))
                },
            )
            .map(|r| r.map(|(acc, _, _)| acc))
            .try_reduce(|| Acc::new(e, self.track), |a, b| Ok(a.merge(b)))
    }
}

fn histogram(counts: &[u64]) -> Vec<HistogramBucket> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(b, &count)| {
            let (min, max) = match b {
                0 => (0, 0),
                64 => (1 << 63, u64::MAX),
                _ => (1u64 << (b - 1), (1u64 << b) - 1),
            };
            HistogramBucket { min, max, count }
        })
        .collect()
}

fn report(samples: u64, seed: u64, limit: u64, acc: &Acc) -> SimReport {
    let freq = rational::ratio(acc.target as i64, samples as i64);
    SimReport {
        samples,
        seed,
        step_limit: limit,
        reached_target: acc.target,
        reached_dead: acc.dead,
        truncated: acc.truncated,
        reach_frequency_approx: rational::approx_decimal(&freq),
        reach_frequency: freq,
        step_histogram: histogram(&acc.histogram),
        edges: Vec::new(),
        flagged_edges: 0,
    }
}

/// Fraction of `samples` seeded plays that reach the target, with players
/// following `strategies`. Run `i` uses [`run_rng`]`(seed, i)`.
pub fn estimate_value(inst: &ArrivalInstance, strategies: &Strategies, samples: u64, seed: u64) -> Result<SimReport> {
    if samples == 0 {
        return Err(Error::contract("at least one sample is needed"));
    }
    let runner = Runner {
        inst,
        strategies,
        sampler: RowSampler::new(inst),
        edges: EdgeIndex::new(inst),
        limit: step_limit(inst),
        track: false,
    };
    let acc = runner.batch(samples, seed)?;
    Ok(report(samples, seed, runner.limit, &acc))
}

/// Empirical mean number of traversals of every edge, compared against
/// `2^(k+1) - 1` for hopeful edges of desperation `k`. The bound is meant
/// for simple-form instances with dead edges pruned.
pub fn traversal_stats(inst: &ArrivalInstance, samples: u64, seed: u64) -> Result<SimReport> {
    if inst.kinds().has_players() {
        return Err(Error::contract("traversal statistics need an instance without player nodes"));
    }
    if samples == 0 {
        return Err(Error::contract("at least one sample is needed"));
    }
    let strategies = Strategies::default();
    let runner = Runner {
        inst,
        strategies: &strategies,
        sampler: RowSampler::new(inst),
        edges: EdgeIndex::new(inst),
        limit: step_limit(inst),
        track: true,
    };
    let acc = runner.batch(samples, seed)?;
    let hope = hopeful_set(inst);
    let n = samples as f64;
    let mut edges = Vec::with_capacity(runner.edges.len());
    for v in inst.node_ids() {
        if inst.kind(v).is_absorbing() {
            continue;
        }
        for (i, &w) in inst.successors(v).iter().enumerate() {
            let k = runner.edges.offset[v.0] + i;
            let mean = acc.sum[k] as f64 / n;
            let var = (acc.sum_sq[k] as f64 / n - mean * mean).max(0.0);
            let std_error = (var / n).sqrt();
            let desperation = if hope.is_hopeful_edge(v, w) {
                hope.desperation.get(&w).copied()
            } else {
                None
            };
            let bound = desperation.map(|d| 2f64.powi(d as i32 + 1) - 1.0);
            let exceeds_bound = bound.is_some_and(|b| mean > b + SIGMA_ALLOWANCE * std_error);
            edges.push(EdgeStats {
                from: inst.name(v).to_string(),
                to: inst.name(w).to_string(),
                desperation,
                mean,
                std_dev: var.sqrt(),
                std_error,
                bound,
                exceeds_bound,
            });
        }
    }
    let mut rep = report(samples, seed, runner.limit, &acc);
    rep.flagged_edges = edges.iter().filter(|e| e.exceeds_bound).count();
    rep.edges = edges;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadgets::gen_double_exp;
    use crate::model::InstanceBuilder;

    fn coin() -> ArrivalInstance {
        let mut b = InstanceBuilder::new();
        let r = b.node("r", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.edge(r, t).edge(r, d).uniform(r).start(r);
        b.build().unwrap()
    }

    #[test]
    fn coin_frequency_near_half() {
        let rep = estimate_value(&coin(), &Strategies::default(), 100_000, 7).unwrap();
        let f = rational::to_f64_lossy(&rep.reach_frequency);
        let sigma = (0.25f64 / 100_000.0).sqrt();
        assert!((f - 0.5).abs() <= 3.0 * sigma, "{f}");
        assert_eq!(rep.reached_target + rep.reached_dead, 100_000);
    }

    #[test]
    fn deterministic_given_seed() {
        let g = gen_double_exp(2).unwrap();
        let a = format!("{:?}", traversal_stats(&g, 2000, 3).unwrap());
        let b = format!("{:?}", traversal_stats(&g, 2000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn desperation_zero_edges_are_traversed_at_most_once() {
        let rep = traversal_stats(&gen_double_exp(2).unwrap(), 5000, 1).unwrap();
        for e in rep.edges.iter().filter(|e| e.desperation == Some(0)) {
            assert!(e.mean <= 1.0);
        }
        assert_eq!(rep.flagged_edges, 0);
        assert_eq!(rep.truncated, 0);
    }

    #[test]
    fn players_are_rejected() {
        let mut b = InstanceBuilder::new();
        let m = b.node("m", NodeKind::MaxPlayer);
        let t = b.node("t", NodeKind::Target);
        b.edge(m, t).start(m);
        assert!(traversal_stats(&b.build().unwrap(), 10, 0).is_err());
        assert!(estimate_value(&coin(), &Strategies::default(), 0, 0).is_err());
    }
}
