//! Seeded random instances and a small named corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gadgets::{gen_double_exp, gen_majsat_rs, gen_ssat_rs1, SsatInstance};
use crate::io::CnfFormula;
use crate::model::{ArrivalInstance, InstanceBuilder, KindSet, NodeId, NodeKind};
use crate::rational::ratio;

/// Shape of a random instance.
#[derive(Clone, Debug)]
pub struct RandomSpec {
    /// Number of non-absorbing vertices (at least 1).
    pub inner: usize,
    pub kinds: KindSet,
    /// Random probabilities are multiples of 1/8.
    pub dyadic: bool,
    pub max_degree: usize,
    pub max_order: usize,
    pub with_dead: bool,
}

impl RandomSpec {
    pub fn new(inner: usize, kinds: KindSet) -> Self {
        RandomSpec {
            inner,
            kinds,
            dyadic: true,
            max_degree: 3,
            max_order: 4,
            with_dead: true,
        }
    }
}

fn enabled_kinds(kinds: KindSet) -> Vec<NodeKind> {
    let mut out = Vec::new();
    if kinds.random {
        out.push(NodeKind::Random);
    }
    if kinds.switch {
        out.push(NodeKind::Switch);
    }
    if kinds.max {
        out.push(NodeKind::MaxPlayer);
    }
    if kinds.min {
        out.push(NodeKind::MinPlayer);
    }
    out
}

/// Random instance with vertex 0 as start; the target follows the inner
/// vertices, then the dead node if requested.
pub fn random_instance<R: Rng>(rng: &mut R, spec: &RandomSpec) -> ArrivalInstance {
    let kinds = enabled_kinds(spec.kinds);
    assert!(!kinds.is_empty() && spec.inner >= 1, "empty random spec");
    let mut b = InstanceBuilder::new();
    let inner: Vec<(NodeId, NodeKind)> = (0..spec.inner)
        .map(|i| {
            let k = *kinds.choose(rng).unwrap();
            (b.node(format!("v{i}"), k), k)
        })
        .collect();
    let t = b.node("t", NodeKind::Target);
    let mut all: Vec<NodeId> = inner.iter().map(|x| x.0).collect();
    all.push(t);
    if spec.with_dead {
        all.push(b.node("d", NodeKind::Dead));
    }
    let cap = if spec.dyadic { 8 } else { usize::MAX };
    for &(v, kind) in &inner {
        let deg = rng.gen_range(1..=spec.max_degree.min(all.len()).min(cap).max(1));
        let succ: Vec<NodeId> = all.choose_multiple(rng, deg).copied().collect();
        match kind {
            NodeKind::Random => {
                let weights: Vec<i64> = if spec.dyadic {
                    let mut cuts: Vec<i64> = (1..8).collect::<Vec<_>>().choose_multiple(rng, deg - 1).copied().collect();
                    cuts.push(0);
                    cuts.push(8);
                    cuts.sort_unstable();
                    cuts.windows(2).map(|w| w[1] - w[0]).collect()
                } else {
                    (0..deg).map(|_| rng.gen_range(1..=5)).collect()
                };
                let total: i64 = weights.iter().sum();
                for (w, x) in succ.iter().zip(&weights) {
                    b.random_edge(v, *w, ratio(*x, total));
                }
            }
            NodeKind::Switch => {
                let len = rng.gen_range(deg..=spec.max_order.max(deg));
                let mut order = succ.clone();
                while order.len() < len {
                    order.push(*succ.choose(rng).unwrap());
                }
                order.shuffle(rng);
                b.order(v, order);
            }
            _ => {
                for &w in &succ {
                    b.edge(v, w);
                }
            }
        }
    }
    b.start(inner[0].0);
    b.build().expect("generated instance is valid")
}

/// Random `{R,S}` instance already in simple form: `vertices - 2` inner
/// vertices, at most `max_switches` of them switching, each with two
/// distinct successors other than itself.
pub fn random_simple_rs<R: Rng>(rng: &mut R, vertices: usize, max_switches: usize) -> ArrivalInstance {
    assert!(vertices >= 3, "simple form needs an inner vertex");
    let inner = vertices - 2;
    let switches = rng.gen_range(0..=max_switches.min(inner));
    let mut is_switch = vec![false; inner];
    for s in is_switch.iter_mut().take(switches) {
        *s = true;
    }
    is_switch.shuffle(rng);
    let mut b = InstanceBuilder::new();
    let ids: Vec<NodeId> = (0..inner)
        .map(|i| {
            let kind = if is_switch[i] { NodeKind::Switch } else { NodeKind::Random };
            b.node(format!("v{i}"), kind)
        })
        .collect();
    let t = b.node("t", NodeKind::Target);
    let d = b.node("d", NodeKind::Dead);
    let mut all = ids.clone();
    all.extend([t, d]);
    for (i, &v) in ids.iter().enumerate() {
        let others: Vec<NodeId> = all.iter().copied().filter(|&w| w != v).collect();
        let pair: Vec<NodeId> = others.choose_multiple(rng, 2).copied().collect();
        if is_switch[i] {
            b.order(v, pair);
        } else {
            b.edge(v, pair[0]).edge(v, pair[1]).uniform(v);
        }
    }
    b.start(ids[0]);
    b.build().expect("generated instance is valid")
}

/// Random CNF with clauses of width 1..=`max_width` over distinct variables.
pub fn random_cnf<R: Rng>(rng: &mut R, num_vars: usize, clauses: usize, max_width: usize) -> CnfFormula {
    let vars: Vec<i32> = (1..=num_vars as i32).collect();
    let clauses = (0..clauses)
        .map(|_| {
            let w = rng.gen_range(1..=max_width.min(num_vars).max(1));
            vars.choose_multiple(rng, w)
                .map(|&v| if rng.gen_bool(0.5) { v } else { -v })
                .collect()
        })
        .collect();
    CnfFormula::new(num_vars, clauses)
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub instance: ArrivalInstance,
}

fn entry(name: impl Into<String>, instance: ArrivalInstance) -> CorpusEntry {
    CorpusEntry {
        name: name.into(),
        instance,
    }
}

fn coin() -> ArrivalInstance {
    let mut b = InstanceBuilder::new();
    let r = b.node("r", NodeKind::Random);
    let t = b.node("t", NodeKind::Target);
    let d = b.node("d", NodeKind::Dead);
    b.edge(r, t).edge(r, d).uniform(r).start(r);
    b.build().expect("valid")
}

/// Fair random walk on `0..=4` started at 1, absorbed at both ends.
fn gambler() -> ArrivalInstance {
    let mut b = InstanceBuilder::new();
    let d = b.node("p0", NodeKind::Dead);
    let mid: Vec<NodeId> = (1..4).map(|i| b.node(format!("p{i}"), NodeKind::Random)).collect();
    let t = b.node("p4", NodeKind::Target);
    let line: Vec<NodeId> = std::iter::once(d).chain(mid.iter().copied()).chain([t]).collect();
    for i in 1..4 {
        b.edge(line[i], line[i - 1]).edge(line[i], line[i + 1]).uniform(line[i]);
    }
    b.start(mid[0]);
    b.build().expect("valid")
}

/// Deterministic switching run that needs several passes before exiting.
fn arrival_counter() -> ArrivalInstance {
    let mut b = InstanceBuilder::new();
    let a = b.node("a", NodeKind::Switch);
    let c = b.node("c", NodeKind::Switch);
    let t = b.node("t", NodeKind::Target);
    let d = b.node("d", NodeKind::Dead);
    b.order(a, vec![c, a, c, t]);
    b.order(c, vec![a, a, d]);
    b.start(a);
    b.build().expect("valid")
}

/// Hand-built instances, gadgets and seeded random instances of every
/// variant. Identical for identical seeds.
pub fn small_corpus(seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        entry("coin", coin()),
        entry("gambler", gambler()),
        entry("arrival-counter", arrival_counter()),
    ];
    for n in 1..=3 {
        out.push(entry(format!("double-exp-{n}"), gen_double_exp(n).expect("n >= 1")));
    }
    let phi = CnfFormula::new(2, vec![vec![1, 2], vec![-1, 2]]);
    out.push(entry("majsat-2", gen_majsat_rs(&phi).expect("valid formula").0));
    out.push(entry(
        "ssat-rs1-2",
        gen_ssat_rs1(&SsatInstance { formula: phi }).expect("valid formula").0,
    ));
    for i in 0..12 {
        let v = rng.gen_range(3..=8);
        out.push(entry(format!("simple-rs-{i}"), random_simple_rs(&mut rng, v, 4)));
    }
    let rs = KindSet {
        random: true,
        switch: true,
        max: false,
        min: false,
    };
    for i in 0..6 {
        let spec = RandomSpec::new(rng.gen_range(2..=5), rs);
        out.push(entry(format!("dyadic-rs-{i}"), random_instance(&mut rng, &spec)));
    }
    for i in 0..4 {
        let spec = RandomSpec {
            dyadic: false,
            ..RandomSpec::new(rng.gen_range(2..=5), rs)
        };
        out.push(entry(format!("rational-rs-{i}"), random_instance(&mut rng, &spec)));
    }
    let all = KindSet {
        random: true,
        switch: true,
        max: true,
        min: true,
    };
    for i in 0..4 {
        let spec = RandomSpec::new(rng.gen_range(2..=5), all);
        out.push(entry(format!("game-{i}"), random_instance(&mut rng, &spec)));
    }
    out
}
