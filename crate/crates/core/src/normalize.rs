//! Value-preserving (or affinely shifting) instance transformations.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::analysis::hopeful_set;
use crate::error::{Error, Result};
use crate::model::{ArrivalInstance, Node, NodeId, NodeKind};
use crate::rational::{self, Rational};

/// Mutable graph with stable indices, used while rewriting.
pub(crate) struct Work {
    pub(crate) nodes: Vec<Option<Node>>,
    pub(crate) start: usize,
    pub(crate) target: usize,
    pub(crate) dead: Option<usize>,
    names: HashSet<String>,
}

impl Work {
    pub(crate) fn new(inst: &ArrivalInstance) -> Self {
        let start = inst.start().0;
        let target = inst.target().0;
        let dead = inst.dead().map(|d| d.0);
        let nodes: Vec<Option<Node>> = inst.nodes().iter().cloned().map(Some).collect();
        let names = inst.nodes().iter().map(|n| n.name.clone()).collect();
        Work {
            nodes,
            start,
            target,
            dead,
            names,
        }
    }

    pub(crate) fn node(&self, v: usize) -> &Node {
        self.nodes[v].as_ref().expect("live node")
    }

    pub(crate) fn node_mut(&mut self, v: usize) -> &mut Node {
        self.nodes[v].as_mut().expect("live node")
    }

    fn live(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].is_some()).collect()
    }

    pub(crate) fn fresh_name(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut i = 1;
        while self.names.contains(&name) {
            name = format!("{base}{i}");
            i += 1;
        }
        self.names.insert(name.clone());
        name
    }

    pub(crate) fn add(&mut self, base: &str, kind: NodeKind) -> usize {
        let name = self.fresh_name(base);
        let id = self.nodes.len();
        let succ = if kind.is_absorbing() { vec![NodeId(id)] } else { Vec::new() };
        self.nodes.push(Some(Node {
            name,
            kind,
            succ,
            prob: Vec::new(),
            order: Vec::new(),
        }));
        id
    }

    pub(crate) fn ensure_dead(&mut self) -> usize {
        if let Some(d) = self.dead {
            return d;
        }
        let d = self.add("dead", NodeKind::Dead);
        self.dead = Some(d);
        d
    }

    pub(crate) fn set_order(&mut self, v: usize, order: Vec<usize>) {
        let n = self.node_mut(v);
        n.order = order.into_iter().map(NodeId).collect();
        let mut succ = Vec::new();
        for &w in &n.order {
            if !succ.contains(&w) {
                succ.push(w);
            }
        }
        n.succ = succ;
    }

    pub(crate) fn set_random(&mut self, v: usize, row: Vec<(usize, Rational)>) {
        let mut succ: Vec<NodeId> = Vec::new();
        let mut prob: Vec<Rational> = Vec::new();
        for (w, p) in row {
            match succ.iter().position(|&x| x.0 == w) {
                Some(i) => prob[i] += p,
                None => {
                    succ.push(NodeId(w));
                    prob.push(p);
                }
            }
        }
        let n = self.node_mut(v);
        n.succ = succ;
        n.prob = prob;
    }

    pub(crate) fn set_player(&mut self, v: usize, succ: Vec<usize>) {
        let mut out: Vec<NodeId> = Vec::new();
        for w in succ {
            if !out.contains(&NodeId(w)) {
                out.push(NodeId(w));
            }
        }
        self.node_mut(v).succ = out;
    }

    /// Replaces every use of `from` in the out-structure of `x` by `to`.
    pub(crate) fn redirect(&mut self, x: usize, from: usize, to: usize) {
        let n = self.node(x);
        if !n.succ.iter().any(|w| w.0 == from) {
            return;
        }
        let sub = |w: NodeId| if w.0 == from { to } else { w.0 };
        match n.kind {
            NodeKind::Random => {
                let row = n.succ.iter().zip(&n.prob).map(|(w, p)| (sub(*w), p.clone())).collect();
                self.set_random(x, row);
            }
            NodeKind::Switch => {
                let order = n.order.iter().map(|&w| sub(w)).collect();
                self.set_order(x, order);
            }
            _ => {
                let succ = n.succ.iter().map(|&w| sub(w)).collect();
                self.set_player(x, succ);
            }
        }
    }

    pub(crate) fn finish(self) -> Result<ArrivalInstance> {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (v, n) in self.nodes.iter().enumerate() {
            if n.is_some() {
                map[v] = next;
                next += 1;
            }
        }
        let nodes: Vec<Node> = self
            .nodes
            .into_iter()
            .flatten()
            .map(|mut n| {
                n.succ = n.succ.iter().map(|w| NodeId(map[w.0])).collect();
                n.order = n.order.iter().map(|w| NodeId(map[w.0])).collect();
                n
            })
            .collect();
        ArrivalInstance::from_parts(nodes, NodeId(map[self.start]))
    }
}

fn remove_self_loops(w: &mut Work) -> bool {
    let mut changed = false;
    for v in w.live() {
        let n = w.node(v);
        if n.kind.is_absorbing() || !n.succ.iter().any(|x| x.0 == v) {
            continue;
        }
        changed = true;
        match n.kind {
            NodeKind::Random => {
                let i = n.succ.iter().position(|x| x.0 == v).unwrap();
                let stay = n.prob[i].clone();
                if stay.is_one() {
                    let d = w.ensure_dead();
                    w.set_random(v, vec![(d, rational::one())]);
                } else {
                    let keep = Rational::one() - stay;
                    let row = n
                        .succ
                        .iter()
                        .zip(&n.prob)
                        .filter(|(x, _)| x.0 != v)
                        .map(|(x, p)| (x.0, p / &keep))
                        .collect();
                    w.set_random(v, row);
                }
            }
            NodeKind::Switch => {
                let order: Vec<usize> = n.order.iter().map(|x| x.0).filter(|&x| x != v).collect();
                if order.is_empty() {
                    let d = w.ensure_dead();
                    w.set_order(v, vec![d]);
                } else {
                    w.set_order(v, order);
                }
            }
            NodeKind::MaxPlayer => {
                let succ: Vec<usize> = n.succ.iter().map(|x| x.0).filter(|&x| x != v).collect();
                if succ.is_empty() {
                    let d = w.ensure_dead();
                    w.set_player(v, vec![d]);
                } else {
                    w.set_player(v, succ);
                }
            }
            NodeKind::MinPlayer => {
                let mut succ: Vec<usize> = n.succ.iter().map(|x| x.0).filter(|&x| x != v).collect();
                succ.push(w.ensure_dead());
                w.set_player(v, succ);
            }
            NodeKind::Target | NodeKind::Dead => unreachable!(),
        }
    }
    changed
}

/// Removes out-degree-1 vertices, lowest index first.
fn contract(w: &mut Work) -> bool {
    let budget = w.live().len();
    let mut steps = 0;
    loop {
        let pick = w.live().into_iter().find(|&v| {
            let n = w.node(v);
            !n.kind.is_absorbing() && n.succ.len() == 1 && n.succ[0].0 != v
        });
        let Some(u) = pick else { break };
        steps += 1;
        assert!(steps <= budget, "contraction exceeded |V| steps");
        let to = w.node(u).succ[0].0;
        for x in w.live() {
            if x != u {
                w.redirect(x, u, to);
            }
        }
        if w.start == u {
            w.start = to;
        }
        w.nodes[u] = None;
    }
    steps > 0
}

fn split_random(w: &mut Work) -> bool {
    let mut changed = false;
    for v in w.live() {
        let n = w.node(v);
        if n.kind != NodeKind::Random || n.succ.len() < 3 {
            continue;
        }
        changed = true;
        let mut rest: Vec<(usize, Rational)> = n.succ.iter().map(|x| x.0).zip(n.prob.iter().cloned()).collect();
        let name = n.name.clone();
        let mut cur = v;
        while rest.len() > 2 {
            let (w0, p0) = rest.remove(0);
            let keep = Rational::one() - &p0;
            let next = w.add(&format!("{name}~s"), NodeKind::Random);
            w.set_random(cur, vec![(w0, p0), (next, keep.clone())]);
            rest = rest.into_iter().map(|(x, p)| (x, p / &keep)).collect();
            cur = next;
        }
        w.set_random(cur, rest);
    }
    changed
}

/// Replaces a two-way random choice with probabilities `a/b`, `1 - a/b` by
/// fair coins: `k` flips pick a point of `[0, 2^k)`, most significant bit
/// first, and the walk stops as soon as its interval lies inside `[0, a)`,
/// `[a, b)` or `[b, 2^k)`, the last restarting at the root.
fn coins(w: &mut Work) -> bool {
    let half = rational::half();
    let mut changed = false;
    for v in w.live() {
        let n = w.node(v);
        if n.kind != NodeKind::Random || n.succ.len() != 2 || n.prob[0] == half {
            continue;
        }
        changed = true;
        let (first, second) = (n.succ[0].0, n.succ[1].0);
        let a = n.prob[0].numer().to_biguint().unwrap();
        let b = n.prob[0].denom().to_biguint().unwrap();
        let k = (&b - 1u32).bits();
        let name = n.name.clone();
        let size = BigUint::one() << k;
        build_coin(w, v, v, &name, BigUint::zero(), size, &a, &b, first, second);
    }
    changed
}

#[allow(clippy::too_many_arguments)]
fn build_coin(
    w: &mut Work,
    node: usize,
    root: usize,
    name: &str,
    lo: BigUint,
    size: BigUint,
    a: &BigUint,
    b: &BigUint,
    first: usize,
    second: usize,
) {
    let half: BigUint = &size >> 1u32;
    let mut row = Vec::new();
    for child_lo in [lo.clone(), &lo + &half] {
        let hi = &child_lo + &half;
        let to = if &hi <= a {
            first
        } else if &child_lo >= a && &hi <= b {
            second
        } else if &child_lo >= b {
            root
        } else {
            let c = w.add(&format!("{name}~c"), NodeKind::Random);
            build_coin(w, c, root, name, child_lo, half.clone(), a, b, first, second);
            c
        };
        row.push((to, rational::half()));
    }
    w.set_random(node, row);
}

fn ceil_log2(m: usize) -> u32 {
    usize::BITS - (m - 1).leading_zeros()
}

fn reverse_bits(x: usize, k: u32) -> usize {
    (0..k).fold(0, |acc, i| (acc << 1) | ((x >> i) & 1))
}

/// Binary switch tree: visit `j` of the root reaches slot `reverse(j)`;
/// slots past the order length lead back to the root.
fn switch_trees(w: &mut Work) -> bool {
    let mut changed = false;
    for v in w.live() {
        let n = w.node(v);
        if n.kind != NodeKind::Switch || n.order.len() <= 2 {
            continue;
        }
        changed = true;
        let order: Vec<usize> = n.order.iter().map(|x| x.0).collect();
        let name = n.name.clone();
        let m = order.len();
        let k = ceil_log2(m);
        let mut slots = vec![v; 1 << k];
        for (j, &x) in order.iter().enumerate() {
            slots[reverse_bits(j, k)] = x;
        }
        let children = tree_level(w, &name, NodeKind::Switch, 1, k, 0, &slots);
        w.set_order(v, children.to_vec());
    }
    changed
}

/// Builds the two children of the tree node at `depth` with path `path`;
/// nodes at depth `k - 1` point at `leaves`.
fn tree_level(w: &mut Work, name: &str, kind: NodeKind, depth: u32, k: u32, path: usize, leaves: &[usize]) -> [usize; 2] {
    let mut out = [0; 2];
    for (bit, slot) in out.iter_mut().enumerate() {
        let p = (path << 1) | bit;
        *slot = if depth == k {
            leaves[p]
        } else {
            let c = w.add(&format!("{name}~t"), kind);
            let kids = tree_level(w, name, kind, depth + 1, k, p, leaves);
            match kind {
                NodeKind::Switch => w.set_order(c, kids.to_vec()),
                _ => w.set_player(c, kids.to_vec()),
            }
            c
        };
    }
    out
}

/// Binary player tree: `2^(k-1)` bottom nodes take one successor each and
/// the remaining successors as second edges.
fn player_trees(w: &mut Work) -> bool {
    let mut changed = false;
    for v in w.live() {
        let n = w.node(v);
        if !n.kind.is_player() || n.succ.len() <= 2 {
            continue;
        }
        changed = true;
        let succ: Vec<usize> = n.succ.iter().map(|x| x.0).collect();
        let (name, kind) = (n.name.clone(), n.kind);
        let k = ceil_log2(succ.len());
        let bottom = 1usize << (k - 1);
        let mut leaves = Vec::with_capacity(bottom);
        for i in 0..bottom {
            let c = w.add(&format!("{name}~t"), kind);
            let mut out = vec![succ[i]];
            if let Some(&x) = succ.get(bottom + i) {
                out.push(x);
            }
            w.set_player(c, out);
            leaves.push(c);
        }
        let children = tree_level(w, &name, kind, 1, k - 1, 0, &leaves);
        w.set_player(v, children.to_vec());
    }
    changed
}

/// Rewrites into simple form: a dead node exists, target and dead node are
/// the only out-degree-1 vertices, every other vertex has out-degree 2,
/// random edges carry probability 1/2 and switching orders are two distinct
/// successors.
pub fn to_simple_form(inst: &ArrivalInstance) -> Result<ArrivalInstance> {
    let mut w = Work::new(inst);
    w.ensure_dead();
    loop {
        let mut changed = remove_self_loops(&mut w);
        changed |= contract(&mut w);
        changed |= split_random(&mut w);
        changed |= coins(&mut w);
        changed |= switch_trees(&mut w);
        changed |= player_trees(&mut w);
        if !changed {
            break;
        }
    }
    w.finish()
}

/// Whether `inst` already satisfies the simple-form shape.
pub fn is_simple_form(inst: &ArrivalInstance) -> bool {
    if inst.dead().is_none() {
        return false;
    }
    inst.node_ids().all(|v| {
        let n = inst.node(v);
        match n.kind() {
            NodeKind::Target | NodeKind::Dead => true,
            _ if n.successors().len() != 2 || n.successors().contains(&v) => false,
            NodeKind::Random => n.probabilities().iter().all(|p| *p == rational::half()),
            NodeKind::Switch => n.order().len() == 2,
            _ => true,
        }
    })
}

/// Sends every edge into a vertex that is not hopeful to the dead node.
pub fn prune_dead_edges(inst: &ArrivalInstance) -> Result<ArrivalInstance> {
    let hope = hopeful_set(inst);
    let mut w = Work::new(inst);
    let needed = inst.node_ids().any(|v| {
        !inst.kind(v).is_absorbing() && inst.successors(v).iter().any(|x| !hope.is_hopeful(*x) && Some(*x) != inst.dead())
    });
    if !needed {
        return Ok(inst.clone());
    }
    let d = w.ensure_dead();
    for v in 0..inst.len() {
        if inst.kind(NodeId(v)).is_absorbing() {
            continue;
        }
        for x in inst.successors(NodeId(v)).to_vec() {
            if !hope.is_hopeful(x) && x.0 != d {
                w.redirect(v, x.0, d);
            }
        }
    }
    w.finish()
}

/// Exchanges target and dead node of an `{R,S}` instance after pruning
/// dead edges, so that `val(out) = 1 - val(in)`.
pub fn swap_target_dead(inst: &ArrivalInstance) -> Result<ArrivalInstance> {
    if inst.kinds().has_players() {
        return Err(Error::contract("swap_target_dead needs an instance without player nodes"));
    }
    let pruned = prune_dead_edges(inst)?;
    let mut w = Work::new(&pruned);
    let d = w.ensure_dead();
    let t = w.target;
    w.node_mut(t).kind = NodeKind::Dead;
    w.node_mut(d).kind = NodeKind::Target;
    w.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoinBranch {
    ToTarget,
    ToDead,
}

/// New uniform random start choosing between the old start and the target
/// (`(1 + v) / 2`) or a dead end (`v / 2`).
pub fn prefix_coin(inst: &ArrivalInstance, branch: CoinBranch) -> Result<ArrivalInstance> {
    let mut w = Work::new(inst);
    let other = match branch {
        CoinBranch::ToTarget => w.target,
        CoinBranch::ToDead => w.ensure_dead(),
    };
    let s = w.add("coin", NodeKind::Random);
    let old = w.start;
    w.set_random(s, vec![(old, rational::half()), (other, rational::half())]);
    w.start = s;
    w.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftVariant {
    /// `v + eps (1 - v)`
    Strict,
    /// `v - eps v`
    Dead,
}

/// Default gadget depth `3 M n + 3 n + 3` with `n` the encoding size in bits
/// and `M` the longest switching order.
pub fn default_depth(inst: &ArrivalInstance) -> u64 {
    let n = crate::solve::encoding_bits(inst) as u64;
    let m = inst.max_order_len() as u64;
    3 * m * n + 3 * n + 3
}

/// Prefixes a depth-`l` double-exponential gadget: with probability
/// `eps = 2^-(2^l - 1)` the play jumps to the target (or a dead end) and
/// otherwise enters the instance.
pub fn geq_to_strict(inst: &ArrivalInstance, l: Option<u64>, variant: ShiftVariant) -> Result<ArrivalInstance> {
    let l = l.unwrap_or_else(|| default_depth(inst));
    if l == 0 {
        return Err(Error::contract("gadget depth must be at least 1"));
    }
    let mut w = Work::new(inst);
    let exit = match variant {
        ShiftVariant::Strict => w.target,
        ShiftVariant::Dead => w.ensure_dead(),
    };
    let old = w.start;
    let entry = w.add("eps~start", NodeKind::Switch);
    let coin = w.add("eps~x", NodeKind::Random);
    let chain: Vec<usize> = (1..=l).map(|i| w.add(&format!("eps~s{i}"), NodeKind::Switch)).collect();
    w.set_order(entry, vec![chain[0]]);
    for (i, &s) in chain.iter().enumerate() {
        let next = chain.get(i + 1).copied().unwrap_or(exit);
        w.set_order(s, vec![coin, next]);
    }
    w.set_random(coin, vec![(chain[0], rational::half()), (old, rational::half())]);
    w.start = entry;
    w.finish()
}

/// `2^-(2^l - 1)`.
pub fn epsilon(l: u64) -> Rational {
    rational::pow2_neg((1u64 << l) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;
    use crate::rational::ratio;
    use crate::solve::value;

    #[test]
    fn bit_reversal() {
        assert_eq!(reverse_bits(1, 2), 2);
        assert_eq!(reverse_bits(3, 3), 6);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
    }

    #[test]
    fn coin_thirds() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.random_edge(s, t, ratio(1, 3)).random_edge(s, d, ratio(2, 3)).start(s);
        let g = b.build().unwrap();
        let h = to_simple_form(&g).unwrap();
        assert!(is_simple_form(&h));
        assert_eq!(value(&h).unwrap(), ratio(1, 3));
    }

    #[test]
    fn switch_of_three() {
        let mut b = InstanceBuilder::new();
        let r = b.node("r", NodeKind::Random);
        let s = b.node("s", NodeKind::Switch);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.random_edge(r, s, ratio(1, 2)).random_edge(r, d, ratio(1, 2));
        b.order(s, vec![r, r, t]).start(s);
        let g = b.build().unwrap();
        let h = to_simple_form(&g).unwrap();
        assert!(is_simple_form(&h), "{}", crate::io::serialize_instance(&h));
        assert_eq!(value(&h).unwrap(), value(&g).unwrap());
    }

    #[test]
    fn already_simple_gains_only_dead() {
        let mut b = InstanceBuilder::new();
        let r = b.node("r", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let x = b.node("x", NodeKind::MaxPlayer);
        b.random_edge(r, t, ratio(1, 2)).random_edge(r, x, ratio(1, 2));
        b.edge(x, r).edge(x, t).start(r);
        let g = b.build().unwrap();
        let h = to_simple_form(&g).unwrap();
        assert_eq!(h.len(), g.len() + 1);
        assert_eq!(h.kind(NodeId(3)), NodeKind::Dead);
    }

    #[test]
    fn prune_unreachable_target() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let a = b.node("a", NodeKind::Switch);
        b.node("t", NodeKind::Target);
        b.random_edge(s, a, ratio(1, 2)).random_edge(s, s, ratio(1, 2));
        b.order(a, vec![s]).start(s);
        let g = b.build().unwrap();
        let h = prune_dead_edges(&g).unwrap();
        let d = h.dead().unwrap();
        assert_eq!(h.successors(h.start()), &[d]);
        assert_eq!(value(&h).unwrap(), ratio(0, 1));
    }

    #[test]
    fn prefix_algebra() {
        let mut b = InstanceBuilder::new();
        let s = b.node("s", NodeKind::Random);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.random_edge(s, t, ratio(1, 3)).random_edge(s, d, ratio(2, 3)).start(s);
        let g = b.build().unwrap();
        let up = prefix_coin(&g, CoinBranch::ToTarget).unwrap();
        assert_eq!(value(&up).unwrap(), ratio(2, 3));
        let both = prefix_coin(&up, CoinBranch::ToDead).unwrap();
        assert_eq!(value(&both).unwrap(), ratio(1, 3));
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon(1), ratio(1, 2));
        assert_eq!(epsilon(2), ratio(1, 8));
    }
}
