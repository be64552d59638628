//! Hardness gadget families.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::CnfFormula;
use crate::model::{ArrivalInstance, InstanceBuilder, NodeId, NodeKind};
use crate::rational::{self, Rational};
use crate::reductions::dualize_players;

/// Chain whose target needs `2^n` visits to `s1`, each but the first paid
/// for with a fair coin: value `2^-(2^n - 1)`.
pub fn gen_double_exp(n: usize) -> Result<ArrivalInstance> {
    if n == 0 {
        return Err(Error::contract("double-exp gadget needs n >= 1"));
    }
    let mut b = InstanceBuilder::new();
    let start = b.node("start", NodeKind::Switch);
    let s: Vec<NodeId> = (1..=n).map(|i| b.node(format!("s{i}"), NodeKind::Switch)).collect();
    let x = b.node("x", NodeKind::Random);
    let target = b.node("target", NodeKind::Target);
    let fail = b.node("fail", NodeKind::Dead);
    b.order(start, vec![s[0]]);
    for i in 0..n {
        let next = s.get(i + 1).copied().unwrap_or(target);
        b.order(s[i], vec![x, next]);
    }
    b.random_edge(x, s[0], rational::half()).random_edge(x, fail, rational::half());
    b.start(start);
    b.build()
}

/// Literal statistics and instance size of a generated gadget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GadgetStats {
    pub n: usize,
    pub m: usize,
    /// Occurrences of `x_i` per variable.
    pub a: Vec<usize>,
    /// Occurrences of `not x_i` per variable.
    pub b: Vec<usize>,
    #[serde(rename = "D")]
    pub d: usize,
    pub vertices: usize,
    pub edges: usize,
    /// Total switching-order length.
    pub order_total: usize,
}

impl GadgetStats {
    fn new(formula: &CnfFormula, inst: &ArrivalInstance) -> Self {
        let n = formula.num_vars;
        let mut a = vec![0; n];
        let mut b = vec![0; n];
        for c in &formula.clauses {
            for &l in c {
                let i = l.unsigned_abs() as usize - 1;
                if l > 0 {
                    a[i] += 1;
                } else {
                    b[i] += 1;
                }
            }
        }
        let d = a.iter().chain(&b).copied().max().unwrap_or(0);
        GadgetStats {
            n,
            m: formula.clauses.len(),
            a,
            b,
            d,
            vertices: inst.len(),
            edges: inst.edge_count(),
            order_total: inst.order_total(),
        }
    }
}

/// Stochastic SAT with quantifier prefix `E x1 R x2 E x3 ... R xn`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsatInstance {
    pub formula: CnfFormula,
}

impl SsatInstance {
    /// Wraps `formula`, appending an unused random variable when the
    /// variable count is odd.
    pub fn padded(mut formula: CnfFormula) -> Self {
        if formula.num_vars % 2 == 1 {
            formula.num_vars += 1;
        }
        SsatInstance { formula }
    }

    /// Whether variable `i` (1-based) is existentially quantified.
    pub fn is_existential(i: usize) -> bool {
        i % 2 == 1
    }
}

fn check_clauses(formula: &CnfFormula, max_width: Option<usize>) -> Result<()> {
    for c in &formula.clauses {
        if c.is_empty() {
            return Err(Error::contract("empty clause"));
        }
        if CnfFormula::is_tautological(c) {
            return Err(Error::contract("tautological clause"));
        }
        if let Some(w) = max_width {
            if c.len() > w {
                return Err(Error::contract(format!("clause of width {} exceeds {w}", c.len())));
            }
        }
        for (k, &l) in c.iter().enumerate() {
            if l == 0 || l.unsigned_abs() as usize > formula.num_vars {
                return Err(Error::contract(format!("literal {l} out of range")));
            }
            if c[..k].contains(&l) {
                return Err(Error::contract("repeated literal in a clause"));
            }
        }
    }
    Ok(())
}

/// Clause indices containing `lit`, padded with `pad` to length `d`
/// (a single `pad` when `d` is zero).
fn occurrence_order(formula: &CnfFormula, lit: i32, clause_nodes: &[NodeId], pad: NodeId, d: usize) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = formula
        .clauses
        .iter()
        .enumerate()
        .filter(|(_, c)| c.contains(&lit))
        .map(|(l, _)| clause_nodes[l])
        .collect();
    order.resize(d.max(1), pad);
    order
}

/// `{R,S,1}` instance whose value is the alternating max/expectation value
/// of the SSAT instance.
pub fn gen_ssat_rs1(ssat: &SsatInstance) -> Result<(ArrivalInstance, GadgetStats)> {
    let f = &ssat.formula;
    if f.num_vars % 2 == 1 || f.num_vars == 0 {
        return Err(Error::contract("SSAT needs a positive even number of variables"));
    }
    check_clauses(f, Some(3))?;
    let n = f.num_vars;
    let m = f.clauses.len();
    let stats = GadgetStats::new(f, &dummy());
    let d = stats.d;

    let mut b = InstanceBuilder::new();
    let start = b.node("start", NodeKind::Switch);
    let as_ = b.node("as", NodeKind::Switch);
    let ag = b.node("ag", NodeKind::Switch);
    let ver = b.node("ver", NodeKind::Switch);
    let target = b.node("target", NodeKind::Target);
    let fail = b.node("fail", NodeKind::Dead);

    struct Var {
        as_i: NodeId,
        ag_i: NodeId,
        ver_i: NodeId,
        xt: NodeId,
        xf: NodeId,
        next: NodeId,
        neg: NodeId,
        pos: NodeId,
    }
    let vars: Vec<Var> = (1..=n)
        .map(|i| {
            let as_kind = if SsatInstance::is_existential(i) {
                NodeKind::MaxPlayer
            } else {
                NodeKind::Random
            };
            Var {
                as_i: b.node(format!("as{i}"), as_kind),
                ag_i: b.node(format!("ag{i}"), NodeKind::MaxPlayer),
                ver_i: b.node(format!("ver{i}"), NodeKind::MaxPlayer),
                xt: b.node(format!("x{i}T"), NodeKind::Switch),
                xf: b.node(format!("x{i}F"), NodeKind::Switch),
                next: b.node(format!("next{i}"), NodeKind::Switch),
                neg: b.node(format!("neg{i}"), NodeKind::Switch),
                pos: b.node(format!("pos{i}"), NodeKind::Switch),
            }
        })
        .collect();
    let clauses: Vec<(NodeId, NodeId)> = (1..=m)
        .map(|l| (b.node(format!("c{l}"), NodeKind::Switch), b.node(format!("fail{l}"), NodeKind::Switch)))
        .collect();
    let clause_nodes: Vec<NodeId> = clauses.iter().map(|c| c.0).collect();

    let mut start_order = vec![as_; n];
    start_order.extend(std::iter::repeat_n(ag, d * n));
    start_order.push(ver);
    start_order.push(fail);
    b.order(start, start_order);
    b.order(as_, vars.iter().map(|v| v.as_i).collect());
    b.order(ag, vars.iter().map(|v| v.ag_i).collect());
    b.order(ver, vec![vars[0].ver_i]);
    for (k, v) in vars.iter().enumerate() {
        let i = (k + 1) as i32;
        if b.kind(v.as_i) == NodeKind::Random {
            b.random_edge(v.as_i, v.xt, rational::half()).random_edge(v.as_i, v.xf, rational::half());
        } else {
            b.edge(v.as_i, v.xt).edge(v.as_i, v.xf);
        }
        b.edge(v.ag_i, v.xt).edge(v.ag_i, v.xf);
        b.edge(v.ver_i, v.xt).edge(v.ver_i, v.xf);
        let mut ot = vec![start];
        ot.extend(std::iter::repeat_n(v.neg, d));
        ot.push(v.next);
        b.order(v.xt, ot);
        let mut of = vec![start];
        of.extend(std::iter::repeat_n(v.pos, d));
        of.push(v.next);
        b.order(v.xf, of);
        let after = vars.get(k + 1).map(|w| w.ver_i).unwrap_or(target);
        b.order(v.next, vec![after]);
        b.order(v.neg, occurrence_order(f, -i, &clause_nodes, start, d));
        b.order(v.pos, occurrence_order(f, i, &clause_nodes, start, d));
    }
    for (clause, &(c, fail_l)) in f.clauses.iter().zip(&clauses) {
        let w = clause.len();
        let mut order = vec![start; w - 1];
        order.resize(3, fail_l);
        b.order(c, order);
        b.order(fail_l, vec![fail]);
    }
    b.start(start);
    let inst = b.build()?;
    let stats = GadgetStats::new(f, &inst);
    Ok((inst, stats))
}

fn dummy() -> ArrivalInstance {
    let mut b = InstanceBuilder::new();
    let t = b.node("t", NodeKind::Target);
    b.start(t);
    b.build().expect("single target is valid")
}

/// `{R,S,2}` dual of [`gen_ssat_rs1`]: value `1 - val(rs1)`.
pub fn gen_ssat_rs2(ssat: &SsatInstance) -> Result<(ArrivalInstance, GadgetStats)> {
    let (rs1, _) = gen_ssat_rs1(ssat)?;
    let dual = dualize_players(&rs1)?;
    if dual.stalling {
        return Err(Error::invariant("SSAT gadget admits infinite plays"));
    }
    let stats = GadgetStats::new(&ssat.formula, &dual.instance);
    Ok((dual.instance, stats))
}

/// `{R,S}` instance whose value exceeds 1/2 exactly when more than half of
/// all assignments satisfy `formula`.
pub fn gen_majsat_rs(formula: &CnfFormula) -> Result<(ArrivalInstance, GadgetStats)> {
    check_clauses(formula, None)?;
    let n = formula.num_vars;
    if n == 0 {
        return Err(Error::contract("MAJSAT gadget needs at least one variable"));
    }
    let m = formula.clauses.len();
    let d = GadgetStats::new(formula, &dummy()).d;

    let mut b = InstanceBuilder::new();
    let start = b.node("start", NodeKind::Switch);
    let as_ = b.node("as", NodeKind::Switch);
    let target = b.node("target", NodeKind::Target);
    let fail = b.node("fail", NodeKind::Dead);
    let bad = b.node("bad", NodeKind::Random);
    let mut r = Vec::new();
    let mut xt = Vec::new();
    let mut xf = Vec::new();
    let mut cons = Vec::new();
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for i in 1..=n {
        r.push(b.node(format!("r{i}"), NodeKind::Random));
        xt.push(b.node(format!("x{i}T"), NodeKind::Switch));
        xf.push(b.node(format!("x{i}F"), NodeKind::Switch));
        cons.push(b.node(format!("cons{i}"), NodeKind::Switch));
        neg.push(b.node(format!("neg{i}"), NodeKind::Switch));
        pos.push(b.node(format!("pos{i}"), NodeKind::Switch));
    }
    let mut c = Vec::new();
    let mut sat = Vec::new();
    let mut fails = Vec::new();
    let mut ver = Vec::new();
    for l in 1..=m {
        c.push(b.node(format!("c{l}"), NodeKind::Switch));
        sat.push(b.node(format!("sat{l}"), NodeKind::Switch));
        fails.push(b.node(format!("fail{l}"), NodeKind::Switch));
        ver.push(b.node(format!("ver{l}"), NodeKind::Switch));
    }

    let mut start_order = vec![as_; (d + 1) * n];
    start_order.extend(ver.iter().copied());
    start_order.push(target);
    b.order(start, start_order);
    b.order(as_, r.clone());
    b.random_edge(bad, target, rational::half()).random_edge(bad, fail, rational::half());
    for k in 0..n {
        let i = (k + 1) as i32;
        b.random_edge(r[k], xt[k], rational::half()).random_edge(r[k], xf[k], rational::half());
        let mut ot = vec![cons[k]];
        ot.extend(std::iter::repeat_n(neg[k], d));
        b.order(xt[k], ot);
        let mut of = vec![cons[k]];
        of.extend(std::iter::repeat_n(pos[k], d));
        b.order(xf[k], of);
        b.order(cons[k], vec![start, bad]);
        b.order(neg[k], occurrence_order(formula, -i, &c, start, d));
        b.order(pos[k], occurrence_order(formula, i, &c, start, d));
    }
    for (l, clause) in formula.clauses.iter().enumerate() {
        let mut order = vec![start; clause.len() - 1];
        order.push(sat[l]);
        b.order(c[l], order);
        b.order(sat[l], vec![start, fails[l]]);
        b.order(fails[l], vec![fail]);
        b.order(ver[l], vec![sat[l]]);
    }
    b.start(start);
    let inst = b.build()?;
    let stats = GadgetStats::new(formula, &inst);
    Ok((inst, stats))
}

/// Value of the MAJSAT gadget for `n` variables, maximal literal count `d`
/// and satisfying fraction `p`: every variable is sampled consistently with
/// probability `2^-d`; otherwise a fair coin decides.
pub fn majsat_value(n: usize, d: usize, p: &Rational) -> Rational {
    let consistent = rational::pow2_neg((n * d) as u64);
    rational::half() * (rational::one() - &consistent) + p * consistent
}
