//! Text instance format and DIMACS CNF ingestion.
//!
//! ```text
//! # comment
//! node s kind=random
//! node t kind=target
//! edge s t prob=1/1
//! start s
//! target t
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::model::{ArrivalInstance, InstanceBuilder, NodeId, NodeKind};
use crate::rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

struct Pending {
    line: usize,
    column: usize,
    kind: Directive,
}

enum Directive {
    Edge { from: String, to: String, prob: Option<rational::Rational> },
    Order { at: String, entries: Vec<String> },
    Uniform(String),
    Start(String),
    Target(String),
    Dead(String),
}

/// Parses the instance format; every diagnostic carries a line and column.
pub fn parse_instance(text: &str) -> Result<ArrivalInstance, ParseError> {
    let mut builder = InstanceBuilder::new();
    let mut decl_line: HashMap<NodeId, (usize, usize)> = HashMap::new();
    let mut pending = Vec::new();
    let mut last_line = 1;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        last_line = ln;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokens(line);
        let Some(&(col, word)) = toks.first() else { continue };
        let arg = |i: usize, what: &str| -> Result<(usize, &str), ParseError> {
            toks.get(i).copied().ok_or_else(|| err(ln, line.len() + 1, format!("expected {what}")))
        };
        let no_more = |n: usize| -> Result<(), ParseError> {
            match toks.get(n) {
                Some(&(c, t)) => Err(err(ln, c, format!("unexpected token '{t}'"))),
                None => Ok(()),
            }
        };
        match word {
            "node" => {
                let (ncol, name) = arg(1, "node name")?;
                let (kcol, kind) = arg(2, "kind=<kind>")?;
                let kind = kind
                    .strip_prefix("kind=")
                    .ok_or_else(|| err(ln, kcol, "expected kind=<kind>"))?;
                let kind = NodeKind::from_keyword(kind)
                    .ok_or_else(|| err(ln, kcol + 5, format!("unknown node kind '{kind}'")))?;
                no_more(3)?;
                if builder.lookup(name).is_some() {
                    return Err(err(ln, ncol, format!("duplicate node name '{name}'")));
                }
                let id = builder.node(name, kind);
                decl_line.insert(id, (ln, col));
            }
            "edge" => {
                let (_, from) = arg(1, "source node")?;
                let (_, to) = arg(2, "destination node")?;
                let prob = match toks.get(3) {
                    None => None,
                    Some(&(pcol, p)) => {
                        let text = p
                            .strip_prefix("prob=")
                            .ok_or_else(|| err(ln, pcol, "expected prob=<a>/<b>"))?;
                        let r = rational::parse_ab(text)
                            .ok_or_else(|| err(ln, pcol + 5, format!("malformed probability '{text}'")))?;
                        Some(r)
                    }
                };
                no_more(4)?;
                pending.push(Pending {
                    line: ln,
                    column: col,
                    kind: Directive::Edge {
                        from: from.to_string(),
                        to: to.to_string(),
                        prob,
                    },
                });
            }
            "order" => {
                let (_, at) = arg(1, "switch node")?;
                let (ccol, colon) = arg(2, "':'")?;
                if colon != ":" {
                    return Err(err(ln, ccol, "expected ':'"));
                }
                let entries = toks[3..].iter().map(|(_, t)| t.to_string()).collect();
                pending.push(Pending {
                    line: ln,
                    column: col,
                    kind: Directive::Order {
                        at: at.to_string(),
                        entries,
                    },
                });
            }
            "uniform" | "start" | "target" | "dead" => {
                let (_, name) = arg(1, "node name")?;
                no_more(2)?;
                let name = name.to_string();
                let kind = match word {
                    "uniform" => Directive::Uniform(name),
                    "start" => Directive::Start(name),
                    "target" => Directive::Target(name),
                    _ => Directive::Dead(name),
                };
                pending.push(Pending {
                    line: ln,
                    column: col,
                    kind,
                });
            }
            other => return Err(err(ln, col, format!("unknown directive '{other}'"))),
        }
    }

    let mut start_seen = false;
    let mut order_seen = BTreeSet::new();
    let mut edge_line: HashMap<NodeId, (usize, usize)> = HashMap::new();
    for p in pending {
        let resolve = |name: &str| -> Result<NodeId, ParseError> {
            builder
                .lookup(name)
                .ok_or_else(|| err(p.line, p.column, format!("unknown node '{name}'")))
        };
        match p.kind {
            Directive::Edge { from, to, prob } => {
                let u = resolve(&from)?;
                let v = resolve(&to)?;
                edge_line.entry(u).or_insert((p.line, p.column));
                let is_random = builder.kind(u) == NodeKind::Random;
                match (is_random, prob) {
                    (true, Some(pr)) => {
                        builder.random_edge(u, v, pr);
                    }
                    (false, Some(_)) => {
                        return Err(err(
                            p.line,
                            p.column,
                            format!("probability on edge from non-random node '{from}'"),
                        ))
                    }
                    (_, None) => {
                        builder.edge(u, v);
                    }
                }
            }
            Directive::Order { at, entries } => {
                let v = resolve(&at)?;
                if builder.kind(v) != NodeKind::Switch {
                    return Err(err(p.line, p.column, format!("order given on non-switch node '{at}'")));
                }
                if !order_seen.insert(v) {
                    return Err(err(p.line, p.column, format!("second order for '{at}'")));
                }
                let ids = entries.iter().map(|e| resolve(e)).collect::<Result<Vec<_>, _>>()?;
                edge_line.entry(v).or_insert((p.line, p.column));
                builder.order(v, ids);
            }
            Directive::Uniform(name) => {
                let v = resolve(&name)?;
                if builder.kind(v) != NodeKind::Random {
                    return Err(err(p.line, p.column, format!("uniform on non-random node '{name}'")));
                }
                builder.uniform(v);
            }
            Directive::Start(name) => {
                let v = resolve(&name)?;
                if start_seen {
                    return Err(err(p.line, p.column, "start declared twice"));
                }
                start_seen = true;
                builder.start(v);
            }
            Directive::Target(name) => {
                let v = resolve(&name)?;
                check_marker(&builder, v, &name, NodeKind::Target, p.line, p.column)?;
            }
            Directive::Dead(name) => {
                let v = resolve(&name)?;
                check_marker(&builder, v, &name, NodeKind::Dead, p.line, p.column)?;
            }
        }
    }

    builder.build_detailed().map_err(|issue| {
        let (line, column) = match issue.node {
            Some(v) => edge_line.get(&v).or(decl_line.get(&v)).copied().unwrap_or((last_line, 1)),
            None => (last_line, 1),
        };
        err(line, column, issue.message)
    })
}

fn check_marker(
    builder: &InstanceBuilder,
    v: NodeId,
    name: &str,
    want: NodeKind,
    line: usize,
    column: usize,
) -> Result<(), ParseError> {
    if builder.kind(v) == want {
        Ok(())
    } else {
        Err(err(line, column, format!("'{name}' marked {want} but declared {}", builder.kind(v))))
    }
}

/// Canonical text: nodes in id order, then edges, orders and markers.
pub fn serialize_instance(inst: &ArrivalInstance) -> String {
    let mut out = String::new();
    for v in inst.node_ids() {
        writeln!(out, "node {} kind={}", inst.name(v), inst.kind(v)).unwrap();
    }
    for v in inst.node_ids() {
        let node = inst.node(v);
        match node.kind() {
            NodeKind::Target | NodeKind::Dead => {}
            NodeKind::Random => {
                for (w, p) in node.successors().iter().zip(node.probabilities()) {
                    writeln!(out, "edge {} {} prob={}", inst.name(v), inst.name(*w), rational::to_ab(p)).unwrap();
                }
            }
            _ => {
                for w in node.successors() {
                    writeln!(out, "edge {} {}", inst.name(v), inst.name(*w)).unwrap();
                }
            }
        }
        if node.kind() == NodeKind::Switch {
            let entries: Vec<&str> = node.order().iter().map(|&w| inst.name(w)).collect();
            writeln!(out, "order {} : {}", inst.name(v), entries.join(" ")).unwrap();
        }
    }
    writeln!(out, "start {}", inst.name(inst.start())).unwrap();
    writeln!(out, "target {}", inst.name(inst.target())).unwrap();
    if let Some(d) = inst.dead() {
        writeln!(out, "dead {}", inst.name(d)).unwrap();
    }
    out
}

/// A CNF formula with literals as signed 1-based variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Self {
        CnfFormula { num_vars, clauses }
    }

    pub fn is_tautological(clause: &[i32]) -> bool {
        clause.iter().any(|l| clause.contains(&-l))
    }

    /// Truth value under `assignment[i]` for variable `i + 1`.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let value = assignment[(l.unsigned_abs() - 1) as usize];
                if l > 0 {
                    value
                } else {
                    !value
                }
            })
        })
    }

    pub fn max_width(&self) -> usize {
        self.clauses.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Writes DIMACS cnf text.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                write!(out, "{l} ").unwrap();
            }
            out.push_str("0\n");
        }
        out
    }
}

/// Parses DIMACS cnf. Repeated literals are merged; a clause holding both a
/// literal and its negation, an empty clause, or an out-of-range literal is
/// an error.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut current_pos = (0, 0);
    let mut last = (1, 1);
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let toks = tokens(raw);
        let Some(&(col, first)) = toks.first() else { continue };
        if first.starts_with('c') {
            continue;
        }
        if first == "%" {
            break;
        }
        if first == "p" {
            if header.is_some() {
                return Err(err(ln, col, "second header"));
            }
            let bad = || err(ln, col, "malformed header, expected 'p cnf <vars> <clauses>'");
            if toks.len() != 4 || toks[1].1 != "cnf" {
                return Err(bad());
            }
            let n = toks[2].1.parse::<usize>().map_err(|_| bad())?;
            let m = toks[3].1.parse::<usize>().map_err(|_| bad())?;
            if n > i32::MAX as usize {
                return Err(bad());
            }
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(err(ln, col, "clause before header"));
        };
        for &(c, t) in &toks {
            let lit: i64 = t.parse().map_err(|_| err(ln, c, format!("malformed literal '{t}'")))?;
            last = (ln, c);
            if lit == 0 {
                if current.is_empty() {
                    return Err(err(ln, c, "empty clause"));
                }
                if CnfFormula::is_tautological(&current) {
                    return Err(err(current_pos.0, current_pos.1, "tautological clause"));
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() as usize > n {
                return Err(err(ln, c, format!("literal {lit} out of range 1..={n}")));
            }
            if current.is_empty() {
                current_pos = (ln, c);
            }
            let lit = lit as i32;
            if !current.contains(&lit) {
                current.push(lit);
            }
        }
    }
    let Some((n, m)) = header else {
        return Err(err(last.0, 1, "missing 'p cnf' header"));
    };
    if !current.is_empty() {
        return Err(err(last.0, last.1, "clause not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(err(last.0, 1, format!("header announces {m} clauses, found {}", clauses.len())));
    }
    Ok(CnfFormula::new(n, clauses))
}
