//! Exact solution of `x = P x + b` for substochastic `P`.
//!
//! States that cannot reach positive mass are fixed at zero; the rest is
//! split into strongly connected blocks, solved sinks first. Inside a block
//! `I - P` is a non-singular M-matrix, so diagonal pivots are always usable
//! and the order is chosen by the Markowitz count.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinStats {
    pub pivots: usize,
    pub blocks: usize,
    pub largest_block: usize,
}

/// Strongly connected components in reverse topological order (every
/// component precedes the components that reach it).
pub fn tarjan_scc(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// States with a path to some state with positive `rhs`.
fn positive_support(rows: &[Vec<(usize, Rational)>], rhs: &[Rational]) -> Vec<bool> {
    let n = rows.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for (j, p) in row {
            if !p.is_zero() {
                pred[*j].push(i);
            }
        }
    }
    let mut good = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| !rhs[i].is_zero()).collect();
    for &i in &queue {
        good[i] = true;
    }
    while let Some(j) = queue.pop_front() {
        for &i in &pred[j] {
            if !good[i] {
                good[i] = true;
                queue.push_back(i);
            }
        }
    }
    good
}

/// Least non-negative solution of `x = P x + b`.
///
/// `rows[i]` holds the entries `(j, P_ij)`; `rhs[i]` is `b_i >= 0`.
pub fn solve_reach(rows: &[Vec<(usize, Rational)>], rhs: &[Rational], stats: &mut LinStats) -> Result<Vec<Rational>> {
    let n = rows.len();
    let good = positive_support(rows, rhs);
    let succ: Vec<Vec<usize>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if !good[i] {
                return Vec::new();
            }
            row.iter().filter(|(j, p)| good[*j] && !p.is_zero()).map(|(j, _)| *j).collect()
        })
        .collect();
    let mut x = vec![Rational::zero(); n];
    let mut done = vec![false; n];
    for (i, g) in good.iter().enumerate() {
        done[i] = !g;
    }
    for comp in tarjan_scc(&succ) {
        if !good[comp[0]] {
            continue;
        }
        stats.blocks += 1;
        stats.largest_block = stats.largest_block.max(comp.len());
        if comp.len() == 1 {
            let i = comp[0];
            let mut acc = rhs[i].clone();
            let mut diag = Rational::zero();
            for (j, p) in &rows[i] {
                if *j == i {
                    diag += p;
                } else if good[*j] {
                    acc += p * &x[*j];
                }
            }
            let denom = Rational::one() - diag;
            if denom.is_zero() {
                return Err(Error::invariant("singular one-state block"));
            }
            x[i] = acc / denom;
            done[i] = true;
            stats.pivots += 1;
            continue;
        }
        solve_block(&comp, rows, rhs, &mut x, &done, stats)?;
        for &i in &comp {
            done[i] = true;
        }
    }
    Ok(x)
}

fn solve_block(
    comp: &[usize],
    rows: &[Vec<(usize, Rational)>],
    rhs: &[Rational],
    x: &mut [Rational],
    done: &[bool],
    stats: &mut LinStats,
) -> Result<()> {
    let m = comp.len();
    let local: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut a: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); m];
    let mut b: Vec<Rational> = Vec::with_capacity(m);
    for (k, &i) in comp.iter().enumerate() {
        let mut bi = rhs[i].clone();
        a[k].insert(k, Rational::one());
        for (j, p) in &rows[i] {
            if let Some(&l) = local.get(j) {
                let e = a[k].entry(l).or_insert_with(Rational::zero);
                *e -= p;
            } else if done[*j] {
                bi += p * &x[*j];
            }
        }
        a[k].retain(|_, v| !v.is_zero());
        b.push(bi);
    }
    let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (k, row) in a.iter().enumerate() {
        for &j in row.keys() {
            cols[j].insert(k);
        }
    }
    let mut active = vec![true; m];
    let mut order = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(usize, usize)> = None;
        for k in (0..m).filter(|&k| active[k]) {
            let cost = (a[k].len() - 1) * (cols[k].len().max(1) - 1);
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, k));
            }
        }
        let (_, k) = best.expect("an active row remains");
        let pivot = a[k]
            .get(&k)
            .cloned()
            .filter(|p| !p.is_zero())
            .ok_or_else(|| Error::invariant("zero pivot in I - P"))?;
        active[k] = false;
        for &j in a[k].keys() {
            cols[j].remove(&k);
        }
        let pivot_row: Vec<(usize, Rational)> = a[k].iter().map(|(j, v)| (*j, v.clone())).collect();
        let targets: Vec<usize> = cols[k].iter().copied().collect();
        for r in targets {
            let f = a[r][&k].clone() / &pivot;
            for (j, v) in &pivot_row {
                let e = a[r].entry(*j).or_insert_with(Rational::zero);
                *e -= &f * v;
                if e.is_zero() {
                    a[r].remove(j);
                    cols[*j].remove(&r);
                } else {
                    cols[*j].insert(r);
                }
            }
            let delta = &f * &b[k];
            b[r] -= delta;
        }
        stats.pivots += 1;
        order.push(k);
    }
    let mut y = vec![Rational::zero(); m];
    for &k in order.iter().rev() {
        let mut acc = b[k].clone();
        for (j, v) in &a[k] {
            if *j != k {
                acc -= v * &y[*j];
            }
        }
        y[k] = acc / &a[k][&k];
    }
    for (k, &i) in comp.iter().enumerate() {
        x[i] = std::mem::take(&mut y[k]);
    }
    Ok(())
}

/// Whether `x = P x + b` holds exactly.
pub fn satisfies(rows: &[Vec<(usize, Rational)>], rhs: &[Rational], x: &[Rational]) -> bool {
    rows.iter().enumerate().all(|(i, row)| {
        let mut acc = rhs[i].clone();
        for (j, p) in row {
            acc += p * &x[*j];
        }
        acc == x[i]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn scc_order_is_sinks_first() {
        let succ = vec![vec![1], vec![2, 0], vec![3], vec![2]];
        let comps = tarjan_scc(&succ);
        assert_eq!(comps, vec![vec![2, 3], vec![0, 1]]);
    }

    #[test]
    fn gamblers_ruin() {
        // x0 = 1/2 x1, x1 = 1/2 x0 + 1/2 x2, x2 = 1/2 x1 + 1/2
        let rows = vec![
            vec![(1, ratio(1, 2))],
            vec![(0, ratio(1, 2)), (2, ratio(1, 2))],
            vec![(1, ratio(1, 2))],
        ];
        let rhs = vec![ratio(0, 1), ratio(0, 1), ratio(1, 2)];
        let mut st = LinStats::default();
        let x = solve_reach(&rows, &rhs, &mut st).unwrap();
        assert_eq!(x, vec![ratio(1, 4), ratio(1, 2), ratio(3, 4)]);
        assert!(satisfies(&rows, &rhs, &x));
        assert_eq!(st.blocks, 1);
    }

    #[test]
    fn closed_loops_get_zero() {
        // 0 <-> 1 forever, 2 -> 0 or target
        let rows = vec![vec![(1, ratio(1, 1))], vec![(0, ratio(1, 1))], vec![(0, ratio(1, 3))]];
        let rhs = vec![ratio(0, 1), ratio(0, 1), ratio(2, 3)];
        let x = solve_reach(&rows, &rhs, &mut LinStats::default()).unwrap();
        assert_eq!(x, vec![ratio(0, 1), ratio(0, 1), ratio(2, 3)]);
    }

    #[test]
    fn self_loop_block() {
        let rows = vec![vec![(0, ratio(2, 3))]];
        let rhs = vec![ratio(1, 6)];
        let x = solve_reach(&rows, &rhs, &mut LinStats::default()).unwrap();
        assert_eq!(x[0], ratio(1, 2));
    }
}
