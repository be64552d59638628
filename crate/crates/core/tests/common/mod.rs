//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use arrival_core::corpus::{random_instance, RandomSpec};
use arrival_core::expand::{explore, ExpandedGame, DEFAULT_BUDGET};
use arrival_core::io::CnfFormula;
use arrival_core::rational::{ratio, Rational};
use arrival_core::{ArrivalInstance, KindSet, NodeKind};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn kinds(random: bool, switch: bool, max: bool, min: bool) -> KindSet {
    KindSet { random, switch, max, min }
}

pub fn seeded_instance(seed: u64, inner: usize, kinds: KindSet, dyadic: bool) -> ArrivalInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomSpec {
        dyadic,
        ..RandomSpec::new(inner, kinds)
    };
    random_instance(&mut rng, &spec)
}

/// Random instances with 1..=5 inner vertices over the given kinds.
pub fn arb_instance(kinds: KindSet) -> impl Strategy<Value = ArrivalInstance> {
    (any::<u64>(), 1usize..=5, any::<bool>()).prop_map(move |(seed, inner, dyadic)| seeded_instance(seed, inner, kinds, dyadic))
}

/// Dense Gauss-Jordan solve of `(I - P) x = b` restricted to `idx`; other
/// entries of `x` are taken as known.
fn dense_block(p: &[Vec<Rational>], b: &[Rational], idx: &[usize], x: &mut [Rational]) {
    let m = idx.len();
    let mut a: Vec<Vec<Rational>> = vec![vec![Rational::zero(); m + 1]; m];
    for (r, &i) in idx.iter().enumerate() {
        let mut rhs = b[i].clone();
        for (j, pij) in p[i].iter().enumerate() {
            if pij.is_zero() {
                continue;
            }
            match idx.iter().position(|&k| k == j) {
                Some(c) => a[r][c] -= pij,
                None => rhs += pij * &x[j],
            }
        }
        a[r][r] += Rational::one();
        a[r][m] = rhs;
    }
    for c in 0..m {
        let piv = (c..m).find(|&r| !a[r][c].is_zero()).expect("nonsingular system");
        a.swap(c, piv);
        let inv = Rational::one() / &a[c][c];
        for cell in &mut a[c][c..=m] {
            *cell = &*cell * &inv;
        }
        for r in 0..m {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                let pivot_row = a[c].clone();
                for (cell, p) in a[r][c..=m].iter_mut().zip(&pivot_row[c..=m]) {
                    *cell -= &f * p;
                }
            }
        }
    }
    for (r, &i) in idx.iter().enumerate() {
        x[i] = a[r][m].clone();
    }
}

/// Least solution of `x = P x + b` by dense elimination after zeroing the
/// states that cannot reach positive `b`.
pub fn dense_least_solution(p: &[Vec<Rational>], b: &[Rational]) -> Vec<Rational> {
    let n = b.len();
    let mut good = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| !b[i].is_zero()).collect();
    for &i in &queue {
        good[i] = true;
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !good[i] && !p[i][j].is_zero() {
                good[i] = true;
                queue.push_back(i);
            }
        }
    }
    let idx: Vec<usize> = (0..n).filter(|&i| good[i]).collect();
    let mut x = vec![Rational::zero(); n];
    dense_block(p, b, &idx, &mut x);
    x
}

/// Target-reaching probability from every explored state when player
/// state `i` always moves to successor slot `choice[i]`.
pub fn chain_values(inst: &ArrivalInstance, game: &ExpandedGame, choice: &[usize]) -> Vec<Rational> {
    let n = game.len();
    let mut p = vec![vec![Rational::zero(); n]; n];
    let mut b = vec![Rational::zero(); n];
    for i in 0..n {
        match game.kind(inst, i) {
            NodeKind::Target => b[i] = Rational::one(),
            NodeKind::Dead => {}
            NodeKind::Random => {
                for (k, &j) in game.succ[i].iter().enumerate() {
                    p[i][j as usize] += game.prob(inst, i, k);
                }
            }
            NodeKind::Switch => p[i][game.succ[i][0] as usize] += Rational::one(),
            NodeKind::MaxPlayer | NodeKind::MinPlayer => {
                p[i][game.succ[i][choice[i]] as usize] += Rational::one();
            }
        }
    }
    dense_least_solution(&p, &b)
}

/// Max over Max's positional strategies of min over Min's, at the initial
/// state, or `None` when there are more than `limit` strategy pairs.
pub fn brute_force_value(inst: &ArrivalInstance, limit: usize) -> Option<Rational> {
    let game = explore(inst, DEFAULT_BUDGET).ok()?;
    let players: Vec<usize> = (0..game.len()).filter(|&i| game.kind(inst, i).is_player()).collect();
    let mut pairs = 1usize;
    for &i in &players {
        pairs = pairs.checked_mul(game.succ[i].len())?;
        if pairs > limit {
            return None;
        }
    }
    let max_states: Vec<usize> = players.iter().copied().filter(|&i| game.kind(inst, i) == NodeKind::MaxPlayer).collect();
    let min_states: Vec<usize> = players.iter().copied().filter(|&i| game.kind(inst, i) == NodeKind::MinPlayer).collect();
    let enumerate = |states: &[usize]| -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new()];
        for &i in states {
            out = out
                .into_iter()
                .flat_map(|partial: Vec<(usize, usize)>| {
                    (0..game.succ[i].len()).map(move |c| {
                        let mut next = partial.clone();
                        next.push((i, c));
                        next
                    })
                })
                .collect();
        }
        out
    };
    let sigmas = enumerate(&max_states);
    let taus = enumerate(&min_states);
    let mut best: Option<Rational> = None;
    for sigma in &sigmas {
        let mut worst: Option<Rational> = None;
        for tau in &taus {
            let mut choice = vec![0; game.len()];
            for &(i, c) in sigma.iter().chain(tau) {
                choice[i] = c;
            }
            let v = chain_values(inst, &game, &choice)[0].clone();
            worst = Some(match worst {
                Some(w) if w <= v => w,
                _ => v,
            });
        }
        let w = worst.unwrap();
        best = Some(match best {
            Some(b) if b >= w => b,
            _ => w,
        });
    }
    best
}

/// Iterates `x <- P x + b` from zero; returns the iterate once it stops
/// changing, or `None` after `cap` rounds.
pub fn fixpoint_iterate(rows: &[Vec<(usize, Rational)>], b: &[Rational], cap: usize) -> Option<Vec<Rational>> {
    let mut x = vec![Rational::zero(); b.len()];
    for _ in 0..cap {
        let next: Vec<Rational> = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut acc = b[i].clone();
                for (j, p) in row {
                    acc += p * &x[*j];
                }
                acc
            })
            .collect();
        if next == x {
            return Some(x);
        }
        x = next;
    }
    None
}

pub fn satisfied(f: &CnfFormula, assign: &[bool]) -> bool {
    f.clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let v = assign[l.unsigned_abs() as usize - 1];
            if l > 0 {
                v
            } else {
                !v
            }
        })
    })
}

/// Alternating evaluation: odd variables maximize, even variables average.
pub fn ssat_value(f: &CnfFormula) -> Rational {
    fn go(f: &CnfFormula, assign: &mut Vec<bool>) -> Rational {
        let i = assign.len();
        if i == f.num_vars {
            return if satisfied(f, assign) { ratio(1, 1) } else { ratio(0, 1) };
        }
        let mut vals = Vec::new();
        for b in [true, false] {
            assign.push(b);
            vals.push(go(f, assign));
            assign.pop();
        }
        if i.is_multiple_of(2) {
            vals.into_iter().max().unwrap()
        } else {
            (&vals[0] + &vals[1]) * ratio(1, 2)
        }
    }
    go(f, &mut Vec::new())
}

/// Fraction of all assignments satisfying `f`.
pub fn sat_fraction(f: &CnfFormula) -> Rational {
    let n = f.num_vars;
    let count = (0..1u32 << n)
        .filter(|mask| {
            let assign: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            satisfied(f, &assign)
        })
        .count();
    ratio(count as i64, 1 << n)
}
