//! Conversions between node types and the player/outcome dual.

use crate::error::{Error, Result};
use crate::expand::{explore, DEFAULT_BUDGET};
use crate::model::{ArrivalInstance, NodeKind};
use crate::normalize::Work;
use crate::rational;

/// Gives Max control of every random node. Zero-probability edges cannot
/// occur in a valid instance, so the edge set is kept.
pub fn random_to_player(inst: &ArrivalInstance) -> ArrivalInstance {
    let mut w = Work::new(inst);
    for v in 0..inst.len() {
        let n = w.node_mut(v);
        if n.kind == NodeKind::Random {
            n.kind = NodeKind::MaxPlayer;
            n.prob.clear();
        }
    }
    w.finish().expect("relabelling keeps the instance valid")
}

/// Replaces every Max node by a uniform random choice.
pub fn player_to_random(inst: &ArrivalInstance) -> Result<ArrivalInstance> {
    if inst.kinds().min {
        return Err(Error::contract("player_to_random needs an instance without Min nodes"));
    }
    let mut w = Work::new(inst);
    for v in 0..inst.len() {
        let n = w.node_mut(v);
        if n.kind == NodeKind::MaxPlayer {
            n.kind = NodeKind::Random;
            let k = n.succ.len() as i64;
            n.prob = vec![rational::ratio(1, k); n.succ.len()];
        }
    }
    w.finish()
}

#[derive(Clone, Debug)]
pub struct DualReport {
    pub instance: ArrivalInstance,
    /// Some reachable state lies in a set where the play can stay forever
    /// avoiding both target and dead node, so `val' = 1 - val` may fail.
    pub stalling: bool,
}

/// Swaps Max and Min, and target and dead node (adding a fresh target when
/// the input has no dead node).
pub fn dualize_players(inst: &ArrivalInstance) -> Result<DualReport> {
    dualize_players_within(inst, DEFAULT_BUDGET)
}

pub fn dualize_players_within(inst: &ArrivalInstance, budget: usize) -> Result<DualReport> {
    let stalling = can_stall(inst, budget)?;
    let mut w = Work::new(inst);
    for v in 0..inst.len() {
        let n = w.node_mut(v);
        n.kind = match n.kind {
            NodeKind::MaxPlayer => NodeKind::MinPlayer,
            NodeKind::MinPlayer => NodeKind::MaxPlayer,
            k => k,
        };
    }
    let t = w.target;
    let new_t = match w.dead {
        Some(d) => d,
        None => w.add("target", NodeKind::Target),
    };
    w.node_mut(t).kind = NodeKind::Dead;
    w.node_mut(new_t).kind = NodeKind::Target;
    Ok(DualReport {
        instance: w.finish()?,
        stalling,
    })
}

/// Whether the reachable part of the expanded game contains a non-empty set
/// closed under random and switch moves, with some move available to each
/// player, that avoids target and dead states.
pub fn can_stall(inst: &ArrivalInstance, budget: usize) -> Result<bool> {
    let game = explore(inst, budget)?;
    let n = game.len();
    let mut inside: Vec<bool> = (0..n).map(|i| !game.kind(inst, i).is_absorbing()).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !inside[i] {
                continue;
            }
            let succ = &game.succ[i];
            let keep = match game.kind(inst, i) {
                NodeKind::MaxPlayer | NodeKind::MinPlayer => succ.iter().any(|&j| inside[j as usize]),
                _ => succ.iter().all(|&j| inside[j as usize]),
            };
            if !keep {
                inside[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(inside.iter().any(|&b| b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceBuilder;
    use crate::rational::ratio;
    use crate::solve::value;

    #[test]
    fn forced_win_dualizes_to_zero() {
        let mut b = InstanceBuilder::new();
        let m = b.node("m", NodeKind::MaxPlayer);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.edge(m, t).edge(m, d).start(m);
        let g = b.build().unwrap();
        let rep = dualize_players(&g).unwrap();
        assert!(!rep.stalling);
        assert_eq!(rep.instance.kind(m), NodeKind::MinPlayer);
        assert_eq!(value(&rep.instance).unwrap(), ratio(0, 1));
    }

    #[test]
    fn min_cycle_is_flagged() {
        let mut b = InstanceBuilder::new();
        let m = b.node("m", NodeKind::MaxPlayer);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        b.edge(m, m).edge(m, d).edge(m, t).start(m);
        let g = b.build().unwrap();
        assert_eq!(value(&g).unwrap(), ratio(1, 1));
        let rep = dualize_players(&g).unwrap();
        assert!(rep.stalling);
        // Min now stays in the cycle forever, so neither side wins
        assert_eq!(value(&rep.instance).unwrap(), ratio(0, 1));
    }

    #[test]
    fn player_to_random_is_uniform() {
        let mut b = InstanceBuilder::new();
        let m = b.node("m", NodeKind::MaxPlayer);
        let t = b.node("t", NodeKind::Target);
        let d = b.node("d", NodeKind::Dead);
        let e = b.node("e", NodeKind::Switch);
        b.edge(m, t).edge(m, d).edge(m, e);
        b.order(e, vec![d]).start(m);
        let g = b.build().unwrap();
        let r = player_to_random(&g).unwrap();
        assert_eq!(value(&r).unwrap(), ratio(1, 3));
        let back = random_to_player(&r);
        assert_eq!(value(&back).unwrap(), ratio(1, 1));
    }
}
