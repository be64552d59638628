//! Generalized Arrival: switching, random and two-player reachability games
//! over finite graphs, solved exactly over the rationals.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod expand;
pub mod gadgets;
pub mod io;
pub mod linsolve;
pub mod model;
pub mod normalize;
pub mod play;
pub mod rational;
pub mod reductions;
pub mod simulate;
pub mod solve;

pub use error::{Error, Result};
pub use model::{
    step_probability, valid_successors, ArrivalInstance, GameState, InstanceBuilder, KindSet, Node, NodeId,
    NodeKind, SwitchPosition,
};
pub use rational::Rational;
