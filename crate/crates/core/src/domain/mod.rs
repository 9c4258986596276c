//! Types shared by every other module: trajectories, feature maps, policies
//! and the tabular MDP used by the exact oracles.

mod demos;
mod feature_map;
mod mdp;
mod policy;

pub use demos::{DemonstrationSet, Step, Trajectory};
pub use feature_map::{ExplicitFeatures, FeatureMap, Scaling};
pub use mdp::{ActionModel, ActionSets, TabularMdp};
pub use policy::{
    greedy_action, log_sum_exp, softmax_policy_prob, Policy, SoftmaxPolicy, TabularPolicy, TieRule,
};

pub type StateId = usize;
pub type ActionId = usize;
