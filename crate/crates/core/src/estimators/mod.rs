//! Maximum a posteriori estimators under flat priors.
//!
//! Both models maximise a conditional-logit likelihood of the demonstrated
//! actions. The reward-prior model scores actions with `g_Q(s,a)ᵀ C w_R`,
//! where `C` comes from the LSTDQ system; the policy-optimality model scores
//! them with `g_Q(s,a)ᵀ w_Q`.

mod lbfgs;
mod model;
mod objective;

pub use lbfgs::{maximize, FitOptions, FitReport};
pub use model::{
    extract_policy, fit_po, fit_rp, learned_reward, FittedModel, ModelKind, ParamsFile, PoParams,
    PolicyMode, RpParams,
};
pub use objective::{
    po_objective_and_gradient, rp_objective_and_gradient, ChoiceSet, ConditionalLogit, LogPrior,
    Objective, StateChoices,
};
