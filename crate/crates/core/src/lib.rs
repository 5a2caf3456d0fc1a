//! Online selection of explanation orderings for human decision-makers.
//!
//! A human holds a belief over actions and updates it multiplicatively as
//! explanations are shown ([`model`]). The propensities driving that update are
//! unknown, so a weighted particle set tracks their posterior from final-action
//! feedback alone ([`filter`], [`warmstart`]). Each interaction a single particle
//! is sampled and explainers are shown in descending order of its propensity
//! for the proposed action ([`policy`]). [`sim`] provides synthetic humans and
//! experiment runners.

pub mod error;
pub mod filter;
pub mod model;
pub mod persist;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod warmstart;

pub use error::{Error, Result};
pub use filter::{
    effective_sample_size, init_particles, posterior_mean, posterior_update, sample_particle,
    FilterConfig, HumanPolicyEstimate, ParticleSet,
};
pub use model::{
    draw_action, final_belief, interaction_likelihood, update_belief, Belief, Dims,
    FinalActionRule, InteractionRecord, PropensityTensor, TabularPolicy,
};
pub use policy::{next_explainer, ExplainerOrdering, MetaPolicyState, PolicyKind};
pub use warmstart::{warm_start_particles, WarmStartConfig};
