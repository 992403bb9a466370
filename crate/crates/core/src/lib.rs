//! Simulation library for shared-control object transport.
//!
//! A robot and a simulated human jointly push an object toward a goal.
//! The human has a latent force capability the robot does not know. Each
//! step the human either collaborates (emitting a contact wrench roughly
//! proportional to the effort asked of them) or drops out when the task
//! demands more than they can give. Thresholding the wrench norm labels
//! each joint action as inside or outside the human's operable region,
//! and an online logistic unit fits that boundary. The robot then samples
//! its actions from a Boltzmann distribution masked to the learned region.
//!
//! Modules are layered bottom-up:
//!
//! * [`env`] — transport dynamics, reward, episode rollout
//! * [`grid`] — uniform product grids for states and actions
//! * [`boltzmann`] — masked softmax distributions and sampling
//! * [`qtable`] — finite-horizon joint action values via backward induction
//! * [`human`] — simulated operator: policy, wrench generator, fatigue
//! * [`learner`] — feedback labeling, logistic constraint model, trust region
//! * [`agent`] — the assistive robot policy
//! * [`config`], [`experiment`], [`ftstats`], [`csvio`] — experiment harness
//!
//! Everything is deterministic given a seed: all sampling goes through a
//! caller-supplied RNG and no iteration order depends on hashing. Types are
//! plain owned values (`Send + Sync`), so callers may parallelize replicate
//! runs externally if they want to.

pub mod agent;
pub mod boltzmann;
pub mod config;
pub mod csvio;
pub mod env;
pub mod error;
pub mod experiment;
pub mod ftstats;
pub mod grid;
pub mod human;
pub mod learner;
pub mod qtable;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
