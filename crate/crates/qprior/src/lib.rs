//! Safety priors over consistently undesirable actions.
//!
//! Given the optimal action values of several solved tasks in a shared
//! environment, this crate distils a task-independent prior Q-function over
//! the actions that are bad in *all* of them (in gridworlds: moves into
//! walls), then uses that prior to steer the exploratory actions of a fresh
//! learner away from them — or, in the mirrored "desirability" mode, toward
//! behaviour every task rewards.
//!
//! The pipeline, end to end:
//!
//! 1. [`learner::train_task`] solves individual navigation tasks with
//!    epsilon-greedy Q-learning ([`grid::MapSpec`] environments).
//! 2. [`prior`] scores each state-action pair across the solved tasks
//!    (scaled advantage magnitudes -> softmax -> normalized entropy), keeps
//!    pairs whose entropy-mean product clears a threshold, and distils them
//!    into a prior Q-table via pseudo-rewards ([`learner::learn_prior_offpolicy`]).
//! 3. [`explore`] redirects exploratory actions using the prior.
//! 4. [`analysis`] grades the prior against ground truth and checks the
//!    predicted reduction of unsafe exploratory actions against simulation.
//! 5. [`transfer::run_transfer`] measures how the prior adapts on altered
//!    maps when reused as the starting point versus learning from scratch.
//!
//! Runnable walkthroughs live in `examples/`; the `qprior` binary drives the
//! full-size experiments (see `README.md`).

pub mod analysis;
pub mod dp;
pub mod error;
pub mod explore;
pub mod grid;
pub mod harness;
pub mod learner;
pub mod maps;
pub mod mdp;
pub mod prior;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
pub use mdp::{ActionId, DiscountedParams, QTable, StateId};
pub use rng::RngStream;
