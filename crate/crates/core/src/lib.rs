//! Speculative decoding with multiple black-box drafters and an offline-trained
//! contextual-bandit router that picks one drafter (or plain autoregressive
//! generation) per query.
//!
//! The crate is organised bottom-up:
//!
//! - [`vocab`], [`dist`], [`ngram`]: character vocabulary, token distributions and
//!   the smoothed n-gram models that play both drafter and target.
//! - [`corpus`]: deterministic multi-domain synthetic corpora and query sets.
//! - [`exact`]: exhaustive enumeration of a sampler's outcome law.
//! - [`specdec`]: accept-reject speculative sampling, greedy assisted decoding and
//!   exact call/acceptance accounting.
//! - [`scoring`]: ROUGE-L alignment, size costs and reward composition.
//! - [`dataset`]: offline reward collection and the reward-set file format.
//! - [`policy`]: query featurization, the softmax MLP policy and REINFORCE training.
//! - [`router`]: arm selection and routed decoding with per-phase timing.

pub mod corpus;
pub mod dataset;
pub mod dist;
pub mod error;
pub mod exact;
pub mod ngram;
pub mod policy;
pub mod router;
pub mod scoring;
pub mod specdec;
pub mod vocab;

pub use error::{Error, Result};
pub use vocab::{TokenId, Vocabulary};
