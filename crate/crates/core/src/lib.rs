//! Probabilistic-logic knowledge bases and the communication measures built on them.
//!
//! - [`kb`]: clause language, grounding and assimilation.
//! - [`inference`]: exact query probabilities by enumerating total choices.
//! - [`metrics`]: query entropy, knowledge-base uncertainty and semantic content.
//! - [`selection`]: choosing which message to send.
//! - [`security`]: opacity/usefulness predicates for eavesdroppers and receivers.
//! - [`infotheory`]: entropies of discrete joints, BSC capacity, Slepian-Wolf rates.
//! - [`das`]: greedy source selection for distributed sensing.
//! - [`channel`], [`session`]: the technical layer and the two-layer simulator.

pub mod channel;
pub mod das;
pub mod inference;
pub mod infotheory;
pub mod kb;
pub mod metrics;
pub mod security;
pub mod selection;
pub mod session;
