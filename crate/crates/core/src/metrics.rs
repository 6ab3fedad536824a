//! Entropy-based measures over knowledge bases, all in bits.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::inference::{query_probability, InferenceError, InferenceOptions};
use crate::kb::{ground, Atom, Clause, GroundProgram, Policy, Program};


#[derive(Clone, Debug, PartialEq, Error)]
pub enum MetricsError {
    #[error("probability {0} is outside [0, 1]")]
    Domain(f64),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Settings shared by every entropy computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyConfig {
    /// Probability assumed for a query that matches no head of the knowledge base.
    pub unmatched_query_prob: f64,
    pub max_switches: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        let d = InferenceOptions::default();
        Self { unmatched_query_prob: d.unmatched_prob, max_switches: d.max_switches }
    }
}

impl EntropyConfig {
    pub fn with_unmatched(unmatched_query_prob: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&unmatched_query_prob) {
            return Err(MetricsError::Domain(unmatched_query_prob));
        }
        Ok(Self { unmatched_query_prob, ..Self::default() })
    }

    pub fn inference(&self) -> InferenceOptions { InferenceOptions { max_switches: self.max_switches, unmatched_prob: self.unmatched_query_prob } }
}

/// Base-2 binary entropy with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MetricsError::Domain(p));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok((term(p) + term(1.0 - p)).clamp(0.0, 1.0))
}

/// Entropy of the answer to `query` with respect to `kb`.
pub fn query_entropy(kb: &Program, query: &Atom, cfg: &EntropyConfig) -> Result<f64, MetricsError> {
    ground_query_entropy(&ground(kb), query, cfg)
}

pub fn ground_query_entropy(g: &GroundProgram, query: &Atom, cfg: &EntropyConfig) -> Result<f64, MetricsError> {
    binary_entropy(query_probability(g, query, &cfg.inference())?.prob)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryEntropy {
    pub query: String,
    pub prob: f64,
    pub entropy: f64,
}

/// Average query entropy over the head set of a knowledge base.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub value: f64,
    pub per_query: Vec<QueryEntropy>,
    pub head_count: usize,
    /// Set when the head set is empty; `value` is then 0.
    pub empty: bool,
}

/// Mean query entropy over the distinct ground heads of `kb`.
pub fn kb_uncertainty(kb: &Program, cfg: &EntropyConfig) -> Result<UncertaintyReport, MetricsError> {
    ground_uncertainty(&ground(kb), cfg)
}

pub fn ground_uncertainty(g: &GroundProgram, cfg: &EntropyConfig) -> Result<UncertaintyReport, MetricsError> {
    let heads: Vec<&Atom> = g.head_set.iter().collect();
    if heads.is_empty() {
        return Ok(UncertaintyReport { value: 0.0, per_query: Vec::new(), head_count: 0, empty: true });
    }
    let opts = cfg.inference();
    let per_query = heads
        .par_iter()
        .map(|q| {
            let prob = query_probability(g, q, &opts)?.prob;
            Ok(QueryEntropy { query: q.to_string(), prob, entropy: binary_entropy(prob)? })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let value = per_query.iter().map(|e| e.entropy).sum::<f64>() / per_query.len() as f64;
    Ok(UncertaintyReport { value, per_query, head_count: heads.len(), empty: false })
}

/// Change in average uncertainty caused by assimilating `message`. Negative is informative.
pub fn semantic_content(kb: &Program, message: &Clause, policy: Policy, cfg: &EntropyConfig) -> Result<f64, MetricsError> {
    let after = kb_uncertainty(&kb.assimilate(message, policy), cfg)?.value;
    let before = kb_uncertainty(kb, cfg)?.value;
    Ok(after - before)
}
