//! Sender-side message selection.
//!
//! Every criterion scores each candidate of the pool and returns the argmin. Candidates are scored
//! independently (in parallel) and ranked afterwards by score, then by canonical text, so the
//! result does not depend on evaluation order.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kb::{canonicalize, Atom, Clause, Policy, Program};
use crate::metrics::{kb_uncertainty, query_entropy, EntropyConfig, MetricsError};

/// Tolerance on the total weight of a sender belief.
pub const BELIEF_TOLERANCE: f64 = 1e-9;


#[derive(Clone, Debug, PartialEq, Error)]
pub enum SelectionError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("invalid sender belief: {0}")]
    InvalidBelief(String),
    #[error("no candidate fits the length bound of {l_max} bits (shortest is {shortest} bits)")]
    NoFeasibleMessage { l_max: f64, shortest: f64 },
    #[error("length bound must be positive, got {0}")]
    InvalidBound(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// The candidate messages available to a sender.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidatePool {
    pub messages: Vec<Clause>,
}

impl CandidatePool {
    pub fn new(messages: Vec<Clause>) -> Self { Self { messages } }

    #[inline]
    pub fn len(&self) -> usize { self.messages.len() }

    #[inline]
    pub fn is_empty(&self) -> bool { self.messages.is_empty() }

    /// Drops the first candidate equal to `message`.
    pub fn remove(&mut self, message: &Clause) -> bool {
        match self.messages.iter().position(|m| m == message) {
            Some(i) => {
                self.messages.remove(i);
                true
            },
            None => false,
        }
    }
}

impl From<Program> for CandidatePool {
    fn from(p: Program) -> Self { Self { messages: p.clauses().to_vec() } }
}

/// The sender's weighted hypotheses about the receiver's knowledge base.
#[derive(Clone, Debug, PartialEq)]
pub struct SenderBelief {
    hypotheses: Vec<(Program, f64)>,
}

impl SenderBelief {
    /// Weights must be nonnegative and sum to one.
    pub fn new(hypotheses: Vec<(Program, f64)>) -> Result<Self, SelectionError> {
        if hypotheses.is_empty() {
            return Err(SelectionError::InvalidBelief("no hypotheses".into()));
        }
        if let Some((_, w)) = hypotheses.iter().find(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(SelectionError::InvalidBelief(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = hypotheses.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > BELIEF_TOLERANCE {
            return Err(SelectionError::InvalidBelief(format!("weights sum to {total}")));
        }
        Ok(Self { hypotheses })
    }

    /// Rescales positive weights to sum to one.
    pub fn normalized(hypotheses: Vec<(Program, f64)>) -> Result<Self, SelectionError> {
        let total: f64 = hypotheses.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(SelectionError::InvalidBelief(format!("weights sum to {total}")));
        }
        Self::new(hypotheses.into_iter().map(|(p, w)| (p, w / total)).collect())
    }

    /// A belief that puts all weight on one knowledge base.
    pub fn certain(kb: Program) -> Self { Self { hypotheses: vec![(kb, 1.0)] } }

    #[inline]
    pub fn hypotheses(&self) -> &[(Program, f64)] { &self.hypotheses }

    pub fn weights(&self) -> Vec<f64> { self.hypotheses.iter().map(|(_, w)| *w).collect() }

    /// Applies `f` to every hypothesis program.
    pub fn map_programs(&self, f: impl Fn(&Program) -> Program) -> Self { Self { hypotheses: self.hypotheses.iter().map(|(p, w)| (f(p), *w)).collect() } }

    /// Replaces the weights, renormalizing them.
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self, SelectionError> {
        Self::normalized(self.hypotheses.iter().zip(weights).map(|((p, _), &w)| (p.clone(), w)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedMessage {
    pub message: String,
    pub score: f64,
    #[serde(skip)]
    pub clause: Clause,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionOutcome {
    #[serde(serialize_with = "ser_clause")]
    pub chosen: Clause,
    pub score: f64,
    /// Feasible candidates in ascending score order.
    pub ranking: Vec<RankedMessage>,
    pub feasible_count: usize,
}

fn ser_clause<S: serde::Serializer>(c: &Clause, s: S) -> Result<S::Ok, S::Error> { s.serialize_str(&canonicalize(c)) }

fn rank<F>(candidates: Vec<&Clause>, score: F) -> Result<SelectionOutcome, SelectionError>
where
    F: Fn(&Clause) -> Result<f64, MetricsError> + Sync,
{
    let mut ranking = candidates
        .into_par_iter()
        .map(|c| Ok(RankedMessage { message: canonicalize(c), score: score(c)?, clause: c.clone() }))
        .collect::<Result<Vec<_>, MetricsError>>()?;
    ranking.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.message.cmp(&b.message)));
    let best = ranking.first().ok_or(SelectionError::EmptyPool)?;
    Ok(SelectionOutcome { chosen: best.clause.clone(), score: best.score, feasible_count: ranking.len(), ranking })
}

/// `argmin_m U(K ⊕ m)` with the receiver's knowledge base known exactly.
pub fn select_for_kb(kb: &Program, pool: &CandidatePool, policy: Policy, cfg: &EntropyConfig) -> Result<SelectionOutcome, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    rank(pool.messages.iter().collect(), |m| Ok(kb_uncertainty(&kb.assimilate(m, policy), cfg)?.value))
}

/// `argmin_m sum_i w_i U(A_i ⊕ m)` over the sender's hypotheses `A_i`.
pub fn select_expected(belief: &SenderBelief, pool: &CandidatePool, policy: Policy, cfg: &EntropyConfig) -> Result<SelectionOutcome, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    rank(pool.messages.iter().collect(), |m| {
        belief.hypotheses.iter().try_fold(0.0, |acc, (a, w)| Ok(acc + w * kb_uncertainty(&a.assimilate(m, policy), cfg)?.value))
    })
}

/// `argmin_m H^{K ⊕ m}(q)`.
pub fn select_for_query(kb: &Program, pool: &CandidatePool, query: &Atom, policy: Policy, cfg: &EntropyConfig) -> Result<SelectionOutcome, SelectionError> {
    select_for_query_constrained(kb, pool, query, f64::INFINITY, &|_| 0.0, policy, cfg)
}

/// `argmin_m H^{K ⊕ m}(q)` over the candidates with `length_fn(m) <= l_max`.
pub fn select_for_query_constrained(
    kb: &Program,
    pool: &CandidatePool,
    query: &Atom,
    l_max: f64,
    length_fn: &(dyn Fn(&Clause) -> f64 + Sync),
    policy: Policy,
    cfg: &EntropyConfig,
) -> Result<SelectionOutcome, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    if !(l_max > 0.0) {
        return Err(SelectionError::InvalidBound(l_max));
    }
    let feasible: Vec<&Clause> = pool.messages.iter().filter(|m| length_fn(m) <= l_max).collect();
    if feasible.is_empty() {
        let shortest = pool.messages.iter().map(|m| length_fn(m)).fold(f64::INFINITY, f64::min);
        return Err(SelectionError::NoFeasibleMessage { l_max, shortest });
    }
    rank(feasible, |m| query_entropy(&kb.assimilate(m, policy), query, cfg))
}

/// Query-targeted choice for a sender that only holds a belief: minimizes
/// `sum_i w_i H^{A_i ⊕ m}(q)` over the candidates with `length_fn(m) <= l_max`.
pub fn select_expected_for_query(
    belief: &SenderBelief,
    pool: &CandidatePool,
    query: &Atom,
    l_max: f64,
    length_fn: &(dyn Fn(&Clause) -> f64 + Sync),
    policy: Policy,
    cfg: &EntropyConfig,
) -> Result<SelectionOutcome, SelectionError> {
    if pool.is_empty() {
        return Err(SelectionError::EmptyPool);
    }
    if !(l_max > 0.0) {
        return Err(SelectionError::InvalidBound(l_max));
    }
    let feasible: Vec<&Clause> = pool.messages.iter().filter(|m| length_fn(m) <= l_max).collect();
    if feasible.is_empty() {
        let shortest = pool.messages.iter().map(|m| length_fn(m)).fold(f64::INFINITY, f64::min);
        return Err(SelectionError::NoFeasibleMessage { l_max, shortest });
    }
    rank(feasible, |m| {
        belief.hypotheses.iter().try_fold(0.0, |acc, (a, w)| Ok(acc + w * query_entropy(&a.assimilate(m, policy), query, cfg)?))
    })
}
