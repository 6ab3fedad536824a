//! Data-aided sensing: choosing which distributed source to read next.
//!
//! The classic criterion picks the unobserved source minimizing
//! `H(X^c | obs) - H(X_n | obs)`, where conditioning is on the values actually observed so far.
//! The semantic criterion picks the node whose message most lowers the receiver's average
//! knowledge-base uncertainty.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::infotheory::{shannon_entropy, InfoError, JointPmf};
use crate::kb::{Clause, Policy, Program};
use crate::metrics::{kb_uncertainty, EntropyConfig, MetricsError};


#[derive(Clone, Debug, PartialEq, Error)]
pub enum DasError {
    #[error("every source has already been observed")]
    AllObserved,
    #[error("observed values have probability zero")]
    ZeroProbabilityEvidence,
    #[error("no candidate nodes remain")]
    EmptySet,
    #[error("invalid sensing state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// `Y = phi(X_1, ..., X_N)` as an explicit table over full assignments of the joint.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTable {
    values: Vec<String>,
}

impl TargetTable {
    /// Evaluates `phi` on the value labels of every assignment.
    pub fn from_fn(joint: &JointPmf, phi: impl Fn(&[&str]) -> String) -> Self {
        Self { values: joint.entries().map(|(a, _)| phi(&joint.labels(&a))).collect() }
    }

    /// Builds the table from `(assignment labels, value)` rows. Every assignment with positive
    /// probability must be covered.
    pub fn from_rows(joint: &JointPmf, rows: impl IntoIterator<Item = (Vec<String>, String)>) -> Result<Self, DasError> {
        let map: BTreeMap<Vec<String>, String> = rows.into_iter().collect();
        let mut values = Vec::with_capacity(joint.probs().len());
        for (a, p) in joint.entries() {
            let labels: Vec<String> = joint.labels(&a).into_iter().map(str::to_string).collect();
            match map.get(&labels) {
                Some(v) => values.push(v.clone()),
                None if p > 0.0 => return Err(DasError::InvalidState(format!("target undefined on assignment {labels:?}"))),
                None => values.push(String::new()),
            }
        }
        Ok(Self { values })
    }

    /// Entropy of the target under `pmf` (which must share the joint's layout).
    fn entropy(&self, pmf: &JointPmf) -> f64 {
        let mut mass: BTreeMap<&str, f64> = BTreeMap::new();
        for (v, &p) in self.values.iter().zip(pmf.probs()) {
            *mass.entry(v).or_default() += p;
        }
        shannon_entropy(&mass.into_values().collect::<Vec<_>>())
    }
}

/// Sources are the joint's variables, addressed by position.
#[derive(Clone, Debug, PartialEq)]
pub struct DasState {
    pub joint: JointPmf,
    /// `(source index, value index)` pairs, in acquisition order.
    pub observed: Vec<(usize, usize)>,
    pub target: Option<TargetTable>,
}

impl DasState {
    pub fn new(joint: JointPmf, target: Option<TargetTable>) -> Self { Self { joint, observed: Vec::new(), target } }

    fn validate(&self) -> Result<(), DasError> {
        let vars = self.joint.variables();
        let mut seen = BTreeSet::new();
        for &(i, x) in &self.observed {
            let v = vars.get(i).ok_or_else(|| DasError::InvalidState(format!("no source with index {i}")))?;
            if x >= v.domain.len() {
                return Err(DasError::InvalidState(format!("value index {x} out of range for source {i}")));
            }
            if !seen.insert(i) {
                return Err(DasError::InvalidState(format!("source {i} observed twice")));
            }
        }
        Ok(())
    }

    pub fn remaining(&self) -> Vec<usize> {
        (0..self.joint.variables().len()).filter(|i| !self.observed.iter().any(|(o, _)| o == i)).collect()
    }

    fn posterior(&self) -> Result<JointPmf, DasError> {
        self.joint.condition(&self.observed).map_err(|e| match e {
            InfoError::ZeroProbabilityEvent => DasError::ZeroProbabilityEvidence,
            other => other.into(),
        })
    }

    fn names(&self, idx: &[usize]) -> Vec<&str> { idx.iter().map(|&i| self.joint.variables()[i].name.as_str()).collect() }

    /// `H(X^c | obs)`: what is left to learn about the unobserved sources.
    pub fn remaining_entropy(&self) -> Result<f64, DasError> {
        let post = self.posterior()?;
        Ok(post.entropy_of(&self.names(&self.remaining()))?)
    }

    /// `H(Y | obs)` if a target is set, otherwise [`DasState::remaining_entropy`].
    pub fn uncertainty(&self) -> Result<f64, DasError> {
        match &self.target {
            Some(t) => Ok(t.entropy(&self.posterior()?)),
            None => self.remaining_entropy(),
        }
    }
}

/// The selected source and the criterion value of every candidate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceChoice {
    pub index: usize,
    pub scores: Vec<(usize, f64)>,
}

/// Argmin with ties broken by the lowest index. `scores` must be sorted by index.
fn argmin(scores: Vec<(usize, f64)>) -> Result<SourceChoice, DasError> {
    let (index, _) = scores.iter().copied().reduce(|best, s| if s.1 < best.1 { s } else { best }).ok_or(DasError::EmptySet)?;
    Ok(SourceChoice { index, scores })
}

/// Scores every unobserved source by `H(X^c | obs) - H(X_n | obs)` and returns the argmin.
pub fn select_source_entropy(state: &DasState) -> Result<SourceChoice, DasError> {
    state.validate()?;
    let remaining = state.remaining();
    if remaining.is_empty() {
        return Err(DasError::AllObserved);
    }
    let post = state.posterior()?;
    let total = post.entropy_of(&state.names(&remaining))?;
    let scores = remaining
        .iter()
        .map(|&n| Ok((n, total - post.entropy_of(&state.names(&[n]))?)))
        .collect::<Result<Vec<_>, DasError>>()?;
    argmin(scores)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The tracked uncertainty reached the threshold.
    TargetReached,
    /// No candidate improves enough to be worth acquiring.
    NoImprovement,
    RoundsExhausted,
    AllObserved,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DasRound {
    pub chosen: usize,
    pub scores: Vec<(usize, f64)>,
    /// Tracked uncertainty after acquiring `chosen`.
    pub value_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DasTrace {
    pub initial_value: f64,
    pub rounds: Vec<DasRound>,
    pub stop_reason: StopReason,
}

impl DasTrace {
    pub fn order(&self) -> Vec<usize> { self.rounds.iter().map(|r| r.chosen).collect() }

    pub fn final_value(&self) -> f64 { self.rounds.last().map_or(self.initial_value, |r| r.value_after) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DasStop {
    pub max_rounds: usize,
    /// Stop once the tracked entropy is at most this many bits.
    pub target_entropy: f64,
}

/// Greedy acquisition against a known realization of all sources.
///
/// Tracks `H(Y | obs)` when the state has a target, `H(X^c | obs)` otherwise.
pub fn run_das(state: &DasState, stop: &DasStop, realization: &[usize]) -> Result<DasTrace, DasError> {
    state.validate()?;
    let vars = state.joint.variables();
    if realization.len() != vars.len() || realization.iter().zip(vars).any(|(&x, v)| x >= v.domain.len()) {
        return Err(DasError::InvalidState("realization does not assign every source an in-domain value".into()));
    }
    if state.joint.prob(realization) <= 0.0 {
        return Err(DasError::ZeroProbabilityEvidence);
    }
    if state.observed.iter().any(|&(i, x)| realization[i] != x) {
        return Err(DasError::InvalidState("realization contradicts the observed values".into()));
    }

    let mut state = state.clone();
    let initial_value = state.uncertainty()?;
    let mut value = initial_value;
    let mut rounds = Vec::new();
    let stop_reason = loop {
        if value <= stop.target_entropy {
            break StopReason::TargetReached;
        }
        if rounds.len() >= stop.max_rounds {
            break StopReason::RoundsExhausted;
        }
        if state.remaining().is_empty() {
            break StopReason::AllObserved;
        }
        let choice = select_source_entropy(&state)?;
        state.observed.push((choice.index, realization[choice.index]));
        value = state.uncertainty()?;
        rounds.push(DasRound { chosen: choice.index, scores: choice.scores, value_after: value });
    };
    Ok(DasTrace { initial_value, rounds, stop_reason })
}

/// Scores each remaining node by the semantic content of its message and returns the argmin.
pub fn select_source_semantic(
    kb: &Program,
    node_messages: &[(usize, Clause)],
    remaining: &BTreeSet<usize>,
    policy: Policy,
    cfg: &EntropyConfig,
) -> Result<SourceChoice, DasError> {
    let candidates: Vec<&(usize, Clause)> = node_messages.iter().filter(|(i, _)| remaining.contains(i)).collect();
    if candidates.is_empty() {
        return Err(DasError::EmptySet);
    }
    let base = kb_uncertainty(kb, cfg)?.value;
    let mut scores = candidates
        .par_iter()
        .map(|(i, m)| Ok((*i, kb_uncertainty(&kb.assimilate(m, policy), cfg)?.value - base)))
        .collect::<Result<Vec<_>, MetricsError>>()?;
    scores.sort_by_key(|(i, _)| *i);
    argmin(scores)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemanticStop {
    pub max_rounds: usize,
    /// Stop when the best available change in uncertainty is above `-min_improvement`.
    pub min_improvement: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticDasOutcome {
    /// Values are the receiver's average uncertainty.
    pub trace: DasTrace,
    pub kb: Program,
}

/// Greedy semantic acquisition: each round assimilates the message of the best node.
pub fn run_semantic_das(
    kb: &Program,
    node_messages: &[(usize, Clause)],
    stop: &SemanticStop,
    policy: Policy,
    cfg: &EntropyConfig,
) -> Result<SemanticDasOutcome, DasError> {
    let mut remaining = BTreeSet::new();
    for (i, _) in node_messages {
        if !remaining.insert(*i) {
            return Err(DasError::InvalidState(format!("node {i} listed twice")));
        }
    }
    let mut kb = kb.clone();
    let initial_value = kb_uncertainty(&kb, cfg)?.value;
    let mut rounds = Vec::new();
    let stop_reason = loop {
        if rounds.len() >= stop.max_rounds {
            break StopReason::RoundsExhausted;
        }
        if remaining.is_empty() {
            break StopReason::AllObserved;
        }
        let choice = select_source_semantic(&kb, node_messages, &remaining, policy, cfg)?;
        let best = choice.scores.iter().find(|(i, _)| *i == choice.index).map(|s| s.1).unwrap_or(f64::INFINITY);
        if best > -stop.min_improvement {
            break StopReason::NoImprovement;
        }
        let (_, message) = node_messages.iter().find(|(i, _)| *i == choice.index).expect("chosen node exists");
        kb = kb.assimilate(message, policy);
        remaining.remove(&choice.index);
        rounds.push(DasRound { chosen: choice.index, scores: choice.scores, value_after: kb_uncertainty(&kb, cfg)?.value });
    };
    Ok(SemanticDasOutcome { trace: DasTrace { initial_value, rounds, stop_reason }, kb })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::Variable;

    fn bits(n: usize) -> Vec<Variable> { (1..=n).map(|i| Variable::binary(format!("X{i}"))).collect() }

    fn no_stop() -> DasStop { DasStop { max_rounds: usize::MAX, target_entropy: 0.0 } }

    #[test]
    fn prefers_higher_marginal_entropy() {
        let joint = JointPmf::from_fn(bits(2), |a| 0.5 * if a[1] == 1 { 0.9 } else { 0.1 }).unwrap();
        let choice = select_source_entropy(&DasState::new(joint, None)).unwrap();
        assert_eq!(choice.index, 0);
        assert!(choice.scores[0].1 < choice.scores[1].1);
    }

    #[test]
    fn forced_choice_and_copy() {
        let joint = JointPmf::from_fn(bits(2), |a| if a[0] == a[1] { 0.5 } else { 0.0 }).unwrap();
        let mut state = DasState::new(joint, None);
        state.observed.push((0, 1));
        let choice = select_source_entropy(&state).unwrap();
        assert_eq!(choice.index, 1);
        assert_eq!(choice.scores, vec![(1, 0.0)]);
        assert_eq!(state.remaining_entropy().unwrap(), 0.0);
        state.observed.push((1, 1));
        assert_eq!(select_source_entropy(&state), Err(DasError::AllObserved));
    }

    #[test]
    fn zero_probability_evidence() {
        let joint = JointPmf::from_fn(bits(2), |a| if a[0] == a[1] { 0.5 } else { 0.0 }).unwrap();
        let mut state = DasState::new(joint.clone(), None);
        state.observed = vec![(0, 1), (1, 0)];
        assert_eq!(state.uncertainty(), Err(DasError::ZeroProbabilityEvidence));
        assert_eq!(run_das(&DasState::new(joint, None), &no_stop(), &[0, 1]), Err(DasError::ZeroProbabilityEvidence));
    }

    #[test]
    fn copy_target_resolves_in_one_round() {
        let joint = JointPmf::from_fn(bits(2), |a| if a[0] == a[1] { 0.5 } else { 0.0 }).unwrap();
        let target = TargetTable::from_fn(&joint, |l| l[0].to_string());
        let trace = run_das(&DasState::new(joint, Some(target)), &no_stop(), &[1, 1]).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.stop_reason, StopReason::TargetReached);
        assert_eq!(trace.initial_value, 1.0);
    }

    #[test]
    fn xor_needs_every_bit() {
        let joint = JointPmf::uniform(bits(3)).unwrap();
        let target = TargetTable::from_fn(&joint, |l| (l.iter().filter(|&&x| x == "1").count() % 2).to_string());
        let trace = run_das(&DasState::new(joint, Some(target)), &no_stop(), &[1, 0, 1]).unwrap();
        assert_eq!(trace.order(), vec![0, 1, 2]);
        let values: Vec<f64> = trace.rounds.iter().map(|r| r.value_after).collect();
        assert_eq!(values, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn max_rounds_stop() {
        let joint = JointPmf::uniform(bits(3)).unwrap();
        let trace = run_das(&DasState::new(joint, None), &DasStop { max_rounds: 2, target_entropy: 0.0 }, &[0, 0, 0]).unwrap();
        assert_eq!(trace.rounds.len(), 2);
        assert_eq!(trace.stop_reason, StopReason::RoundsExhausted);
        assert_eq!(trace.final_value(), 1.0);
    }

    #[test]
    fn target_rows_must_cover_support() {
        let joint = JointPmf::uniform(bits(1)).unwrap();
        assert!(TargetTable::from_rows(&joint, [(vec!["0".to_string()], "a".to_string())]).is_err());
    }

    const K2: &str = "0.3::b.\n0.5::a :- b.";

    #[test]
    fn semantic_selection() {
        let cfg = EntropyConfig::default();
        let k: Program = K2.parse().unwrap();
        let nodes = vec![(1, "0.2::m.".parse().unwrap()), (2, "0.9::b.".parse().unwrap())];
        let choice = select_source_semantic(&k, &nodes, &BTreeSet::from([1, 2]), Policy::Union, &cfg).unwrap();
        assert_eq!(choice.index, 2);
        assert!((choice.scores[0].1 + 0.008).abs() < 1e-3);
        assert!((choice.scores[1].1 + 0.065).abs() < 1e-3);
        let only = select_source_semantic(&k, &nodes, &BTreeSet::from([1]), Policy::Union, &cfg).unwrap();
        assert_eq!(only.index, 1);
        assert_eq!(select_source_semantic(&k, &nodes, &BTreeSet::new(), Policy::Union, &cfg), Err(DasError::EmptySet));
    }

    #[test]
    fn semantic_tie_goes_to_lowest_index() {
        let cfg = EntropyConfig::default();
        let m: Clause = "0.9::b.".parse().unwrap();
        let nodes = vec![(7, m.clone()), (3, m)];
        let choice = select_source_semantic(&K2.parse().unwrap(), &nodes, &BTreeSet::from([3, 7]), Policy::Union, &cfg).unwrap();
        assert_eq!(choice.index, 3);
    }

    #[test]
    fn semantic_loop() {
        let cfg = EntropyConfig::default();
        let k: Program = K2.parse().unwrap();
        let nodes = vec![(1, "0.2::m.".parse().unwrap()), (2, "0.9::b.".parse().unwrap())];
        let stop = SemanticStop { max_rounds: 1, min_improvement: 0.0 };
        let out = run_semantic_das(&k, &nodes, &stop, Policy::Union, &cfg).unwrap();
        assert!((out.trace.initial_value - 0.746).abs() < 1e-3);
        assert_eq!(out.trace.order(), vec![2]);
        assert!((out.trace.rounds[0].value_after - 0.681).abs() < 1e-3);

        let strict = SemanticStop { max_rounds: 10, min_improvement: 1.0 };
        let out = run_semantic_das(&k, &nodes, &strict, Policy::Union, &cfg).unwrap();
        assert!(out.trace.rounds.is_empty());
        assert_eq!(out.trace.stop_reason, StopReason::NoImprovement);

        let dup = vec![(1, "0.2::m.".parse().unwrap()), (1, "0.9::b.".parse().unwrap())];
        assert!(matches!(run_semantic_das(&k, &dup, &stop, Policy::Union, &cfg), Err(DasError::InvalidState(_))));
    }
}
