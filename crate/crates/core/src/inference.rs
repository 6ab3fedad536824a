//! Exact query probabilities under the distribution semantics.
//!
//! Every ground clause with probability strictly between 0 and 1 is an independent switch.
//! Clauses with probability 1 are always on and clauses with probability 0 never are, so neither
//! is part of the switch vector. The probability of a query is the total weight of the switch
//! assignments whose least model contains it.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kb::{ground, Atom, GroundProgram, Program};

/// Default cap on the number of switches that may be enumerated.
pub const DEFAULT_MAX_SWITCHES: usize = 24;

/// Worlds summed sequentially per parallel work item.
const CHUNK: u64 = 1 << 12;


#[derive(Clone, Debug, PartialEq, Error)]
pub enum InferenceError {
    #[error("query {0} is not ground")]
    NonGroundQuery(String),
    #[error("relevant subprogram has {switches} probabilistic clauses, above the enumeration cap of {cap}")]
    BudgetExceeded { switches: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InferenceOptions {
    pub max_switches: usize,
    /// Probability reported for a query that matches no head.
    pub unmatched_prob: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self { Self { max_switches: DEFAULT_MAX_SWITCHES, unmatched_prob: 0.5 } }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    pub prob: f64,
    /// Whether the query is the head of some ground clause.
    pub matched: bool,
    pub worlds_enumerated: u64,
    pub switches: usize,
}

/// One on/off assignment to the switches of a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TotalChoice {
    pub switches: Vec<bool>,
}

impl TotalChoice {
    /// Decodes bit `i` of `index` as switch `i`.
    pub fn from_index(index: u64, len: usize) -> Self { Self { switches: (0..len).map(|i| index >> i & 1 == 1).collect() } }

    /// Product of `p` over on-switches and `1 - p` over off-switches.
    pub fn weight(&self, probs: &[f64]) -> f64 {
        self.switches.iter().zip(probs).map(|(&on, &p)| if on { p } else { 1.0 - p }).product()
    }
}

/// The clauses reachable from `query` by following heads to body atoms.
pub fn relevant_subprogram(g: &GroundProgram, query: &Atom) -> GroundProgram {
    let mut by_head: HashMap<&Atom, Vec<usize>> = HashMap::new();
    for (i, c) in g.clauses.iter().enumerate() {
        by_head.entry(&c.head).or_default().push(i);
    }
    let mut keep = BTreeSet::new();
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([query]);
    while let Some(atom) = queue.pop_front() {
        if !visited.insert(atom) {
            continue;
        }
        for &i in by_head.get(atom).into_iter().flatten() {
            keep.insert(i);
            queue.extend(g.clauses[i].body.iter());
        }
    }
    GroundProgram::from_clauses(keep.into_iter().map(|i| g.clauses[i].clone()).collect())
}

/// Ground program compiled to integer atom ids.
struct Compiled {
    n_atoms: usize,
    target: usize,
    /// (head, body) of always-on clauses.
    fixed: Vec<(usize, Vec<usize>)>,
    /// (head, body) of switchable clauses, aligned with `probs`.
    switched: Vec<(usize, Vec<usize>)>,
    probs: Vec<f64>,
}

impl Compiled {
    fn new(g: &GroundProgram, query: &Atom) -> Self {
        let mut ids: HashMap<&Atom, usize> = HashMap::new();
        let mut intern = |a| {
            let n = ids.len();
            *ids.entry(a).or_insert(n)
        };
        let target = intern(query);
        let (mut fixed, mut switched, mut probs) = (Vec::new(), Vec::new(), Vec::new());
        for c in &g.clauses {
            if c.prob <= 0.0 {
                continue;
            }
            let rule = (intern(&c.head), c.body.iter().map(&mut intern).collect());
            if c.prob >= 1.0 {
                fixed.push(rule);
            } else {
                switched.push(rule);
                probs.push(c.prob);
            }
        }
        Self { n_atoms: ids.len(), target, fixed, switched, probs }
    }

    /// Whether the least model of the fixed clauses plus the switched-on ones contains the target.
    fn entails(&self, choice: u64, model: &mut [bool]) -> bool {
        model.fill(false);
        let active = || {
            self.fixed
                .iter()
                .chain(self.switched.iter().enumerate().filter(|(i, _)| choice >> i & 1 == 1).map(|(_, r)| r))
        };
        loop {
            let mut changed = false;
            for (head, body) in active() {
                if !model[*head] && body.iter().all(|&b| model[b]) {
                    model[*head] = true;
                    changed = true;
                }
            }
            if model[self.target] {
                return true;
            }
            if !changed {
                return false;
            }
        }
    }

    fn weight(&self, choice: u64) -> f64 {
        self.probs.iter().enumerate().map(|(i, &p)| if choice >> i & 1 == 1 { p } else { 1.0 - p }).product()
    }

    fn mass(&self, range: std::ops::Range<u64>) -> f64 {
        let mut model = vec![false; self.n_atoms];
        range.filter(|&w| self.entails(w, &mut model)).map(|w| self.weight(w)).sum()
    }
}

/// Computes `p[K |- query]` on a ground program.
///
/// The sum over worlds is split into fixed-size chunks whose partial sums are added in index order,
/// so the result does not depend on the number of worker threads.
pub fn query_probability(g: &GroundProgram, query: &Atom, opts: &InferenceOptions) -> Result<QueryResult, InferenceError> {
    if !query.is_ground() {
        return Err(InferenceError::NonGroundQuery(query.to_string()));
    }
    if !g.head_set.contains(query) {
        return Ok(QueryResult { prob: opts.unmatched_prob, matched: false, worlds_enumerated: 0, switches: 0 });
    }
    let relevant = relevant_subprogram(g, query);
    let compiled = Compiled::new(&relevant, query);
    let switches = compiled.probs.len();
    if switches > opts.max_switches || switches >= 63 {
        return Err(InferenceError::BudgetExceeded { switches, cap: opts.max_switches });
    }
    let worlds = 1u64 << switches;
    let prob = if worlds <= CHUNK {
        compiled.mass(0..worlds)
    } else {
        let partial: Vec<f64> = (0..worlds / CHUNK).into_par_iter().map(|c| compiled.mass(c * CHUNK..(c + 1) * CHUNK)).collect();
        partial.iter().sum()
    };
    Ok(QueryResult { prob: prob.clamp(0.0, 1.0), matched: true, worlds_enumerated: worlds, switches })
}

/// Grounds `kb` and queries it.
pub fn query_program(kb: &Program, query: &Atom, opts: &InferenceOptions) -> Result<QueryResult, InferenceError> {
    query_probability(&ground(kb), query, opts)
}


#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = "0.2::a.\n0.3::b.\n0.5::a :- b.";
    const PASS_KB: &str = "0.9::pass_score(70).\n0.8::mark(tom,75).\n1.0::pass(X) :- mark(X,M), pass_score(S), M >=S.\n";

    fn q(kb: &str, atom: &str) -> QueryResult {
        query_program(&kb.parse().unwrap(), &atom.parse().unwrap(), &InferenceOptions::default()).unwrap()
    }

    #[test]
    fn example_one() {
        let a = q(EX1, "a");
        assert!((a.prob - 0.32).abs() < 1e-12);
        assert_eq!((a.switches, a.worlds_enumerated), (3, 8));
        assert!((q(EX1, "b").prob - 0.3).abs() < 1e-12);
    }

    #[test]
    fn pass_tom() {
        let r = q(PASS_KB, "pass(tom)");
        assert!((r.prob - 0.72).abs() < 1e-12);
        assert_eq!(r.switches, 2);
    }

    #[test]
    fn deterministic_fact() {
        let r = q("1.0::a.", "a");
        assert_eq!(r.prob, 1.0);
        assert_eq!(r.switches, 0);
        assert_eq!(r.worlds_enumerated, 1);
    }

    #[test]
    fn unmatched_uses_default() {
        let r = q(EX1, "zzz");
        assert!(!r.matched);
        assert_eq!(r.prob, 0.5);
        let opts = InferenceOptions { unmatched_prob: 0.1, ..Default::default() };
        let r = query_program(&EX1.parse().unwrap(), &"zzz".parse().unwrap(), &opts).unwrap();
        assert_eq!(r.prob, 0.1);
    }

    #[test]
    fn relevance() {
        let g = ground(&format!("{EX1}\n0.7::c.").parse().unwrap());
        let r = relevant_subprogram(&g, &"a".parse().unwrap());
        assert_eq!(r.len(), 3);
        assert!(!r.head_set.contains(&"c".parse().unwrap()));

        let g = ground(&PASS_KB.parse().unwrap());
        let r = relevant_subprogram(&g, &"pass(tom)".parse().unwrap());
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn relevance_excludes_other_students() {
        let g = ground(&"0.8::mark(tom,75). 0.7::mark(bob,90). 0.9::pass_score(70).\n1.0::pass(X) :- mark(X,M), pass_score(S), M >= S.".parse().unwrap());
        let r = relevant_subprogram(&g, &"pass(tom)".parse().unwrap());
        let texts: Vec<String> = r.clauses.iter().map(|c| c.to_string()).collect();
        assert_eq!(texts, vec!["0.8::mark(tom,75).", "0.9::pass_score(70).", "1.0::pass(tom) :- mark(tom,75), pass_score(70)."]);
    }

    #[test]
    fn budget_exceeded() {
        let text: String = (0..6).map(|i| format!("0.5::a :- b{i}.\n0.5::b{i}.\n")).collect();
        let opts = InferenceOptions { max_switches: 10, ..Default::default() };
        let e = query_program(&text.parse().unwrap(), &"a".parse().unwrap(), &opts).unwrap_err();
        assert_eq!(e, InferenceError::BudgetExceeded { switches: 12, cap: 10 });
    }

    #[test]
    fn zero_probability_clauses_are_never_on() {
        let r = q("0.0::a.\n0.5::b.\n1.0::a :- b.", "a");
        assert!((r.prob - 0.5).abs() < 1e-15);
        assert_eq!(r.switches, 1);
    }

    #[test]
    fn chunked_sum_matches_closed_form() {
        // 14 independent facts for the same head: 2^14 worlds, several chunks.
        let probs: Vec<f64> = (0..14).map(|i| 0.02 + 0.05 * i as f64).collect();
        let text: String = probs.iter().map(|p| format!("{p}::a.\n")).collect();
        let r = q(&text, "a");
        let expected = 1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>();
        assert!((r.prob - expected).abs() < 1e-12);
    }

    #[test]
    fn non_ground_query_rejected() {
        let e = query_program(&EX1.parse().unwrap(), &"p(X)".parse().unwrap(), &InferenceOptions::default()).unwrap_err();
        assert!(matches!(e, InferenceError::NonGroundQuery(_)));
    }

    #[test]
    fn choice_weights() {
        let probs = [0.2, 0.3, 0.5];
        let total: f64 = (0..8).map(|i| TotalChoice::from_index(i, 3).weight(&probs)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(TotalChoice::from_index(0b101, 3).switches, vec![true, false, true]);
    }
}
