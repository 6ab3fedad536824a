//! Semantic security: a message that leaves an eavesdropper's query entropy where it was while
//! lowering the intended receiver's.

use serde::Serialize;

use crate::kb::{Atom, Clause, Policy, Program};
use crate::metrics::{query_entropy, EntropyConfig, MetricsError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecurityParams {
    /// Allowed change of the eavesdropper's entropy for the message to count as opaque.
    pub tol: f64,
    /// Required drop of the receiver's entropy for the message to count as useful.
    pub margin: f64,
    pub policy: Policy,
}

impl Default for SecurityParams {
    fn default() -> Self { Self { tol: 1e-9, margin: 1e-9, policy: Policy::Union } }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecurityReport {
    pub query: String,
    pub eve_entropy_before: f64,
    pub eve_entropy_after: f64,
    pub bob_entropy_before: f64,
    pub bob_entropy_after: f64,
    pub opaque: bool,
    pub useful: bool,
    pub secure: bool,
}

/// Entropy of `query` before and after assimilating `message`.
fn entropy_shift(kb: &Program, message: &Clause, query: &Atom, policy: Policy, cfg: &EntropyConfig) -> Result<(f64, f64), MetricsError> {
    Ok((query_entropy(kb, query, cfg)?, query_entropy(&kb.assimilate(message, policy), query, cfg)?))
}

pub fn is_opaque(eve: &Program, message: &Clause, query: &Atom, tol: f64, policy: Policy, cfg: &EntropyConfig) -> Result<bool, MetricsError> {
    let (before, after) = entropy_shift(eve, message, query, policy, cfg)?;
    Ok((before - after).abs() <= tol)
}

pub fn is_useful(bob: &Program, message: &Clause, query: &Atom, margin: f64, policy: Policy, cfg: &EntropyConfig) -> Result<bool, MetricsError> {
    let (before, after) = entropy_shift(bob, message, query, policy, cfg)?;
    Ok(before - after > margin)
}

pub fn check_security(eve: &Program, bob: &Program, message: &Clause, query: &Atom, params: &SecurityParams, cfg: &EntropyConfig) -> Result<SecurityReport, MetricsError> {
    let (eve_entropy_before, eve_entropy_after) = entropy_shift(eve, message, query, params.policy, cfg)?;
    let (bob_entropy_before, bob_entropy_after) = entropy_shift(bob, message, query, params.policy, cfg)?;
    let opaque = (eve_entropy_before - eve_entropy_after).abs() <= params.tol;
    let useful = bob_entropy_before - bob_entropy_after > params.margin;
    Ok(SecurityReport {
        query: query.to_string(),
        eve_entropy_before,
        eve_entropy_after,
        bob_entropy_before,
        bob_entropy_after,
        opaque,
        useful,
        secure: opaque && useful,
    })
}

/// One report per query.
pub fn check_security_queries(eve: &Program, bob: &Program, message: &Clause, queries: &[Atom], params: &SecurityParams, cfg: &EntropyConfig) -> Result<Vec<SecurityReport>, MetricsError> {
    queries.iter().map(|q| check_security(eve, bob, message, q, params, cfg)).collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    const BOB: &str = "0.8::mark(tom,75).\n1.0::pass(X) :- mark(X,M), pass_score(S), M >= S.";

    fn setup() -> (Program, Clause, Atom, EntropyConfig) {
        (BOB.parse().unwrap(), "0.9::pass_score(70).".parse().unwrap(), "pass(tom)".parse().unwrap(), EntropyConfig::default())
    }

    #[test]
    fn opacity() {
        let (bob, m, q, cfg) = setup();
        assert!(is_opaque(&Program::new(), &m, &q, 1e-9, Policy::Union, &cfg).unwrap());
        assert!(!is_opaque(&bob, &m, &q, 1e-9, Policy::Union, &cfg).unwrap());
        assert!(is_opaque(&bob, &m, &q, f64::INFINITY, Policy::Union, &cfg).unwrap());
    }

    #[test]
    fn duplicate_message() {
        let cfg = EntropyConfig::default();
        let eve: Program = "0.5::a.\n0.5::b.".parse().unwrap();
        let m: Clause = "0.5::a.".parse().unwrap();
        // a goes 0.5 -> 0.75 under noisy-or; b is untouched.
        assert!(!is_opaque(&eve, &m, &"a".parse().unwrap(), 1e-9, Policy::Union, &cfg).unwrap());
        assert!(is_opaque(&eve, &m, &"b".parse().unwrap(), 1e-9, Policy::Union, &cfg).unwrap());
    }

    #[test]
    fn usefulness() {
        let (bob, m, q, cfg) = setup();
        assert!(is_useful(&bob, &m, &q, 1e-9, Policy::Union, &cfg).unwrap());
        assert!(!is_useful(&bob, &"0.9::weather(sunny).".parse().unwrap(), &q, 1e-9, Policy::Union, &cfg).unwrap());
        assert!(!is_useful(&bob, &m, &q, 0.2, Policy::Union, &cfg).unwrap());
        assert!(!is_useful(&bob, &m, &q, f64::INFINITY, Policy::Union, &cfg).unwrap());
    }

    #[test]
    fn combined_reports() {
        let (bob, m, q, cfg) = setup();
        let p = SecurityParams::default();
        let r = check_security(&Program::new(), &bob, &m, &q, &p, &cfg).unwrap();
        assert!(r.opaque && r.useful && r.secure);
        assert_eq!(r.bob_entropy_before, 1.0);
        assert!((r.bob_entropy_after - 0.855).abs() < 1e-3);
        let same = check_security(&bob, &bob, &m, &q, &p, &cfg).unwrap();
        assert!(!same.secure);
    }

    #[test]
    fn direct_disclosure() {
        let (bob, _, q, cfg) = setup();
        let m: Clause = "1.0::pass(tom).".parse().unwrap();
        let eve: Program = "0.3::other.".parse().unwrap();
        let r = check_security(&eve, &bob, &m, &q, &SecurityParams::default(), &cfg).unwrap();
        assert!(!r.opaque);
        assert_eq!(r.eve_entropy_after, 0.0);
    }

    #[test]
    fn per_query_reports() {
        let (bob, m, q, cfg) = setup();
        let qs = vec![q, "mark(tom,75)".parse().unwrap()];
        let rs = check_security_queries(&Program::new(), &bob, &m, &qs, &SecurityParams::default(), &cfg).unwrap();
        assert_eq!(rs.len(), 2);
        assert!(rs[0].secure);
        assert!(!rs[1].useful);
    }
}
