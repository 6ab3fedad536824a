//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use semcom::infotheory::{JointPmf, Variable};
use semcom::kb::{Atom, Clause, Literal, Program};

pub const EX1: &str = "0.2::a.\n0.3::b.\n0.5::a :- b.\n";
pub const EX2: &str = "0.3::b.\n0.5::a :- b.\n";
pub const PASS_KB: &str = "0.9::pass_score(70).\n0.8::mark(tom,75).\n1.0::pass(X) :- mark(X,M), pass_score(S), M >=S.\n";
pub const BOB_KB: &str = "0.8::mark(tom,75).\n1.0::pass(X) :- mark(X,M), pass_score(S), M >=S.\n";

pub const ATOMS: [&str; 5] = ["a", "b", "c", "d", "e"];
const PROBS: [f64; 10] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.65, 0.75, 0.9, 0.95];

pub fn program(text: &str) -> Program { text.parse().unwrap() }

pub fn clause(text: &str) -> Clause { text.parse().unwrap() }

pub fn atom(text: &str) -> Atom { text.parse().unwrap() }

/// A random propositional clause over [`ATOMS`]; `deterministic` forces probability 1.
pub fn random_clause<R: Rng>(rng: &mut R, deterministic: bool) -> Clause {
    let head = *ATOMS.choose(rng).unwrap();
    let body_len = rng.gen_range(0..=2);
    let body: Vec<Literal> = ATOMS
        .choose_multiple(rng, body_len)
        .filter(|b| **b != head)
        .map(|b| Literal::Atom(Atom::prop(*b)))
        .collect();
    let prob = if deterministic { 1.0 } else { *PROBS.choose(rng).unwrap() };
    Clause::new(prob, Atom::prop(head), body)
}

/// Up to `max_prob` probabilistic clauses plus up to two deterministic ones, shuffled.
pub fn random_program<R: Rng>(rng: &mut R, max_prob: usize) -> Program {
    let n = rng.gen_range(1..=max_prob);
    let mut clauses: Vec<Clause> = (0..n).map(|_| random_clause(rng, false)).collect();
    for _ in 0..rng.gen_range(0..=2) {
        clauses.push(random_clause(rng, true));
    }
    clauses.shuffle(rng);
    Program::from(clauses)
}

/// Least model of a set of propositional clauses by naive fixpoint iteration.
fn least_model(clauses: &[&Clause]) -> BTreeSet<String> {
    let mut model = BTreeSet::new();
    loop {
        let before = model.len();
        for c in clauses {
            if c.body_atoms().all(|a| model.contains(&a.predicate)) {
                model.insert(c.head.predicate.clone());
            }
        }
        if model.len() == before {
            return model;
        }
    }
}

/// `p[K |- q]` for a propositional program by enumerating every subset of its clauses, with no
/// grounding, pruning or switch compression.
pub fn brute_force_prob(program: &Program, query: &str) -> f64 {
    let clauses = program.clauses();
    let n = clauses.len();
    let mut total = 0.0;
    for mask in 0u64..(1 << n) {
        let mut weight = 1.0;
        let mut on = Vec::new();
        for (i, c) in clauses.iter().enumerate() {
            if mask >> i & 1 == 1 {
                weight *= c.prob;
                on.push(c);
            } else {
                weight *= 1.0 - c.prob;
            }
        }
        if weight > 0.0 && least_model(&on).contains(query) {
            total += weight;
        }
    }
    total
}

pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Average entropy over the distinct heads, from [`brute_force_prob`].
pub fn brute_force_uncertainty(program: &Program) -> f64 {
    let heads: BTreeSet<&str> = program.iter().map(|c| c.head.predicate.as_str()).collect();
    if heads.is_empty() {
        return 0.0;
    }
    heads.iter().map(|h| h2(brute_force_prob(program, h))).sum::<f64>() / heads.len() as f64
}

/// A random joint over 1 to `max_vars` variables with 2 to `max_vals` values each. Some entries
/// are zeroed to exercise sparse supports.
pub fn random_joint<R: Rng>(rng: &mut R, max_vars: usize, max_vals: usize) -> JointPmf {
    let n = rng.gen_range(1..=max_vars);
    let vars: Vec<Variable> = (0..n).map(|i| Variable::new(format!("V{i}"), 0..rng.gen_range(2..=max_vals))).collect();
    let size: usize = vars.iter().map(|v| v.domain.len()).product();
    let mut raw: Vec<f64> = (0..size).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() }).collect();
    if raw.iter().all(|&x| x == 0.0) {
        raw[0] = 1.0;
    }
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // Push the rounding residue into the largest entry.
    let residue = 1.0 - probs.iter().sum::<f64>();
    let max = probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    probs[max] += residue;
    JointPmf::new(vars, probs).unwrap()
}

/// Shannon entropy of an unnormalized mass vector, normalizing first.
pub fn entropy_of_masses(masses: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    masses.iter().filter(|&&m| m > 0.0).map(|&m| m / total).map(|p| -p * p.log2()).sum()
}

/// `H(X_n | observed values)` by direct summation over the table.
pub fn oracle_conditional_entropy(joint: &JointPmf, observed: &[(usize, usize)], n: usize) -> f64 {
    let mut masses = vec![0.0; joint.variables()[n].domain.len()];
    for (a, p) in joint.entries() {
        if observed.iter().all(|&(i, x)| a[i] == x) {
            masses[a[n]] += p;
        }
    }
    entropy_of_masses(&masses)
}

/// Correlated three-bit joint used by the DAS tests and shipped as a CLI fixture.
pub fn correlated3() -> JointPmf {
    let vars = (1..=3).map(|i| Variable::binary(format!("X{i}"))).collect();
    JointPmf::new(vars, vec![0.20, 0.05, 0.05, 0.10, 0.04, 0.16, 0.10, 0.30]).unwrap()
}
