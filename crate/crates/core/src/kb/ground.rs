//! Bottom-up grounding.
//!
//! Clauses without variables are kept as they are (after evaluating their comparisons). Clauses
//! with variables are instantiated only against atoms that already occur as heads of produced
//! instances, iterated to a fixpoint. Each emitted instance is tagged with the index of the clause
//! it came from so that duplicated source clauses stay independent choice points.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Display, Formatter};

use super::{Atom, Clause, Comparison, Literal, Program, Term};


/// A clause whose head and body are ground atoms. Comparisons have been evaluated away.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundClause {
    pub prob: f64,
    pub head: Atom,
    pub body: Vec<Atom>,
    /// Index of the source clause in the program.
    pub source: usize,
}

impl GroundClause {
    pub fn to_clause(&self) -> Clause { Clause::new(self.prob, self.head.clone(), self.body.iter().cloned().map(Literal::Atom).collect()) }
}

impl Display for GroundClause {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result { self.to_clause().fmt(f) }
}

/// The grounded form of a [`Program`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundProgram {
    pub clauses: Vec<GroundClause>,
    /// Constants (symbolic and integer) occurring in the ground clauses.
    pub herbrand: BTreeSet<Term>,
    /// Distinct heads of `clauses`.
    pub head_set: BTreeSet<Atom>,
    /// Instances dropped because a comparison had non-integer operands.
    pub diagnostics: Vec<String>,
}

impl GroundProgram {
    /// Builds a ground program from already-ground clauses, recomputing the derived sets.
    pub fn from_clauses(clauses: Vec<GroundClause>) -> Self {
        let mut herbrand = BTreeSet::new();
        let mut head_set = BTreeSet::new();
        for c in &clauses {
            head_set.insert(c.head.clone());
            for a in std::iter::once(&c.head).chain(&c.body) {
                herbrand.extend(a.args.iter().cloned());
            }
        }
        Self { clauses, herbrand, head_set, diagnostics: Vec::new() }
    }

    #[inline]
    pub fn len(&self) -> usize { self.clauses.len() }

    #[inline]
    pub fn is_empty(&self) -> bool { self.clauses.is_empty() }

    /// Clauses with probability strictly between zero and one.
    pub fn probabilistic_count(&self) -> usize { self.clauses.iter().filter(|c| c.prob > 0.0 && c.prob < 1.0).count() }
}

type Subst = HashMap<String, Term>;

fn apply(atom: &Atom, subst: &Subst) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => subst.get(v).cloned().unwrap_or_else(|| t.clone()),
                _ => t.clone(),
            })
            .collect(),
    }
}

fn apply_term(term: &Term, subst: &Subst) -> Term {
    match term {
        Term::Var(v) => subst.get(v).cloned().unwrap_or_else(|| term.clone()),
        _ => term.clone(),
    }
}

/// Extends `subst` so that `pattern` matches the ground atom `fact`.
fn unify(pattern: &Atom, fact: &Atom, subst: &Subst) -> Option<Subst> {
    if pattern.predicate != fact.predicate || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut out = subst.clone();
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        match p {
            Term::Var(v) => match out.get(v) {
                Some(bound) if bound != f => return None,
                Some(_) => {},
                None => {
                    out.insert(v.clone(), f.clone());
                },
            },
            _ if p != f => return None,
            _ => {},
        }
    }
    Some(out)
}

enum CmpOutcome {
    Keep,
    Fails,
    NonInteger(Comparison),
}

fn check_comparisons(clause: &Clause, subst: &Subst) -> CmpOutcome {
    for lit in &clause.body {
        if let Literal::Cmp(c) = lit {
            let g = Comparison { op: c.op, lhs: apply_term(&c.lhs, subst), rhs: apply_term(&c.rhs, subst) };
            match g.evaluate() {
                Some(true) => {},
                Some(false) => return CmpOutcome::Fails,
                None => return CmpOutcome::NonInteger(g),
            }
        }
    }
    CmpOutcome::Keep
}

struct Grounder<'p> {
    program: &'p Program,
    /// Known ground atoms indexed by (predicate, arity).
    known: BTreeMap<(String, usize), BTreeSet<Atom>>,
    seen: HashSet<(usize, Atom, Vec<Atom>)>,
    dropped: HashSet<(usize, String)>,
    instances: Vec<GroundClause>,
    diagnostics: Vec<String>,
}

impl<'p> Grounder<'p> {
    fn emit(&mut self, idx: usize, clause: &Clause, subst: &Subst, fresh: &mut Vec<Atom>) {
        let head = apply(&clause.head, subst);
        let body: Vec<Atom> = clause.body_atoms().map(|a| apply(a, subst)).collect();
        match check_comparisons(clause, subst) {
            CmpOutcome::Keep => {},
            CmpOutcome::Fails => return,
            CmpOutcome::NonInteger(cmp) => {
                let key = (idx, format!("{head}|{cmp}"));
                if self.dropped.insert(key) {
                    self.diagnostics.push(format!("clause {idx}: dropped instance with head {head}: comparison {cmp} has non-integer operands"));
                }
                return;
            },
        }
        if self.seen.insert((idx, head.clone(), body.clone())) {
            fresh.push(head.clone());
            self.instances.push(GroundClause { prob: clause.prob, head, body, source: idx });
        }
    }

    /// Enumerates every substitution that matches body atoms `rest` against known atoms.
    fn join(&self, rest: &[&Atom], subst: Subst, out: &mut Vec<Subst>) {
        let Some((first, tail)) = rest.split_first() else {
            out.push(subst);
            return;
        };
        let key = (first.predicate.clone(), first.arity());
        if let Some(candidates) = self.known.get(&key) {
            for fact in candidates {
                if let Some(s) = unify(first, fact, &subst) {
                    self.join(tail, s, out);
                }
            }
        }
    }

    fn run(mut self) -> GroundProgram {
        let mut fresh = Vec::new();
        let program = self.program;
        for (idx, clause) in program.iter().enumerate() {
            if clause.is_ground() {
                self.emit(idx, clause, &Subst::new(), &mut fresh);
            }
        }
        loop {
            for atom in fresh.drain(..) {
                self.known.entry((atom.predicate.clone(), atom.arity())).or_default().insert(atom);
            }
            for (idx, clause) in program.iter().enumerate() {
                if clause.is_ground() {
                    continue;
                }
                let body: Vec<&Atom> = clause.body_atoms().collect();
                let mut substs = Vec::new();
                self.join(&body, Subst::new(), &mut substs);
                for s in substs {
                    self.emit(idx, clause, &s, &mut fresh);
                }
            }
            if fresh.is_empty() {
                break;
            }
        }
        // Stable: source order first, discovery order within one source clause.
        self.instances.sort_by_key(|c| c.source);
        let mut g = GroundProgram::from_clauses(self.instances);
        g.diagnostics = self.diagnostics;
        g
    }
}

/// Grounds a range-restricted program bottom-up.
pub fn ground(program: &Program) -> GroundProgram {
    Grounder {
        program,
        known: BTreeMap::new(),
        seen: HashSet::new(),
        dropped: HashSet::new(),
        instances: Vec::new(),
        diagnostics: Vec::new(),
    }
    .run()
}
