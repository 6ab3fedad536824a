//! Probability-annotated definite clauses: terms, atoms, clauses and programs.
//!
//! The surface language is the ProbLog subset `p::head :- body.` where the body is a comma
//! separated list of atoms and integer comparisons. Omitted probabilities default to `1.0`.

mod ground;
mod parser;

use std::collections::BTreeSet;
use std::fmt::{self, Display, Formatter};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ground::{ground, GroundClause, GroundProgram};
pub use parser::{parse_atom, parse_clause, parse_program, ParseError};


/***** TERMS *****/
/// An argument of an atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    /// A lowercase-initial constant such as `tom`.
    Const(String),
    /// An integer constant such as `75`.
    Int(i64),
    /// An uppercase- or underscore-initial variable.
    Var(String),
}

impl Term {
    #[inline]
    pub fn is_var(&self) -> bool { matches!(self, Term::Var(_)) }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Int(i) => write!(f, "{i}"),
            Term::Var(v) => f.write_str(v),
        }
    }
}


/***** ATOMS *****/
/// A predicate applied to a (possibly empty) list of terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    /// Creates a new atom. The predicate is assumed to be a valid lowercase identifier.
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self { Self { predicate: predicate.into(), args } }

    /// A zero-arity atom, e.g. `a`.
    pub fn prop(predicate: impl Into<String>) -> Self { Self::new(predicate, Vec::new()) }

    #[inline]
    pub fn arity(&self) -> usize { self.args.len() }

    #[inline]
    pub fn is_ground(&self) -> bool { !self.args.iter().any(Term::is_var) }

    /// Iterates over the names of the variables in this atom, in order of occurrence.
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl FromStr for Atom {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> { parse_atom(s) }
}


/***** COMPARISONS *****/
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }
}

/// An integer comparison builtin, e.g. `M >= S`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Comparison {
    pub op: CmpOp,
    pub lhs: Term,
    pub rhs: Term,
}

impl Comparison {
    /// Evaluates the comparison. Returns `None` unless both sides are integers.
    pub fn evaluate(&self) -> Option<bool> {
        match (&self.lhs, &self.rhs) {
            (Term::Int(l), Term::Int(r)) => Some(self.op.holds(*l, *r)),
            _ => None,
        }
    }
}

impl Display for Comparison {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result { write!(f, "{}{}{}", self.lhs, self.op.symbol(), self.rhs) }
}


/***** CLAUSES *****/
/// A body element.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Literal {
    Atom(Atom),
    Cmp(Comparison),
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => a.fmt(f),
            Literal::Cmp(c) => c.fmt(f),
        }
    }
}

/// A probability-annotated definite clause. A fact is a clause with an empty body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub prob: f64,
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn new(prob: f64, head: Atom, body: Vec<Literal>) -> Self { Self { prob, head, body } }

    pub fn fact(prob: f64, head: Atom) -> Self { Self::new(prob, head, Vec::new()) }

    #[inline]
    pub fn is_fact(&self) -> bool { self.body.is_empty() }

    /// True if neither the head nor the body mention a variable.
    pub fn is_ground(&self) -> bool {
        self.head.is_ground()
            && self.body.iter().all(|l| match l {
                Literal::Atom(a) => a.is_ground(),
                Literal::Cmp(c) => !c.lhs.is_var() && !c.rhs.is_var(),
            })
    }

    /// The body atoms, skipping comparisons.
    pub fn body_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|l| match l {
            Literal::Atom(a) => Some(a),
            Literal::Cmp(_) => None,
        })
    }

    /// Returns the first variable that occurs in the head or in a comparison but in no body atom.
    pub fn range_violation(&self) -> Option<&str> {
        let bound: BTreeSet<&str> = self.body_atoms().flat_map(Atom::variables).collect();
        let head_vars = self.head.variables();
        let cmp_vars = self.body.iter().flat_map(|l| match l {
            Literal::Cmp(c) => [&c.lhs, &c.rhs]
                .into_iter()
                .filter_map(|t| match t {
                    Term::Var(v) => Some(v.as_str()),
                    _ => None,
                })
                .collect::<Vec<_>>(),
            Literal::Atom(_) => Vec::new(),
        });
        head_vars.chain(cmp_vars).find(|v| !bound.contains(v))
    }

    /// Same head and body, regardless of probability.
    pub fn same_rule(&self, other: &Clause) -> bool { self.head == other.head && self.body == other.body }
}

impl Display for Clause {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}::{}", self.prob, self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{lit}")?;
            }
        }
        f.write_str(".")
    }
}

impl FromStr for Clause {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> { parse_clause(s) }
}

/// Deterministic text form of a clause: shortest round-trip probability, `::`, the head, then
/// ` :- ` and the `, `-separated body if any, then `.`.
pub fn canonicalize(clause: &Clause) -> String { clause.to_string() }


/***** PROGRAMS *****/
/// How a received clause is merged into a knowledge base.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Append the clause; duplicates combine as independent evidence (noisy-or).
    #[default]
    Union,
    /// Drop every clause with the same head and body first, then append.
    Replace,
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "union" => Ok(Policy::Union),
            "replace" => Ok(Policy::Replace),
            other => Err(format!("unknown assimilation policy '{other}'")),
        }
    }
}

impl Display for Policy {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Union => "union",
            Policy::Replace => "replace",
        })
    }
}

/// A knowledge base: an ordered multiset of clauses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    clauses: Vec<Clause>,
}

impl Program {
    #[inline]
    pub fn new() -> Self { Self::default() }

    #[inline]
    pub fn clauses(&self) -> &[Clause] { &self.clauses }

    #[inline]
    pub fn len(&self) -> usize { self.clauses.len() }

    #[inline]
    pub fn is_empty(&self) -> bool { self.clauses.is_empty() }

    pub fn iter(&self) -> std::slice::Iter<'_, Clause> { self.clauses.iter() }

    pub fn push(&mut self, clause: Clause) { self.clauses.push(clause) }

    /// Merges `message` into a copy of this program under the given policy.
    pub fn assimilate(&self, message: &Clause, policy: Policy) -> Program {
        let mut clauses: Vec<Clause> = match policy {
            Policy::Union => self.clauses.clone(),
            Policy::Replace => self.clauses.iter().filter(|c| !c.same_rule(message)).cloned().collect(),
        };
        clauses.push(message.clone());
        Program { clauses }
    }

    /// Canonical text of every clause, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}

/// Free-function form of [`Program::assimilate`].
pub fn assimilate(kb: &Program, message: &Clause, policy: Policy) -> Program { kb.assimilate(message, policy) }

impl From<Vec<Clause>> for Program {
    fn from(clauses: Vec<Clause>) -> Self { Self { clauses } }
}

impl FromIterator<Clause> for Program {
    fn from_iter<I: IntoIterator<Item = Clause>>(iter: I) -> Self { Self { clauses: iter.into_iter().collect() } }
}

impl<'a> IntoIterator for &'a Program {
    type Item = &'a Clause;
    type IntoIter = std::slice::Iter<'a, Clause>;

    fn into_iter(self) -> Self::IntoIter { self.clauses.iter() }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> { parse_program(s) }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result { f.write_str(&self.to_text()) }
}
