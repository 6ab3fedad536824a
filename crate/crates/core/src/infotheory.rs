//! Discrete information theory on dense joint tables, in bits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::binary_entropy;

/// Tolerance on the total mass of a joint table.
pub const PMF_TOLERANCE: f64 = 1e-9;


#[derive(Clone, Debug, PartialEq, Error)]
pub enum InfoError {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("variable '{0}' appears in both argument sets")]
    Overlap(String),
    #[error("conditioning event has zero probability")]
    ZeroProbabilityEvent,
    #[error("crossover probability {0} is outside [0, 1]")]
    InvalidChannel(f64),
}

/// A named variable with a finite domain of labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: impl IntoIterator<Item = impl ToString>) -> Self {
        Self { name: name.into(), domain: domain.into_iter().map(|d| d.to_string()).collect() }
    }

    /// A variable over `{"0", "1"}`.
    pub fn binary(name: impl Into<String>) -> Self { Self::new(name, ["0", "1"]) }

    pub fn value_index(&self, label: &str) -> Option<usize> { self.domain.iter().position(|d| d == label) }
}

/// A joint distribution over named finite-domain variables, stored densely in row-major order
/// (the last variable varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf {
    variables: Vec<Variable>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(variables: Vec<Variable>, probs: Vec<f64>) -> Result<Self, InfoError> {
        let mut names = BTreeSet::new();
        for v in &variables {
            if v.domain.is_empty() {
                return Err(InfoError::InvalidPmf(format!("variable '{}' has an empty domain", v.name)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(InfoError::InvalidPmf(format!("duplicate variable '{}'", v.name)));
            }
            let labels: BTreeSet<&String> = v.domain.iter().collect();
            if labels.len() != v.domain.len() {
                return Err(InfoError::InvalidPmf(format!("variable '{}' has duplicate domain values", v.name)));
            }
        }
        let size: usize = variables.iter().map(|v| v.domain.len()).product();
        if probs.len() != size {
            return Err(InfoError::InvalidPmf(format!("expected {size} table entries, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(InfoError::InvalidPmf(format!("negative or non-finite probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(InfoError::InvalidPmf(format!("probabilities sum to {total}")));
        }
        Ok(Self { variables, probs })
    }

    /// Builds a table from `(assignment labels, probability)` rows. Missing rows have probability 0;
    /// repeated rows are rejected.
    pub fn from_rows<I, S>(variables: Vec<Variable>, rows: I) -> Result<Self, InfoError>
    where
        I: IntoIterator<Item = (Vec<S>, f64)>,
        S: AsRef<str>,
    {
        let size: usize = variables.iter().map(|v| v.domain.len()).product();
        let mut probs = vec![0.0; size];
        let mut filled = vec![false; size];
        for (labels, p) in rows {
            if labels.len() != variables.len() {
                return Err(InfoError::InvalidPmf(format!("row has {} values for {} variables", labels.len(), variables.len())));
            }
            let mut idx = 0;
            for (v, l) in variables.iter().zip(&labels) {
                let k = v.value_index(l.as_ref()).ok_or_else(|| InfoError::InvalidPmf(format!("value '{}' not in domain of '{}'", l.as_ref(), v.name)))?;
                idx = idx * v.domain.len() + k;
            }
            if std::mem::replace(&mut filled[idx], true) {
                return Err(InfoError::InvalidPmf("repeated assignment".into()));
            }
            probs[idx] = p;
        }
        Self::new(variables, probs)
    }

    /// Builds a table by evaluating `f` on every assignment of value indices.
    pub fn from_fn(variables: Vec<Variable>, f: impl Fn(&[usize]) -> f64) -> Result<Self, InfoError> {
        let dims: Vec<usize> = variables.iter().map(|v| v.domain.len()).collect();
        let probs = (0..dims.iter().product()).map(|i| f(&decode(i, &dims))).collect();
        Self::new(variables, probs)
    }

    pub fn uniform(variables: Vec<Variable>) -> Result<Self, InfoError> {
        let size: usize = variables.iter().map(|v| v.domain.len()).product();
        Self::new(variables, vec![1.0 / size as f64; size])
    }

    #[inline]
    pub fn variables(&self) -> &[Variable] { &self.variables }

    #[inline]
    pub fn probs(&self) -> &[f64] { &self.probs }

    fn dims(&self) -> Vec<usize> { self.variables.iter().map(|v| v.domain.len()).collect() }

    pub fn index_of(&self, name: &str) -> Result<usize, InfoError> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| InfoError::UnknownVariable(name.to_string()))
    }

    fn indices_of(&self, names: &[&str]) -> Result<Vec<usize>, InfoError> { names.iter().map(|n| self.index_of(n)).collect() }

    /// Iterates over `(value indices, probability)` for every table entry.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims = self.dims();
        self.probs.iter().enumerate().map(move |(i, &p)| (decode(i, &dims), p))
    }

    /// Probability of a full assignment of value indices.
    pub fn prob(&self, assignment: &[usize]) -> f64 { self.probs[encode(assignment, &self.dims())] }

    /// The joint marginal over `names`, in the given order.
    pub fn marginal(&self, names: &[&str]) -> Result<JointPmf, InfoError> {
        let idx = self.indices_of(names)?;
        let vars: Vec<Variable> = idx.iter().map(|&i| self.variables[i].clone()).collect();
        let dims: Vec<usize> = vars.iter().map(|v| v.domain.len()).collect();
        let mut probs = vec![0.0; dims.iter().product()];
        for (a, p) in self.entries() {
            let sub: Vec<usize> = idx.iter().map(|&i| a[i]).collect();
            probs[encode(&sub, &dims)] += p;
        }
        Ok(JointPmf { variables: vars, probs })
    }

    /// Joint entropy of the variables in `names`. The empty set has entropy 0.
    pub fn entropy_of(&self, names: &[&str]) -> Result<f64, InfoError> { Ok(shannon_entropy(self.marginal(names)?.probs())) }

    /// Restricts the table to assignments satisfying `event` and renormalizes.
    pub fn restrict(&self, event: impl Fn(&[usize]) -> bool) -> Result<JointPmf, InfoError> {
        let dims = self.dims();
        let mut probs: Vec<f64> = self.probs.iter().enumerate().map(|(i, &p)| if event(&decode(i, &dims)) { p } else { 0.0 }).collect();
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(InfoError::ZeroProbabilityEvent);
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        Ok(JointPmf { variables: self.variables.clone(), probs })
    }

    /// Conditions on observed `(variable index, value index)` pairs.
    pub fn condition(&self, observed: &[(usize, usize)]) -> Result<JointPmf, InfoError> {
        self.restrict(|a| observed.iter().all(|&(v, x)| a[v] == x))
    }

    /// Labels of a full assignment.
    pub fn labels(&self, assignment: &[usize]) -> Vec<&str> {
        self.variables.iter().zip(assignment).map(|(v, &k)| v.domain[k].as_str()).collect()
    }
}

fn decode(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn encode(assignment: &[usize], dims: &[usize]) -> usize { assignment.iter().zip(dims).fold(0, |acc, (&a, &d)| acc * d + a) }

fn check_disjoint(a: &[&str], b: &[&str]) -> Result<(), InfoError> {
    match a.iter().find(|n| b.contains(n)) {
        Some(n) => Err(InfoError::Overlap(n.to_string())),
        None => Ok(()),
    }
}

/// `-sum p log2 p` over a probability vector, skipping zeros.
pub fn shannon_entropy(probs: &[f64]) -> f64 { probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum::<f64>().max(0.0) }

/// Entropy of all variables of `pmf` jointly (for a one-variable table, its marginal entropy).
pub fn entropy(pmf: &JointPmf) -> f64 { shannon_entropy(pmf.probs()) }

/// `H(target | given) = H(target, given) - H(given)`.
pub fn conditional_entropy(joint: &JointPmf, target: &[&str], given: &[&str]) -> Result<f64, InfoError> {
    check_disjoint(target, given)?;
    let both: Vec<&str> = target.iter().chain(given).copied().collect();
    Ok((joint.entropy_of(&both)? - joint.entropy_of(given)?).max(0.0))
}

/// Entropy of `pmf` restricted to an event over its value labels, renormalized.
pub fn conditional_entropy_event(pmf: &JointPmf, event: impl Fn(&[&str]) -> bool) -> Result<f64, InfoError> {
    Ok(entropy(&pmf.restrict(|a| event(&pmf.labels(a)))?))
}

/// `I(X; Y) = H(X) - H(X | Y)`.
pub fn mutual_information(joint: &JointPmf, xs: &[&str], ys: &[&str]) -> Result<f64, InfoError> {
    Ok((joint.entropy_of(xs)? - conditional_entropy(joint, xs, ys)?).max(0.0))
}

/// A binary symmetric channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Crossover probability.
    pub epsilon: f64,
}

impl ChannelSpec {
    pub fn bsc(epsilon: f64) -> Result<Self, InfoError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(InfoError::InvalidChannel(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn noiseless() -> Self { Self { epsilon: 0.0 } }
}

/// `1 - H2(epsilon)` bits per channel use.
pub fn bsc_capacity(spec: &ChannelSpec) -> f64 {
    binary_entropy(spec.epsilon).map(|h| (1.0 - h).max(0.0)).unwrap_or(0.0)
}

/// Corner point of the Slepian-Wolf region where X is sent first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlepianWolfRates {
    pub h_x: f64,
    pub h_y_given_x: f64,
    pub h_xy: f64,
    pub h_y: f64,
    /// `H(Y) - H(Y|X)`: bits saved on Y by exploiting X.
    pub savings: f64,
}

pub fn slepian_wolf_rates(joint: &JointPmf, xs: &[&str], ys: &[&str]) -> Result<SlepianWolfRates, InfoError> {
    check_disjoint(xs, ys)?;
    let both: Vec<&str> = xs.iter().chain(ys).copied().collect();
    let h_x = joint.entropy_of(xs)?;
    let h_y = joint.entropy_of(ys)?;
    let h_xy = joint.entropy_of(&both)?;
    let h_y_given_x = (h_xy - h_x).max(0.0);
    Ok(SlepianWolfRates { h_x, h_y_given_x, h_xy, h_y, savings: h_y - h_y_given_x })
}
