//! Input files: knowledge bases in the clause format, and JSON documents for joints, beliefs and
//! simulation scenarios. Relative paths inside a JSON document resolve against its directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use semcom::das::TargetTable;
use semcom::infotheory::{JointPmf, Variable};
use semcom::kb::{Clause, Policy, Program};
use semcom::selection::{CandidatePool, SenderBelief};

use crate::Failure;

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Domain(format!("cannot read {}: {e}", path.display())))
}

pub fn load_program(path: &Path) -> Result<Program, Failure> {
    read_text(path)?.parse().map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

pub fn parse_message(text: &str) -> Result<Clause, Failure> {
    text.parse().map_err(|e| Failure::Domain(format!("message `{text}`: {e}")))
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf { path.parent().map(Path::to_path_buf).unwrap_or_default() }

/// A domain value or assignment entry; JSON numbers and strings are both accepted.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl Label {
    fn text(&self) -> String {
        match self {
            Label::Int(i) => i.to_string(),
            Label::Str(s) => s.clone(),
        }
    }
}

fn texts(labels: &[Label]) -> Vec<String> { labels.iter().map(Label::text).collect() }

/// Either an explicit `domain` list or an inclusive integer `range` `[lo, hi]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    #[serde(default)]
    pub domain: Option<Vec<Label>>,
    #[serde(default)]
    pub range: Option<(i64, i64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub values: Vec<Label>,
    pub p: f64,
}

/// Exactly one of `probs` (dense, row-major, last variable fastest), `rows` (sparse, missing rows
/// are 0) or `"uniform": true`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    #[serde(default)]
    pub rows: Option<Vec<RowSpec>>,
    #[serde(default)]
    pub uniform: bool,
}

impl JointSpec {
    pub fn build(self) -> Result<JointPmf, Failure> {
        let mut vars = Vec::with_capacity(self.variables.len());
        for v in self.variables {
            let domain = match (v.domain, v.range) {
                (Some(d), None) => texts(&d),
                (None, Some((lo, hi))) if lo <= hi => (lo..=hi).map(|i| i.to_string()).collect(),
                (None, Some((lo, hi))) => return Err(Failure::Domain(format!("variable {}: empty range [{lo}, {hi}]", v.name))),
                _ => return Err(Failure::Domain(format!("variable {}: give exactly one of `domain` or `range`", v.name))),
            };
            vars.push(Variable::new(v.name, domain));
        }
        let joint = match (self.probs, self.rows, self.uniform) {
            (Some(p), None, false) => JointPmf::new(vars, p),
            (None, Some(rows), false) => JointPmf::from_rows(vars, rows.into_iter().map(|r| (texts(&r.values), r.p))),
            (None, None, true) => JointPmf::uniform(vars),
            _ => return Err(Failure::Domain("joint: give exactly one of `probs`, `rows` or `\"uniform\": true`".into())),
        };
        joint.map_err(|e| Failure::Domain(format!("joint: {e}")))
    }
}

pub fn load_joint(path: &Path) -> Result<JointPmf, Failure> { load_json::<JointSpec>(path)?.build() }

/// A knowledge base given as a path to a clause file or inline as `{"text": "..."}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum KbRef {
    Path(PathBuf),
    Inline { text: String },
}

impl KbRef {
    fn load(&self, dir: &Path) -> Result<Program, Failure> {
        match self {
            KbRef::Path(p) => load_program(&dir.join(p)),
            KbRef::Inline { text } => text.parse().map_err(|e| Failure::Domain(format!("inline knowledge base: {e}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub kb: KbRef,
    pub weight: f64,
}

/// `{"hypotheses": [{"kb": ..., "weight": w}, ...], "normalize": false}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefSpec {
    pub hypotheses: Vec<HypothesisSpec>,
    #[serde(default)]
    pub normalize: bool,
}

fn build_belief(hypotheses: &[HypothesisSpec], normalize: bool, dir: &Path) -> Result<SenderBelief, Failure> {
    let hyps = hypotheses.iter().map(|h| Ok((h.kb.load(dir)?, h.weight))).collect::<Result<Vec<_>, Failure>>()?;
    let belief = if normalize { SenderBelief::normalized(hyps) } else { SenderBelief::new(hyps) };
    belief.map_err(|e| Failure::Domain(format!("belief: {e}")))
}

pub fn load_belief(path: &Path) -> Result<SenderBelief, Failure> {
    let spec: BeliefSpec = load_json(path)?;
    build_belief(&spec.hypotheses, spec.normalize, &base_dir(path))
}

pub fn load_pool(path: &Path) -> Result<CandidatePool, Failure> { Ok(CandidatePool::from(load_program(path)?)) }

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SenderSpec {
    Exact(KbRef),
    Belief {
        hypotheses: Vec<HypothesisSpec>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    #[default]
    Ukb,
    Query { query: String },
    QueryConstrained { query: String, l_max: f64 },
}

fn one() -> usize { 1 }

/// Session scenario. The sender defaults to knowing the receiver's knowledge base exactly.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionScenario {
    pub pool: KbRef,
    pub receiver: KbRef,
    #[serde(default)]
    pub sender: Option<SenderSpec>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default)]
    pub max_retransmissions: u32,
    #[serde(default = "one")]
    pub rounds: usize,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub stop_delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub belief_sigma: Option<f64>,
    #[serde(default)]
    pub rate_factor: Option<f64>,
}

pub struct LoadedSession {
    pub spec: SessionScenario,
    pub pool: CandidatePool,
    pub receiver: Program,
    pub sender: semcom::session::SenderModel,
}

pub fn load_session(path: &Path) -> Result<LoadedSession, Failure> {
    use semcom::session::SenderModel;
    let spec: SessionScenario = load_json(path)?;
    let dir = base_dir(path);
    let pool = CandidatePool::from(spec.pool.load(&dir)?);
    let receiver = spec.receiver.load(&dir)?;
    let sender = match &spec.sender {
        None => SenderModel::Exact(receiver.clone()),
        Some(SenderSpec::Exact(kb)) => SenderModel::Exact(kb.load(&dir)?),
        Some(SenderSpec::Belief { hypotheses, normalize }) => SenderModel::Belief(build_belief(hypotheses, *normalize, &dir)?),
    };
    Ok(LoadedSession { spec, pool, receiver, sender })
}

/// A joint given as a path to a joint document or inline.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum JointRef {
    Path(PathBuf),
    Inline(JointSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRowSpec {
    pub values: Vec<Label>,
    pub y: Label,
}

/// Target `Y = phi(X)`: a built-in function of the (integer) source values, or an explicit table.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Function { function: TargetFunction },
    Rows { rows: Vec<TargetRowSpec> },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFunction {
    Xor,
    Sum,
    Max,
    Min,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DasScenario {
    pub joint: JointRef,
    pub realization: Vec<Label>,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub target_entropy: f64,
}

pub struct LoadedDas {
    pub joint: JointPmf,
    pub target: Option<TargetTable>,
    pub realization: Vec<usize>,
    pub max_rounds: usize,
    pub target_entropy: f64,
}

pub fn load_das(path: &Path) -> Result<LoadedDas, Failure> {
    let spec: DasScenario = load_json(path)?;
    let dir = base_dir(path);
    let joint = match spec.joint {
        JointRef::Path(p) => load_joint(&dir.join(p))?,
        JointRef::Inline(j) => j.build()?,
    };
    let vars = joint.variables();
    if spec.realization.len() != vars.len() {
        return Err(Failure::Domain(format!("realization has {} values for {} sources", spec.realization.len(), vars.len())));
    }
    let realization = spec
        .realization
        .iter()
        .zip(vars)
        .map(|(l, v)| v.value_index(&l.text()).ok_or_else(|| Failure::Domain(format!("value '{}' not in domain of {}", l.text(), v.name))))
        .collect::<Result<Vec<_>, _>>()?;
    let target = match spec.target {
        None => None,
        Some(TargetSpec::Rows { rows }) => Some(
            TargetTable::from_rows(&joint, rows.into_iter().map(|r| (texts(&r.values), r.y.text())))
                .map_err(|e| Failure::Domain(format!("target: {e}")))?,
        ),
        Some(TargetSpec::Function { function }) => {
            let numeric = vars.iter().all(|v| v.domain.iter().all(|d| d.parse::<i64>().is_ok()));
            if !numeric {
                return Err(Failure::Domain("target functions need integer source values; give `rows` instead".into()));
            }
            Some(TargetTable::from_fn(&joint, |labels| {
                let xs = labels.iter().map(|l| l.parse::<i64>().expect("checked integer"));
                match function {
                    TargetFunction::Xor => xs.fold(0, |a, x| a ^ x),
                    TargetFunction::Sum => xs.sum(),
                    TargetFunction::Max => xs.max().unwrap_or(0),
                    TargetFunction::Min => xs.min().unwrap_or(0),
                }
                .to_string()
            }))
        }
    };
    let max_rounds = spec.max_rounds.unwrap_or(vars.len());
    Ok(LoadedDas { joint, target, realization, max_rounds, target_entropy: spec.target_entropy })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: usize,
    pub message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticScenario {
    pub kb: KbRef,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub min_improvement: f64,
    #[serde(default)]
    pub policy: Policy,
}

pub struct LoadedSemantic {
    pub kb: Program,
    pub nodes: Vec<(usize, Clause)>,
    pub max_rounds: usize,
    pub min_improvement: f64,
    pub policy: Policy,
}

pub fn load_semantic(path: &Path) -> Result<LoadedSemantic, Failure> {
    let spec: SemanticScenario = load_json(path)?;
    let kb = spec.kb.load(&base_dir(path))?;
    let nodes = spec.nodes.iter().map(|n| Ok((n.id, parse_message(&n.message)?))).collect::<Result<Vec<_>, Failure>>()?;
    let max_rounds = spec.max_rounds.unwrap_or(nodes.len());
    Ok(LoadedSemantic { kb, nodes, max_rounds, min_improvement: spec.min_improvement, policy: spec.policy })
}
