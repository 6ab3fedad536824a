//! Two-layer session simulator: a semantic sender choosing clauses for a receiver, carried by a
//! technical layer that moves the encoded clause over a noisy channel with ARQ.
//!
//! Each round the sender picks a message, the channel layer transmits it (retransmitting on
//! checksum failure), the receiver assimilates whatever arrives intact and feeds its uncertainty
//! back over an error-free link, and a belief-holding sender reweights its hypotheses.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{decode_message, encode_message, message_length, transmit};
use crate::infotheory::{bsc_capacity, ChannelSpec, InfoError};
use crate::kb::{canonicalize, Atom, Clause, Policy, Program};
use crate::metrics::{kb_uncertainty, query_entropy, EntropyConfig, MetricsError};
use crate::selection::{
    select_expected, select_expected_for_query, select_for_kb, select_for_query_constrained, CandidatePool, SelectionError, SelectionOutcome, SenderBelief,
};

/// Default width of the Gaussian likelihood used to reweight sender hypotheses.
pub const DEFAULT_BELIEF_SIGMA: f64 = 0.05;


#[derive(Clone, Debug, PartialEq, Error)]
pub enum SessionError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("invalid session configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Channel(#[from] InfoError),
}

/// Which criterion the sender optimizes.
#[derive(Clone, Debug, PartialEq)]
pub enum SelectionMode {
    /// Minimize the receiver's average uncertainty.
    Ukb,
    /// Minimize the entropy of one query.
    Query(Atom),
    /// Minimize the entropy of one query among messages of at most `l_max` bits.
    QueryConstrained { query: Atom, l_max: f64 },
}

impl SelectionMode {
    pub fn query(&self) -> Option<&Atom> {
        match self {
            SelectionMode::Ukb => None,
            SelectionMode::Query(q) | SelectionMode::QueryConstrained { query: q, .. } => Some(q),
        }
    }
}

/// What the sender knows about the receiver's knowledge base.
#[derive(Clone, Debug, PartialEq)]
pub enum SenderModel {
    Exact(Program),
    Belief(SenderBelief),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub channel: ChannelSpec,
    /// Per-round crossover probabilities; rounds past the end reuse the last entry. Empty means
    /// `channel.epsilon` throughout.
    pub epsilon_schedule: Vec<f64>,
    pub max_retransmissions: u32,
    pub rounds: usize,
    pub mode: SelectionMode,
    pub policy: Policy,
    /// Query modes stop once the receiver's query entropy is at most this.
    pub stop_delta: f64,
    pub rng_seed: u64,
    pub belief_sigma: f64,
    /// Scales `L(m)` to model the physical-layer rate.
    pub rate_factor: f64,
    pub entropy: EntropyConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            channel: ChannelSpec::noiseless(),
            epsilon_schedule: Vec::new(),
            max_retransmissions: 0,
            rounds: 1,
            mode: SelectionMode::Ukb,
            policy: Policy::Union,
            stop_delta: 0.0,
            rng_seed: 0,
            belief_sigma: DEFAULT_BELIEF_SIGMA,
            rate_factor: 1.0,
            entropy: EntropyConfig::default(),
        }
    }
}

impl SessionConfig {
    fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidConfig(m));
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        if !(self.stop_delta >= 0.0) {
            return bad(format!("stop delta {} must be nonnegative", self.stop_delta));
        }
        if !(self.belief_sigma > 0.0) {
            return bad(format!("belief sigma {} must be positive", self.belief_sigma));
        }
        if !(self.rate_factor > 0.0) || !self.rate_factor.is_finite() {
            return bad(format!("rate factor {} must be positive and finite", self.rate_factor));
        }
        ChannelSpec::bsc(self.channel.epsilon)?;
        for &e in &self.epsilon_schedule {
            ChannelSpec::bsc(e)?;
        }
        Ok(())
    }

    /// Channel in effect for the zero-based round `r`.
    pub fn channel_at(&self, r: usize) -> ChannelSpec {
        match self.epsilon_schedule.get(r).or(self.epsilon_schedule.last()) {
            Some(&epsilon) => ChannelSpec { epsilon },
            None => self.channel,
        }
    }

    /// `L(m)` scaled by the rate factor.
    pub fn effective_length(&self, m: &Clause) -> f64 { message_length(m) as f64 * self.rate_factor }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionRound {
    /// One-based round number.
    pub round: usize,
    pub selected: String,
    pub score: f64,
    pub length_bits: u64,
    pub epsilon: f64,
    pub attempts: u32,
    pub delivered: bool,
    /// Bits put on the channel this round, over all attempts.
    pub channel_uses: u64,
    pub receiver_uncertainty: f64,
    pub receiver_query_entropy: Option<f64>,
    pub belief_weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStop {
    RoundsCompleted,
    /// The receiver's query entropy dropped to the stop threshold.
    TargetReached,
    /// No candidate is predicted to lower the receiver's uncertainty.
    NoImprovement,
    PoolExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionTotals {
    pub bits_on_air: u64,
    pub delivered: usize,
    /// `sum L(m) / C(epsilon)` over the rounds; `None` when some round had zero capacity.
    pub capacity_cost: Option<f64>,
    pub unbounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionTrace {
    pub initial_uncertainty: f64,
    pub initial_query_entropy: Option<f64>,
    pub rounds: Vec<SessionRound>,
    pub stop_reason: SessionStop,
    pub totals: SessionTotals,
    /// Final receiver knowledge base in canonical text.
    pub receiver_kb: String,
}

/// Column names of [`SessionTrace::to_csv`].
pub const CSV_HEADER: &str =
    "round,selected,score,length_bits,epsilon,attempts,delivered,channel_uses,receiver_uncertainty,receiver_query_entropy,belief_weights";

impl SessionTrace {
    /// One row per round. Floats use the shortest round-trip form, so equal traces give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rounds {
            let weights: Vec<String> = r.belief_weights.iter().map(f64::to_string).collect();
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{},{},{},{},{},{},{}",
                r.round,
                r.selected.replace('"', "\"\""),
                r.score,
                r.length_bits,
                r.epsilon,
                r.attempts,
                r.delivered,
                r.channel_uses,
                r.receiver_uncertainty,
                r.receiver_query_entropy.map(|h| h.to_string()).unwrap_or_default(),
                weights.join(";"),
            );
        }
        out
    }
}

/// `w_i * exp(-(observed - predicted_i)^2 / (2 sigma^2))`, renormalized. If every likelihood
/// underflows the weights are left unchanged.
pub fn reweight(weights: &[f64], predicted: &[f64], observed: f64, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = weights.iter().zip(predicted).map(|(w, p)| w * (-(observed - p).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.iter().map(|r| r / total).collect()
    } else {
        weights.to_vec()
    }
}

fn choose(sender: &SenderModel, pool: &CandidatePool, cfg: &SessionConfig) -> Result<SelectionOutcome, SelectionError> {
    let len = |m: &Clause| cfg.effective_length(m);
    let (q, l_max) = match &cfg.mode {
        SelectionMode::Ukb => {
            return match sender {
                SenderModel::Exact(k) => select_for_kb(k, pool, cfg.policy, &cfg.entropy),
                SenderModel::Belief(b) => select_expected(b, pool, cfg.policy, &cfg.entropy),
            };
        },
        SelectionMode::Query(q) => (q, f64::INFINITY),
        SelectionMode::QueryConstrained { query, l_max } => (query, *l_max),
    };
    match sender {
        SenderModel::Exact(k) => select_for_query_constrained(k, pool, q, l_max, &len, cfg.policy, &cfg.entropy),
        SenderModel::Belief(b) => select_expected_for_query(b, pool, q, l_max, &len, cfg.policy, &cfg.entropy),
    }
}

/// Whether the sender predicts that `message` lowers the receiver's average uncertainty. A belief
/// sender expects improvement if any hypothesis with positive weight improves.
fn predicts_improvement(sender: &SenderModel, message: &Clause, policy: Policy, cfg: &EntropyConfig) -> Result<bool, MetricsError> {
    let improves = |k: &Program| Ok::<_, MetricsError>(kb_uncertainty(&k.assimilate(message, policy), cfg)?.value < kb_uncertainty(k, cfg)?.value);
    match sender {
        SenderModel::Exact(k) => improves(k),
        SenderModel::Belief(b) => {
            for (a, w) in b.hypotheses() {
                if *w > 0.0 && improves(a)? {
                    return Ok(true);
                }
            }
            Ok(false)
        },
    }
}

/// Runs a session. Delivered messages leave the sender's pool; undelivered ones stay available.
pub fn run_session(pool: &CandidatePool, sender: &SenderModel, receiver: &Program, cfg: &SessionConfig) -> Result<SessionTrace, SessionError> {
    if pool.is_empty() {
        return Err(SessionError::EmptyPool);
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut pool = pool.clone();
    let mut sender = sender.clone();
    let mut receiver = receiver.clone();
    let query = cfg.mode.query();
    let ecfg = &cfg.entropy;

    let initial_uncertainty = kb_uncertainty(&receiver, ecfg)?.value;
    let initial_query_entropy = query.map(|q| query_entropy(&receiver, q, ecfg)).transpose()?;
    let mut query_h = initial_query_entropy;

    let mut rounds = Vec::new();
    let mut capacity_cost = 0.0;
    let mut unbounded = false;
    let stop_reason = loop {
        if query_h.is_some_and(|h| h <= cfg.stop_delta) {
            break SessionStop::TargetReached;
        }
        if rounds.len() >= cfg.rounds {
            break SessionStop::RoundsCompleted;
        }
        if pool.is_empty() {
            break SessionStop::PoolExhausted;
        }
        let outcome = choose(&sender, &pool, cfg)?;
        if matches!(cfg.mode, SelectionMode::Ukb) && !predicts_improvement(&sender, &outcome.chosen, cfg.policy, ecfg)? {
            break SessionStop::NoImprovement;
        }
        let message = outcome.chosen;
        let r = rounds.len();
        let channel = cfg.channel_at(r);

        let wire = encode_message(&message);
        let length_bits = wire.length_bits();
        let mut attempts = 0;
        let mut received = None;
        while attempts <= cfg.max_retransmissions {
            attempts += 1;
            let t = transmit(&wire, &channel, &mut rng);
            if t.crc_ok {
                if let Ok(clause) = decode_message(&t.received) {
                    received = Some(clause);
                    break;
                }
            }
        }
        let delivered = received.is_some();
        let capacity = bsc_capacity(&channel);
        if capacity > 0.0 {
            capacity_cost += cfg.effective_length(&message) / capacity;
        } else {
            unbounded = true;
        }

        if let Some(clause) = &received {
            receiver = receiver.assimilate(clause, cfg.policy);
            pool.remove(&message);
        }
        // Feedback from the receiver.
        let observed_u = kb_uncertainty(&receiver, ecfg)?.value;
        query_h = query.map(|q| query_entropy(&receiver, q, ecfg)).transpose()?;

        sender = match sender {
            SenderModel::Exact(k) => SenderModel::Exact(if delivered { k.assimilate(&message, cfg.policy) } else { k }),
            SenderModel::Belief(b) => {
                let next = if delivered { b.map_programs(|a| a.assimilate(&message, cfg.policy)) } else { b };
                let predicted = next.hypotheses().iter().map(|(a, _)| Ok(kb_uncertainty(a, ecfg)?.value)).collect::<Result<Vec<_>, MetricsError>>()?;
                SenderModel::Belief(next.reweighted(&reweight(&next.weights(), &predicted, observed_u, cfg.belief_sigma))?)
            },
        };
        let belief_weights = match &sender {
            SenderModel::Exact(_) => Vec::new(),
            SenderModel::Belief(b) => b.weights(),
        };

        rounds.push(SessionRound {
            round: r + 1,
            selected: canonicalize(&message),
            score: outcome.score,
            length_bits,
            epsilon: channel.epsilon,
            attempts,
            delivered,
            channel_uses: u64::from(attempts) * length_bits,
            receiver_uncertainty: observed_u,
            receiver_query_entropy: query_h,
            belief_weights,
        });
    };

    let totals = SessionTotals {
        bits_on_air: rounds.iter().map(|r| r.channel_uses).sum(),
        delivered: rounds.iter().filter(|r| r.delivered).count(),
        capacity_cost: (!unbounded).then_some(capacity_cost),
        unbounded,
    };
    Ok(SessionTrace { initial_uncertainty, initial_query_entropy, rounds, stop_reason, totals, receiver_kb: receiver.to_text() })
}
