use std::fmt::Display;
use std::path::Path;

use serde_json::{json, Value};
use semcom::channel::message_length;
use semcom::das::{run_das, run_semantic_das, DasState, DasStop, DasTrace, SemanticStop};
use semcom::inference::query_program;
use semcom::infotheory::{
    bsc_capacity, conditional_entropy, conditional_entropy_event, mutual_information, slepian_wolf_rates, ChannelSpec, JointPmf,
};
use semcom::kb::{parse_atom, Atom, Clause, Policy};
use semcom::metrics::{kb_uncertainty, EntropyConfig};
use semcom::security::{check_security_queries, SecurityParams};
use semcom::selection::{
    select_expected, select_expected_for_query, select_for_kb, select_for_query_constrained, SelectionOutcome,
};
use semcom::session::{run_session, SelectionMode, SessionConfig, SessionTrace, DEFAULT_BELIEF_SIGMA};

use crate::input::{self, ModeSpec};
use crate::render::{csv, sig, sig_opt, table, Rendered};
use crate::{Failure, InfoArgs, InfoOp, SimKind};

trait OrDomain<T> {
    fn domain(self) -> Result<T, Failure>;
}

impl<T, E: Display> OrDomain<T> for Result<T, E> {
    fn domain(self) -> Result<T, Failure> { self.map_err(|e| Failure::Domain(e.to_string())) }
}

fn atom(text: &str) -> Result<Atom, Failure> {
    let a = parse_atom(text).map_err(|e| Failure::Domain(format!("query `{text}`: {e}")))?;
    if !a.is_ground() {
        return Err(Failure::Domain(format!("query `{text}` must be ground")));
    }
    Ok(a)
}

fn to_value(x: &impl serde::Serialize) -> Value { serde_json::to_value(x).expect("values serialize") }

pub fn query(kb: &Path, q: &str, cfg: &EntropyConfig) -> Result<Rendered, Failure> {
    let kb = input::load_program(kb)?;
    let q = atom(q)?;
    let r = query_program(&kb, &q, &cfg.inference()).domain()?;
    let human = format!(
        "p[{q}] = {}\nmatched: {}  switches: {}  worlds: {}\n",
        sig(r.prob),
        if r.matched { "yes" } else { "no (default probability)" },
        r.switches,
        r.worlds_enumerated
    );
    let row = vec![q.to_string(), r.prob.to_string(), r.matched.to_string(), r.switches.to_string(), r.worlds_enumerated.to_string()];
    Ok(Rendered {
        human,
        json: json!({ "query": q.to_string(), "prob": r.prob, "matched": r.matched, "switches": r.switches, "worlds_enumerated": r.worlds_enumerated }),
        csv: csv(&["query", "prob", "matched", "switches", "worlds_enumerated"], &[row]),
    })
}

pub fn measure(kb: &Path, content: Option<&Path>, policy: Policy, cfg: &EntropyConfig) -> Result<Rendered, Failure> {
    let kb = input::load_program(kb)?;
    let report = kb_uncertainty(&kb, cfg).domain()?;
    let Some(content) = content else {
        let rows: Vec<Vec<String>> = report.per_query.iter().map(|q| vec![q.query.clone(), sig(q.prob), sig(q.entropy)]).collect();
        let mut human = table(&["query", "p", "H"], &rows);
        human += &format!("U = {} over {} heads{}\n", sig(report.value), report.head_count, if report.empty { " (empty knowledge base)" } else { "" });
        let mut full: Vec<Vec<String>> =
            report.per_query.iter().map(|q| vec![q.query.clone(), q.prob.to_string(), q.entropy.to_string()]).collect();
        full.push(vec!["U_KB".into(), String::new(), report.value.to_string()]);
        return Ok(Rendered { human, json: to_value(&report), csv: csv(&["query", "prob", "entropy"], &full) });
    };
    let messages = input::load_program(content)?;
    let mut entries = Vec::new();
    for m in messages.iter() {
        let after = kb_uncertainty(&kb.assimilate(m, policy), cfg).domain()?.value;
        entries.push((m.to_string(), after, after - report.value));
    }
    let rows: Vec<Vec<String>> = entries.iter().map(|(m, a, s)| vec![m.clone(), sig(*a), sig(*s)]).collect();
    let human = format!("U = {} ({policy})\n", sig(report.value)) + &table(&["message", "U after", "S"], &rows);
    let full: Vec<Vec<String>> = entries.iter().map(|(m, a, s)| vec![m.clone(), a.to_string(), s.to_string()]).collect();
    let json = json!({
        "uncertainty": report.value,
        "policy": policy,
        "candidates": entries.iter().map(|(m, a, s)| json!({ "message": m, "uncertainty_after": a, "content": s })).collect::<Vec<_>>(),
    });
    Ok(Rendered { human, json, csv: csv(&["message", "uncertainty_after", "content"], &full) })
}

pub struct SelectArgs<'a> {
    pub kb: Option<&'a Path>,
    pub belief: Option<&'a Path>,
    pub pool: &'a Path,
    pub query: Option<&'a str>,
    pub lmax: Option<f64>,
    pub policy: Policy,
}

pub fn select(args: SelectArgs<'_>, cfg: &EntropyConfig) -> Result<Rendered, Failure> {
    let pool = input::load_pool(args.pool)?;
    let bits = |m: &Clause| message_length(m) as f64;
    let l_max = args.lmax.unwrap_or(f64::INFINITY);
    let query = args.query.map(atom).transpose()?;
    let (criterion, out): (&str, SelectionOutcome) = match (args.kb, args.belief, &query) {
        (Some(kb), None, None) => ("ukb", select_for_kb(&input::load_program(kb)?, &pool, args.policy, cfg).domain()?),
        (Some(kb), None, Some(q)) => {
            ("query", select_for_query_constrained(&input::load_program(kb)?, &pool, q, l_max, &bits, args.policy, cfg).domain()?)
        }
        (None, Some(b), None) => ("expected_ukb", select_expected(&input::load_belief(b)?, &pool, args.policy, cfg).domain()?),
        (None, Some(b), Some(q)) => {
            ("expected_query", select_expected_for_query(&input::load_belief(b)?, &pool, q, l_max, &bits, args.policy, cfg).domain()?)
        }
        _ => return Err(Failure::Usage("give exactly one of --kb or --belief".into())),
    };
    let ranked: Vec<(usize, &str, f64, u64)> =
        out.ranking.iter().enumerate().map(|(i, r)| (i + 1, r.message.as_str(), r.score, message_length(&r.clause))).collect();
    let rows: Vec<Vec<String>> = ranked.iter().map(|(i, m, s, b)| vec![i.to_string(), sig(*s), b.to_string(), m.to_string()]).collect();
    let mut human = format!("chosen: {}  score {}  ({criterion}, {} of {} feasible)\n", out.chosen, sig(out.score), out.feasible_count, pool.len());
    human += &table(&["rank", "score", "bits", "message"], &rows);
    let full: Vec<Vec<String>> =
        ranked.iter().map(|(i, m, s, b)| vec![i.to_string(), m.to_string(), s.to_string(), b.to_string()]).collect();
    let json = json!({
        "criterion": criterion,
        "query": query.map(|q| q.to_string()),
        "l_max": args.lmax,
        "chosen": out.chosen.to_string(),
        "score": out.score,
        "feasible_count": out.feasible_count,
        "ranking": ranked.iter().map(|(_, m, s, b)| json!({ "message": m, "score": s, "length_bits": b })).collect::<Vec<_>>(),
    });
    Ok(Rendered { human, json, csv: csv(&["rank", "message", "score", "length_bits"], &full) })
}

pub fn secure(eve: &Path, bob: &Path, message: &str, queries: &[String], params: &SecurityParams, cfg: &EntropyConfig) -> Result<Rendered, Failure> {
    let eve = input::load_program(eve)?;
    let bob = input::load_program(bob)?;
    let m = input::parse_message(message)?;
    let qs = queries.iter().map(|q| atom(q)).collect::<Result<Vec<_>, _>>()?;
    let reports = check_security_queries(&eve, &bob, &m, &qs, params, cfg).domain()?;
    let yes = |b: bool| if b { "yes" } else { "no" }.to_string();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.query.clone(),
                format!("{} -> {}", sig(r.eve_entropy_before), sig(r.eve_entropy_after)),
                format!("{} -> {}", sig(r.bob_entropy_before), sig(r.bob_entropy_after)),
                yes(r.opaque),
                yes(r.useful),
                yes(r.secure),
            ]
        })
        .collect();
    let human = format!("message: {m}\n") + &table(&["query", "H eve", "H bob", "opaque", "useful", "secure"], &rows);
    let header = ["query", "eve_entropy_before", "eve_entropy_after", "bob_entropy_before", "bob_entropy_after", "opaque", "useful", "secure"];
    let full: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.query.clone(),
                r.eve_entropy_before.to_string(),
                r.eve_entropy_after.to_string(),
                r.bob_entropy_before.to_string(),
                r.bob_entropy_after.to_string(),
                r.opaque.to_string(),
                r.useful.to_string(),
                r.secure.to_string(),
            ]
        })
        .collect();
    let json = json!({ "message": m.to_string(), "params": params, "reports": reports });
    Ok(Rendered { human, json, csv: csv(&header, &full) })
}

/// The simulation's summary plus the per-round trace as CSV.
pub struct Simulation {
    pub summary: Rendered,
    pub trace_csv: String,
}

pub fn simulate(scenario: &Path, kind: SimKind, seed: Option<u64>, cfg: &EntropyConfig) -> Result<Simulation, Failure> {
    match kind {
        SimKind::Session => simulate_session(scenario, seed, cfg),
        SimKind::Das => {
            let s = input::load_das(scenario)?;
            let names: Vec<String> = s.joint.variables().iter().map(|v| v.name.clone()).collect();
            let state = DasState::new(s.joint, s.target);
            let stop = DasStop { max_rounds: s.max_rounds, target_entropy: s.target_entropy };
            let trace = run_das(&state, &stop, &s.realization).domain()?;
            Ok(das_report("das", &trace, |i| names[i].clone(), None))
        }
        SimKind::SemanticDas => {
            let s = input::load_semantic(scenario)?;
            let stop = SemanticStop { max_rounds: s.max_rounds, min_improvement: s.min_improvement };
            let out = run_semantic_das(&s.kb, &s.nodes, &stop, s.policy, cfg).domain()?;
            let message = |i: usize| s.nodes.iter().find(|(n, _)| *n == i).map(|(_, m)| m.to_string()).unwrap_or_default();
            Ok(das_report("semantic-das", &out.trace, |i| format!("{i}: {}", message(i)), Some(out.kb.to_text())))
        }
    }
}

fn simulate_session(scenario: &Path, seed: Option<u64>, cfg: &EntropyConfig) -> Result<Simulation, Failure> {
    let s = input::load_session(scenario)?;
    let spec = &s.spec;
    let mode = match &spec.mode {
        ModeSpec::Ukb => SelectionMode::Ukb,
        ModeSpec::Query { query } => SelectionMode::Query(atom(query)?),
        ModeSpec::QueryConstrained { query, l_max } => SelectionMode::QueryConstrained { query: atom(query)?, l_max: *l_max },
    };
    let config = SessionConfig {
        channel: ChannelSpec::bsc(spec.epsilon).domain()?,
        epsilon_schedule: spec.epsilon_schedule.clone(),
        max_retransmissions: spec.max_retransmissions,
        rounds: spec.rounds,
        mode,
        policy: spec.policy,
        stop_delta: spec.stop_delta,
        rng_seed: seed.unwrap_or(spec.seed),
        belief_sigma: spec.belief_sigma.unwrap_or(DEFAULT_BELIEF_SIGMA),
        rate_factor: spec.rate_factor.unwrap_or(1.0),
        entropy: *cfg,
    };
    let trace = run_session(&s.pool, &s.sender, &s.receiver, &config).domain()?;
    Ok(Simulation { summary: session_summary(&trace, config.rng_seed), trace_csv: trace.to_csv() })
}

fn session_summary(t: &SessionTrace, seed: u64) -> Rendered {
    let last = t.rounds.last();
    let final_u = last.map_or(t.initial_uncertainty, |r| r.receiver_uncertainty);
    let final_q = last.map_or(t.initial_query_entropy, |r| r.receiver_query_entropy);
    let rows: Vec<Vec<String>> = t
        .rounds
        .iter()
        .map(|r| {
            vec![
                r.round.to_string(),
                r.selected.clone(),
                r.length_bits.to_string(),
                r.attempts.to_string(),
                if r.delivered { "yes" } else { "no" }.into(),
                sig(r.receiver_uncertainty),
                sig_opt(r.receiver_query_entropy),
            ]
        })
        .collect();
    let mut human = table(&["round", "message", "bits", "attempts", "delivered", "U", "H(q)"], &rows);
    human += &format!(
        "U {} -> {}; stopped: {:?}; {} delivered, {} bits on air, capacity cost {}\n",
        sig(t.initial_uncertainty),
        sig(final_u),
        t.stop_reason,
        t.totals.delivered,
        t.totals.bits_on_air,
        t.totals.capacity_cost.map_or_else(|| "unbounded".into(), sig)
    );
    let json = json!({
        "kind": "session",
        "seed": seed,
        "initial_uncertainty": t.initial_uncertainty,
        "final_uncertainty": final_u,
        "initial_query_entropy": t.initial_query_entropy,
        "final_query_entropy": final_q,
        "rounds": t.rounds.len(),
        "stop_reason": t.stop_reason,
        "totals": t.totals,
        "receiver_kb": t.receiver_kb,
    });
    let csv_row = vec![
        t.rounds.len().to_string(),
        t.initial_uncertainty.to_string(),
        final_u.to_string(),
        to_value(&t.stop_reason).as_str().unwrap_or_default().to_string(),
        t.totals.delivered.to_string(),
        t.totals.bits_on_air.to_string(),
        t.totals.capacity_cost.map_or_else(String::new, |c| c.to_string()),
    ];
    let header = ["rounds", "initial_uncertainty", "final_uncertainty", "stop_reason", "delivered", "bits_on_air", "capacity_cost"];
    Rendered { human, json, csv: csv(&header, &[csv_row]) }
}

fn das_report(kind: &str, t: &DasTrace, label: impl Fn(usize) -> String, kb: Option<String>) -> Simulation {
    let scores = |r: &semcom::das::DasRound| r.scores.iter().map(|(i, s)| format!("{i}:{s}")).collect::<Vec<_>>().join(";");
    let trace_rows: Vec<Vec<String>> = t
        .rounds
        .iter()
        .enumerate()
        .map(|(k, r)| vec![(k + 1).to_string(), r.chosen.to_string(), label(r.chosen), r.value_after.to_string(), scores(r)])
        .collect();
    let trace_csv = csv(&["round", "chosen", "label", "value_after", "scores"], &trace_rows);
    let rows: Vec<Vec<String>> =
        t.rounds.iter().enumerate().map(|(k, r)| vec![(k + 1).to_string(), label(r.chosen), sig(r.value_after)]).collect();
    let mut human = table(&["round", "chosen", "uncertainty after"], &rows);
    human += &format!("uncertainty {} -> {}; stopped: {:?}\n", sig(t.initial_value), sig(t.final_value()), t.stop_reason);
    let order: Vec<String> = t.order().into_iter().map(&label).collect();
    let mut json = json!({
        "kind": kind,
        "initial_value": t.initial_value,
        "final_value": t.final_value(),
        "order": t.order(),
        "labels": order,
        "stop_reason": t.stop_reason,
        "rounds": t.rounds,
    });
    if let Some(kb) = kb {
        json["kb"] = Value::String(kb);
    }
    let summary_csv = csv(
        &["rounds", "initial_value", "final_value", "stop_reason", "order"],
        &[vec![
            t.rounds.len().to_string(),
            t.initial_value.to_string(),
            t.final_value().to_string(),
            to_value(&t.stop_reason).as_str().unwrap_or_default().to_string(),
            t.order().iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        ]],
    );
    Simulation { summary: Rendered { human, json, csv: summary_csv }, trace_csv }
}

/// One `NAME OP VALUE` condition of an event.
struct Condition {
    var: usize,
    op: String,
    value: String,
}

fn parse_event(joint: &JointPmf, preds: &[String]) -> Result<Vec<Condition>, Failure> {
    const OPS: [&str; 8] = ["<=", "=<", ">=", "==", "!=", "<", ">", "="];
    let mut out = Vec::new();
    for part in preds.iter().flat_map(|p| p.split("&&")).map(str::trim).filter(|p| !p.is_empty()) {
        let (pos, op) = OPS
            .iter()
            .filter_map(|op| part.find(op).map(|i| (i, *op)))
            .min_by_key(|(i, op)| (*i, std::cmp::Reverse(op.len())))
            .ok_or_else(|| Failure::Usage(format!("condition `{part}` has no comparison operator")))?;
        let name = part[..pos].trim();
        let value = part[pos + op.len()..].trim().to_string();
        let var = joint.index_of(name).map_err(|e| Failure::Usage(format!("condition `{part}`: {e}")))?;
        let op = match op {
            "=<" => "<=",
            "=" => "==",
            o => o,
        }
        .to_string();
        if !matches!(op.as_str(), "==" | "!=") {
            let numeric = value.parse::<f64>().is_ok() && joint.variables()[var].domain.iter().all(|d| d.parse::<f64>().is_ok());
            if !numeric {
                return Err(Failure::Usage(format!("condition `{part}`: ordering needs numeric values")));
            }
        }
        out.push(Condition { var, op, value });
    }
    if out.is_empty() {
        return Err(Failure::Usage("--pred is required for cond-event".into()));
    }
    Ok(out)
}

fn holds(c: &Condition, label: &str) -> bool {
    match c.op.as_str() {
        "==" => label == c.value,
        "!=" => label != c.value,
        op => {
            let (x, y) = (label.parse::<f64>().expect("checked numeric"), c.value.parse::<f64>().expect("checked numeric"));
            match op {
                "<=" => x <= y,
                "<" => x < y,
                ">=" => x >= y,
                _ => x > y,
            }
        }
    }
}

fn names_or_all<'a>(joint: &'a JointPmf, given: &'a [String]) -> Vec<&'a str> {
    if given.is_empty() {
        joint.variables().iter().map(|v| v.name.as_str()).collect()
    } else {
        given.iter().map(String::as_str).collect()
    }
}

fn required<'a>(v: &'a [String], flag: &str) -> Result<Vec<&'a str>, Failure> {
    if v.is_empty() {
        return Err(Failure::Usage(format!("{flag} is required for this operation")));
    }
    Ok(v.iter().map(String::as_str).collect())
}

fn bits_result(label: String, value: f64, extra: Value) -> Rendered {
    let mut json = json!({ "quantity": label, "bits": value });
    if let (Value::Object(o), Value::Object(e)) = (&mut json, extra) {
        o.extend(e);
    }
    Rendered { human: format!("{label} = {} bits\n", sig(value)), json, csv: csv(&["quantity", "bits"], &[vec![label, value.to_string()]]) }
}

pub fn info(args: &InfoArgs) -> Result<Rendered, Failure> {
    if args.op == InfoOp::Capacity {
        let e = args.epsilon.ok_or_else(|| Failure::Usage("--epsilon is required for capacity".into()))?;
        let c = bsc_capacity(&ChannelSpec::bsc(e).domain()?);
        return Ok(bits_result(format!("C(BSC {e})"), c, json!({ "epsilon": e })));
    }
    let path = args.joint.as_deref().ok_or_else(|| Failure::Usage("a joint file is required for this operation".into()))?;
    let joint = input::load_joint(path)?;
    if args.chain_rule && args.op != InfoOp::Entropy {
        return Err(Failure::Usage("--chain-rule applies to --op entropy".into()));
    }
    match args.op {
        InfoOp::Entropy => {
            let vars = names_or_all(&joint, &args.vars);
            let h = joint.entropy_of(&vars).domain()?;
            let label = format!("H({})", vars.join(","));
            if !args.chain_rule {
                return Ok(bits_result(label, h, json!({})));
            }
            let terms: Vec<f64> = (0..vars.len()).map(|i| conditional_entropy(&joint, &vars[i..=i], &vars[..i])).collect::<Result<_, _>>().domain()?;
            let sum: f64 = terms.iter().sum();
            let human = format!(
                "{label} = {} bits\nchain rule: {} = {} bits (difference {:.3e})\n",
                sig(h),
                (0..vars.len()).map(|i| if i == 0 { format!("H({})", vars[0]) } else { format!("H({}|{})", vars[i], vars[..i].join(",")) }).collect::<Vec<_>>().join(" + "),
                sig(sum),
                (h - sum).abs()
            );
            let json = json!({ "quantity": label, "bits": h, "chain_rule_terms": terms, "chain_rule_sum": sum });
            Ok(Rendered { human, json, csv: csv(&["quantity", "bits", "chain_rule_sum"], &[vec![label, h.to_string(), sum.to_string()]]) })
        }
        InfoOp::Cond => {
            let (t, g) = (required(&args.target, "--target")?, required(&args.given, "--given")?);
            let h = conditional_entropy(&joint, &t, &g).domain()?;
            Ok(bits_result(format!("H({}|{})", t.join(","), g.join(",")), h, json!({})))
        }
        InfoOp::CondEvent => {
            let conds = parse_event(&joint, &args.pred)?;
            let idx: Vec<usize> = conds.iter().map(|c| c.var).collect();
            let h = conditional_entropy_event(&joint, |labels| conds.iter().zip(&idx).all(|(c, &i)| holds(c, labels[i]))).domain()?;
            let names = names_or_all(&joint, &[]);
            Ok(bits_result(format!("H({}|{})", names.join(","), args.pred.join(" && ")), h, json!({})))
        }
        InfoOp::Mi => {
            let (x, y) = (required(&args.x, "--x")?, required(&args.y, "--y")?);
            let i = mutual_information(&joint, &x, &y).domain()?;
            Ok(bits_result(format!("I({};{})", x.join(","), y.join(",")), i, json!({})))
        }
        InfoOp::Sw => {
            let (x, y) = (required(&args.x, "--x")?, required(&args.y, "--y")?);
            let r = slepian_wolf_rates(&joint, &x, &y).domain()?;
            let (xs, ys) = (x.join(","), y.join(","));
            let human = format!(
                "H({xs}) = {} bits\nH({ys}|{xs}) = {} bits\nH({xs},{ys}) = {} bits\nH({ys}) = {} bits\nsavings = {} bits\n",
                sig(r.h_x),
                sig(r.h_y_given_x),
                sig(r.h_xy),
                sig(r.h_y),
                sig(r.savings)
            );
            let header = ["h_x", "h_y_given_x", "h_xy", "h_y", "savings"];
            let row = vec![r.h_x.to_string(), r.h_y_given_x.to_string(), r.h_xy.to_string(), r.h_y.to_string(), r.savings.to_string()];
            Ok(Rendered { human, json: to_value(&r), csv: csv(&header, &[row]) })
        }
        InfoOp::Capacity => unreachable!("handled above"),
    }
}
