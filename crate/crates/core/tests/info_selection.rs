mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semcom::channel::message_length;
use semcom::infotheory::{bsc_capacity, conditional_entropy, entropy, mutual_information, slepian_wolf_rates, ChannelSpec, JointPmf};
use semcom::kb::{Clause, Policy};
use semcom::metrics::{query_entropy, semantic_content, EntropyConfig};
use semcom::security::{check_security, SecurityParams};
use semcom::selection::{
    select_expected, select_for_kb, select_for_query, select_for_query_constrained, CandidatePool, SenderBelief,
};

const TOL: f64 = 1e-9;

fn names(j: &JointPmf) -> Vec<String> { j.variables().iter().map(|v| v.name.clone()).collect() }

proptest! {
    #[test]
    fn chain_rule_and_mutual_information(seed in any::<u64>()) {
        let j = random_joint(&mut ChaCha8Rng::seed_from_u64(seed), 3, 4);
        let ns = names(&j);
        let all: Vec<&str> = ns.iter().map(String::as_str).collect();
        let h = entropy(&j);
        // H(X_1..X_n) = sum_i H(X_i | X_1..X_{i-1})
        let chain: f64 = (0..all.len()).map(|i| conditional_entropy(&j, &all[i..=i], &all[..i]).unwrap()).sum();
        prop_assert!((h - chain).abs() <= TOL);
        for a in 0..all.len() {
            for b in 0..all.len() {
                if a == b { continue; }
                let (x, y) = (&all[a..=a], &all[b..=b]);
                let ixy = mutual_information(&j, x, y).unwrap();
                prop_assert!(ixy >= -TOL);
                prop_assert!((ixy - mutual_information(&j, y, x).unwrap()).abs() <= TOL);
                let hx = j.entropy_of(x).unwrap();
                let hx_y = conditional_entropy(&j, x, y).unwrap();
                prop_assert!(hx_y <= hx + TOL);
                prop_assert!((ixy - (hx - hx_y)).abs() <= TOL);
            }
        }
    }

    #[test]
    fn event_conditioning_renormalizes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = random_joint(&mut rng, 3, 4);
        let keep: Vec<bool> = (0..j.probs().len()).map(|_| rng.gen_bool(0.6)).collect();
        let mass: f64 = j.probs().iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p).sum();
        let dims: Vec<usize> = j.variables().iter().map(|v| v.domain.len()).collect();
        let flat = |a: &[usize]| a.iter().zip(&dims).fold(0, |acc, (x, d)| acc * d + x);
        match j.restrict(|a| keep[flat(a)]) {
            Ok(r) => {
                prop_assert!(mass > 0.0);
                prop_assert!((r.probs().iter().sum::<f64>() - 1.0).abs() <= TOL);
                let expected: Vec<f64> = j.probs().iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p / mass).collect();
                let got: Vec<f64> = r.probs().iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
                prop_assert!((entropy(&r) - entropy_of_masses(&expected)).abs() <= TOL);
                prop_assert!(got.iter().zip(&expected).all(|(g, e)| (g - e).abs() <= TOL));
            }
            Err(_) => prop_assert!(mass == 0.0),
        }
    }

    #[test]
    fn slepian_wolf_accounting(seed in any::<u64>()) {
        let j = random_joint(&mut ChaCha8Rng::seed_from_u64(seed), 3, 4);
        let ns = names(&j);
        if ns.len() < 2 { return Ok(()); }
        let r = slepian_wolf_rates(&j, &[&ns[0]], &[&ns[1]]).unwrap();
        prop_assert!((r.h_x + r.h_y_given_x - r.h_xy).abs() <= TOL);
        prop_assert!(r.savings >= -TOL);
        prop_assert!((r.savings - (r.h_y - r.h_y_given_x)).abs() <= TOL);
    }

    #[test]
    fn capacity_is_symmetric_and_bounded(e in 0.0f64..=1.0) {
        let c = bsc_capacity(&ChannelSpec::bsc(e).unwrap());
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - bsc_capacity(&ChannelSpec::bsc(1.0 - e).unwrap())).abs() <= 1e-12);
    }

    #[test]
    fn selection_is_argmin_of_semantic_content(seed in any::<u64>(), replace in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_program(&mut rng, 4);
        let pool = CandidatePool::new((0..rng.gen_range(1..=5)).map(|_| random_clause(&mut rng, false)).collect());
        let policy = if replace { Policy::Replace } else { Policy::Union };
        let cfg = EntropyConfig::default();
        let out = select_for_kb(&kb, &pool, policy, &cfg).unwrap();
        let contents: Vec<f64> = pool.messages.iter().map(|m| semantic_content(&kb, m, policy, &cfg).unwrap()).collect();
        let best = contents.iter().copied().fold(f64::INFINITY, f64::min);
        let chosen = pool.messages.iter().position(|m| *m == out.chosen).unwrap();
        prop_assert!(contents[chosen] <= best + 1e-12);
        prop_assert_eq!(out.ranking.len(), pool.len());
        prop_assert!(out.ranking.windows(2).all(|w| w[0].score <= w[1].score));
    }

    #[test]
    fn belief_scale_invariance(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyps: Vec<_> = (0..3).map(|_| (random_program(&mut rng, 3), rng.gen_range(0.1..1.0))).collect();
        let pool = CandidatePool::new((0..4).map(|_| random_clause(&mut rng, false)).collect());
        let cfg = EntropyConfig::default();
        let a = select_expected(&SenderBelief::normalized(hyps.clone()).unwrap(), &pool, Policy::Union, &cfg).unwrap();
        let scaled = hyps.into_iter().map(|(p, w)| (p, w * scale)).collect();
        let b = select_expected(&SenderBelief::normalized(scaled).unwrap(), &pool, Policy::Union, &cfg).unwrap();
        // Rescaled weights can differ in the last bit, so only near-ties may flip.
        let b_in_a = a.ranking.iter().find(|r| r.clause == b.chosen).unwrap().score;
        prop_assert!((a.score - b.score).abs() <= 1e-12 && b_in_a <= a.score + 1e-12);
    }

    #[test]
    fn certain_belief_equals_known_kb(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_program(&mut rng, 4);
        let pool = CandidatePool::new((0..4).map(|_| random_clause(&mut rng, false)).collect());
        let cfg = EntropyConfig::default();
        let a = select_for_kb(&kb, &pool, Policy::Union, &cfg).unwrap();
        let b = select_expected(&SenderBelief::certain(kb), &pool, Policy::Union, &cfg).unwrap();
        prop_assert_eq!(a.chosen, b.chosen);
        prop_assert!((a.score - b.score).abs() <= 1e-12);
    }

    #[test]
    fn relaxing_the_length_bound_never_hurts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_program(&mut rng, 4);
        let pool = CandidatePool::new((0..5).map(|_| random_clause(&mut rng, false)).collect());
        let q = atom(ATOMS[rng.gen_range(0..ATOMS.len())]);
        let cfg = EntropyConfig::default();
        let len = |m: &Clause| message_length(m) as f64;
        let mut bounds: Vec<f64> = pool.messages.iter().map(len).collect();
        bounds.sort_by(f64::total_cmp);
        let mut last = f64::INFINITY;
        for l in bounds {
            let out = select_for_query_constrained(&kb, &pool, &q, l, &len, Policy::Union, &cfg).unwrap();
            prop_assert!(len(&out.chosen) <= l);
            prop_assert!(out.score <= last + 1e-12);
            last = out.score;
        }
        let free = select_for_query(&kb, &pool, &q, Policy::Union, &cfg).unwrap();
        prop_assert!((free.score - last).abs() <= 1e-12);
        let direct = query_entropy(&kb.assimilate(&free.chosen, Policy::Union), &q, &cfg).unwrap();
        prop_assert!((direct - free.score).abs() <= 1e-12);
    }

    #[test]
    fn eve_equal_to_bob_is_never_secure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_program(&mut rng, 4);
        let m = random_clause(&mut rng, false);
        let q = atom(ATOMS[rng.gen_range(0..ATOMS.len())]);
        let params = SecurityParams::default();
        let r = check_security(&kb, &kb, &m, &q, &params, &EntropyConfig::default()).unwrap();
        prop_assert_eq!(r.opaque && r.useful, r.secure);
        prop_assert!(!r.secure);
    }
}

#[test]
fn empty_pool_is_an_error() {
    let cfg = EntropyConfig::default();
    assert!(select_for_kb(&program(EX2), &CandidatePool::default(), Policy::Union, &cfg).is_err());
}
