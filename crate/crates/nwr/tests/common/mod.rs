//! Seeded random model generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use nwr::model::{State, Subclass, Transition, WpMdp};
use nwr::poly::int;
use rand::seq::SliceRandom;
use rand::Rng;

/// Picks `1..=max_len` distinct successors out of `0..n`.
fn successors<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> Vec<usize> {
    let len = rng.gen_range(1..=max_len.min(n));
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(len);
    all
}

/// Random trivially parametric MDP with `internal` non-target states
/// `s0..`, followed by `fin` and `fail`. Every internal state has between
/// one and `max_actions` choices, each with up to three successors.
pub fn random_tp<R: Rng>(rng: &mut R, internal: usize, max_actions: usize) -> WpMdp {
    let mut m = WpMdp::new("random_tp", Subclass::TpMdp);
    for i in 0..internal {
        m.add_state(State::new(format!("s{i}")));
    }
    m.add_state(State::target("fin", int(1)));
    m.add_state(State::target("fail", int(0)));
    let n = internal + 2;
    for s in 0..internal {
        for a in 0..rng.gen_range(1..=max_actions) {
            let ts = successors(rng, n, 3);
            m.add_choice(s, format!("a{a}"), ts.into_iter().map(Transition::free).collect());
        }
    }
    m
}

/// Random weighted trivially parametric MDP: `internal` states followed by
/// targets `t0..t{k}` with weights `0 < w1 < … < wk`, `k ≤ 3`.
/// Returns the model and its targets in increasing weight.
pub fn random_weighted<R: Rng>(rng: &mut R, internal: usize, max_actions: usize) -> (WpMdp, Vec<usize>) {
    let mut m = WpMdp::new("random_weighted", Subclass::WtpMdp);
    for i in 0..internal {
        m.add_state(State::new(format!("s{i}")));
    }
    let k = rng.gen_range(1..=3);
    let mut weights: Vec<i64> = (1..=12).collect();
    weights.shuffle(rng);
    weights.truncate(k);
    weights.sort_unstable();
    weights.insert(0, 0);
    let targets: Vec<usize> =
        weights.iter().enumerate().map(|(i, &w)| m.add_state(State::target(format!("t{i}"), int(w)))).collect();
    let n = m.num_states();
    for s in 0..internal {
        for a in 0..rng.gen_range(1..=max_actions) {
            let ts = successors(rng, n, 3);
            m.add_choice(s, format!("a{a}"), ts.into_iter().map(Transition::free).collect());
        }
    }
    (m, targets)
}

/// Forward reachability over a chain's successor lists, never expanding
/// `blocked`.
pub fn reachable(succ: &[Vec<usize>], from: usize, blocked: Option<usize>) -> Vec<bool> {
    let mut seen = vec![false; succ.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        if Some(u) == blocked {
            continue;
        }
        for &t in &succ[u] {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// Successor lists of a single-action model; targets have none.
pub fn chain_successors(m: &WpMdp) -> Vec<Vec<usize>> {
    m.states
        .iter()
        .map(|st| st.choices.first().map(|c| c.transitions.iter().map(|t| t.to).collect()).unwrap_or_default())
        .collect()
}

/// Random Markov chain over `internal` states plus `fin` and `fail` in
/// which every internal state can reach both sinks, so no state besides
/// the sinks has an extremal value.
pub fn random_chain<R: Rng>(rng: &mut R, internal: usize) -> WpMdp {
    loop {
        let mut m = WpMdp::new("random_chain", Subclass::TpMdp);
        for i in 0..internal {
            m.add_state(State::new(format!("s{i}")));
        }
        let fin = m.add_state(State::target("fin", int(1)));
        let fail = m.add_state(State::target("fail", int(0)));
        for s in 0..internal {
            let ts = successors(rng, internal + 2, 3);
            m.add_choice(s, "a", ts.into_iter().map(Transition::free).collect());
        }
        let succ = chain_successors(&m);
        if (0..internal).all(|s| {
            let r = reachable(&succ, s, None);
            r[fin] && r[fail]
        }) {
            return m;
        }
    }
}

/// Pairwise definition: `u` and `w` are related when some non-target `z`
/// is reached almost surely from both. Classes are the transitive closure.
pub fn mc_oracle(m: &WpMdp) -> BTreeSet<BTreeSet<usize>> {
    let succ = chain_successors(m);
    let n = succ.len();
    let can_reach: Vec<Vec<bool>> = (0..n).map(|u| reachable(&succ, u, None)).collect();
    let almost_surely = |u: usize, z: usize| {
        reachable(&succ, u, Some(z)).iter().enumerate().all(|(x, &r)| !r || x == z || can_reach[x][z])
    };
    let mut class: Vec<usize> = (0..n).collect();
    for z in (0..n).filter(|&z| !m.states[z].is_target()) {
        let hit: Vec<usize> = (0..n).filter(|&u| almost_surely(u, z)).collect();
        for &u in &hit {
            let (a, b) = (class[u], class[hit[0]]);
            for c in class.iter_mut() {
                if *c == a {
                    *c = b;
                }
            }
        }
    }
    (0..n).map(|u| (0..n).filter(|&w| class[w] == class[u]).collect()).collect()
}
