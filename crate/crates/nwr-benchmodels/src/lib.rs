//! Explicit-state generators for the benchmark families shipped with the
//! repository (bounded retransmission protocol and randomised consensus)
//! and the conversion into non-weighted models.
//!
//! States carrying the target label keep a single choice that moves to
//! `fin` with probability one, mirroring the usual export of a reachability
//! property. A fresh `fin` and `fail` are appended.

pub mod brp;
pub mod consensus;

use nwr::model::{State, Subclass, Transition, WpMdp};
use nwr::poly::{int, Polynomial, Rational};
use nwr::reduce::PruneConfig;

pub use brp::BrpLabel;
pub use consensus::ConsensusLabel;

const TARGET_ACTION: &str = "target";

fn with_sinks(name: String, state_names: Vec<String>) -> (WpMdp, usize) {
    let mut m = WpMdp::new(name, Subclass::PMdp);
    for n in state_names {
        m.add_state(State::new(n));
    }
    let fin = m.add_state(State::target("fin", int(1)));
    m.add_state(State::target("fail", int(0)));
    (m, fin)
}

fn constant_row(row: &[(usize, Rational)]) -> Vec<Transition> {
    row.iter().map(|(t, p)| Transition { to: *t, prob: Some(Polynomial::constant(p.clone())) }).collect()
}

/// Bounded retransmission protocol with `n` chunks and at most `max`
/// retransmissions, as a Markov chain.
pub fn brp_model(n: u32, max: u32, label: BrpLabel) -> WpMdp {
    let (states, rows) = brp::explore(n, max);
    let (mut m, fin) =
        with_sinks(format!("brp_{n}_{max}_{}", label.name()), states.iter().map(brp::state_name).collect());
    for (s, row) in rows.iter().enumerate() {
        if label.holds(&states[s]) {
            m.add_choice(s, TARGET_ACTION, vec![Transition { to: fin, prob: Some(Polynomial::one()) }]);
        } else {
            m.add_choice(s, "step", constant_row(row));
        }
    }
    m
}

/// Two-process randomised consensus with counter bound parameter `k`.
pub fn consensus_model(k: u32, label: ConsensusLabel) -> WpMdp {
    let (states, choices) = consensus::explore(k);
    let (mut m, fin) =
        with_sinks(format!("consensus_2_{k}_{}", label.name()), states.iter().map(consensus::state_name).collect());
    for (s, cs) in choices.iter().enumerate() {
        if label.holds(&states[s]) {
            m.add_choice(s, TARGET_ACTION, vec![Transition { to: fin, prob: Some(Polynomial::one()) }]);
            continue;
        }
        for (owner, row) in cs {
            let action = match owner {
                Some(i) => format!("p{i}"),
                None => "done".to_string(),
            };
            m.add_choice(s, action, constant_row(row));
        }
    }
    m
}

/// One bundled benchmark document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instance {
    Brp { n: u32, max: u32, label: BrpLabel },
    Consensus { k: u32, label: ConsensusLabel },
}

impl Instance {
    pub fn file_stem(&self) -> String {
        match self {
            Instance::Brp { n, max, label } => format!("brp_{n}_{max}_{}", label.name()),
            Instance::Consensus { k, label } => format!("consensus_2_{k}_{}", label.name()),
        }
    }

    pub fn build(&self) -> WpMdp {
        match *self {
            Instance::Brp { n, max, label } => brp_model(n, max, label),
            Instance::Consensus { k, label } => consensus_model(k, label),
        }
    }

    /// Experimental setup the published numbers for this instance were
    /// obtained with: the small consensus instances ran with pruning
    /// (setup 1), the rest with collapsing only (setup 2).
    pub fn reference_config(&self) -> PruneConfig {
        match self {
            Instance::Consensus { k, .. } if *k <= 4 => PruneConfig::setup1(),
            _ => PruneConfig::setup2(),
        }
    }

    /// Provenance recorded in the document.
    pub fn source(&self) -> String {
        match self {
            Instance::Brp { n, max, label } => {
                format!("nwr-benchmodels brp(N={n}, MAX={max}) label {}", label.name())
            }
            Instance::Consensus { k, label } => format!("nwr-benchmodels consensus(N=2, K={k}) label {}", label.name()),
        }
    }
}

/// The instances written to `data/benchmarks`.
pub fn standard_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for label in [ConsensusLabel::Disagree, ConsensusLabel::All1, ConsensusLabel::NotAll1] {
        for k in [2, 4, 8, 16] {
            out.push(Instance::Consensus { k, label });
        }
    }
    for label in [BrpLabel::NoSuccTrans, BrpLabel::NotRecButSent] {
        for max in 2..=5 {
            out.push(Instance::Brp { n: 64, max, label });
        }
    }
    out
}
