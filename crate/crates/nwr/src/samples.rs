//! Small hand-built models used in documentation, tests and the CLI smoke checks.

use crate::model::{State, Subclass, Transition, WpMdp};
use crate::poly::{int, rat, Polynomial};

fn constant(n: i64, d: i64) -> Option<Polynomial> {
    Some(Polynomial::constant(rat(n, d)))
}

fn poly(text: &str, params: &[String]) -> Option<Polynomial> {
    Some(Polynomial::parse(text, params).expect("sample polynomial"))
}

/// Weighted Markov chain over targets `0`, `1`, `4`:
/// `p -> {0: 1/4, 1: 3/4}` and `q -> {p: 1/2, 4: 1/2}`.
pub fn weighted_chain() -> WpMdp {
    let mut m = WpMdp::new("weighted_chain", Subclass::WpMdp);
    let t0 = m.add_state(State::target("0", int(0)));
    let p = m.add_state(State::new("p"));
    let t1 = m.add_state(State::target("1", int(1)));
    let q = m.add_state(State::new("q"));
    let t4 = m.add_state(State::target("4", int(4)));
    m.add_choice(
        p,
        "a",
        vec![Transition { to: t0, prob: constant(1, 4) }, Transition { to: t1, prob: constant(3, 4) }],
    );
    m.add_choice(q, "a", vec![Transition { to: p, prob: constant(1, 2) }, Transition { to: t4, prob: constant(1, 2) }]);
    m
}

/// Weighted parametric MDP over parameters `x`, `y`:
/// `p -a-> {1: 2y, q: 2x^2 - y}`, `q -a-> {1: 1 - y, 0: y}`, `q -b-> {0: 1 - x, 4: x}`.
pub fn weighted_parametric() -> WpMdp {
    let mut m = WpMdp::new("weighted_parametric", Subclass::WpMdp);
    m.params = vec!["x".to_string(), "y".to_string()];
    let ps = m.params.clone();
    let p = m.add_state(State::new("p"));
    let q = m.add_state(State::new("q"));
    let t0 = m.add_state(State::target("0", int(0)));
    let t1 = m.add_state(State::target("1", int(1)));
    let t4 = m.add_state(State::target("4", int(4)));
    m.add_choice(
        p,
        "a",
        vec![Transition { to: t1, prob: poly("2*y", &ps) }, Transition { to: q, prob: poly("2*x^2 - y", &ps) }],
    );
    m.add_choice(
        q,
        "a",
        vec![Transition { to: t1, prob: poly("1 - y", &ps) }, Transition { to: t0, prob: poly("y", &ps) }],
    );
    m.add_choice(
        q,
        "b",
        vec![Transition { to: t0, prob: poly("1 - x", &ps) }, Transition { to: t4, prob: poly("x", &ps) }],
    );
    m
}

/// Non-weighted parametric MDP:
/// `p -a-> {fail: 1}`, `q -a-> {p: 1 - x, fin: x}`, `q -b-> {fail: x^2, fin: y}`.
pub fn parametric() -> WpMdp {
    let mut m = WpMdp::new("parametric", Subclass::PMdp);
    m.params = vec!["x".to_string(), "y".to_string()];
    let ps = m.params.clone();
    let p = m.add_state(State::new("p"));
    let q = m.add_state(State::new("q"));
    let fail = m.add_state(State::target("fail", int(0)));
    let fin = m.add_state(State::target("fin", int(1)));
    m.add_choice(p, "a", vec![Transition { to: fail, prob: poly("1", &ps) }]);
    m.add_choice(
        q,
        "a",
        vec![Transition { to: p, prob: poly("1 - x", &ps) }, Transition { to: fin, prob: poly("x", &ps) }],
    );
    m.add_choice(
        q,
        "b",
        vec![Transition { to: fail, prob: poly("x^2", &ps) }, Transition { to: fin, prob: poly("y", &ps) }],
    );
    m
}

/// Support graph of [`weighted_parametric`] as a weighted trivially parametric MDP.
pub fn weighted_trivial() -> WpMdp {
    let mut m = weighted_parametric().to_trivially_parametric();
    m.name = "weighted_trivial".to_string();
    m
}

/// Support graph of [`parametric`] as a trivially parametric MDP.
pub fn trivial() -> WpMdp {
    let mut m = parametric().to_trivially_parametric();
    m.name = "trivial".to_string();
    m
}
