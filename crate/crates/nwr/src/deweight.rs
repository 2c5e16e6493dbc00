//! Reductions from weighted to non-weighted models that preserve every
//! never-worse relation among the original vertices.

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::graph::MdpGraph;
use crate::model::{Choice, ModelError, State, Subclass, Transition, WpMdp};
use crate::poly::{format_rational, Polynomial, Rational};

#[derive(Debug, Error)]
pub enum DeweightError {
    #[error("model has no target of positive weight")]
    NoPositiveWeight,
    #[error("target weights must be distinct with a weight-0 target; normalise targets first")]
    NotNormalized,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Relates the original model to its non-weighted counterpart. Original
/// states keep their indices; new states are appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeweightMap {
    pub state_map: Vec<usize>,
    pub added_states: Vec<usize>,
    pub action: String,
    pub fin: usize,
    pub fail: usize,
    /// `1 / ρ(t_n)` for the parametric construction.
    #[serde(serialize_with = "ser_opt_rational")]
    pub scale: Option<Rational>,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

/// Targets sorted by weight, checking `0 = ρ(t_0) < ρ(t_1) < … < ρ(t_n)` with `n ≥ 1`.
fn ordered_targets(m: &WpMdp) -> Result<Vec<usize>, DeweightError> {
    if !m.subclass.is_weighted() {
        return Err(ModelError::WrongSubclass { expected: "a weighted", got: m.subclass.as_str() }.into());
    }
    let ts = m.sorted_targets();
    let ws: Vec<&Rational> = ts.iter().map(|&t| m.states[t].target_weight.as_ref().unwrap()).collect();
    if ws.first().is_none_or(|w| !w.is_zero()) || ws.windows(2).any(|p| p[0] >= p[1]) {
        return Err(DeweightError::NotNormalized);
    }
    if ts.len() < 2 {
        return Err(DeweightError::NoPositiveWeight);
    }
    Ok(ts)
}

fn add_sinks(out: &mut WpMdp) -> (usize, usize) {
    let fin_name = out.fresh_state_name("__fin");
    let fin = out.add_state(State::target(fin_name, Rational::one()));
    let fail_name = out.fresh_state_name("__fail");
    let fail = out.add_state(State::target(fail_name, Rational::zero()));
    (fin, fail)
}

/// Parametric construction: every target `t` becomes a non-target with one
/// fresh action moving to `fin` with probability `ρ(t)/ρ(t_n)` and to `fail`
/// otherwise. Values scale by `1/ρ(t_n)`. Trivially parametric inputs are
/// given a fresh parameter per transition first.
pub fn deweight_pmdp(m: &WpMdp) -> Result<(WpMdp, DeweightMap), DeweightError> {
    let ts = ordered_targets(m)?;
    let mut out = if m.subclass.is_trivially_parametric() { m.synthesize_parameters() } else { m.clone() };
    out.subclass = Subclass::PMdp;
    let action = out.fresh_action_name("__deweight");
    let n_orig = out.states.len();
    let top = out.states[*ts.last().unwrap()].target_weight.clone().unwrap();
    let z = top.recip();
    let (fin, fail) = add_sinks(&mut out);
    for &t in &ts {
        let frac = out.states[t].target_weight.take().unwrap() * &z;
        let mut transitions = Vec::new();
        if frac.is_positive() {
            transitions.push(Transition { to: fin, prob: Some(Polynomial::constant(frac.clone())) });
        }
        let rest = Rational::one() - frac;
        if rest.is_positive() {
            transitions.push(Transition { to: fail, prob: Some(Polynomial::constant(rest)) });
        }
        out.states[t].choices = vec![Choice { action: action.clone(), transitions }];
    }
    let map = DeweightMap {
        state_map: (0..n_orig).collect(),
        added_states: vec![fin, fail],
        action,
        fin,
        fail,
        scale: Some(z),
    };
    Ok((out, map))
}

/// Trivially parametric construction. Nature vertices that cannot reach a
/// positive target first get an extra edge to `t_0`. Then each target `t_i`
/// becomes a non-target with a single fresh choice `a_i`: `a_0` leads to
/// `fail`, `a_i` for `i ≥ 1` leads to `fin` and `t_{i-1}`. The ordering of
/// values is preserved, their ratio is not.
pub fn deweight_tpmdp(m: &WpMdp) -> Result<(WpMdp, DeweightMap), DeweightError> {
    if !m.subclass.is_trivially_parametric() {
        return Err(ModelError::WrongSubclass {
            expected: "a weighted trivially parametric",
            got: m.subclass.as_str(),
        }
        .into());
    }
    let ts = ordered_targets(m)?;
    let mut out = m.clone();
    out.subclass = Subclass::TpMdp;
    let t0 = ts[0];
    let g = MdpGraph::build(m);
    let reaches = g.reaches_positive_target();
    for s in 0..m.states.len() {
        for (c, v) in g.choices_of(s).enumerate() {
            let ch = &mut out.states[s].choices[c];
            if !reaches[v] && !ch.transitions.iter().any(|t| t.to == t0) {
                ch.transitions.push(Transition::free(t0));
            }
        }
    }
    let action = out.fresh_action_name("__deweight");
    let n_orig = out.states.len();
    let (fin, fail) = add_sinks(&mut out);
    for (i, &t) in ts.iter().enumerate() {
        out.states[t].target_weight = None;
        let transitions = if i == 0 {
            vec![Transition::free(fail)]
        } else {
            vec![Transition::free(fin), Transition::free(ts[i - 1])]
        };
        out.states[t].choices = vec![Choice { action: action.clone(), transitions }];
    }
    let map =
        DeweightMap { state_map: (0..n_orig).collect(), added_states: vec![fin, fail], action, fin, fail, scale: None };
    Ok((out, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::{normalize_targets, validate_model};
    use crate::oracle::solve_exact;
    use crate::poly::{int, rat};
    use crate::samples;
    use crate::valuation::{instantiate, Valuation};

    #[test]
    fn chain_scaling() {
        let m = normalize_targets(&samples::weighted_chain()).unwrap();
        let (n, map) = deweight_pmdp(&m).unwrap();
        assert_eq!(map.scale, Some(rat(1, 4)));
        assert!(validate_model(&n).is_empty(), "{:?}", validate_model(&n));
        let t1 = m.state_index("1").unwrap();
        assert_eq!(n.states[t1].choices[0].transitions[0].prob, Some(Polynomial::constant(rat(1, 4))));
        let t4 = m.state_index("4").unwrap();
        assert_eq!(
            n.states[t4].choices[0].transitions,
            vec![Transition { to: map.fin, prob: Some(Polynomial::one()) }]
        );
        let t0 = m.state_index("0").unwrap();
        assert_eq!(
            n.states[t0].choices[0].transitions,
            vec![Transition { to: map.fail, prob: Some(Polynomial::one()) }]
        );
        let c = instantiate(&n, &Valuation::Params(vec![])).unwrap();
        let q = m.state_index("q").unwrap();
        assert_eq!(solve_exact(&c).state[q], rat(19, 32));
    }

    #[test]
    fn tp_adds_n_plus_three_vertices() {
        // n = 1: targets weights 0 < 3.
        let mut m = WpMdp::new("one", Subclass::WtpMdp);
        let s = m.add_state(State::new("s"));
        let a = m.add_state(State::target("fail", int(0)));
        let b = m.add_state(State::target("three", int(3)));
        m.add_choice(s, "go", vec![Transition::free(a), Transition::free(b)]);
        let g0 = build_graph(&m);
        let (n, _) = deweight_tpmdp(&m).unwrap();
        let g1 = build_graph(&n);
        assert_eq!(g1.num_vertices() - g0.num_vertices(), 4);
        let added_transitions: usize = n.num_choices() - m.num_choices();
        assert_eq!(added_transitions, 2);
        let new_edge_count = n
            .states
            .iter()
            .map(|s| s.choices.iter().map(|c| c.transitions.len() + 1).sum::<usize>())
            .sum::<usize>()
            - m.states.iter().map(|s| s.choices.iter().map(|c| c.transitions.len() + 1).sum::<usize>()).sum::<usize>();
        assert_eq!(new_edge_count, 5);
        // The fail-only choice of t_0 gets no state edge in the graph.
        assert_eq!(g1.num_edges() - g0.num_edges(), 4);
        assert!(validate_model(&n).is_empty(), "{:?}", validate_model(&n));
    }

    #[test]
    fn tp_top_target_links() {
        let m = normalize_targets(&samples::weighted_chain()).unwrap().to_trivially_parametric();
        let (n, map) = deweight_tpmdp(&m).unwrap();
        let t4 = m.state_index("4").unwrap();
        let t1 = m.state_index("1").unwrap();
        assert_eq!(n.states[t4].choices[0].transitions, vec![Transition::free(map.fin), Transition::free(t1)]);
    }

    #[test]
    fn precondition_edge_to_t0() {
        let mut m = WpMdp::new("dead", Subclass::WtpMdp);
        let s = m.add_state(State::new("s"));
        let u = m.add_state(State::new("u"));
        let t0 = m.add_state(State::target("fail", int(0)));
        let t1 = m.add_state(State::target("one", int(1)));
        m.add_choice(s, "a", vec![Transition::free(u)]);
        m.add_choice(s, "b", vec![Transition::free(t1)]);
        m.add_choice(u, "a", vec![Transition::free(u)]);
        let (n, _) = deweight_tpmdp(&m).unwrap();
        assert_eq!(n.states[u].choices[0].transitions, vec![Transition::free(u), Transition::free(t0)]);
        assert_eq!(n.states[s].choices[0].transitions, vec![Transition::free(u), Transition::free(t0)]);
        assert_eq!(n.states[s].choices[1].transitions, vec![Transition::free(t1)]);
    }

    #[test]
    fn rejects_degenerate() {
        let mut m = WpMdp::new("zero", Subclass::WtpMdp);
        let s = m.add_state(State::new("s"));
        let f = m.add_state(State::target("fail", int(0)));
        m.add_choice(s, "a", vec![Transition::free(f)]);
        assert!(matches!(deweight_pmdp(&m), Err(DeweightError::NoPositiveWeight)));
        let mut m = samples::weighted_trivial();
        m.states[2].target_weight = Some(int(1));
        assert!(matches!(deweight_tpmdp(&m), Err(DeweightError::NotNormalized)));
    }
}
