//! State-merging quotients and the maps that relate a reduced model to the
//! model it came from.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::model::{Choice, State, Subclass, Transition, WpMdp};
use crate::poly::Rational;
use crate::valuation::{ConcreteMdp, Valuation};

/// Relates a reduced model to its source. Every source state is mapped to
/// the reduced state that represents it, and every reduced choice records
/// the source choice it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionMap {
    pub state_map: Vec<usize>,
    pub choice_origin: Vec<Vec<(usize, usize)>>,
}

impl ReductionMap {
    pub fn identity(m: &WpMdp) -> ReductionMap {
        ReductionMap {
            state_map: (0..m.states.len()).collect(),
            choice_origin: m
                .states
                .iter()
                .enumerate()
                .map(|(s, st)| (0..st.choices.len()).map(|c| (s, c)).collect())
                .collect(),
        }
    }

    /// Composes `self` (source to middle) with `next` (middle to target).
    pub fn then(&self, next: &ReductionMap) -> ReductionMap {
        ReductionMap {
            state_map: self.state_map.iter().map(|&s| next.state_map[s]).collect(),
            choice_origin: next
                .choice_origin
                .iter()
                .map(|row| row.iter().map(|&(s, c)| self.choice_origin[s][c]).collect())
                .collect(),
        }
    }

    pub fn num_reduced_states(&self) -> usize {
        self.choice_origin.len()
    }

    /// Source states represented by each reduced state.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_reduced_states()];
        for (s, &r) in self.state_map.iter().enumerate() {
            out[r].push(s);
        }
        out
    }
}

/// Merges states according to `class_of` (class ids need not be dense or
/// ordered). The representative of a class is its target member if it has
/// one, otherwise `preferred[class]` when given, otherwise its lowest-index
/// member. Reduced states appear in the order of their lowest member.
///
/// Every choice of every non-target member survives with successors mapped
/// to classes and parallel edges merged. With `drop_internal`, successors in
/// the choice's own class are removed, choices left empty are dropped, and
/// the output is trivially parametric.
pub fn quotient(
    m: &WpMdp,
    class_of: &[usize],
    preferred: &BTreeMap<usize, usize>,
    drop_internal: bool,
) -> (WpMdp, ReductionMap) {
    let n = m.states.len();
    assert_eq!(class_of.len(), n);
    let mut dense: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    for &c in class_of {
        if let std::collections::btree_map::Entry::Vacant(e) = dense.entry(c) {
            e.insert(order.len());
            order.push(c);
        }
    }
    let k = order.len();
    let state_map: Vec<usize> = class_of.iter().map(|c| dense[c]).collect();
    let mut members = vec![Vec::new(); k];
    for s in 0..n {
        members[state_map[s]].push(s);
    }
    let reps: Vec<usize> = (0..k)
        .map(|r| {
            let ms = &members[r];
            let targets: Vec<usize> = ms.iter().copied().filter(|&s| m.states[s].is_target()).collect();
            assert!(targets.len() <= 1, "class merges several targets");
            targets
                .first()
                .copied()
                .or_else(|| preferred.get(&order[r]).copied().filter(|p| ms.contains(p)))
                .unwrap_or(ms[0])
        })
        .collect();

    let tp = drop_internal || m.subclass.is_trivially_parametric();
    let subclass = match (tp, m.subclass.is_weighted()) {
        (true, true) => Subclass::WtpMdp,
        (true, false) => Subclass::TpMdp,
        (false, _) => m.subclass,
    };
    let mut out = WpMdp::new(m.name.clone(), subclass);
    if !tp {
        out.params = m.params.clone();
    }
    let mut origin = vec![Vec::new(); k];
    for r in 0..k {
        let rep = &m.states[reps[r]];
        let mut st = State { name: rep.name.clone(), target_weight: rep.target_weight.clone(), choices: Vec::new() };
        if !rep.is_target() {
            for &s in &members[r] {
                for (c, ch) in m.states[s].choices.iter().enumerate() {
                    let mut merged: Vec<Transition> = Vec::new();
                    for t in ch.transitions.iter().filter(|t| t.in_support()) {
                        let to = state_map[t.to];
                        if drop_internal && to == r {
                            continue;
                        }
                        match merged.iter_mut().find(|x| x.to == to) {
                            Some(x) => {
                                if !tp {
                                    let sum = x.prob.as_ref().unwrap().add(t.prob.as_ref().unwrap());
                                    x.prob = Some(sum);
                                }
                            }
                            None => merged.push(Transition { to, prob: if tp { None } else { t.prob.clone() } }),
                        }
                    }
                    if merged.is_empty() {
                        continue;
                    }
                    st.choices.push(Choice { action: ch.action.clone(), transitions: merged });
                    origin[r].push((s, c));
                }
            }
        }
        out.states.push(st);
    }
    (out, ReductionMap { state_map, choice_origin: origin })
}

/// Transfers a concrete valuation of the source model onto a reduced model:
/// each reduced choice takes the source row of its origin, sums mass per
/// reduced successor, keeps only the successors present in the reduced
/// choice and renormalises.
pub fn lift_valuation(source: &ConcreteMdp, map: &ReductionMap, reduced: &WpMdp) -> Result<Valuation, String> {
    let mut dists = Vec::with_capacity(reduced.states.len());
    for (r, st) in reduced.states.iter().enumerate() {
        let mut rows = Vec::with_capacity(st.choices.len());
        for (k, ch) in st.choices.iter().enumerate() {
            let (s, c) = *map
                .choice_origin
                .get(r)
                .and_then(|x| x.get(k))
                .ok_or_else(|| format!("no origin for choice {} of `{}`", k, st.name))?;
            let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
            for (to, p) in &source.choices[s][c] {
                *mass.entry(map.state_map[*to]).or_insert_with(Rational::zero) += p;
            }
            let kept: Vec<Rational> =
                ch.transitions.iter().map(|t| mass.get(&t.to).cloned().unwrap_or_else(Rational::zero)).collect();
            let total: Rational = kept.iter().cloned().sum();
            if total.is_zero() {
                return Err(format!("choice {} of `{}` receives no probability mass", k, st.name));
            }
            rows.push(kept.into_iter().map(|p| p / &total).collect());
        }
        dists.push(rows);
    }
    Ok(Valuation::Distributions(dists))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::State;
    use crate::poly::{int, rat};
    use crate::valuation::instantiate;

    fn cycle_model() -> WpMdp {
        // s <-> t with t also exiting to {fin, fail}.
        let mut m = WpMdp::new("cyc", Subclass::TpMdp);
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        let fin = m.add_state(State::target("fin", int(1)));
        let fail = m.add_state(State::target("fail", int(0)));
        m.add_choice(s, "a", vec![Transition::free(t)]);
        m.add_choice(t, "a", vec![Transition::free(s)]);
        m.add_choice(t, "b", vec![Transition::free(fin), Transition::free(fail), Transition::free(s)]);
        m
    }

    #[test]
    fn merges_and_drops_internal() {
        let m = cycle_model();
        let (q, map) = quotient(&m, &[0, 0, 2, 3], &BTreeMap::new(), true);
        assert_eq!(q.num_states(), 3);
        assert_eq!(q.states[0].choices.len(), 1);
        assert_eq!(q.states[0].choices[0].transitions, vec![Transition::free(1), Transition::free(2)]);
        assert_eq!(map.choice_origin[0], vec![(1, 1)]);
        assert_eq!(map.state_map, vec![0, 0, 1, 2]);
    }

    #[test]
    fn lifting_renormalises() {
        let m = cycle_model();
        let (q, map) = quotient(&m, &[0, 0, 2, 3], &BTreeMap::new(), true);
        let val = Valuation::Distributions(vec![
            vec![vec![int(1)]],
            vec![vec![int(1)], vec![rat(1, 4), rat(1, 4), rat(1, 2)]],
            vec![],
            vec![],
        ]);
        let c = instantiate(&m, &val).unwrap();
        let lifted = lift_valuation(&c, &map, &q).unwrap();
        assert_eq!(lifted, Valuation::Distributions(vec![vec![vec![rat(1, 2), rat(1, 2)]], vec![], vec![]]));
    }

    #[test]
    fn composition() {
        let m = cycle_model();
        let id = ReductionMap::identity(&m);
        let (_, map) = quotient(&m, &[0, 0, 2, 3], &BTreeMap::new(), true);
        assert_eq!(id.then(&map), map);
    }
}
