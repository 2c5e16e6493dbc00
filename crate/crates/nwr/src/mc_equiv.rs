//! Exact never-worse equivalence on single-action models (parametric Markov
//! chains) and the matching collapse.
//!
//! Two states are equivalent iff some state `z` is reached almost surely
//! from both. Every class then has a unique exit: the member whose
//! successors lie outside the class. Collapsing a class onto its exit
//! preserves all values.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{value0_vertices, value1_vertices};
use crate::graph::MdpGraph;
use crate::model::{ModelError, WpMdp};
use crate::quotient::{quotient, ReductionMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivPartition {
    /// Classes ordered by their lowest member; members sorted.
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// The exit of each class. `None` for singletons and for classes where
    /// no unique exit was found (see `diagnostics`).
    pub exits: Vec<Option<usize>>,
    pub diagnostics: Vec<String>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn check_chain(m: &WpMdp) -> Result<(), ModelError> {
    if m.subclass.is_weighted() {
        return Err(ModelError::WrongSubclass { expected: "a non-weighted", got: m.subclass.as_str() });
    }
    if !m.is_chain() {
        return Err(ModelError::Precondition("equivalence on chains needs at most one choice per state".into()));
    }
    let (fin, fail) = match (m.fin(), m.fail()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(ModelError::Precondition("model needs both fin and fail targets".into())),
    };
    let g = MdpGraph::build(m);
    let v0 = value0_vertices(&g);
    let v1 = value1_vertices(&g);
    for s in 0..m.states.len() {
        if (v0[s] && s != fail) || (v1[s] && s != fin) {
            return Err(ModelError::Precondition(format!(
                "state `{}` has an extremal value; contract extremal states first",
                m.states[s].name
            )));
        }
    }
    Ok(())
}

/// Successor sets of the chain with self-loops removed.
fn successor_sets(m: &WpMdp) -> Vec<Vec<usize>> {
    m.states
        .iter()
        .enumerate()
        .map(|(s, st)| {
            let mut out: Vec<usize> = st.choices.iter().flat_map(|c| c.support()).filter(|&t| t != s).collect();
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect()
}

/// States from which `z` is reached with probability one, treating `z` as
/// absorbing: the complement of the states that can reach, while avoiding
/// `z`, a state with no path to `z`.
fn reaches_almost_surely(succ: &[Vec<usize>], pred: &[Vec<usize>], z: usize) -> Vec<bool> {
    let n = succ.len();
    let mut can_reach = vec![false; n];
    can_reach[z] = true;
    let mut stack = vec![z];
    while let Some(v) = stack.pop() {
        for &p in &pred[v] {
            if !can_reach[p] && p != z {
                can_reach[p] = true;
                stack.push(p);
            }
        }
    }
    let mut escapes: Vec<bool> = can_reach.iter().map(|&r| !r).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&v| escapes[v]).collect();
    while let Some(v) = stack.pop() {
        for &p in &pred[v] {
            if !escapes[p] && p != z {
                escapes[p] = true;
                stack.push(p);
            }
        }
    }
    escapes.into_iter().map(|e| !e).collect()
}

/// Computes the never-worse equivalence classes of a chain.
///
/// Preconditions: non-weighted, at most one choice per state, and no
/// extremal-value states besides `fin` and `fail`.
pub fn mc_equiv_classes(m: &WpMdp) -> Result<EquivPartition, ModelError> {
    check_chain(m)?;
    let n = m.states.len();
    let succ = successor_sets(m);
    let mut pred = vec![Vec::new(); n];
    for (s, ts) in succ.iter().enumerate() {
        for &t in ts {
            pred[t].push(s);
        }
    }
    let is_target: Vec<bool> = m.states.iter().map(|s| s.is_target()).collect();
    let mut uf = UnionFind((0..n).collect());
    for s in 0..n {
        if !is_target[s] && succ[s].len() == 1 && !is_target[succ[s][0]] {
            uf.union(s, succ[s][0]);
        }
    }
    for z in (0..n).filter(|&z| !is_target[z]) {
        let as_z = reaches_almost_surely(&succ, &pred, z);
        for u in (0..n).filter(|&u| as_z[u]) {
            uf.union(u, z);
        }
    }

    let mut class_index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_of = vec![0; n];
    for s in 0..n {
        let root = uf.find(s);
        let c = *class_index.entry(root).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[c].push(s);
        class_of[s] = c;
    }
    let mut exits = Vec::with_capacity(classes.len());
    let mut diagnostics = Vec::new();
    for (c, members) in classes.iter().enumerate() {
        if members.len() == 1 {
            exits.push(None);
            continue;
        }
        let leaving: Vec<usize> =
            members.iter().copied().filter(|&s| succ[s].iter().any(|&t| class_of[t] != c)).collect();
        if leaving.len() == 1 {
            let e = leaving[0];
            if succ[e].iter().any(|&t| class_of[t] == c) {
                diagnostics.push(format!("exit `{}` also has successors inside its class", m.states[e].name));
            }
            exits.push(Some(e));
        } else {
            let names: Vec<&str> = leaving.iter().map(|&s| m.states[s].name.as_str()).collect();
            diagnostics.push(format!(
                "class of `{}` has {} exits: {:?}",
                m.states[members[0]].name,
                leaving.len(),
                names
            ));
            exits.push(None);
        }
    }
    Ok(EquivPartition { classes, class_of, exits, diagnostics })
}

/// Replaces every class by its exit, dropping transitions internal to a class.
pub fn mc_collapse(m: &WpMdp, p: &EquivPartition) -> (WpMdp, ReductionMap) {
    let preferred: BTreeMap<usize, usize> = p.exits.iter().enumerate().filter_map(|(c, e)| e.map(|e| (c, e))).collect();
    quotient(m, &p.class_of, &preferred, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::almost_sure_set;
    use crate::model::{State, Subclass, Transition};
    use crate::oracle::{check_value_preservation, SampleProfile};
    use crate::poly::int;

    fn chain(succ: &[&[usize]]) -> WpMdp {
        // States 0..k are internal, then fin, then fail.
        let k = succ.len();
        let mut m = WpMdp::new("chain", Subclass::TpMdp);
        for i in 0..k {
            m.add_state(State::new(format!("s{i}")));
        }
        m.add_state(State::target("fin", int(1)));
        m.add_state(State::target("fail", int(0)));
        for (i, ts) in succ.iter().enumerate() {
            m.add_choice(i, "a", ts.iter().map(|&t| Transition::free(t)).collect());
        }
        m
    }

    /// Classes from the pairwise definition, using the graph-level
    /// almost-sure analysis for every candidate `z`.
    fn brute_force(m: &WpMdp) -> Vec<Vec<usize>> {
        let g = MdpGraph::build(m);
        let n = m.states.len();
        let as_sets: Vec<Vec<bool>> = (0..n)
            .map(|z| {
                let mut goal = vec![false; g.num_vertices()];
                goal[z] = true;
                almost_sure_set(&g, &goal)
            })
            .collect();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for u in 0..n {
            let found = classes.iter_mut().find(|cl| {
                let w = cl[0];
                (0..n).any(|z| !m.states[z].is_target() && as_sets[z][u] && as_sets[z][w])
            });
            match found {
                Some(cl) => cl.push(u),
                None => classes.push(vec![u]),
            }
        }
        classes
    }

    #[test]
    fn diamond_collapses_onto_join() {
        // s0 -> {s1, s2}; s1 -> {s3}; s2 -> {s3}; s3 -> {fin, fail}.
        let m = chain(&[&[1, 2], &[3], &[3], &[4, 5]]);
        let p = mc_equiv_classes(&m).unwrap();
        assert_eq!(p.classes, vec![vec![0, 1, 2, 3], vec![4], vec![5]]);
        assert_eq!(p.exits[0], Some(3));
        assert!(p.diagnostics.is_empty());
        let (r, map) = mc_collapse(&m, &p);
        assert_eq!(r.num_states(), 3);
        assert_eq!(r.states[0].name, "s3");
        let rep = check_value_preservation(&m, &r, &map, 20, 7, SampleProfile::Uniform).unwrap();
        assert!(rep.ok(), "{rep:?}");
    }

    #[test]
    fn independent_branches_stay_apart() {
        // s0 -> {s1, s2}; s1 -> {fin, fail}; s2 -> {fin, s1, fail}.
        let m = chain(&[&[1, 2], &[3, 4], &[3, 1, 4]]);
        let p = mc_equiv_classes(&m).unwrap();
        assert_eq!(p.classes.len(), 5);
    }

    #[test]
    fn self_loops_are_ignored() {
        let m = chain(&[&[0, 1], &[1, 2, 3]]);
        let p = mc_equiv_classes(&m).unwrap();
        assert_eq!(p.classes[0], vec![0, 1]);
        assert_eq!(p.exits[0], Some(1));
    }

    #[test]
    fn matches_pairwise_definition() {
        let shapes: Vec<Vec<&[usize]>> = vec![
            vec![&[1, 2], &[3], &[3], &[4, 5]],
            vec![&[1, 2], &[0, 3], &[3], &[4, 5]],
            vec![&[1], &[2, 0], &[4, 5], &[0, 4]],
            vec![&[1, 2], &[2, 5], &[1, 6], &[0, 4], &[3, 6, 5]],
        ];
        for shape in shapes {
            let m = chain(&shape);
            let p = mc_equiv_classes(&m).unwrap();
            assert_eq!(p.classes, brute_force(&m), "{shape:?}");
            let (r, map) = mc_collapse(&m, &p);
            let rep = check_value_preservation(&m, &r, &map, 10, 1, SampleProfile::Uniform).unwrap();
            assert!(rep.ok(), "{shape:?}: {rep:?}");
        }
    }

    #[test]
    fn rejects_mdps_and_extremal_states() {
        let mut m = chain(&[&[1], &[2, 3]]);
        m.add_choice(0, "b", vec![Transition::free(2)]);
        assert!(mc_equiv_classes(&m).is_err());
        // s0 reaches fin almost surely.
        let m = chain(&[&[1], &[2]]);
        assert!(matches!(mc_equiv_classes(&m), Err(ModelError::Precondition(_))));
    }
}
