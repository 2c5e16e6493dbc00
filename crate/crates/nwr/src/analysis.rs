//! Valuation-independent graph computations: extremal-value vertices, end
//! components, essential sets and almost-sure reachability.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::graph::MdpGraph;
use crate::model::{ModelError, WpMdp};
use crate::quotient::{quotient, ReductionMap};

/// Vertices with no path to a target of positive weight (for non-weighted
/// models: no path to `fin`). Their value is 0 under every valuation.
pub fn value0_vertices(g: &MdpGraph) -> Vec<bool> {
    g.reaches_positive_target().into_iter().map(|r| !r).collect()
}

/// Vertices from which some strategy reaches a vertex of `goal` with
/// probability one under every graph-preserving valuation. Goal vertices are
/// treated as absorbing.
pub fn almost_sure_set(g: &MdpGraph, goal: &[bool]) -> Vec<bool> {
    let n = g.num_vertices();
    let mut region = vec![true; n];
    loop {
        // Nature vertices whose successors all stay inside the region.
        let safe: Vec<bool> = (0..n)
            .map(|v| g.is_state(v) || (!g.successors(v).is_empty() && g.successors(v).iter().all(|&u| region[u])))
            .collect();
        let mut next = vec![false; n];
        let mut stack = Vec::new();
        for v in 0..n {
            if goal[v] {
                next[v] = true;
                stack.push(v);
            }
        }
        while let Some(v) = stack.pop() {
            for &p in g.predecessors(v) {
                if next[p] || goal[p] || !region[p] {
                    continue;
                }
                if g.is_state(p) || safe[p] {
                    next[p] = true;
                    stack.push(p);
                }
            }
        }
        if next == region {
            return region;
        }
        region = next;
    }
}

/// Vertices of value 1 under every graph-preserving valuation.
///
/// # Panics
/// If the model has no `fin` target (weighted models).
pub fn value1_vertices(g: &MdpGraph) -> Vec<bool> {
    let fin = g.fin().expect("value-1 analysis needs a non-weighted model");
    let mut goal = vec![false; g.num_vertices()];
    goal[fin] = true;
    almost_sure_set(g, &goal)
}

fn require_non_weighted(m: &WpMdp) -> Result<(usize, usize), ModelError> {
    if m.subclass.is_weighted() {
        return Err(ModelError::WrongSubclass { expected: "a non-weighted", got: m.subclass.as_str() });
    }
    match (m.fin(), m.fail()) {
        (Some(fin), Some(fail)) => Ok((fin, fail)),
        _ => Err(ModelError::Precondition("model needs both fin and fail targets".into())),
    }
}

/// Merges every value-1 state into `fin` and every value-0 state into
/// `fail`. Transitions into the merged sinks are coalesced and choices that
/// can only reach `fail` are removed.
pub fn contract_extremal(m: &WpMdp) -> Result<(WpMdp, ReductionMap), ModelError> {
    let (fin, fail) = require_non_weighted(m)?;
    let g = MdpGraph::build(m);
    let v0 = value0_vertices(&g);
    let v1 = value1_vertices(&g);
    let class_of: Vec<usize> = (0..m.states.len())
        .map(|s| {
            if v1[s] {
                fin
            } else if v0[s] {
                fail
            } else {
                s
            }
        })
        .collect();
    let (mut out, mut map) = quotient(m, &class_of, &BTreeMap::new(), false);
    let new_fail = map.state_map[fail];
    for (r, st) in out.states.iter_mut().enumerate() {
        let mut keep = Vec::new();
        let mut origins = Vec::new();
        for (k, ch) in st.choices.drain(..).enumerate() {
            if ch.support().any(|t| t != new_fail) {
                keep.push(ch);
                origins.push(map.choice_origin[r][k]);
            }
        }
        st.choices = keep;
        map.choice_origin[r] = origins;
    }
    Ok((out, map))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mec {
    pub states: Vec<usize>,
    /// `(state, choice)` pairs of the end component.
    pub choices: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MecDecomposition {
    pub mecs: Vec<Mec>,
    /// Class id per state: MECs take ids `0..mecs.len()`, every other state
    /// gets its own id above that.
    pub class_of: Vec<usize>,
}

/// Maximal end components by repeated SCC refinement.
pub fn mec_decomposition(g: &MdpGraph) -> MecDecomposition {
    let n = g.num_states();
    let mut active: Vec<bool> = (0..n).map(|s| !g.is_target(s)).collect();
    let mut allowed: Vec<Vec<usize>> =
        (0..n).map(|s| g.choices_of(s).filter(|&v| !g.successors(v).is_empty()).collect()).collect();
    let scc_id = loop {
        let mut dg: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
        for _ in 0..n {
            dg.add_node(());
        }
        for s in 0..n {
            if !active[s] {
                continue;
            }
            for &v in &allowed[s] {
                for &t in g.successors(v) {
                    if active[t] {
                        dg.add_edge(NodeIndex::new(s), NodeIndex::new(t), ());
                    }
                }
            }
        }
        let mut scc_id = vec![usize::MAX; n];
        for (i, comp) in tarjan_scc(&dg).into_iter().enumerate() {
            for node in comp {
                scc_id[node.index()] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !active[s] {
                continue;
            }
            let before = allowed[s].len();
            allowed[s].retain(|&v| g.successors(v).iter().all(|&t| active[t] && scc_id[t] == scc_id[s]));
            if allowed[s].len() != before {
                changed = true;
            }
            if allowed[s].is_empty() {
                active[s] = false;
                changed = true;
            }
        }
        if !changed {
            break scc_id;
        }
    };
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for s in 0..n {
        if active[s] {
            groups.entry(scc_id[s]).or_default().push(s);
        }
    }
    let mut mecs: Vec<Mec> = groups
        .into_values()
        .map(|states| {
            let choices =
                states.iter().flat_map(|&s| allowed[s].iter().map(move |&v| (s, v - g.choices_of(s).start))).collect();
            Mec { states, choices }
        })
        .collect();
    mecs.sort_by_key(|m| m.states[0]);
    let mut class_of = vec![usize::MAX; n];
    for (i, mec) in mecs.iter().enumerate() {
        for &s in &mec.states {
            class_of[s] = i;
        }
    }
    let mut next = mecs.len();
    for c in class_of.iter_mut() {
        if *c == usize::MAX {
            *c = next;
            next += 1;
        }
    }
    MecDecomposition { mecs, class_of }
}

/// Collapses every maximal end component into a single state. Choices of
/// the component are kept per member, with successors inside the component
/// removed; choices left without successors disappear.
pub fn mec_quotient(m: &WpMdp) -> Result<(WpMdp, ReductionMap), ModelError> {
    if !m.subclass.is_trivially_parametric() {
        return Err(ModelError::WrongSubclass { expected: "a trivially parametric", got: m.subclass.as_str() });
    }
    let g = MdpGraph::build(m);
    let dec = mec_decomposition(&g);
    Ok(quotient(m, &dec.class_of, &BTreeMap::new(), true))
}

/// True iff every path from a vertex of `u` to a positive-weight target
/// passes through a vertex of `w`.
pub fn is_essential(g: &MdpGraph, u: &[usize], w: &[usize]) -> bool {
    let mut blocked = vec![false; g.num_vertices()];
    for &x in w {
        blocked[x] = true;
    }
    let mut seen = vec![false; g.num_vertices()];
    let mut stack: Vec<usize> = u.iter().copied().filter(|&x| !blocked[x]).collect();
    for &x in &stack {
        seen[x] = true;
    }
    while let Some(v) = stack.pop() {
        if g.is_positive_target(v) {
            return false;
        }
        for &x in g.successors(v) {
            if !seen[x] && !blocked[x] {
                seen[x] = true;
                stack.push(x);
            }
        }
    }
    true
}

/// True iff every vertex of `u` becomes value-1 once the states of `w` are
/// made the only positive targets.
pub fn almost_sure_reach(g: &MdpGraph, u: &[usize], w: &[usize]) -> bool {
    let mut goal = vec![false; g.num_vertices()];
    for &x in w {
        goal[x] = true;
    }
    let set = almost_sure_set(g, &goal);
    u.iter().all(|&x| set[x])
}
