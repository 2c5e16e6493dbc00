//! The bipartite vertex graph of a model: states on one side, nature
//! vertices (state-choice pairs) on the other.

use num_traits::Signed;

use crate::model::WpMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    State(usize),
    /// `(state, local choice index)`.
    Nature(usize, usize),
}

/// Dense vertex numbering: states first (`0..n`), then nature vertices in
/// state order. An edge `s -> (s,c)` exists iff the choice reaches some
/// state other than `fail` with a probability that is not syntactically
/// zero; an edge `(s,c) -> t` exists iff that probability is not
/// syntactically zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpGraph {
    num_states: usize,
    nature: Vec<(usize, usize)>,
    nature_offset: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    target: Vec<bool>,
    positive_target: Vec<bool>,
    fail: Option<usize>,
    fin: Option<usize>,
}

impl MdpGraph {
    pub fn build(m: &WpMdp) -> MdpGraph {
        let n = m.states.len();
        let fail = m.fail();
        let mut nature = Vec::new();
        let mut nature_offset = Vec::with_capacity(n + 1);
        for (s, st) in m.states.iter().enumerate() {
            nature_offset.push(n + nature.len());
            for c in 0..st.choices.len() {
                nature.push((s, c));
            }
        }
        nature_offset.push(n + nature.len());
        let total = n + nature.len();
        let mut succ = vec![Vec::new(); total];
        for (s, st) in m.states.iter().enumerate() {
            for (c, ch) in st.choices.iter().enumerate() {
                let v = nature_offset[s] + c;
                let mut outs: Vec<usize> = ch.support().collect();
                outs.sort_unstable();
                outs.dedup();
                if outs.iter().any(|&t| Some(t) != fail) {
                    succ[s].push(v);
                }
                succ[v] = outs;
            }
        }
        let mut pred = vec![Vec::new(); total];
        for (v, outs) in succ.iter().enumerate() {
            for &u in outs {
                pred[u].push(v);
            }
        }
        let target: Vec<bool> = m.states.iter().map(|s| s.is_target()).collect();
        let positive_target: Vec<bool> =
            m.states.iter().map(|s| s.target_weight.as_ref().is_some_and(|w| w.is_positive())).collect();
        let fin = m.fin().filter(|_| !m.subclass.is_weighted());
        MdpGraph { num_states: n, nature, nature_offset, succ, pred, target, positive_target, fail, fin }
    }

    pub fn num_vertices(&self) -> usize {
        self.succ.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_nature(&self) -> usize {
        self.nature.len()
    }

    pub fn is_state(&self, v: usize) -> bool {
        v < self.num_states
    }

    pub fn id(&self, v: usize) -> VertexId {
        if v < self.num_states {
            VertexId::State(v)
        } else {
            let (s, c) = self.nature[v - self.num_states];
            VertexId::Nature(s, c)
        }
    }

    pub fn index(&self, id: VertexId) -> usize {
        match id {
            VertexId::State(s) => s,
            VertexId::Nature(s, c) => {
                let v = self.nature_offset[s] + c;
                assert!(v < self.nature_offset[s + 1], "choice {} of state {} out of range", c, s);
                v
            }
        }
    }

    /// Vertex index of choice `c` of state `s`.
    pub fn nature_vertex(&self, s: usize, c: usize) -> usize {
        self.index(VertexId::Nature(s, c))
    }

    /// Owning state of a nature vertex.
    pub fn owner(&self, v: usize) -> usize {
        self.nature[v - self.num_states].0
    }

    /// All nature vertices of state `s`, including those without an incoming edge.
    pub fn choices_of(&self, s: usize) -> std::ops::Range<usize> {
        self.nature_offset[s]..self.nature_offset[s + 1]
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn is_target(&self, s: usize) -> bool {
        s < self.num_states && self.target[s]
    }

    pub fn is_positive_target(&self, s: usize) -> bool {
        s < self.num_states && self.positive_target[s]
    }

    pub fn fail(&self) -> Option<usize> {
        self.fail
    }

    /// The weight-1 target of a non-weighted model.
    pub fn fin(&self) -> Option<usize> {
        self.fin
    }

    /// Removes the edge from a state to one of its nature vertices. The
    /// nature vertex keeps its outgoing edges, so its value is unaffected.
    pub fn detach_choice(&mut self, v: usize) {
        let s = self.owner(v);
        self.succ[s].retain(|&x| x != v);
        self.pred[v].retain(|&x| x != s);
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(v, outs)| outs.iter().map(move |&u| (v, u)))
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(|s| s.len()).sum()
    }

    /// Every vertex from which some vertex in `goal` is reachable.
    pub fn backward_reachable(&self, goal: &[bool], blocked: Option<&[bool]>) -> Vec<bool> {
        let mut seen = vec![false; self.num_vertices()];
        let mut stack = Vec::new();
        for (v, &g) in goal.iter().enumerate() {
            if g && !blocked.is_some_and(|b| b[v]) {
                seen[v] = true;
                stack.push(v);
            }
        }
        while let Some(v) = stack.pop() {
            for &u in &self.pred[v] {
                if !seen[u] && !blocked.is_some_and(|b| b[u]) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }

    /// Vertices that can reach a target of positive weight.
    pub fn reaches_positive_target(&self) -> Vec<bool> {
        let mut goal = vec![false; self.num_vertices()];
        for s in 0..self.num_states {
            goal[s] = self.positive_target[s];
        }
        self.backward_reachable(&goal, None)
    }
}

/// Builds the analysis graph of a model.
pub fn build_graph(m: &WpMdp) -> MdpGraph {
    MdpGraph::build(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{State, Subclass, Transition};
    use crate::poly::{int, Polynomial};
    use crate::samples;

    #[test]
    fn weighted_parametric_vertices_and_edges() {
        let m = samples::weighted_parametric();
        let g = build_graph(&m);
        assert_eq!(g.num_states(), 5);
        assert_eq!(g.num_nature(), 3);
        let q = m.state_index("q").unwrap();
        let qb = g.nature_vertex(q, 1);
        let mut names: Vec<&str> = g.successors(qb).iter().map(|&s| m.states[s].name.as_str()).collect();
        names.sort();
        assert_eq!(names, vec!["0", "4"]);
        let p = m.state_index("p").unwrap();
        assert_eq!(g.successors(p), &[g.nature_vertex(p, 0)]);
        assert_eq!(g.successors(q).len(), 2);
        for (a, b) in g.edges() {
            assert_ne!(g.is_state(a), g.is_state(b), "graph must be bipartite");
        }
    }

    #[test]
    fn fail_only_choice_has_no_incoming_edge() {
        let m = samples::trivial();
        let g = build_graph(&m);
        let p = m.state_index("p").unwrap();
        assert!(g.successors(p).is_empty());
        let pa = g.nature_vertex(p, 0);
        assert_eq!(g.successors(pa), &[m.state_index("fail").unwrap()]);
    }

    #[test]
    fn syntactic_zero_is_not_an_edge() {
        let mut m = WpMdp::new("z", Subclass::PMdp);
        let s = m.add_state(State::new("s"));
        let fin = m.add_state(State::target("fin", int(1)));
        let fail = m.add_state(State::target("fail", int(0)));
        m.add_choice(
            s,
            "a",
            vec![
                Transition { to: fin, prob: Some(Polynomial::one()) },
                Transition { to: fail, prob: Some(Polynomial::zero()) },
            ],
        );
        let g = build_graph(&m);
        assert_eq!(g.successors(g.nature_vertex(s, 0)), &[fin]);
    }

    #[test]
    fn deterministic() {
        let m = samples::weighted_parametric();
        assert_eq!(build_graph(&m), build_graph(&m));
    }
}
