//! The under-approximation graph: a directed graph over vertex sets in which
//! a path from `U` to `W` certifies that `W` is never worse than `U`.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::graph::MdpGraph;

pub type NodeId = usize;

/// Which optional edge families the graph maintains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UaOptions {
    /// When a node `U` is added, also add `U -> W` for every node `W` that
    /// every singleton `{u}`, `u ∈ U`, already reaches. Expensive.
    pub membership_edges: bool,
    /// Add `vE -> {v}` for nature vertices with a single successor.
    pub deterministic_nature_edges: bool,
}

impl Default for UaOptions {
    fn default() -> Self {
        UaOptions { membership_edges: false, deterministic_nature_edges: true }
    }
}

/// Nodes are sorted vertex sets. The edges `{fail} -> n` and `n -> {fin}`
/// exist for every node `n` but are never stored; searches account for them.
#[derive(Debug, Clone)]
pub struct UnderApproxGraph {
    nodes: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, NodeId>,
    succ: Vec<Vec<NodeId>>,
    pred: Vec<Vec<NodeId>>,
    edge_set: HashSet<(NodeId, NodeId)>,
    /// Per vertex, the nodes containing it.
    containing: Vec<Vec<NodeId>>,
    singleton: Vec<NodeId>,
    fin: NodeId,
    fail: NodeId,
    opts: UaOptions,
}

impl UnderApproxGraph {
    /// Initial graph: nodes `{v}` and `vE` for every vertex, with edges
    /// `{v} -> vE` for all vertices and `vE -> {v}` for states.
    ///
    /// # Panics
    /// If the model lacks `fin` or `fail`.
    pub fn new(g: &MdpGraph, opts: UaOptions) -> Self {
        let n = g.num_vertices();
        let mut ua = UnderApproxGraph {
            nodes: Vec::new(),
            index: HashMap::new(),
            succ: Vec::new(),
            pred: Vec::new(),
            edge_set: HashSet::new(),
            containing: vec![Vec::new(); n],
            singleton: Vec::with_capacity(n),
            fin: 0,
            fail: 0,
            opts,
        };
        for v in 0..n {
            let id = ua.insert_raw(vec![v]);
            ua.singleton.push(id);
        }
        ua.fin = ua.singleton[g.fin().expect("under-approximation needs fin")];
        ua.fail = ua.singleton[g.fail().expect("under-approximation needs fail")];
        for v in 0..n {
            let out = g.successors(v);
            if out.is_empty() {
                continue;
            }
            let mut set = out.to_vec();
            set.sort_unstable();
            let ve = ua.insert_raw(set);
            let sv = ua.singleton[v];
            ua.insert_edge(sv, ve);
            if g.is_state(v) || (opts.deterministic_nature_edges && out.len() == 1) {
                ua.insert_edge(ve, sv);
            }
        }
        ua
    }

    fn insert_raw(&mut self, set: Vec<usize>) -> NodeId {
        if let Some(&id) = self.index.get(&set) {
            return id;
        }
        let id = self.nodes.len();
        for &v in &set {
            self.containing[v].push(id);
        }
        self.index.insert(set.clone(), id);
        self.nodes.push(set);
        self.succ.push(Vec::new());
        self.pred.push(Vec::new());
        id
    }

    fn insert_edge(&mut self, a: NodeId, b: NodeId) -> bool {
        if a == b || a == self.fail || b == self.fin || !self.edge_set.insert((a, b)) {
            return false;
        }
        self.succ[a].push(b);
        self.pred[b].push(a);
        true
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of stored edges (the implicit `fail`/`fin` edges are not counted).
    pub fn num_edges(&self) -> usize {
        self.edge_set.len()
    }

    pub fn node(&self, id: NodeId) -> &[usize] {
        &self.nodes[id]
    }

    pub fn node_id(&self, set: &[usize]) -> Option<NodeId> {
        let mut key = set.to_vec();
        key.sort_unstable();
        key.dedup();
        self.index.get(&key).copied()
    }

    pub fn singleton(&self, v: usize) -> NodeId {
        self.singleton[v]
    }

    pub fn fin_node(&self) -> NodeId {
        self.fin
    }

    pub fn fail_node(&self) -> NodeId {
        self.fail
    }

    /// Stored edges, in insertion order per source node.
    pub fn stored_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.succ.iter().enumerate().flat_map(|(a, bs)| bs.iter().map(move |&b| (a, b)))
    }

    /// Adds `U` with edges from its strict subsets and to its strict
    /// supersets among the existing nodes.
    ///
    /// # Panics
    /// If `set` is empty.
    pub fn add_node(&mut self, set: &[usize]) -> NodeId {
        assert!(!set.is_empty(), "under-approximation nodes are non-empty");
        let mut key = set.to_vec();
        key.sort_unstable();
        key.dedup();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let mut hits: HashMap<NodeId, usize> = HashMap::new();
        for &v in &key {
            for &other in &self.containing[v] {
                *hits.entry(other).or_insert(0) += 1;
            }
        }
        let k = key.len();
        let id = self.insert_raw(key.clone());
        let mut related: Vec<(NodeId, bool)> = hits
            .into_iter()
            .filter_map(|(other, c)| {
                let len = self.nodes[other].len();
                if c == len && len < k {
                    Some((other, true))
                } else if c == k && len > k {
                    Some((other, false))
                } else {
                    None
                }
            })
            .collect();
        related.sort_unstable();
        for (other, is_subset) in related {
            if is_subset {
                self.insert_edge(other, id);
            } else {
                self.insert_edge(id, other);
            }
        }
        if self.opts.membership_edges {
            let mut common: Option<Vec<bool>> = None;
            for &v in &key {
                let r = self.forward(self.singleton[v]);
                common = Some(match common {
                    None => r,
                    Some(c) => c.iter().zip(&r).map(|(a, b)| *a && *b).collect(),
                });
            }
            if let Some(common) = common {
                for (w, &reach) in common.iter().enumerate() {
                    if reach {
                        self.insert_edge(id, w);
                    }
                }
            }
        }
        id
    }

    /// Adds both endpoints as nodes and the edge between them. The caller
    /// asserts that `w` is never worse than `u`.
    pub fn add_edge(&mut self, u: &[usize], w: &[usize]) {
        let a = self.add_node(u);
        let b = self.add_node(w);
        self.insert_edge(a, b);
    }

    /// Nodes reachable from `start`, including the implicit edges.
    pub fn forward(&self, start: NodeId) -> Vec<bool> {
        let n = self.nodes.len();
        if start == self.fail {
            return vec![true; n];
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for x in [start, self.fin] {
            if !seen[x] {
                seen[x] = true;
                queue.push_back(x);
            }
        }
        while let Some(x) = queue.pop_front() {
            if x == self.fail {
                return vec![true; n];
            }
            for &y in &self.succ[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// Nodes from which `target` is reachable, including the implicit edges.
    pub fn backward(&self, target: NodeId) -> Vec<bool> {
        let n = self.nodes.len();
        if target == self.fin {
            return vec![true; n];
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for x in [target, self.fail] {
            if !seen[x] {
                seen[x] = true;
                queue.push_back(x);
            }
        }
        while let Some(x) = queue.pop_front() {
            if x == self.fin {
                return vec![true; n];
            }
            for &y in &self.pred[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// True iff a path leads from node `a` to node `b`.
    pub fn reaches(&self, a: NodeId, b: NodeId) -> bool {
        if a == b || a == self.fail || b == self.fin {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for x in [a, self.fin] {
            seen[x] = true;
            queue.push_back(x);
        }
        while let Some(x) = queue.pop_front() {
            if x == b || x == self.fail {
                return true;
            }
            for &y in &self.succ[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    /// True iff a path leads from `U` to `W`; both are added as nodes first.
    pub fn query(&mut self, u: &[usize], w: &[usize]) -> bool {
        let a = self.add_node(u);
        let b = self.add_node(w);
        self.reaches(a, b)
    }

    /// Least fixpoint of `D ↦ D ∪ {z | {z} reaches W ∪ D}` over vertices,
    /// computed from the empty set. Union nodes created on the way persist.
    pub fn lfp_f(&mut self, w: &[usize]) -> Vec<usize> {
        let mut d: Vec<usize> = Vec::new();
        loop {
            let mut x: Vec<usize> = w.iter().chain(&d).copied().collect();
            x.sort_unstable();
            x.dedup();
            let id = self.add_node(&x);
            let back = self.backward(id);
            let next: Vec<usize> = (0..self.singleton.len()).filter(|&z| back[self.singleton[z]]).collect();
            if next == d {
                return d;
            }
            d = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::{State, Subclass, Transition, WpMdp};
    use crate::poly::int;

    fn two_choice() -> (WpMdp, MdpGraph) {
        // s has two choices over {fin, fail} and {t}; t goes to {fin, fail}.
        let mut m = WpMdp::new("ua", Subclass::TpMdp);
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        let fin = m.add_state(State::target("fin", int(1)));
        let fail = m.add_state(State::target("fail", int(0)));
        m.add_choice(s, "a", vec![Transition::free(fin), Transition::free(fail)]);
        m.add_choice(s, "b", vec![Transition::free(t)]);
        m.add_choice(t, "a", vec![Transition::free(fin), Transition::free(fail)]);
        let g = build_graph(&m);
        (m, g)
    }

    #[test]
    fn init_rules() {
        let (_, g) = two_choice();
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let fin = [g.fin().unwrap()];
        let fail = [g.fail().unwrap()];
        for v in 0..g.num_vertices() {
            assert!(ua.query(&[v], &fin));
            assert!(ua.query(&fail, &[v]));
        }
        let s = 0;
        let se: Vec<usize> = g.successors(s).to_vec();
        assert!(ua.query(&[s], &se));
        assert!(ua.query(&se, &[s]));
        assert!(!ua.query(&fin, &fail));
    }

    #[test]
    fn reflexive_and_idempotent() {
        let (_, g) = two_choice();
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let before = (ua.num_nodes(), ua.num_edges());
        let id = ua.add_node(&[0]);
        assert_eq!((ua.num_nodes(), ua.num_edges()), before);
        assert!(ua.reaches(id, id));
    }

    #[test]
    fn subset_edge_on_add() {
        let (_, g) = two_choice();
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let x = ua.singleton(0);
        let xy = ua.add_node(&[0, 1]);
        assert!(ua.stored_edges().any(|e| e == (x, xy)));
        let y = ua.singleton(1);
        assert!(ua.stored_edges().any(|e| e == (y, xy)));
    }

    #[test]
    fn transitivity_through_added_edges() {
        let (_, g) = two_choice();
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        ua.add_edge(&[0], &[5]);
        ua.add_edge(&[5], &[6]);
        assert!(ua.query(&[0], &[6]));
        let edges = ua.num_edges();
        ua.add_edge(&[0], &[5]);
        assert_eq!(ua.num_edges(), edges);
    }

    #[test]
    fn lfp_contains_fail_and_members() {
        let (_, g) = two_choice();
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let sa = g.nature_vertex(0, 0);
        let d = ua.lfp_f(&[sa]);
        assert!(d.contains(&g.fail().unwrap()));
        assert!(d.contains(&sa));
        let all = ua.lfp_f(&[g.fin().unwrap()]);
        assert_eq!(all, (0..g.num_vertices()).collect::<Vec<_>>());
    }

    #[test]
    fn membership_rule_disabled_by_default() {
        let (_, g) = two_choice();
        let mut plain = UnderApproxGraph::new(&g, UaOptions::default());
        let mut member = UnderApproxGraph::new(&g, UaOptions { membership_edges: true, ..UaOptions::default() });
        // {t} and {(t,a)} reach each other's nature set; the union node gets
        // the membership edges only when enabled.
        let t = 1;
        let ta = g.nature_vertex(1, 0);
        let a = plain.add_node(&[t, ta]);
        let b = member.add_node(&[t, ta]);
        assert!(member.succ[b].len() > plain.succ[a].len());
    }
}
