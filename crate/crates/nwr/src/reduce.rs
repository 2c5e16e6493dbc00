//! Action pruning and equivalence collapsing driven by the
//! under-approximation graph, and the outer reduction pipeline.

use std::collections::BTreeMap;
use std::time::Instant;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{almost_sure_set, contract_extremal, is_essential, mec_decomposition, mec_quotient};
use crate::graph::MdpGraph;
use crate::model::{ModelError, WpMdp};
use crate::quotient::{quotient, ReductionMap};
use crate::report::{IterationPoint, PruneRecord, PruneRule, ReductionReport, StageCounts};
use crate::ua::{UaOptions, UnderApproxGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Maximum passes of the pruning loop per outer iteration; `None` is unbounded.
    pub inner_max: Option<usize>,
    pub outer_max: usize,
    /// Skip pruning on the first outer iteration.
    pub skip_first_outer_inner: bool,
    pub enable_superset_membership_edges: bool,
    /// Add `vE -> {v}` for nature vertices with a single successor.
    pub deterministic_nature_edges: bool,
    /// Keep the under-approximation edges of every outer iteration.
    pub record_trace: bool,
}

impl PruneConfig {
    /// At most 17 outer iterations, 3 pruning passes each, no pruning on the first.
    pub fn setup1() -> Self {
        PruneConfig {
            inner_max: Some(3),
            outer_max: 17,
            skip_first_outer_inner: true,
            enable_superset_membership_edges: false,
            deterministic_nature_edges: true,
            record_trace: false,
        }
    }

    /// Three outer iterations of collapsing only.
    pub fn setup2() -> Self {
        PruneConfig { inner_max: Some(0), outer_max: 3, ..Self::setup1() }
    }

    fn ua_options(&self) -> UaOptions {
        UaOptions {
            membership_edges: self.enable_superset_membership_edges,
            deterministic_nature_edges: self.deterministic_nature_edges,
        }
    }
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self::setup1()
    }
}

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Records `U -> W` if every path from `U` to `fin` meets the least
/// fixpoint of `f_W`.
pub fn infer_essential(ua: &mut UnderApproxGraph, g: &MdpGraph, u: &[usize], w: &[usize]) -> bool {
    let d = ua.lfp_f(w);
    if is_essential(g, u, &d) {
        ua.add_edge(u, w);
        true
    } else {
        false
    }
}

/// Records `U -> W` if some `w ∈ W` almost surely reaches the set of states
/// that `U` reaches in the under-approximation.
pub fn infer_almost_sure(ua: &mut UnderApproxGraph, g: &MdpGraph, u: &[usize], w: &[usize]) -> bool {
    let start = ua.add_node(u);
    let reach = ua.forward(start);
    let mut goal = vec![false; g.num_vertices()];
    for s in 0..g.num_states() {
        goal[s] = reach[ua.singleton(s)];
    }
    let set = almost_sure_set(g, &goal);
    if w.iter().any(|&x| set[x]) {
        ua.add_edge(u, w);
        true
    } else {
        false
    }
}

/// Result of running the pruning loop on one model.
#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub model: WpMdp,
    pub map: ReductionMap,
    pub log: Vec<PruneRecord>,
    pub passes: usize,
}

/// Removes every choice `(s,c)` shown never better than the remaining
/// choices of `s`, trying the graph query, then the essential-set rule,
/// then the almost-sure rule. Repeats until the graph stops growing or
/// `inner_max` passes were made. `g` must be the graph of `m`; pruned
/// choices are detached from it.
pub fn prune_actions(
    m: &WpMdp,
    ua: &mut UnderApproxGraph,
    g: &mut MdpGraph,
    cfg: &PruneConfig,
    outer_iteration: usize,
) -> Result<PruneOutcome, ReduceError> {
    if !mec_decomposition(g).mecs.is_empty() {
        return Err(ReduceError::Precondition("model still has end components; quotient them first".into()));
    }
    let mut log = Vec::new();
    let mut passes = 0;
    loop {
        if cfg.inner_max.is_some_and(|max| passes >= max) {
            break;
        }
        passes += 1;
        let before = (ua.num_nodes(), ua.num_edges());
        for s in 0..g.num_states() {
            if g.is_target(s) {
                continue;
            }
            let initial: Vec<usize> = g.successors(s).to_vec();
            for &c in &initial {
                let current = g.successors(s);
                if !current.contains(&c) {
                    continue;
                }
                let w: Vec<usize> = current.iter().copied().filter(|&x| x != c).collect();
                if w.is_empty() {
                    continue;
                }
                let u = [c];
                let rule = if ua.query(&u, &w) {
                    PruneRule::Query
                } else if infer_essential(ua, g, &u, &w) {
                    PruneRule::Essential
                } else if infer_almost_sure(ua, g, &u, &w) {
                    PruneRule::AlmostSure
                } else {
                    continue;
                };
                let local = c - g.choices_of(s).start;
                g.detach_choice(c);
                log.push(PruneRecord {
                    outer_iteration,
                    state: m.states[s].name.clone(),
                    action: m.states[s].choices[local].action.clone(),
                    choice: local,
                    rule,
                });
            }
        }
        if (ua.num_nodes(), ua.num_edges()) == before {
            break;
        }
    }
    let (model, map) = drop_detached(m, g);
    Ok(PruneOutcome { model, map, log, passes })
}

/// Keeps exactly the choices still attached to their state in `g`.
fn drop_detached(m: &WpMdp, g: &MdpGraph) -> (WpMdp, ReductionMap) {
    let mut out = m.clone();
    let mut map = ReductionMap::identity(m);
    for (s, st) in out.states.iter_mut().enumerate() {
        let attached = g.successors(s);
        let keep: Vec<usize> = (0..st.choices.len()).filter(|&c| attached.contains(&g.nature_vertex(s, c))).collect();
        if keep.len() == st.choices.len() {
            continue;
        }
        st.choices = keep.iter().map(|&c| st.choices[c].clone()).collect();
        map.choice_origin[s] = keep.iter().map(|&c| (s, c)).collect();
    }
    (out, map)
}

/// Merges states whose singleton nodes lie on a common cycle of the
/// under-approximation graph. States reachable from `{fin}` merge into
/// `fin`, states reaching `{fail}` merge into `fail`. Successors inside a
/// merged class are dropped. Returns the number of states removed.
///
/// `m` must have the states of the model `ua` was built for (choices may
/// have been removed since).
pub fn collapse_equivalences(m: &WpMdp, ua: &UnderApproxGraph) -> (WpMdp, ReductionMap, usize) {
    let k = ua.num_nodes();
    let mut dg: DiGraph<(), ()> = DiGraph::with_capacity(k, ua.num_edges());
    for _ in 0..k {
        dg.add_node(());
    }
    let mut succ = vec![Vec::new(); k];
    let mut pred = vec![Vec::new(); k];
    for (a, b) in ua.stored_edges() {
        dg.add_edge(NodeIndex::new(a), NodeIndex::new(b), ());
        succ[a].push(b);
        pred[b].push(a);
    }
    let mut scc = vec![0; k];
    for (i, comp) in tarjan_scc(&dg).into_iter().enumerate() {
        for x in comp {
            scc[x.index()] = i;
        }
    }
    let closure = |start: usize, adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    };
    let to_fin = closure(ua.fin_node(), &succ);
    let to_fail = closure(ua.fail_node(), &pred);
    let fin = m.fin().expect("collapse needs fin");
    let fail = m.fail().expect("collapse needs fail");
    let n = m.states.len();
    let class_of: Vec<usize> = (0..n)
        .map(|s| {
            let id = ua.singleton(s);
            if s == fin || to_fin[id] {
                fin
            } else if s == fail || to_fail[id] {
                fail
            } else {
                n + scc[id]
            }
        })
        .collect();
    let (out, map) = quotient(m, &class_of, &BTreeMap::new(), true);
    let removed = n - out.num_states();
    (out, map, removed)
}

/// Under-approximation edges of one outer iteration, as vertex sets of
/// `model`'s graph.
#[derive(Debug, Clone)]
pub struct UaSnapshot {
    pub outer_iteration: usize,
    pub model: WpMdp,
    pub edges: Vec<(Vec<usize>, Vec<usize>)>,
}

#[derive(Debug, Clone)]
pub struct ReductionOutcome {
    pub model: WpMdp,
    /// From the input model to `model`.
    pub map: ReductionMap,
    pub report: ReductionReport,
    pub trace: Vec<UaSnapshot>,
}

fn preprocess(m: &WpMdp) -> Result<(WpMdp, ReductionMap), ReduceError> {
    let (a, map_a) = contract_extremal(m)?;
    let (b, map_b) = mec_quotient(&a)?;
    Ok((b, map_a.then(&map_b)))
}

/// Full pipeline on a non-weighted trivially parametric model: contract
/// extremal states, quotient end components, then repeat pruning and
/// collapsing with a fresh under-approximation graph until collapsing has
/// had no effect in two consecutive iterations. Extremal contraction and
/// the end-component quotient are re-applied at the start of every further
/// outer iteration. Markov chains always run with pruning disabled and
/// three outer iterations.
pub fn reduce(m: &WpMdp, cfg: &PruneConfig) -> Result<ReductionOutcome, ReduceError> {
    if m.subclass.is_weighted() || !m.subclass.is_trivially_parametric() {
        return Err(ModelError::WrongSubclass {
            expected: "a non-weighted trivially parametric",
            got: m.subclass.as_str(),
        }
        .into());
    }
    let mut cfg = *cfg;
    let mut notes = Vec::new();
    if m.is_chain() && cfg.inner_max != Some(0) {
        cfg.inner_max = Some(0);
        cfg.outer_max = PruneConfig::setup2().outer_max;
        notes.push("Markov chain input: pruning disabled".to_string());
    }
    let t0 = Instant::now();
    let (mut cur, mut map) = preprocess(m)?;
    let preprocessed = StageCounts::of(&cur);
    let seconds_preprocess = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let mut curve = Vec::new();
    let mut log = Vec::new();
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut merged_total = 0;
    let mut outer_done = 0;
    let mut idle_collapses = 0;
    for outer in 0..cfg.outer_max {
        if outer > 0 {
            let (next, step) = preprocess(&cur)?;
            map = map.then(&step);
            cur = next;
        }
        outer_done = outer + 1;
        let mut g = MdpGraph::build(&cur);
        let mut ua = UnderApproxGraph::new(&g, cfg.ua_options());
        let skipped = cfg.skip_first_outer_inner && outer == 0;
        let run_inner = cfg.inner_max != Some(0) && !skipped;
        let (pruned, passes, n_pruned) = if run_inner {
            let out = prune_actions(&cur, &mut ua, &mut g, &cfg, outer)?;
            let n = out.log.len();
            log.extend(out.log);
            map = map.then(&out.map);
            (out.model, out.passes, n)
        } else {
            (cur.clone(), 0, 0)
        };
        inner_total += passes;
        if cfg.record_trace {
            let edges = ua.stored_edges().map(|(a, b)| (ua.node(a).to_vec(), ua.node(b).to_vec())).collect();
            trace.push(UaSnapshot { outer_iteration: outer, model: cur.clone(), edges });
        }
        let (collapsed, cmap, merged) = collapse_equivalences(&pruned, &ua);
        map = map.then(&cmap);
        merged_total += merged;
        curve.push(IterationPoint {
            outer_iteration: outer,
            inner_passes: passes,
            pruned: n_pruned,
            merged,
            states: collapsed.num_states(),
            choices: collapsed.num_choices(),
        });
        cur = collapsed;
        idle_collapses = if merged == 0 { idle_collapses + 1 } else { 0 };
        if idle_collapses == 2 {
            break;
        }
    }
    if cur.num_states() <= 2 {
        notes.push("completely reduced".to_string());
    }
    let report = ReductionReport {
        instance: m.name.clone(),
        original: StageCounts::of(m),
        preprocessed,
        reduced: StageCounts::of(&cur),
        seconds_preprocess,
        seconds_reduce: t1.elapsed().as_secs_f64(),
        outer_iterations: outer_done,
        inner_iterations: inner_total,
        pruned_actions: log.len(),
        collapsed_states: merged_total,
        prune_log: log,
        curve,
        notes,
    };
    Ok(ReductionOutcome { model: cur, map, report, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::{State, Subclass, Transition};
    use crate::oracle::{check_value_preservation, SampleProfile};
    use crate::poly::int;

    fn base(name: &str) -> (WpMdp, usize, usize) {
        let mut m = WpMdp::new(name, Subclass::TpMdp);
        let fin = m.add_state(State::target("fin", int(1)));
        let fail = m.add_state(State::target("fail", int(0)));
        (m, fin, fail)
    }

    #[test]
    fn symmetric_two_action_state_not_pruned() {
        let (mut m, fin, fail) = base("sym");
        let s = m.add_state(State::new("s"));
        m.add_choice(s, "a", vec![Transition::free(fin), Transition::free(fail)]);
        m.add_choice(s, "b", vec![Transition::free(fin), Transition::free(fail)]);
        let mut g = build_graph(&m);
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let out = prune_actions(&m, &mut ua, &mut g, &PruneConfig::setup1(), 0).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.model, m);
    }

    #[test]
    fn dominated_detour_is_pruned() {
        // s: a -> {fin, fail}, b -> {t}; t: a -> {u}, u: a -> {fin, fail} and
        // u: b -> {s}. Choice b of s only leads back through s or into the
        // same gamble, so it is never better.
        let (mut m, fin, fail) = base("detour");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        m.add_choice(s, "a", vec![Transition::free(fin), Transition::free(fail)]);
        m.add_choice(s, "b", vec![Transition::free(t), Transition::free(fail)]);
        m.add_choice(t, "a", vec![Transition::free(s), Transition::free(fail)]);
        let mut g = build_graph(&m);
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        let out = prune_actions(&m, &mut ua, &mut g, &PruneConfig::setup1(), 0).unwrap();
        assert_eq!(out.log.len(), 1);
        assert_eq!(out.log[0].state, "s");
        assert_eq!(out.log[0].action, "b");
        assert_eq!(out.log[0].rule, PruneRule::Essential);
        let r = check_value_preservation(&m, &out.model, &out.map, 20, 1, SampleProfile::Adversarial).unwrap();
        assert!(r.ok(), "{:?}", r.violations);
    }

    #[test]
    fn prune_requires_mec_free_model() {
        let (mut m, fin, _) = base("ec");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        m.add_choice(s, "a", vec![Transition::free(t)]);
        m.add_choice(t, "a", vec![Transition::free(s)]);
        m.add_choice(t, "b", vec![Transition::free(fin)]);
        let mut g = build_graph(&m);
        let mut ua = UnderApproxGraph::new(&g, UaOptions::default());
        assert!(matches!(
            prune_actions(&m, &mut ua, &mut g, &PruneConfig::setup1(), 0),
            Err(ReduceError::Precondition(_))
        ));
    }

    #[test]
    fn fresh_graph_collapses_only_deterministic_links() {
        let (mut m, fin, fail) = base("fresh");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        let u = m.add_state(State::new("u"));
        m.add_choice(s, "a", vec![Transition::free(t)]);
        m.add_choice(t, "a", vec![Transition::free(fin), Transition::free(fail)]);
        m.add_choice(u, "a", vec![Transition::free(fin), Transition::free(fail)]);
        m.add_choice(u, "b", vec![Transition::free(s), Transition::free(fail)]);
        let g = build_graph(&m);
        let ua = UnderApproxGraph::new(&g, UaOptions::default());
        let (c, map, removed) = collapse_equivalences(&m, &ua);
        assert_eq!(removed, 1);
        assert_eq!(map.state_map[s], map.state_map[t]);
        assert_ne!(map.state_map[u], map.state_map[t]);
        let r = check_value_preservation(&m, &c, &map, 20, 2, SampleProfile::Uniform).unwrap();
        assert!(r.ok(), "{:?}", r.violations);
    }

    #[test]
    fn without_deterministic_rule_nothing_collapses() {
        let (mut m, fin, fail) = base("fresh");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        m.add_choice(s, "a", vec![Transition::free(t)]);
        m.add_choice(t, "a", vec![Transition::free(fin), Transition::free(fail)]);
        let g = build_graph(&m);
        let ua = UnderApproxGraph::new(&g, UaOptions { deterministic_nature_edges: false, ..UaOptions::default() });
        let (_, _, removed) = collapse_equivalences(&m, &ua);
        assert_eq!(removed, 0);
    }

    #[test]
    fn fully_extremal_model() {
        let (mut m, fin, fail) = base("ext");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        m.add_choice(s, "a", vec![Transition::free(fin)]);
        m.add_choice(t, "a", vec![Transition::free(fail)]);
        let out = reduce(&m, &PruneConfig::setup1()).unwrap();
        assert_eq!(out.model.num_states(), 2);
        assert!(out.report.notes.iter().any(|n| n == "completely reduced"));
        out.report.check_monotone().unwrap();
    }

    #[test]
    fn chains_never_prune() {
        let (mut m, fin, fail) = base("chain");
        let s = m.add_state(State::new("s"));
        let t = m.add_state(State::new("t"));
        m.add_choice(s, "a", vec![Transition::free(t), Transition::free(fail)]);
        m.add_choice(t, "a", vec![Transition::free(fin), Transition::free(s)]);
        let out = reduce(&m, &PruneConfig::setup1()).unwrap();
        assert_eq!(out.report.inner_iterations, 0);
        assert!(out.report.curve.iter().all(|p| p.inner_passes == 0));
    }

    #[test]
    fn reduce_rejects_weighted() {
        assert!(reduce(&crate::samples::weighted_trivial(), &PruneConfig::setup1()).is_err());
    }
}
