//! Encoding of "`v` is not never-worse than `W`" as an existential formula
//! over the reals: it is satisfiable iff some graph-preserving valuation
//! gives `v` a strictly larger value than every vertex of `W`.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::analysis::{mec_decomposition, value0_vertices};
use crate::deweight::{deweight_pmdp, DeweightError};
use crate::graph::{MdpGraph, VertexId};
use crate::model::{normalize_targets, validate_model, ModelError, WpMdp};
use crate::poly::{Polynomial, Rational};

#[derive(Debug, Error)]
pub enum EtrError {
    #[error("the set W must not be empty")]
    EmptyW,
    #[error("vertex {0:?} does not exist in the model")]
    UnknownVertex(VertexId),
    #[error("end component through state `{0}` with value possibly above 0; quotient end components first")]
    EndComponent(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Deweight(#[from] DeweightError),
}

/// Real-valued term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Num(Rational),
    Add(Vec<Term>),
    Mul(Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Eq(Term, Term),
    Ge(Term, Term),
    Gt(Term, Term),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

/// Which part of the query a conjunct belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Targets,
    ValueZero,
    Player,
    Nature,
    GraphPreserving,
    Goal,
}

impl Group {
    fn describe(self) -> &'static str {
        match self {
            Group::Targets => "target values",
            Group::ValueZero => "vertices that cannot reach fin",
            Group::Player => "optimality at player states",
            Group::Nature => "expectation at nature vertices",
            Group::GraphPreserving => "graph-preserving valuation",
            Group::Goal => "v beats every w in W",
        }
    }
}

/// An encoded query together with the model it speaks about.
#[derive(Debug, Clone)]
pub struct EtrQuery {
    /// The non-weighted parametric model behind the formula.
    pub model: WpMdp,
    /// True when every parameter was synthesised for a single transition of
    /// a trivially parametric input.
    pub synthesized: bool,
    /// Solver name of each parameter of `model`.
    pub param_vars: Vec<String>,
    /// Solver name of each vertex of `model`'s graph.
    pub vertex_vars: Vec<String>,
    pub v: usize,
    pub w: Vec<usize>,
    pub clauses: Vec<(Group, Formula)>,
}

fn poly_term(p: &Polynomial, param_vars: &[String]) -> Term {
    let mut sum = Vec::new();
    for (mono, c) in p.terms().iter().rev() {
        let mut factors = Vec::new();
        if !c.is_one() || mono.is_one() {
            factors.push(Term::Num(c.clone()));
        }
        for (i, &e) in mono.exponents().iter().enumerate() {
            for _ in 0..e {
                factors.push(Term::Var(param_vars[i].clone()));
            }
        }
        sum.push(if factors.len() == 1 { factors.pop().unwrap() } else { Term::Mul(factors) });
    }
    match sum.len() {
        0 => Term::Num(Rational::zero()),
        1 => sum.pop().unwrap(),
        _ => Term::Add(sum),
    }
}

fn product(a: Term, b: Term) -> Term {
    match (a, b) {
        (Term::Num(c), t) | (t, Term::Num(c)) if c.is_one() => t,
        (Term::Mul(mut xs), t) => {
            xs.push(t);
            Term::Mul(xs)
        }
        (a, b) => Term::Mul(vec![a, b]),
    }
}

fn sum(mut ts: Vec<Term>) -> Term {
    match ts.len() {
        0 => Term::Num(Rational::zero()),
        1 => ts.pop().unwrap(),
        _ => Term::Add(ts),
    }
}

fn conj(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        Formula::And(fs)
    }
}

fn disj(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.pop().unwrap()
    } else {
        Formula::Or(fs)
    }
}

/// Builds the query for vertex `v` and set `W` of `m`. Weighted models are
/// normalised and turned into non-weighted ones first, trivially
/// parametric models get one parameter per transition. Vertex ids refer to
/// `m` and stay valid through both steps.
pub fn encode_not_nwr(m: &WpMdp, v: VertexId, w: &[VertexId]) -> Result<EtrQuery, EtrError> {
    if w.is_empty() {
        return Err(EtrError::EmptyW);
    }
    let diags = validate_model(m);
    if let Some(d) = diags.first() {
        return Err(EtrError::Invalid(d.to_string()));
    }
    let check = |id: VertexId| -> Result<(), EtrError> {
        let ok = match id {
            VertexId::State(s) => s < m.states.len(),
            VertexId::Nature(s, c) => s < m.states.len() && c < m.states[s].choices.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(EtrError::UnknownVertex(id))
        }
    };
    check(v)?;
    for &x in w {
        check(x)?;
    }
    let synthesized = m.subclass.is_trivially_parametric();
    let model = if m.subclass.is_weighted() {
        deweight_pmdp(&normalize_targets(m)?)?.0
    } else if synthesized {
        m.synthesize_parameters()
    } else {
        m.clone()
    };
    let g = MdpGraph::build(&model);
    let zero = value0_vertices(&g);
    for mec in mec_decomposition(&g).mecs {
        if let Some(&s) = mec.states.iter().find(|&&s| !zero[s]) {
            return Err(EtrError::EndComponent(model.states[s].name.clone()));
        }
    }

    let param_vars: Vec<String> = (0..model.params.len()).map(|i| format!("x{i}")).collect();
    let vertex_vars: Vec<String> = (0..g.num_vertices())
        .map(|u| match g.id(u) {
            VertexId::State(s) => format!("y_s{s}"),
            VertexId::Nature(s, c) => format!("y_n{s}_{c}"),
        })
        .collect();
    let y = |u: usize| Term::Var(vertex_vars[u].clone());
    let mut clauses = Vec::new();

    for s in 0..model.states.len() {
        if let Some(wt) = &model.states[s].target_weight {
            clauses.push((Group::Targets, Formula::Eq(y(s), Term::Num(wt.clone()))));
        }
    }
    for u in (0..g.num_vertices()).filter(|&u| zero[u] && !(g.is_state(u) && g.is_target(u))) {
        clauses.push((Group::ValueZero, Formula::Eq(y(u), Term::Num(Rational::zero()))));
    }
    for s in 0..model.states.len() {
        if zero[s] || g.is_target(s) {
            continue;
        }
        let succ = g.successors(s);
        let ge: Vec<Formula> = succ.iter().map(|&n| Formula::Ge(y(s), y(n))).collect();
        let eq: Vec<Formula> = succ.iter().map(|&n| Formula::Eq(y(s), y(n))).collect();
        clauses.push((Group::Player, conj(vec![conj(ge), disj(eq)])));
    }
    for (s, st) in model.states.iter().enumerate() {
        for (c, ch) in st.choices.iter().enumerate() {
            let n = g.nature_vertex(s, c);
            let live: Vec<(usize, &Polynomial)> =
                ch.transitions.iter().filter(|t| t.in_support()).map(|t| (t.to, t.prob.as_ref().unwrap())).collect();
            if !zero[n] {
                let rhs = sum(live.iter().map(|&(t, p)| product(poly_term(p, &param_vars), y(t))).collect());
                clauses.push((Group::Nature, Formula::Eq(y(n), rhs)));
            }
            let mut gp: Vec<Formula> = live
                .iter()
                .map(|&(_, p)| Formula::Gt(poly_term(p, &param_vars), Term::Num(Rational::zero())))
                .collect();
            gp.retain(|f| !matches!(f, Formula::Gt(Term::Num(c), _) if c.is_positive()));
            let total = live.iter().fold(Polynomial::zero(), |acc, &(_, p)| acc.add(p));
            if total.as_constant().is_none_or(|c| !c.is_one()) {
                gp.push(Formula::Eq(poly_term(&total, &param_vars), Term::Num(Rational::one())));
            }
            if !gp.is_empty() {
                clauses.push((Group::GraphPreserving, conj(gp)));
            }
        }
    }
    let vi = g.index(v);
    let wi: Vec<usize> = w.iter().map(|&x| g.index(x)).collect();
    for &x in &wi {
        clauses.push((Group::Goal, Formula::Gt(y(vi), y(x))));
    }
    Ok(EtrQuery { model, synthesized, param_vars, vertex_vars, v: vi, w: wi, clauses })
}

fn smt_num(r: &Rational) -> String {
    let lit = |n: &num_bigint::BigInt| format!("{}.0", n.abs());
    let body = if r.is_integer() { lit(r.numer()) } else { format!("(/ {} {})", lit(r.numer()), lit(r.denom())) };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn smt_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Num(r) => smt_num(r),
        Term::Add(xs) => format!("(+ {})", xs.iter().map(smt_term).collect::<Vec<_>>().join(" ")),
        Term::Mul(xs) => format!("(* {})", xs.iter().map(smt_term).collect::<Vec<_>>().join(" ")),
    }
}

fn smt_formula(f: &Formula) -> String {
    match f {
        Formula::Eq(a, b) => format!("(= {} {})", smt_term(a), smt_term(b)),
        Formula::Ge(a, b) => format!("(>= {} {})", smt_term(a), smt_term(b)),
        Formula::Gt(a, b) => format!("(> {} {})", smt_term(a), smt_term(b)),
        Formula::And(xs) => format!("(and {})", xs.iter().map(smt_formula).collect::<Vec<_>>().join(" ")),
        Formula::Or(xs) => format!("(or {})", xs.iter().map(smt_formula).collect::<Vec<_>>().join(" ")),
    }
}

fn text_term(t: &Term, nested: bool) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Num(r) => {
            let s = crate::poly::format_rational(r);
            if nested && (r.is_negative() || !r.is_integer()) {
                format!("({s})")
            } else {
                s
            }
        }
        Term::Add(xs) => {
            let s = xs.iter().map(|x| text_term(x, false)).collect::<Vec<_>>().join(" + ");
            if nested {
                format!("({s})")
            } else {
                s
            }
        }
        Term::Mul(xs) => xs.iter().map(|x| text_term(x, true)).collect::<Vec<_>>().join("*"),
    }
}

fn text_formula(f: &Formula, nested: bool) -> String {
    let wrap = |s: String| if nested { format!("({s})") } else { s };
    match f {
        Formula::Eq(a, b) => format!("{} = {}", text_term(a, false), text_term(b, false)),
        Formula::Ge(a, b) => format!("{} >= {}", text_term(a, false), text_term(b, false)),
        Formula::Gt(a, b) => format!("{} > {}", text_term(a, false), text_term(b, false)),
        Formula::And(xs) => wrap(xs.iter().map(|x| text_formula(x, true)).collect::<Vec<_>>().join(" and ")),
        Formula::Or(xs) => wrap(xs.iter().map(|x| text_formula(x, true)).collect::<Vec<_>>().join(" or ")),
    }
}

impl EtrQuery {
    fn variable_comments(&self) -> Vec<(String, String)> {
        let g = MdpGraph::build(&self.model);
        let mut out: Vec<(String, String)> =
            self.param_vars.iter().zip(&self.model.params).map(|(v, p)| (v.clone(), p.clone())).collect();
        for (u, var) in self.vertex_vars.iter().enumerate() {
            let what = match g.id(u) {
                VertexId::State(s) => self.model.states[s].name.clone(),
                VertexId::Nature(s, c) => {
                    format!("{}:{}", self.model.states[s].name, self.model.states[s].choices[c].action)
                }
            };
            out.push((var.clone(), what));
        }
        out
    }

    /// SMT-LIB 2 script in the `QF_NRA` logic ending in `(check-sat)` and
    /// `(get-model)`.
    pub fn to_smtlib(&self) -> String {
        let mut out = String::from("(set-logic QF_NRA)\n");
        for (var, what) in self.variable_comments() {
            out.push_str(&format!("(declare-fun {var} () Real) ; {what}\n"));
        }
        let mut last = None;
        for (group, f) in &self.clauses {
            if last != Some(*group) {
                out.push_str(&format!("; {}\n", group.describe()));
                last = Some(*group);
            }
            out.push_str(&format!("(assert {})\n", smt_formula(f)));
        }
        out.push_str("(check-sat)\n(get-model)\n");
        out
    }

    /// The same formula as readable infix text, one conjunct per line.
    pub fn to_text(&self) -> String {
        let vars: Vec<String> = self.variable_comments().into_iter().map(|(v, _)| v).collect();
        let mut out = format!("exists {} :\n", vars.join(", "));
        let lines: Vec<String> = self.clauses.iter().map(|(_, f)| format!("  {}", text_formula(f, false))).collect();
        out.push_str(&lines.join(" and\n"));
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn parametric_sample_query() {
        let m = samples::parametric();
        let p = m.state_index("p").unwrap();
        let q = m.state_index("q").unwrap();
        let query = encode_not_nwr(&m, VertexId::State(p), &[VertexId::State(q)]).unwrap();
        let smt = query.to_smtlib();
        assert!(smt.starts_with("(set-logic QF_NRA)\n"));
        assert!(smt.ends_with("(check-sat)\n(get-model)\n"));
        assert!(smt.contains(&format!("(assert (> y_s{p} y_s{q}))")), "{smt}");
        let text = query.to_text();
        assert!(text.starts_with("exists x0"), "{text}");
        assert!(text.contains(&format!("y_s{p} > y_s{q}")));
    }

    #[test]
    fn tp_inputs_get_one_parameter_per_transition() {
        let m = samples::trivial();
        let transitions: usize = m.states.iter().flat_map(|s| &s.choices).map(|c| c.transitions.len()).sum();
        let query = encode_not_nwr(&m, VertexId::State(0), &[VertexId::State(1)]).unwrap();
        assert!(query.synthesized);
        assert_eq!(query.param_vars.len(), transitions);
    }

    #[test]
    fn weighted_inputs_are_deweighted() {
        let m = samples::weighted_parametric();
        let p = m.state_index("p").unwrap();
        let q = m.state_index("q").unwrap();
        let query = encode_not_nwr(&m, VertexId::State(q), &[VertexId::State(p)]).unwrap();
        assert!(!query.model.subclass.is_weighted());
        assert_eq!(query.v, q);
    }

    #[test]
    fn errors() {
        let m = samples::parametric();
        assert!(matches!(encode_not_nwr(&m, VertexId::State(0), &[]), Err(EtrError::EmptyW)));
        assert!(matches!(
            encode_not_nwr(&m, VertexId::State(99), &[VertexId::State(0)]),
            Err(EtrError::UnknownVertex(_))
        ));
        let mut cyc = samples::trivial();
        let s = cyc.state_index("q").unwrap();
        cyc.add_choice(s, "stay", vec![crate::model::Transition::free(s)]);
        assert!(matches!(
            encode_not_nwr(&cyc, VertexId::State(s), &[VertexId::State(s)]),
            Err(EtrError::EndComponent(_))
        ));
    }

    #[test]
    fn size_is_polynomial() {
        // Ladder of k states, two choices each; the formula grows within
        // the |S|^2 |A|^2 |delta| envelope.
        for k in [2usize, 4, 8, 16] {
            let mut m = WpMdp::new("ladder", crate::model::Subclass::TpMdp);
            for i in 0..k {
                m.add_state(crate::model::State::new(format!("s{i}")));
            }
            let fin = m.add_state(crate::model::State::target("fin", crate::poly::int(1)));
            let fail = m.add_state(crate::model::State::target("fail", crate::poly::int(0)));
            for i in 0..k {
                let next = if i + 1 < k { i + 1 } else { fin };
                m.add_choice(i, "a", vec![crate::model::Transition::free(next), crate::model::Transition::free(fail)]);
                m.add_choice(i, "b", vec![crate::model::Transition::free(fin), crate::model::Transition::free(fail)]);
            }
            let q = encode_not_nwr(&m, VertexId::State(0), &[VertexId::State(1)]).unwrap();
            let s = m.num_states();
            let bound = 64 * s * s * 2 * 2 * 2;
            assert!(q.to_smtlib().len() <= bound, "k={k}: {} > {bound}", q.to_smtlib().len());
        }
    }
}
