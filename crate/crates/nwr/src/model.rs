//! Explicit-state weighted parametric MDPs and their subclasses.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{format_rational, Polynomial, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subclass {
    #[serde(rename = "wpmdp")]
    WpMdp,
    #[serde(rename = "pmdp")]
    PMdp,
    #[serde(rename = "wtpmdp")]
    WtpMdp,
    #[serde(rename = "tpmdp")]
    TpMdp,
}

impl Subclass {
    pub fn is_weighted(self) -> bool {
        matches!(self, Subclass::WpMdp | Subclass::WtpMdp)
    }

    pub fn is_trivially_parametric(self) -> bool {
        matches!(self, Subclass::WtpMdp | Subclass::TpMdp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subclass::WpMdp => "wpmdp",
            Subclass::PMdp => "pmdp",
            Subclass::WtpMdp => "wtpmdp",
            Subclass::TpMdp => "tpmdp",
        }
    }
}

/// One edge of a choice. `prob` is `None` for trivially parametric edges,
/// whose probability is left entirely to the valuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub to: usize,
    pub prob: Option<Polynomial>,
}

impl Transition {
    pub fn free(to: usize) -> Self {
        Transition { to, prob: None }
    }

    /// False iff the probability is syntactically zero.
    pub fn in_support(&self) -> bool {
        self.prob.as_ref().is_none_or(|p| !p.is_zero())
    }
}

/// A state-action pair. Choices are identified by their position in the
/// owning state's list; the action label is informational and may repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub action: String,
    pub transitions: Vec<Transition>,
}

impl Choice {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.transitions.iter().filter(|t| t.in_support()).map(|t| t.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub name: String,
    pub target_weight: Option<Rational>,
    pub choices: Vec<Choice>,
}

impl State {
    pub fn new(name: impl Into<String>) -> Self {
        State { name: name.into(), target_weight: None, choices: Vec::new() }
    }

    pub fn target(name: impl Into<String>, weight: Rational) -> Self {
        State { name: name.into(), target_weight: Some(weight), choices: Vec::new() }
    }

    pub fn is_target(&self) -> bool {
        self.target_weight.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WpMdp {
    pub name: String,
    pub subclass: Subclass,
    pub params: Vec<String>,
    pub states: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("negative target weight {weight} on state `{state}`")]
    NegativeWeight { state: String, weight: String },
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("operation requires {expected} model, got {got}")]
    WrongSubclass { expected: &'static str, got: &'static str },
    #[error("{0}")]
    Precondition(String),
}

impl WpMdp {
    pub fn new(name: impl Into<String>, subclass: Subclass) -> Self {
        WpMdp { name: name.into(), subclass, params: Vec::new(), states: Vec::new() }
    }

    pub fn add_state(&mut self, state: State) -> usize {
        self.states.push(state);
        self.states.len() - 1
    }

    pub fn add_choice(&mut self, from: usize, action: impl Into<String>, transitions: Vec<Transition>) -> usize {
        let s = &mut self.states[from];
        s.choices.push(Choice { action: action.into(), transitions });
        s.choices.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_choices(&self) -> usize {
        self.states.iter().map(|s| s.choices.len()).sum()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&i| self.states[i].is_target()).collect()
    }

    /// Targets sorted by increasing weight (ties by index).
    pub fn sorted_targets(&self) -> Vec<usize> {
        let mut t = self.targets();
        t.sort_by(|&a, &b| self.states[a].target_weight.cmp(&self.states[b].target_weight).then(a.cmp(&b)));
        t
    }

    /// The designated zero-weight sink. When several weight-0 targets exist
    /// the one named `fail` is preferred, then the lowest index.
    pub fn fail(&self) -> Option<usize> {
        let zeros: Vec<usize> = self
            .targets()
            .into_iter()
            .filter(|&t| self.states[t].target_weight.as_ref().is_some_and(|w| w.is_zero()))
            .collect();
        zeros.iter().copied().find(|&t| self.states[t].name == "fail").or(zeros.first().copied())
    }

    /// The weight-1 target of a non-weighted model.
    pub fn fin(&self) -> Option<usize> {
        self.targets().into_iter().find(|&t| self.states[t].target_weight.as_ref().is_some_and(|w| w.is_one()))
    }

    /// True iff every state has at most one choice.
    pub fn is_chain(&self) -> bool {
        self.states.iter().all(|s| s.choices.len() <= 1)
    }

    pub fn actions(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in &self.states {
            for c in &s.choices {
                if seen.insert(c.action.clone()) {
                    out.push(c.action.clone());
                }
            }
        }
        out
    }

    /// A state name not yet used, derived from `base`.
    pub fn fresh_state_name(&self, base: &str) -> String {
        let used: HashSet<&str> = self.states.iter().map(|s| s.name.as_str()).collect();
        fresh_name(base, |n| used.contains(n))
    }

    pub fn fresh_action_name(&self, base: &str) -> String {
        let used: HashSet<String> = self.actions().into_iter().collect();
        fresh_name(base, |n| used.contains(n))
    }

    /// Forgets transition polynomials, keeping only the support graph.
    pub fn to_trivially_parametric(&self) -> WpMdp {
        let mut m = self.clone();
        m.subclass = if self.subclass.is_weighted() { Subclass::WtpMdp } else { Subclass::TpMdp };
        m.params.clear();
        for s in &mut m.states {
            for c in &mut s.choices {
                c.transitions.retain(|t| t.in_support());
                for t in &mut c.transitions {
                    t.prob = None;
                }
            }
        }
        m
    }

    /// Gives every free transition its own fresh parameter so the model can
    /// be handled as an ordinary parametric model.
    pub fn synthesize_parameters(&self) -> WpMdp {
        let mut m = self.clone();
        m.subclass = if self.subclass.is_weighted() { Subclass::WpMdp } else { Subclass::PMdp };
        let mut used: HashSet<String> = m.params.iter().cloned().collect();
        for (si, s) in m.states.iter_mut().enumerate() {
            for (ci, c) in s.choices.iter_mut().enumerate() {
                for (ti, t) in c.transitions.iter_mut().enumerate() {
                    if t.prob.is_none() {
                        let name = fresh_name(&format!("p_{}_{}_{}", si, ci, ti), |n| used.contains(n));
                        used.insert(name.clone());
                        m.params.push(name);
                        t.prob = Some(Polynomial::var(m.params.len() - 1));
                    }
                }
            }
        }
        m
    }
}

fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{}_{}", base, i)).find(|n| !taken(n)).expect("unbounded")
}

/// Reports every violated model invariant. An empty list means the model is
/// well-formed.
pub fn validate_model(m: &WpMdp) -> Vec<Diagnostic> {
    let mut d = validate_structure(m);
    let zero_targets: Vec<usize> =
        m.targets().into_iter().filter(|&t| m.states[t].target_weight.as_ref().is_some_and(|w| w.is_zero())).collect();
    if zero_targets.is_empty() {
        d.push(diag("model", "no weight-0 fail target"));
    }
    if !m.subclass.is_weighted() {
        let targets = m.targets();
        let ok = targets.len() == 2 && m.fin().is_some() && zero_targets.len() == 1;
        if !ok {
            d.push(diag(
                "model",
                "non-weighted model must have exactly the targets fin (weight 1) and fail (weight 0)",
            ));
        }
    }
    let mut by_weight: BTreeMap<&Rational, Vec<&str>> = BTreeMap::new();
    for t in m.targets() {
        by_weight.entry(m.states[t].target_weight.as_ref().unwrap()).or_default().push(&m.states[t].name);
    }
    for (w, names) in by_weight {
        if names.len() > 1 {
            d.push(diag("model", &format!("targets {} share weight {}", names.join(", "), format_rational(w))));
        }
    }
    d
}

/// Structural checks that do not depend on the target normal form: index
/// ranges, sink targets, non-negative weights, polynomials versus subclass,
/// and constant rows summing to one.
pub fn validate_structure(m: &WpMdp) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let n = m.states.len();
    let mut var_use: HashMap<usize, String> = HashMap::new();
    for s in &m.states {
        if let Some(w) = &s.target_weight {
            if w.is_negative() {
                d.push(diag(&s.name, "negative target weight"));
            }
            if !s.choices.is_empty() {
                d.push(diag(&s.name, "target not a sink"));
            }
        }
        for (ci, c) in s.choices.iter().enumerate() {
            let loc = format!("{}#{}({})", s.name, ci, c.action);
            if c.transitions.is_empty() {
                d.push(diag(&loc, "choice without transitions"));
            }
            let mut seen = HashSet::new();
            for t in &c.transitions {
                if t.to >= n {
                    d.push(diag(&loc, &format!("successor index {} out of range", t.to)));
                    continue;
                }
                if !seen.insert(t.to) {
                    d.push(diag(&loc, &format!("duplicate successor {}", m.states[t.to].name)));
                }
                match (&t.prob, m.subclass.is_trivially_parametric()) {
                    (None, false) => d.push(diag(&loc, "missing transition polynomial")),
                    (Some(p), tp) => {
                        if let Some(mx) = p.max_param() {
                            if mx >= m.params.len() {
                                d.push(diag(&loc, &format!("parameter index {} out of range", mx)));
                            }
                        }
                        if tp {
                            match p.as_single_var() {
                                Some(v) => {
                                    if let Some(prev) = var_use.insert(v, loc.clone()) {
                                        d.push(diag(&loc, &format!("variable {} already used at {}", v, prev)));
                                    }
                                }
                                None => d.push(diag(&loc, "trivially parametric transition must be a single variable")),
                            }
                        }
                    }
                    (None, true) => {}
                }
            }
            let probs: Option<Vec<Rational>> =
                c.transitions.iter().map(|t| t.prob.as_ref().and_then(|p| p.as_constant())).collect();
            if let Some(ps) = probs {
                if !ps.is_empty() {
                    if ps.iter().any(|p| p.is_negative()) {
                        d.push(diag(&loc, "negative constant probability"));
                    }
                    let sum: Rational = ps.iter().cloned().sum();
                    if !sum.is_one() {
                        d.push(diag(&loc, &format!("constant row sums to {}", format_rational(&sum))));
                    }
                }
            }
        }
    }
    d
}

fn diag(location: &str, message: &str) -> Diagnostic {
    Diagnostic { location: location.to_string(), message: message.to_string() }
}

/// Brings targets into normal form: weights pairwise distinct (equal-weight
/// targets are redirected to one representative by a probability-1
/// transition) and a weight-0 `fail` target present.
pub fn normalize_targets(m: &WpMdp) -> Result<WpMdp, ModelError> {
    for s in &m.states {
        if let Some(w) = &s.target_weight {
            if w.is_negative() {
                return Err(ModelError::NegativeWeight { state: s.name.clone(), weight: format_rational(w) });
            }
        }
    }
    let mut out = m.clone();
    if out.fail().is_none() {
        let name = out.fresh_state_name("fail");
        out.add_state(State::target(name, Rational::zero()));
    }
    let fail = out.fail().expect("fail present");
    let mut groups: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
    for t in out.targets() {
        groups.entry(out.states[t].target_weight.clone().unwrap()).or_default().push(t);
    }
    let action = out.actions().into_iter().next().unwrap_or_else(|| "redirect".to_string());
    let tp = out.subclass.is_trivially_parametric();
    for (w, members) in groups {
        let rep = if w.is_zero() { fail } else { members[0] };
        for &t in members.iter().filter(|&&t| t != rep) {
            let st = &mut out.states[t];
            st.target_weight = None;
            let prob = if tp { None } else { Some(Polynomial::one()) };
            st.choices = vec![Choice { action: action.clone(), transitions: vec![Transition { to: rep, prob }] }];
        }
    }
    Ok(out)
}
