//! Ground-truth engines: exact and iterative solvers for concrete models,
//! graph-preserving valuation sampling, and falsification harnesses.

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::MdpGraph;
use crate::model::WpMdp;
use crate::poly::{format_rational, int, rat, Rational};
use crate::quotient::{lift_valuation, ReductionMap};
use crate::valuation::{instantiate, ConcreteMdp, Valuation, ValuationError};

/// Largest number of memoryless deterministic strategies the enumeration
/// solver accepts.
pub const MAX_STRATEGIES: u128 = 1 << 20;

/// Default stopping tolerance of [`solve_iterative`].
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Above this many states the preservation harness falls back to value
/// iteration instead of exact solving.
pub const EXACT_STATE_LIMIT: usize = 250;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("valuation sampling needs a trivially parametric model, got {0}")]
    NotTriviallyParametric(&'static str),
    #[error("{strategies} strategies exceed the enumeration cap of {cap}")]
    TooManyStrategies { strategies: u128, cap: u128 },
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error("cannot lift valuation: {0}")]
    Lift(String),
}

/// Exact optimal values of a concrete model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactValues {
    pub state: Vec<Rational>,
    /// `nature[s][c]`: expected value of playing choice `c` in `s`.
    pub nature: Vec<Vec<Rational>>,
    /// An optimal choice per non-target state with choices.
    pub strategy: Vec<Option<usize>>,
}

impl ExactValues {
    /// Values indexed by the vertex numbering of `g`, which must be the
    /// graph of the model these values were computed for.
    pub fn by_vertex(&self, g: &MdpGraph) -> Vec<Rational> {
        (0..g.num_vertices())
            .map(|v| {
                if g.is_state(v) {
                    self.state[v].clone()
                } else {
                    match g.id(v) {
                        crate::graph::VertexId::Nature(s, c) => self.nature[s][c].clone(),
                        crate::graph::VertexId::State(_) => unreachable!(),
                    }
                }
            })
            .collect()
    }
}

/// Approximate optimal values from value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeValues {
    pub state: Vec<f64>,
    pub nature: Vec<Vec<f64>>,
    pub strategy: Vec<Option<usize>>,
    pub iterations: usize,
    /// Largest change during the final sweep.
    pub residual: f64,
    pub converged: bool,
}

/// States from which no positive-weight target is reachable through
/// positive-probability transitions.
pub fn zero_states(c: &ConcreteMdp) -> Vec<bool> {
    let n = c.num_states();
    let mut pred = vec![Vec::new(); n];
    for (s, rows) in c.choices.iter().enumerate() {
        for row in rows {
            for (t, _) in row {
                pred[*t].push(s);
            }
        }
    }
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&s| c.weights[s].as_ref().is_some_and(|w| w.is_positive())).collect();
    for &s in &stack {
        reach[s] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !reach[s] {
                reach[s] = true;
                stack.push(s);
            }
        }
    }
    reach.into_iter().map(|r| !r).collect()
}

fn row_value(row: &[(usize, Rational)], x: &[Rational]) -> Rational {
    row.iter().map(|(t, p)| p * &x[*t]).sum()
}

/// Value of a fixed memoryless deterministic strategy, with states that
/// cannot reach a positive target under it pinned to 0.
pub fn evaluate_strategy(c: &ConcreteMdp, strategy: &[Option<usize>]) -> Vec<Rational> {
    let n = c.num_states();
    let mut pred = vec![Vec::new(); n];
    for s in 0..n {
        if let Some(k) = strategy[s] {
            for (t, _) in &c.choices[s][k] {
                pred[*t].push(s);
            }
        }
    }
    let mut live = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&s| c.weights[s].as_ref().is_some_and(|w| w.is_positive())).collect();
    for &s in &stack {
        live[s] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !live[s] {
                live[s] = true;
                stack.push(s);
            }
        }
    }
    let mut x: Vec<Rational> = (0..n).map(|s| c.weights[s].clone().unwrap_or_else(Rational::zero)).collect();
    let unknown: Vec<usize> = (0..n).filter(|&s| live[s] && !c.is_target(s)).collect();
    if unknown.is_empty() {
        return x;
    }
    let mut col = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        col[s] = i;
    }
    let k = unknown.len();
    // Rows of (I - P) | b over the unknown states.
    let mut a = vec![vec![Rational::zero(); k + 1]; k];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] = Rational::one();
        let row = &c.choices[s][strategy[s].expect("live non-target state has a choice")];
        for (t, p) in row {
            if col[*t] != usize::MAX {
                a[i][col[*t]] -= p;
            } else {
                a[i][k] += p * &x[*t];
            }
        }
    }
    let sol = gauss_solve(a);
    for (i, &s) in unknown.iter().enumerate() {
        x[s] = sol[i].clone();
    }
    x
}

/// Solves a square system given as an augmented matrix. The matrix must be
/// non-singular.
fn gauss_solve(mut a: Vec<Vec<Rational>>) -> Vec<Rational> {
    let k = a.len();
    for i in 0..k {
        let piv = (i..k).find(|&r| !a[r][i].is_zero()).expect("singular system");
        a.swap(i, piv);
        let inv = a[i][i].recip();
        for j in i..=k {
            let v = &a[i][j] * &inv;
            a[i][j] = v;
        }
        for r in 0..k {
            if r == i || a[r][i].is_zero() {
                continue;
            }
            let f = a[r][i].clone();
            for j in i..=k {
                let d = &f * &a[i][j];
                a[r][j] -= d;
            }
        }
    }
    a.into_iter().map(|row| row[k].clone()).collect()
}

fn finish(c: &ConcreteMdp, state: Vec<Rational>) -> ExactValues {
    let nature: Vec<Vec<Rational>> =
        c.choices.iter().map(|rows| rows.iter().map(|r| row_value(r, &state)).collect()).collect();
    let strategy = nature
        .iter()
        .enumerate()
        .map(|(s, qs)| {
            if c.is_target(s) || qs.is_empty() {
                return None;
            }
            let mut best = 0;
            for k in 1..qs.len() {
                if qs[k] > qs[best] {
                    best = k;
                }
            }
            Some(best)
        })
        .collect();
    ExactValues { state, nature, strategy }
}

/// Exact optimal values by policy iteration over rationals. Each policy is
/// evaluated as the least fixpoint of its chain; a state switches choice
/// only on strict improvement, so the final policy's values form a Bellman
/// fixpoint that is also achievable, hence optimal.
pub fn solve_exact(c: &ConcreteMdp) -> ExactValues {
    let n = c.num_states();
    let mut strategy: Vec<Option<usize>> =
        (0..n).map(|s| if c.is_target(s) || c.choices[s].is_empty() { None } else { Some(0) }).collect();
    loop {
        let x = evaluate_strategy(c, &strategy);
        let mut changed = false;
        for s in 0..n {
            let Some(cur) = strategy[s] else { continue };
            let mut best = cur;
            let mut best_q = row_value(&c.choices[s][cur], &x);
            for (k, row) in c.choices[s].iter().enumerate() {
                let q = row_value(row, &x);
                if q > best_q {
                    best = k;
                    best_q = q;
                }
            }
            if best != cur {
                strategy[s] = Some(best);
                changed = true;
            }
        }
        if !changed {
            return finish(c, x);
        }
    }
}

/// Number of memoryless deterministic strategies of a concrete model.
pub fn strategy_count(c: &ConcreteMdp) -> u128 {
    c.choices
        .iter()
        .enumerate()
        .filter(|(s, rows)| !c.is_target(*s) && !rows.is_empty())
        .fold(1u128, |acc, (_, rows)| acc.saturating_mul(rows.len() as u128))
}

/// Exact optimal values by enumerating every memoryless deterministic
/// strategy and taking the componentwise maximum.
pub fn solve_by_enumeration(c: &ConcreteMdp) -> Result<ExactValues, OracleError> {
    let count = strategy_count(c);
    if count > MAX_STRATEGIES {
        return Err(OracleError::TooManyStrategies { strategies: count, cap: MAX_STRATEGIES });
    }
    let n = c.num_states();
    let choosers: Vec<usize> = (0..n).filter(|&s| !c.is_target(s) && !c.choices[s].is_empty()).collect();
    let mut strategy: Vec<Option<usize>> = (0..n).map(|s| if choosers.contains(&s) { Some(0) } else { None }).collect();
    let mut best: Vec<Rational> = evaluate_strategy(c, &strategy);
    loop {
        // Odometer increment over the choosing states.
        let mut i = 0;
        loop {
            if i == choosers.len() {
                return Ok(finish(c, best));
            }
            let s = choosers[i];
            let k = strategy[s].unwrap() + 1;
            if k < c.choices[s].len() {
                strategy[s] = Some(k);
                break;
            }
            strategy[s] = Some(0);
            i += 1;
        }
        let x = evaluate_strategy(c, &strategy);
        for s in 0..n {
            if x[s] > best[s] {
                best[s] = x[s].clone();
            }
        }
    }
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Gauss–Seidel value iteration from 0 with value-0 states pinned.
pub fn solve_iterative(c: &ConcreteMdp, tol: f64, max_iters: usize) -> IterativeValues {
    let n = c.num_states();
    let zero = zero_states(c);
    let rows: Vec<Vec<Vec<(usize, f64)>>> = c
        .choices
        .iter()
        .map(|rs| rs.iter().map(|r| r.iter().map(|(t, p)| (*t, to_f64(p))).collect()).collect())
        .collect();
    let mut x: Vec<f64> = (0..n).map(|s| c.weights[s].as_ref().map_or(0.0, to_f64)).collect();
    let free: Vec<usize> = (0..n).filter(|&s| !c.is_target(s) && !zero[s] && !rows[s].is_empty()).collect();
    let mut iterations = 0;
    let mut residual = 0.0;
    let mut converged = free.is_empty();
    while !converged && iterations < max_iters {
        iterations += 1;
        residual = 0.0f64;
        for &s in &free {
            let v =
                rows[s].iter().map(|r| r.iter().map(|(t, p)| p * x[*t]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((v - x[s]).abs());
            x[s] = v;
        }
        converged = residual <= tol;
    }
    if free.is_empty() {
        iterations = 1;
    }
    let nature: Vec<Vec<f64>> =
        rows.iter().map(|rs| rs.iter().map(|r| r.iter().map(|(t, p)| p * x[*t]).sum()).collect()).collect();
    let strategy = nature
        .iter()
        .enumerate()
        .map(|(s, qs)| {
            if c.is_target(s) || qs.is_empty() {
                None
            } else {
                (0..qs.len()).max_by(|&a, &b| qs[a].total_cmp(&qs[b]).then(b.cmp(&a)))
            }
        })
        .collect();
    IterativeValues { state: x, nature, strategy, iterations, residual, converged }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleProfile {
    /// Random integer weights in `1..=16`, normalised.
    Uniform,
    /// One random successor takes `1 - kε`, the `k` others take `ε = 1/64`.
    Adversarial,
}

/// Draws a graph-preserving valuation of a trivially parametric model.
/// Deterministic in `seed`.
pub fn sample_valuation(m: &WpMdp, profile: SampleProfile, seed: u64) -> Result<Valuation, OracleError> {
    if !m.subclass.is_trivially_parametric() {
        return Err(OracleError::NotTriviallyParametric(m.subclass.as_str()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists = m
        .states
        .iter()
        .map(|st| st.choices.iter().map(|ch| sample_row(ch.transitions.len(), profile, &mut rng)).collect())
        .collect();
    Ok(Valuation::Distributions(dists))
}

fn sample_row(len: usize, profile: SampleProfile, rng: &mut ChaCha8Rng) -> Vec<Rational> {
    if len == 1 {
        return vec![Rational::one()];
    }
    match profile {
        SampleProfile::Uniform => {
            let w: Vec<i64> = (0..len).map(|_| rng.gen_range(1..=16)).collect();
            let total: i64 = w.iter().sum();
            w.into_iter().map(|x| rat(x, total)).collect()
        }
        SampleProfile::Adversarial => {
            let k = (len - 1) as i64;
            // With 64 or more small entries the heavy one would vanish; shrink ε.
            let eps = if k < 64 { rat(1, 64) } else { rat(1, 2 * (k + 1)) };
            let heavy = rng.gen_range(0..len);
            let rest = int(1) - &eps * int(k);
            (0..len).map(|i| if i == heavy { rest.clone() } else { eps.clone() }).collect()
        }
    }
}

/// Solves exactly when small enough, otherwise by value iteration. Returns
/// state values as rationals (exact) or as floats.
enum Solved {
    Exact(Vec<Rational>),
    Approx(Vec<f64>),
}

fn solve_auto(c: &ConcreteMdp) -> Solved {
    if c.num_states() <= EXACT_STATE_LIMIT {
        Solved::Exact(solve_exact(c).state)
    } else {
        Solved::Approx(solve_iterative(c, DEFAULT_TOL, DEFAULT_MAX_ITERS).state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationViolation {
    pub sample: usize,
    pub state: String,
    pub original: String,
    pub reduced: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreservationReport {
    pub samples: usize,
    /// False if any sample had to fall back to value iteration.
    pub exact: bool,
    pub comparisons: usize,
    /// Largest absolute difference per sample.
    pub max_delta_per_sample: Vec<f64>,
    pub max_delta: f64,
    pub violations: Vec<PreservationViolation>,
}

impl PreservationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance for comparisons that involve value iteration.
pub const APPROX_TOL: f64 = 1e-8;

/// Samples valuations of `original`, lifts each through `map` onto
/// `reduced`, and checks that every original state has the value of the
/// reduced state representing it. Non-trivially-parametric inputs are
/// sampled through their support graph.
pub fn check_value_preservation(
    original: &WpMdp,
    reduced: &WpMdp,
    map: &ReductionMap,
    n_samples: usize,
    seed: u64,
    profile: SampleProfile,
) -> Result<PreservationReport, OracleError> {
    let orig =
        if original.subclass.is_trivially_parametric() { original.clone() } else { original.to_trivially_parametric() };
    let red =
        if reduced.subclass.is_trivially_parametric() { reduced.clone() } else { reduced.to_trivially_parametric() };
    let mut report = PreservationReport {
        samples: n_samples,
        exact: true,
        comparisons: 0,
        max_delta_per_sample: Vec::new(),
        max_delta: 0.0,
        violations: Vec::new(),
    };
    for i in 0..n_samples {
        let val = sample_valuation(&orig, profile, seed.wrapping_add(i as u64))?;
        let c_orig = instantiate(&orig, &val)?;
        let lifted = lift_valuation(&c_orig, map, &red).map_err(OracleError::Lift)?;
        let c_red = instantiate(&red, &lifted)?;
        let a = solve_auto(&c_orig);
        let b = solve_auto(&c_red);
        let mut worst = 0.0f64;
        for s in 0..orig.states.len() {
            let r = map.state_map[s];
            report.comparisons += 1;
            let (delta, bad, x, y) = match (&a, &b) {
                (Solved::Exact(x), Solved::Exact(y)) => {
                    let d = (&x[s] - &y[r]).abs();
                    (to_f64(&d), !d.is_zero(), format_rational(&x[s]), format_rational(&y[r]))
                }
                _ => {
                    report.exact = false;
                    let x = match &a {
                        Solved::Exact(v) => to_f64(&v[s]),
                        Solved::Approx(v) => v[s],
                    };
                    let y = match &b {
                        Solved::Exact(v) => to_f64(&v[r]),
                        Solved::Approx(v) => v[r],
                    };
                    let d = (x - y).abs();
                    (d, d > APPROX_TOL, x.to_string(), y.to_string())
                }
            };
            worst = worst.max(delta);
            if bad {
                report.violations.push(PreservationViolation {
                    sample: i,
                    state: orig.states[s].name.clone(),
                    original: x,
                    reduced: y,
                });
            }
        }
        report.max_delta = report.max_delta.max(worst);
        report.max_delta_per_sample.push(worst);
    }
    Ok(report)
}

/// Searches sampled valuations for one under which vertex `v` is strictly
/// better than every vertex of `w` (vertex ids of the model's graph).
/// Finding nothing proves nothing.
pub fn falsify_nwr(
    m: &WpMdp,
    v: &[usize],
    w: &[usize],
    n_samples: usize,
    seed: u64,
    profile: SampleProfile,
) -> Result<Option<Valuation>, OracleError> {
    let g = MdpGraph::build(m);
    for i in 0..n_samples {
        let val = sample_valuation(m, profile, seed.wrapping_add(i as u64))?;
        let c = instantiate(m, &val)?;
        let x = solve_exact(&c).by_vertex(&g);
        if counterexample(&x, v, w) {
            return Ok(Some(val));
        }
    }
    Ok(None)
}

/// True iff some vertex of `u` has a strictly larger value than every
/// vertex of `w`.
pub fn counterexample(values: &[Rational], u: &[usize], w: &[usize]) -> bool {
    let best = w.iter().map(|&x| &values[x]).max();
    u.iter().any(|&x| best.is_none_or(|b| values[x] > *b))
}
