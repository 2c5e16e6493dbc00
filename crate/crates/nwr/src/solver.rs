//! Running an external SMT solver on an encoded query and checking any
//! witness it returns against the exact oracle.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::etr::EtrQuery;
use crate::graph::MdpGraph;
use crate::oracle::solve_exact;
use crate::poly::{format_rational, parse_decimal, Rational};
use crate::valuation::{check_graph_preserving, instantiate, Valuation};

pub const DEFAULT_SOLVER_CMD: &str = "z3 -smt2 {}";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("could not run solver `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("I/O error while talking to the solver: {0}")]
    Io(#[from] std::io::Error),
    #[error("unrecognised solver output: {0}")]
    Unparseable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    /// Values of the model, as far as they could be read exactly. `exact`
    /// is false when some values were only available as decimal
    /// approximations.
    Sat {
        assignment: BTreeMap<String, Rational>,
        exact: bool,
    },
    Unsat,
    Unknown {
        reason: String,
    },
}

/// Outcome of deciding one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Decision {
    /// The relation holds: no graph-preserving valuation lets `v` beat `W`.
    NeverWorse,
    /// A verified counterexample valuation of the query model.
    Counterexample {
        valuation: Valuation,
        #[serde(serialize_with = "ser_rational")]
        value_v: Rational,
        #[serde(serialize_with = "ser_rationals")]
        values_w: Vec<Rational>,
        /// The solver's vertex values coincide with the exact values.
        solver_values_exact: bool,
    },
    /// The solver claimed a witness that did not survive re-checking.
    Unverified {
        reason: String,
    },
    Unknown {
        reason: String,
    },
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

fn ser_rationals<S: serde::Serializer>(rs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(format_rational))
}

/// Minimal s-expression reader for solver models.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, SolverError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack
                    .pop()
                    .filter(|_| !stack.is_empty())
                    .ok_or_else(|| SolverError::Unparseable("unbalanced `)`".into()))?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SolverError::Unparseable("unbalanced `(`".into()));
    }
    Ok(stack.pop().unwrap())
}

/// Value of a numeric s-expression. `None` for algebraic numbers and
/// anything else that is not a rational expression. A trailing `?` marks a
/// truncated decimal; such values are accepted and flagged through `approx`.
fn eval_sexp(e: &Sexp, approx: &mut bool) -> Option<Rational> {
    match e {
        Sexp::Atom(a) => {
            let a = match a.strip_suffix('?') {
                Some(t) => {
                    *approx = true;
                    t
                }
                None => a.as_str(),
            };
            parse_decimal(a)
        }
        Sexp::List(xs) => {
            let (head, args) = xs.split_first()?;
            let Sexp::Atom(op) = head else { return None };
            let vals: Vec<Rational> = args.iter().map(|a| eval_sexp(a, approx)).collect::<Option<_>>()?;
            match (op.as_str(), vals.as_slice()) {
                ("-", [x]) => Some(-x.clone()),
                ("-", [x, rest @ ..]) => Some(rest.iter().fold(x.clone(), |a, b| a - b)),
                ("+", _) => Some(vals.iter().fold(Rational::zero(), |a, b| a + b)),
                ("*", _) => Some(vals.iter().fold(Rational::one(), |a, b| a * b)),
                ("/", [x, rest @ ..]) if rest.iter().all(|d| !d.is_zero()) => {
                    Some(rest.iter().fold(x.clone(), |a, b| a / b))
                }
                _ => None,
            }
        }
    }
}

/// Reads `sat` / `unsat` / `unknown` and, after `sat`, the `define-fun`
/// entries of the model.
fn parse_answer(stdout: &str) -> Result<(SolverAnswer, bool), SolverError> {
    let mut lines = stdout.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().map(str::trim).unwrap_or("");
    match first {
        "unsat" => return Ok((SolverAnswer::Unsat, true)),
        "unknown" => return Ok((SolverAnswer::Unknown { reason: "solver answered unknown".into() }, true)),
        "sat" => {}
        other => return Err(SolverError::Unparseable(other.chars().take(200).collect())),
    }
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let mut assignment = BTreeMap::new();
    let mut complete = true;
    let mut approx = false;
    let mut todo = parse_sexps(&rest)?;
    while let Some(e) = todo.pop() {
        let Sexp::List(xs) = e else { continue };
        match xs.as_slice() {
            [Sexp::Atom(k), Sexp::Atom(name), Sexp::List(args), sort, value]
                if k == "define-fun" && args.is_empty() =>
            {
                if !matches!(sort, Sexp::Atom(t) if t == "Real" || t == "Int") {
                    continue;
                }
                match eval_sexp(value, &mut approx) {
                    Some(v) => {
                        assignment.insert(name.clone(), v);
                    }
                    None => complete = false,
                }
            }
            _ => todo.extend(xs),
        }
    }
    Ok((SolverAnswer::Sat { assignment, exact: !approx && complete }, complete))
}

fn is_z3(program: &str) -> bool {
    std::path::Path::new(program).file_stem().is_some_and(|s| s == "z3")
}

fn run_once(script: &str, cmd: &str, timeout: Duration) -> Result<Option<String>, SolverError> {
    let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
    file.write_all(script.as_bytes())?;
    file.flush()?;
    let path = file.path().to_string_lossy().into_owned();
    let mut words: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
    if words.is_empty() {
        return Err(SolverError::EmptyCommand);
    }
    if words.iter().any(|w| w.contains("{}")) {
        for w in &mut words {
            *w = w.replace("{}", &path);
        }
    } else {
        words.push(path);
    }
    let mut child = Command::new(&words[0])
        .args(&words[1..])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| SolverError::Spawn { cmd: cmd.to_string(), source })?;
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let start = Instant::now();
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let out = reader.join().map_err(|_| SolverError::Unparseable("reader thread panicked".into()))??;
    Ok(Some(out))
}

/// Runs the solver command on an SMT-LIB script. `{}` in `cmd` is replaced
/// by the path of a temporary file holding the script; without `{}` the
/// path is appended. When z3 reports algebraic numbers the query is re-run
/// with decimal model output.
pub fn run_solver(script: &str, cmd: &str, timeout: Duration) -> Result<SolverAnswer, SolverError> {
    let start = Instant::now();
    let Some(out) = run_once(script, cmd, timeout)? else {
        return Ok(SolverAnswer::Unknown { reason: format!("timeout after {:.1}s", timeout.as_secs_f64()) });
    };
    let (answer, complete) = parse_answer(&out)?;
    let program = cmd.split_whitespace().next().unwrap_or("");
    if complete || !is_z3(program) {
        return Ok(answer);
    }
    let decimal = format!("(set-option :pp.decimal true)\n(set-option :pp.decimal_precision 40)\n{script}");
    let left = timeout.saturating_sub(start.elapsed());
    match run_once(&decimal, cmd, left)? {
        Some(out) => Ok(parse_answer(&out)?.0),
        None => Ok(SolverAnswer::Unknown { reason: format!("timeout after {:.1}s", timeout.as_secs_f64()) }),
    }
}

/// Turns the solver's parameter values into a valuation of the query
/// model. For synthesised parameters each row is renormalised, which only
/// changes anything when the solver's values were approximations.
fn witness_valuation(q: &EtrQuery, assignment: &BTreeMap<String, Rational>) -> Valuation {
    let half = Rational::new(1.into(), 2.into());
    let mut xs: Vec<Rational> =
        q.param_vars.iter().map(|v| assignment.get(v).cloned().unwrap_or_else(|| half.clone())).collect();
    if q.synthesized {
        for st in &q.model.states {
            for ch in &st.choices {
                let idx: Vec<usize> =
                    ch.transitions.iter().filter_map(|t| t.prob.as_ref().and_then(|p| p.as_single_var())).collect();
                let total = idx.iter().fold(Rational::zero(), |a, &i| a + &xs[i]);
                if total.is_positive() && idx.iter().all(|&i| xs[i].is_positive()) {
                    for &i in &idx {
                        xs[i] = &xs[i] / &total;
                    }
                }
            }
        }
    }
    Valuation::Params(xs)
}

/// Re-checks a claimed witness: the valuation must be graph-preserving and
/// the exact values must put `v` strictly above every vertex of `W`.
pub fn verify_witness(q: &EtrQuery, assignment: &BTreeMap<String, Rational>) -> Decision {
    let val = witness_valuation(q, assignment);
    if let Err(e) = check_graph_preserving(&q.model, &val) {
        return Decision::Unverified { reason: format!("valuation is not graph-preserving: {e}") };
    }
    let c = match instantiate(&q.model, &val) {
        Ok(c) => c,
        Err(e) => return Decision::Unverified { reason: e.to_string() },
    };
    let g = MdpGraph::build(&q.model);
    let values = solve_exact(&c).by_vertex(&g);
    let value_v = values[q.v].clone();
    let values_w: Vec<Rational> = q.w.iter().map(|&w| values[w].clone()).collect();
    if let Some(i) = values_w.iter().position(|x| *x >= value_v) {
        return Decision::Unverified {
            reason: format!(
                "at the witness valuation v has value {} but W contains a vertex of value {}",
                format_rational(&value_v),
                format_rational(&values_w[i])
            ),
        };
    }
    let solver_values_exact =
        q.vertex_vars.iter().zip(&values).all(|(name, exact)| assignment.get(name).is_none_or(|y| y == exact));
    Decision::Counterexample { valuation: val, value_v, values_w, solver_values_exact }
}

/// Encodes, solves and verifies in one step.
pub fn decide(q: &EtrQuery, cmd: &str, timeout: Duration) -> Result<Decision, SolverError> {
    Ok(match run_solver(&q.to_smtlib(), cmd, timeout)? {
        SolverAnswer::Unsat => Decision::NeverWorse,
        SolverAnswer::Unknown { reason } => Decision::Unknown { reason },
        SolverAnswer::Sat { assignment, .. } => verify_witness(q, &assignment),
    })
}
