//! Parameter valuations and the concrete MDPs they induce.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::WpMdp;
use crate::poly::{format_rational, parse_decimal, PolyError, Rational};

/// A valuation of a model. `Params` assigns every parameter; `Distributions`
/// gives, for trivially parametric models, one probability per transition
/// indexed `[state][choice][transition]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ValuationText", try_from = "ValuationText")]
pub enum Valuation {
    Params(Vec<Rational>),
    Distributions(Vec<Vec<Vec<Rational>>>),
}

/// Serialized form of a valuation with rationals written as `n/d` strings.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ValuationText {
    Params(Vec<String>),
    Distributions(Vec<Vec<Vec<String>>>),
}

impl From<Valuation> for ValuationText {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Params(xs) => ValuationText::Params(xs.iter().map(format_rational).collect()),
            Valuation::Distributions(d) => ValuationText::Distributions(
                d.iter().map(|s| s.iter().map(|c| c.iter().map(format_rational).collect()).collect()).collect(),
            ),
        }
    }
}

impl TryFrom<ValuationText> for Valuation {
    type Error = String;

    fn try_from(v: ValuationText) -> Result<Self, String> {
        let parse_rational = |x: &String| parse_decimal(x).ok_or_else(|| format!("invalid rational `{}`", x));
        Ok(match v {
            ValuationText::Params(xs) => Valuation::Params(xs.iter().map(parse_rational).collect::<Result<_, _>>()?),
            ValuationText::Distributions(d) => Valuation::Distributions(
                d.iter()
                    .map(|s| {
                        s.iter()
                            .map(|c| c.iter().map(parse_rational).collect::<Result<Vec<_>, _>>())
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValuationError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("valuation shape does not match the model at {0}")]
    Shape(String),
    #[error("transition without polynomial needs a distribution valuation at {0}")]
    MissingProbability(String),
    #[error("valuation is not graph preserving at {location}: {reason}")]
    NotGraphPreserving { location: String, reason: String },
}

/// A model with every probability fixed to a rational number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteMdp {
    pub weights: Vec<Option<Rational>>,
    /// `choices[s][c]` lists `(successor, probability)` pairs.
    pub choices: Vec<Vec<Vec<(usize, Rational)>>>,
}

impl ConcreteMdp {
    pub fn num_states(&self) -> usize {
        self.weights.len()
    }

    pub fn is_target(&self, s: usize) -> bool {
        self.weights[s].is_some()
    }
}

fn loc(m: &WpMdp, s: usize, c: usize) -> String {
    format!("{}#{}", m.states[s].name, c)
}

/// Substitutes the valuation into the model. Zero-probability entries are
/// dropped from the concrete rows.
pub fn instantiate(m: &WpMdp, val: &Valuation) -> Result<ConcreteMdp, ValuationError> {
    let mut choices = Vec::with_capacity(m.states.len());
    for (s, st) in m.states.iter().enumerate() {
        let mut rows = Vec::with_capacity(st.choices.len());
        for (c, ch) in st.choices.iter().enumerate() {
            let mut row = Vec::with_capacity(ch.transitions.len());
            for (t, tr) in ch.transitions.iter().enumerate() {
                let p = match val {
                    Valuation::Distributions(d) => d
                        .get(s)
                        .and_then(|x| x.get(c))
                        .and_then(|x| x.get(t))
                        .cloned()
                        .ok_or_else(|| ValuationError::Shape(loc(m, s, c)))?,
                    Valuation::Params(xs) => match &tr.prob {
                        Some(poly) => poly.eval(xs)?,
                        None => return Err(ValuationError::MissingProbability(loc(m, s, c))),
                    },
                };
                if !p.is_zero() {
                    row.push((tr.to, p));
                }
            }
            if let Valuation::Distributions(d) = val {
                if d[s][c].len() != ch.transitions.len() {
                    return Err(ValuationError::Shape(loc(m, s, c)));
                }
            }
            rows.push(row);
        }
        if let Valuation::Distributions(d) = val {
            if d.get(s).is_none_or(|x| x.len() != st.choices.len()) {
                return Err(ValuationError::Shape(m.states[s].name.clone()));
            }
        }
        choices.push(rows);
    }
    if let Valuation::Distributions(d) = val {
        if d.len() != m.states.len() {
            return Err(ValuationError::Shape("model".into()));
        }
    }
    Ok(ConcreteMdp { weights: m.states.iter().map(|s| s.target_weight.clone()).collect(), choices })
}

/// Checks non-negativity, rows summing to one, and that no transition whose
/// polynomial is not syntactically zero evaluates to zero.
pub fn check_graph_preserving(m: &WpMdp, val: &Valuation) -> Result<(), ValuationError> {
    for (s, st) in m.states.iter().enumerate() {
        for (c, ch) in st.choices.iter().enumerate() {
            let mut sum = Rational::zero();
            for (t, tr) in ch.transitions.iter().enumerate() {
                let p = match val {
                    Valuation::Distributions(d) => d
                        .get(s)
                        .and_then(|x| x.get(c))
                        .and_then(|x| x.get(t))
                        .cloned()
                        .ok_or_else(|| ValuationError::Shape(loc(m, s, c)))?,
                    Valuation::Params(xs) => match &tr.prob {
                        Some(poly) => poly.eval(xs)?,
                        None => return Err(ValuationError::MissingProbability(loc(m, s, c))),
                    },
                };
                let bad = |reason: &str| ValuationError::NotGraphPreserving {
                    location: format!("{} -> {}", loc(m, s, c), m.states[tr.to].name),
                    reason: reason.to_string(),
                };
                if p.is_negative() {
                    return Err(bad("negative probability"));
                }
                if tr.in_support() && p.is_zero() {
                    return Err(bad("non-zero polynomial evaluates to 0"));
                }
                if !tr.in_support() && !p.is_zero() {
                    return Err(bad("syntactically zero transition given positive probability"));
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(ValuationError::NotGraphPreserving {
                    location: loc(m, s, c),
                    reason: format!("row sums to {}", sum),
                });
            }
        }
    }
    Ok(())
}
