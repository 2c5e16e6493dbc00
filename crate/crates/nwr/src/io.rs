//! Model documents: the canonical JSON interchange format and an importer
//! for explicit models exported by Storm.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_structure, Choice, Diagnostic, State, Subclass, Transition, WpMdp};
use crate::poly::{format_rational, parse_decimal, PolyError, Polynomial};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("bad polynomial at {location}: {source}")]
    Poly { location: String, source: PolyError },
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_weight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceEntry {
    pub from: usize,
    pub action: String,
    pub transitions: Vec<TransitionEntry>,
}

/// On-disk form of a model. `targets` repeats the target weights by state
/// name; when present it must agree with `states`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub name: String,
    pub subclass: Subclass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub params: Vec<String>,
    pub states: Vec<StateEntry>,
    pub choices: Vec<ChoiceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<BTreeMap<String, String>>,
}

impl ModelDocument {
    pub fn from_model(m: &WpMdp, source: Option<String>) -> Self {
        let states = m
            .states
            .iter()
            .map(|s| StateEntry { name: s.name.clone(), target_weight: s.target_weight.as_ref().map(format_rational) })
            .collect();
        let mut choices = Vec::new();
        for (s, st) in m.states.iter().enumerate() {
            for ch in &st.choices {
                choices.push(ChoiceEntry {
                    from: s,
                    action: ch.action.clone(),
                    transitions: ch
                        .transitions
                        .iter()
                        .map(|t| TransitionEntry { to: t.to, poly: t.prob.as_ref().map(|p| p.to_text(&m.params)) })
                        .collect(),
                });
            }
        }
        let targets = m
            .states
            .iter()
            .filter_map(|s| s.target_weight.as_ref().map(|w| (s.name.clone(), format_rational(w))))
            .collect();
        ModelDocument {
            version: SCHEMA_VERSION,
            name: m.name.clone(),
            subclass: m.subclass,
            source,
            params: m.params.clone(),
            states,
            choices,
            targets: Some(targets),
        }
    }

    /// Builds the model and runs the structural checks.
    pub fn to_model(&self) -> Result<WpMdp, IoError> {
        if self.version != SCHEMA_VERSION {
            return Err(IoError::Schema(format!("unsupported version {}", self.version)));
        }
        let mut m = WpMdp::new(self.name.clone(), self.subclass);
        m.params = self.params.clone();
        let mut names = std::collections::HashSet::new();
        for (i, s) in self.states.iter().enumerate() {
            if !names.insert(s.name.as_str()) {
                return Err(IoError::Schema(format!("duplicate state name `{}`", s.name)));
            }
            let weight = match &s.target_weight {
                Some(w) => Some(
                    parse_decimal(w)
                        .ok_or_else(|| IoError::Schema(format!("state {} has invalid weight `{}`", i, w)))?,
                ),
                None => None,
            };
            m.states.push(State { name: s.name.clone(), target_weight: weight, choices: Vec::new() });
        }
        let n = m.states.len();
        for (k, c) in self.choices.iter().enumerate() {
            if c.from >= n {
                return Err(IoError::Schema(format!("choice {} starts at state index {} out of range", k, c.from)));
            }
            let mut transitions = Vec::with_capacity(c.transitions.len());
            for t in &c.transitions {
                if t.to >= n {
                    return Err(IoError::Schema(format!("choice {} targets state index {} out of range", k, t.to)));
                }
                let prob = match &t.poly {
                    Some(text) => Some(Polynomial::parse(text, &m.params).map_err(|e| IoError::Poly {
                        location: format!("{} -> {}", self.states[c.from].name, self.states[t.to].name),
                        source: e,
                    })?),
                    None => None,
                };
                transitions.push(Transition { to: t.to, prob });
            }
            m.states[c.from].choices.push(Choice { action: c.action.clone(), transitions });
        }
        if let Some(targets) = &self.targets {
            for (name, w) in targets {
                let idx = m
                    .state_index(name)
                    .ok_or_else(|| IoError::Schema(format!("target map names unknown state `{}`", name)))?;
                let declared = parse_decimal(w).ok_or_else(|| IoError::Schema(format!("invalid weight `{}`", w)))?;
                if m.states[idx].target_weight.as_ref() != Some(&declared) {
                    return Err(IoError::Schema(format!("target map disagrees with state `{}`", name)));
                }
            }
            let declared = m.states.iter().filter(|s| s.is_target()).count();
            if declared != targets.len() {
                return Err(IoError::Schema("target map does not list every target".into()));
            }
        }
        let d = validate_structure(&m);
        if !d.is_empty() {
            return Err(IoError::Invalid(d));
        }
        Ok(m)
    }
}

/// Canonical text of a model: pretty JSON with sorted keys and a trailing newline.
pub fn model_to_string(m: &WpMdp, source: Option<String>) -> String {
    let doc = ModelDocument::from_model(m, source);
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(&doc).expect("documents serialise");
    let mut text = serde_json::to_string_pretty(&value).expect("values serialise");
    text.push('\n');
    text
}

pub fn model_from_str(text: &str) -> Result<WpMdp, IoError> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    doc.to_model()
}

pub fn read_document(path: &Path) -> Result<ModelDocument, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io { path: path.to_path_buf(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_model(path: &Path) -> Result<WpMdp, IoError> {
    read_document(path)?.to_model()
}

pub fn write_model(m: &WpMdp, path: &Path) -> Result<(), IoError> {
    write_model_with_source(m, None, path)
}

pub fn write_model_with_source(m: &WpMdp, source: Option<String>, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, model_to_string(m, source)).map_err(|e| IoError::Io { path: path.to_path_buf(), source: e })
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

fn as_index(v: &Value, what: &str) -> Result<usize, IoError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| IoError::Schema(format!("{} is not a non-negative integer", what)))
}

/// Imports an explicit model exported by Storm. States carrying
/// `target_label` become sinks with a single probability-1 choice to a
/// fresh `fin` target; a fresh `fail` target is added as well.
///
/// Accepted dialects:
/// * the document is an array of states, or an object holding that array
///   under `states` or `nodes` (optionally with `parameters`);
/// * a state has an `id` (defaults to its position), labels under `ap` or
///   `labels`, and choices under `actions` or `choices`;
/// * a choice has its name under `name`, `label` or `id`, and successors
///   under `targets`, `transitions` or `successors`;
/// * a successor names its state under `id`, `to` or `target` and its
///   probability under `prob`, `probability` or `value`, as a JSON number
///   or a string holding a rational or a polynomial over the parameters.
///
/// Unknown fields are ignored.
pub fn import_storm(text: &str, name: &str, target_label: &str) -> Result<WpMdp, IoError> {
    let root: Value = serde_json::from_str(text)?;
    let (states, params): (&Vec<Value>, Vec<String>) = match &root {
        Value::Array(a) => (a, Vec::new()),
        Value::Object(o) => {
            let states = field(o, &["states", "nodes"])
                .and_then(Value::as_array)
                .ok_or_else(|| IoError::Schema("no state array under `states` or `nodes`".into()))?;
            let params = match field(o, &["parameters", "params"]) {
                Some(Value::Array(ps)) => ps
                    .iter()
                    .map(|p| {
                        p.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| IoError::Schema("parameter names must be strings".into()))
                    })
                    .collect::<Result<_, _>>()?,
                _ => Vec::new(),
            };
            (states, params)
        }
        _ => return Err(IoError::Schema("expected an array or object".into())),
    };
    let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
    for (pos, s) in states.iter().enumerate() {
        let obj = s.as_object().ok_or_else(|| IoError::Schema(format!("state {} is not an object", pos)))?;
        let id = match obj.get("id") {
            Some(v) => v.as_u64().ok_or_else(|| IoError::Schema(format!("state {} has a non-integer id", pos)))?,
            None => pos as u64,
        };
        if ids.insert(id, pos).is_some() {
            return Err(IoError::Schema(format!("duplicate state id {}", id)));
        }
    }
    let mut m = WpMdp::new(name, Subclass::PMdp);
    m.params = params;
    for (pos, _) in states.iter().enumerate() {
        let id = states[pos].get("id").and_then(Value::as_u64).unwrap_or(pos as u64);
        m.add_state(State::new(format!("s{}", id)));
    }
    let fin_name = m.fresh_state_name("fin");
    let fin = m.add_state(State::target(fin_name, crate::poly::int(1)));
    let fail_name = m.fresh_state_name("fail");
    m.add_state(State::target(fail_name, crate::poly::int(0)));
    for (pos, s) in states.iter().enumerate() {
        let obj = s.as_object().expect("checked above");
        let labels: Vec<&str> = match field(obj, &["ap", "labels"]) {
            Some(Value::Array(ls)) => ls.iter().filter_map(Value::as_str).collect(),
            _ => Vec::new(),
        };
        if labels.contains(&target_label) {
            m.add_choice(pos, "target", vec![Transition { to: fin, prob: Some(Polynomial::one()) }]);
            continue;
        }
        let actions = match field(obj, &["actions", "choices"]) {
            Some(Value::Array(a)) => a.as_slice(),
            Some(_) => return Err(IoError::Schema(format!("state {} has a non-array action list", pos))),
            None => &[],
        };
        for (k, a) in actions.iter().enumerate() {
            let aobj = a
                .as_object()
                .ok_or_else(|| IoError::Schema(format!("action {} of state {} is not an object", k, pos)))?;
            let label = match field(aobj, &["name", "label", "id"]) {
                Some(Value::String(x)) => x.clone(),
                Some(v) => v.to_string(),
                None => format!("a{}", k),
            };
            let succ = field(aobj, &["targets", "transitions", "successors"])
                .and_then(Value::as_array)
                .ok_or_else(|| IoError::Schema(format!("action {} of state {} has no successor list", k, pos)))?;
            let mut transitions: Vec<Transition> = Vec::new();
            for t in succ {
                let tobj = t.as_object().ok_or_else(|| IoError::Schema("successor is not an object".into()))?;
                let to_id = field(tobj, &["id", "to", "target"])
                    .ok_or_else(|| IoError::Schema(format!("successor in state {} lacks a state id", pos)))?;
                let to_id = as_index(to_id, "successor id")? as u64;
                let to = *ids.get(&to_id).ok_or_else(|| IoError::Schema(format!("dangling successor id {}", to_id)))?;
                let location = format!("s{} -> s{}", pos, to_id);
                let prob = match field(tobj, &["prob", "probability", "value"]) {
                    Some(Value::Number(x)) => Polynomial::constant(
                        parse_decimal(&x.to_string())
                            .ok_or_else(|| IoError::Schema(format!("bad probability at {}", location)))?,
                    ),
                    Some(Value::String(x)) => match parse_decimal(x) {
                        Some(r) => Polynomial::constant(r),
                        None => Polynomial::parse(x, &m.params).map_err(|e| IoError::Poly { location, source: e })?,
                    },
                    _ => return Err(IoError::Schema(format!("missing probability at {}", location))),
                };
                match transitions.iter_mut().find(|x| x.to == to) {
                    Some(x) => x.prob = Some(x.prob.as_ref().unwrap().add(&prob)),
                    None => transitions.push(Transition { to, prob: Some(prob) }),
                }
            }
            m.add_choice(pos, label, transitions);
        }
    }
    let d = validate_structure(&m);
    if !d.is_empty() {
        return Err(IoError::Invalid(d));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, rat};
    use crate::samples;

    #[test]
    fn round_trip_is_identity() {
        for m in [samples::weighted_chain(), samples::weighted_parametric(), samples::parametric(), samples::trivial()]
        {
            let text = model_to_string(&m, None);
            let back = model_from_str(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_string(&back, None), text);
        }
    }

    #[test]
    fn weighted_chain_document() {
        let text = model_to_string(&samples::weighted_chain(), None);
        let m = model_from_str(&text).unwrap();
        assert_eq!(m.num_states(), 5);
        let weights: Vec<_> = m.sorted_targets().iter().map(|&t| m.states[t].target_weight.clone().unwrap()).collect();
        assert_eq!(weights, vec![int(0), int(1), int(4)]);
        assert!(text.contains("\"poly\": \"1/4\""));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let mut doc = ModelDocument::from_model(&samples::trivial(), None);
        doc.choices[0].transitions[0].to = 99;
        assert!(matches!(doc.to_model(), Err(IoError::Schema(_))));
        let mut doc = ModelDocument::from_model(&samples::trivial(), None);
        doc.choices[0].from = 42;
        assert!(matches!(doc.to_model(), Err(IoError::Schema(_))));
    }

    #[test]
    fn constant_rows_must_sum_to_one() {
        let mut doc = ModelDocument::from_model(&samples::weighted_chain(), None);
        doc.choices[0].transitions[0].poly = Some("1/2".into());
        assert!(matches!(doc.to_model(), Err(IoError::Invalid(_))));
    }

    #[test]
    fn unknown_fields_rejected_in_documents() {
        let text = model_to_string(&samples::trivial(), None).replacen("\"name\"", "\"colour\": 1, \"name\"", 1);
        assert!(model_from_str(&text).is_err());
    }

    #[test]
    fn empty_choice_list_serialised() {
        let mut m = samples::trivial();
        let p = m.state_index("p").unwrap();
        m.states[p].choices.clear();
        let back = model_from_str(&model_to_string(&m, None)).unwrap();
        assert!(back.states[p].choices.is_empty());
        assert_eq!(back, m);
    }

    #[test]
    fn storm_dialects() {
        let a = r#"[
            {"id": 0, "ap": ["init"], "actions": [{"name": "go", "targets": [{"id": 1, "prob": 0.98}, {"id": 0, "prob": 0.02}]}]},
            {"id": 1, "ap": ["goal"], "actions": [{"name": "loop", "targets": [{"id": 1, "prob": 1}]}], "rewards": {}}
        ]"#;
        let b = r#"{"states": [
            {"labels": ["init"], "choices": [{"label": "go", "transitions": [{"to": 1, "probability": "49/50"}, {"to": 0, "probability": "1/50"}]}]},
            {"labels": ["goal"], "choices": []}
        ], "meta": "ignored"}"#;
        let ma = import_storm(a, "m", "goal").unwrap();
        let mb = import_storm(b, "m", "goal").unwrap();
        assert_eq!(ma.num_states(), 4);
        assert_eq!(ma.num_choices(), 2);
        assert_eq!(ma.states[0].choices[0].transitions[0].prob, Some(Polynomial::constant(rat(49, 50))));
        assert_eq!(ma.states[1].choices[0].transitions, mb.states[1].choices[0].transitions);
        assert_eq!(ma.states[0].choices[0].transitions, mb.states[0].choices[0].transitions);
    }

    #[test]
    fn storm_dangling_successor() {
        let a = r#"[{"id": 0, "actions": [{"targets": [{"id": 7, "prob": 1}]}]}]"#;
        assert!(matches!(import_storm(a, "m", "goal"), Err(IoError::Schema(_))));
    }

    #[test]
    fn storm_parametric() {
        let a = r#"{"parameters": ["p"], "nodes": [
            {"id": 0, "actions": [{"targets": [{"id": 1, "prob": "p"}, {"id": 0, "prob": "1 - p"}]}]},
            {"id": 1, "ap": ["goal"]}
        ]}"#;
        let m = import_storm(a, "m", "goal").unwrap();
        assert_eq!(m.params, vec!["p".to_string()]);
        assert_eq!(m.states[0].choices[0].transitions[0].prob, Some(Polynomial::var(0)));
    }
}
