//! End-to-end reduction of an arbitrary validated model: target
//! normalisation, deweighting, the trivially parametric view, and the
//! pruning/collapsing loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deweight::{deweight_pmdp, deweight_tpmdp, DeweightError, DeweightMap};
use crate::model::{normalize_targets, validate_model, Diagnostic, ModelError, WpMdp};
use crate::quotient::ReductionMap;
use crate::reduce::{reduce, PruneConfig, ReduceError, ReductionOutcome};
use crate::report::StageCounts;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid model: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Deweight(#[from] DeweightError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

/// The model handed to the reduction loop together with how it was obtained.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    /// Non-weighted, trivially parametric.
    pub view: WpMdp,
    pub deweight: Option<DeweightMap>,
}

/// Validates `m`, normalises targets and, for weighted inputs, removes the
/// weights (the trivially parametric construction for weighted trivially
/// parametric inputs, the parametric one otherwise). The result is the
/// support graph of what remains. Deterministic in `m`.
pub fn prepare_input(m: &WpMdp) -> Result<PreparedInput, PipelineError> {
    let diags = validate_model(m);
    if !diags.is_empty() {
        return Err(PipelineError::Invalid(diags));
    }
    if !m.subclass.is_weighted() {
        return Ok(PreparedInput { view: m.to_trivially_parametric(), deweight: None });
    }
    let normal = normalize_targets(m)?;
    let (plain, map) =
        if normal.subclass.is_trivially_parametric() { deweight_tpmdp(&normal)? } else { deweight_pmdp(&normal)? };
    Ok(PreparedInput { view: plain.to_trivially_parametric(), deweight: Some(map) })
}

/// Map file written next to a reduced model: enough to check the reduction
/// against the prepared view of the original document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapDocument {
    pub version: u32,
    /// Name of the original model.
    pub source: String,
    pub map: ReductionMap,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub input: PreparedInput,
    pub reduction: ReductionOutcome,
}

/// Prepares `m` and reduces it. The report's original counts are those of
/// `m` for non-weighted inputs and of the deweighted model otherwise.
pub fn run_pipeline(m: &WpMdp, cfg: &PruneConfig) -> Result<PipelineOutcome, PipelineError> {
    let input = prepare_input(m)?;
    let mut reduction = reduce(&input.view, cfg)?;
    reduction.report.instance = m.name.clone();
    if input.deweight.is_none() {
        reduction.report.original = StageCounts::of(m);
    } else {
        reduction.report.notes.push("original counts taken after deweighting".to_string());
    }
    Ok(PipelineOutcome { input, reduction })
}
