//! PELT + isolation-forest fusion.
//!
//! Change points catch clean mean shifts in the yaw series; the forest
//! catches steps whose sensor signature is anomalous even when the series
//! statistics barely move. The union of the two event sets, merged where
//! spans overlap, misses no turn the change-point pass alone would find.

use crate::error::Result;
use crate::iforest::{self, IsolationForestModel, StepFeature};
use crate::pelt::{pelt_events, PeltConfig};
use crate::types::{Method, TurnEvent};

/// Single-step events for the steps whose isolation score lands in the
/// contamination quantile.
pub fn iforest_events(
    features: &[StepFeature],
    model: &IsolationForestModel,
) -> Vec<TurnEvent> {
    let scores: Vec<f64> = features
        .iter()
        .map(|f| iforest::iforest_score(model, f))
        .collect();
    iforest::flag_top_fraction(&scores, model.params.contamination)
        .into_iter()
        .map(|i| TurnEvent::new(i, i, Method::PeltIf, scores[i]))
        .collect()
}

/// Fused detection: PELT change-point events plus isolation-forest step
/// events, with overlapping spans merged (max score, method `pelt_if`).
pub fn detect_pelt_if(
    yaw: &[f64],
    features: &[StepFeature],
    pelt_cfg: &PeltConfig,
    model: &IsolationForestModel,
) -> Result<Vec<TurnEvent>> {
    let mut events = pelt_events(yaw, pelt_cfg)?;
    events.extend(iforest_events(features, model));
    Ok(merge_overlapping(events))
}

/// Merge events whose inclusive spans overlap. Surviving singletons keep
/// their source method; any merge is attributed to the fusion.
pub fn merge_overlapping(mut events: Vec<TurnEvent>) -> Vec<TurnEvent> {
    events.sort_by(|a, b| {
        a.first_step
            .cmp(&b.first_step)
            .then(a.last_step.cmp(&b.last_step))
    });
    let mut merged: Vec<TurnEvent> = Vec::with_capacity(events.len());
    for e in events {
        match merged.last_mut() {
            Some(last) if e.first_step <= last.last_step => {
                last.last_step = last.last_step.max(e.last_step);
                last.score = last.score.max(e.score);
                last.method = Method::PeltIf;
            }
            _ => merged.push(e),
        }
    }
    merged
}
