//! Per-step yaw-delta turn detection and merging of adjacent detections.

use serde::{Deserialize, Serialize};

use crate::angles::delta_deg;
use crate::error::{Error, Result};
use crate::types::{Method, TurnEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Yaw change between adjacent steps that declares a turn, degrees.
    pub tau: f64,
    /// Flags separated by up to `merge_gap` unflagged steps join one event.
    pub merge_gap: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        // 22.5 degrees matches the region half-width, so the threshold and
        // region-based detectors agree on what counts as a turn.
        ThresholdConfig {
            tau: 22.5,
            merge_gap: 1,
        }
    }
}

/// Step indices whose wrapped yaw delta from the previous step exceeds tau.
///
/// Step 0 has no predecessor and is never flagged.
pub fn detect_threshold(yaw: &[f64], cfg: &ThresholdConfig) -> Result<Vec<usize>> {
    if yaw.len() < 2 {
        return Err(Error::InsufficientData(
            "threshold detection needs at least 2 steps".into(),
        ));
    }
    Ok(yaw
        .windows(2)
        .enumerate()
        .filter(|(_, w)| delta_deg(w[0], w[1]).abs() > cfg.tau)
        .map(|(i, _)| i + 1)
        .collect())
}

/// One single-step event per flag.
pub fn events_from_flags(flags: &[usize]) -> Vec<TurnEvent> {
    flags
        .iter()
        .map(|&i| TurnEvent::new(i, i, Method::Threshold, 1.0))
        .collect()
}

/// Merge runs of nearby flags into single events.
///
/// Flags whose indices differ by at most `merge_gap + 1` belong to the same
/// run; each maximal run becomes one event spanning its first to last flag.
pub fn merge_adjacent(flags: &[usize], cfg: &ThresholdConfig) -> Vec<TurnEvent> {
    let mut events = Vec::new();
    let mut iter = flags.iter().copied();
    let Some(first) = iter.next() else {
        return events;
    };
    let (mut run_start, mut run_end) = (first, first);
    for f in iter {
        debug_assert!(f > run_end, "flags must be strictly increasing");
        if f - run_end <= cfg.merge_gap + 1 {
            run_end = f;
        } else {
            events.push(TurnEvent::new(run_start, run_end, Method::ThresholdMerged, 1.0));
            run_start = f;
            run_end = f;
        }
    }
    events.push(TurnEvent::new(run_start, run_end, Method::ThresholdMerged, 1.0));
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_delta_above_tau() {
        let flags = detect_threshold(&[0.0, 30.0, 30.0], &ThresholdConfig::default()).unwrap();
        assert_eq!(flags, vec![1]);
    }

    #[test]
    fn slow_turn_slips_under_tau() {
        // 30 degrees total but only 10 per step: nothing is flagged.
        let flags =
            detect_threshold(&[0.0, 10.0, 20.0, 30.0], &ThresholdConfig::default()).unwrap();
        assert!(flags.is_empty());
    }

    #[test]
    fn wrapped_delta_stays_small() {
        let flags = detect_threshold(&[170.0, -170.0], &ThresholdConfig::default()).unwrap();
        assert!(flags.is_empty(), "wrapped delta is 20 degrees");
    }

    #[test]
    fn too_short_series_errors() {
        assert!(matches!(
            detect_threshold(&[0.0], &ThresholdConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn adjacent_flags_become_one_event() {
        let cfg = ThresholdConfig::default();
        let events = merge_adjacent(&[10, 11, 12], &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].first_step, events[0].last_step), (10, 12));
    }

    #[test]
    fn empty_flags_give_no_events() {
        assert!(merge_adjacent(&[], &ThresholdConfig::default()).is_empty());
    }

    #[test]
    fn gap_rule_splits_runs() {
        let cfg = ThresholdConfig::default(); // merge_gap 1
        let events = merge_adjacent(&[3, 5, 9], &cfg);
        let spans: Vec<(usize, usize)> =
            events.iter().map(|e| (e.first_step, e.last_step)).collect();
        assert_eq!(spans, vec![(3, 5), (9, 9)]);
    }

    #[test]
    fn merge_never_increases_event_count() {
        let cfg = ThresholdConfig::default();
        let flags = [1, 2, 4, 8, 9, 15];
        assert!(merge_adjacent(&flags, &cfg).len() <= flags.len());
    }

    #[test]
    fn merge_is_idempotent() {
        let cfg = ThresholdConfig { tau: 22.5, merge_gap: 2 };
        let flags = [2, 4, 7, 13, 14, 20];
        let events = merge_adjacent(&flags, &cfg);
        // reconstruct flags as full event spans and merge again
        let reconstructed: Vec<usize> = events
            .iter()
            .flat_map(|e| e.first_step..=e.last_step)
            .collect();
        assert_eq!(merge_adjacent(&reconstructed, &cfg), events);
    }
}
