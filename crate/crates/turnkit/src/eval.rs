//! Event matching and detector scoring.
//!
//! Detections are matched to ground-truth turn intervals one-to-one; extra
//! detections on an already-matched truth count as overlaps, detections far
//! from any truth count as false alarms. Rates are pooled over a corpus by
//! summing counts, never by averaging per-walk rates.

use serde::{Deserialize, Serialize};

use crate::angles::unwrap_deg;
use crate::error::Result;
use crate::fusion::{detect_pelt_if, iforest_events};
use crate::hmm::{
    build_legacy_states, classify_region, cluster_legacy_values, detect_hmm, detect_legacy,
    HmmModel, LegacyModel,
};
use crate::iforest::{feature_rows, fit_iforest, IfParams, StepFeature};
use crate::pelt::{pelt_events, PeltConfig};
use crate::signal::{bandpass_yaw, relative_theta, segment_blocks, FilterConfig};
use crate::synth::{derive_seed, SynthWalk};
use crate::threshold::{detect_threshold, events_from_flags, merge_adjacent, ThresholdConfig};
use crate::types::{Method, Region, TurnEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Both spans are dilated by this many steps before intersection.
    pub tolerance: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { tolerance: 2 }
    }
}

/// Outcome of matching one detector run against one truth list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    pub true_turns: usize,
    pub detections: usize,
    /// `(detection index, truth index)` pairs, one-to-one.
    pub matched: Vec<(usize, usize)>,
    /// Detections whose only candidates were already-matched truths.
    pub overlaps: Vec<usize>,
    /// Detections with no candidate truth at all.
    pub false_alarms: Vec<usize>,
    /// Truth indices no detection claimed.
    pub missed: Vec<usize>,
}

/// Steps separating two inclusive intervals (0 when they overlap).
fn interval_gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if b.0 > a.1 {
        b.0 - a.1
    } else if a.0 > b.1 {
        a.0 - b.1
    } else {
        0
    }
}

/// Greedy one-to-one assignment in order of increasing gap.
///
/// A detection is a candidate for a truth interval when their spans, each
/// dilated by the tolerance, intersect. Ties are broken toward the earlier
/// detection, then the earlier truth.
pub fn match_events(
    detected: &[TurnEvent],
    truth: &[(usize, usize)],
    cfg: &MatchConfig,
) -> Matching {
    let max_gap = 2 * cfg.tolerance;
    let mut pairs = Vec::new();
    for (di, d) in detected.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let gap = interval_gap((d.first_step, d.last_step), *t);
            if gap <= max_gap {
                pairs.push((gap, di, ti));
            }
        }
    }
    pairs.sort_unstable();

    let mut det_assigned = vec![false; detected.len()];
    let mut det_has_candidate = vec![false; detected.len()];
    let mut truth_matched = vec![false; truth.len()];
    let mut matched = Vec::new();
    for &(_, di, ti) in &pairs {
        det_has_candidate[di] = true;
        if !det_assigned[di] && !truth_matched[ti] {
            det_assigned[di] = true;
            truth_matched[ti] = true;
            matched.push((di, ti));
        }
    }

    let mut overlaps = Vec::new();
    let mut false_alarms = Vec::new();
    for di in 0..detected.len() {
        if det_assigned[di] {
            continue;
        }
        if det_has_candidate[di] {
            overlaps.push(di);
        } else {
            false_alarms.push(di);
        }
    }
    let missed = (0..truth.len()).filter(|&ti| !truth_matched[ti]).collect();

    Matching {
        true_turns: truth.len(),
        detections: detected.len(),
        matched,
        overlaps,
        false_alarms,
        missed,
    }
}

/// Aggregated detector quality numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_turns: usize,
    pub detections: usize,
    pub matched: usize,
    pub missed: usize,
    pub false_alarms: usize,
    pub overlaps: usize,
    /// missed / true_turns; 0 when there were no true turns (flagged below).
    pub missed_rate: f64,
    /// false_alarms / detections, i.e. the complement of precision;
    /// 0 when nothing was detected. Overlaps are excluded.
    pub false_alarm_rate: f64,
    /// Set when `true_turns` was zero and the missed rate is meaningless.
    pub truth_empty: bool,
}

/// Rates from integer counts.
pub fn metrics(matching: &Matching) -> EvalReport {
    report_from_counts(
        matching.true_turns,
        matching.detections,
        matching.matched.len(),
        matching.false_alarms.len(),
        matching.overlaps.len(),
    )
}

fn report_from_counts(
    true_turns: usize,
    detections: usize,
    matched: usize,
    false_alarms: usize,
    overlaps: usize,
) -> EvalReport {
    let missed = true_turns - matched;
    EvalReport {
        true_turns,
        detections,
        matched,
        missed,
        false_alarms,
        overlaps,
        missed_rate: if true_turns == 0 {
            0.0
        } else {
            missed as f64 / true_turns as f64
        },
        false_alarm_rate: if detections == 0 {
            0.0
        } else {
            false_alarms as f64 / detections as f64
        },
        truth_empty: true_turns == 0,
    }
}

/// Pool matchings by summing counts.
pub fn pool_matchings<'a, I: IntoIterator<Item = &'a Matching>>(matchings: I) -> EvalReport {
    let (mut tt, mut det, mut mat, mut fa, mut ov) = (0, 0, 0, 0, 0);
    for m in matchings {
        tt += m.true_turns;
        det += m.detections;
        mat += m.matched.len();
        fa += m.false_alarms.len();
        ov += m.overlaps.len();
    }
    report_from_counts(tt, det, mat, fa, ov)
}

/// Per-step view of a walk that every detector can consume.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkData {
    /// Cumulative (unwrapped) heading per step, degrees.
    pub yaw: Vec<f64>,
    pub features: Vec<StepFeature>,
    pub truth: Vec<(usize, usize)>,
}

impl From<&SynthWalk> for WalkData {
    fn from(w: &SynthWalk) -> Self {
        WalkData {
            yaw: w.yaw.clone(),
            features: w.features.clone(),
            truth: w.truth.clone(),
        }
    }
}

/// Everything the six-method comparison needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub threshold: ThresholdConfig,
    pub filter: FilterConfig,
    pub pelt: PeltConfig,
    pub iforest: IfParams,
    pub matching: MatchConfig,
    pub block_model: HmmModel,
    pub legacy_clusters: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            threshold: ThresholdConfig::default(),
            filter: FilterConfig::default(),
            pelt: PeltConfig::default(),
            iforest: IfParams::default(),
            matching: MatchConfig::default(),
            block_model: HmmModel::shipped(),
            legacy_clusters: 14,
        }
    }
}

/// Per-step regions for a walk, relative to its baseline.
pub fn walk_regions(yaw: &[f64]) -> Vec<Region> {
    relative_theta(yaw)
        .into_iter()
        .map(classify_region)
        .collect()
}

/// Train the legacy 3-step-state model over a corpus.
pub fn train_legacy_over(corpus: &[WalkData], clusters: usize) -> Result<LegacyModel> {
    let mut sequences = Vec::new();
    for walk in corpus {
        let regions = walk_regions(&walk.yaw);
        if regions.len() >= 3 {
            sequences.push(build_legacy_states(&regions)?);
        }
    }
    cluster_legacy_values(&sequences, clusters)
}

/// Run one detector over one walk.
///
/// `walk_index` seeds the per-walk forest; `legacy_model` is required for
/// the legacy method and ignored otherwise.
pub fn detect_on_walk(
    walk: &WalkData,
    method: Method,
    cfg: &CompareConfig,
    legacy_model: Option<&LegacyModel>,
    walk_index: usize,
) -> Result<Vec<TurnEvent>> {
    match method {
        Method::Threshold => {
            let flags = detect_threshold(&walk.yaw, &cfg.threshold)?;
            Ok(events_from_flags(&flags))
        }
        Method::ThresholdMerged => {
            let flags = detect_threshold(&walk.yaw, &cfg.threshold)?;
            Ok(merge_adjacent(&flags, &cfg.threshold))
        }
        Method::HmmLegacy => {
            let model = legacy_model.ok_or_else(|| {
                crate::error::Error::Config("legacy method needs a trained model".into())
            })?;
            let regions = walk_regions(&walk.yaw);
            let triples = build_legacy_states(&regions)?;
            detect_legacy(&model.relabel_series(&triples), model)
        }
        Method::HmmBlock => {
            let theta = relative_theta(&walk.yaw);
            let filtered = bandpass_yaw(&unwrap_deg(&walk.yaw), &cfg.filter)?;
            let blocks = segment_blocks(&filtered, &theta, &cfg.filter);
            Ok(detect_hmm(&blocks, &cfg.block_model))
        }
        Method::Pelt => pelt_events(&unwrap_deg(&walk.yaw), &cfg.pelt),
        Method::PeltIf => {
            let model = fit_walk_forest(walk, cfg, walk_index)?;
            detect_pelt_if(&unwrap_deg(&walk.yaw), &walk.features, &cfg.pelt, &model)
        }
    }
}

fn fit_walk_forest(
    walk: &WalkData,
    cfg: &CompareConfig,
    walk_index: usize,
) -> Result<crate::iforest::IsolationForestModel> {
    let mut params = cfg.iforest.clone();
    params.seed = derive_seed(params.seed, walk_index as u64);
    params.subsample_size = params.subsample_size.min(walk.features.len().max(2));
    fit_iforest(&feature_rows(&walk.features), &params)
}

/// Isolation-forest step events for one walk (used by diagnostics).
pub fn iforest_events_on_walk(
    walk: &WalkData,
    cfg: &CompareConfig,
    walk_index: usize,
) -> Result<Vec<TurnEvent>> {
    let model = fit_walk_forest(walk, cfg, walk_index)?;
    Ok(iforest_events(&walk.features, &model))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Evaluate all six methods over a corpus, pooling counts per method.
pub fn compare_methods(corpus: &[WalkData], cfg: &CompareConfig) -> Result<Vec<MethodReport>> {
    let legacy = train_legacy_over(corpus, cfg.legacy_clusters)?;
    let mut rows = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let mut matchings = Vec::with_capacity(corpus.len());
        for (i, walk) in corpus.iter().enumerate() {
            let events = detect_on_walk(walk, method, cfg, Some(&legacy), i)?;
            matchings.push(match_events(&events, &walk.truth, &cfg.matching));
        }
        rows.push(MethodReport {
            method,
            report: pool_matchings(&matchings),
        });
    }
    Ok(rows)
}

/// Comparison table as CSV with the canonical column order.
pub fn reports_to_csv(rows: &[MethodReport]) -> String {
    let mut out = String::from(
        "method,true_turns,detections,matched,missed,false_alarms,overlaps,missed_rate,false_alarm_rate\n",
    );
    for row in rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.method,
            r.true_turns,
            r.detections,
            r.matched,
            r.missed,
            r.false_alarms,
            r.overlaps,
            r.missed_rate,
            r.false_alarm_rate
        ));
    }
    out
}
