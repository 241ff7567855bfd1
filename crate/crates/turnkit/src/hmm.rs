//! HMM turn detectors.
//!
//! Two variants share the eight-sector region vocabulary:
//!
//! * the legacy detector groups steps into fixed 3-step states whose
//!   composite values are clustered down to a small alphabet, and flags a
//!   state whenever its value is more likely to change than to persist;
//! * the block detector runs discrete forward filtering over peak-delimited
//!   blocks with an 8x8 region transition matrix, and flags a block boundary
//!   whenever the posterior probability of staying in the previous most
//!   likely region drops below one half.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::BlockRecord;
use crate::types::{Method, Region, TurnEvent};

/// Column-stochastic region HMM.
///
/// `transition[i][j]` is the probability of moving to region `i+1` given the
/// current region is `j+1` (columns sum to 1). `emission[0]` / `emission[1]`
/// hold per-region turn / no-turn probabilities (columns sum to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub transition: [[f64; 8]; 8],
    pub emission: [[f64; 8]; 2],
    /// Probability that an observed region label differs from the hidden
    /// one; the residual mass is spread evenly over the other 7 regions.
    pub obs_epsilon: f64,
}

/// Default model file carrying the published transition and emission tables.
pub const DEFAULT_MODEL_JSON: &str = include_str!("../data/hmm_block_model.json");

impl HmmModel {
    /// The committed default model.
    pub fn shipped() -> HmmModel {
        serde_json::from_str(DEFAULT_MODEL_JSON).expect("bundled model file is valid")
    }

    pub fn from_json(json: &str) -> Result<HmmModel> {
        let model: HmmModel = serde_json::from_str(json)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Check stochastic-matrix invariants.
    ///
    /// Transition columns may carry rounding slack of up to 0.005 (published
    /// tables are rounded to four decimals); emission columns must be exact.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.obs_epsilon) {
            return Err(Error::Model(format!(
                "obs_epsilon must lie in [0, 1), got {}",
                self.obs_epsilon
            )));
        }
        for j in 0..8 {
            let col: f64 = (0..8).map(|i| self.transition[i][j]).sum();
            if (col - 1.0).abs() > 0.005 {
                return Err(Error::Model(format!(
                    "transition column r{} sums to {col}, outside 1 +- 0.005",
                    j + 1
                )));
            }
            for i in 0..8 {
                if !(0.0..=1.0).contains(&self.transition[i][j]) {
                    return Err(Error::Model(format!(
                        "transition entry ({}, {}) out of [0, 1]",
                        i + 1,
                        j + 1
                    )));
                }
            }
            let ecol = self.emission[0][j] + self.emission[1][j];
            if (ecol - 1.0).abs() > 1e-9 {
                return Err(Error::Model(format!(
                    "emission column r{} sums to {ecol}, outside 1 +- 1e-9",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// Likelihood of observing region label `obs` when the hidden region is `hid`.
    fn obs_likelihood(&self, obs: Region, hid: usize) -> f64 {
        if obs.index() == hid {
            1.0 - self.obs_epsilon
        } else {
            self.obs_epsilon / 7.0
        }
    }
}

/// Classify a direction angle into its region.
pub fn classify_region(theta: f64) -> Region {
    Region::from_theta_deg(theta)
}

/// Train transition and emission matrices from labeled block sequences.
///
/// Each walk is a sequence of `(region, is_turn)` blocks. Counts receive
/// add-alpha smoothing so every column is a proper distribution even when a
/// region never occurs.
pub fn train_hmm(corpus: &[Vec<(Region, bool)>], alpha: f64, obs_epsilon: f64) -> Result<HmmModel> {
    let total_blocks: usize = corpus.iter().map(Vec::len).sum();
    let total_transitions: usize = corpus.iter().map(|w| w.len().saturating_sub(1)).sum();
    if total_blocks == 0 || total_transitions == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut trans_counts = [[0usize; 8]; 8];
    let mut from_counts = [0usize; 8];
    let mut turn_counts = [0usize; 8];
    let mut block_counts = [0usize; 8];
    for walk in corpus {
        for w in walk.windows(2) {
            let (from, to) = (w[0].0.index(), w[1].0.index());
            trans_counts[to][from] += 1;
            from_counts[from] += 1;
        }
        for &(region, turned) in walk {
            block_counts[region.index()] += 1;
            if turned {
                turn_counts[region.index()] += 1;
            }
        }
    }

    let mut transition = [[0.0f64; 8]; 8];
    let mut emission = [[0.0f64; 8]; 2];
    for j in 0..8 {
        let denom = from_counts[j] as f64 + 8.0 * alpha;
        for i in 0..8 {
            transition[i][j] = (trans_counts[i][j] as f64 + alpha) / denom;
        }
        let edenom = block_counts[j] as f64 + 2.0 * alpha;
        emission[0][j] = (turn_counts[j] as f64 + alpha) / edenom;
        emission[1][j] = ((block_counts[j] - turn_counts[j]) as f64 + alpha) / edenom;
    }

    let model = HmmModel {
        transition,
        emission,
        obs_epsilon,
    };
    model.validate()?;
    Ok(model)
}

/// Forward-filtered posterior over hidden regions after each block.
///
/// The belief starts as a point mass on the first observed region; each step
/// predicts through the transition matrix and updates with the symmetric
/// region-confusion likelihood. If an observation has zero predicted mass
/// the belief resets to a point mass on that observation.
pub fn forward_beliefs(regions: &[Region], model: &HmmModel) -> Vec<[f64; 8]> {
    let mut beliefs = Vec::with_capacity(regions.len());
    let Some(&first) = regions.first() else {
        return beliefs;
    };
    let mut belief = [0.0f64; 8];
    belief[first.index()] = 1.0;
    beliefs.push(belief);

    for &obs in &regions[1..] {
        let mut predicted = [0.0f64; 8];
        for (i, row) in model.transition.iter().enumerate() {
            predicted[i] = row
                .iter()
                .zip(&belief)
                .map(|(t, b)| t * b)
                .sum::<f64>();
        }
        let mut updated = [0.0f64; 8];
        for (i, u) in updated.iter_mut().enumerate() {
            *u = predicted[i] * model.obs_likelihood(obs, i);
        }
        let mass: f64 = updated.iter().sum();
        if mass > 0.0 {
            for u in &mut updated {
                *u /= mass;
            }
        } else {
            updated = [0.0; 8];
            updated[obs.index()] = 1.0;
        }
        belief = updated;
        beliefs.push(belief);
    }
    beliefs
}

fn argmax(belief: &[f64; 8]) -> usize {
    let mut best = 0;
    for i in 1..8 {
        if belief[i] > belief[best] {
            best = i;
        }
    }
    best
}

/// Block-based turn detection.
///
/// The boundary from block `t` to `t+1` is a turn when the updated belief
/// keeps less than half its mass on the previously most likely region. The
/// event spans block `t+1`; its score is the escape probability scaled by
/// the new region's relative turn emission.
pub fn detect_hmm(blocks: &[BlockRecord], model: &HmmModel) -> Vec<TurnEvent> {
    let regions: Vec<Region> = blocks.iter().map(|b| b.region).collect();
    let beliefs = forward_beliefs(&regions, model);
    let max_turn_emission = model
        .emission[0]
        .iter()
        .fold(f64::MIN, |m, &e| m.max(e))
        .max(f64::MIN_POSITIVE);

    let mut events = Vec::new();
    for t in 0..beliefs.len().saturating_sub(1) {
        let prev_mode = argmax(&beliefs[t]);
        let stay = beliefs[t + 1][prev_mode];
        if stay < 0.5 {
            let new_mode = argmax(&beliefs[t + 1]);
            let score = (1.0 - stay) * model.emission[0][new_mode] / max_turn_emission;
            let block = &blocks[t + 1];
            events.push(TurnEvent::new(
                block.first_step,
                block.last_step,
                Method::HmmBlock,
                score,
            ));
        }
    }
    events
}

/// A 3-step composite state value.
pub type StateTriple = [Region; 3];

/// Clustered alphabet of 3-step state values and their successor statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegacyModel {
    /// Retained values, most frequent first.
    pub values: Vec<StateTriple>,
    /// `successor[v][w]` = probability the next state takes value `w` given
    /// the current state has value `v`. Rows sum to 1.
    pub successor: Vec<Vec<f64>>,
    pub cluster_count: usize,
    /// Set when the corpus had fewer distinct triples than requested.
    pub degenerate: bool,
}

impl LegacyModel {
    pub fn from_json(json: &str) -> Result<LegacyModel> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    fn exact_index(&self, triple: &StateTriple) -> Option<usize> {
        self.values.iter().position(|v| v == triple)
    }

    /// Map an arbitrary triple onto the retained alphabet.
    ///
    /// Exact matches win; otherwise the retained value with the smallest
    /// per-position ring distance is chosen, ties going to the value with
    /// the better frequency rank.
    pub fn relabel(&self, triple: &StateTriple) -> usize {
        if let Some(i) = self.exact_index(triple) {
            return i;
        }
        let mut best = 0;
        let mut best_d = u16::MAX;
        for (i, v) in self.values.iter().enumerate() {
            let d: u16 = triple
                .iter()
                .zip(v)
                .map(|(a, b)| u16::from(a.ring_distance(*b)))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Relabel a whole series.
    pub fn relabel_series(&self, triples: &[StateTriple]) -> Vec<StateTriple> {
        triples.iter().map(|t| self.values[self.relabel(t)]).collect()
    }
}

/// Group per-step regions into non-overlapping 3-step state values.
///
/// A trailing remainder of one or two steps is dropped.
pub fn build_legacy_states(regions: &[Region]) -> Result<Vec<StateTriple>> {
    if regions.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 steps for a composite state, got {}",
            regions.len()
        )));
    }
    Ok(regions
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect())
}

/// Cluster the observed triples down to `cluster_count` values and estimate
/// successor distributions from the relabeled corpus with add-1 smoothing.
pub fn cluster_legacy_values(
    corpus: &[Vec<StateTriple>],
    cluster_count: usize,
) -> Result<LegacyModel> {
    if cluster_count == 0 {
        return Err(Error::Config("cluster_count must be positive".into()));
    }
    let mut freq: HashMap<StateTriple, usize> = HashMap::new();
    for seq in corpus {
        for t in seq {
            *freq.entry(*t).or_insert(0) += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut ranked: Vec<(StateTriple, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let degenerate = ranked.len() < cluster_count;
    let keep = ranked.len().min(cluster_count);
    let values: Vec<StateTriple> = ranked[..keep].iter().map(|(t, _)| *t).collect();

    let mut model = LegacyModel {
        values,
        successor: Vec::new(),
        cluster_count,
        degenerate,
    };

    let k = model.values.len();
    let mut counts = vec![vec![0usize; k]; k];
    for seq in corpus {
        let labels: Vec<usize> = seq.iter().map(|t| model.relabel(t)).collect();
        for w in labels.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
    }
    model.successor = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            let denom = total as f64 + k as f64;
            row.iter().map(|&c| (c as f64 + 1.0) / denom).collect()
        })
        .collect();
    Ok(model)
}

/// Legacy 3-step-state turn detection.
///
/// State `t` is a turn when its value's successor distribution gives the
/// same value less than half the mass. Triples must already be relabeled
/// into the model alphabet.
pub fn detect_legacy(triples: &[StateTriple], model: &LegacyModel) -> Result<Vec<TurnEvent>> {
    let mut events = Vec::new();
    for (t, triple) in triples.iter().enumerate() {
        let v = model.exact_index(triple).ok_or_else(|| {
            Error::Internal(format!(
                "triple ({}, {}, {}) not in the model alphabet; relabel first",
                triple[0], triple[1], triple[2]
            ))
        })?;
        let p_keep = model.successor[v][v];
        if p_keep < 0.5 {
            events.push(TurnEvent::new(
                3 * t,
                3 * t + 2,
                Method::HmmLegacy,
                1.0 - p_keep,
            ));
        }
    }
    Ok(events)
}
