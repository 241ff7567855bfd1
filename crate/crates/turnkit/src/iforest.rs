//! Isolation-forest anomaly scoring.
//!
//! Trees partition a subsample with uniformly random axis-aligned splits;
//! points that isolate close to the root are anomalous. Scores follow
//! `2^(-E(h)/c(psi))` where `c(n)` is the expected unsuccessful-search path
//! length of a binary search tree over `n` points.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step 9-channel feature vector: mean acceleration, gravity and
/// magnetic field over the step window, x/y/z each.
pub type StepFeature = [f64; 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfParams {
    /// Trees in the ensemble.
    pub tree_count: usize,
    /// Points drawn per tree (psi). Sampling is without replacement unless
    /// the dataset is smaller than psi.
    pub subsample_size: usize,
    /// Assumed anomalous fraction; sets the flagging quantile.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for IfParams {
    fn default() -> Self {
        IfParams {
            tree_count: 100,
            subsample_size: 256,
            contamination: 0.05,
            seed: 0,
        }
    }
}

impl IfParams {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count == 0 || self.subsample_size < 2 {
            return Err(Error::Config(
                "forest needs at least 1 tree and a subsample of 2".into(),
            ));
        }
        if !(0.0 < self.contamination && self.contamination < 0.5) {
            return Err(Error::Config(format!(
                "contamination must lie in (0, 0.5), got {}",
                self.contamination
            )));
        }
        Ok(())
    }
}

/// One node of a flattened isolation tree. `dim < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub dim: i32,
    pub split: f64,
    pub left: u32,
    pub right: u32,
    /// Points that reached this node during fitting.
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub params: IfParams,
    pub dim: usize,
    pub trees: Vec<IsolationTree>,
    /// Set when every training point was identical; all scores sit at 0.5.
    pub degenerate: bool,
}

/// Expected path length `c(n)` of an unsuccessful binary-search-tree lookup.
///
/// Uses the exact harmonic sum, so `c(1) = 0` and `c(2) = 1`.
pub fn avg_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    let harmonic: f64 = (1..n).map(|k| 1.0 / k as f64).sum();
    2.0 * harmonic - 2.0 * m / n as f64
}

/// Anomaly score from an expected path length: `2^(-e_h / c_n)`.
pub fn anomaly_score_from_depth(e_h: f64, c_n: f64) -> f64 {
    if c_n <= 0.0 {
        return 0.5;
    }
    2.0f64.powf(-e_h / c_n)
}

/// Fit an isolation forest. Deterministic for a given seed; per-tree RNGs
/// are derived from the master seed with fixed arithmetic so trees could be
/// built independently.
pub fn fit_iforest(points: &[Vec<f64>], params: &IfParams) -> Result<IsolationForestModel> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "forest needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::Config("points must share a positive dimension".into()));
    }

    let psi = params.subsample_size;
    let depth_cap = (psi as f64).log2().ceil() as usize;
    let degenerate = points.windows(2).all(|w| w[0] == w[1]);

    let mut trees = Vec::with_capacity(params.tree_count);
    for tree_idx in 0..params.tree_count {
        let seed = params
            .seed
            .wrapping_add((tree_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let sample: Vec<usize> = if psi <= points.len() {
            rand::seq::index::sample(&mut rng, points.len(), psi).into_vec()
        } else {
            (0..psi).map(|_| rng.random_range(0..points.len())).collect()
        };

        let mut nodes = Vec::new();
        build_node(points, sample, &mut rng, 0, depth_cap, &mut nodes);
        trees.push(IsolationTree { nodes });
    }

    Ok(IsolationForestModel {
        params: params.clone(),
        dim,
        trees,
        degenerate,
    })
}

fn build_node(
    points: &[Vec<f64>],
    idx: Vec<usize>,
    rng: &mut ChaCha8Rng,
    depth: usize,
    cap: usize,
    nodes: &mut Vec<TreeNode>,
) -> u32 {
    let here = nodes.len() as u32;
    nodes.push(TreeNode {
        dim: -1,
        split: 0.0,
        left: 0,
        right: 0,
        size: idx.len() as u32,
    });
    if depth >= cap || idx.len() <= 1 {
        return here;
    }

    // choose among dimensions that still have spread
    let dim_count = points[idx[0]].len();
    let mut splittable = Vec::new();
    for d in 0..dim_count {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &idx {
            lo = lo.min(points[i][d]);
            hi = hi.max(points[i][d]);
        }
        if hi > lo {
            splittable.push((d, lo, hi));
        }
    }
    if splittable.is_empty() {
        return here;
    }
    let (d, lo, hi) = splittable[rng.random_range(0..splittable.len())];
    let split = rng.random_range(lo..hi);

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        idx.into_iter().partition(|&i| points[i][d] < split);

    let left = build_node(points, left_idx, rng, depth + 1, cap, nodes);
    let right = build_node(points, right_idx, rng, depth + 1, cap, nodes);
    let node = &mut nodes[here as usize];
    node.dim = d as i32;
    node.split = split;
    node.left = left;
    node.right = right;
    here
}

/// Path length of a point through one tree, with the usual leaf-size
/// adjustment for unsplit leaves.
fn tree_path_length(tree: &IsolationTree, x: &[f64]) -> f64 {
    let mut node = &tree.nodes[0];
    let mut edges = 0.0;
    while node.dim >= 0 {
        node = if x[node.dim as usize] < node.split {
            &tree.nodes[node.left as usize]
        } else {
            &tree.nodes[node.right as usize]
        };
        edges += 1.0;
    }
    if node.size > 1 {
        edges += avg_path_length(node.size as usize);
    }
    edges
}

/// Anomaly score of a point, strictly inside `(0, 1)` for real forests.
pub fn iforest_score(model: &IsolationForestModel, x: &[f64]) -> f64 {
    assert_eq!(x.len(), model.dim, "point dimension mismatch");
    let total: f64 = model
        .trees
        .iter()
        .map(|t| tree_path_length(t, x))
        .sum();
    let e_h = total / model.trees.len() as f64;
    anomaly_score_from_depth(e_h, avg_path_length(model.params.subsample_size))
}

/// Indices of the `ceil(contamination * n)` highest scores, ties broken by
/// lower index. Returned sorted ascending.
pub fn flag_top_fraction(scores: &[f64], contamination: f64) -> Vec<usize> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    let k = ((contamination * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut flagged: Vec<usize> = order[..k].to_vec();
    flagged.sort_unstable();
    flagged
}

/// Convert step features into the row format the forest consumes.
pub fn feature_rows(features: &[StepFeature]) -> Vec<Vec<f64>> {
    features.iter().map(|f| f.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn c_factor_anchors() {
        assert_eq!(avg_path_length(0), 0.0);
        assert_eq!(avg_path_length(1), 0.0);
        assert_eq!(avg_path_length(2), 1.0);
        // c(256) from the exact harmonic sum
        let c256 = avg_path_length(256);
        assert!((c256 - 10.244).abs() < 0.01, "c(256) = {c256}");
    }

    #[test]
    fn score_fixed_points() {
        let c = avg_path_length(256);
        assert_eq!(anomaly_score_from_depth(c, c), 0.5);
        assert_eq!(anomaly_score_from_depth(0.0, c), 1.0);
        assert_abs_diff_eq!(anomaly_score_from_depth(2.0 * c, c), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn two_points_one_tree() {
        let params = IfParams {
            tree_count: 1,
            subsample_size: 2,
            ..Default::default()
        };
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let model = fit_iforest(&pts, &params).unwrap();
        let tree = &model.trees[0];
        // root split plus two singleton leaves
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.nodes[0].size, 2);
        assert!(tree.nodes[0].dim >= 0);
    }

    #[test]
    fn same_seed_same_forest() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let params = IfParams {
            seed: 42,
            ..Default::default()
        };
        let a = fit_iforest(&pts, &params).unwrap();
        let b = fit_iforest(&pts, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn planted_outlier_scores_highest() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut pts: Vec<Vec<f64>> = (0..256)
            .map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        pts.push(vec![10.0, 10.0]);
        let model = fit_iforest(&pts, &IfParams { seed: 1, ..Default::default() }).unwrap();
        let scores: Vec<f64> = pts.iter().map(|p| iforest_score(&model, p)).collect();
        let top = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(top, 256, "outlier should rank first");
        assert!(scores[256] > 0.5);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 2.0]; 50];
        let model = fit_iforest(&pts, &IfParams { subsample_size: 32, ..Default::default() }).unwrap();
        assert!(model.degenerate);
        let s = iforest_score(&model, &[1.0, 2.0]);
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn flagging_counts_and_ties() {
        let scores = [0.9, 0.1, 0.9, 0.5, 0.2];
        let flagged = flag_top_fraction(&scores, 0.4);
        // ceil(0.4*5) = 2; the two 0.9s tie and lower indices win
        assert_eq!(flagged, vec![0, 2]);
        assert!(flag_top_fraction(&[], 0.1).is_empty());
    }

    #[test]
    fn depth_cap_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Vec<f64>> = (0..600).map(|_| vec![rng.random::<f64>()]).collect();
        let params = IfParams {
            subsample_size: 256,
            tree_count: 10,
            ..Default::default()
        };
        let model = fit_iforest(&pts, &params).unwrap();
        let cap = (256f64).log2().ceil() as usize; // 8
        for tree in &model.trees {
            let mut depth = vec![0usize; tree.nodes.len()];
            for (i, node) in tree.nodes.iter().enumerate() {
                if node.dim >= 0 {
                    depth[node.left as usize] = depth[i] + 1;
                    depth[node.right as usize] = depth[i] + 1;
                }
            }
            assert!(depth.iter().all(|&d| d <= cap));
        }
    }

    #[test]
    fn rejects_tiny_inputs() {
        assert!(fit_iforest(&[vec![1.0]], &IfParams::default()).is_err());
        let bad = IfParams {
            contamination: 0.7,
            ..Default::default()
        };
        assert!(fit_iforest(&[vec![1.0], vec![2.0]], &bad).is_err());
    }

    #[test]
    fn forest_json_roundtrip() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![5.0]];
        let params = IfParams {
            subsample_size: 4,
            tree_count: 5,
            seed: 9,
            ..Default::default()
        };
        let model = fit_iforest(&pts, &params).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: IsolationForestModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        let x = [3.0];
        assert_eq!(iforest_score(&model, &x), iforest_score(&back, &x));
    }
}
