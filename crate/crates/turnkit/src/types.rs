//! Shared domain types used by every detector.

use serde::{Deserialize, Serialize};

use crate::angles::wrap_deg;

/// One of the eight 45-degree heading sectors.
///
/// Region `k` covers direction angles in `[-22.5 + (k-1)*45, 22.5 + (k-1)*45)`
/// modulo 360, so region 1 is centered on the walk baseline and region 2
/// starts exactly at +22.5 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(u8);

impl Region {
    pub const COUNT: usize = 8;

    /// Construct from a 1-based id. Panics outside 1..=8.
    pub fn new(id: u8) -> Self {
        assert!((1..=8).contains(&id), "region id {id} out of range");
        Region(id)
    }

    /// Classify a direction angle into its sector.
    ///
    /// Boundaries are half-open: exactly +22.5 falls in region 2.
    pub fn from_theta_deg(theta: f64) -> Self {
        let r = theta.rem_euclid(360.0);
        let k = ((r + 22.5) / 45.0).floor() as i64;
        Region((k.rem_euclid(8)) as u8 + 1)
    }

    /// 1-based id as published.
    pub fn id(self) -> u8 {
        self.0
    }

    /// 0-based index for matrix addressing.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    /// Center heading of the sector, in `[-180, 180)`.
    pub fn center_deg(self) -> f64 {
        wrap_deg(f64::from(self.0 - 1) * 45.0)
    }

    /// Ring distance between two sectors (0..=4).
    pub fn ring_distance(self, other: Region) -> u8 {
        let d = (i16::from(self.0) - i16::from(other.0)).unsigned_abs() as u8;
        d.min(8 - d)
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Per-step 9-channel feature vector: mean acceleration, gravity and
/// magnetic field over the step window, x/y/z each.
pub type StepFeature = [f64; 9];

/// Detector that produced a [`TurnEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Threshold,
    ThresholdMerged,
    HmmLegacy,
    HmmBlock,
    Pelt,
    PeltIf,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Threshold,
        Method::ThresholdMerged,
        Method::HmmLegacy,
        Method::HmmBlock,
        Method::Pelt,
        Method::PeltIf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Threshold => "threshold",
            Method::ThresholdMerged => "threshold_merged",
            Method::HmmLegacy => "hmm_legacy",
            Method::HmmBlock => "hmm_block",
            Method::Pelt => "pelt",
            Method::PeltIf => "pelt_if",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A detected turn, spanning an inclusive range of step ordinals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub first_step: usize,
    pub last_step: usize,
    pub method: Method,
    /// Detector confidence in `[0, 1]`. Hard binary rules report 1.
    pub score: f64,
}

impl TurnEvent {
    pub fn new(first_step: usize, last_step: usize, method: Method, score: f64) -> Self {
        debug_assert!(first_step <= last_step);
        TurnEvent {
            first_step,
            last_step,
            method,
            score: score.clamp(0.0, 1.0),
        }
    }

    /// True if the inclusive spans share at least one step.
    pub fn overlaps(&self, other: &TurnEvent) -> bool {
        self.first_step <= other.last_step && other.first_step <= self.last_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_boundary_examples() {
        assert_eq!(Region::from_theta_deg(30.0).id(), 2);
        assert_eq!(Region::from_theta_deg(0.0).id(), 1);
        assert_eq!(Region::from_theta_deg(22.5).id(), 2);
        assert_eq!(Region::from_theta_deg(22.4999).id(), 1);
        // r1's arc is [-22.5, 22.5), so the lower boundary belongs to r1
        assert_eq!(Region::from_theta_deg(-22.5).id(), 1);
        assert_eq!(Region::from_theta_deg(-22.5001).id(), 8);
        assert_eq!(Region::from_theta_deg(180.0).id(), 5);
        assert_eq!(Region::from_theta_deg(-180.0).id(), 5);
    }

    #[test]
    fn region_ring_distance() {
        let r1 = Region::new(1);
        let r8 = Region::new(8);
        assert_eq!(r1.ring_distance(r8), 1);
        assert_eq!(r1.ring_distance(Region::new(5)), 4);
        assert_eq!(r1.ring_distance(r1), 0);
    }

    #[test]
    fn method_json_names() {
        let s = serde_json::to_string(&Method::ThresholdMerged).unwrap();
        assert_eq!(s, "\"threshold_merged\"");
        let m: Method = serde_json::from_str("\"pelt_if\"").unwrap();
        assert_eq!(m, Method::PeltIf);
    }

    #[test]
    fn event_json_shape() {
        let e = TurnEvent::new(3, 5, Method::Pelt, 1.0);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(
            s,
            "{\"first_step\":3,\"last_step\":5,\"method\":\"pelt\",\"score\":1.0}"
        );
    }
}
