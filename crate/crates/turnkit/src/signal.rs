//! IMU ingestion and the step-level front end.
//!
//! This module turns a raw 12-channel IMU log into the per-step series the
//! detectors consume: heel-strike step records, integrated yaw, direction
//! angles relative to the walk baseline, and peak-delimited step blocks.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::angles::{circular_mean_deg, delta_deg, unwrap_deg, wrap_deg};
use crate::butter::{self, Coefficients};
use crate::error::{Error, Result};
use crate::types::Region;

/// Column order of the IMU CSV interchange format.
pub const IMU_CSV_HEADER: [&str; 13] = [
    "t", "acc_x", "acc_y", "acc_z", "grav_x", "grav_y", "grav_z", "mag_x", "mag_y", "mag_z",
    "gyr_x", "gyr_y", "gyr_z",
];

pub type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// One timestamped IMU sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds, monotone non-decreasing within a log.
    pub t: f64,
    /// Accelerometer, m/s^2 (gravity included).
    pub acc: Vec3,
    /// Isolated gravity vector, m/s^2.
    pub grav: Vec3,
    /// Magnetic field, microtesla.
    pub mag: Vec3,
    /// Angular rate, rad/s.
    pub gyro: Vec3,
}

/// An ordered IMU recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuLog {
    pub samples: Vec<ImuSample>,
    pub sample_rate_hz: f64,
}

/// One detected step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Integrated heading at the end of the step, degrees in `[-180, 180)`.
    pub yaw: f64,
    /// Direction angle relative to the walk baseline, degrees in `[-180, 180)`.
    pub theta: f64,
    /// Dead-reckoned planar position, meters.
    pub pos: [f64; 2],
}

/// A peak-delimited group of consecutive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub first_step: usize,
    pub last_step: usize,
    /// Circular mean of the member steps' direction angles.
    pub theta: f64,
    pub region: Region,
}

impl BlockRecord {
    /// Number of member steps; blocks are never empty.
    pub fn len(&self) -> usize {
        self.last_step - self.first_step + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bandpass and peak-picking parameters for block segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Prototype filter order, 2 or 4.
    pub order: usize,
    /// Passband low edge, cycles per step.
    pub low_cut: f64,
    /// Passband high edge, cycles per step.
    pub high_cut: f64,
    /// Minimum peak prominence, degrees.
    pub peak_prominence: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            order: 2,
            low_cut: 0.02,
            high_cut: 0.25,
            peak_prominence: 10.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order != 2 && self.order != 4 {
            return Err(Error::Config(format!(
                "filter order must be 2 or 4, got {}",
                self.order
            )));
        }
        if !(0.0 < self.low_cut && self.low_cut < self.high_cut && self.high_cut < 0.5) {
            return Err(Error::Config(
                "cutoffs must satisfy 0 < low_cut < high_cut < 0.5".into(),
            ));
        }
        Ok(())
    }
}

/// Step-detection parameters for the PDR front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Lowpass cutoff applied to the acceleration magnitude, Hz.
    pub lowpass_cutoff_hz: f64,
    /// Peak height above the gravity-removed baseline, m/s^2.
    pub peak_threshold: f64,
    /// Refractory interval between accepted peaks, seconds.
    pub min_interval_s: f64,
    /// Fixed stride length for dead reckoning, meters.
    pub step_length_m: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            lowpass_cutoff_hz: 3.0,
            peak_threshold: 1.2,
            min_interval_s: 0.3,
            step_length_m: 0.7,
        }
    }
}

/// Parse the IMU CSV interchange format.
///
/// The header must match [`IMU_CSV_HEADER`] exactly. The sample rate is
/// estimated as the median of `1/dt` over successive timestamps.
pub fn parse_imu_csv<R: Read>(reader: R) -> Result<ImuLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| Error::BadHeader(e.to_string()))?
        .clone();
    let got: Vec<&str> = header.iter().collect();
    for want in IMU_CSV_HEADER {
        if !got.contains(&want) {
            return Err(Error::MissingColumn(want.to_string()));
        }
    }
    if got != IMU_CSV_HEADER {
        return Err(Error::BadHeader(format!(
            "expected columns `{}`, got `{}`",
            IMU_CSV_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2; // 1-based, header is row 1
        let record = record.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != 13 {
            return Err(Error::Parse {
                row,
                msg: format!("expected 13 fields, got {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 13];
        for (k, field) in record.iter().enumerate() {
            vals[k] = field.parse::<f64>().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric value `{}` in column `{}`", field, IMU_CSV_HEADER[k]),
            })?;
            if !vals[k].is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite value in column `{}`", IMU_CSV_HEADER[k]),
                });
            }
        }
        let s = ImuSample {
            t: vals[0],
            acc: [vals[1], vals[2], vals[3]],
            grav: [vals[4], vals[5], vals[6]],
            mag: [vals[7], vals[8], vals[9]],
            gyro: [vals[10], vals[11], vals[12]],
        };
        if let Some(prev) = samples.last() {
            let prev: &ImuSample = prev;
            if s.t <= prev.t {
                return Err(Error::NonMonotoneTime { row });
            }
        }
        samples.push(s);
    }

    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "IMU log needs at least 2 samples, got {}",
            samples.len()
        )));
    }

    let mut rates: Vec<f64> = samples
        .windows(2)
        .map(|w| 1.0 / (w[1].t - w[0].t))
        .collect();
    rates.sort_by(f64::total_cmp);
    let sample_rate_hz = median_of_sorted(&rates);

    Ok(ImuLog {
        samples,
        sample_rate_hz,
    })
}

/// Write a log in the IMU CSV interchange format.
pub fn write_imu_csv<W: Write>(log: &ImuLog, mut w: W) -> Result<()> {
    writeln!(w, "{}", IMU_CSV_HEADER.join(","))?;
    for s in &log.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.acc[0],
            s.acc[1],
            s.acc[2],
            s.grav[0],
            s.grav[1],
            s.grav[2],
            s.mag[0],
            s.mag[1],
            s.mag[2],
            s.gyro[0],
            s.gyro[1],
            s.gyro[2]
        )?;
    }
    Ok(())
}

/// Write step records as CSV (`index,t_start,t_end,yaw_deg,theta_deg,pos_x,pos_y`).
pub fn write_steps_csv<W: Write>(steps: &[StepRecord], mut w: W) -> Result<()> {
    writeln!(w, "index,t_start,t_end,yaw_deg,theta_deg,pos_x,pos_y")?;
    for s in steps {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.index, s.t_start, s.t_end, s.yaw, s.theta, s.pos[0], s.pos[1]
        )?;
    }
    Ok(())
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Detect heel-strike steps and integrate heading.
///
/// The acceleration magnitude is lowpassed, the per-sample gravity magnitude
/// subtracted, and local maxima above `peak_threshold` accepted subject to
/// the refractory interval. Yaw is the integral of the gravity-axis gyro
/// component; positions advance a fixed stride along the heading.
pub fn detect_steps(log: &ImuLog, cfg: &StepConfig) -> Result<Vec<StepRecord>> {
    let n = log.samples.len();
    let settle = (log.sample_rate_hz / cfg.lowpass_cutoff_hz).ceil() as usize;
    if n < settle.max(4) {
        return Err(Error::InsufficientData(format!(
            "log has {n} samples but the detection filter needs at least {settle}"
        )));
    }

    let cutoff = cfg.lowpass_cutoff_hz / log.sample_rate_hz;
    let coeffs = butter::design_lowpass_biquad(cutoff.min(0.49))?;

    let mag: Vec<f64> = log.samples.iter().map(|s| norm(s.acc)).collect();
    let zi: Vec<f64> = butter::lfilter_zi(&coeffs)
        .iter()
        .map(|z| z * mag[0])
        .collect();
    let smooth = butter::lfilter(&coeffs, &mag, &zi);
    let dev: Vec<f64> = smooth
        .iter()
        .zip(&log.samples)
        .map(|(m, s)| m - norm(s.grav))
        .collect();

    // Integrated yaw (degrees) at every sample, trapezoidal rule on the
    // gravity-axis angular rate.
    let mut yaw_at = Vec::with_capacity(n);
    let mut acc_deg = 0.0;
    yaw_at.push(0.0);
    for i in 1..n {
        let rate = |k: usize| {
            let s = &log.samples[k];
            let g = norm(s.grav);
            if g > 1e-9 {
                dot(s.gyro, scale(s.grav, 1.0 / g)).to_degrees()
            } else {
                0.0
            }
        };
        let dt = log.samples[i].t - log.samples[i - 1].t;
        acc_deg += 0.5 * (rate(i - 1) + rate(i)) * dt;
        yaw_at.push(acc_deg);
    }

    let mut steps = Vec::new();
    let mut last_peak_t = f64::NEG_INFINITY;
    let mut seg_start_t = log.samples[0].t;
    let mut pos = [0.0f64, 0.0];
    for i in 1..n - 1 {
        let is_peak = dev[i] > cfg.peak_threshold && dev[i] > dev[i - 1] && dev[i] >= dev[i + 1];
        if !is_peak {
            continue;
        }
        let t = log.samples[i].t;
        if t - last_peak_t < cfg.min_interval_s {
            continue;
        }
        last_peak_t = t;
        let yaw = wrap_deg(yaw_at[i]);
        let hd = yaw.to_radians();
        pos = [
            pos[0] + cfg.step_length_m * hd.cos(),
            pos[1] + cfg.step_length_m * hd.sin(),
        ];
        steps.push(StepRecord {
            index: steps.len(),
            t_start: seg_start_t,
            t_end: t,
            yaw,
            theta: 0.0,
            pos,
        });
        seg_start_t = t;
    }
    Ok(steps)
}

/// Direction angles for a bare yaw series, relative to the walk baseline.
///
/// The baseline is the circular mean of the leading run of steps that stay
/// within one region half-width (22.5 degrees) of the first step's heading,
/// which stands in for the first block of the walk.
pub fn relative_theta(yaw: &[f64]) -> Vec<f64> {
    if yaw.is_empty() {
        return Vec::new();
    }
    let un = unwrap_deg(yaw);
    let lead_end = un
        .iter()
        .position(|&y| (y - un[0]).abs() > 22.5)
        .unwrap_or(un.len());
    let baseline = circular_mean_deg(&un[..lead_end.max(1)]);
    un.iter().map(|&y| wrap_deg(y - baseline)).collect()
}

/// Minimum horizontal speed before the velocity-vs-orientation correction
/// is trusted, m/s.
const MIN_CORRECTION_SPEED: f64 = 0.15;

/// Populate per-step direction angles from the raw log.
///
/// Theta is the baseline-relative heading plus, where the per-step horizontal
/// velocity estimate is large enough to carry a direction, the angle between
/// that velocity and the integrated orientation.
pub fn direction_angle(steps: &mut [StepRecord], log: &ImuLog) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::InsufficientData("no steps to annotate".into()));
    }
    let yaws: Vec<f64> = steps.iter().map(|s| s.yaw).collect();
    let rel = relative_theta(&yaws);

    // Fixed horizontal basis from the first sample's gravity.
    let g0 = log.samples[0].grav;
    let g_norm = norm(g0);
    let g_hat = if g_norm > 1e-9 {
        scale(g0, 1.0 / g_norm)
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = sub([1.0, 0.0, 0.0], scale(g_hat, g_hat[0]));
    if norm(e1) < 1e-6 {
        e1 = sub([0.0, 1.0, 0.0], scale(g_hat, g_hat[1]));
    }
    e1 = scale(e1, 1.0 / norm(e1));
    let e2 = cross(g_hat, e1);

    for (step, rel_theta) in steps.iter_mut().zip(rel) {
        let mut v = [0.0f64; 3];
        let window = log
            .samples
            .windows(2)
            .filter(|w| w[1].t > step.t_start && w[1].t <= step.t_end);
        for w in window {
            let dt = w[1].t - w[0].t;
            let lin = sub(w[1].acc, w[1].grav);
            let horiz = sub(lin, scale(g_hat, dot(lin, g_hat)));
            v = [v[0] + horiz[0] * dt, v[1] + horiz[1] * dt, v[2] + horiz[2] * dt];
        }
        let speed = norm(v);
        let correction = if speed >= MIN_CORRECTION_SPEED {
            let angle_v = dot(v, e2).atan2(dot(v, e1)).to_degrees();
            delta_deg(step.yaw, angle_v)
        } else {
            0.0
        };
        step.theta = wrap_deg(rel_theta + correction);
    }
    Ok(())
}

/// Zero-phase Butterworth bandpass over the step-indexed yaw series.
///
/// The input should be an unwrapped (cumulative) heading series; a wrapped
/// series would ring at the +-180 seam. Pass through [`unwrap_deg`] first
/// when working from wrapped step records.
pub fn bandpass_yaw(yaw: &[f64], cfg: &FilterConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if yaw.len() < 3 * cfg.order {
        return Err(Error::InsufficientData(format!(
            "series of length {} is shorter than 3x filter order {}",
            yaw.len(),
            cfg.order
        )));
    }
    let coeffs: Coefficients = butter::design_bandpass(cfg.order, cfg.low_cut, cfg.high_cut)?;
    Ok(butter::filtfilt(&coeffs, yaw))
}

/// Indices of local maxima of `|series|` with at least `min_prominence`.
fn prominent_peaks(series: &[f64], min_prominence: f64) -> Vec<usize> {
    let v: Vec<f64> = series.iter().map(|x| x.abs()).collect();
    let n = v.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(v[i] > v[i - 1] && v[i] > v[i + 1]) {
            continue;
        }
        let mut left_min = v[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            if v[j] > v[i] {
                break;
            }
            left_min = left_min.min(v[j]);
        }
        let mut right_min = v[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            if v[j] > v[i] {
                break;
            }
            right_min = right_min.min(v[j]);
        }
        if v[i] - left_min.max(right_min) >= min_prominence {
            peaks.push(i);
        }
    }
    peaks
}

/// Partition steps into blocks at the peaks of the bandpassed yaw.
///
/// Peaks close a block: blocks are `[0, p1], [p1+1, p2], ..., [pk+1, n-1]`.
/// With no qualifying peaks the whole walk is a single block.
pub fn segment_blocks(filtered: &[f64], theta: &[f64], cfg: &FilterConfig) -> Vec<BlockRecord> {
    assert_eq!(
        filtered.len(),
        theta.len(),
        "filtered and theta series must align"
    );
    let n = filtered.len();
    if n == 0 {
        return Vec::new();
    }
    let peaks = prominent_peaks(filtered, cfg.peak_prominence);

    let mut blocks = Vec::with_capacity(peaks.len() + 1);
    let mut start = 0usize;
    for &p in &peaks {
        blocks.push(make_block(start, p, theta));
        start = p + 1;
    }
    if start <= n - 1 {
        blocks.push(make_block(start, n - 1, theta));
    }
    blocks
}

fn make_block(first: usize, last: usize, theta: &[f64]) -> BlockRecord {
    let mean = circular_mean_deg(&theta[first..=last]);
    BlockRecord {
        first_step: first,
        last_step: last,
        theta: mean,
        region: Region::from_theta_deg(mean),
    }
}
