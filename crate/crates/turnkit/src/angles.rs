//! Circular arithmetic helpers. All angles are degrees.

/// Wrap an angle to `[-180, 180)`.
pub fn wrap_deg(x: f64) -> f64 {
    (x + 180.0).rem_euclid(360.0) - 180.0
}

/// Signed difference `b - a` wrapped to `(-180, 180]`.
///
/// The half-open end is chosen so a full about-face reads as +180
/// rather than -180.
pub fn delta_deg(a: f64, b: f64) -> f64 {
    let d = wrap_deg(b - a);
    if d == -180.0 {
        180.0
    } else {
        d
    }
}

/// Circular mean of a set of angles, in `[-180, 180)`.
///
/// Returns 0 for an empty slice.
pub fn circular_mean_deg(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let (mut s, mut c) = (0.0, 0.0);
    for &a in angles {
        let r = a.to_radians();
        s += r.sin();
        c += r.cos();
    }
    wrap_deg(s.atan2(c).to_degrees())
}

/// Remove +-360 discontinuities from a wrapped angle series.
///
/// The first element is kept as-is; every following element is the
/// previous unwrapped value plus the wrapped step difference.
pub fn unwrap_deg(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut prev_raw = match series.first() {
        Some(&v) => v,
        None => return out,
    };
    let mut acc = prev_raw;
    out.push(acc);
    for &v in &series[1..] {
        acc += delta_deg(prev_raw, v);
        prev_raw = v;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_deg(180.0), -180.0);
        assert_eq!(wrap_deg(-180.0), -180.0);
        assert_eq!(wrap_deg(0.0), 0.0);
        assert_abs_diff_eq!(wrap_deg(370.0), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_deg(-370.0), -10.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_wraps_across_seam() {
        // 170 -> -170 is a 20 degree left-over step, not -340
        assert_abs_diff_eq!(delta_deg(170.0, -170.0), 20.0, epsilon = 1e-12);
        assert_eq!(delta_deg(0.0, 180.0), 180.0);
        assert_eq!(delta_deg(0.0, -180.0), 180.0);
    }

    #[test]
    fn circular_mean_near_seam() {
        let m = circular_mean_deg(&[179.0, -179.0]);
        assert!(m.abs() > 179.0 || m == -180.0, "mean {m} should sit at the seam");
    }

    #[test]
    fn unwrap_recovers_cumulative_heading() {
        let wrapped: Vec<f64> = [0.0, 90.0, 179.0, -130.0, -40.0, 50.0]
            .iter()
            .map(|&v| wrap_deg(v))
            .collect();
        let un = unwrap_deg(&wrapped);
        assert_abs_diff_eq!(un[3], 230.0, epsilon = 1e-12);
        assert_abs_diff_eq!(un[5], 410.0, epsilon = 1e-12);
    }
}
