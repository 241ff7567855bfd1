//! Butterworth filter design and zero-phase application.
//!
//! Filters are designed for a unit sample rate, so cutoffs are given in
//! cycles per sample (Nyquist = 0.5). Coefficients follow the usual
//! `b`/`a` transfer-function convention with `a[0] = 1`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Transfer-function coefficients, numerator `b` over denominator `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Design a Butterworth bandpass filter.
///
/// `order` is the prototype order (the realized bandpass has `2*order`
/// poles), matching the convention of common DSP toolkits.
pub fn design_bandpass(order: usize, low_cut: f64, high_cut: f64) -> Result<Coefficients> {
    if order == 0 || order > 8 {
        return Err(Error::Config(format!("unsupported filter order {order}")));
    }
    if !(0.0 < low_cut && low_cut < high_cut && high_cut < 0.5) {
        return Err(Error::Config(format!(
            "bandpass cutoffs must satisfy 0 < low < high < 0.5, got [{low_cut}, {high_cut}]"
        )));
    }

    // Pre-warped analog band edges for the bilinear transform s = (1-z')/(1+z').
    let w1 = (PI * low_cut).tan();
    let w2 = (PI * high_cut).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    // Analog prototype poles on the unit circle, left half-plane.
    let n = order as i32;
    let mut s_poles = Vec::with_capacity(2 * order);
    for k in 0..n {
        let phi = PI * f64::from(2 * k + n + 1) / f64::from(2 * n);
        let p = Complex64::new(phi.cos(), phi.sin());
        // Lowpass -> bandpass: each pole splits into the two roots of
        // s^2 - bw*p*s + w0^2 = 0.
        let bp = p * bw;
        let disc = (bp * bp - 4.0 * w0_sq).sqrt();
        s_poles.push((bp + disc) * 0.5);
        s_poles.push((bp - disc) * 0.5);
    }

    // Bilinear transform of poles; zeros land on z = +1 (order) and z = -1 (order).
    let one = Complex64::new(1.0, 0.0);
    let z_poles: Vec<Complex64> = s_poles.iter().map(|s| (one + s) / (one - s)).collect();

    let a = real_poly_from_roots(&z_poles)?;
    let mut b = vec![1.0];
    for _ in 0..order {
        b = poly_mul(&b, &[1.0, -1.0]);
        b = poly_mul(&b, &[1.0, 1.0]);
    }

    // Normalize to unit gain at the warped center frequency.
    let omega0 = 2.0 * w0_sq.sqrt().atan();
    let gain = response_at(&Coefficients { b: b.clone(), a: a.clone() }, omega0 / (2.0 * PI)).norm();
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::Internal("degenerate bandpass design".into()));
    }
    for c in &mut b {
        *c /= gain;
    }
    Ok(Coefficients { b, a })
}

/// Design a Butterworth lowpass biquad (2 poles).
pub fn design_lowpass_biquad(cutoff: f64) -> Result<Coefficients> {
    if !(0.0 < cutoff && cutoff < 0.5) {
        return Err(Error::Config(format!(
            "lowpass cutoff must lie in (0, 0.5), got {cutoff}"
        )));
    }
    let c = 1.0 / (PI * cutoff).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let a0 = 1.0 + sqrt2 * c + c * c;
    Ok(Coefficients {
        b: vec![1.0 / a0, 2.0 / a0, 1.0 / a0],
        a: vec![1.0, 2.0 * (1.0 - c * c) / a0, (1.0 - sqrt2 * c + c * c) / a0],
    })
}

/// Complex frequency response at `freq` cycles per sample.
pub fn response_at(coeffs: &Coefficients, freq: f64) -> Complex64 {
    let omega = 2.0 * PI * freq;
    let eval = |poly: &[f64]| {
        poly.iter()
            .enumerate()
            .map(|(k, &c)| Complex64::from_polar(1.0, -omega * k as f64) * c)
            .sum::<Complex64>()
    };
    eval(&coeffs.b) / eval(&coeffs.a)
}

/// Magnitude response of a forward-backward (zero-phase) pass: `|H|^2`.
pub fn zero_phase_gain(coeffs: &Coefficients, freq: f64) -> f64 {
    response_at(coeffs, freq).norm_sqr()
}

/// Single causal pass with the given initial state (direct form II transposed).
pub fn lfilter(coeffs: &Coefficients, x: &[f64], zi: &[f64]) -> Vec<f64> {
    let b = &coeffs.b;
    let a = &coeffs.a;
    let m = b.len().max(a.len()) - 1;
    debug_assert_eq!(zi.len(), m);
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);

    let mut z = zi.to_vec();
    let mut y = Vec::with_capacity(x.len());
    for &xn in x {
        let yn = get(b, 0) * xn + z.first().copied().unwrap_or(0.0);
        for i in 0..m.saturating_sub(1) {
            z[i] = get(b, i + 1) * xn + z[i + 1] - get(a, i + 1) * yn;
        }
        if m > 0 {
            z[m - 1] = get(b, m) * xn - get(a, m) * yn;
        }
        y.push(yn);
    }
    y
}

/// Steady-state filter state for a unit-step input.
///
/// Scaling this by the first sample of a signal removes the startup
/// transient for signals that begin near steady level.
pub fn lfilter_zi(coeffs: &Coefficients) -> Vec<f64> {
    let b = &coeffs.b;
    let a = &coeffs.a;
    let m = b.len().max(a.len()) - 1;
    if m == 0 {
        return Vec::new();
    }
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);

    // Solve (I - A) zi = B with A the transposed companion matrix of `a`.
    let mut mat = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for j in 0..m {
        mat[j][j] = 1.0;
        mat[j][0] += get(a, j + 1);
        if j + 1 < m {
            mat[j][j + 1] -= 1.0;
        }
        rhs[j] = get(b, j + 1) - get(a, j + 1) * get(b, 0);
    }
    solve_dense(&mut mat, &mut rhs);
    rhs
}

/// Zero-phase filtering: forward pass, backward pass, transients removed by
/// odd-symmetric edge extension and steady-state initial conditions.
pub fn filtfilt(coeffs: &Coefficients, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let padlen = (3 * coeffs.b.len().max(coeffs.a.len())).min(n - 1);

    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let zi = lfilter_zi(coeffs);
    let scale = |v: f64| zi.iter().map(|&z| z * v).collect::<Vec<_>>();

    let fwd = lfilter(coeffs, &ext, &scale(ext[0]));
    let rev: Vec<f64> = fwd.into_iter().rev().collect();
    let bwd = lfilter(coeffs, &rev, &scale(rev[0]));
    let mut y: Vec<f64> = bwd.into_iter().rev().collect();
    y.drain(..padlen);
    y.truncate(n);
    y
}

fn real_poly_from_roots(roots: &[Complex64]) -> Result<Vec<f64>> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        poly = next;
    }
    let mut out = Vec::with_capacity(poly.len());
    for c in poly {
        if c.im.abs() > 1e-8 {
            return Err(Error::Internal(format!(
                "polynomial from conjugate roots has residual imaginary part {}",
                c.im
            )));
        }
        out.push(c.re);
    }
    Ok(out)
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `rhs` receives the solution.
fn solve_dense(mat: &mut [Vec<f64>], rhs: &mut [f64]) {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))
            .unwrap();
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        let diag = mat[col][col];
        for row in col + 1..n {
            let f = mat[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                mat[row][k] -= f * mat[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = rhs[col];
        for k in col + 1..n {
            v -= mat[col][k] * rhs[k];
        }
        rhs[col] = v / mat[col][col];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Reference coefficients from scipy.signal.butter(2, [0.04, 0.5], btype='band')
    // (cutoffs 0.02 and 0.25 cycles/sample normalized to a 0.5 Nyquist).
    const SCIPY_B2: [f64; 5] = [
        0.25702345401429055,
        0.0,
        -0.5140469080285811,
        0.0,
        0.25702345401429055,
    ];
    const SCIPY_A2: [f64; 5] = [
        1.0,
        -1.893115637493167,
        1.1754120031868691,
        -0.439171419433218,
        0.17541200318686886,
    ];

    #[test]
    fn bandpass_order2_matches_reference() {
        let c = design_bandpass(2, 0.02, 0.25).unwrap();
        assert_eq!(c.b.len(), 5);
        assert_eq!(c.a.len(), 5);
        for (got, want) in c.b.iter().zip(SCIPY_B2) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-12);
        }
        for (got, want) in c.a.iter().zip(SCIPY_A2) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-12);
        }
    }

    #[test]
    fn bandpass_order4_matches_reference() {
        // scipy.signal.butter(4, [0.04, 0.5], btype='band')
        let want_b = [
            0.07233044087954399,
            0.0,
            -0.28932176351817596,
            0.0,
            0.43398264527726393,
            0.0,
            -0.28932176351817596,
            0.0,
            0.07233044087954399,
        ];
        let want_a = [
            1.0,
            -3.80195707295708,
            6.106359921381415,
            -5.8753137741550745,
            4.165425558252802,
            -2.2011725411721015,
            0.7152833309030865,
            -0.12781583997410842,
            0.019566646603274836,
        ];
        let c = design_bandpass(4, 0.02, 0.25).unwrap();
        for (got, want) in c.b.iter().zip(want_b) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-11);
        }
        for (got, want) in c.a.iter().zip(want_a) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-11);
        }
    }

    #[test]
    fn zi_matches_reference() {
        // scipy.signal.lfilter_zi for the order-2 design above.
        let want = [
            -0.2570234540142908,
            -0.25702345401429033,
            0.2570234540142905,
            0.2570234540142906,
        ];
        let c = design_bandpass(2, 0.02, 0.25).unwrap();
        let zi = lfilter_zi(&c);
        for (got, want) in zi.iter().zip(want) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-10);
        }
    }

    #[test]
    fn filtfilt_matches_reference_samples() {
        // scipy.signal.filtfilt on sin(2*pi*0.0707*t) + 0.5, 60 samples.
        let x: Vec<f64> = (0..60)
            .map(|t| (2.0 * PI * 0.0707 * t as f64).sin() + 0.5)
            .collect();
        let c = design_bandpass(2, 0.02, 0.25).unwrap();
        let y = filtfilt(&c, &x);
        let head = [
            -0.029748286521302247,
            0.3995073687093358,
            0.7459180564513772,
            0.9421978801153786,
            0.9503082641472831,
            0.7688318973199254,
        ];
        for (got, want) in y.iter().zip(head) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-9);
        }
        let mid = [
            -0.05741162082371665,
            0.3849680648485824,
            0.7662405879044804,
            1.0127867842000644,
            1.076932451572752,
            0.946162579014336,
        ];
        for (got, want) in y[28..34].iter().zip(mid) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-9);
        }
    }

    #[test]
    fn gain_at_band_edges() {
        let c = design_bandpass(2, 0.02, 0.25).unwrap();
        // scipy freqz gave |H|^2 = 0.99999 at sqrt(0.02*0.25) and 7.5e-7 at 0.49.
        let mid = zero_phase_gain(&c, (0.02f64 * 0.25).sqrt());
        assert!(mid > 0.999, "mid-band |H|^2 = {mid}");
        let stop = zero_phase_gain(&c, 0.49);
        assert!(stop < 1e-5, "stop-band |H|^2 = {stop}");
    }

    #[test]
    fn lowpass_biquad_dc_gain_is_unity() {
        let c = design_lowpass_biquad(0.03).unwrap();
        let dc = response_at(&c, 0.0).norm();
        assert_abs_diff_eq!(dc, 1.0, epsilon = 1e-12);
        let hi = response_at(&c, 0.45).norm();
        assert!(hi < 0.01, "high-frequency gain {hi}");
    }

    #[test]
    fn rejects_bad_cutoffs() {
        assert!(design_bandpass(2, 0.3, 0.2).is_err());
        assert!(design_bandpass(2, 0.0, 0.2).is_err());
        assert!(design_bandpass(2, 0.1, 0.5).is_err());
        assert!(design_lowpass_biquad(0.5).is_err());
    }
}
