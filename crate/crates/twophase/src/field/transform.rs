use std::f64::consts::PI;

use std::cell::RefCell;

use rustfft::FftPlanner;

use crate::{Error, Result, C64};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place FFT with a per-thread plan cache.
pub(crate) fn fft(buf: &mut [C64], inverse: bool) {
    fft_batch(buf, buf.len(), inverse);
}

/// In-place FFTs of consecutive length-`n` chunks.
pub(crate) fn fft_batch(buf: &mut [C64], n: usize, inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    plan.process(buf);
}

fn check_pow2(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

/// Angular frequencies `2 pi k / period` in FFT order.
pub fn fft_frequencies(n: usize, period: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            2.0 * PI * s / period
        })
        .collect()
}

/// Mode amplitudes `c_m` with `u(x_j) = sum_m c_m exp(i xi_m x_j)`.
pub fn tangential_transform(values: &[C64]) -> Result<Vec<C64>> {
    let n = values.len();
    check_pow2(n)?;
    let mut buf = values.to_vec();
    fft(&mut buf, false);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    Ok(buf)
}

/// Inverse of [`tangential_transform`].
pub fn inverse_tangential_transform(amps: &[C64]) -> Result<Vec<C64>> {
    let n = amps.len();
    check_pow2(n)?;
    let mut buf = amps.to_vec();
    fft(&mut buf, true);
    Ok(buf)
}

/// Discrete Laplace transform on `t_j = j dt`: returns `F_L[f](gamma + i tau_k)
/// ~ dt sum_j exp(-lambda_k t_j) f_j` for the FFT-ordered `tau_k`.
pub fn laplace_transform(signal: &[C64], dt: f64, gamma: f64) -> Result<Vec<C64>> {
    let n = signal.len();
    check_pow2(n)?;
    let mut buf: Vec<C64> = signal.iter().enumerate().map(|(j, f)| f * (-gamma * j as f64 * dt).exp() * dt).collect();
    fft(&mut buf, false);
    Ok(buf)
}

/// Inverse of [`laplace_transform`].
pub fn inverse_laplace_transform(values: &[C64], dt: f64, gamma: f64) -> Result<Vec<C64>> {
    let n = values.len();
    check_pow2(n)?;
    let mut buf = values.to_vec();
    fft(&mut buf, true);
    let s = 1.0 / (n as f64 * dt);
    Ok(buf.iter().enumerate().map(|(j, v)| v * s * (gamma * j as f64 * dt).exp()).collect())
}

/// Laplace-domain points `gamma + i tau_k` matching [`laplace_transform`].
pub fn laplace_points(n: usize, dt: f64, gamma: f64) -> Vec<C64> {
    fft_frequencies(n, n as f64 * dt).into_iter().map(|t| C64::new(gamma, t)).collect()
}

/// Fraction of the window used by [`taper`].
pub const TAPER_FRACTION: f64 = 0.1;

/// Smooth cutoff equal to one on `[0, (1-frac) T]` and falling to zero at `T`.
pub fn taper(t: f64, t_end: f64, frac: f64) -> f64 {
    let start = (1.0 - frac) * t_end;
    if t <= start {
        1.0
    } else if t >= t_end {
        0.0
    } else {
        0.5 * (1.0 + (PI * (t - start) / (t_end - start)).cos())
    }
}

/// Relative size of the weighted signal over the last tenth of the window.
pub fn tail_ratio(signal: &[C64], dt: f64, gamma: f64) -> f64 {
    let n = signal.len();
    let w: Vec<f64> = signal.iter().enumerate().map(|(j, f)| f.norm() * (-gamma * j as f64 * dt).exp()).collect();
    let peak = w.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let start = n - (n / 10).max(1);
    w[start..].iter().cloned().fold(0.0, f64::max) / peak
}

/// Largest accepted [`tail_ratio`] before a wraparound error.
pub const WRAPAROUND_TOL: f64 = 1e-8;

/// `Lambda^{1/2}_gamma f = e^{gamma t} F^{-1}[lambda^{1/2} F[e^{-gamma t} f]]`,
/// principal root, `lambda = gamma + i tau`.
pub fn half_time_derivative(signal: &[C64], dt: f64, gamma: f64) -> Result<Vec<C64>> {
    time_multiplier(signal, dt, gamma, |l| l.sqrt())
}

/// Applies a Laplace-domain multiplier `m(lambda)` to a sampled signal.
pub fn time_multiplier(signal: &[C64], dt: f64, gamma: f64, m: impl Fn(C64) -> C64) -> Result<Vec<C64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    let r = tail_ratio(signal, dt, gamma);
    if r > WRAPAROUND_TOL {
        return Err(Error::Wraparound(format!("weighted tail ratio {r:e}")));
    }
    apply_time_multiplier(signal, dt, gamma, m)
}

/// [`time_multiplier`] without the decay check. Meant for intermediates of a
/// composition, where the periodic weighted setting makes `m1 m2` exact even
/// if the intermediate carries a causal tail.
pub fn apply_time_multiplier(signal: &[C64], dt: f64, gamma: f64, m: impl Fn(C64) -> C64) -> Result<Vec<C64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    let mut hat = laplace_transform(signal, dt, gamma)?;
    for (v, l) in hat.iter_mut().zip(laplace_points(signal.len(), dt, gamma)) {
        *v *= m(l);
    }
    inverse_laplace_transform(&hat, dt, gamma)
}

/// Spectral time derivative of a sampled signal through the weighted transform.
pub fn time_derivative(signal: &[C64], dt: f64, gamma: f64) -> Result<Vec<C64>> {
    apply_time_multiplier(signal, dt, gamma, |l| l)
}

/// `max_j e^{-gamma t_j} |a_j - b_j| / max_j e^{-gamma t_j} |b_j|`.
pub fn weighted_relative_error(a: &[C64], b: &[C64], dt: f64, gamma: f64) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (j, (x, y)) in a.iter().zip(b).enumerate() {
        let w = (-gamma * j as f64 * dt).exp();
        num = num.max(w * (x - y).norm());
        den = den.max(w * y.norm());
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn constant_and_harmonic() {
        let n = 16;
        let amps = tangential_transform(&vec![c(2.5); n]).unwrap();
        assert!((amps[0] - c(2.5)).norm() < 1e-15);
        assert!(amps[1..].iter().all(|a| a.norm() < 1e-15));
        let l = 3.0;
        let xs: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).collect();
        let amps = tangential_transform(&xs).unwrap();
        let xi = fft_frequencies(n, l);
        for (k, a) in amps.iter().enumerate() {
            if k == 1 {
                assert!((a - c(1.0)).norm() < 1e-14);
                assert!((xi[k] - 2.0 * PI / l).abs() < 1e-15);
            } else {
                assert!(a.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<C64> = (0..256).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let back = inverse_tangential_transform(&tangential_transform(&v).unwrap()).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).norm() < 1e-13));
        let back = inverse_laplace_transform(&laplace_transform(&v, 0.03, 2.0).unwrap(), 0.03, 2.0).unwrap();
        // roundoff is amplified by the inverse weight e^{gamma t}
        let err = v.iter().zip(&back).enumerate().map(|(j, (a, b))| (a - b).norm() / (2.0 * j as f64 * 0.03).exp()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn not_power_of_two() {
        assert_eq!(tangential_transform(&[c(1.0); 12]), Err(Error::NotPowerOfTwo(12)));
    }

    #[test]
    fn zero_signal() {
        let z = half_time_derivative(&vec![c(0.0); 64], 0.1, 1.0).unwrap();
        assert!(z.iter().all(|v| *v == c(0.0)));
    }

    #[test]
    fn eigenfunction_response() {
        // f = e^{gamma t} e^{i tau0 t}, window-truncated by the weighting itself
        let (n, t_end, gamma) = (512, 8.0, 1.5);
        let dt = t_end / n as f64;
        let tau0 = 2.0 * PI * 5.0 / t_end;
        let f: Vec<C64> = (0..n).map(|j| C64::from_polar((gamma * j as f64 * dt).exp(), tau0 * j as f64 * dt)).collect();
        let hat = laplace_transform(&f, dt, gamma).unwrap();
        let mut out = hat.clone();
        for (v, l) in out.iter_mut().zip(laplace_points(n, dt, gamma)) {
            *v *= l.sqrt();
        }
        let g = inverse_laplace_transform(&out, dt, gamma).unwrap();
        let factor = C64::new(gamma, tau0).sqrt();
        let err = f.iter().zip(&g).map(|(a, b)| (a * factor - b).norm() / a.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        // the checked entry point refuses a signal that has not decayed
        assert!(matches!(half_time_derivative(&f, dt, gamma), Err(Error::Wraparound(_))));
    }

    #[test]
    fn taper_shape() {
        assert_eq!(taper(0.5, 8.0, 0.1), 1.0);
        assert_eq!(taper(8.0, 8.0, 0.1), 0.0);
        assert!((taper(7.6, 8.0, 0.1) - 0.5).abs() < 1e-12);
    }
}
