//! Penalized least-squares smoothing, differentiation and the token noise model.
//!
//! [`smooth`] solves `argmin ‖y − x‖² + s‖D₂x‖²` where `D₂` is the ordinary
//! `(n−2)×n` second-difference operator, so constants and straight lines pass
//! through untouched at any penalty. The penalty parameter is picked by
//! generalized cross-validation over a log grid, and [`robust_smooth`] adds
//! bisquare reweighting on top. [`smooth_dct`] is the reflective-boundary
//! variant diagonalized by the type-II DCT.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::score::Perturbation;

/// Bisquare tuning constant.
const BISQUARE_C: f64 = 4.685;
/// MAD to standard deviation for Gaussian data.
const MAD_TO_SD: f64 = 0.6745;

pub const DEFAULT_ROBUST_ITERATIONS: usize = 3;

/// `n` log-spaced penalties from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Twenty penalties spanning 1e-2 ..= 1e6.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e6, 20)
}

fn check_input(y: &[f64], s: f64) -> Result<()> {
    if y.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {}", y.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty {s} must be finite and >= 0")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Free-boundary second-difference penalty

/// Bands of `D₂ᵀD₂`: main diagonal, first and second super-diagonals.
fn penalty_bands(n: usize) -> [Vec<f64>; 3] {
    let mut a0 = vec![0.0; n];
    let mut a1 = vec![0.0; n.saturating_sub(1)];
    let mut a2 = vec![0.0; n.saturating_sub(2)];
    let d = [1.0, -2.0, 1.0];
    for r in 0..n.saturating_sub(2) {
        for p in 0..3 {
            a0[r + p] += d[p] * d[p];
        }
        a1[r] += d[0] * d[1];
        a1[r + 1] += d[1] * d[2];
        a2[r] += d[0] * d[2];
    }
    [a0, a1, a2]
}

/// Solves `(diag(w) + s·D₂ᵀD₂) x = w ∘ y` with a banded LDLᵀ factorization.
fn penalized_solve(y: &[f64], w: &[f64], s: f64) -> Result<Vec<f64>> {
    let n = y.len();
    let [p0, p1, p2] = penalty_bands(n);
    let a0: Vec<f64> = (0..n).map(|i| w[i] + s * p0[i]).collect();

    let mut d = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        let mut di = a0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        if !(di > 0.0) {
            return Err(Error::Degenerate(format!("penalized system is singular at row {i}")));
        }
        d[i] = di;
        if i + 1 < n {
            let mut v = s * p1[i];
            if i >= 1 {
                v -= l1[i - 1] * l2[i - 1] * d[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < n {
            l2[i] = s * p2[i] / di;
        }
    }

    let mut z: Vec<f64> = (0..n).map(|i| w[i] * y[i]).collect();
    for i in 0..n {
        if i >= 1 {
            z[i] -= l1[i - 1] * z[i - 1];
        }
        if i >= 2 {
            z[i] -= l2[i - 2] * z[i - 2];
        }
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n).rev() {
        if i + 1 < n {
            z[i] -= l1[i] * z[i + 1];
        }
        if i + 2 < n {
            z[i] -= l2[i] * z[i + 2];
        }
    }
    Ok(z)
}

/// Least-squares line through `(i, y[i])`, evaluated at every index.
fn fitted_line(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean_i = (n - 1.0) / 2.0;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mean_i;
        sxy += dx * (v - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    (0..y.len()).map(|i| mean_y + slope * (i as f64 - mean_i)).collect()
}

/// Penalized smoother with the free-boundary second-difference penalty.
pub fn smooth(y: &[f64], s: f64) -> Result<Vec<f64>> {
    check_input(y, s)?;
    if s == 0.0 {
        return Ok(y.to_vec());
    }
    // Lines are in the penalty null space, so only the detrended residual
    // needs solving; this keeps them exact regardless of conditioning.
    let line = fitted_line(y);
    let resid: Vec<f64> = y.iter().zip(&line).map(|(a, b)| a - b).collect();
    let ones = vec![1.0; y.len()];
    let fit = penalized_solve(&resid, &ones, s)?;
    Ok(line.iter().zip(&fit).map(|(a, b)| a + b).collect())
}

fn cached<T, F>(cache: &'static OnceLock<Mutex<HashMap<usize, Arc<T>>>>, n: usize, make: F) -> Arc<T>
where
    F: FnOnce() -> T,
{
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().expect("cache poisoned").get(&n) {
        return v.clone();
    }
    let v = Arc::new(make());
    map.lock().expect("cache poisoned").entry(n).or_insert(v).clone()
}

/// Eigenvalues of `D₂ᵀD₂` for length `n`.
fn penalty_eigenvalues(n: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    cached(&CACHE, n, || {
        let [a0, a1, a2] = penalty_bands(n);
        let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => a0[i],
            1 => a1[i.min(j)],
            2 => a2[i.min(j)],
            _ => 0.0,
        });
        m.symmetric_eigenvalues().iter().map(|&v| v.max(0.0)).collect()
    })
}

/// Trace of the hat matrix `(I + s·D₂ᵀD₂)⁻¹`.
pub fn hat_trace(n: usize, s: f64) -> f64 {
    penalty_eigenvalues(n).iter().map(|mu| 1.0 / (1.0 + s * mu)).sum()
}

fn gcv_from_rss(rss: f64, n: usize, s: f64) -> Result<f64> {
    let nf = n as f64;
    let tr = hat_trace(n, s);
    if nf - tr <= 1e-12 * nf {
        return Err(Error::Degenerate(format!("hat trace {tr:.3} reaches n = {n}")));
    }
    let denom = 1.0 - tr / nf;
    Ok((rss / nf) / (denom * denom))
}

/// GCV(s) = (‖y − x_s‖²/n) / (1 − tr(H_s)/n)².
pub fn gcv_score(y: &[f64], s: f64) -> Result<f64> {
    let x = smooth(y, s)?;
    let rss: f64 = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
    gcv_from_rss(rss, y.len(), s)
}

/// Grid penalty with the smallest GCV score; ties keep the earlier entry.
pub fn gcv_select(y: &[f64], grid: &[f64]) -> Result<f64> {
    select(grid, |s| gcv_score(y, s))
}

fn select<F: FnMut(f64) -> Result<f64>>(grid: &[f64], mut score: F) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &s in grid {
        let g = score(s)?;
        if g < best.0 {
            best = (g, s);
        }
    }
    Ok(best.1)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Tukey bisquare weights from residuals, scaled by the MAD.
pub fn bisquare_weights(residuals: &[f64]) -> Vec<f64> {
    bisquare_weights_floored(residuals, 0.0)
}

/// As [`bisquare_weights`], with the robust SD estimate `MAD/0.6745` held at
/// or above `sd_floor`. Noiseless input otherwise has a MAD near zero and
/// every sample of a movement reads as an outlier.
pub fn bisquare_weights_floored(residuals: &[f64], sd_floor: f64) -> Vec<f64> {
    let mut r = residuals.to_vec();
    let med = median(&mut r);
    let mut dev: Vec<f64> = residuals.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let scale = BISQUARE_C * (mad / MAD_TO_SD).max(sd_floor);
    residuals
        .iter()
        .map(|&r| {
            if scale == 0.0 {
                if r == 0.0 { 1.0 } else { 0.0 }
            } else {
                let u = r / scale;
                if u.abs() < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 }
            }
        })
        .collect()
}

/// Robust smoother: an unweighted GCV fit followed by `iterations` rounds of
/// bisquare reweighting, each refit at its own GCV-selected penalty.
pub fn robust_smooth(y: &[f64], grid: &[f64], iterations: usize) -> Result<Vec<f64>> {
    robust_smooth_floored(y, grid, iterations, 0.0)
}

/// [`robust_smooth`] with a floor on the residual scale (see
/// [`bisquare_weights_floored`]).
pub fn robust_smooth_floored(y: &[f64], grid: &[f64], iterations: usize, sd_floor: f64) -> Result<Vec<f64>> {
    check_input(y, 0.0)?;
    if !(sd_floor >= 0.0) {
        return Err(Error::InvalidArgument("scale floor must be >= 0".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("robust smoothing needs at least one iteration".into()));
    }
    let n = y.len();
    let s = gcv_select(y, grid)?;
    let mut x = smooth(y, s)?;
    for _ in 0..iterations {
        let resid: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let w = bisquare_weights_floored(&resid, sd_floor);
        if w.iter().all(|&v| v == 1.0) {
            break;
        }
        let mut fits = Vec::with_capacity(grid.len());
        let s = select(grid, |s| {
            let fit = penalized_solve(y, &w, s)?;
            let rss: f64 = (0..n).map(|i| w[i] * (y[i] - fit[i]).powi(2)).sum();
            fits.push((s, fit));
            gcv_from_rss(rss, n, s)
        })?;
        x = fits
            .into_iter()
            .find(|(t, _)| *t == s)
            .map(|(_, f)| f)
            .expect("selected penalty was evaluated");
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Reflective-boundary DCT smoother

fn dct_basis(n: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    cached(&CACHE, n, || {
        let nf = n as f64;
        let mut c = vec![0.0; n * n];
        for k in 0..n {
            let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for i in 0..n {
                c[k * n + i] = alpha * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
            }
        }
        c
    })
}

/// `IDCT(Γ ∘ DCT(y))` with `Γₖ = 1/(1 + s·λₖ²)`, `λₖ = −2 + 2cos(kπ/n)`.
///
/// Equivalent to a second-difference penalty with reflective ends; unlike
/// [`smooth`] it bends straight lines near the boundaries.
pub fn smooth_dct(y: &[f64], s: f64) -> Result<Vec<f64>> {
    check_input(y, s)?;
    let n = y.len();
    let c = dct_basis(n);
    let coef: Vec<f64> = (0..n)
        .map(|k| {
            let lambda = -2.0 + 2.0 * (k as f64 * PI / n as f64).cos();
            let gamma = 1.0 / (1.0 + s * lambda * lambda);
            gamma * (0..n).map(|i| c[k * n + i] * y[i]).sum::<f64>()
        })
        .collect();
    Ok((0..n).map(|i| (0..n).map(|k| c[k * n + i] * coef[k]).sum()).collect())
}

// ---------------------------------------------------------------------------

/// Velocity in mm/s: central differences inside, one-sided at the ends.
pub fn velocity(traj: &Trajectory) -> Result<Vec<f64>> {
    let x = &traj.samples;
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("velocity needs at least 3 samples, got {n}")));
    }
    let fs = traj.sample_rate_hz;
    let mut v = Vec::with_capacity(n);
    v.push((x[1] - x[0]) * fs);
    for i in 1..n - 1 {
        v.push((x[i + 1] - x[i - 1]) * 0.5 * fs);
    }
    v.push((x[n - 1] - x[n - 2]) * fs);
    Ok(v)
}

/// Token-level variability. Timing, duration and target jitter perturb the
/// score before integration; position noise is added to the sampled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub position_sd_mm: f64,
    /// Standard deviation of the log activation-duration factor.
    pub duration_jitter_sd: f64,
    pub timing_jitter_sd_ms: f64,
    pub target_jitter_sd_mm: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            position_sd_mm: 0.05,
            duration_jitter_sd: 0.12,
            timing_jitter_sd_ms: 8.0,
            target_jitter_sd_mm: 0.5,
            seed: 0,
        }
    }
}

/// Independent random stream for one `(seed, key)` pair. Different keys give
/// non-overlapping ChaCha streams, so draws do not depend on processing order.
pub fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

fn gauss<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

impl NoiseModel {
    pub fn silent() -> Self {
        Self {
            position_sd_mm: 0.0,
            duration_jitter_sd: 0.0,
            timing_jitter_sd_ms: 0.0,
            target_jitter_sd_mm: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("position_sd_mm", self.position_sd_mm),
            ("duration_jitter_sd", self.duration_jitter_sd),
            ("timing_jitter_sd_ms", self.timing_jitter_sd_ms),
            ("target_jitter_sd_mm", self.target_jitter_sd_mm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Draws score-level jitter. Always consumes the same number of draws so
    /// the stream position does not depend on which sds are zero.
    pub fn draw_perturbation<R: Rng>(&self, rng: &mut R) -> Perturbation {
        let mut z = [0.0; 7];
        for v in z.iter_mut() {
            *v = gauss(rng, 1.0);
        }
        Perturbation {
            labial_onset_ms: self.timing_jitter_sd_ms * z[0],
            palatal_onset_ms: self.timing_jitter_sd_ms * z[1],
            labial_duration_factor: (self.duration_jitter_sd * z[2]).exp(),
            palatal_duration_factor: (self.duration_jitter_sd * z[3]).exp(),
            labial_target_mm: self.target_jitter_sd_mm * z[4],
            palatal_target_mm: self.target_jitter_sd_mm * z[5],
            velar_target_mm: self.target_jitter_sd_mm * z[6],
        }
    }

    pub fn add_position_noise<R: Rng>(&self, samples: &mut [f64], rng: &mut R) {
        if self.position_sd_mm == 0.0 {
            return;
        }
        for x in samples {
            *x += gauss(rng, self.position_sd_mm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::Channel;

    /// Dense oracle: solve (I + s·DᵀD) x = y by Gaussian elimination.
    fn dense_solve(y: &[f64], s: f64, d: &DMatrix<f64>) -> Vec<f64> {
        let n = y.len();
        let a = DMatrix::<f64>::identity(n, n) + s * d.transpose() * d;
        let b = nalgebra::DVector::from_column_slice(y);
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    fn second_difference(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n - 2, n, |r, c| match c as isize - r as isize {
            0 | 2 => 1.0,
            1 => -2.0,
            _ => 0.0,
        })
    }

    fn reflective_difference(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                if r == 0 || r == n - 1 { -1.0 } else { -2.0 }
            } else if r.abs_diff(c) == 1 {
                1.0
            } else {
                0.0
            }
        })
    }

    fn wiggly(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (i as f64 * 0.37).sin() * 3.0 + ((i * 7919) % 13) as f64 * 0.1)
            .collect()
    }

    #[test]
    fn zero_penalty_is_identity() {
        let y = wiggly(40);
        assert_eq!(smooth(&y, 0.0).unwrap(), y);
        let z = smooth_dct(&y, 0.0).unwrap();
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_and_lines_fixed() {
        for &s in &[1e-2, 1.0, 1e3, 1e6] {
            let c = vec![4.2; 32];
            for (a, b) in c.iter().zip(&smooth(&c, s).unwrap()) {
                assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in c.iter().zip(&smooth_dct(&c, s).unwrap()) {
                assert!((a - b).abs() < 1e-9);
            }
            let line: Vec<f64> = (0..32).map(|i| 3.0 - 0.7 * i as f64).collect();
            for (a, b) in line.iter().zip(&smooth(&line, s).unwrap()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matches_dense_oracle() {
        let y = wiggly(32);
        let d = second_difference(32);
        for &s in &[0.5, 10.0, 1e4] {
            let got = smooth(&y, s).unwrap();
            let want = dense_solve(&y, s, &d);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "s={s}");
            }
        }
    }

    #[test]
    fn dct_matches_reflective_oracle() {
        let y = wiggly(24);
        let d = reflective_difference(24);
        let got = smooth_dct(&y, 3.0).unwrap();
        let want = dense_solve(&y, 3.0, &d);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn hat_trace_matches_dense_inverse() {
        let n = 20;
        let d = second_difference(n);
        let a = DMatrix::<f64>::identity(n, n) + 7.0 * d.transpose() * &d;
        let tr = a.try_inverse().unwrap().trace();
        assert!((hat_trace(n, 7.0) - tr).abs() < 1e-9);
    }

    #[test]
    fn bad_input_rejected() {
        assert!(smooth(&[1.0, 2.0], 1.0).is_err());
        assert!(smooth(&[1.0, f64::NAN, 2.0], 1.0).is_err());
        assert!(smooth(&[1.0, 2.0, 3.0], -1.0).is_err());
        assert!(gcv_select(&[1.0, 2.0, 3.0], &[]).is_err());
        assert!(robust_smooth(&[1.0, 2.0, 3.0], &default_grid(), 0).is_err());
    }

    #[test]
    fn robust_constant_unchanged() {
        let y = vec![2.5; 50];
        let x = robust_smooth(&y, &default_grid(), 3).unwrap();
        assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn robust_on_exactly_fitted_input_equals_plain() {
        // Zero residuals give unit weights, so no reweighted refit happens.
        let y: Vec<f64> = (0..120).map(|i| 0.3 * i as f64 - 2.0).collect();
        let grid = default_grid();
        let plain = smooth(&y, gcv_select(&y, &grid).unwrap()).unwrap();
        let robust = robust_smooth(&y, &grid, 3).unwrap();
        for (a, b) in plain.iter().zip(&robust) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn robust_without_outliers_stays_within_noise() {
        let nd = Normal::new(0.0, 0.05).unwrap();
        for seed in 0..5 {
            let mut rng = keyed_rng(seed, 1);
            let y: Vec<f64> = (0..120).map(|i| (i as f64 * 0.05).sin() + nd.sample(&mut rng)).collect();
            let grid = default_grid();
            let plain = smooth(&y, gcv_select(&y, &grid).unwrap()).unwrap();
            let robust = robust_smooth(&y, &grid, 3).unwrap();
            let worst = plain.iter().zip(&robust).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 0.05, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn robust_resists_a_spike() {
        let sd = 0.05;
        let nd = Normal::new(0.0, sd).unwrap();
        let mut rng = keyed_rng(11, 0);
        let clean: Vec<f64> = (0..150).map(|i| (i as f64 * 0.04).sin()).collect();
        let mut y: Vec<f64> = clean.iter().map(|c| c + nd.sample(&mut rng)).collect();
        y[70] += 20.0 * sd;
        let grid = default_grid();
        let plain = smooth(&y, gcv_select(&y, &grid).unwrap()).unwrap();
        let robust = robust_smooth(&y, &grid, 3).unwrap();
        let (dp, dr) = ((plain[70] - clean[70]).abs(), (robust[70] - clean[70]).abs());
        assert!(dr < 3.0 * sd, "{dr}");
        assert!(dp > dr, "{dp} vs {dr}");
    }

    #[test]
    fn floored_scale_keeps_noiseless_movements() {
        // Flat stretches make the MAD vanish; without a floor the movement
        // itself would be down-weighted away.
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let t = (i as f64 - 80.0).max(0.0) * 0.1;
                10.0 * (1.0 - (1.0 + t) * (-t).exp())
            })
            .collect();
        let grid = default_grid();
        let plain = smooth(&y, gcv_select(&y, &grid).unwrap()).unwrap();
        let robust = robust_smooth_floored(&y, &grid, 3, 0.01).unwrap();
        for (a, b) in plain.iter().zip(&robust) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn bisquare_edge_cases() {
        assert_eq!(bisquare_weights(&[0.0, 0.0, 5.0]), vec![1.0, 1.0, 0.0]);
        let w = bisquare_weights(&[-1.0, 0.0, 1.0, 0.5, -0.5]);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn velocity_of_constant_and_ramp() {
        let t = Trajectory::new(Channel::La, 200.0, 0.0, vec![3.0; 10]);
        assert!(velocity(&t).unwrap().iter().all(|&v| v == 0.0));
        let r = Trajectory::new(Channel::La, 200.0, 0.0, (0..10).map(|i| i as f64).collect());
        assert!(velocity(&r).unwrap().iter().all(|&v| (v - 200.0).abs() < 1e-9));
        let short = Trajectory::new(Channel::La, 200.0, 0.0, vec![1.0, 2.0]);
        assert!(velocity(&short).is_err());
    }

    #[test]
    fn velocity_peak_of_sampled_step_response() {
        let (delta, w) = (10.0, 20.0);
        let samples = (0..200)
            .map(|i| crate::dynamics::analytic_step_response(delta, w, i as f64 * 5.0).unwrap().0)
            .collect();
        let v = velocity(&Trajectory::new(Channel::TbCl, 200.0, 0.0, samples)).unwrap();
        let peak = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let want = delta * w * (-1.0f64).exp();
        assert!((peak - want).abs() < 0.02 * want, "{peak} vs {want}");
    }

    #[test]
    fn silent_noise_is_identity() {
        let m = NoiseModel::silent();
        let mut rng = keyed_rng(1, 2);
        assert_eq!(m.draw_perturbation(&mut rng), Perturbation::none());
        let mut x = vec![1.0, 2.0, 3.0];
        m.add_position_noise(&mut x, &mut rng);
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: u64 = keyed_rng(7, 1).random();
        let b: u64 = keyed_rng(7, 1).random();
        let c: u64 = keyed_rng(7, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
