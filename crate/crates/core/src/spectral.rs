//! Local spectral-measure bounds from twisted-integral growth, frequency
//! scans, and an autocorrelation estimate of the spectral measure.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::bv::{suspension_itinerary, CylFunction, PathPrefix, SubstitutionSequence};
use crate::error::{Error, Result};
use crate::twisted::{dioph_factors, growth_fit, twisted_scan, GrowthFit, ModularOrbit, ScanRow, ScanSetup};

/// `σ_f([ω − r, ω + r]) ≤ π² 2^{-2α} C1² r^{2(1−α)}`, valid for `r ≤ (2R₀)^{-1}`.
pub fn local_bound(c1: f64, alpha: f64, r0: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(r > 0.0) || r > 1.0 / (2.0 * r0) {
        return Err(Error::OutOfRange(format!("r = {r} outside (0, 1/(2R0)] with R0 = {r0}")));
    }
    Ok(PI * PI * 2f64.powf(-2.0 * alpha) * c1 * c1 * r.powf(2.0 * (1.0 - alpha)))
}

/// Exponent used in bounds when a fit comes out at or below zero.
pub const MIN_ALPHA: f64 = 1e-6;

/// Radii at which scan results report the local bound.
pub const BOUND_RADII: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

/// Geometric grid of `count` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Default `R` grid: 12 points from `10²` to `10⁵`.
pub fn default_r_grid() -> Vec<f64> {
    geometric_grid(1e2, 1e5, 12)
}

/// Per-frequency outcome of a scan.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaSummary {
    pub omega: f64,
    pub alpha_hat: f64,
    pub c1_hat: f64,
    pub fit_residual: f64,
    pub r0: f64,
    /// Local bound at each of [`BOUND_RADII`], NaN where inapplicable.
    pub bounds: Vec<f64>,
    /// `∏_k (1 − c1 max_v ‖ω|ζ^{[k]}(v)|_s‖²)` over every canonical level.
    pub dioph_product: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralScanResult {
    pub omegas: Vec<f64>,
    pub summaries: Vec<OmegaSummary>,
    /// `min_ω 2(1 − α̂(ω))`, clipped to `[0, 2]`.
    pub gamma_hat: f64,
    #[serde(skip)]
    pub rows: Vec<ScanRow>,
}

impl SpectralScanResult {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violates()).count()
    }

    pub fn max_alpha(&self) -> f64 {
        self.summaries.iter().map(|s| s.alpha_hat).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scan over `omega_count` frequencies geometric in `[1/B, B]`.
pub fn spectral_scan(setup: &ScanSetup, b: f64, r_grid: &[f64], omega_count: usize) -> Result<SpectralScanResult> {
    if !(b > 1.0) {
        return Err(Error::Invalid(format!("B = {b} must exceed 1")));
    }
    if omega_count == 0 {
        return Err(Error::Invalid("empty frequency grid".into()));
    }
    spectral_scan_at(setup, &geometric_grid(1.0 / b, b, omega_count), r_grid)
}

/// Scan at explicit frequencies, zero included.
pub fn spectral_scan_at(setup: &ScanSetup, omegas: &[f64], r_grid: &[f64]) -> Result<SpectralScanResult> {
    if r_grid.is_empty() {
        return Err(Error::Invalid("empty R grid".into()));
    }
    let rows = twisted_scan(setup, omegas, r_grid)?;
    let r0 = r_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let levels = setup.canonical.len();
    let mut summaries = Vec::with_capacity(omegas.len());
    for (i, &omega) in omegas.iter().enumerate() {
        let chunk = &rows[i * r_grid.len()..(i + 1) * r_grid.len()];
        let samples: Vec<(f64, f64)> = chunk.iter().map(|r| (r.r, r.abs_s_quadrature)).collect();
        let fit = growth_fit(&samples)?;
        let orbit = ModularOrbit::new(&setup.canonical, &setup.s, omega, levels, setup.precision_bits)?;
        let factors = dioph_factors(&orbit, &setup.returns, setup.c1);
        summaries.push(summarize(omega, &fit, r0, factors.product(0, levels)));
    }
    let gamma_hat = summaries.iter().map(|s| (2.0 * (1.0 - s.alpha_hat)).clamp(0.0, 2.0)).fold(2.0, f64::min);
    Ok(SpectralScanResult { omegas: omegas.to_vec(), summaries, gamma_hat, rows })
}

fn summarize(omega: f64, fit: &GrowthFit, r0: f64, dioph_product: f64) -> OmegaSummary {
    let alpha = fit.alpha.max(MIN_ALPHA);
    let bounds = BOUND_RADII.iter().map(|&r| local_bound(fit.c1, alpha, r0, r).unwrap_or(f64::NAN)).collect();
    OmegaSummary {
        omega,
        alpha_hat: fit.alpha,
        c1_hat: fit.c1,
        fit_residual: fit.residual,
        r0,
        bounds,
        dioph_product,
    }
}

/// CSV `omega,alpha_hat,C1_hat,R0,bound@r…` with one bound column per radius.
pub fn write_spectral_csv<W: Write>(res: &SpectralScanResult, mut out: W) -> std::io::Result<()> {
    let radii: Vec<String> = BOUND_RADII.iter().map(|r| format!("bound@{r:e}")).collect();
    writeln!(out, "omega,alpha_hat,C1_hat,R0,{}", radii.join(","))?;
    for s in &res.summaries {
        let b: Vec<String> = s.bounds.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{},{},{},{},{}", s.omega, s.alpha_hat, s.c1_hat, s.r0, b.join(","))?;
    }
    Ok(())
}

/// Sampled autocorrelation `⟨f∘h_τ, f⟩` on a uniform lag grid, with its
/// Fejér-windowed Fourier transform as a spectral-measure estimate.
#[derive(Clone, Debug, Serialize)]
pub struct AutocorrSpectrum {
    /// Sampling step, equal to the lag spacing.
    pub dt: f64,
    pub t_total: f64,
    /// `c_k ≈ ⟨f∘h_{k·dt}, f⟩`, `k = 0, …, lags − 1`.
    pub corr: Vec<f64>,
}

impl AutocorrSpectrum {
    pub fn lags(&self) -> usize {
        self.corr.len()
    }

    pub fn tau_max(&self) -> f64 {
        self.dt * self.corr.len() as f64
    }

    /// Estimate of `σ_f(ℝ)`.
    pub fn total_mass(&self) -> f64 {
        self.corr[0]
    }

    fn weight(&self, k: usize) -> f64 {
        1.0 - k as f64 / self.lags() as f64
    }

    /// Windowed spectral density at `ω`; periodic with period `1/dt`.
    pub fn density(&self, omega: f64) -> f64 {
        let mut acc = self.corr[0];
        for k in 1..self.lags() {
            acc += 2.0 * self.weight(k) * self.corr[k] * (2.0 * PI * omega * k as f64 * self.dt).cos();
        }
        acc * self.dt
    }

    /// Estimated mass of `[a, b]`, with `b − a` at most one period.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let mut acc = self.corr[0] * (b - a);
        for k in 1..self.lags() {
            let tau = k as f64 * self.dt;
            let s = ((2.0 * PI * b * tau).sin() - (2.0 * PI * a * tau).sin()) / (2.0 * PI * tau);
            acc += 2.0 * self.weight(k) * self.corr[k] * s;
        }
        acc * self.dt
    }

    /// Bound on the window mass leaking into an interval from farther than `delta`.
    pub fn leakage(&self, delta: f64) -> f64 {
        self.total_mass().abs() / (2.0 * self.tau_max() * delta)
    }

    /// Frequency resolution `1/τ_max`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.tau_max()
    }
}

/// Time averages over `[0, T]` along the itinerary from `p`, lags `k·τ_max/lags`.
pub fn autocorr_spectrum(
    seq: &SubstitutionSequence,
    p: &PathPrefix,
    f: &CylFunction,
    s: &[f64],
    t_total: f64,
    tau_max: f64,
    lags: usize,
) -> Result<AutocorrSpectrum> {
    if f.level != 0 {
        return Err(Error::Invalid("autocorrelation uses level-0 functions".into()));
    }
    if lags < 2 || !(tau_max > 0.0) {
        return Err(Error::Invalid("need at least two positive lags".into()));
    }
    if t_total < 4.0 * tau_max {
        return Err(Error::InsufficientData(format!("T = {t_total} is below 4 τ_max = {}", 4.0 * tau_max)));
    }
    let dt = tau_max / lags as f64;
    let tiles = suspension_itinerary(seq, p, s, t_total + tau_max)?;
    let count = ((t_total + tau_max) / dt).floor() as usize;
    let mut g = Vec::with_capacity(count);
    let mut ti = 0;
    for j in 0..count {
        let t = (j as f64 + 0.5) * dt;
        while ti + 1 < tiles.len() && tiles[ti + 1].start <= t {
            ti += 1;
        }
        let tile = &tiles[ti];
        let a = tile.letter as usize;
        g.push(f.coefficients[a] * f.profiles[a].eval((t - tile.start) / tile.duration));
    }
    let n = (t_total / dt).floor() as usize;
    let corr = (0..lags).map(|k| (0..n).map(|j| g[j] * g[j + k]).sum::<f64>() / n as f64).collect();
    Ok(AutocorrSpectrum { dt, t_total, corr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_bound_half() {
        let v = local_bound(1.0, 0.5, 1.0, 0.01).unwrap();
        assert!((v - PI * PI / 2.0 * 0.01).abs() < 1e-15);
        assert!(local_bound(1.0, 0.5, 10.0, 0.051).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = geometric_grid(0.25, 4.0, 64);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 0.25).abs() < 1e-15 && (g[63] - 4.0).abs() < 1e-12);
    }
}
