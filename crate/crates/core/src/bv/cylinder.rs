//! Cylindrical functions: one profile per level-ℓ tower, in the normalized
//! height variable `u = t / s_a^{(ℓ)} ∈ [0, 1]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DEGREE: usize = 3;

/// `∫_0^h Σ c_k x^k e^{-iκx} dx`.
pub fn exp_poly_integral(coeffs: &[f64], h: f64, kappa: f64) -> Complex64 {
    if h == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if (kappa * h).abs() < 1.0 {
        // power series in -iκx
        let mut total = Complex64::new(0.0, 0.0);
        let z = Complex64::new(0.0, -kappa);
        for (k, &ck) in coeffs.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let mut pow = Complex64::new(h.powi(k as i32 + 1), 0.0);
            let mut fact = 1.0;
            for n in 0..40 {
                let term = pow / (fact * (n + k + 1) as f64);
                total += ck * term;
                if term.norm() < 1e-18 * h.powi(k as i32 + 1) {
                    break;
                }
                pow *= z * h;
                fact *= (n + 1) as f64;
            }
        }
        return total;
    }
    let c = Complex64::new(0.0, -kappa);
    let ech = (c * h).exp();
    let mut j = (ech - 1.0) / c;
    let mut total = coeffs.first().copied().unwrap_or(0.0) * j;
    for (k, &ck) in coeffs.iter().enumerate().skip(1) {
        j = (h.powi(k as i32) * ech - k as f64 * j) / c;
        total += ck * j;
    }
    total
}

/// Piecewise polynomial on `[0, 1]`; piece `i` is `Σ_k coeffs[i][k] (u − breaks[i])^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub breaks: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() != coeffs.len() + 1 || coeffs.is_empty() {
            return Err(Error::Invalid("need one more break than pieces".into()));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("breaks must increase from 0 to 1".into()));
        }
        if coeffs.iter().any(|c| c.len() > MAX_DEGREE + 1) {
            return Err(Error::Invalid(format!("degree above {MAX_DEGREE}")));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite coefficient".into()));
        }
        Ok(PiecewisePoly { breaks, coeffs })
    }

    pub fn constant(c: f64) -> Self {
        PiecewisePoly { breaks: vec![0.0, 1.0], coeffs: vec![vec![c]] }
    }

    fn piece(&self, u: f64) -> usize {
        self.breaks[1..self.breaks.len() - 1].partition_point(|&b| b <= u)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let i = self.piece(u);
        horner(&self.coeffs[i], u - self.breaks[i])
    }

    /// Exact supremum of `|p|` on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let h = self.breaks[i + 1] - self.breaks[i];
            let mut candidates = vec![0.0, h];
            // roots of the derivative
            let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, x)| k as f64 * x).collect();
            match d.len() {
                2 if d[1] != 0.0 => candidates.push(-d[0] / d[1]),
                3 if d[2] != 0.0 => {
                    let disc = d[1] * d[1] - 4.0 * d[2] * d[0];
                    if disc >= 0.0 {
                        candidates.push((-d[1] + disc.sqrt()) / (2.0 * d[2]));
                        candidates.push((-d[1] - disc.sqrt()) / (2.0 * d[2]));
                    }
                }
                3 if d[1] != 0.0 => candidates.push(-d[0] / d[1]),
                _ => {}
            }
            for x in candidates.into_iter().filter(|x| (0.0..=h).contains(x)) {
                best = best.max(horner(c, x).abs());
            }
        }
        best
    }

    /// `∫_{u0}^{u1} p(u) e^{-iκu} du` in closed form.
    pub fn transform_range(&self, u0: f64, u1: f64, kappa: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            let (lo, hi) = (self.breaks[i].max(u0), self.breaks[i + 1].min(u1));
            if hi <= lo {
                continue;
            }
            let shifted = taylor_shift(c, lo - self.breaks[i]);
            total += Complex64::from_polar(1.0, -kappa * lo) * exp_poly_integral(&shifted, hi - lo, kappa);
        }
        total
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Coefficients of `p(x + a)` in powers of `x`.
fn taylor_shift(c: &[f64], a: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (k, &ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            out[j] += ck * binom * a.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

/// A tower profile in the normalized variable.
#[derive(Clone)]
pub enum Profile {
    Poly(PiecewisePoly),
    /// Only usable with numerical quadrature.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Poly(p) => f.debug_tuple("Poly").field(p).finish(),
            Profile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Profile {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Profile::Poly(p) => p.eval(u),
            Profile::Custom(g) => g(u),
        }
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self, Profile::Poly(_))
    }

    /// `ψ̂(ω) = ∫_0^L p(t/L) e^{-2πiωt} dt`.
    pub fn transform(&self, omega: f64, len: f64) -> Result<Complex64> {
        self.integral(0.0, 1.0, omega, len)
    }

    /// `∫ p(t/L) e^{-2πiωt} dt` over `t ∈ [u0 L, u1 L]`.
    pub fn integral(&self, u0: f64, u1: f64, omega: f64, len: f64) -> Result<Complex64> {
        let kappa = 2.0 * PI * omega * len;
        match self {
            Profile::Poly(p) => Ok(len * p.transform_range(u0, u1, kappa)),
            Profile::Custom(_) => Err(Error::Invalid("profile has no closed-form transform".into())),
        }
    }

    /// The same integral by composite Gauss–Legendre quadrature.
    pub fn integral_quadrature(&self, u0: f64, u1: f64, omega: f64, len: f64) -> Complex64 {
        let kappa = 2.0 * PI * omega * len;
        let panels = ((kappa.abs() * (u1 - u0)) / 2.0).ceil().max(1.0) as usize;
        let (nodes, weights) = gauss_legendre_16();
        let w = (u1 - u0) / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let a = u0 + k as f64 * w;
            for (x, wt) in nodes.iter().zip(weights.iter()) {
                let u = a + 0.5 * w * (x + 1.0);
                total += wt * 0.5 * w * self.eval(u) * Complex64::from_polar(1.0, -kappa * u);
            }
        }
        len * total
    }

    pub fn sup_norm(&self, samples: usize) -> f64 {
        match self {
            Profile::Poly(p) => p.sup_norm(),
            Profile::Custom(g) => (0..=samples).map(|i| g(i as f64 / samples as f64).abs()).fold(0.0, f64::max),
        }
    }
}

impl Serialize for Profile {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Profile::Poly(p) => p.serialize(ser),
            Profile::Custom(_) => Err(serde::ser::Error::custom("custom profiles cannot be serialized")),
        }
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = PiecewisePoly::deserialize(de)?;
        PiecewisePoly::new(raw.breaks, raw.coeffs).map(Profile::Poly).map_err(serde::de::Error::custom)
    }
}

fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `f = Σ_a c_a f_a^{(ℓ)}` with `f_a^{(ℓ)}` supported on the level-ℓ tower of `a`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CylFunction {
    pub level: usize,
    pub coefficients: Vec<f64>,
    pub profiles: Vec<Profile>,
}

impl CylFunction {
    pub fn new(level: usize, coefficients: Vec<f64>, profiles: Vec<Profile>) -> Result<Self> {
        if coefficients.len() != profiles.len() {
            return Err(Error::ArityMismatch(coefficients.len(), profiles.len()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite coefficient".into()));
        }
        Ok(CylFunction { level, coefficients, profiles })
    }

    /// `c_a = 1` on every tower, constant profile 1.
    pub fn constant(level: usize, m: usize) -> Self {
        CylFunction { level, coefficients: vec![1.0; m], profiles: vec![Profile::Poly(PiecewisePoly::constant(1.0)); m] }
    }

    /// Indicator of the level-ℓ tower over `a`.
    pub fn indicator(level: usize, m: usize, a: usize) -> Self {
        let mut f = Self::constant(level, m);
        for (b, c) in f.coefficients.iter_mut().enumerate() {
            *c = if b == a { 1.0 } else { 0.0 };
        }
        f
    }

    pub fn arity(&self) -> usize {
        self.coefficients.len()
    }

    pub fn has_closed_form(&self) -> bool {
        self.profiles.iter().all(Profile::has_closed_form)
    }

    pub fn sup_norm(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.profiles)
            .map(|(c, p)| c.abs() * p.sup_norm(1024))
            .fold(0.0, f64::max)
    }

    /// `c_a ψ̂_a(ω)` for tower heights `s_level`.
    pub fn weighted_transforms(&self, omega: f64, s_level: &[f64]) -> Result<Vec<Complex64>> {
        self.profiles
            .iter()
            .zip(&self.coefficients)
            .zip(s_level)
            .map(|((p, &c), &len)| Ok(c * p.transform(omega, len)?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(coeffs: &[f64], h: f64, kappa: f64) -> Complex64 {
        let n = 20000;
        let dx = h / n as f64;
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                horner(coeffs, x) * Complex64::from_polar(1.0, -kappa * x) * dx
            })
            .sum()
    }

    #[test]
    fn exp_poly_matches_midpoint_rule() {
        let c = [0.5, -1.0, 2.0, 0.25];
        for &(h, k) in &[(0.3, 0.1), (0.7, 1.3), (1.0, 25.0), (0.2, -40.0)] {
            let a = exp_poly_integral(&c, h, k);
            let b = numeric(&c, h, k);
            assert!((a - b).norm() < 1e-7, "{h} {k} {a} {b}");
        }
    }

    #[test]
    fn constant_transform_at_zero_is_length() {
        let p = Profile::Poly(PiecewisePoly::constant(1.0));
        assert!((p.transform(0.0, 2.5).unwrap() - Complex64::new(2.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transform_range_splits_additively() {
        let p = PiecewisePoly::new(vec![0.0, 0.4, 1.0], vec![vec![1.0, 2.0], vec![1.8, 0.0, -3.0, 1.0]]).unwrap();
        let k = 7.3;
        let whole = p.transform_range(0.0, 1.0, k);
        let parts = p.transform_range(0.0, 0.25, k) + p.transform_range(0.25, 0.9, k) + p.transform_range(0.9, 1.0, k);
        assert!((whole - parts).norm() < 1e-13);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let p = Profile::Poly(PiecewisePoly::new(vec![0.0, 0.5, 1.0], vec![vec![0.0, 1.0], vec![0.5, -1.0, 0.0, 2.0]]).unwrap());
        let exact = p.integral(0.1, 0.8, 3.7, 1.9).unwrap();
        let approx = p.integral_quadrature(0.1, 0.5, 3.7, 1.9) + p.integral_quadrature(0.5, 0.8, 3.7, 1.9);
        assert!((exact - approx).norm() < 1e-12);
    }

    #[test]
    fn sup_norm_of_cubic() {
        // x^3 - x on [0,1] has minimum -2/(3√3) at 1/√3
        let p = PiecewisePoly::new(vec![0.0, 1.0], vec![vec![0.0, -1.0, 0.0, 1.0]]).unwrap();
        assert!((p.sup_norm() - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn degree_four_rejected() {
        assert!(PiecewisePoly::new(vec![0.0, 1.0], vec![vec![0.0; 5]]).is_err());
    }
}
