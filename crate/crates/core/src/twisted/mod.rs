//! Twisted exponential sums, twist matrices, their products and Diophantine decay bounds.
//!
//! `Φ_a^s(v, ω) = Σ_{j : v_j = a} exp(-2πiω |v_0 … v_{j-1}|_s)`.

mod birkhoff;
mod orbit;

pub use birkhoff::{
    twisted_birkhoff, twisted_birkhoff_grid, twisted_scan, write_scan_csv, BirkhoffMode, BirkhoffValue, ScanRow,
    ScanSetup,
};
pub use orbit::{ModularOrbit, DEFAULT_PRECISION_BITS};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use serde::Serialize;

use crate::bv::SubstitutionSequence;
use crate::error::{Error, Result};
use crate::matrix::{big_ln, big_ratio, big_to_f64, IntMatrix};
use crate::substitution::{c1_constant, population_vector, Letter, Substitution, Word};

pub type CMatrix = DMatrix<Complex64>;

fn phase(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * x)
}

/// `Φ_a^s(v, ω)` evaluated directly from the roof vector.
pub fn phi_direct(v: &[Letter], a: Letter, s: &[f64], omega: f64) -> Complex64 {
    let mut counts = vec![0u64; s.len()];
    let mut total = Complex64::new(0.0, 0.0);
    for &x in v {
        if x == a {
            let len: f64 = counts.iter().zip(s).map(|(&c, y)| c as f64 * y).sum();
            total += phase(omega * len);
        }
        counts[x as usize] += 1;
    }
    total
}

/// `Σ_{j : v_j = a} exp(-2πi frac⟨ℓ(v_0…v_{j-1}), f⟩)` for precomputed fractional parts `f`.
fn phi_from_frac(v: &[Letter], a: Letter, f: &[f64]) -> Complex64 {
    let mut counts = vec![0u64; f.len()];
    let mut total = Complex64::new(0.0, 0.0);
    for &x in v {
        if x == a {
            let t: f64 = counts.iter().zip(f).map(|(&c, y)| c as f64 * y).sum();
            total += phase(t.fract());
        }
        counts[x as usize] += 1;
    }
    total
}

/// `M^s_{ξ1,ξ2}(ω)` with row `b`, column `c` equal to `Φ_c^{S_{ξ1}ᵗ s}(ξ2(b), ω)`.
#[derive(Clone, Debug)]
pub struct TwistMatrix {
    pub entries: CMatrix,
    pub omega: f64,
    pub s: Vec<f64>,
}

pub fn twist_matrix(xi1: &Substitution, xi2: &Substitution, s: &[f64], omega: f64) -> Result<TwistMatrix> {
    let m = xi1.arity();
    if xi2.arity() != m || s.len() != m {
        return Err(Error::ArityMismatch(m, xi2.arity().max(s.len())));
    }
    let roof = xi1.matrix().transpose().mul_vec_f64(s);
    let entries = CMatrix::from_fn(m, m, |b, c| phi_direct(xi2.image(b as Letter), c as Letter, &roof, omega));
    Ok(TwistMatrix { entries, omega, s: s.to_vec() })
}

fn twist_from_frac(z: &Substitution, f: &[f64]) -> CMatrix {
    let m = z.arity();
    CMatrix::from_fn(m, m, |b, c| phi_from_frac(z.image(b as Letter), c as Letter, f))
}

/// `M_k` for step `k ≥ 1`, using exact fractional parts from the orbit.
pub fn step_twist(seq: &SubstitutionSequence, orbit: &ModularOrbit, k: usize) -> CMatrix {
    let m = seq.arity();
    let d = orbit.denominator();
    let mut r = orbit.residues(k - 1);
    let mut out = CMatrix::identity(m, m);
    let factors = seq.factors(k);
    for (i, z) in factors.iter().enumerate() {
        let f: Vec<f64> = r.iter().map(|x| big_ratio(x, d)).collect();
        out = twist_from_frac(z, &f) * out;
        if i + 1 < factors.len() {
            r = z.matrix().transpose().mul_vec(&r).into_iter().map(|x| num_integer::Integer::mod_floor(&x, d)).collect();
        }
    }
    out
}

/// `Π_n = M_n ⋯ M_1` built on an existing orbit.
pub fn pi_product_with_orbit(seq: &SubstitutionSequence, orbit: &ModularOrbit, n: usize) -> Result<CMatrix> {
    if n > orbit.levels() {
        return Err(Error::OutOfRange(format!("level {n} beyond orbit depth {}", orbit.levels())));
    }
    let m = seq.arity();
    Ok((1..=n).fold(CMatrix::identity(m, m), |acc, k| step_twist(seq, orbit, k) * acc))
}

/// `Π^s_n(ω)`; row `b`, column `a` is `Φ_a^s(ζ^{[n]}(b), ω)`.
pub fn pi_product(seq: &SubstitutionSequence, n: usize, s: &[f64], omega: f64) -> Result<CMatrix> {
    let orbit = ModularOrbit::new(seq, s, omega, n, DEFAULT_PRECISION_BITS)?;
    pi_product_with_orbit(seq, &orbit, n)
}

/// Per-level factors `1 − c1 max_v ‖ω|ζ^{[k]}(v)|_s‖²`, `k = 0..=levels`.
#[derive(Clone, Debug, Serialize)]
pub struct DiophFactors {
    pub c1: f64,
    pub max_dist: Vec<f64>,
    pub factors: Vec<f64>,
}

pub fn dioph_factors(orbit: &ModularOrbit, returns: &[Word], c1: f64) -> DiophFactors {
    let m = orbit.frac[0].len();
    let pops: Vec<Vec<u64>> = returns.iter().map(|v| population_vector(v, m)).collect();
    let max_dist: Vec<f64> = (0..=orbit.levels())
        .map(|k| pops.iter().map(|p| orbit.dist_z(k, p)).fold(0.0, f64::max))
        .collect();
    let factors = max_dist.iter().map(|d| 1.0 - c1 * d * d).collect();
    DiophFactors { c1, max_dist, factors }
}

impl DiophFactors {
    /// `∏_{k=ℓ}^{n-1}` of the factors.
    pub fn product(&self, ell: usize, n: usize) -> f64 {
        self.factors[ell..n].iter().product()
    }

    fn log_product(&self, ell: usize, n: usize) -> f64 {
        self.factors[ell..n].iter().map(|x| x.ln()).sum()
    }
}

/// Return words and `c1` for a canonical sequence; returns default to the
/// selected basis of the block with length bound `max_b |ζ(b)|`.
pub fn dioph_setup(seq: &SubstitutionSequence, returns: Option<Vec<Word>>) -> Result<(Vec<Word>, f64)> {
    let marker = seq.canonical_marker().ok_or(Error::NotCanonical)?;
    let (_, c1) = c1_constant(&marker.q_block.matrix())?;
    let returns = match returns {
        Some(r) => r,
        None => {
            let z = &marker.q_block;
            z.select_return_basis(z.max_image_len())?
        }
    };
    if returns.is_empty() {
        return Err(Error::NoReturnBasis(0));
    }
    Ok((returns, c1))
}

/// Bound on `|Φ_a^{s^{(ℓ)}}(ζ^{[ℓ+1,n]}(b), ω)|`, uniform in `a, b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiophBound {
    pub ell: usize,
    pub n: usize,
    /// `‖S^{[ℓ+1,n]}‖₁`.
    pub norm: f64,
    pub product: f64,
    pub bound: f64,
    pub log_bound: f64,
}

/// `‖S^{[ℓ+1,n]}‖₁ ∏_{k=ℓ}^{n-1} (1 − c1 max_v ‖ω|ζ^{[k]}(v)|_s‖²)`.
pub fn dioph_bound(seq: &SubstitutionSequence, factors: &DiophFactors, ell: usize, n: usize) -> Result<DiophBound> {
    seq.canonical_marker().ok_or(Error::NotCanonical)?;
    if ell > n || n >= factors.factors.len() + 1 || n > seq.len() {
        return Err(Error::OutOfRange(format!("range [{}, {n}]", ell + 1)));
    }
    let norm = seq.product(ell + 1, n).norm1();
    let product = factors.product(ell, n);
    let log_bound = big_ln(&norm) + factors.log_product(ell, n);
    Ok(DiophBound { ell, n, norm: big_to_f64(&norm), product, bound: log_bound.exp(), log_bound })
}

/// Bound on `|Φ_a^{s^{(ℓ)}}(x^{(ℓ)}[0, N-1], ω)|` for any admissible level-ℓ sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrefixBound {
    pub ell: usize,
    /// Largest `n` with `min_b |ζ^{[ℓ+1,n]}(b)| ≤ N`.
    pub n: usize,
    pub bound: f64,
    /// `∏_{k=ℓ}^{n-1}` of the factors.
    pub product: f64,
    /// The single-block bound at level `n`.
    pub block_bound: f64,
}

/// `2 Σ_{j=ℓ}^{n} ‖S^{[ℓ+1,j]}‖₁ ‖S_{j+1}‖₁ ∏_{k=ℓ}^{j-1}(…)`.
pub fn dioph_bound_prefix(
    seq: &SubstitutionSequence,
    factors: &DiophFactors,
    ell: usize,
    big_n: u128,
) -> Result<PrefixBound> {
    seq.canonical_marker().ok_or(Error::NotCanonical)?;
    let big_n = BigInt::from(big_n);
    let mut prod = IntMatrix::identity(seq.arity());
    let mut n = ell;
    let mut terms = Vec::new();
    loop {
        if n + 1 > seq.len() || n + 1 > factors.factors.len() {
            return Err(Error::InsufficientData(format!(
                "sequence too short to cover {big_n} letters from level {ell}"
            )));
        }
        let step_norm = seq.matrix(n + 1).norm1();
        terms.push(big_ln(&prod.norm1()) + big_ln(&step_norm) + factors.log_product(ell, n));
        let next = prod.mul(seq.matrix(n + 1));
        let min_h = next.column_sums().into_iter().min().unwrap();
        if min_h > big_n {
            break;
        }
        prod = next;
        n += 1;
    }
    let bound = 2.0 * terms.iter().map(|t| t.exp()).sum::<f64>();
    let block = (big_ln(&prod.norm1()) + factors.log_product(ell, n)).exp();
    Ok(PrefixBound { ell, n, bound, product: factors.product(ell, n), block_bound: block })
}

/// Least-squares fit of `log|S_R| = log C1 + α log R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthFit {
    pub alpha: f64,
    pub c1: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn growth_fit(samples: &[(f64, f64)]) -> Result<GrowthFit> {
    if samples.len() < 8 {
        return Err(Error::InsufficientData(format!("{} samples, need 8", samples.len())));
    }
    if samples.iter().any(|&(r, v)| !(r > 0.0 && v > 0.0 && r.is_finite() && v.is_finite())) {
        return Err(Error::Invalid("samples must be positive".into()));
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(r, _)| (lo.min(r), hi.max(r)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("samples span less than two decades".into()));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let b = my - alpha * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - b - alpha * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(GrowthFit { alpha, c1: b.exp(), residual })
}

/// `Φ_a^{s^{(level)}}(v, ω)` with phases read from the orbit.
pub fn phi_from_orbit(orbit: &ModularOrbit, level: usize, v: &[Letter], a: Letter) -> Complex64 {
    phi_from_frac(v, a, &orbit.frac[level])
}

/// Entrywise comparison of a complex matrix with an integer one.
pub fn is_integer_close(m: &CMatrix, target: &IntMatrix, tol: f64) -> bool {
    let n = target.dim();
    (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - Complex64::new(big_to_f64(target.get(i, j)), 0.0)).norm() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Substitution {
        Substitution::parse(&["12", "1"]).unwrap()
    }

    #[test]
    fn phi_hand_example() {
        let v = Word::parse("121", 2).unwrap();
        let z = phi_direct(&v, 0, &[1.0, 1.0], 0.25);
        assert!(z.norm() < 1e-15);
        assert!((phi_direct(&v, 0, &[0.3, 0.9], 0.0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn twist_at_zero_is_transpose() {
        let a = Substitution::parse(&["112", "21"]).unwrap();
        let t = twist_matrix(&fib(), &a, &[0.4, 0.6], 0.0).unwrap();
        assert!(is_integer_close(&t.entries, &a.matrix().transpose(), 0.0));
    }

    #[test]
    fn pi_rows_match_direct() {
        let seq = SubstitutionSequence::new(vec![fib(), Substitution::parse(&["21", "122"]).unwrap(), fib()]).unwrap();
        let s = [0.37, 0.81];
        let omega = 1.23;
        let pi = pi_product(&seq, 3, &s, omega).unwrap();
        for b in 0..2u8 {
            let w = seq.apply_range(1, 3, &[b]).unwrap();
            for a in 0..2u8 {
                let d = phi_direct(&w, a, &s, omega);
                assert!((pi[(b as usize, a as usize)] - d).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_exact_power() {
        let samples: Vec<(f64, f64)> = (0..10).map(|i| {
            let r = 10f64.powf(2.0 + i as f64 / 3.0);
            (r, 3.0 * r.sqrt())
        }).collect();
        let f = growth_fit(&samples).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-10 && (f.c1 - 3.0).abs() < 1e-10);
    }
}
