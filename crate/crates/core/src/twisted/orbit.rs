use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::bv::SubstitutionSequence;
use crate::error::{Error, Result};
use crate::matrix::big_ratio;

/// Default cap on the size of the common denominator.
pub const DEFAULT_PRECISION_BITS: u64 = 4096;

/// Fractional parts of `ω (S^{[n]})ᵗ s`, kept exact.
///
/// `ω s` is converted to rationals with a common denominator `D`, so
/// `ω s^{(n)} = y_n / D` with integer `y_n = A_n y_{n-1}`. Everything mod 1 is
/// read off `y_n mod D`.
#[derive(Clone, Debug, Serialize)]
pub struct ModularOrbit {
    #[serde(skip)]
    denom: BigInt,
    #[serde(skip)]
    numerators: Vec<Vec<BigInt>>,
    /// `f_n`, components in `[0, 1)`.
    pub frac: Vec<Vec<f64>>,
    pub precision_bits: u64,
}

impl ModularOrbit {
    /// Orbit of a floating-point frequency and roof, both taken as exact dyadic rationals.
    pub fn new(seq: &SubstitutionSequence, s: &[f64], omega: f64, levels: usize, precision_bits: u64) -> Result<Self> {
        let to_q = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::Invalid(format!("non-finite value {x}")));
        let omega = to_q(omega)?;
        let s = s.iter().map(|&x| to_q(x)).collect::<Result<Vec<_>>>()?;
        Self::from_rational(seq, &s, &omega, levels, precision_bits)
    }

    pub fn from_rational(
        seq: &SubstitutionSequence,
        s: &[BigRational],
        omega: &BigRational,
        levels: usize,
        precision_bits: u64,
    ) -> Result<Self> {
        if s.len() != seq.arity() {
            return Err(Error::ArityMismatch(seq.arity(), s.len()));
        }
        let levels = levels.min(seq.len());
        let prods: Vec<BigRational> = s.iter().map(|x| x * omega).collect();
        let denom = prods.iter().fold(BigInt::one(), |d, x| d.lcm(x.denom()));
        if denom.bits() > precision_bits {
            return Err(Error::Precision(format!(
                "common denominator needs {} bits, budget {precision_bits}",
                denom.bits()
            )));
        }
        let y0: Vec<BigInt> = prods.iter().map(|x| (x * BigRational::from_integer(denom.clone())).to_integer()).collect();
        let mut numerators = vec![y0];
        for k in 1..=levels {
            let next = seq.cocycle_matrix(k).mul_vec(numerators.last().unwrap());
            numerators.push(next);
        }
        let frac = numerators
            .iter()
            .map(|y| y.iter().map(|x| big_ratio(&x.mod_floor(&denom), &denom)).collect())
            .collect();
        Ok(ModularOrbit { denom, numerators, frac, precision_bits })
    }

    /// Highest computed level.
    pub fn levels(&self) -> usize {
        self.numerators.len() - 1
    }

    pub fn denominator(&self) -> &BigInt {
        &self.denom
    }

    /// `y_n mod D`.
    pub fn residues(&self, n: usize) -> Vec<BigInt> {
        self.numerators[n].iter().map(|x| x.mod_floor(&self.denom)).collect()
    }

    fn pair(&self, n: usize, ell: &[u64]) -> BigInt {
        ell.iter().zip(&self.numerators[n]).map(|(&c, y)| y * BigInt::from(c)).sum()
    }

    /// `frac(⟨ℓ, ω s^{(n)}⟩)`.
    pub fn frac_of(&self, n: usize, ell: &[u64]) -> f64 {
        big_ratio(&self.pair(n, ell).mod_floor(&self.denom), &self.denom)
    }

    /// `‖⟨ℓ, ω s^{(n)}⟩‖_{ℝ/ℤ}`.
    pub fn dist_z(&self, n: usize, ell: &[u64]) -> f64 {
        let t = self.pair(n, ell).mod_floor(&self.denom);
        let other = &self.denom - &t;
        big_ratio(if t <= other { &t } else { &other }, &self.denom)
    }

    /// Nearest integer `K` and remainder `ε ∈ [-1/2, 1/2]` of `⟨ℓ, ω s^{(n)}⟩`.
    pub fn nearest(&self, n: usize, ell: &[u64]) -> (BigInt, f64) {
        let t = self.pair(n, ell);
        let two_d: BigInt = &self.denom * 2u32;
        let num: BigInt = &t * 2u32 + &self.denom;
        let k = num.div_floor(&two_d);
        let rem = t - &k * &self.denom;
        let eps = if rem.is_zero() { 0.0 } else { big_ratio(&rem, &self.denom) };
        (k, eps)
    }

    /// `⟨ℓ, ω s^{(n)}⟩` as a float (may be huge).
    pub fn value(&self, n: usize, ell: &[u64]) -> f64 {
        big_ratio(&self.pair(n, ell), &self.denom)
    }
}
