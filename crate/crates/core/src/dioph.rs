//! Nearest-integer sequences along renormalization, the Θ matrices built from
//! covariant frames, Erdős–Kahane prediction and covering counts, and the
//! Salem/Pisot demonstration.

use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::bv::SubstitutionSequence;
use crate::cocycle::{log_operator_norm, OseledetsFrame};
use crate::error::{Error, Result};
use crate::matrix::big_ratio;
use crate::substitution::{population_vector, Word};
use crate::twisted::ModularOrbit;

fn ser_big<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

/// Largest `log A(n,j)` a Θ entry may carry in double precision.
const MAX_LOG_ENTRY: f64 = 700.0;

/// `ω |ζ^{[n]}(v_n)|_s = K_n + ε_n` for `n = 0, …, words.len() − 1`, read
/// exactly from the orbit.
pub fn kn_sequence(orbit: &ModularOrbit, words: &[&Word]) -> Result<(Vec<BigInt>, Vec<f64>)> {
    if words.len() > orbit.levels() + 1 {
        return Err(Error::OutOfRange(format!("{} levels requested, orbit has {}", words.len(), orbit.levels() + 1)));
    }
    let m = orbit.residues(0).len();
    let mut ks = Vec::with_capacity(words.len());
    let mut eps = Vec::with_capacity(words.len());
    for (n, w) in words.iter().enumerate() {
        let ell = population_vector(w, m);
        let (k, e) = orbit.nearest(n, &ell);
        ks.push(k);
        eps.push(e);
    }
    Ok((ks, eps))
}

/// Θ matrices and the greedy return-word choice.
#[derive(Clone, Debug, Serialize)]
pub struct ThetaSequence {
    /// `Θ_n` for `n = 0, …, levels − 1`, row-major.
    pub theta: Vec<[[f64; 2]; 2]>,
    /// Index into the return basis of `v_n`, `n = 0, …, levels`.
    pub v: Vec<usize>,
    pub det: Vec<f64>,
    /// `det Θ_n / (A(n,1) A(n+1,2))`.
    pub normalized_det: Vec<f64>,
    /// `|Δ_i|` for every candidate at each choice.
    pub candidates: Vec<Vec<f64>>,
}

fn theta_row(frames: &OseledetsFrame, n: usize, ell: &[f64]) -> [f64; 2] {
    let dot = |e: &[f64]| e.iter().zip(ell).map(|(x, y)| x * y).sum::<f64>();
    [frames.log_a[n][0].exp() * dot(&frames.e1[n]), frames.log_a[n][1].exp() * dot(&frames.e2[n])]
}

/// Greedy `v_n`: `v_0` is the first basis word, each next word maximizes `|Δ_i|`.
pub fn theta_sequence(frames: &OseledetsFrame, returns: &[Word], levels: usize) -> Result<ThetaSequence> {
    if levels == 0 || levels > frames.levels {
        return Err(Error::OutOfRange(format!("{levels} levels, frames reach {}", frames.levels)));
    }
    if returns.is_empty() {
        return Err(Error::Invalid("empty return basis".into()));
    }
    if frames.log_a[levels].iter().any(|x| x.abs() > MAX_LOG_ENTRY) {
        return Err(Error::Precision(format!("growth at level {levels} overflows double precision")));
    }
    let m = frames.e1[0].len();
    let ells: Vec<Vec<f64>> =
        returns.iter().map(|w| population_vector(w, m).into_iter().map(|x| x as f64).collect()).collect();
    let mut v = vec![0usize];
    let mut theta = Vec::with_capacity(levels);
    let mut det = Vec::with_capacity(levels);
    let mut normalized_det = Vec::with_capacity(levels);
    let mut candidates = Vec::with_capacity(levels);
    for n in 0..levels {
        let top = theta_row(frames, n, &ells[v[n]]);
        let deltas: Vec<f64> = ells
            .iter()
            .map(|ell| {
                let bottom = theta_row(frames, n + 1, ell);
                top[0] * bottom[1] - top[1] * bottom[0]
            })
            .collect();
        let best = (0..deltas.len()).fold(0, |b, i| if deltas[i].abs() > deltas[b].abs() { i } else { b });
        let bottom = theta_row(frames, n + 1, &ells[best]);
        let d = deltas[best];
        if d == 0.0 {
            return Err(Error::Singular(format!("Θ_{n}")));
        }
        v.push(best);
        theta.push([top, bottom]);
        det.push(d);
        normalized_det.push(d / (frames.log_a[n][0] + frames.log_a[n + 1][1]).exp());
        candidates.push(deltas.iter().map(|x| x.abs()).collect());
    }
    Ok(ThetaSequence { theta, v, det, normalized_det, candidates })
}

/// State of the Erdős–Kahane argument along one `(s, ω)`.
#[derive(Clone, Debug, Serialize)]
pub struct EKState {
    #[serde(serialize_with = "ser_big")]
    pub k: Vec<BigInt>,
    pub eps: Vec<f64>,
    pub theta: Vec<[[f64; 2]; 2]>,
    pub v: Vec<usize>,
    /// `M_n = 1 + C_ζ exp[2(W_n + W_{n+1})]`, `n = 0, …, levels − 2`.
    pub m_n: Vec<f64>,
    pub rho_n: Vec<f64>,
    pub c_zeta: f64,
    /// Coordinates of `s` along `e_1^{(0)}, e_2^{(0)}`.
    pub a: [f64; 2],
    /// Stable-part remainder from the covariant decomposition of `s`.
    pub xi: Vec<f64>,
    /// `|ζ^{[n]}(v_n)|_s` minus its two-frame reconstruction.
    pub xi_residual: Vec<f64>,
    pub normalized_det: Vec<f64>,
}

fn mat_inv_mul_row(theta_n: &[[f64; 2]; 2], row: &[f64; 2]) -> Result<[BigRational; 2]> {
    let q = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::Invalid(format!("non-finite Θ entry {x}")));
    let (a, b, c, d) = (q(theta_n[0][0])?, q(theta_n[0][1])?, q(theta_n[1][0])?, q(theta_n[1][1])?);
    let det = &a * &d - &b * &c;
    if det.is_zero() {
        return Err(Error::Singular("Θ_n".into()));
    }
    let (r0, r1) = (q(row[0])?, q(row[1])?);
    // row · Θ_n^{-1}
    Ok([(&r0 * &d - &r1 * &c) / &det, (&r1 * &a - &r0 * &b) / &det])
}

fn t_norm(theta_n: &[[f64; 2]; 2], theta_next: &[[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = *theta_n;
    let det = a * d - b * c;
    let inv = [[d / det, -b / det], [-c / det, a / det]];
    theta_next
        .iter()
        .map(|r| (r[0] * inv[0][0] + r[1] * inv[1][0]).abs() + (r[0] * inv[0][1] + r[1] * inv[1][1]).abs())
        .fold(0.0, f64::max)
}

impl EKState {
    /// Assembles a state from its parts, with `M_n` and `ρ_n` given directly.
    pub fn from_parts(k: Vec<BigInt>, eps: Vec<f64>, theta: Vec<[[f64; 2]; 2]>, m_n: Vec<f64>) -> Result<Self> {
        if k.len() != eps.len() || theta.len() + 1 != k.len() || m_n.len() + 2 != k.len() {
            return Err(Error::Invalid("inconsistent EK state lengths".into()));
        }
        let rho_n = m_n.iter().map(|m| 1.0 / (4.0 * m)).collect();
        let len = k.len();
        Ok(EKState {
            k,
            eps,
            theta,
            v: vec![0; len],
            m_n,
            rho_n,
            c_zeta: f64::NAN,
            a: [f64::NAN; 2],
            xi: vec![0.0; len],
            xi_residual: vec![0.0; len],
            normalized_det: Vec::new(),
        })
    }

    /// Full state for levels `0..=levels` of a sequence. The frames must come
    /// from the same sequence and reach `levels`; `C_ζ` is the smallest
    /// constant with `‖Θ_{n+1}Θ_n^{-1}‖_∞ ≤ C_ζ exp[2(W_n + W_{n+1})]` on the run.
    pub fn build(
        seq: &SubstitutionSequence,
        frames: &OseledetsFrame,
        returns: &[Word],
        s: &[f64],
        omega: f64,
        levels: usize,
        precision_bits: u64,
    ) -> Result<Self> {
        if levels < 2 || levels + 1 > seq.len() {
            return Err(Error::OutOfRange(format!("{levels} levels for a sequence of {} steps", seq.len())));
        }
        let ts = theta_sequence(frames, returns, levels)?;
        let orbit = ModularOrbit::new(seq, s, omega, levels, precision_bits)?;
        let words: Vec<&Word> = ts.v.iter().map(|&i| &returns[i]).collect();
        let (k, eps) = kn_sequence(&orbit, &words)?;
        let w: Vec<f64> = (1..=levels).map(|j| log_operator_norm(seq.matrix(j))).collect();
        let mut c_zeta: f64 = 0.0;
        for n in 0..levels - 1 {
            let t = t_norm(&ts.theta[n], &ts.theta[n + 1]);
            c_zeta = c_zeta.max(t * (-2.0 * (w[n] + w[n + 1])).exp());
        }
        let m_n: Vec<f64> = (0..levels - 1).map(|n| 1.0 + c_zeta * (2.0 * (w[n] + w[n + 1])).exp()).collect();
        let rho_n = m_n.iter().map(|m| 1.0 / (4.0 * m)).collect();

        // covariant coordinates of s at level 0
        let m = seq.arity();
        let c0 = &frames.covariant[0];
        let coords = c0
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(s))
            .ok_or_else(|| Error::Singular("covariant basis".into()))?;
        let mut xi = Vec::with_capacity(levels + 1);
        let mut xi_residual = Vec::with_capacity(levels + 1);
        for (n, word) in words.iter().enumerate() {
            let ell: Vec<f64> = population_vector(word, m).into_iter().map(|x| x as f64).collect();
            let part = |j: usize| {
                let e = frames.covariant[n].column(j);
                coords[j] * frames.log_growth[n][j].exp() * e.iter().zip(&ell).map(|(x, y)| x * y).sum::<f64>()
            };
            xi.push((2..m).map(part).sum());
            let len = orbit.value(n, &population_vector(word, m)) / omega;
            xi_residual.push(len - part(0) - part(1));
        }
        Ok(EKState {
            k,
            eps,
            theta: ts.theta,
            v: ts.v,
            m_n,
            rho_n,
            c_zeta,
            a: [coords[0], coords[1]],
            xi,
            xi_residual,
            normalized_det: ts.normalized_det,
        })
    }

    pub fn levels(&self) -> usize {
        self.k.len() - 1
    }

    /// Whether the uniqueness hypothesis holds at `n` with frequency bound `b`.
    pub fn hypothesis_holds(&self, n: usize, b: f64) -> bool {
        n + 2 <= self.levels()
            && (n..=n + 2).all(|j| self.eps[j].abs() < self.rho_n[n] && b * self.xi[j].abs() <= self.rho_n[n])
    }
}

/// `K_pred = nearest integer to [Θ_{n+1}Θ_n^{-1}K⃗_n]_2`, computed exactly from
/// the stored Θ entries, and `branch_count = 2⌈M_n⌉ + 1`.
pub fn ek_predict(state: &EKState, n: usize) -> Result<(BigInt, BigInt)> {
    if n + 2 > state.levels() {
        return Err(Error::OutOfRange(format!("prediction at {n} needs level {}", n + 2)));
    }
    let coef = mat_inv_mul_row(&state.theta[n], &state.theta[n + 1][1])?;
    let val = &coef[0] * BigRational::from_integer(state.k[n].clone())
        + &coef[1] * BigRational::from_integer(state.k[n + 1].clone());
    let half = BigRational::new(1.into(), 2.into());
    let pred = (val + half).floor().to_integer();
    let m = BigInt::from_f64(state.m_n[n].ceil()).ok_or_else(|| Error::Precision("M_n is not finite".into()))?;
    Ok((pred, m * 2 + 1))
}

/// Whether `ek_predict` reproduces `K_{n+2}`.
pub fn ek_matches(state: &EKState, n: usize) -> Result<bool> {
    Ok(ek_predict(state, n)?.0 == state.k[n + 2])
}

/// CSV `n,K_n,eps_n,rho_n,M_n,predicted_K,match_flag`; the prediction in row
/// `n` is made from levels `n − 2` and `n − 1`.
pub fn write_ek_csv<W: Write>(state: &EKState, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,K_n,eps_n,rho_n,M_n,predicted_K,match_flag")?;
    for n in 0..=state.levels() {
        let (rho, m) = match state.m_n.get(n) {
            Some(&m) => (format!("{}", state.rho_n[n]), format!("{m}")),
            None => (String::new(), String::new()),
        };
        let (pred, flag) = if n >= 2 {
            match ek_predict(state, n - 2) {
                Ok((p, _)) => {
                    let ok = p == state.k[n];
                    (p.to_string(), if ok { "1" } else { "0" }.to_string())
                }
                Err(_) => (String::new(), String::new()),
            }
        } else {
            (String::new(), String::new())
        };
        writeln!(out, "{n},{},{},{rho},{m},{pred},{flag}", state.k[n], state.eps[n])?;
    }
    Ok(())
}

/// Constant with `Σ_{i<δN} C(N,i) ≤ exp[C′ δ log(1/δ) N]` for `δ < e^{-1}`.
pub const STIRLING_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Covering {
    /// `log Σ_{i<δN} C(N,i)`.
    pub log_binomial: f64,
    /// `Σ log(2M_n + 1)` over the worst admissible levels.
    pub log_branches: f64,
    pub log_count: f64,
    /// `C′ δ log(1/δ) N`.
    pub stirling_bound: f64,
    pub dim_bound: f64,
}

/// `log C(n, k)` through log-Gamma.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Covering count for the exceptional parameters after `N` levels. `w[n]` is
/// `W_n`; `theta2` and `delta1` set the ball radius `exp[-(θ₂ − δ₁)N]`, with
/// `δ₁ = θ₂/10` by default.
pub fn covering_estimate(
    w: &[f64],
    big_n: usize,
    delta: f64,
    c_zeta: f64,
    theta2: f64,
    delta1: Option<f64>,
) -> Result<Covering> {
    if !(delta > 0.0 && delta < (-1.0f64).exp()) {
        return Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1/e)")));
    }
    if big_n == 0 || w.len() < big_n + 1 {
        return Err(Error::InsufficientData(format!("{} W values for N = {big_n}", w.len())));
    }
    let k_max = ((delta * big_n as f64).ceil() as usize).saturating_sub(1);
    let log_binomial_sum = (0..=k_max).map(|i| log_binomial(big_n, i)).fold(f64::NEG_INFINITY, log_add_exp);
    let mut branch: Vec<f64> = (0..big_n)
        .map(|n| log_add_exp(3f64.ln(), 2f64.ln() + c_zeta.ln() + 2.0 * (w[n] + w[n + 1])))
        .collect();
    branch.sort_by(|a, b| b.total_cmp(a));
    let log_branches: f64 = branch.iter().take(k_max).sum();
    let log_count = log_binomial_sum + log_branches;
    let d1 = delta1.unwrap_or(theta2 / 10.0);
    let rate = (theta2 - d1) * big_n as f64;
    if !(rate > 0.0) {
        return Err(Error::OutOfRange("θ₂ − δ₁ must be positive".into()));
    }
    Ok(Covering {
        log_binomial: log_binomial_sum,
        log_branches,
        log_count,
        stirling_bound: STIRLING_CONSTANT * delta * (1.0 / delta).ln() * big_n as f64,
        dim_bound: log_count / rate,
    })
}

/// A real number given exactly: `a + b√d` with rational `a`, `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticReal {
    pub a: BigRational,
    pub b: BigRational,
    pub d: u64,
}

impl QuadraticReal {
    pub fn rational(a: BigRational) -> Self {
        QuadraticReal { a, b: BigRational::zero(), d: 0 }
    }

    pub fn golden() -> Self {
        let half = BigRational::new(1.into(), 2.into());
        QuadraticReal { a: half.clone(), b: half, d: 5 }
    }

    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt()
    }

    /// `⌊x · 2^bits⌋` up to one unit.
    fn fixed(&self, bits: u64) -> BigInt {
        let one = BigInt::from(1) << bits;
        let a = (BigRational::from_integer(one) * &self.a).floor().to_integer();
        if self.b.is_zero() {
            return a;
        }
        let root = (BigInt::from(self.d) << (2 * bits)).sqrt();
        let b = (BigRational::from_integer(root) * &self.b).floor().to_integer();
        a + b
    }
}

impl FromStr for QuadraticReal {
    type Err = Error;

    /// Accepts `phi`, `1+sqrt2`, integers, `p/q`, or `a,b,d` for `a + b√d`.
    fn from_str(text: &str) -> Result<Self> {
        let rat = |t: &str| -> Result<BigRational> {
            let t = t.trim();
            let bad = || Error::Invalid(format!("cannot parse {t:?} as a rational"));
            match t.split_once('/') {
                Some((p, q)) => {
                    let q: BigInt = q.trim().parse().map_err(|_| bad())?;
                    if q.is_zero() {
                        return Err(bad());
                    }
                    Ok(BigRational::new(p.trim().parse().map_err(|_| bad())?, q))
                }
                None => Ok(BigRational::from_integer(t.parse().map_err(|_| bad())?)),
            }
        };
        match text.trim() {
            "phi" => Ok(Self::golden()),
            "1+sqrt2" => Ok(QuadraticReal { a: rat("1")?, b: rat("1")?, d: 2 }),
            t if t.contains(',') => {
                let parts: Vec<&str> = t.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Invalid(format!("expected a,b,d in {t:?}")));
                }
                let d = parts[2].trim().parse().map_err(|_| Error::Invalid(format!("bad radicand in {t:?}")))?;
                Ok(QuadraticReal { a: rat(parts[0])?, b: rat(parts[1])?, d })
            }
            t => Ok(Self::rational(rat(t)?)),
        }
    }
}

/// Nearest-integer decomposition `αλ^n = K_n + ε_n`, `n = 0, …, N`.
#[derive(Clone, Debug, Serialize)]
pub struct SalemResult {
    pub lambda: f64,
    pub alpha: f64,
    #[serde(serialize_with = "ser_big")]
    pub k: Vec<BigInt>,
    pub eps: Vec<f64>,
    /// `K_{n+1}/K_n`, NaN where `K_n = 0`.
    pub ratio: Vec<f64>,
    pub working_bits: u64,
}

impl SalemResult {
    /// `∏_{n=0}^{N} cos(2πλ^{-n} t)`.
    pub fn fourier(&self, t: f64) -> f64 {
        (0..self.k.len())
            .map(|n| (2.0 * std::f64::consts::PI * self.lambda.powi(-(n as i32)) * t).cos())
            .product()
    }
}

pub fn salem_demo(lambda: &QuadraticReal, alpha: &QuadraticReal, big_n: usize, precision_bits: u64) -> Result<SalemResult> {
    let lf = lambda.to_f64();
    if !(lf > 1.0) {
        return Err(Error::Invalid(format!("lambda = {lf} must exceed 1")));
    }
    let af = alpha.to_f64().abs().max(1.0);
    let needed = (big_n as f64 * lf.log2() + af.log2()).ceil() as u64 + 128;
    if needed > precision_bits {
        return Err(Error::Precision(format!("{needed} bits needed, budget {precision_bits}")));
    }
    let bits = needed.max(256);
    let lam = lambda.fixed(bits);
    let mut x = alpha.fixed(bits);
    let one = BigInt::from(1) << bits;
    let half = BigInt::from(1) << (bits - 1);
    let mut k = Vec::with_capacity(big_n + 1);
    let mut eps = Vec::with_capacity(big_n + 1);
    for n in 0..=big_n {
        if n > 0 {
            x = (&x * &lam) >> bits;
        }
        let kn = (&x + &half).div_floor(&one);
        let rem = &x - &kn * &one;
        eps.push(big_ratio(&rem, &one));
        k.push(kn);
    }
    let ratio = k
        .windows(2)
        .map(|w| if w[0].is_zero() { f64::NAN } else { big_ratio(&w[1], &w[0]) })
        .collect();
    Ok(SalemResult { lambda: lf, alpha: alpha.to_f64(), k, eps, ratio, working_bits: bits })
}

/// Indices with `|ε_n| > threshold`.
pub fn large_eps_indices(res: &SalemResult, threshold: f64) -> Vec<usize> {
    (0..res.eps.len()).filter(|&n| res.eps[n].abs() > threshold).collect()
}
