//! Lyapunov spectra, covariant frames, step-norm statistics and return times
//! for products `𝔸(n) = A_n ⋯ A_1`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bv::SubstitutionSequence;
use crate::error::{Error, Result};
use crate::iet::{RauzyStep, RauzyWalk, StepKind};
use crate::matrix::IntMatrix;
use crate::substitution::is_simple;

/// Column norm above which a product is re-orthonormalized early.
const REORTHO_THRESHOLD: f64 = 1.2676506002282294e30; // 2^100
const BATCHES: usize = 32;

/// One matrix of a cocycle.
#[derive(Clone, Debug, PartialEq)]
pub enum CocycleStep {
    Dense(DMatrix<f64>),
    /// `I + E(target, source)`: row `target` gains row `source`.
    RowAdd { target: usize, source: usize },
}

impl CocycleStep {
    fn apply(&self, v: &mut DMatrix<f64>) {
        match self {
            CocycleStep::Dense(a) => *v = a * &*v,
            CocycleStep::RowAdd { target, source } => {
                let src = v.row(*source).clone_owned();
                let mut row = v.row_mut(*target);
                row += src;
            }
        }
    }

    pub fn from_int(a: &IntMatrix) -> Self {
        CocycleStep::Dense(a.to_nalgebra())
    }

    /// The height-cocycle matrix of an induction step.
    pub fn from_rauzy(step: &RauzyStep) -> Self {
        CocycleStep::RowAdd { target: step.loser as usize, source: step.winner as usize }
    }

    pub fn to_dense(&self, m: usize) -> DMatrix<f64> {
        match self {
            CocycleStep::Dense(a) => a.clone(),
            CocycleStep::RowAdd { target, source } => {
                let mut a = DMatrix::identity(m, m);
                a[(*target, *source)] += 1.0;
                a
            }
        }
    }
}

/// Rauzy–Veech height-cocycle steps from a streaming walk.
pub fn rauzy_stream(mut walk: RauzyWalk, n: usize) -> impl Iterator<Item = Result<CocycleStep>> {
    (0..n).map(move |_| walk.next_step().map(|s| CocycleStep::from_rauzy(&s)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Descending.
    pub theta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_steps: usize,
}

impl LyapunovEstimate {
    pub fn sum(&self) -> f64 {
        self.theta.iter().sum()
    }

    pub fn gap_ok(&self) -> bool {
        self.theta[0] - self.theta[1] > 5.0 * (self.stderr[0] + self.stderr[1])
    }
}

/// `(Q, R)` with `diag(R) ≥ 0`.
fn qr_positive(v: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = v.qr();
    let (mut q, mut r) = qr.unpack();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Exponents per step from periodically re-orthonormalized products.
pub fn lyapunov_spectrum<I>(m: usize, stream: I, n: usize, checkpoint_every: usize) -> Result<LyapunovEstimate>
where
    I: IntoIterator<Item = Result<CocycleStep>>,
{
    if checkpoint_every == 0 || n < 10 * checkpoint_every {
        return Err(Error::InsufficientData(format!("{n} steps with checkpoint every {checkpoint_every}")));
    }
    let batch_len = n.div_ceil(BATCHES);
    let mut batch_sums = vec![vec![0.0; m]; n.div_ceil(batch_len)];
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut since = 0;
    let mut done = 0;
    let mut it = stream.into_iter();
    while done < n {
        let step = it.next().ok_or_else(|| Error::InsufficientData(format!("stream ended after {done} steps")))??;
        step.apply(&mut q);
        done += 1;
        since += 1;
        let big = since >= checkpoint_every
            || done == n
            || q.column_iter().any(|c| c.norm() > REORTHO_THRESHOLD);
        if big {
            let (nq, r) = qr_positive(q);
            let batch = &mut batch_sums[(done - 1) / batch_len];
            for i in 0..m {
                let d = r[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::Singular(format!("step {done}")));
                }
                batch[i] += d.ln();
            }
            q = nq;
            since = 0;
        }
    }
    let nb = batch_sums.len();
    let lens: Vec<f64> = (0..nb).map(|b| (batch_len.min(n - b * batch_len)) as f64).collect();
    let raw: Vec<f64> = (0..m).map(|i| batch_sums.iter().map(|b| b[i]).sum::<f64>() / n as f64).collect();
    // A start flag aligned with an invariant subspace yields the exponents out of order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let theta: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let stderr: Vec<f64> = order
        .iter()
        .copied()
        .map(|i| {
            let rates: Vec<f64> = batch_sums.iter().zip(&lens).map(|(b, l)| b[i] / l).collect();
            let mean = rates.iter().sum::<f64>() / nb as f64;
            let var = rates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nb as f64 - 1.0).max(1.0);
            (var / nb as f64).sqrt()
        })
        .collect();
    Ok(LyapunovEstimate { theta, stderr, n_steps: n })
}

/// Covariant (Oseledets) frames along a finite cocycle.
#[derive(Clone, Debug, Serialize)]
pub struct OseledetsFrame {
    pub levels: usize,
    /// `e_1^{(n)}`, in the closed positive cone.
    pub e1: Vec<Vec<f64>>,
    pub e2: Vec<Vec<f64>>,
    /// `log A(n,1), log A(n,2)`.
    pub log_a: Vec<[f64; 2]>,
    /// All covariant directions per level, as columns.
    #[serde(skip)]
    pub covariant: Vec<DMatrix<f64>>,
    /// `log A(n,j)` for every `j`.
    pub log_growth: Vec<Vec<f64>>,
    /// `‖𝔸(n)e_j^{(0)} / A(n,j) − e_j^{(n)}‖` for `j = 1, 2`.
    pub residual: Vec<[f64; 2]>,
    /// Smallest angle between `e_1^{(n)}` and `e_2^{(n)}`, radians.
    pub min_angle: f64,
    pub theta: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl OseledetsFrame {
    pub fn growth(&self, n: usize, j: usize) -> f64 {
        self.log_a[n][j].exp()
    }
}

/// Frames for the cocycle `A_k = S_kᵗ` of a sequence, levels `0..=n`; all
/// steps of the sequence are used as the future for the backward pass.
pub fn oseledets_frames(seq: &SubstitutionSequence, n: usize) -> Result<OseledetsFrame> {
    let mats: Vec<DMatrix<f64>> = (1..=seq.len()).map(|k| seq.cocycle_matrix(k).to_nalgebra()).collect();
    oseledets_frames_from(&mats, n)
}

/// Frames from explicit matrices `A_1, A_2, …`.
pub fn oseledets_frames_from(mats: &[DMatrix<f64>], n: usize) -> Result<OseledetsFrame> {
    frames_impl(mats, n, true)
}

/// As [`oseledets_frames_from`] without the spectral-gap test.
pub fn oseledets_frames_unchecked(mats: &[DMatrix<f64>], n: usize) -> Result<OseledetsFrame> {
    frames_impl(mats, n, false)
}

fn frames_impl(mats: &[DMatrix<f64>], n: usize, gap_test: bool) -> Result<OseledetsFrame> {
    let total = mats.len();
    if n > total || total < 2 || mats[0].nrows() < 2 {
        return Err(Error::InsufficientData(format!("{total} matrices for {n} levels")));
    }
    let m = mats[0].nrows();
    // forward pass from a basis whose first vector is (1,…,1)/√m
    let mut start = DMatrix::<f64>::identity(m, m);
    start.column_mut(0).fill(1.0);
    let (mut q, _) = qr_positive(start);
    if q.column(0).sum() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut qs = vec![q.clone()];
    let mut rs = Vec::with_capacity(total);
    for a in mats {
        let (nq, r) = qr_positive(a * &q);
        if (0..m).any(|i| !(r[(i, i)] > 0.0) || !r[(i, i)].is_finite()) {
            return Err(Error::Singular(format!("level {}", rs.len() + 1)));
        }
        rs.push(r);
        qs.push(nq.clone());
        q = nq;
    }
    let log_diag: Vec<Vec<f64>> = rs.iter().map(|r| (0..m).map(|i| r[(i, i)].ln()).collect()).collect();
    let theta: Vec<f64> = (0..m).map(|i| log_diag.iter().map(|d| d[i]).sum::<f64>() / total as f64).collect();
    let stderr: Vec<f64> = (0..m)
        .map(|i| {
            let mean = theta[i];
            let var = log_diag.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (total as f64 - 1.0);
            (var / total as f64).sqrt()
        })
        .collect();
    if gap_test && m >= 2 {
        let gap = theta[0] - theta[1];
        let threshold = 5.0 * (stderr[0] + stderr[1]);
        if gap <= threshold {
            return Err(Error::GapTest { gap, threshold });
        }
    }

    // backward pass for the upper-triangular coefficient matrices
    let mut cs = vec![DMatrix::<f64>::identity(m, m); total + 1];
    for k in (1..=total).rev() {
        let mut c = rs[k - 1]
            .clone()
            .solve_upper_triangular(&cs[k])
            .ok_or_else(|| Error::Singular(format!("level {k}")))?;
        for mut col in c.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        cs[k - 1] = c;
    }
    let mut covariant = Vec::with_capacity(n + 1);
    let mut log_growth = vec![vec![0.0; m]];
    for k in 0..=n {
        covariant.push(&qs[k] * &cs[k]);
        if k > 0 {
            let prev = log_growth.last().unwrap().clone();
            let next: Vec<f64> = (0..m).map(|j| prev[j] + (&rs[k - 1] * cs[k - 1].column(j)).norm().ln()).collect();
            log_growth.push(next);
        }
    }
    // orient e1 into the positive cone
    for c in covariant.iter_mut() {
        if c.column(0).sum() < 0.0 {
            c.column_mut(0).neg_mut();
        }
    }
    let col = |c: &DMatrix<f64>, j: usize| c.column(j).iter().copied().collect::<Vec<f64>>();
    let e1: Vec<Vec<f64>> = covariant.iter().map(|c| col(c, 0)).collect();
    let e2: Vec<Vec<f64>> = covariant.iter().map(|c| col(c, 1.min(m - 1))).collect();
    let log_a: Vec<[f64; 2]> = log_growth.iter().map(|g| [g[0], g[1.min(m - 1)]]).collect();

    // direct forward propagation of e_j^{(0)}
    let mut residual = vec![[0.0; 2]];
    let mut vs = [DVector::from_vec(e1[0].clone()), DVector::from_vec(e2[0].clone())];
    let mut logs = [0.0f64; 2];
    for k in 1..=n {
        let mut r = [0.0; 2];
        for j in 0..2 {
            let w = &mats[k - 1] * &vs[j];
            let norm = w.norm();
            logs[j] += norm.ln();
            vs[j] = w / norm;
            let target = DVector::from_vec(if j == 0 { e1[k].clone() } else { e2[k].clone() });
            let scaled = &vs[j] * (logs[j] - log_a[k][j]).exp();
            r[j] = (scaled - target).norm();
        }
        residual.push(r);
    }
    let min_angle = e1
        .iter()
        .zip(&e2)
        .map(|(a, b)| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            dot.abs().min(1.0).acos()
        })
        .fold(std::f64::consts::FRAC_PI_2, f64::min);
    Ok(OseledetsFrame { levels: n, e1, e2, log_a, covariant, log_growth, residual, min_angle, theta, stderr })
}

/// Natural log of the Euclidean operator norm of a nonnegative integer matrix.
pub fn log_operator_norm(a: &IntMatrix) -> f64 {
    let max = a.max_entry();
    if max <= 0.into() {
        return f64::NEG_INFINITY;
    }
    let log_max = crate::matrix::big_ln(&max);
    let m = a.dim();
    let b = DMatrix::from_fn(m, m, |i, j| crate::matrix::big_ratio(a.get(i, j), &max));
    let btb = b.transpose() * &b;
    let mut x = DVector::from_element(m, 1.0 / (m as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let y = &btb * &x;
        let next = y.norm();
        if next == 0.0 {
            return f64::NEG_INFINITY;
        }
        x = y / next;
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    log_max + 0.5 * lambda.ln()
}

/// `W_n = log ‖A(a_n)‖` per canonical step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WStats {
    pub w: Vec<f64>,
}

pub fn w_statistics(seq: &SubstitutionSequence) -> Result<WStats> {
    seq.canonical_marker().ok_or(Error::NotCanonical)?;
    Ok(WStats { w: (1..=seq.len()).map(|k| log_operator_norm(seq.matrix(k))).collect() })
}

impl WStats {
    /// From canonical step matrices given directly.
    pub fn from_matrices(mats: &[IntMatrix]) -> Self {
        WStats { w: mats.iter().map(log_operator_norm).collect() }
    }

    fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// `(sum of the ⌈δN⌉ largest W_n) / (δN log(1/δ))`.
    pub fn ld_stat(&self, delta: f64) -> f64 {
        let n = self.w.len() as f64;
        let k = (delta * n).ceil() as usize;
        let top: f64 = self.sorted_desc().iter().take(k).sum();
        top / (delta * n * (1.0 / delta).ln())
    }

    /// Mean of the `k` largest `W_n`.
    pub fn top_mean(&self, k: usize) -> f64 {
        let v = self.sorted_desc();
        v.iter().take(k).sum::<f64>() / k.min(v.len()).max(1) as f64
    }

    /// CSV `n,W`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,W")?;
        for (i, w) in self.w.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, w)?;
        }
        Ok(())
    }
}

/// Waiting times between occurrences of `q q` in an induction path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReturnStats {
    /// Step index of each occurrence.
    pub occurrences: Vec<usize>,
    /// Gaps between consecutive occurrences, in steps.
    pub ell_samples: Vec<usize>,
    /// `log |Λ|` accumulated between consecutive occurrences.
    pub l_samples: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Empirical mean of `exp(εL)` on the whole sample and on its first half.
    pub mean_full: Vec<f64>,
    pub mean_half: Vec<f64>,
    /// Largest grid `ε` up to which every mean is finite and stable.
    pub eps_fit: f64,
    /// Exponential rate of the empirical survival function's upper half.
    pub tail_rate: f64,
}

pub const MIN_OCCURRENCES: usize = 30;

/// `ε` grid: 25 geometric points in `[1e-3, 1]`.
pub fn eps_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 24.0)).collect()
}

pub fn return_time_stats(kinds: &[StepKind], lambda_log: &[f64], q: &[StepKind]) -> Result<ReturnStats> {
    if q.is_empty() || !is_simple(q) {
        return Err(Error::Invalid("q must be a nonempty simple word".into()));
    }
    if lambda_log.len() != kinds.len() + 1 {
        return Err(Error::ArityMismatch(kinds.len() + 1, lambda_log.len()));
    }
    let qq: Vec<StepKind> = q.iter().chain(q).copied().collect();
    let occurrences: Vec<usize> =
        (0..kinds.len().saturating_sub(qq.len() - 1)).filter(|&i| kinds[i..i + qq.len()] == qq[..]).collect();
    if occurrences.len() < MIN_OCCURRENCES {
        return Err(Error::InsufficientData(format!(
            "{} occurrences of the doubled word, need {MIN_OCCURRENCES}",
            occurrences.len()
        )));
    }
    let ell_samples: Vec<usize> = occurrences.windows(2).map(|w| w[1] - w[0]).collect();
    let l_samples: Vec<f64> = occurrences.windows(2).map(|w| lambda_log[w[1]] - lambda_log[w[0]]).collect();
    let grid = eps_grid();
    let mean = |xs: &[f64], e: f64| xs.iter().map(|x| (e * x).exp()).sum::<f64>() / xs.len() as f64;
    let half = &l_samples[..l_samples.len() / 2];
    let mean_full: Vec<f64> = grid.iter().map(|&e| mean(&l_samples, e)).collect();
    let mean_half: Vec<f64> = grid.iter().map(|&e| mean(half, e)).collect();
    let mut eps_fit = 0.0;
    for i in 0..grid.len() {
        let (a, b) = (mean_full[i], mean_half[i]);
        if a.is_finite() && b.is_finite() && (a - b).abs() < 0.1 * a {
            eps_fit = grid[i];
        } else {
            break;
        }
    }
    let tail_rate = survival_tail_rate(&l_samples);
    Ok(ReturnStats { occurrences, ell_samples, l_samples, eps_grid: grid, mean_full, mean_half, eps_fit, tail_rate })
}

/// Minus the slope of `log P(L > x)` against `x` over the upper half of the sample.
fn survival_tail_rate(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let pts: Vec<(f64, f64)> = (n / 2..n - 1).map(|i| (v[i], ((n - 1 - i) as f64 / n as f64).ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return f64::INFINITY;
    }
    -sxy / sxx
}

/// CSV `index,ell,L`.
pub fn write_return_csv<W: Write>(stats: &ReturnStats, mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,ell,L")?;
    for (i, (e, l)) in stats.ell_samples.iter().zip(&stats.l_samples).enumerate() {
        writeln!(out, "{i},{e},{l}")?;
    }
    Ok(())
}
