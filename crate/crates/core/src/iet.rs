//! Interval exchange transformations and Rauzy–Veech induction.
//!
//! Intervals carry labels that survive induction. A labeled permutation lists
//! the labels in domain order (`top`) and in image order (`bottom`). One step
//! compares the last interval on top (`t`) with the one whose image is last
//! (`b`); the longer one is the winner and the shorter one is cut off it.
//!
//! * kind `a`: `t` wins, `b` is moved right after `t` in the bottom row;
//! * kind `b`: `b` wins, `t` is moved right after `b` in the top row.
//!
//! The loser's tower over the new interval has two floors, so the step
//! substitution maps `loser -> b t` and fixes every other letter. With
//! `S = I + E(winner, loser)` we have `λ_old = S λ_new`, and the step matrix
//! reported by [`RauzyStep::matrix`] is the cocycle matrix `Sᵗ`, which acts on
//! heights.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::IntMatrix;
use crate::substitution::{is_simple, Letter, Substitution, Word};

/// Relative threshold below which the two competing lengths count as tied.
pub const TIE_THRESHOLD: f64 = 1e-14;

/// A one-based permutation `pi`: the `i`-th interval lands in position `pi(i)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(one_based: Vec<usize>) -> Result<Self> {
        let m = one_based.len();
        if m < 2 {
            return Err(Error::Invalid("permutation needs at least two symbols".into()));
        }
        let mut seen = vec![false; m];
        for &p in &one_based {
            if p == 0 || p > m || seen[p - 1] {
                return Err(Error::Invalid(format!("{one_based:?} is not a permutation")));
            }
            seen[p - 1] = true;
        }
        let out = Permutation(one_based);
        if !out.is_irreducible() {
            return Err(Error::Reducible);
        }
        Ok(out)
    }

    /// The reversal `(m, m-1, ..., 1)`.
    pub fn reversal(m: usize) -> Self {
        Permutation((1..=m).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// No `k < m` with `pi({1..k}) = {1..k}`.
    pub fn is_irreducible(&self) -> bool {
        let mut max = 0;
        for (k, &p) in self.0.iter().enumerate().take(self.0.len() - 1) {
            max = max.max(p);
            if max == k + 1 {
                return false;
            }
        }
        true
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Labels in domain order and in image order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPermutation {
    pub top: Vec<Letter>,
    pub bottom: Vec<Letter>,
}

impl LabeledPermutation {
    /// Labels `0..m` in domain order; label `i` lands in position `pi(i)`.
    pub fn from_permutation(pi: &Permutation) -> Self {
        let m = pi.len();
        let top: Vec<Letter> = (0..m as Letter).collect();
        let mut bottom = vec![0; m];
        for (i, &p) in pi.as_slice().iter().enumerate() {
            bottom[p - 1] = i as Letter;
        }
        LabeledPermutation { top, bottom }
    }

    pub fn m(&self) -> usize {
        self.top.len()
    }

    /// The permutation seen by an observer who ignores labels.
    pub fn reduced(&self) -> Permutation {
        let m = self.m();
        let mut pos = vec![0; m];
        for (p, &l) in self.bottom.iter().enumerate() {
            pos[l as usize] = p + 1;
        }
        Permutation(self.top.iter().map(|&l| pos[l as usize]).collect())
    }

    /// `(winner, loser)` for a step of the given kind.
    pub fn winner_loser(&self, kind: StepKind) -> (Letter, Letter) {
        let t = *self.top.last().unwrap();
        let b = *self.bottom.last().unwrap();
        match kind {
            StepKind::A => (t, b),
            StepKind::B => (b, t),
        }
    }

    /// Applies a Rauzy operation to the combinatorial data.
    pub fn apply(&self, kind: StepKind) -> LabeledPermutation {
        let mut out = self.clone();
        let t = *self.top.last().unwrap();
        let b = *self.bottom.last().unwrap();
        match kind {
            StepKind::A => {
                out.bottom.pop();
                let at = out.bottom.iter().position(|&x| x == t).unwrap();
                out.bottom.insert(at + 1, b);
            }
            StepKind::B => {
                out.top.pop();
                let at = out.top.iter().position(|&x| x == b).unwrap();
                out.top.insert(at + 1, t);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    A,
    B,
}

impl StepKind {
    pub fn symbol(self) -> char {
        match self {
            StepKind::A => 'a',
            StepKind::B => 'b',
        }
    }

    pub fn other(self) -> StepKind {
        match self {
            StepKind::A => StepKind::B,
            StepKind::B => StepKind::A,
        }
    }

    pub fn parse_word(text: &str) -> Result<Vec<StepKind>> {
        text.chars()
            .map(|c| match c {
                'a' => Ok(StepKind::A),
                'b' => Ok(StepKind::B),
                _ => Err(Error::Invalid(format!("step symbol {c:?}"))),
            })
            .collect()
    }
}

pub fn kinds_to_string(kinds: &[StepKind]) -> String {
    kinds.iter().map(|k| k.symbol()).collect()
}

/// One Rauzy–Veech step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RauzyStep {
    pub kind: StepKind,
    pub winner: Letter,
    pub loser: Letter,
}

impl RauzyStep {
    /// Cocycle matrix `I + E(loser, winner)`, the transpose of the step substitution matrix.
    pub fn matrix(&self, m: usize) -> IntMatrix {
        let mut a = IntMatrix::identity(m);
        a.set(self.loser as usize, self.winner as usize, BigInt::one());
        a
    }

    /// `I + E(winner, loser)`, so that `λ_old = length_matrix · λ_new`.
    pub fn length_matrix(&self, m: usize) -> IntMatrix {
        self.matrix(m).transpose()
    }

    /// `loser -> (bottom-last)(top-last)`, every other letter fixed.
    pub fn substitution(&self, m: usize) -> Substitution {
        let mut images: Vec<Word> = (0..m).map(|a| Word::new(vec![a as Letter])).collect();
        images[self.loser as usize] = Word::new(match self.kind {
            StepKind::A => vec![self.loser, self.winner],
            StepKind::B => vec![self.winner, self.loser],
        });
        Substitution::new(images).expect("valid elementary substitution")
    }
}

/// Scalar type for interval lengths: `f64` or exact rationals.
pub trait Length: Clone + PartialOrd + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn half(&self) -> Self;
    fn to_f64(&self) -> f64;
    fn is_positive(&self) -> bool;
    fn is_tie(a: &Self, b: &Self, scale: &Self) -> bool;
    /// Tolerance used when checking that a floor sits inside an interval.
    fn slack() -> Self;
    /// `-ln(1 - x)`.
    fn neg_ln_one_minus(&self) -> f64;
}

impl Length for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn half(&self) -> Self {
        self * 0.5
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    fn is_tie(a: &Self, b: &Self, scale: &Self) -> bool {
        (a - b).abs() < TIE_THRESHOLD * scale
    }
    fn slack() -> Self {
        1e-12
    }
    fn neg_ln_one_minus(&self) -> f64 {
        -(-self).ln_1p()
    }
}

impl Length for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn half(&self) -> Self {
        self / BigInt::from(2)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_tie(a: &Self, b: &Self, _scale: &Self) -> bool {
        a == b
    }
    fn slack() -> Self {
        Zero::zero()
    }
    fn neg_ln_one_minus(&self) -> f64 {
        let x = Length::to_f64(self);
        -(-x).ln_1p()
    }
}

/// An exchange of `m` labeled intervals of `[0, 1)`.
#[derive(Clone, PartialEq)]
pub struct Iet<L: Length = f64> {
    perm: LabeledPermutation,
    /// Indexed by label.
    lambda: Vec<L>,
}

impl<L: Length> fmt::Debug for Iet<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Iet").field("perm", &self.perm).field("lambda", &self.lambda).finish()
    }
}

impl<L: Length> Iet<L> {
    /// `lambda` lists lengths in domain order; it is normalized to total length one.
    pub fn new(pi: &Permutation, lambda: Vec<L>) -> Result<Self> {
        if lambda.len() != pi.len() {
            return Err(Error::ArityMismatch(lambda.len(), pi.len()));
        }
        if !lambda.iter().all(|x| x.is_positive()) {
            return Err(Error::Invalid("lengths must be positive".into()));
        }
        let total = lambda.iter().fold(L::zero(), |acc, x| acc.add(x));
        let lambda = lambda.iter().map(|x| x.div(&total)).collect();
        Ok(Iet { perm: LabeledPermutation::from_permutation(pi), lambda })
    }

    pub fn from_labeled(perm: LabeledPermutation, lambda_by_label: Vec<L>) -> Result<Self> {
        if perm.m() != lambda_by_label.len() {
            return Err(Error::ArityMismatch(perm.m(), lambda_by_label.len()));
        }
        if !perm.reduced().is_irreducible() {
            return Err(Error::Reducible);
        }
        Ok(Iet { perm, lambda: lambda_by_label })
    }

    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn labeled(&self) -> &LabeledPermutation {
        &self.perm
    }

    pub fn permutation(&self) -> Permutation {
        self.perm.reduced()
    }

    pub fn lambda_by_label(&self) -> &[L] {
        &self.lambda
    }

    pub fn lambda_domain_order(&self) -> Vec<L> {
        self.perm.top.iter().map(|&l| self.lambda[l as usize].clone()).collect()
    }

    fn total(&self) -> L {
        self.lambda.iter().fold(L::zero(), |acc, x| acc.add(x))
    }

    /// Left endpoints of the domain intervals and of their images, by label.
    fn endpoints(&self) -> (Vec<L>, Vec<L>) {
        let m = self.m();
        let mut dom = vec![L::zero(); m];
        let mut img = vec![L::zero(); m];
        let mut acc = L::zero();
        for &l in &self.perm.top {
            dom[l as usize] = acc.clone();
            acc = acc.add(&self.lambda[l as usize]);
        }
        acc = L::zero();
        for &l in &self.perm.bottom {
            img[l as usize] = acc.clone();
            acc = acc.add(&self.lambda[l as usize]);
        }
        (dom, img)
    }

    /// Label of the interval containing `x`.
    pub fn locate(&self, x: &L) -> Letter {
        let mut acc = L::zero();
        for &l in &self.perm.top {
            acc = acc.add(&self.lambda[l as usize]);
            if *x < acc {
                return l;
            }
        }
        *self.perm.top.last().unwrap()
    }

    /// Image of a point.
    pub fn apply(&self, x: &L) -> L {
        let (dom, img) = self.endpoints();
        let l = self.locate(x) as usize;
        x.sub(&dom[l]).add(&img[l])
    }

    /// One induction step, renormalized to unit length.
    pub fn rauzy_step(&self) -> Result<(Iet<L>, RauzyStep)> {
        self.rauzy_step_at(0).map(|(t, s, _)| (t, s))
    }

    /// Step with its index (for error reporting) and the `log |Λ|` increment.
    fn rauzy_step_at(&self, index: usize) -> Result<(Iet<L>, RauzyStep, f64)> {
        let t = *self.perm.top.last().unwrap() as usize;
        let b = *self.perm.bottom.last().unwrap() as usize;
        let scale = self.lambda.iter().fold(L::zero(), |acc, x| if *x > acc { x.clone() } else { acc });
        if L::is_tie(&self.lambda[t], &self.lambda[b], &scale) {
            return Err(Error::Tie { step: index });
        }
        let kind = if self.lambda[t] > self.lambda[b] { StepKind::A } else { StepKind::B };
        let (winner, loser) = self.perm.winner_loser(kind);
        let mut lambda = self.lambda.clone();
        lambda[winner as usize] = lambda[winner as usize].sub(&lambda[loser as usize]);
        let total_old = self.total();
        let cut = lambda[loser as usize].div(&total_old);
        let total = lambda.iter().fold(L::zero(), |acc, x| acc.add(x));
        let lambda = lambda.iter().map(|x| x.div(&total)).collect();
        let step = RauzyStep { kind, winner, loser };
        Ok((Iet { perm: self.perm.apply(kind), lambda }, step, cut.neg_ln_one_minus()))
    }
}

impl Iet<f64> {
    /// Exact rational copy (every double is a dyadic rational).
    pub fn to_exact(&self) -> Iet<BigRational> {
        Iet {
            perm: self.perm.clone(),
            lambda: self.lambda.iter().map(|&x| BigRational::from_float(x).expect("finite")).collect(),
        }
    }
}

/// A finite induction path with the normalized length history.
#[derive(Clone, Debug)]
pub struct RauzyPath<L: Length = f64> {
    pub start: Iet<L>,
    pub steps: Vec<RauzyStep>,
    /// Normalized lengths by label after each step; entry 0 is the start.
    pub lambdas: Vec<Vec<L>>,
    /// Accumulated `log |Λ|` after each step; entry 0 is zero.
    pub lambda_log: Vec<f64>,
    pub end: Iet<L>,
}

impl<L: Length> RauzyPath<L> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn kinds(&self) -> Vec<StepKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn kinds_string(&self) -> String {
        kinds_to_string(&self.kinds())
    }

    /// `A_n ⋯ A_1` in cocycle orientation.
    pub fn matrix_product(&self) -> IntMatrix {
        let m = self.start.m();
        self.steps.iter().fold(IntMatrix::identity(m), |acc, s| s.matrix(m).mul(&acc))
    }

    /// Step substitutions `ζ_1, …, ζ_n`.
    pub fn step_substitutions(&self) -> Vec<Substitution> {
        let m = self.start.m();
        self.steps.iter().map(|s| s.substitution(m)).collect()
    }

    /// `ζ_1 ∘ ⋯ ∘ ζ_n`.
    pub fn substitution(&self) -> Result<Substitution> {
        compose_steps(self.start.m(), &self.steps)
    }
}

/// `ζ_1 ∘ ⋯ ∘ ζ_n` for a list of steps.
pub fn compose_steps(m: usize, steps: &[RauzyStep]) -> Result<Substitution> {
    let mut images: Vec<Vec<Letter>> = (0..m).map(|a| vec![a as Letter]).collect();
    let mut len: u128 = m as u128;
    for s in steps {
        let (w, l) = (s.winner as usize, s.loser as usize);
        let mut joined = match s.kind {
            StepKind::A => images[l].clone(),
            StepKind::B => images[w].clone(),
        };
        joined.extend_from_slice(match s.kind {
            StepKind::A => &images[w],
            StepKind::B => &images[l],
        });
        len += images[w].len() as u128;
        if len > crate::substitution::MATERIALIZE_LIMIT {
            return Err(Error::Budget(len));
        }
        images[l] = joined;
    }
    Substitution::new(images.into_iter().map(Word::new).collect())
}

/// Runs `n` steps; stops at the first tie and reports it alongside the partial path.
pub fn rauzy_path_partial<L: Length>(t: &Iet<L>, n: usize) -> (RauzyPath<L>, Option<Error>) {
    let mut cur = t.clone();
    let mut steps = Vec::with_capacity(n);
    let mut lambdas = vec![cur.lambda.clone()];
    let mut lambda_log = vec![0.0];
    let mut err = None;
    for k in 0..n {
        match cur.rauzy_step_at(k) {
            Ok((next, step, inc)) => {
                steps.push(step);
                lambdas.push(next.lambda.clone());
                lambda_log.push(lambda_log.last().unwrap() + inc);
                cur = next;
            }
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    (RauzyPath { start: t.clone(), steps, lambdas, lambda_log, end: cur }, err)
}

/// Runs exactly `n` steps.
pub fn rauzy_path<L: Length>(t: &Iet<L>, n: usize) -> Result<RauzyPath<L>> {
    match rauzy_path_partial(t, n) {
        (path, None) => Ok(path),
        (_, Some(e)) => Err(e),
    }
}

/// Allocation-free streaming induction in double precision.
#[derive(Clone, Debug)]
pub struct RauzyWalk {
    perm: LabeledPermutation,
    lambda: Vec<f64>,
    steps_done: usize,
    log_lambda: f64,
}

impl RauzyWalk {
    pub fn new(t: &Iet<f64>) -> Self {
        RauzyWalk { perm: t.perm.clone(), lambda: t.lambda.clone(), steps_done: 0, log_lambda: 0.0 }
    }

    pub fn state(&self) -> &LabeledPermutation {
        &self.perm
    }

    pub fn log_lambda(&self) -> f64 {
        self.log_lambda
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn next_step(&mut self) -> Result<RauzyStep> {
        let t = *self.perm.top.last().unwrap() as usize;
        let b = *self.perm.bottom.last().unwrap() as usize;
        let scale = self.lambda.iter().copied().fold(0.0, f64::max);
        if (self.lambda[t] - self.lambda[b]).abs() < TIE_THRESHOLD * scale {
            return Err(Error::Tie { step: self.steps_done });
        }
        let kind = if self.lambda[t] > self.lambda[b] { StepKind::A } else { StepKind::B };
        let (winner, loser) = if kind == StepKind::A { (t, b) } else { (b, t) };
        let total: f64 = self.lambda.iter().sum();
        self.log_lambda += -(-self.lambda[loser] / total).ln_1p();
        self.lambda[winner] -= self.lambda[loser];
        let total: f64 = self.lambda.iter().sum();
        for x in self.lambda.iter_mut() {
            *x /= total;
        }
        apply_in_place(&mut self.perm, kind);
        self.steps_done += 1;
        Ok(RauzyStep { kind, winner: winner as Letter, loser: loser as Letter })
    }
}

fn apply_in_place(perm: &mut LabeledPermutation, kind: StepKind) {
    let t = *perm.top.last().unwrap();
    let b = *perm.bottom.last().unwrap();
    match kind {
        StepKind::A => {
            perm.bottom.pop();
            let at = perm.bottom.iter().position(|&x| x == t).unwrap();
            perm.bottom.insert(at + 1, b);
        }
        StepKind::B => {
            perm.top.pop();
            let at = perm.top.iter().position(|&x| x == b).unwrap();
            perm.top.insert(at + 1, t);
        }
    }
}

/// Uniform random lengths on the simplex for the given permutation.
pub fn sample_iet(pi: &Permutation, seed: u64) -> Result<Iet<f64>> {
    sample_iet_stream(pi, seed, 0)
}

pub fn sample_iet_stream(pi: &Permutation, seed: u64, stream: u64) -> Result<Iet<f64>> {
    if !pi.is_irreducible() {
        return Err(Error::Reducible);
    }
    let mut rng = crate::rng::stream(seed, stream);
    let raw: Vec<f64> = (0..pi.len()).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    Iet::new(pi, raw.iter().map(|x| x / total).collect())
}

/// Towers over the final induction interval of `path`, found by following
/// orbits of the starting map. Returns `ζ_IJ`.
pub fn block_substitution<L: Length>(path: &RauzyPath<L>) -> Result<Substitution> {
    if path.is_empty() {
        return Err(Error::Invalid("empty induction path".into()));
    }
    let t = &path.start;
    let m = t.m();
    // Unnormalized lengths of the final intervals, in the starting scale.
    let mut lam = t.lambda.clone();
    for s in &path.steps {
        lam[s.winner as usize] = lam[s.winner as usize].sub(&lam[s.loser as usize]);
    }
    let end_perm = path.end.labeled();
    let j_total = lam.iter().fold(L::zero(), |acc, x| acc.add(x));
    let (dom, img) = t.endpoints();
    let slack = L::slack();
    let mut left = L::zero();
    let mut images = vec![Word::empty(); m];
    let max_iter = 50_000_000usize;
    for &i in &end_perm.top {
        let width = lam[i as usize].clone();
        let mut x = left.clone();
        let mut word = Vec::new();
        let mut floor = 0usize;
        loop {
            let mid = x.add(&width.half());
            let j = t.locate(&mid) as usize;
            let lo = dom[j].sub(&slack);
            let hi = dom[j].add(&t.lambda[j]).add(&slack);
            if x < lo || x.add(&width) > hi {
                return Err(Error::Straddle { tower: i as usize, floor });
            }
            word.push(j as Letter);
            x = x.sub(&dom[j]).add(&img[j]);
            floor += 1;
            if x.add(&width.half()) < j_total {
                if x.add(&width) > j_total.add(&slack) {
                    return Err(Error::Straddle { tower: i as usize, floor });
                }
                break;
            }
            if floor > max_iter {
                return Err(Error::SearchBudget("tower height".into()));
            }
        }
        images[i as usize] = Word::new(word);
        left = left.add(&width);
    }
    Substitution::new(images)
}

/// The Rauzy class as a graph on labeled permutations.
#[derive(Clone, Debug)]
pub struct RauzyClass {
    pub vertices: Vec<LabeledPermutation>,
    /// `edges[v] = [target under a, target under b]`.
    pub edges: Vec<[usize; 2]>,
}

impl RauzyClass {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> &LabeledPermutation {
        &self.vertices[0]
    }

    pub fn index_of(&self, v: &LabeledPermutation) -> Option<usize> {
        self.vertices.iter().position(|x| x == v)
    }

    pub fn contains(&self, pi: &Permutation) -> bool {
        self.vertices.iter().any(|v| &v.reduced() == pi)
    }

    /// Distinct permutations once labels are forgotten.
    pub fn reduced_permutations(&self) -> Vec<Permutation> {
        let mut out: Vec<Permutation> = self.vertices.iter().map(|v| v.reduced()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn step(&self, v: usize, kind: StepKind) -> usize {
        self.edges[v][kind as usize]
    }

    fn reachable(&self, from: usize, reverse: bool) -> Vec<bool> {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (v, e) in self.edges.iter().enumerate() {
            for &w in e {
                if reverse {
                    adj[w].push(v);
                } else {
                    adj[v].push(w);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.reachable(0, false).iter().all(|&x| x) && self.reachable(0, true).iter().all(|&x| x)
    }

    /// Length of the cycle of `kind`-moves through `v`, if it returns to `v`.
    pub fn cycle_length(&self, v: usize, kind: StepKind) -> Option<usize> {
        let mut cur = self.step(v, kind);
        for k in 1..=self.len() {
            if cur == v {
                return Some(k);
            }
            cur = self.step(cur, kind);
        }
        None
    }
}

/// Breadth-first closure under both operations.
pub fn rauzy_class(pi: &Permutation) -> Result<RauzyClass> {
    if !pi.is_irreducible() {
        return Err(Error::Reducible);
    }
    let start = LabeledPermutation::from_permutation(pi);
    let mut index: HashMap<LabeledPermutation, usize> = HashMap::from([(start.clone(), 0)]);
    let mut vertices = vec![start];
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut k = 0;
    while k < vertices.len() {
        let mut e = [0; 2];
        for kind in [StepKind::A, StepKind::B] {
            let w = vertices[k].apply(kind);
            let id = *index.entry(w.clone()).or_insert_with(|| {
                vertices.push(w);
                vertices.len() - 1
            });
            e[kind as usize] = id;
        }
        edges.push(e);
        k += 1;
    }
    Ok(RauzyClass { vertices, edges })
}

/// Substitution, cocycle product and end vertex of a step word read from `start`.
pub fn word_data(start: &LabeledPermutation, word: &[StepKind]) -> Result<(Substitution, IntMatrix, LabeledPermutation)> {
    let m = start.m();
    let mut v = start.clone();
    let mut steps = Vec::with_capacity(word.len());
    for &kind in word {
        let (winner, loser) = v.winner_loser(kind);
        steps.push(RauzyStep { kind, winner, loser });
        v = v.apply(kind);
    }
    let prod = steps.iter().fold(IntMatrix::identity(m), |acc, s| s.matrix(m).mul(&acc));
    Ok((compose_steps(m, &steps)?, prod, v))
}

/// A loop satisfying the hypotheses used to build canonical sequences.
#[derive(Clone, Debug)]
pub struct PositiveLoop {
    pub vertex: LabeledPermutation,
    pub word: Vec<StepKind>,
    pub substitution: Substitution,
    /// Good return words with independent population vectors.
    pub returns: Vec<Word>,
    /// The letter every image starts with.
    pub first_letter: Letter,
}

/// Searches loops at the class start vertex by length, `a` before `b`, for one
/// with a strictly positive matrix, then builds a simple loop
/// `q = V V V y^K` in which `V` has a power of that loop as prefix, every
/// image of `ζ(V)` starts with the same letter, `V` starts and ends with the
/// same symbol `x`, and `y^K` is a cycle of the other symbol longer than any
/// `y`-run inside `V V V`. The good return words are the images of `ζ(V)`.
pub fn find_positive_simple_loop(class: &RauzyClass, max_len: usize) -> Result<PositiveLoop> {
    let v0 = class.start().clone();
    let m = v0.m();
    let base = positive_loop_search(class, max_len)?;

    // Power of the loop after which all images start with one letter.
    let (sub, _, _) = word_data(&v0, &base)?;
    let first: Vec<Letter> = sub.images().iter().map(|w| w[0]).collect();
    let mut f = first.clone();
    let mut power = 1;
    while !f.iter().all(|&x| x == f[0]) {
        f = f.iter().map(|&x| first[x as usize]).collect();
        power += 1;
        if power > 64 {
            return Err(Error::SearchBudget("first letters never synchronize".into()));
        }
    }
    let mut v1: Vec<StepKind> = base.iter().copied().cycle().take(base.len() * power).collect();
    let x = v1[0];
    if *v1.last().unwrap() != x {
        let cx = class.cycle_length(0, x).ok_or_else(|| Error::SearchBudget("missing cycle".into()))?;
        v1.extend(std::iter::repeat_n(x, cx));
    }
    let y = x.other();
    let tripled: Vec<StepKind> = v1.iter().chain(&v1).chain(&v1).copied().collect();
    let longest = tripled.split(|&k| k != y).map(|r| r.len()).max().unwrap_or(0);
    let cy = class.cycle_length(0, y).ok_or_else(|| Error::SearchBudget("missing cycle".into()))?;
    let reps = (longest + 1).div_ceil(cy);
    let mut q = tripled;
    q.extend(std::iter::repeat_n(y, reps * cy));

    let (substitution, prod, end) = word_data(&v0, &q)?;
    let (eta, _, _) = word_data(&v0, &v1)?;
    if end != v0 || !is_simple(&q) || !prod.is_positive() {
        return Err(Error::SearchBudget("loop construction failed its checks".into()));
    }
    let c = substitution.image(0)[0];
    if substitution.images().iter().any(|w| w[0] != c) {
        return Err(Error::SearchBudget("images do not share a first letter".into()));
    }
    let returns: Vec<Word> = eta.images().to_vec();
    for u in &returns {
        let mut pattern = u.to_vec();
        pattern.push(u[0]);
        if u[0] != c || !substitution.images().iter().all(|w| w.contains_factor(&pattern)) {
            return Err(Error::SearchBudget("return word check failed".into()));
        }
    }
    if crate::substitution::population_determinant(&returns, m).is_zero() {
        return Err(Error::SearchBudget("return words are dependent".into()));
    }
    Ok(PositiveLoop { vertex: v0, word: q, substitution, returns, first_letter: c })
}

/// Shortest loop at the start vertex with a strictly positive matrix; among
/// loops of equal length the first in `a < b` order.
pub fn positive_loop_search(class: &RauzyClass, max_len: usize) -> Result<Vec<StepKind>> {
    let v0 = class.start();
    let m = v0.m();
    for len in 1..=max_len.min(40) {
        for code in 0u64..(1u64 << len) {
            let word: Vec<StepKind> = (0..len)
                .map(|i| if code >> (len - 1 - i) & 1 == 0 { StepKind::A } else { StepKind::B })
                .collect();
            let mut v = 0usize;
            for &k in &word {
                v = class.step(v, k);
            }
            if v != 0 {
                continue;
            }
            // Boolean positivity of the product.
            let mut reach = vec![vec![false; m]; m];
            for (i, row) in reach.iter_mut().enumerate() {
                row[i] = true;
            }
            let mut cur = v0.clone();
            for &kind in &word {
                let (w, l) = cur.winner_loser(kind);
                // rows of (I + E(l, w)) * acc: row l gains row w
                let add = reach[w as usize].clone();
                for (a, b) in reach[l as usize].iter_mut().zip(add) {
                    *a |= b;
                }
                cur = cur.apply(kind);
            }
            if reach.iter().all(|r| r.iter().all(|&x| x)) {
                return Ok(word);
            }
        }
    }
    Err(Error::SearchBudget(format!("no positive loop up to length {max_len}")))
}

#[derive(Serialize, Deserialize)]
struct IetJson {
    pi: Vec<usize>,
    lambda: Vec<f64>,
}

impl Serialize for Iet<f64> {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        IetJson { pi: self.permutation().0, lambda: self.lambda_domain_order() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Iet<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = IetJson::deserialize(de)?;
        let pi = Permutation::new(raw.pi).map_err(serde::de::Error::custom)?;
        Iet::new(&pi, raw.lambda).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Permutation::new(Vec::<usize>::deserialize(de)?).map_err(serde::de::Error::custom)
    }
}

/// Path serialized as its start and the step symbols.
#[derive(Serialize, Deserialize)]
pub struct RauzyPathJson {
    pub start: Iet<f64>,
    pub steps: String,
}

impl From<&RauzyPath<f64>> for RauzyPathJson {
    fn from(p: &RauzyPath<f64>) -> Self {
        RauzyPathJson { start: p.start.clone(), steps: p.kinds_string() }
    }
}
