//! S-adic sequences and their Bratteli–Vershik structure.
//!
//! Steps are indexed from 1 as `ζ_1, …, ζ_N`. `ζ^{[n1,n2]} = ζ_{n1} ∘ ⋯ ∘ ζ_{n2}`
//! and `ζ^{[n]} = ζ^{[1,n]}`, with matrix `S^{[n1,n2]} = S_{n1} ⋯ S_{n2}`.
//! The cocycle matrix of step `k` is `A_k = S_kᵗ`.

mod cylinder;
mod sample;

pub use cylinder::{exp_poly_integral, CylFunction, PiecewisePoly, Profile};
pub use sample::{canonical_matrices, sample_canonical, sample_middles, word_matrix, CanonicalSample, SAMPLE_STEP_BUDGET};

use std::io::Write;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iet::{PositiveLoop, RauzyClass, StepKind};
use crate::matrix::{big_ratio as ratio, IntMatrix};
use crate::substitution::{compose, population_vector, Letter, Substitution, Word, MATERIALIZE_LIMIT};

/// Stopping threshold for the invariant-measure cone diameter.
pub const MEASURE_GAP_TARGET: f64 = 1e-13;

/// Canonical-form data: every step equals `ζ ∘ ξ_n ∘ ζ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMarker {
    pub q_block: Substitution,
    pub xis: Vec<Substitution>,
    /// Group boundaries in the sequence this one was telescoped from.
    #[serde(default)]
    pub boundaries: Vec<usize>,
}

/// A finite S-adic expansion with lazily cached prefix products.
///
/// Each step is stored as a list of factors `f_0 ∘ f_1 ∘ ⋯` and is only
/// materialized on demand, so telescoped steps with huge images stay cheap.
#[derive(Clone, Debug)]
pub struct SubstitutionSequence {
    factors: Vec<Vec<Substitution>>,
    materialized: Vec<OnceLock<Result<Substitution>>>,
    matrices: Vec<IntMatrix>,
    prefix: OnceLock<Vec<IntMatrix>>,
    canonical: Option<CanonicalMarker>,
}

impl PartialEq for SubstitutionSequence {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.canonical == other.canonical
    }
}

impl SubstitutionSequence {
    pub fn new(steps: Vec<Substitution>) -> Result<Self> {
        Self::from_factors(steps.into_iter().map(|z| vec![z]).collect())
    }

    /// Steps given as factor lists; step `k` is `factors[k-1][0] ∘ factors[k-1][1] ∘ ⋯`.
    pub fn from_factors(factors: Vec<Vec<Substitution>>) -> Result<Self> {
        let m = factors
            .first()
            .and_then(|f| f.first())
            .ok_or_else(|| Error::Invalid("empty sequence".into()))?
            .arity();
        if factors.iter().any(Vec::is_empty) {
            return Err(Error::Invalid("step without factors".into()));
        }
        if let Some(bad) = factors.iter().flatten().find(|z| z.arity() != m) {
            return Err(Error::ArityMismatch(m, bad.arity()));
        }
        let matrices: Vec<IntMatrix> = factors
            .iter()
            .map(|f| f.iter().skip(1).fold(f[0].matrix(), |acc, z| acc.mul(&z.matrix())))
            .collect();
        let materialized = (0..factors.len()).map(|_| OnceLock::new()).collect();
        Ok(SubstitutionSequence { factors, materialized, matrices, prefix: OnceLock::new(), canonical: None })
    }

    /// Constant sequence `ζ, ζ, …` of length `n`.
    pub fn constant(z: &Substitution, n: usize) -> Result<Self> {
        Self::new(vec![z.clone(); n])
    }

    /// Steps `ζ ∘ ξ_n ∘ ζ`, marked canonical.
    pub fn canonical(q_block: &Substitution, xis: Vec<Substitution>) -> Result<Self> {
        let factors = xis.iter().map(|xi| vec![q_block.clone(), xi.clone(), q_block.clone()]).collect();
        let mut out = Self::from_factors(factors)?;
        out.canonical = Some(CanonicalMarker { q_block: q_block.clone(), xis, boundaries: Vec::new() });
        Ok(out)
    }

    /// Canonical sequence from a loop `q` and middle words `p_n`, steps `q p_n q`.
    pub fn from_loop(lp: &PositiveLoop, middles: &[Vec<StepKind>]) -> Result<Self> {
        let xis = middles
            .iter()
            .map(|p| crate::iet::word_data(&lp.vertex, p).map(|(z, _, _)| z))
            .collect::<Result<Vec<_>>>()?;
        Self::canonical(&lp.substitution, xis)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.factors[0][0].arity()
    }

    /// Factors of step `k`, one-based.
    pub fn factors(&self, k: usize) -> &[Substitution] {
        &self.factors[k - 1]
    }

    /// `ζ_k` materialized (cached), one-based.
    pub fn step(&self, k: usize) -> Result<&Substitution> {
        self.materialized[k - 1]
            .get_or_init(|| {
                let f = &self.factors[k - 1];
                let mut out = f.last().unwrap().clone();
                for z in f.iter().rev().skip(1) {
                    out = compose(z, &out)?;
                }
                Ok(out)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `ζ_k(b)`.
    pub fn image(&self, k: usize, b: Letter) -> Result<&Word> {
        Ok(self.step(k)?.image(b))
    }

    /// `|ζ_k(b)|` without materializing.
    pub fn image_len(&self, k: usize, b: Letter) -> BigInt {
        (0..self.arity()).map(|i| self.matrices[k - 1].get(i, b as usize).clone()).sum()
    }

    /// `S_k`, one-based.
    pub fn matrix(&self, k: usize) -> &IntMatrix {
        &self.matrices[k - 1]
    }

    /// `A_k = S_kᵗ`.
    pub fn cocycle_matrix(&self, k: usize) -> IntMatrix {
        self.matrices[k - 1].transpose()
    }

    fn prefixes(&self) -> &[IntMatrix] {
        self.prefix.get_or_init(|| {
            let mut out = vec![IntMatrix::identity(self.arity())];
            for a in &self.matrices {
                let next = out.last().unwrap().mul(a);
                out.push(next);
            }
            out
        })
    }

    /// `S^{[n]}`, with `S^{[0]} = I`.
    pub fn prefix_product(&self, n: usize) -> &IntMatrix {
        &self.prefixes()[n]
    }

    /// `S^{[n1,n2]}`; identity when `n1 > n2`.
    pub fn product(&self, n1: usize, n2: usize) -> IntMatrix {
        if n1 == 1 {
            return self.prefixes()[n2].clone();
        }
        (n1..=n2).fold(IntMatrix::identity(self.arity()), |acc, k| acc.mul(&self.matrices[k - 1]))
    }

    /// `ζ^{[n1,n2]}` materialized under the global letter budget.
    pub fn composed(&self, n1: usize, n2: usize) -> Result<Substitution> {
        let mut out = Substitution::identity(self.arity());
        for k in (n1..=n2).rev() {
            for z in self.factors[k - 1].iter().rev() {
                out = compose(z, &out)?;
            }
        }
        Ok(out)
    }

    /// Image of a word under `ζ^{[n1,n2]}`.
    pub fn apply_range(&self, n1: usize, n2: usize, w: &[Letter]) -> Result<Word> {
        let mut cur = Word::new(w.to_vec());
        for k in (n1..=n2).rev() {
            for z in self.factors[k - 1].iter().rev() {
                cur = z.apply(&cur)?;
            }
        }
        Ok(cur)
    }

    /// First `limit` letters of `ζ^{[n1,n2]}(w)`.
    pub fn apply_range_prefix(&self, n1: usize, n2: usize, w: &[Letter], limit: usize) -> Word {
        let mut cur = Word::new(w.iter().copied().take(limit).collect());
        for k in (n1..=n2).rev() {
            for z in self.factors[k - 1].iter().rev() {
                cur = z.apply_prefix(&cur, limit);
            }
        }
        cur
    }

    /// `|ζ^{[n1,n2]}(b)|` for every letter `b`.
    pub fn range_heights(&self, n1: usize, n2: usize) -> Vec<BigInt> {
        self.product(n1, n2).column_sums()
    }

    /// The tail `ζ_{ℓ+1}, …, ζ_N` as a sequence of its own.
    pub fn shifted(&self, ell: usize) -> Result<Self> {
        let mut out = Self::from_factors(self.factors[ell..].to_vec())?;
        if let Some(c) = &self.canonical {
            out.canonical = Some(CanonicalMarker {
                q_block: c.q_block.clone(),
                xis: c.xis[ell..].to_vec(),
                boundaries: Vec::new(),
            });
        }
        Ok(out)
    }

    /// The first `n` steps.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let mut out = Self::from_factors(self.factors[..n].to_vec())?;
        if let Some(c) = &self.canonical {
            out.canonical = Some(CanonicalMarker {
                q_block: c.q_block.clone(),
                xis: c.xis[..n].to_vec(),
                boundaries: c.boundaries.iter().copied().take(n).collect(),
            });
        }
        Ok(out)
    }

    /// Each step split into its factors, one step per factor.
    pub fn unpacked(&self) -> Result<Self> {
        Self::new(self.factors.iter().flatten().cloned().collect())
    }

    pub fn canonical_marker(&self) -> Option<&CanonicalMarker> {
        self.canonical.as_ref()
    }

    /// Re-verifies that each step factors as `ζ ∘ ξ_n ∘ ζ`.
    pub fn check_canonical(&self) -> Result<()> {
        let c = self.canonical.as_ref().ok_or(Error::NotCanonical)?;
        if c.xis.len() != self.len() {
            return Err(Error::NotCanonical);
        }
        for (k, xi) in c.xis.iter().enumerate() {
            let f = &self.factors[k];
            if f.len() == 3 && f[0] == c.q_block && &f[1] == xi && f[2] == c.q_block {
                continue;
            }
            let expect = compose(&c.q_block, &compose(xi, &c.q_block)?)?;
            if self.step(k + 1).map_err(|_| Error::NotCanonical)? != &expect {
                return Err(Error::NotCanonical);
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StepJson {
    Single(Substitution),
    Factors(Vec<Substitution>),
}

#[derive(Serialize, Deserialize)]
struct SequenceJson {
    steps: Vec<StepJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canonical: Option<CanonicalMarker>,
}

impl Serialize for SubstitutionSequence {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let steps = self
            .factors
            .iter()
            .map(|f| if f.len() == 1 { StepJson::Single(f[0].clone()) } else { StepJson::Factors(f.clone()) })
            .collect();
        SequenceJson { steps, canonical: self.canonical.clone() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SubstitutionSequence {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SequenceJson::deserialize(de)?;
        let factors = raw
            .steps
            .into_iter()
            .map(|s| match s {
                StepJson::Single(z) => vec![z],
                StepJson::Factors(f) => f,
            })
            .collect();
        let mut out = SubstitutionSequence::from_factors(factors).map_err(serde::de::Error::custom)?;
        out.canonical = raw.canonical;
        if out.canonical.is_some() {
            out.check_canonical().map_err(serde::de::Error::custom)?;
        }
        Ok(out)
    }
}

/// `h^{(n)}_i = |ζ^{[n]}(i)|`, by the recursion `h^{(k)} = A_k h^{(k-1)}`.
pub fn heights(seq: &SubstitutionSequence, n: usize) -> Vec<BigInt> {
    let m = seq.arity();
    let mut h = vec![BigInt::one(); m];
    for k in 1..=n {
        h = seq.cocycle_matrix(k).mul_vec(&h);
    }
    h
}

/// `s^{(ℓ)} = (S^{[ℓ]})ᵗ s`.
pub fn level_roof(seq: &SubstitutionSequence, s: &[f64], ell: usize) -> Vec<f64> {
    let mut out = s.to_vec();
    for k in 1..=ell {
        out = seq.cocycle_matrix(k).mul_vec_f64(&out);
    }
    out
}

/// Invariant-measure vectors per level.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureData {
    /// `z[ℓ]` for `ℓ = 0..=depth`, linked by `z^{(ℓ)} = S_{ℓ+1} z^{(ℓ+1)}`.
    pub z: Vec<Vec<f64>>,
    /// ℓ¹-diameter of the normalized columns of `S^{[depth]}`.
    pub convergence_gap: f64,
    /// The same diameter for the cone seen from each level.
    pub level_gaps: Vec<f64>,
    pub depth: usize,
}

impl MeasureData {
    /// Mass of the cylinder of paths through vertex `b` at level `ell`.
    pub fn cylinder_mass(&self, ell: usize, b: Letter) -> f64 {
        self.z[ell][b as usize]
    }
}

/// ℓ¹-diameter of the normalized columns of a nonnegative matrix.
pub fn column_cone_diameter(a: &IntMatrix) -> f64 {
    let m = a.dim();
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let col = a.column(j);
            let total: BigInt = col.iter().sum();
            col.iter().map(|x| ratio(x, &total)).collect()
        })
        .collect();
    let mut d: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            d = d.max(cols[i].iter().zip(&cols[j]).map(|(a, b)| (a - b).abs()).sum());
        }
    }
    d
}

/// Invariant measure from the nested cones `S^{[n]} ℝ^m_+`.
pub fn invariant_measure(seq: &SubstitutionSequence, depth: usize) -> Result<MeasureData> {
    let depth = depth.min(seq.len());
    let mut used = None;
    let mut positive_seen = false;
    for n in 1..=depth {
        let p = seq.prefix_product(n);
        positive_seen |= p.is_positive();
        if positive_seen && column_cone_diameter(p) < MEASURE_GAP_TARGET {
            used = Some(n);
            break;
        }
    }
    if !positive_seen {
        return Err(Error::NoPositiveBlock(depth));
    }
    let n = used.unwrap_or(depth);
    let m = seq.arity();
    // Back-propagate from the all-ones vector at level n, normalizing each level
    // and remembering the accumulated log scale.
    let mut z = vec![vec![1.0; m]; n + 1];
    let mut log_scale = vec![0.0; n + 1];
    for l in (0..n).rev() {
        let next = seq.matrix(l + 1).mul_vec_f64(&z[l + 1]);
        let total: f64 = next.iter().sum();
        z[l] = next.iter().map(|x| x / total).collect();
        log_scale[l] = log_scale[l + 1] + total.ln();
    }
    for l in 1..=n {
        let f = (log_scale[l] - log_scale[0]).exp();
        for x in z[l].iter_mut() {
            *x *= f;
        }
    }
    let level_gaps = (0..=n).map(|l| if l == n { 2.0 } else { column_cone_diameter(&seq.product(l + 1, n)) }).collect();
    Ok(MeasureData { z, convergence_gap: column_cone_diameter(seq.prefix_product(n)), level_gaps, depth: n })
}

/// A finite path `e_1 … e_n` into the vertex `b_n`; `e_k` is a position in `ζ_k(b_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathPrefix {
    /// `edges[k-1] = e_k`.
    pub edges: Vec<usize>,
    /// `vertices[k] = b_k` for `k = 0..=n`.
    pub vertices: Vec<Letter>,
}

impl PathPrefix {
    /// The minimal path into `b` at level `n`.
    pub fn minimal(seq: &SubstitutionSequence, b: Letter, n: usize) -> Self {
        Self::from_edges(seq, b, vec![0; n]).expect("minimal path is valid")
    }

    /// Builds the vertex chain from the top vertex and the positions.
    pub fn from_edges(seq: &SubstitutionSequence, top: Letter, edges: Vec<usize>) -> Result<Self> {
        let n = edges.len();
        if n > seq.len() {
            return Err(Error::OutOfRange(format!("path of length {n} on {} steps", seq.len())));
        }
        let mut vertices = vec![0; n + 1];
        vertices[n] = top;
        for k in (1..=n).rev() {
            let img = seq.image(k, vertices[k])?;
            let e = edges[k - 1];
            if e >= img.len() {
                return Err(Error::OutOfRange(format!("edge {e} at level {k}")));
            }
            vertices[k - 1] = img[e];
        }
        Ok(PathPrefix { edges, vertices })
    }

    pub fn level(&self) -> usize {
        self.edges.len()
    }

    pub fn top(&self) -> Letter {
        self.vertices[self.edges.len()]
    }

    /// Position of this path among all paths into `b_n`, i.e. the origin index
    /// inside `ζ^{[n]}(b_n)`.
    pub fn rank(&self, seq: &SubstitutionSequence) -> Result<BigInt> {
        let m = seq.arity();
        let mut total = BigInt::from(0);
        for k in 1..=self.level() {
            let img = seq.image(k, self.vertices[k])?;
            let u = population_vector(&img[..self.edges[k - 1]], m);
            let h = heights(seq, k - 1);
            total += u.iter().zip(&h).map(|(c, x)| x * BigInt::from(*c)).sum::<BigInt>();
        }
        Ok(total)
    }
}

/// Adic successor: increments the lowest non-maximal position and resets the ones below.
pub fn vershik_successor(seq: &SubstitutionSequence, p: &PathPrefix) -> Result<PathPrefix> {
    let n = p.level();
    let mut k = 0;
    for j in 1..=n {
        if p.edges[j - 1] + 1 < seq.image(j, p.vertices[j])?.len() {
            k = j;
            break;
        }
    }
    if k == 0 {
        return Err(Error::AllMaximal);
    }
    let mut edges = p.edges.clone();
    edges[k - 1] += 1;
    for e in edges.iter_mut().take(k - 1) {
        *e = 0;
    }
    PathPrefix::from_edges(seq, p.top(), edges)
}

/// `ζ^{[n]}(b)`, or its first `window` letters.
pub fn horizontal_word(seq: &SubstitutionSequence, b: Letter, n: usize, window: Option<usize>) -> Result<Word> {
    match window {
        Some(w) => Ok(seq.apply_range_prefix(1, n, &[b], w)),
        None => seq.apply_range(1, n, &[b]),
    }
}

/// `ζ^{[n]}(b_n)` split around the origin of a path.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredWord {
    /// `u[k]`: proper prefix of `ζ_{k+1}(b_{k+1})` before position `e_{k+1}`.
    pub u: Vec<Word>,
    /// `v[k]`: proper suffix after that position.
    pub v: Vec<Word>,
    /// `ζ^{[n-1]}(u_{n-1}) ⋯ ζ^{[1]}(u_1) u_0 . b_0 v_0 ζ^{[1]}(v_1) ⋯ ζ^{[n-1]}(v_{n-1})`.
    pub word: Word,
    /// Index of `b_0` in `word`.
    pub origin: usize,
}

/// Two-sided expansion around the origin of `p`.
pub fn anchored_word(seq: &SubstitutionSequence, p: &PathPrefix) -> Result<AnchoredWord> {
    let n = p.level();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 1..=n {
        let img = seq.image(k, p.vertices[k])?;
        let e = p.edges[k - 1];
        u.push(Word::new(img[..e].to_vec()));
        v.push(Word::new(img[e + 1..].to_vec()));
    }
    let mut left: Vec<Letter> = Vec::new();
    for k in (0..n).rev() {
        left.extend_from_slice(&seq.apply_range(1, k, &u[k])?);
    }
    let origin = left.len();
    let mut word = left;
    word.push(p.vertices[0]);
    for (k, vk) in v.iter().enumerate() {
        word.extend_from_slice(&seq.apply_range(1, k, vk)?);
        if word.len() as u128 > MATERIALIZE_LIMIT {
            return Err(Error::Budget(word.len() as u128));
        }
    }
    Ok(AnchoredWord { u, v, word: Word::new(word), origin })
}

/// Up to `limit` letters starting at the origin of `p`.
pub fn forward_word(seq: &SubstitutionSequence, p: &PathPrefix, limit: usize) -> Result<Word> {
    let mut out = vec![p.vertices[0]];
    for k in 1..=p.level() {
        if out.len() >= limit {
            break;
        }
        let img = seq.image(k, p.vertices[k])?;
        let vk = &img[p.edges[k - 1] + 1..];
        let need = limit - out.len();
        out.extend_from_slice(&seq.apply_range_prefix(1, k - 1, vk, need));
    }
    out.truncate(limit);
    Ok(Word::new(out))
}

/// Regroups consecutive steps; `ends` lists the last (one-based) step of each group.
pub fn telescope(seq: &SubstitutionSequence, ends: &[usize]) -> Result<SubstitutionSequence> {
    check_ends(seq, ends)?;
    let mut start = 1;
    let mut steps = Vec::with_capacity(ends.len());
    for &end in ends {
        steps.push((start..=end).flat_map(|k| seq.factors(k).iter().cloned()).collect());
        start = end + 1;
    }
    SubstitutionSequence::from_factors(steps)
}

fn check_ends(seq: &SubstitutionSequence, ends: &[usize]) -> Result<()> {
    if ends.is_empty() || *ends.last().unwrap() != seq.len() {
        return Err(Error::Grouping("groups must cover the whole sequence".into()));
    }
    if ends.windows(2).any(|w| w[0] >= w[1]) || ends[0] == 0 {
        return Err(Error::Grouping("group ends must increase".into()));
    }
    Ok(())
}

/// Regroups into canonical steps: each group must start and end with `q_len`
/// steps composing to `q_block`; the middle composes to `ξ_n`.
pub fn telescope_canonical(
    seq: &SubstitutionSequence,
    q_block: &Substitution,
    q_len: usize,
    ends: &[usize],
) -> Result<SubstitutionSequence> {
    check_ends(seq, ends)?;
    let mut start = 1;
    let mut xis = Vec::with_capacity(ends.len());
    for (g, &end) in ends.iter().enumerate() {
        if end + 1 - start < 2 * q_len {
            return Err(Error::Grouping(format!("group {} is shorter than two blocks", g + 1)));
        }
        if &seq.composed(start, start + q_len - 1)? != q_block || &seq.composed(end + 1 - q_len, end)? != q_block {
            return Err(Error::Grouping(format!("group {} does not start and end with the block", g + 1)));
        }
        xis.push(if start + q_len > end - q_len {
            Substitution::identity(seq.arity())
        } else {
            seq.composed(start + q_len, end - q_len)?
        });
        start = end + 1;
    }
    let mut out = SubstitutionSequence::canonical(q_block, xis)?;
    if let Some(c) = out.canonical.as_mut() {
        c.boundaries = ends.to_vec();
    }
    Ok(out)
}

/// Group ends for a Rauzy step word: cut points sit between two adjacent
/// copies of `q` read from the class start vertex, chosen greedily at least
/// `2|q|` apart. The groups between consecutive cut points have the form `q p q`.
/// Returns `(ends, first_cut)`: steps before `first_cut` are discarded and
/// steps after the last cut point are dropped.
pub fn canonical_cut_points(class: &RauzyClass, kinds: &[StepKind], q: &[StepKind]) -> (Vec<usize>, usize) {
    let k = q.len();
    let mut state = Vec::with_capacity(kinds.len() + 1);
    let mut v = 0usize;
    state.push(v);
    for &kind in kinds {
        v = class.step(v, kind);
        state.push(v);
    }
    let mut cuts: Vec<usize> = Vec::new();
    for pos in k..=kinds.len().saturating_sub(k) {
        if state[pos - k] != 0 || kinds[pos - k..pos] != *q || kinds[pos..pos + k] != *q {
            continue;
        }
        if cuts.last().is_none_or(|&c| pos >= c + 2 * k) {
            cuts.push(pos);
        }
    }
    let first = cuts.first().copied().unwrap_or(0);
    let ends = cuts.iter().skip(1).map(|&c| c - first).collect();
    (ends, first)
}

/// One tile of the suspension flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tile {
    pub letter: Letter,
    pub start: f64,
    pub duration: f64,
}

/// Tiles from the origin of `p` until time `t_max` is covered.
pub fn suspension_itinerary(seq: &SubstitutionSequence, p: &PathPrefix, s: &[f64], t_max: f64) -> Result<Vec<Tile>> {
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    let need = ((t_max / smin).ceil() as usize).saturating_add(2).min(MATERIALIZE_LIMIT as usize);
    let word = forward_word(seq, p, need)?;
    let m = s.len();
    let mut counts = vec![0u64; m];
    let mut tiles = Vec::new();
    for &a in word.iter() {
        let start: f64 = counts.iter().zip(s).map(|(&c, x)| c as f64 * x).sum();
        if start >= t_max {
            return Ok(tiles);
        }
        tiles.push(Tile { letter: a, start, duration: s[a as usize] });
        counts[a as usize] += 1;
    }
    let end: f64 = counts.iter().zip(s).map(|(&c, x)| c as f64 * x).sum();
    if end >= t_max {
        Ok(tiles)
    } else {
        Err(Error::Budget(word.len() as u128))
    }
}

/// CSV with columns `index,letter,start_time,duration`; letters one-based.
pub fn write_itinerary_csv<W: Write>(tiles: &[Tile], mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,letter,start_time,duration")?;
    for (i, t) in tiles.iter().enumerate() {
        writeln!(out, "{},{},{},{}", i, t.letter as usize + 1, t.start, t.duration)?;
    }
    Ok(())
}

/// Lowest level `n ≥ 1` at which every height reaches `len`.
pub fn level_covering(seq: &SubstitutionSequence, len: u128) -> Option<usize> {
    (1..=seq.len()).find(|&n| {
        seq.prefix_product(n).column_sums().iter().all(|h| h.to_u128().is_none_or(|x| x >= len))
    })
}
