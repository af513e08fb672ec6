use serde::Serialize;

use super::SubstitutionSequence;
use crate::error::{Error, Result};
use crate::iet::{sample_iet_stream, LabeledPermutation, PositiveLoop, RauzyClass, RauzyStep, RauzyWalk, StepKind};
use crate::matrix::IntMatrix;

/// A canonical sequence `q r_1 q, q r_2 q, …` whose middles `r_n` are
/// consecutive returns to the class start vertex along the induction path of
/// a random interval exchange.
#[derive(Clone, Debug, Serialize)]
pub struct CanonicalSample {
    pub lambda: Vec<f64>,
    pub middles: Vec<Vec<StepKind>>,
    #[serde(skip)]
    pub seq: SubstitutionSequence,
}

/// Induction steps spent looking for return loops before giving up.
pub const SAMPLE_STEP_BUDGET: usize = 10_000_000;

/// Samples `levels` canonical steps; every middle has at least `min_middle`
/// induction steps (consecutive returns are merged until it does).
pub fn sample_canonical(
    class: &RauzyClass,
    lp: &PositiveLoop,
    seed: u64,
    stream: u64,
    levels: usize,
    min_middle: usize,
) -> Result<CanonicalSample> {
    if class.start() != &lp.vertex {
        return Err(Error::Invalid("loop must sit at the class start vertex".into()));
    }
    let (lambda, middles) = sample_middles(class, seed, stream, levels, min_middle)?;
    let seq = SubstitutionSequence::from_loop(lp, &middles)?;
    Ok(CanonicalSample { lambda, middles, seq })
}

/// Consecutive returns to the class start vertex along the induction path of
/// a random interval exchange, as in [`sample_canonical`]; also returns the
/// sampled lengths.
pub fn sample_middles(
    class: &RauzyClass,
    seed: u64,
    stream: u64,
    levels: usize,
    min_middle: usize,
) -> Result<(Vec<f64>, Vec<Vec<StepKind>>)> {
    let t = sample_iet_stream(&class.start().reduced(), seed, stream)?;
    let lambda = t.lambda_by_label().to_vec();
    let mut walk = RauzyWalk::new(&t);
    let mut middles = Vec::with_capacity(levels);
    let mut current = Vec::new();
    let mut v = 0usize;
    while middles.len() < levels {
        if walk.steps_done() >= SAMPLE_STEP_BUDGET {
            return Err(Error::SearchBudget(format!("{} return loops after {SAMPLE_STEP_BUDGET} steps", middles.len())));
        }
        let step = walk.next_step()?;
        current.push(step.kind);
        v = class.step(v, step.kind);
        if v == 0 && current.len() >= min_middle {
            middles.push(std::mem::take(&mut current));
        }
    }
    Ok((lambda, middles))
}

/// Substitution matrix `S` of a step word read from `start`, without images.
pub fn word_matrix(start: &LabeledPermutation, word: &[StepKind]) -> IntMatrix {
    let m = start.m();
    let mut v = start.clone();
    let mut prod = IntMatrix::identity(m);
    for &kind in word {
        let (winner, loser) = v.winner_loser(kind);
        prod = prod.mul(&RauzyStep { kind, winner, loser }.matrix(m).transpose());
        v = v.apply(kind);
    }
    prod
}

/// Matrices `S(q) S(r_n) S(q)` of the canonical steps built from `middles`.
pub fn canonical_matrices(lp: &PositiveLoop, middles: &[Vec<StepKind>]) -> Vec<IntMatrix> {
    let q = lp.substitution.matrix();
    middles.iter().map(|r| q.mul(&word_matrix(&lp.vertex, r)).mul(&q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iet::{find_positive_simple_loop, rauzy_class, Permutation};

    #[test]
    fn direct_matrices_match_materialized() {
        let class = rauzy_class(&Permutation::reversal(4)).unwrap();
        let lp = find_positive_simple_loop(&class, 30).unwrap();
        let smp = sample_canonical(&class, &lp, 3, 0, 4, 1).unwrap();
        let direct = canonical_matrices(&lp, &smp.middles);
        for (k, a) in direct.iter().enumerate() {
            assert_eq!(a, smp.seq.matrix(k + 1));
        }
    }
}
