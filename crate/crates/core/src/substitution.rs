//! Words, substitutions, substitution matrices and good return words.
//!
//! Letters are stored zero-based (`0..m`); text and JSON forms are one-based,
//! so the letter `0` prints as `1`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{integer_rank, IntMatrix};

/// Zero-based letter index.
pub type Letter = u8;

/// Upper limit on the number of letters any single materialized word may have.
pub const MATERIALIZE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Parses one-based text: digits when `m <= 9`, otherwise comma-separated integers.
    pub fn parse(text: &str, m: usize) -> Result<Word> {
        let letters: Vec<usize> = if m <= 9 {
            text.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| bad_letter(&c.to_string())))
                .collect::<Result<_>>()?
        } else if text.is_empty() {
            Vec::new()
        } else {
            text.split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad_letter(t)))
                .collect::<Result<_>>()?
        };
        letters
            .into_iter()
            .map(|x| {
                if x >= 1 && x <= m {
                    Ok((x - 1) as Letter)
                } else {
                    Err(Error::Invalid(format!("letter {x} outside 1..={m}")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// One-based text form matching [`Word::parse`].
    pub fn format(&self, m: usize) -> String {
        if m <= 9 {
            self.0.iter().map(|&a| char::from(b'1' + a)).collect()
        } else {
            self.0.iter().map(|&a| (a as usize + 1).to_string()).collect::<Vec<_>>().join(",")
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.0
    }

    pub fn push(&mut self, a: Letter) {
        self.0.push(a);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Whether `pattern` occurs as a factor.
    pub fn contains_factor(&self, pattern: &[Letter]) -> bool {
        pattern.is_empty() || self.0.windows(pattern.len()).any(|w| w == pattern)
    }

    /// No proper suffix equals a prefix of the same length.
    pub fn is_simple(&self) -> bool {
        is_simple(&self.0)
    }
}

impl Deref for Word {
    type Target = [Letter];
    fn deref(&self) -> &[Letter] {
        &self.0
    }
}

impl From<Vec<Letter>> for Word {
    fn from(v: Vec<Letter>) -> Self {
        Word(v)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.0.iter().copied().max().map_or(2, |x| x as usize + 1);
        write!(f, "\"{}\"", self.format(m))
    }
}

fn bad_letter(t: &str) -> Error {
    Error::Invalid(format!("unparseable letter {t:?}"))
}

/// Generic self-overlap test: no proper suffix equals the prefix of the same length.
pub fn is_simple<T: PartialEq>(w: &[T]) -> bool {
    let k = w.len();
    (1..k).all(|i| w[i..] != w[..k - i])
}

/// Number of occurrences of each letter.
pub fn population_vector(v: &[Letter], m: usize) -> Vec<u64> {
    let mut out = vec![0u64; m];
    for &a in v {
        out[a as usize] += 1;
    }
    out
}

/// `|v|_s = <l(v), s>`.
pub fn tiling_length(v: &[Letter], s: &[f64]) -> f64 {
    population_vector(v, s.len()).iter().zip(s).map(|(&c, x)| c as f64 * x).sum()
}

/// A substitution on the alphabet `0..m`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Substitution {
    images: Vec<Word>,
}

impl Substitution {
    pub fn new(images: Vec<Word>) -> Result<Self> {
        let m = images.len();
        if m < 2 {
            return Err(Error::Invalid("alphabet needs at least two letters".into()));
        }
        for (b, w) in images.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::Invalid(format!("image of letter {} is empty", b + 1)));
            }
            if w.iter().any(|&a| a as usize >= m) {
                return Err(Error::Invalid(format!("image of letter {} leaves the alphabet", b + 1)));
            }
        }
        Ok(Substitution { images })
    }

    /// Builds from one-based text images, e.g. `["12", "1"]`.
    pub fn parse(images: &[&str]) -> Result<Self> {
        let m = images.len();
        Self::new(images.iter().map(|t| Word::parse(t, m)).collect::<Result<_>>()?)
    }

    pub fn identity(m: usize) -> Self {
        Substitution { images: (0..m).map(|a| Word(vec![a as Letter])).collect() }
    }

    pub fn arity(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, b: Letter) -> &Word {
        &self.images[b as usize]
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn max_image_len(&self) -> usize {
        self.images.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Image of a word, refusing outputs longer than `budget` letters.
    pub fn apply_with_budget(&self, w: &[Letter], budget: u128) -> Result<Word> {
        let len: u128 = w.iter().map(|&a| self.images[a as usize].len() as u128).sum();
        if len > budget {
            return Err(Error::Budget(len));
        }
        let mut out = Vec::with_capacity(len as usize);
        for &a in w {
            out.extend_from_slice(&self.images[a as usize]);
        }
        Ok(Word(out))
    }

    pub fn apply(&self, w: &[Letter]) -> Result<Word> {
        self.apply_with_budget(w, MATERIALIZE_LIMIT)
    }

    /// First `limit` letters of the image of `w`.
    pub fn apply_prefix(&self, w: &[Letter], limit: usize) -> Word {
        let mut out = Vec::with_capacity(limit.min(1 << 20));
        for &a in w {
            if out.len() >= limit {
                break;
            }
            out.extend_from_slice(&self.images[a as usize]);
        }
        out.truncate(limit);
        Word(out)
    }

    /// Matrix with entry `(a, b)` = occurrences of `a` in the image of `b`.
    pub fn matrix(&self) -> IntMatrix {
        let m = self.arity();
        let mut out = IntMatrix::zeros(m);
        for (b, w) in self.images.iter().enumerate() {
            for (a, c) in population_vector(w, m).into_iter().enumerate() {
                if c > 0 {
                    out.set(a, b, BigInt::from(c));
                }
            }
        }
        out
    }

    /// Good return words of length at most `max_len`, in lexicographic order.
    pub fn good_return_words(&self, max_len: usize) -> BTreeSet<Word> {
        let mut out = BTreeSet::new();
        let (first, rest) = self.images.split_first().expect("nonempty alphabet");
        for len in 1..=max_len {
            if len + 1 > first.len() {
                break;
            }
            for window in first.windows(len + 1) {
                if window[0] != window[len] {
                    continue;
                }
                if rest.iter().all(|w| w.contains_factor(window)) {
                    out.insert(Word(window[..len].to_vec()));
                }
            }
        }
        out
    }

    /// Lexicographically first family of `m` good return words with independent
    /// population vectors.
    pub fn select_return_basis(&self, max_len: usize) -> Result<Vec<Word>> {
        let m = self.arity();
        let mut chosen: Vec<Word> = Vec::new();
        let mut vectors: Vec<Vec<BigInt>> = Vec::new();
        for w in self.good_return_words(max_len) {
            let v: Vec<BigInt> = population_vector(&w, m).into_iter().map(BigInt::from).collect();
            vectors.push(v);
            if integer_rank(&vectors) == vectors.len() {
                chosen.push(w);
                if chosen.len() == m {
                    return Ok(chosen);
                }
            } else {
                vectors.pop();
            }
        }
        Err(Error::NoReturnBasis(max_len))
    }
}

/// `outer ∘ inner`: the letter `b` maps to `outer(inner(b))`.
pub fn compose(outer: &Substitution, inner: &Substitution) -> Result<Substitution> {
    if outer.arity() != inner.arity() {
        return Err(Error::ArityMismatch(outer.arity(), inner.arity()));
    }
    let images = inner
        .images
        .iter()
        .map(|w| outer.apply(w))
        .collect::<Result<Vec<_>>>()?;
    Ok(Substitution { images })
}

/// Exact determinant of the population vectors of `words` (as columns).
pub fn population_determinant(words: &[Word], m: usize) -> BigInt {
    if words.len() != m {
        return BigInt::zero();
    }
    let mut mat = IntMatrix::zeros(m);
    for (j, w) in words.iter().enumerate() {
        for (i, c) in population_vector(w, m).into_iter().enumerate() {
            mat.set(i, j, BigInt::from(c));
        }
    }
    mat.determinant()
}

/// `col(A) = max_{i,j,k} A_ij / A_kj` for a nonnegative real matrix given by rows.
pub fn col_ratio(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut best: f64 = 1.0;
    for j in 0..cols {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for row in rows.iter().take(n) {
            hi = hi.max(row[j]);
            lo = lo.min(row[j]);
        }
        if hi > 0.0 {
            best = best.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
        }
    }
    best
}

/// Returns `(col(Q^t), c1)` with `c1 = 1 / (2 m max Q · col(Q^t))`.
pub fn c1_constant(q: &IntMatrix) -> Result<(f64, f64)> {
    if !q.is_positive() {
        return Err(Error::NonPositive);
    }
    let col = col_ratio(&q.transpose().to_f64_rows());
    let max = crate::matrix::big_to_f64(&q.max_entry());
    let c1 = 1.0 / (2.0 * q.dim() as f64 * max * col);
    Ok((col, c1))
}

#[derive(Serialize, Deserialize)]
struct SubstitutionJson {
    m: usize,
    images: Vec<String>,
}

impl Serialize for Substitution {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.arity();
        SubstitutionJson { m, images: self.images.iter().map(|w| w.format(m)).collect() }
            .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Substitution {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SubstitutionJson::deserialize(de)?;
        if raw.images.len() != raw.m {
            return Err(serde::de::Error::custom("image count differs from m"));
        }
        let images = raw
            .images
            .iter()
            .map(|t| Word::parse(t, raw.m))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Substitution::new(images).map_err(serde::de::Error::custom)
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.arity();
        let parts: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(b, w)| format!("{}->{}", Word(vec![b as Letter]).format(m), w.format(m)))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> Substitution {
        Substitution::parse(&["12", "1"]).unwrap()
    }

    #[test]
    fn compose_fibonacci_with_itself() {
        let z2 = compose(&fib(), &fib()).unwrap();
        assert_eq!(z2, Substitution::parse(&["121", "12"]).unwrap());
        assert_eq!(compose(&fib(), &Substitution::identity(2)).unwrap(), fib());
        assert_eq!(z2.matrix(), fib().matrix().mul(&fib().matrix()));
    }

    #[test]
    fn matrix_and_population() {
        assert_eq!(fib().matrix(), IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]));
        assert_eq!(Substitution::identity(3).matrix(), IntMatrix::identity(3));
        let w = Word::parse("121", 2).unwrap();
        assert_eq!(population_vector(&w, 2), vec![2, 1]);
        assert_eq!(population_vector(&[], 2), vec![0, 0]);
    }

    #[test]
    fn tiling_lengths() {
        assert_eq!(tiling_length(&Word::parse("12", 2).unwrap(), &[1.0, 1.0]), 2.0);
        assert_eq!(tiling_length(&Word::parse("121", 2).unwrap(), &[0.5, 0.25]), 1.25);
    }

    #[test]
    fn good_return_word_examples() {
        let z = Substitution::parse(&["11", "11"]).unwrap();
        assert!(z.good_return_words(2).contains(&Word::parse("1", 2).unwrap()));
        let swap = Substitution::parse(&["2", "1"]).unwrap();
        assert!(swap.good_return_words(4).is_empty());
        assert!(swap.select_return_basis(4).is_err());
    }

    #[test]
    fn c1_examples() {
        let (col, c1) = c1_constant(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 1]])).unwrap();
        assert_eq!((col, c1), (1.0, 0.25));
        let (col, _) = c1_constant(&IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]])).unwrap();
        assert_eq!(col, 2.0);
        assert!(c1_constant(&IntMatrix::from_rows(&[vec![1, 0], vec![1, 1]])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let z = fib();
        let text = serde_json::to_string(&z).unwrap();
        assert_eq!(text, r#"{"m":2,"images":["12","1"]}"#);
        let back: Substitution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, z);
        let big = Substitution::new(
            (0..10).map(|a| Word::new(vec![a as Letter, ((a + 1) % 10) as Letter])).collect(),
        )
        .unwrap();
        let text = serde_json::to_string(&big).unwrap();
        assert!(text.contains("\"10,1\""));
        assert_eq!(serde_json::from_str::<Substitution>(&text).unwrap(), big);
    }

    #[test]
    fn budget_guard() {
        let z = Substitution::parse(&["11", "22"]).unwrap();
        let w = Word::new(vec![0; 10]);
        assert!(matches!(z.apply_with_budget(&w, 15), Err(Error::Budget(20))));
    }

    #[test]
    fn simple_words() {
        assert!(is_simple(b"aab"));
        assert!(!is_simple(b"aa"));
        assert!(!is_simple(b"abab"));
        assert!(is_simple(b"a"));
    }
}
