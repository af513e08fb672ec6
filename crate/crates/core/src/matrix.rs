//! Square integer matrices with arbitrary-precision entries.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Row-major `m x m` matrix over the integers.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    m: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(m: usize) -> Self {
        IntMatrix { m, data: vec![BigInt::zero(); m * m] }
    }

    pub fn identity(m: usize) -> Self {
        let mut out = Self::zeros(m);
        for i in 0..m {
            out.data[i * m + i] = BigInt::one();
        }
        out
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Self {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for r in rows {
            assert_eq!(r.len(), m, "matrix must be square");
            data.extend(r.iter().cloned().map(Into::into));
        }
        IntMatrix { m, data }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.m + j] = v;
    }

    pub fn entry_i64(&self, i: usize, j: usize) -> i64 {
        self.get(i, j).to_i64().expect("entry exceeds i64")
    }

    pub fn transpose(&self) -> Self {
        let m = self.m;
        let mut out = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                out.data[j * m + i] = self.data[i * m + j].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.m, other.m);
        let m = self.m;
        let mut out = Self::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let a = &self.data[i * m + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..m {
                    let b = &other.data[k * m + j];
                    if !b.is_zero() {
                        out.data[i * m + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.m);
        (0..self.m)
            .map(|i| {
                let mut acc = BigInt::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = &self.data[i * self.m + j];
                    if !a.is_zero() {
                        acc += a * x;
                    }
                }
                acc
            })
            .collect()
    }

    /// `M v` for a real vector.
    pub fn mul_vec_f64(&self, v: &[f64]) -> Vec<f64> {
        let f = self.to_f64_rows();
        f.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Maximum column sum of absolute values.
    pub fn norm1(&self) -> BigInt {
        (0..self.m)
            .map(|j| (0..self.m).map(|i| self.get(i, j).abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    pub fn column_sums(&self) -> Vec<BigInt> {
        (0..self.m).map(|j| (0..self.m).map(|i| self.get(i, j).clone()).sum()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.m).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative())
    }

    pub fn max_entry(&self) -> BigInt {
        self.data.iter().max().cloned().unwrap_or_default()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| big_to_f64(self.get(i, j))).collect())
            .collect()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.m, self.m, |i, j| big_to_f64(self.get(i, j)))
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        bareiss_det(self.m, self.data.clone())
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.m)
            .map(|i| (0..self.m).map(|j| self.get(i, j).to_string()).collect())
            .collect();
        write!(f, "{rows:?}")
    }
}

pub fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// `x / y` for big integers, accurate even when both overflow `f64`.
pub fn big_ratio(x: &BigInt, y: &BigInt) -> f64 {
    let shift = x.bits().max(y.bits()).saturating_sub(1000);
    big_to_f64(&(x >> shift)) / big_to_f64(&(y >> shift))
}

/// Natural logarithm of a positive big integer.
pub fn big_ln(x: &BigInt) -> f64 {
    let shift = x.bits().saturating_sub(64);
    big_to_f64(&(x >> shift)).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Determinant of a row-major `n x n` integer matrix.
pub fn bareiss_det(n: usize, mut a: Vec<BigInt>) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !a[r * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j]) / &prev;
                a[i * n + j] = v;
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * a[n * n - 1].clone()
}

/// Rank of a list of integer vectors, exact.
pub fn integer_rank(vectors: &[Vec<BigInt>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let cols = vectors[0].len();
    let mut rows: Vec<Vec<BigInt>> = vectors.to_vec();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let (f, g) = (rows[rank][c].clone(), rows[r][c].clone());
                for k in 0..cols {
                    let v = &rows[r][k] * &f - &rows[rank][k] * &g;
                    rows[r][k] = v;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_small_cases() {
        let a = IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]);
        assert_eq!(a.determinant(), BigInt::from(-1));
        let b = IntMatrix::from_rows(&[vec![0, 2, 1], vec![1, 0, 0], vec![3, 1, 1]]);
        // expand along row 1: -1 * (2*1 - 1*1) = -1
        assert_eq!(b.determinant(), BigInt::from(-1));
        let c = IntMatrix::from_rows(&[vec![1, 2], vec![2, 4]]);
        assert!(c.determinant().is_zero());
    }

    #[test]
    fn rank_detects_dependence() {
        let v = |x: &[i64]| x.iter().map(|&t| BigInt::from(t)).collect::<Vec<_>>();
        assert_eq!(integer_rank(&[v(&[1, 2]), v(&[2, 4])]), 1);
        assert_eq!(integer_rank(&[v(&[1, 2]), v(&[2, 3])]), 2);
    }

    #[test]
    fn norm1_is_max_column_sum() {
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]);
        assert_eq!(a.norm1(), BigInt::from(3));
    }
}
