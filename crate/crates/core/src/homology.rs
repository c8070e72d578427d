//! First homology of finitely presented groups.
//!
//! `H₁(⟨X | R⟩) = ℤ^|X| / rowspace(A)` where `A` is the exponent-sum matrix of
//! the relators. The Smith normal form of `A` gives the free rank and the
//! invariant factors; ranks over `𝔽_p` are computed separately by Gaussian
//! elimination so the two routes can be checked against each other.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::modp;
use crate::presentations::Presentation;

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    /// Builds a matrix from rows of small integers; all rows must have length `cols`.
    pub fn from_rows<T: Into<BigInt> + Copy>(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged matrix");
            entries.extend(row.iter().map(|&v| v.into()));
        }
        IntMatrix {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    fn reduced_mod(&self, p: u64) -> Vec<Vec<u64>> {
        let m = BigInt::from(p);
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.mod_floor(&m).to_u64().unwrap()).collect())
            .collect()
    }
}

/// Matrices travel as `{"rows": r, "cols": c, "entries": [[..], ..]}`.
#[derive(Serialize, Deserialize)]
struct IntMatrixRecord {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<serde_json::Value>>,
}

impl Serialize for IntMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = (0..self.rows)
            .map(|i| self.row(i).iter().map(bigint_json).collect())
            .collect();
        IntMatrixRecord {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = IntMatrixRecord::deserialize(d)?;
        if rec.entries.len() != rec.rows || rec.entries.iter().any(|r| r.len() != rec.cols) {
            return Err(D::Error::custom("matrix dimensions do not match entries"));
        }
        let mut m = IntMatrix::zeros(rec.rows, rec.cols);
        for (i, row) in rec.entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, json_bigint(v).ok_or_else(|| D::Error::custom("bad entry"))?);
            }
        }
        Ok(m)
    }
}

pub(crate) fn bigint_json(n: &BigInt) -> serde_json::Value {
    match n.to_i64() {
        Some(v) => v.into(),
        None => n.to_string().into(),
    }
}

pub(crate) fn json_bigint(v: &serde_json::Value) -> Option<BigInt> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(BigInt::from),
        serde_json::Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// Diagonal of the Smith normal form: `d₁ | d₂ | … | d_r`, all positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    pub diagonal: Vec<BigInt>,
    pub rank: usize,
}

fn min_abs_nonzero(a: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in a.iter().enumerate().skip(t) {
        for (j, v) in row.iter().enumerate().skip(t) {
            if v.is_zero() {
                continue;
            }
            if v.is_one() || (-v).is_one() {
                return Some((i, j));
            }
            if best.is_none_or(|(bi, bj)| v.abs() < a[bi][bj].abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

fn swap_cols(a: &mut [Vec<BigInt>], i: usize, j: usize) {
    if i != j {
        for row in a.iter_mut() {
            row.swap(i, j);
        }
    }
}

/// Smith normal form by unimodular row and column operations.
///
/// Pivots are chosen as the smallest non-zero entry in absolute value.
pub fn smith_normal_form(m: &IntMatrix) -> SmithForm {
    let mut a: Vec<Vec<BigInt>> = m.to_rows();
    a.retain(|row| row.iter().any(|v| !v.is_zero()));
    let rows = a.len();
    let cols = m.cols();
    let mut t = 0;
    while t < rows.min(cols) {
        let Some((pi, pj)) = min_abs_nonzero(&a, t) else {
            break;
        };
        a.swap(t, pi);
        swap_cols(&mut a, t, pj);
        loop {
            let mut dirty = false;
            let pivot = a[t][t].clone();
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = &a[i][t] / &pivot;
                if !q.is_zero() {
                    let (top, rest) = a.split_at_mut(i);
                    let prow = &top[t];
                    for (x, px) in rest[0].iter_mut().zip(prow).skip(t) {
                        if !px.is_zero() {
                            *x -= &q * px;
                        }
                    }
                }
                dirty |= !a[i][t].is_zero();
            }
            for j in t + 1..cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = &a[t][j] / &pivot;
                if !q.is_zero() {
                    for row in a.iter_mut().skip(t) {
                        if !row[t].is_zero() {
                            let d = &q * &row[t];
                            row[j] -= d;
                        }
                    }
                }
                dirty |= !a[t][j].is_zero();
            }
            if dirty {
                // a remainder smaller than the pivot survived; move it to (t, t)
                let mut best = (t, t);
                for i in t + 1..rows {
                    if !a[i][t].is_zero() && a[i][t].abs() < a[best.0][best.1].abs() {
                        best = (i, t);
                    }
                }
                for j in t + 1..cols {
                    if !a[t][j].is_zero() && a[t][j].abs() < a[best.0][best.1].abs() {
                        best = (t, j);
                    }
                }
                a.swap(t, best.0);
                swap_cols(&mut a, t, best.1);
                continue;
            }
            if pivot.is_one() || (-&pivot).is_one() {
                break;
            }
            let offender = (t + 1..rows).find(|&i| {
                a[i].iter()
                    .skip(t + 1)
                    .any(|v| !v.is_zero() && !v.is_multiple_of(&pivot))
            });
            match offender {
                Some(i) => {
                    let (top, rest) = a.split_at_mut(i);
                    for (x, y) in top[t].iter_mut().zip(&rest[0]).skip(t) {
                        *x += y;
                    }
                }
                None => break,
            }
        }
        t += 1;
    }
    let mut diagonal: Vec<BigInt> = (0..t).map(|i| a[i][i].abs()).collect();
    diagonal.sort();
    SmithForm { rank: t, diagonal }
}

/// Rank of the matrix reduced mod `p`.
pub fn rank_mod_p(m: &IntMatrix, p: u64) -> usize {
    modp::rank(m.reduced_mod(p), p)
}

/// Rank over `ℚ` by fraction-free elimination.
pub fn rank_rational(m: &IntMatrix) -> usize {
    let mut a: Vec<Vec<BigInt>> = m.to_rows();
    a.retain(|row| row.iter().any(|v| !v.is_zero()));
    let mut rank = 0;
    for col in 0..m.cols() {
        let Some(pivot) = (rank..a.len())
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| a[r][col].abs())
        else {
            continue;
        };
        a.swap(rank, pivot);
        let (top, rest) = a.split_at_mut(rank + 1);
        let prow = &top[rank];
        let pv = prow[col].clone();
        for row in rest.iter_mut() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            let mut g = BigInt::zero();
            for (x, px) in row.iter_mut().zip(prow).skip(col) {
                *x = &*x * &pv - &factor * px;
                g = g.gcd(x);
            }
            if !g.is_zero() && !g.is_one() {
                for x in row.iter_mut().skip(col) {
                    *x /= &g;
                }
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Structure of `H₁(G) ≅ ℤ^free_rank ⊕ ⊕ ℤ/d_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianInvariants {
    /// `b₁(G; ℚ)`.
    pub free_rank: usize,
    #[serde(serialize_with = "ser_bigints", deserialize_with = "de_bigints")]
    pub invariant_factors: Vec<BigInt>,
    /// Minimal number of generators of `H₁(G)`.
    pub d_h1: usize,
    /// `b₁(G; 𝔽_p)` for the requested primes.
    pub betti_mod: BTreeMap<u64, usize>,
}

fn ser_bigints<S: serde::Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for n in v {
        seq.serialize_element(&bigint_json(n))?;
    }
    seq.end()
}

fn de_bigints<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
    use serde::de::Error as _;
    let raw: Vec<serde_json::Value> = Vec::deserialize(d)?;
    raw.iter()
        .map(|v| json_bigint(v).ok_or_else(|| D::Error::custom("bad integer")))
        .collect()
}

impl AbelianInvariants {
    /// `b₁(G; 𝔽_p)` read off the invariant factors, for any prime.
    pub fn betti_mod_from_factors(&self, p: u64) -> usize {
        let p = BigInt::from(p);
        self.free_rank + self.invariant_factors.iter().filter(|d| d.is_multiple_of(&p)).count()
    }
}

/// Invariants of the cokernel of a relation matrix (rows = relations).
pub fn invariants_of_relations(m: &IntMatrix, primes: &[u64]) -> AbelianInvariants {
    let snf = smith_normal_form(m);
    let free_rank = m.cols() - snf.rank;
    let invariant_factors: Vec<BigInt> = snf.diagonal.into_iter().filter(|d| !d.is_one()).collect();
    let betti_mod = primes.iter().map(|&p| (p, m.cols() - rank_mod_p(m, p))).collect();
    AbelianInvariants {
        free_rank,
        d_h1: free_rank + invariant_factors.len(),
        invariant_factors,
        betti_mod,
    }
}

pub fn abelian_invariants(p: &Presentation, primes: &[u64]) -> AbelianInvariants {
    invariants_of_relations(&p.abelianized_relator_matrix(), primes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(m: &IntMatrix) -> Vec<i64> {
        smith_normal_form(m)
            .diagonal
            .iter()
            .map(|d| d.to_i64().unwrap())
            .collect()
    }

    #[test]
    fn snf_examples() {
        assert_eq!(diag(&IntMatrix::from_rows(2, &[vec![2, 0], vec![0, 3]])), vec![1, 6]);
        let z = IntMatrix::zeros(1, 4);
        assert_eq!(smith_normal_form(&z).rank, 0);
        assert!(smith_normal_form(&z).diagonal.is_empty());
        assert_eq!(diag(&IntMatrix::identity(3)), vec![1, 1, 1]);
        assert_eq!(
            diag(&IntMatrix::from_rows(
                3,
                &[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]
            )),
            vec![2, 6, 12]
        );
    }

    #[test]
    fn rank_mod_p_examples() {
        let m = IntMatrix::from_rows(2, &[vec![2, 0], vec![0, 3]]);
        assert_eq!(rank_mod_p(&m, 2), 1);
        assert_eq!(rank_mod_p(&m, 5), 2);
        assert_eq!(rank_mod_p(&IntMatrix::zeros(3, 3), 7), 0);
    }

    #[test]
    fn rational_rank() {
        let m = IntMatrix::from_rows(3, &[vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1]]);
        assert_eq!(rank_rational(&m), 2);
        assert_eq!(rank_rational(&IntMatrix::zeros(0, 3)), 0);
    }

    #[test]
    fn no_overflow_on_large_entries() {
        let big = BigInt::from(2).pow(100);
        let mut m = IntMatrix::zeros(2, 2);
        m.set(0, 0, big.clone());
        m.set(1, 1, &big * 3);
        let snf = smith_normal_form(&m);
        assert_eq!(snf.diagonal, vec![big.clone(), &big * 3]);
    }

    #[test]
    fn matrix_record_round_trip() {
        let m = IntMatrix::from_rows(2, &[vec![1, -2], vec![0, 7]]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"rows":2,"cols":2,"entries":[[1,-2],[0,7]]}"#);
        assert_eq!(serde_json::from_str::<IntMatrix>(&json).unwrap(), m);
    }
}
