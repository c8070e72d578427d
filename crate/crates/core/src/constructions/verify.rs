//! Checks of a [`StateSnapshot`] that share no code with the builder: words,
//! permutations and ranks are handled by the small helpers below.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::driver::StateSnapshot;
use super::excess::FieldMode;

const LARGE_PRIME: u64 = 2_147_483_647;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageVerification {
    pub stage: usize,
    pub even_ratio: bool,
    pub odd_ratio: bool,
    pub commutator_containment: bool,
    pub neighborhood: bool,
    pub p_deficiency: bool,
    pub p_regular: bool,
}

impl StageVerification {
    pub fn all(&self) -> bool {
        self.even_ratio
            && self.odd_ratio
            && self.commutator_containment
            && self.neighborhood
            && self.p_deficiency
            && self.p_regular
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub stages: Vec<StageVerification>,
    /// Every level is a regular action killing the relators and factoring
    /// through the previous one.
    pub nesting: bool,
    pub messages: Vec<String>,
}

impl VerificationReport {
    pub fn all(&self) -> bool {
        self.nesting && self.stages.iter().all(StageVerification::all)
    }
}

fn reduce(letters: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for &x in letters {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// `r = a · c · a⁻¹` with `c` cyclically reduced.
fn split_conjugate(r: &[i32]) -> (Vec<i32>, Vec<i32>) {
    let r = reduce(r);
    let mut k = 0;
    while k < r.len() / 2 && r[k] == -r[r.len() - 1 - k] {
        k += 1;
    }
    (r[..k].to_vec(), r[k..r.len() - k].to_vec())
}

/// Largest `e` such that the word is a `p^e`-th power, and the `p^j`-th root
/// for `j = e − 1` (the `p`-th root), if `e ≥ 1`.
fn p_power(r: &[i32], p: u64) -> (u32, Option<Vec<i32>>) {
    let (a, c) = split_conjugate(r);
    let len = c.len();
    if len == 0 {
        return (0, None);
    }
    let period = (1..=len)
        .find(|&t| len % t == 0 && (0..len).all(|i| c[i] == c[(i + t) % len]))
        .unwrap();
    let mut m = (len / period) as u64;
    let mut e = 0;
    while m.is_multiple_of(p) {
        m /= p;
        e += 1;
    }
    if e == 0 {
        return (0, None);
    }
    let mut root = a.clone();
    root.extend_from_slice(&c[..len / p as usize]);
    root.extend(a.iter().rev().map(|x| -x));
    (e, Some(root))
}

/// `r^(1/p^e)`.
fn full_root(r: &[i32], p: u64) -> Vec<i32> {
    let (e, _) = p_power(r, p);
    let (a, c) = split_conjugate(r);
    let keep = c.len() / p.pow(e) as usize;
    let mut w = a.clone();
    w.extend_from_slice(&c[..keep]);
    w.extend(a.iter().rev().map(|x| -x));
    w
}

/// `(parent, letter)` leading to each point, `None` at the root.
type Parents = Vec<Option<(usize, i32)>>;

struct Action<'a> {
    perms: &'a [Vec<u32>],
    inverses: Vec<Vec<u32>>,
}

impl<'a> Action<'a> {
    fn new(perms: &'a [Vec<u32>]) -> Self {
        let inverses = perms
            .iter()
            .map(|p| {
                let mut inv = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    inv[j as usize] = i as u32;
                }
                inv
            })
            .collect();
        Action { perms, inverses }
    }

    fn points(&self) -> usize {
        self.perms.first().map_or(1, Vec::len)
    }

    fn step(&self, point: usize, letter: i32) -> usize {
        let g = letter.unsigned_abs() as usize - 1;
        if letter > 0 {
            self.perms[g][point] as usize
        } else {
            self.inverses[g][point] as usize
        }
    }

    fn apply(&self, point: usize, word: &[i32]) -> usize {
        word.iter().fold(point, |c, &x| self.step(c, x))
    }

    /// Spanning tree from 0: `(parent, letter)` per point, in BFS order.
    fn tree(&self) -> Option<(Vec<usize>, Parents)> {
        let n = self.points();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            let c = order[i];
            i += 1;
            for g in 1..=self.perms.len() as i32 {
                for x in [g, -g] {
                    let t = self.step(c, x);
                    if !seen[t] {
                        seen[t] = true;
                        parent[t] = Some((c, x));
                        order.push(t);
                    }
                }
            }
        }
        (order.len() == n).then_some((order, parent))
    }

    /// Transitive with trivial point stabilizers. The map `x ↦ c · t_x`
    /// must commute with all generators; checking it for `c = 0 · g` is
    /// enough, since such maps generate a transitive centralizer.
    fn is_regular(&self) -> bool {
        let Some((order, parent)) = self.tree() else {
            return false;
        };
        let n = self.points();
        let images: Vec<usize> = (1..=self.perms.len() as i32).map(|g| self.step(0, g)).collect();
        for c in images {
            let mut lambda = vec![0usize; n];
            lambda[0] = c;
            for &x in order.iter().skip(1) {
                let (up, letter) = parent[x].unwrap();
                lambda[x] = self.step(lambda[up], letter);
            }
            for g in 1..=self.perms.len() as i32 {
                for x in 0..n {
                    if lambda[self.step(x, g)] != self.step(lambda[x], g) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn order_of(&self, word: &[i32]) -> usize {
        let mut c = self.apply(0, word);
        let mut k = 1;
        while c != 0 {
            c = self.apply(c, word);
            k += 1;
        }
        k
    }

    /// Schreier generators are the non-tree edges `(c, g)`; rewriting a word
    /// from `start` gives its end point and exponent vector.
    fn rewrite(&self, start: usize, word: &[i32]) -> Option<(usize, Vec<i64>)> {
        let (_, parent) = self.tree()?;
        let d = self.perms.len();
        let mut index = vec![vec![None; d]; self.points()];
        let mut next = 0;
        for (c, row) in index.iter_mut().enumerate() {
            for (g, slot) in row.iter_mut().enumerate() {
                let target = self.step(c, g as i32 + 1);
                let tree_edge =
                    parent[target] == Some((c, g as i32 + 1)) || parent[c] == Some((target, -(g as i32 + 1)));
                if !tree_edge {
                    *slot = Some(next);
                    next += 1;
                }
            }
        }
        let mut v = vec![0i64; next];
        let mut c = start;
        for &x in word {
            let g = x.unsigned_abs() as usize - 1;
            if x > 0 {
                if let Some(k) = index[c][g] {
                    v[k] += 1;
                }
                c = self.step(c, x);
            } else {
                c = self.step(c, x);
                if let Some(k) = index[c][g] {
                    v[k] -= 1;
                }
            }
        }
        Some((c, v))
    }

    fn schreier_count(&self) -> usize {
        1 + self.points() * (self.perms.len().max(1) - 1)
    }

    /// Point map `self → coarser` sending 0 to 0, if it exists.
    fn factors_through(&self, coarser: &Action) -> bool {
        let Some((order, parent)) = self.tree() else {
            return false;
        };
        let mut map = vec![0usize; self.points()];
        for &x in order.iter().skip(1) {
            let (up, letter) = parent[x].unwrap();
            map[x] = coarser.step(map[up], letter);
        }
        (0..self.points())
            .all(|c| (1..=self.perms.len() as i32).all(|g| map[self.step(c, g)] == coarser.step(map[c], g)))
    }
}

fn rank_mod(mut rows: Vec<Vec<u64>>, q: u64) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = pow_mod(rows[rank][col], q - 2, q);
        for x in rows[rank].iter_mut() {
            *x = (*x as u128 * inv as u128 % q as u128) as u64;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[col] != 0 {
                let f = row[col];
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x = ((*x as u128 + q as u128 - (f as u128 * *y as u128 % q as u128)) % q as u128) as u64;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u128;
    let mut base = b as u128 % m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * base % m as u128;
        }
        base = base * base % m as u128;
        e >>= 1;
    }
    r as u64
}

fn to_field(v: &[i64], q: u64) -> Vec<u64> {
    v.iter().map(|&x| x.rem_euclid(q as i64) as u64).collect()
}

fn is_power_of(mut n: u64, p: u64) -> bool {
    while n.is_multiple_of(p) {
        n /= p;
    }
    n == 1
}

fn rational(n: i64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Upper bound on `b₁` over ℚ (rank mod a large prime never exceeds the
/// rational rank), or the exact `b₁` over `𝔽_q`.
fn b1_bound(action: &Action, relators: &[Vec<i32>], mode: FieldMode) -> Option<usize> {
    let q = match mode {
        FieldMode::Rational => LARGE_PRIME,
        FieldMode::Prime(q) => q,
    };
    let mut rows = Vec::new();
    for r in relators {
        for c in 0..action.points() {
            let (end, v) = action.rewrite(c, r)?;
            if end != c {
                return None;
            }
            rows.push(to_field(&v, q));
        }
    }
    let m = action.schreier_count();
    Some(m - rank_mod(rows, q))
}

/// `d − 1 − Σ p^(−e_p(r))`.
fn p_deficiency(d: usize, relators: &[Vec<i32>], p: u64) -> BigRational {
    relators.iter().fold(rational(d as i64 - 1, 1), |acc, r| {
        let (e, _) = p_power(r, p);
        acc - BigRational::new(BigInt::one(), BigInt::from(p).pow(e))
    })
}

/// Checks every completed stage of `s` and the nesting of its tower.
pub fn verify_snapshot(s: &StateSnapshot) -> VerificationReport {
    let mut messages = Vec::new();
    let p = s.p;
    let d = s.d;
    let target = rational(d as i64 - 1, 1) - s.epsilon.value();
    let tower: Vec<Action> = s.tower.iter().map(|t| Action::new(t)).collect();
    let phi: Vec<Action> = s.phi.iter().map(|t| Action::new(t)).collect();
    let all_relators: Vec<Vec<i32>> = s.relator_sets.iter().flatten().cloned().collect();

    let mut nesting = tower.len() == 2 * s.completed_stages + 1 && phi.len() == s.completed_stages;
    if !nesting {
        messages.push("tower length does not match the completed stages".into());
    }
    for (i, level) in tower.iter().enumerate() {
        let regular = level.is_regular() && is_power_of(level.points() as u64, p);
        let kills = all_relators.iter().all(|r| level.apply(0, r) == 0);
        let nested = i == 0 || level.factors_through(&tower[i - 1]);
        if !(regular && kills && nested) {
            messages.push(format!(
                "tower level {i}: regular {regular}, kills relators {kills}, nested {nested}"
            ));
            nesting = false;
        }
    }

    let mut stages = Vec::new();
    for n in 1..=s.completed_stages.min(phi.len()).min(tower.len() / 2) {
        let current: Vec<Vec<i32>> = s.relator_sets[..n].iter().flatten().cloned().collect();
        let even = &tower[2 * n];
        let odd = &tower[2 * n - 1];
        let index = even.points() as u64;

        let relators: u64 = current
            .iter()
            .map(|r| index / even.order_of(&full_root(r, p)) as u64)
            .sum();
        let generators = 1 + index * (d as u64 - 1);
        let def = generators as i64 - relators as i64;
        let even_ratio = rational(def - 1, index) > target;

        let delta = s.deltas[n - 1].value();
        let odd_ratio = match b1_bound(odd, &all_relators, s.mode) {
            Some(b) => rational(b as i64, odd.points() as u64) < *delta,
            None => false,
        };

        let outer = &tower[2 * n - 2];
        let commutator_containment = s.relator_sets[n - 1].iter().all(|r| {
            outer
                .rewrite(0, r)
                .is_some_and(|(end, v)| end == 0 && v.iter().all(|&x| x == 0))
        });

        let phi_n = &phi[n - 1];
        let mut neighborhood = even.factors_through(phi_n) && phi_n.is_regular();
        if n == 1 {
            let rows: Vec<Vec<u64>> = current
                .iter()
                .map(|r| {
                    let mut v = vec![0i64; d];
                    for &x in r {
                        v[x.unsigned_abs() as usize - 1] += x.signum() as i64;
                    }
                    to_field(&v, p)
                })
                .collect();
            let dim = d - rank_mod(rows, p);
            let elementary = phi_n.perms.iter().all(|g| {
                (0..phi_n.points()).all(|c| {
                    let mut x = c;
                    for _ in 0..p {
                        x = g[x] as usize;
                    }
                    x == c
                })
            }) && phi_n.perms.iter().all(|a| {
                phi_n
                    .perms
                    .iter()
                    .all(|b| (0..a.len()).all(|c| a[b[c] as usize] == b[a[c] as usize]))
            });
            neighborhood &= elementary && phi_n.points() as u64 == p.pow(dim as u32);
        }

        let p_deficiency = p_deficiency(d, &current, p) > target;

        let p_regular = match &s.witness {
            Some(w) if n == s.completed_stages => {
                let w = Action::new(w);
                w.is_regular()
                    && is_power_of(w.points() as u64, p)
                    && current.iter().all(|r| w.apply(0, r) == 0)
                    && current.iter().all(|r| match p_power(r, p) {
                        (0, _) => true,
                        (_, Some(root)) => w.apply(0, &root) != 0,
                        _ => false,
                    })
            }
            // earlier stages were certified by witnesses since superseded
            Some(_) => true,
            None => current.iter().all(|r| p_power(r, p).0 == 0),
        };
        let record = StageVerification {
            stage: n,
            even_ratio,
            odd_ratio,
            commutator_containment,
            neighborhood,
            p_deficiency,
            p_regular,
        };
        if !record.all() {
            messages.push(format!("stage {n}: {record:?}"));
        }
        stages.push(record);
    }
    if s.completed_stages == 0 && !s.relator_sets.is_empty() {
        messages.push("relators recorded without a completed stage".into());
        nesting = false;
    }
    VerificationReport {
        stages,
        nesting,
        messages,
    }
}
