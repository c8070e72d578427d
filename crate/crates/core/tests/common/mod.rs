//! Small stand-alone oracles: free reduction, permutation actions, Schreier
//! rewriting and linear algebra, written without the library's helpers.
#![allow(dead_code, clippy::needless_range_loop)]

pub fn reduce(letters: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::new();
    for &x in letters {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// `(e, root)` with `w = root^(p^e)` and `e` maximal, by trying every period.
pub fn p_power(w: &[i32], p: u64) -> (u32, Vec<i32>) {
    let w = reduce(w);
    let mut k = 0;
    while k < w.len() / 2 && w[k] == -w[w.len() - 1 - k] {
        k += 1;
    }
    let (a, c) = (&w[..k], &w[k..w.len() - k]);
    let len = c.len();
    let mut best = (0, c.to_vec());
    let mut q = p as usize;
    let mut e = 1;
    while len > 0 && len % q == 0 {
        let piece = &c[..len / q];
        if c.chunks(len / q).all(|ch| ch == piece) {
            best = (e, piece.to_vec());
        }
        q *= p as usize;
        e += 1;
    }
    let mut root = a.to_vec();
    root.extend(&best.1);
    root.extend(a.iter().rev().map(|x| -x));
    (best.0, root)
}

pub struct Perms {
    fwd: Vec<Vec<usize>>,
    inv: Vec<Vec<usize>>,
}

impl Perms {
    pub fn new(perms: &[Vec<u32>]) -> Self {
        let fwd: Vec<Vec<usize>> = perms.iter().map(|p| p.iter().map(|&x| x as usize).collect()).collect();
        let inv = fwd
            .iter()
            .map(|p| {
                let mut q = vec![0; p.len()];
                for (i, &j) in p.iter().enumerate() {
                    q[j] = i;
                }
                q
            })
            .collect();
        Perms { fwd, inv }
    }

    pub fn degree(&self) -> usize {
        self.fwd.first().map_or(1, Vec::len)
    }

    pub fn gens(&self) -> usize {
        self.fwd.len()
    }

    pub fn step(&self, c: usize, x: i32) -> usize {
        let g = x.unsigned_abs() as usize - 1;
        if x > 0 {
            self.fwd[g][c]
        } else {
            self.inv[g][c]
        }
    }

    pub fn apply(&self, c: usize, w: &[i32]) -> usize {
        w.iter().fold(c, |c, &x| self.step(c, x))
    }

    pub fn order_of(&self, w: &[i32]) -> u64 {
        let mut c = self.apply(0, w);
        let mut k = 1;
        while c != 0 {
            c = self.apply(c, w);
            k += 1;
        }
        k
    }

    /// Exponent vectors over the Schreier generators of the stabilizer of 0
    /// (non-tree edges of a BFS tree) for `w` read from every point.
    pub fn relation_rows(&self, relators: &[Vec<i32>]) -> (usize, Vec<Vec<i64>>) {
        let n = self.degree();
        let mut tree = vec![vec![false; self.gens()]; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(c) = queue.pop_front() {
            for g in 0..self.gens() {
                let t = self.fwd[g][c];
                if !seen[t] {
                    seen[t] = true;
                    tree[c][g] = true;
                    queue.push_back(t);
                }
                let s = self.inv[g][c];
                if !seen[s] {
                    seen[s] = true;
                    tree[s][g] = true;
                    queue.push_back(s);
                }
            }
        }
        let mut index = vec![vec![usize::MAX; self.gens()]; n];
        let mut m = 0;
        for c in 0..n {
            for g in 0..self.gens() {
                if !tree[c][g] {
                    index[c][g] = m;
                    m += 1;
                }
            }
        }
        let mut rows = Vec::new();
        for r in relators {
            for start in 0..n {
                let mut v = vec![0i64; m];
                let mut c = start;
                for &x in r {
                    let g = x.unsigned_abs() as usize - 1;
                    if x > 0 {
                        if index[c][g] != usize::MAX {
                            v[index[c][g]] += 1;
                        }
                        c = self.fwd[g][c];
                    } else {
                        c = self.inv[g][c];
                        if index[c][g] != usize::MAX {
                            v[index[c][g]] -= 1;
                        }
                    }
                }
                assert_eq!(c, start, "relator does not act trivially");
                rows.push(v);
            }
        }
        (m, rows)
    }
}

fn pow_mod(mut b: u128, mut e: u128, m: u128) -> u128 {
    let mut r = 1;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

pub fn rank_mod(rows: &[Vec<i64>], cols: usize, q: u64) -> usize {
    let q = q as u128;
    let mut a: Vec<Vec<u128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| (x as i128).rem_euclid(q as i128) as u128).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..a.len()).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, p);
        let inv = pow_mod(a[rank][col], q - 2, q);
        let pivot: Vec<u128> = a[rank].iter().map(|x| x * inv % q).collect();
        for r in rank + 1..a.len() {
            let f = a[r][col];
            if f != 0 {
                for (x, y) in a[r].iter_mut().zip(&pivot) {
                    *x = (*x + q - f * y % q) % q;
                }
            }
        }
        a[rank] = pivot;
        rank += 1;
    }
    rank
}

/// `b₁(G; 𝔽_q)` from exponent sums of the relators.
pub fn b1_mod_of(gens: usize, relators: &[Vec<i32>], q: u64) -> usize {
    let rows: Vec<Vec<i64>> = relators
        .iter()
        .map(|r| {
            let mut v = vec![0i64; gens];
            for &x in r {
                v[x.unsigned_abs() as usize - 1] += x.signum() as i64;
            }
            v
        })
        .collect();
    gens - rank_mod(&rows, gens, q)
}

pub fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}
