//! Dense elimination over `𝔽_p` and over the local rings `ℤ/p^e`.

/// Rank of a dense matrix over `𝔽_p`. Entries must already be reduced mod `p`.
pub fn rank(mut rows: Vec<Vec<u64>>, p: u64) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = inverse_mod(rows[rank][col], p);
        for v in rows[rank].iter_mut() {
            *v = mul_mod(*v, inv, p);
        }
        let (top, rest) = rows.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in rest.iter_mut() {
            let factor = row[col];
            if factor == 0 {
                continue;
            }
            for (v, &pv) in row.iter_mut().zip(pivot_row).skip(col) {
                if pv != 0 {
                    *v = (*v + p - mul_mod(factor, pv, p)) % p;
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

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Inverse of a unit modulo `m` (extended Euclid).
pub(crate) fn inverse_mod(a: u64, m: u64) -> u64 {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1, "{a} is not a unit mod {m}");
    old_s.rem_euclid(m as i128) as u64
}

pub(crate) fn reduce_i64(v: i64, m: u64) -> u64 {
    v.rem_euclid(m as i64) as u64
}

/// Cokernel of an integer relation matrix reduced mod `p^e`.
///
/// For relation rows `A` over `m` generators, the group
/// `(ℤ/p^e)^m / rowspace(A)` is split as `⊕ ℤ/moduli[j]`, and
/// `projection[g]` is the image of the `g`-th generator.
#[derive(Clone, Debug)]
pub struct PrimePowerCokernel {
    pub moduli: Vec<u64>,
    pub projection: Vec<Vec<u64>>,
}

impl PrimePowerCokernel {
    pub fn order_log_p(&self, p: u64) -> u32 {
        self.moduli.iter().map(|&m| m.ilog(p)).sum()
    }
}

fn valuation(mut a: u64, p: u64) -> u32 {
    let mut v = 0;
    while a.is_multiple_of(p) {
        a /= p;
        v += 1;
    }
    v
}

/// Diagonalizes `relations` (rows, `generators` columns) over `ℤ/p^e`.
pub fn prime_power_cokernel(relations: &[Vec<i64>], generators: usize, p: u64, e: u32) -> PrimePowerCokernel {
    let modulus = p.pow(e);
    let mut a: Vec<Vec<u64>> = relations
        .iter()
        .map(|row| row.iter().map(|&v| reduce_i64(v, modulus)).collect())
        .collect();
    a.retain(|row| row.iter().any(|&v| v != 0));
    // v[g][j]: coordinate j of generator g after column operations.
    let mut v: Vec<Vec<u64>> = (0..generators)
        .map(|g| {
            let mut row = vec![0; generators];
            row[g] = 1 % modulus;
            row
        })
        .collect();
    let mut diag: Vec<u32> = Vec::new();
    let mut t = 0;
    while t < a.len() && t < generators {
        let mut best: Option<(u32, usize, usize)> = None;
        'search: for (i, row) in a.iter().enumerate().skip(t) {
            for (j, &x) in row.iter().enumerate().skip(t) {
                if x != 0 {
                    let val = valuation(x, p);
                    if best.is_none_or(|(bv, _, _)| val < bv) {
                        best = Some((val, i, j));
                        if val == 0 {
                            break 'search;
                        }
                    }
                }
            }
        }
        let Some((val, i, j)) = best else { break };
        a.swap(t, i);
        if j != t {
            for row in a.iter_mut() {
                row.swap(t, j);
            }
            for row in v.iter_mut() {
                row.swap(t, j);
            }
        }
        let pv = p.pow(val);
        let unit = a[t][t] / pv;
        let unit_inv = inverse_mod(unit % modulus, modulus);
        for x in a[t].iter_mut() {
            *x = mul_mod(*x, unit_inv, modulus);
        }
        // a[t][t] == p^val now; every other entry is divisible by p^val.
        let pivot_row = a[t].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == t || row[t] == 0 {
                continue;
            }
            let factor = row[t] / pv;
            for (x, &px) in row.iter_mut().zip(&pivot_row).skip(t) {
                if px != 0 {
                    *x = (*x + modulus - mul_mod(factor, px, modulus)) % modulus;
                }
            }
        }
        for j in t + 1..generators {
            let x = a[t][j];
            if x == 0 {
                continue;
            }
            let factor = x / pv;
            for row in a.iter_mut() {
                let pt = row[t];
                if pt != 0 {
                    row[j] = (row[j] + modulus - mul_mod(factor, pt, modulus)) % modulus;
                }
            }
            for row in v.iter_mut() {
                let pt = row[t];
                if pt != 0 {
                    row[j] = (row[j] + modulus - mul_mod(factor, pt, modulus)) % modulus;
                }
            }
        }
        diag.push(val);
        t += 1;
    }
    let mut kept = Vec::new();
    let mut moduli = Vec::new();
    for j in 0..generators {
        let m = if j < diag.len() { p.pow(diag[j]) } else { modulus };
        if m > 1 {
            kept.push(j);
            moduli.push(m);
        }
    }
    let projection = v
        .iter()
        .map(|row| kept.iter().zip(&moduli).map(|(&j, &m)| row[j] % m).collect())
        .collect();
    PrimePowerCokernel { moduli, projection }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank(vec![vec![0, 0], vec![0, 1]], 2), 1);
        assert_eq!(rank(vec![vec![1, 1], vec![1, 1]], 2), 1);
        assert_eq!(rank(vec![vec![1, 2], vec![2, 1]], 3), 1);
        assert_eq!(rank(vec![vec![1, 2], vec![2, 1]], 5), 2);
        assert_eq!(rank(vec![], 5), 0);
    }

    #[test]
    fn inverses() {
        for m in [7u64, 8, 9, 27, 1024] {
            for a in 1..m {
                if num_integer::gcd(a, m) == 1 {
                    assert_eq!(mul_mod(a, inverse_mod(a, m), m), 1);
                }
            }
        }
    }

    #[test]
    fn cokernel_of_x4_mod_8() {
        // <x | x^4> tensored with Z/8 is Z/4
        let c = prime_power_cokernel(&[vec![4]], 1, 2, 3);
        assert_eq!(c.moduli, vec![4]);
        assert_eq!(c.projection, vec![vec![1]]);
    }

    #[test]
    fn cokernel_orders_match_brute_force() {
        // relations over Z/4 on 2 generators; count the quotient by enumeration
        let rels = vec![vec![2, 2], vec![0, 2], vec![1, 3]];
        let c = prime_power_cokernel(&rels, 2, 2, 2);
        let order: u64 = c.moduli.iter().product();
        let mut seen = std::collections::HashSet::new();
        for x in 0..4i64 {
            for y in 0..4i64 {
                seen.insert(
                    c.projection[0]
                        .iter()
                        .zip(&c.projection[1])
                        .zip(&c.moduli)
                        .map(|((&a, &b), &m)| (x as u64 * a + y as u64 * b) % m)
                        .collect::<Vec<_>>(),
                );
            }
        }
        assert_eq!(seen.len() as u64, order);
        // (1,3) and (0,2) span a subgroup of order 8 in (Z/4)^2
        assert_eq!(order, 2);
        for r in &rels {
            let img: Vec<u64> = (0..c.moduli.len())
                .map(|j| {
                    (reduce_i64(r[0], 4) * c.projection[0][j] + reduce_i64(r[1], 4) * c.projection[1][j]) % c.moduli[j]
                })
                .collect();
            assert!(img.iter().all(|&v| v == 0));
        }
    }
}
