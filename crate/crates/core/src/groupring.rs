//! Matrices over group algebras `𝔽_p[H]` of finite groups, their right
//! regular representation and augmentation.
//!
//! For a finite `p`-group `H` and an `𝔽_p[H]`-linear map
//! `α : 𝔽_p[H]^m → 𝔽_p[H]^n`, the image of `α` has `𝔽_p`-dimension at least
//! `|H|` times the rank of the augmented matrix. [`check_dim_inequality`]
//! evaluates both sides exactly; [`necessity_demo`] does the same without the
//! `p`-group requirement.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modp;
use crate::words::is_prime;

/// Largest group order accepted for multiplication tables.
pub const MAX_TABLE_ORDER: usize = 64;

/// A finite group as a validated multiplication table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct GroupTable {
    name: String,
    mult: Vec<Vec<u32>>,
    identity: usize,
    inverse: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TableRecord {
    name: String,
    order: usize,
    identity: usize,
    mult: Vec<Vec<u32>>,
}

impl TryFrom<TableRecord> for GroupTable {
    type Error = Error;
    fn try_from(r: TableRecord) -> Result<Self> {
        if r.mult.len() != r.order {
            return Err(Error::Malformed("table size does not match order".into()));
        }
        let g = GroupTable::from_table(&r.name, r.mult)?;
        if g.identity != r.identity {
            return Err(Error::Malformed("declared identity is not the identity".into()));
        }
        Ok(g)
    }
}

impl From<GroupTable> for TableRecord {
    fn from(g: GroupTable) -> Self {
        TableRecord {
            name: g.name,
            order: g.mult.len(),
            identity: g.identity,
            mult: g.mult,
        }
    }
}

impl GroupTable {
    /// Checks closure, identity, inverses and associativity.
    pub fn from_table(name: &str, mult: Vec<Vec<u32>>) -> Result<Self> {
        let n = mult.len();
        if n == 0 || n > MAX_TABLE_ORDER {
            return Err(Error::Domain(format!("group order must be in 1..={MAX_TABLE_ORDER}")));
        }
        if mult
            .iter()
            .any(|row| row.len() != n || row.iter().any(|&x| x as usize >= n))
        {
            return Err(Error::Malformed("multiplication table is not closed".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| mult[e][g] as usize == g && mult[g][e] as usize == g))
            .ok_or_else(|| Error::Malformed("no identity element".into()))?;
        let mut inverse = vec![0u32; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| mult[g][h] as usize == identity && mult[h][g] as usize == identity)
                .ok_or_else(|| Error::Malformed(format!("element {g} has no inverse")))?
                as u32;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = mult[a][b] as usize;
                for c in 0..n {
                    if mult[ab][c] != mult[a][mult[b][c] as usize] {
                        return Err(Error::Malformed(format!("not associative at ({a}, {b}, {c})")));
                    }
                }
            }
        }
        Ok(GroupTable {
            name: name.to_string(),
            mult,
            identity,
            inverse,
        })
    }

    /// Closure of permutations of `0..degree` under composition (apply left factor first).
    pub fn from_permutations(name: &str, generators: &[Vec<usize>]) -> Result<Self> {
        let degree = generators.first().map_or(0, Vec::len);
        let identity: Vec<usize> = (0..degree).collect();
        let mut elements = vec![identity.clone()];
        let mut index = HashMap::from([(identity, 0usize)]);
        let mut head = 0;
        while head < elements.len() {
            for g in generators {
                let y: Vec<usize> = elements[head].iter().map(|&i| g[i]).collect();
                if !index.contains_key(&y) {
                    if elements.len() == MAX_TABLE_ORDER {
                        return Err(Error::Domain(format!("group order exceeds {MAX_TABLE_ORDER}")));
                    }
                    index.insert(y.clone(), elements.len());
                    elements.push(y);
                }
            }
            head += 1;
        }
        let mult = elements
            .iter()
            .map(|a| {
                elements
                    .iter()
                    .map(|b| index[&a.iter().map(|&i| b[i]).collect::<Vec<_>>()] as u32)
                    .collect()
            })
            .collect();
        GroupTable::from_table(name, mult)
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        let mult = (0..n).map(|a| (0..n).map(|b| ((a + b) % n) as u32).collect()).collect();
        GroupTable::from_table(&format!("C{n}"), mult)
    }

    /// Dihedral group of order `2n`, the symmetries of an `n`-gon.
    pub fn dihedral(n: usize) -> Result<Self> {
        let rotation: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let reflection: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
        GroupTable::from_permutations(&format!("D{n}"), &[rotation, reflection])
    }

    /// Quaternion group of order 8, via its regular action on `{±1, ±i, ±j, ±k}`.
    pub fn quaternion() -> Result<Self> {
        // points: 0=1 1=i 2=j 3=k 4=-1 5=-i 6=-j 7=-k; right multiplication by i and j
        let by_i = vec![1, 4, 7, 2, 5, 0, 3, 6];
        let by_j = vec![2, 3, 4, 5, 6, 7, 0, 1];
        GroupTable::from_permutations("Q8", &[by_i, by_j])
    }

    pub fn direct_product(a: &GroupTable, b: &GroupTable) -> Result<Self> {
        let (n, m) = (a.order(), b.order());
        let mult = (0..n * m)
            .map(|x| {
                (0..n * m)
                    .map(|y| {
                        let (x1, x2) = (x / m, x % m);
                        let (y1, y2) = (y / m, y % m);
                        (a.mult[x1][y1] as usize * m + b.mult[x2][y2] as usize) as u32
                    })
                    .collect()
            })
            .collect();
        GroupTable::from_table(&format!("{}x{}", a.name, b.name), mult)
    }

    /// `C4`, `C2xC2`, `D4`, `Q8`, ...: cyclic groups, `D<n>`, `Q8` and `x`-products.
    pub fn named(name: &str) -> Result<Self> {
        let bad = || Error::Malformed(format!("unknown group `{name}`"));
        let factors: Vec<&str> = name.split('x').collect();
        if factors.len() > 1 {
            let mut g = GroupTable::named(factors[0])?;
            for f in &factors[1..] {
                g = GroupTable::direct_product(&g, &GroupTable::named(f)?)?;
            }
            return Ok(g);
        }
        if name == "Q8" {
            return GroupTable::quaternion();
        }
        let (kind, n) = name.split_at(1);
        let n: usize = n.parse().map_err(|_| bad())?;
        match kind {
            "C" => GroupTable::cyclic(n),
            "D" => GroupTable::dihedral(n),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.mult.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a][b] as usize
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }
}

/// A group table whose order is a power of `prime`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PGroupTable {
    table: GroupTable,
    prime: u64,
}

impl PGroupTable {
    pub fn new(table: GroupTable, prime: u64) -> Result<Self> {
        if !is_prime(prime) {
            return Err(Error::Domain(format!("{prime} is not prime")));
        }
        let mut n = table.order() as u64;
        while n.is_multiple_of(prime) {
            n /= prime;
        }
        if n != 1 {
            return Err(Error::Domain(format!(
                "{} has order {}, not a power of {prime}",
                table.name,
                table.order()
            )));
        }
        Ok(PGroupTable { table, prime })
    }

    pub fn table(&self) -> &GroupTable {
        &self.table
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }
}

/// An `m × n` matrix with entries in `𝔽_p[H]`, each entry a coefficient vector indexed by group element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct GroupRingMatrix {
    group: GroupTable,
    prime: u64,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatrixRecord {
    group: GroupTable,
    prime: u64,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<Vec<u64>>>,
}

impl TryFrom<MatrixRecord> for GroupRingMatrix {
    type Error = Error;
    fn try_from(r: MatrixRecord) -> Result<Self> {
        if r.entries.len() != r.rows || r.entries.iter().any(|row| row.len() != r.cols) {
            return Err(Error::Malformed("entry array does not match the declared shape".into()));
        }
        GroupRingMatrix::new(
            r.group,
            r.prime,
            r.rows,
            r.cols,
            r.entries.into_iter().flatten().collect(),
        )
    }
}

impl From<GroupRingMatrix> for MatrixRecord {
    fn from(m: GroupRingMatrix) -> Self {
        let entries = m.entries.chunks(m.cols.max(1)).map(<[_]>::to_vec).collect();
        MatrixRecord {
            group: m.group,
            prime: m.prime,
            rows: m.rows,
            cols: m.cols,
            entries,
        }
    }
}

impl GroupRingMatrix {
    /// `entries` is row-major, `rows * cols` coefficient vectors of length `|H|`.
    pub fn new(group: GroupTable, prime: u64, rows: usize, cols: usize, entries: Vec<Vec<u64>>) -> Result<Self> {
        if !is_prime(prime) {
            return Err(Error::Domain(format!("{prime} is not prime")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Malformed(format!(
                "expected {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|e| e.len() != group.order() || e.iter().any(|&c| c >= prime))
        {
            return Err(Error::Malformed(format!(
                "entries must be {} coefficients in 0..{prime}",
                group.order()
            )));
        }
        Ok(GroupRingMatrix {
            group,
            prime,
            rows,
            cols,
            entries,
        })
    }

    /// Uniform coefficients, with a third of the entries zero and a third
    /// drawn from the augmentation ideal.
    pub fn random<R: Rng>(group: &GroupTable, prime: u64, rows: usize, cols: usize, rng: &mut R) -> Self {
        let n = group.order();
        let entries = (0..rows * cols)
            .map(|_| {
                let mut e: Vec<u64> = vec![0; n];
                match rng.gen_range(0..3) {
                    0 => {}
                    1 => e.iter_mut().for_each(|c| *c = rng.gen_range(0..prime)),
                    _ => {
                        e.iter_mut().for_each(|c| *c = rng.gen_range(0..prime));
                        let sum: u64 = e.iter().sum::<u64>() % prime;
                        let g = rng.gen_range(0..n);
                        e[g] = (e[g] + prime - sum) % prime;
                    }
                }
                e
            })
            .collect();
        GroupRingMatrix {
            group: group.clone(),
            prime,
            rows,
            cols,
            entries,
        }
    }

    pub fn group(&self) -> &GroupTable {
        &self.group
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entry(&self, i: usize, j: usize) -> &[u64] {
        &self.entries[i * self.cols + j]
    }

    /// Product of `1 × 1` matrices, i.e. multiplication in `𝔽_p[H]`.
    pub fn ring_product(a: &[u64], b: &[u64], group: &GroupTable, p: u64) -> Vec<u64> {
        let mut out = vec![0; group.order()];
        for (g, &x) in a.iter().enumerate().filter(|(_, &x)| x != 0) {
            for (h, &y) in b.iter().enumerate().filter(|(_, &y)| y != 0) {
                let gh = group.mul(g, h);
                out[gh] = (out[gh] + x * y) % p;
            }
        }
        out
    }
}

/// Right regular representation of a single element: row `h`, column `h·g` holds `a_g`.
pub fn element_rep(a: &[u64], group: &GroupTable) -> Vec<Vec<u64>> {
    let n = group.order();
    let mut block = vec![vec![0; n]; n];
    for (h, row) in block.iter_mut().enumerate() {
        for (g, &c) in a.iter().enumerate() {
            row[group.mul(h, g)] = c;
        }
    }
    block
}

/// `|H|m × |H|n` matrix of `α` over `𝔽_p`, acting on row vectors.
pub fn regular_rep(m: &GroupRingMatrix) -> Vec<Vec<u64>> {
    let n = m.group.order();
    let mut out = vec![vec![0; n * m.cols]; n * m.rows];
    for i in 0..m.rows {
        for j in 0..m.cols {
            let block = element_rep(m.entry(i, j), &m.group);
            for (h, row) in block.into_iter().enumerate() {
                out[i * n + h][j * n..(j + 1) * n].copy_from_slice(&row);
            }
        }
    }
    out
}

/// Each entry replaced by its coefficient sum mod `p`.
pub fn augmentation(m: &GroupRingMatrix) -> Vec<Vec<u64>> {
    (0..m.rows)
        .map(|i| {
            (0..m.cols)
                .map(|j| m.entry(i, j).iter().sum::<u64>() % m.prime)
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimCheck {
    pub holds: bool,
    /// `dim_𝔽p im(α)`.
    pub lhs: usize,
    /// `|H| · dim_𝔽p im(ᾱ)`.
    pub rhs: usize,
}

fn dims(m: &GroupRingMatrix) -> DimCheck {
    let lhs = modp::rank(regular_rep(m), m.prime);
    let rhs = m.group.order() * modp::rank(augmentation(m), m.prime);
    DimCheck {
        holds: lhs >= rhs,
        lhs,
        rhs,
    }
}

/// Both sides of the dimension inequality for a matrix over a `p`-group.
pub fn check_dim_inequality(group: &PGroupTable, m: &GroupRingMatrix) -> Result<DimCheck> {
    if m.group != group.table || m.prime != group.prime {
        return Err(Error::Precondition(format!(
            "matrix is over F_{}[{}], expected F_{}[{}]",
            m.prime, m.group.name, group.prime, group.table.name
        )));
    }
    Ok(dims(m))
}

/// The same comparison with no restriction on the group or characteristic.
pub fn necessity_demo(m: &GroupRingMatrix) -> DimCheck {
    dims(m)
}

/// A catalogued example, including cases outside the `p`-group hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoEntry {
    pub name: String,
    pub group: String,
    pub prime: u64,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<Vec<u64>>>,
    pub expected: DimCheck,
}

impl DemoEntry {
    pub fn matrix(&self) -> Result<GroupRingMatrix> {
        GroupRingMatrix::try_from(MatrixRecord {
            group: GroupTable::named(&self.group)?,
            prime: self.prime,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.clone(),
        })
    }
}

const DEMO_CATALOG: &str = include_str!("../data/groupring_demos.json");

pub fn demo_catalog() -> Vec<DemoEntry> {
    serde_json::from_str(DEMO_CATALOG).expect("bundled demo catalog is valid")
}

/// Groups and primes of the default randomized suite.
pub const DEFAULT_SUITE: &[(&str, u64)] = &[
    ("C2", 2),
    ("C4", 2),
    ("C2xC2", 2),
    ("D4", 2),
    ("Q8", 2),
    ("C3", 3),
    ("C9", 3),
    ("C3xC3", 3),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteGroupResult {
    pub group: String,
    pub prime: u64,
    pub checked: usize,
    pub violations: usize,
    pub equality_cases: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoResult {
    pub name: String,
    pub result: DimCheck,
    pub matches_catalog: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub per_group: usize,
    pub groups: Vec<SuiteGroupResult>,
    pub demos: Vec<DemoResult>,
}

impl SuiteReport {
    pub fn violations(&self) -> usize {
        self.groups.iter().map(|g| g.violations).sum()
    }
}

/// Random matrices of shape at most `3 × 3` for every group of `suite`, plus the demo catalog.
pub fn run_suite(suite: &[(&str, u64)], per_group: usize, seed: u64) -> Result<SuiteReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::new();
    for &(name, p) in suite {
        let h = PGroupTable::new(GroupTable::named(name)?, p)?;
        let mut result = SuiteGroupResult {
            group: name.to_string(),
            prime: p,
            checked: 0,
            violations: 0,
            equality_cases: 0,
        };
        for _ in 0..per_group {
            let (r, c) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let m = GroupRingMatrix::random(h.table(), p, r, c, &mut rng);
            let check = check_dim_inequality(&h, &m)?;
            result.checked += 1;
            result.violations += usize::from(!check.holds);
            result.equality_cases += usize::from(check.lhs == check.rhs);
        }
        groups.push(result);
    }
    let demos = demo_catalog()
        .into_iter()
        .map(|d| {
            let result = necessity_demo(&d.matrix()?);
            Ok(DemoResult {
                matches_catalog: result == d.expected,
                name: d.name,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport {
        seed,
        per_group,
        groups,
        demos,
    })
}
