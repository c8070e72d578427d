//! Descending chains of finite-index normal subgroups and their Betti reports.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::{invariants_of_relations, AbelianInvariants, IntMatrix};
use crate::presentations::{Presentation, PresentationRecord};
use crate::quotients::{self, FiniteQuotientMap, QuotientRecord, SchreierSystem, Target};
use crate::rational::Exact;
use crate::words::is_prime;

/// Default bound on `rows` and `cols` of a relation matrix handed to SNF.
pub const DEFAULT_MATRIX_BUDGET: u64 = 4000;

/// How a chain was (or should be) built.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainSpec {
    /// Preimages of `n_i ℤ` under `g ↦ weights[g]`.
    Cyclic { weights: Vec<i64>, moduli: Vec<u64> },
    /// `G_{i+1} = [G_i, G_i] G_i^p`.
    DerivedP { p: u64, depth: usize },
}

/// Why a chain stopped before the requested depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub after_level: usize,
    pub reason: TruncationReason,
    /// What the next level would need (an index or a matrix shape), when known.
    pub required: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationReason {
    IndexBudget,
    /// The next level's relation matrix exceeds the matrix budget.
    MatrixBudget,
    /// The next step has the same kernel, so the series is constant from here.
    Stabilized,
}

#[derive(Clone, Debug)]
pub struct Chain {
    base: Presentation,
    levels: Vec<FiniteQuotientMap>,
    nesting: Vec<Vec<usize>>,
    truncation: Option<Truncation>,
}

/// Serialized chain: presentation, level quotients and truncation marker.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRecord {
    pub presentation: PresentationRecord,
    pub levels: Vec<QuotientRecord>,
    pub truncation: Option<Truncation>,
}

impl Chain {
    /// Validates nesting and index divisibility. `levels[0]` must be trivial.
    pub fn new(base: Presentation, levels: Vec<FiniteQuotientMap>, truncation: Option<Truncation>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::Precondition("a chain needs at least level 0".into()));
        };
        if first.order() != 1 {
            return Err(Error::Precondition("level 0 must be the trivial quotient".into()));
        }
        let mut nesting = Vec::with_capacity(levels.len().saturating_sub(1));
        for (i, q) in levels.iter().enumerate() {
            q.check_relators(&base)?;
            if i == 0 {
                continue;
            }
            let prev = &levels[i - 1];
            if q.order() % prev.order() != 0 {
                return Err(Error::Precondition(format!(
                    "index {} at level {} does not divide index {} at level {}",
                    prev.order(),
                    i - 1,
                    q.order(),
                    i
                )));
            }
            let map = q.factoring_map(prev).ok_or_else(|| {
                Error::Precondition(format!(
                    "kernel of level {i} is not contained in kernel of level {}",
                    i - 1
                ))
            })?;
            nesting.push(map);
        }
        Ok(Chain {
            base,
            levels,
            nesting,
            truncation,
        })
    }

    pub fn build(base: &Presentation, spec: &ChainSpec, index_budget: u64) -> Result<Self> {
        match spec {
            ChainSpec::Cyclic { weights, moduli } => cyclic_chain(base, weights, moduli, index_budget),
            ChainSpec::DerivedP { p, depth } => derived_p_series(base, *p, *depth, index_budget),
        }
    }

    pub fn base(&self) -> &Presentation {
        &self.base
    }

    pub fn levels(&self) -> &[FiniteQuotientMap] {
        &self.levels
    }

    pub fn indices(&self) -> Vec<u64> {
        self.levels.iter().map(|q| q.order() as u64).collect()
    }

    /// Factoring map from level `i + 1` onto level `i`.
    pub fn nesting_map(&self, i: usize) -> &[usize] {
        &self.nesting[i]
    }

    pub fn truncation(&self) -> Option<&Truncation> {
        self.truncation.as_ref()
    }

    pub fn is_p_chain(&self, p: u64) -> bool {
        self.levels.iter().all(|q| q.is_p_power_index(p))
    }

    pub fn to_record(&self) -> ChainRecord {
        ChainRecord {
            presentation: self.base.to_record(),
            levels: self.levels.iter().map(FiniteQuotientMap::to_record).collect(),
            truncation: self.truncation.clone(),
        }
    }

    pub fn from_record(record: &ChainRecord) -> Result<Self> {
        let base = Presentation::try_from(record.presentation.clone())?;
        let levels = record
            .levels
            .iter()
            .map(|r| FiniteQuotientMap::from_record(&base, r))
            .collect::<Result<Vec<_>>>()?;
        Chain::new(base, levels, record.truncation.clone())
    }
}

/// Chain of preimages of `n_i ℤ` under the weight homomorphism `F(X) → ℤ`.
pub fn cyclic_chain(base: &Presentation, weights: &[i64], moduli: &[u64], index_budget: u64) -> Result<Chain> {
    if weights.len() != base.generators() {
        return Err(Error::AlphabetMismatch(format!(
            "{} weights for {} generators",
            weights.len(),
            base.generators()
        )));
    }
    for (i, r) in base.relators().iter().enumerate() {
        let sums = r.exponent_sums(base.generators());
        if sums.iter().zip(weights).map(|(s, w)| s * w).sum::<i64>() != 0 {
            return Err(Error::NotAHomomorphism {
                relator: base.format_relator(i),
            });
        }
    }
    for pair in moduli.windows(2) {
        if pair[0] == 0 || pair[1] % pair[0] != 0 {
            return Err(Error::Precondition(format!(
                "moduli {} and {} do not divide",
                pair[0], pair[1]
            )));
        }
    }
    let mut levels = vec![FiniteQuotientMap::trivial(base.generators())];
    let mut truncation = None;
    for &n in moduli {
        let target = Target::Cyclic {
            n,
            images: weights.to_vec(),
        };
        match quotients::quotient_from_images(base, target, index_budget) {
            Ok(q) => levels.push(q),
            Err(Error::ResourceLimit { required, .. }) => {
                truncation = Some(Truncation {
                    after_level: levels.len() - 1,
                    reason: TruncationReason::IndexBudget,
                    required: Some(required),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Chain::new(base.clone(), levels, truncation)
}

/// Derived `p`-series to `depth` steps, stopping early at the index budget
/// or when the series becomes constant.
pub fn derived_p_series(base: &Presentation, p: u64, depth: usize, index_budget: u64) -> Result<Chain> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let mut levels = vec![FiniteQuotientMap::trivial(base.generators())];
    let mut truncation = None;
    for _ in 0..depth {
        let last = levels.last().unwrap();
        match quotients::derived_step(base, last, p, 1, index_budget) {
            Ok(next) if next.order() == last.order() => {
                truncation = Some(Truncation {
                    after_level: levels.len() - 1,
                    reason: TruncationReason::Stabilized,
                    required: None,
                });
                break;
            }
            Ok(next) => levels.push(next),
            Err(Error::ResourceLimit { required, .. }) => {
                truncation = Some(Truncation {
                    after_level: levels.len() - 1,
                    reason: TruncationReason::IndexBudget,
                    required: Some(required),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Chain::new(base.clone(), levels, truncation)
}

/// Known value of the first `L²`-Betti number, if the caller has one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub b1_l2: Option<Exact>,
}

/// Homology of a single kernel, computed from its Reidemeister–Schreier presentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelHomology {
    pub index: u64,
    pub schreier_generators: usize,
    pub invariants: AbelianInvariants,
}

/// Abelian invariants of `ker(q)` for the requested primes.
pub fn level_homology(
    base: &Presentation,
    q: &FiniteQuotientMap,
    primes: &[u64],
    matrix_budget: u64,
) -> Result<LevelHomology> {
    q.check_relators(base)?;
    let system = SchreierSystem::new(q);
    let cols = system.generator_count();
    let rows = q.order() * base.relators().len();
    if rows as u64 > matrix_budget || cols as u64 > matrix_budget {
        return Err(Error::resource(
            "relation matrix",
            format!("{rows}x{cols}"),
            matrix_budget,
        ));
    }
    let relations = quotients::rs_relation_rows(base, q, &system);
    let matrix = IntMatrix::from_rows(cols, &relations);
    Ok(LevelHomology {
        index: q.order() as u64,
        schreier_generators: cols,
        invariants: invariants_of_relations(&matrix, primes),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratios {
    pub b1_rational: Exact,
    pub b1_mod: BTreeMap<u64, Exact>,
    pub d_h1: Exact,
    pub rank_upper: Exact,
}

/// Normalized value minus the reference constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceGap {
    pub b1_rational: Exact,
    pub b1_mod: BTreeMap<u64, Exact>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRow {
    pub i: usize,
    pub index: u64,
    pub b1_rational: usize,
    pub b1_mod: BTreeMap<u64, usize>,
    pub d_h1: usize,
    pub rank_upper: usize,
    pub rank_lower: usize,
    pub ratios: Ratios,
    pub rg_upper: Exact,
    /// Per prime: `b₁/n < b₁(𝔽_p)/n < d(H₁)/n < rank_upper/n`.
    pub strictly_increasing: BTreeMap<u64, bool>,
    pub ref_gap: Option<ReferenceGap>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub presentation: String,
    pub primes: Vec<u64>,
    pub reference: ReferenceConstants,
    pub rows: Vec<LevelRow>,
    pub truncation: Option<Truncation>,
    pub note: String,
}

fn ratio(a: usize, n: u64) -> Exact {
    Exact::new(BigInt::from(a), BigInt::from(n))
}

fn row_from(i: usize, h: &LevelHomology, primes: &[u64], refs: &ReferenceConstants) -> LevelRow {
    let n = h.index;
    let inv = &h.invariants;
    let b1_mod: BTreeMap<u64, usize> = primes.iter().map(|&p| (p, inv.betti_mod[&p])).collect();
    let rank_lower = b1_mod.values().copied().chain([inv.free_rank]).max().unwrap_or(0);
    let ratios = Ratios {
        b1_rational: ratio(inv.free_rank, n),
        b1_mod: b1_mod.iter().map(|(&p, &b)| (p, ratio(b, n))).collect(),
        d_h1: ratio(inv.d_h1, n),
        rank_upper: ratio(h.schreier_generators, n),
    };
    let strictly_increasing = b1_mod
        .iter()
        .map(|(&p, &b)| (p, inv.free_rank < b && b < inv.d_h1 && inv.d_h1 < h.schreier_generators))
        .collect();
    let ref_gap = refs.b1_l2.as_ref().map(|l2| ReferenceGap {
        b1_rational: Exact(ratios.b1_rational.value() - l2.value()),
        b1_mod: ratios
            .b1_mod
            .iter()
            .map(|(&p, r)| (p, Exact(r.value() - l2.value())))
            .collect(),
    });
    LevelRow {
        i,
        index: n,
        b1_rational: inv.free_rank,
        b1_mod,
        d_h1: inv.d_h1,
        rank_upper: h.schreier_generators,
        rank_lower,
        rg_upper: Exact::new(BigInt::from(h.schreier_generators) - 1, BigInt::from(n)),
        ratios,
        strictly_increasing,
        ref_gap,
    }
}

fn normalize_primes(primes: &[u64]) -> Result<Vec<u64>> {
    if let Some(p) = primes.iter().find(|&&p| !is_prime(p)) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    let mut primes = primes.to_vec();
    primes.sort_unstable();
    primes.dedup();
    Ok(primes)
}

fn assemble(
    chain: &Chain,
    primes: Vec<u64>,
    refs: &ReferenceConstants,
    rows: Vec<LevelRow>,
    truncation: Option<Truncation>,
) -> ChainReport {
    ChainReport {
        presentation: chain.base.to_string(),
        primes,
        reference: refs.clone(),
        rows,
        truncation,
        note: "computed finite prefix only; trivial intersection of the full chain is not checked (for a derived p-series it holds exactly when G is residually p)".into(),
    }
}

/// Per-level Betti numbers, generator bounds and normalized ratios.
pub fn report(chain: &Chain, primes: &[u64], refs: &ReferenceConstants, matrix_budget: u64) -> Result<ChainReport> {
    let primes = normalize_primes(primes)?;
    let rows = chain
        .levels
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let h = level_homology(&chain.base, q, &primes, matrix_budget)?;
            Ok(row_from(i, &h, &primes, refs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(chain, primes, refs, rows, chain.truncation.clone()))
}

/// Like [`report`], but a level over the matrix budget ends the report
/// with a truncation marker instead of an error.
pub fn report_prefix(
    chain: &Chain,
    primes: &[u64],
    refs: &ReferenceConstants,
    matrix_budget: u64,
) -> Result<ChainReport> {
    let primes = normalize_primes(primes)?;
    let mut rows = Vec::new();
    let mut truncation = chain.truncation.clone();
    for (i, q) in chain.levels.iter().enumerate() {
        match level_homology(&chain.base, q, &primes, matrix_budget) {
            Ok(h) => rows.push(row_from(i, &h, &primes, refs)),
            Err(Error::ResourceLimit { required, .. }) if i > 0 => {
                truncation = Some(Truncation {
                    after_level: i - 1,
                    reason: TruncationReason::MatrixBudget,
                    required: Some(required),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(assemble(chain, primes, refs, rows, truncation))
}

impl ChainReport {
    /// CSV rendering; decimal columns have 12 fractional digits and are display-only.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["i".to_string(), "index".into(), "b1_rational".into()];
        for p in &self.primes {
            header.push(format!("b1_mod_{p}"));
        }
        header.extend(["d_h1", "rank_upper", "rank_lower", "b1_rational_ratio"].map(String::from));
        for p in &self.primes {
            header.push(format!("b1_mod_{p}_ratio"));
        }
        header.extend(["d_h1_ratio", "rank_upper_ratio", "rg_upper"].map(String::from));
        let mut out = format!("# decimal columns are display-only\n{}\n", header.join(","));
        for r in &self.rows {
            let mut cells = vec![r.i.to_string(), r.index.to_string(), r.b1_rational.to_string()];
            cells.extend(r.b1_mod.values().map(|b| b.to_string()));
            cells.extend([r.d_h1, r.rank_upper, r.rank_lower].map(|v| v.to_string()));
            cells.push(r.ratios.b1_rational.to_decimal(12));
            cells.extend(r.ratios.b1_mod.values().map(|x| x.to_decimal(12)));
            cells.push(r.ratios.d_h1.to_decimal(12));
            cells.push(r.ratios.rank_upper.to_decimal(12));
            cells.push(r.rg_upper.to_decimal(12));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        if let Some(t) = &self.truncation {
            out.push_str(&format!("# truncated after level {} ({:?})\n", t.after_level, t.reason));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub monotone: bool,
    pub first_violation: Option<usize>,
}

/// `b₁(G_i; 𝔽_p) / [G : G_i]` is non-increasing along a `p`-chain.
pub fn check_fp_monotone(report: &ChainReport, p: u64) -> Result<MonotoneCheck> {
    if !report.primes.contains(&p) {
        return Err(Error::Domain(format!("report has no data for p = {p}")));
    }
    if let Some(row) = report.rows.iter().find(|r| !is_p_power(r.index, p)) {
        return Err(Error::Domain(format!(
            "index {} at level {} is not a power of {p}",
            row.index, row.i
        )));
    }
    let first_violation = report
        .rows
        .windows(2)
        .find(|w| w[1].ratios.b1_mod[&p] > w[0].ratios.b1_mod[&p])
        .map(|w| w[1].i);
    Ok(MonotoneCheck {
        monotone: first_violation.is_none(),
        first_violation,
    })
}

fn is_p_power(mut n: u64, p: u64) -> bool {
    while n > 1 && n.is_multiple_of(p) {
        n /= p;
    }
    n == 1
}

/// `b₁(H; 𝔽_p) − 1 ≤ [G : H] (b₁(G; 𝔽_p) − 1)` for `H` normal of index `[G:H]`.
pub fn index_inequality_holds(b1_g: usize, b1_h: usize, index: u64) -> bool {
    let lhs = BigRational::from_integer(BigInt::from(b1_h)) - BigRational::one();
    let rhs = BigRational::from_integer(BigInt::from(index))
        * (BigRational::from_integer(BigInt::from(b1_g)) - BigRational::one());
    lhs <= rhs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub level: usize,
    pub relative_index: u64,
    pub lhs: i64,
    pub rhs: i64,
    pub holds: bool,
}

/// The index inequality between every pair of consecutive levels.
pub fn check_index_inequality(report: &ChainReport, p: u64) -> Result<Vec<InequalityCheck>> {
    if !report.primes.contains(&p) {
        return Err(Error::Domain(format!("report has no data for p = {p}")));
    }
    Ok(report
        .rows
        .windows(2)
        .map(|w| {
            let k = w[1].index / w[0].index;
            let (bg, bh) = (w[0].b1_mod[&p], w[1].b1_mod[&p]);
            let lhs = bh as i64 - 1;
            let rhs = k as i64 * (bg as i64 - 1);
            InequalityCheck {
                level: w[1].i,
                relative_index: k,
                lhs,
                rhs,
                holds: index_inequality_holds(bg, bh, k),
            }
        })
        .collect())
}
