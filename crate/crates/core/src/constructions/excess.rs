//! Lowering `b₁` of a finite-index subgroup by adjoining high `p`-powers of
//! commutator-side basis elements.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::regularity::{adjoin_power, RegularityCertificate};
use crate::error::{Error, Result};
use crate::homology::{rank_rational, IntMatrix};
use crate::modp;
use crate::presentations::Presentation;
use crate::quotients::{rs_relation_rows, FiniteQuotientMap, SchreierSystem};
use crate::rational::Exact;
use crate::words::{is_prime, Word};

/// Field used to measure `b₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    Rational,
    Prime(u64),
}

impl FieldMode {
    fn rank(&self, rows: &[Vec<i64>], cols: usize) -> usize {
        match *self {
            FieldMode::Rational => rank_rational(&IntMatrix::from_rows(cols, rows)),
            FieldMode::Prime(q) => modp::rank(
                rows.iter()
                    .map(|r| r.iter().map(|&v| modp::reduce_i64(v, q)).collect())
                    .collect(),
                q,
            ),
        }
    }
}

/// Splits a free basis `Y` of `H ≤ K` by Nielsen moves `y_i ← y_i · y_k^(−m)`
/// so that the `K`-abelianized rows are in echelon form.
///
/// Returns `(Y₁, Y₂)`: the rows of `Y₁` are non-zero and number at most
/// `d(K)`; every element of `Y₂` lies in `[K, K]`.
pub fn nielsen_split(mut words: Vec<Word>, mut rows: Vec<Vec<i64>>) -> (Vec<Word>, Vec<Word>) {
    let cols = rows.first().map_or(0, Vec::len);
    let mut pivot = 0;
    for col in 0..cols {
        loop {
            let nonzero: Vec<usize> = (pivot..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            let Some(&k) = nonzero.iter().min_by_key(|&&r| (rows[r][col].abs(), r)) else {
                break;
            };
            if nonzero.len() == 1 {
                rows.swap(pivot, k);
                words.swap(pivot, k);
                pivot += 1;
                break;
            }
            for &r in nonzero.iter().filter(|&&r| r != k) {
                let m = rows[r][col] / rows[k][col];
                if m == 0 {
                    continue;
                }
                let pivot_row = rows[k].clone();
                for (x, y) in rows[r].iter_mut().zip(&pivot_row) {
                    *x -= m * y;
                }
                words[r] = words[r].multiply(&words[k].pow(-m));
            }
        }
    }
    let y2 = words.split_off(pivot);
    (words, y2)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjunctionStep {
    pub f: Word,
    pub f_text: String,
    pub n: u32,
    /// `p^(−e_p(f^(p^n), F))`.
    pub weight: Exact,
    pub b1_before: usize,
    pub b1_after: usize,
    pub witness_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub mode: FieldMode,
    /// `d(K) = 1 + [F:K](|X| − 1)`.
    pub d_k: usize,
    pub initial_b1: usize,
    pub final_b1: usize,
    pub delta: Exact,
    pub spent: Exact,
    pub steps: Vec<AdjunctionStep>,
    pub added: Vec<Word>,
    pub presentation: Presentation,
    pub certificate: RegularityCertificate,
    pub complete: bool,
    pub stop_reason: Option<String>,
    pub caveat: Option<String>,
}

/// Smallest `n ≥ 0` with `p^(−(e + n)) < bound`.
fn exponent_below(p: u64, e: u32, bound: &BigRational) -> u32 {
    let mut n = 0;
    let mut power = BigInt::from(p).pow(e);
    while BigRational::new(BigInt::one(), power.clone()) >= *bound {
        power *= p;
        n += 1;
    }
    n
}

/// Adjoins relators `f^(p^n)` with `f ∈ [K, K]` until `b₁(H') ≤ d(K)`, where
/// `H'` is the image of `ker(h_level)` in the extended group, keeping the
/// presentation certified `p`-regular and the spent `p`-deficiency below `delta`.
#[allow(clippy::too_many_arguments)]
pub fn kill_excess_homology(
    presentation: &Presentation,
    cert: &RegularityCertificate,
    k_level: &FiniteQuotientMap,
    h_level: &FiniteQuotientMap,
    delta: &BigRational,
    mode: FieldMode,
    depth_budget: usize,
    index_budget: u64,
) -> Result<ExcessReport> {
    let p = cert.prime;
    if let FieldMode::Prime(q) = mode {
        if !is_prime(q) || q == p {
            return Err(Error::Domain(format!(
                "field prime {q} must be a prime different from {p}"
            )));
        }
    }
    if !cert.is_certified() {
        return Err(Error::Precondition("presentation is not certified p-regular".into()));
    }
    if *delta <= BigRational::zero() {
        return Err(Error::Domain("delta must be positive".into()));
    }
    k_level.check_relators(presentation)?;
    h_level.check_relators(presentation)?;
    if !k_level.is_p_power_index(p) || !h_level.is_p_power_index(p) {
        return Err(Error::Precondition("both levels must have p-power index".into()));
    }
    if h_level.factoring_map(k_level).is_none() {
        return Err(Error::Precondition(
            "kernel of the H level is not contained in the K level".into(),
        ));
    }
    let d = presentation.generators();
    let d_k = 1 + k_level.order() * (d - 1);
    let sys_k = SchreierSystem::new(k_level);
    let sys_h = SchreierSystem::new(h_level);
    let cols = sys_h.generator_count();
    let basis = sys_h.generators().to_vec();
    let k_rows = basis.iter().map(|y| sys_k.rewrite_abelian(k_level, y, 0)).collect();
    let (_, mut y2) = nielsen_split(basis, k_rows);
    y2.sort_by(|a, b| (a.len(), a.letters()).cmp(&(b.len(), b.letters())));

    let mut current = presentation.clone();
    let mut certificate = cert.clone();
    let mut rows = rs_relation_rows(&current, h_level, &sys_h);
    let mut b1 = cols - mode.rank(&rows, cols);
    let mut report = ExcessReport {
        mode,
        d_k,
        initial_b1: b1,
        final_b1: b1,
        delta: Exact(delta.clone()),
        spent: Exact::zero(),
        steps: Vec::new(),
        added: Vec::new(),
        presentation: current.clone(),
        certificate: certificate.clone(),
        complete: b1 <= d_k,
        stop_reason: None,
        caveat: (mode == FieldMode::Rational).then(|| {
            "infinite order of f is certified in the abelianization of the subgroup only; \
             the pro-p hypothesis is replaced by direct re-certification"
                .to_string()
        }),
    };
    while b1 > d_k {
        let remaining = delta - report.spent.value();
        let per_step = remaining / BigRational::from_integer(BigInt::from(b1 - d_k));
        let base_rank = cols - b1;
        let candidate = y2.iter().find(|f| {
            let mut extended = rows.clone();
            extended.push(sys_h.rewrite_abelian(h_level, f, 0));
            mode.rank(&extended, cols) > base_rank
        });
        let Some(f) = candidate.cloned() else {
            report.stop_reason = Some("no element of the commutator-side basis survives".into());
            break;
        };
        let e_f = f.p_exponent(p)?;
        let start = exponent_below(p, e_f, &per_step);
        let adjoined = adjoin_power(&current, &f, p, start, &certificate, depth_budget, index_budget, 2)?;
        if !adjoined.certificate.is_certified() {
            report.stop_reason = Some(format!(
                "re-certification of {}^({p}^n) failed within budget for n = {}..={}",
                current.alphabet().format_word(&f),
                start.max(adjoined.lower_bound),
                adjoined.n
            ));
            break;
        }
        let weight = BigRational::new(BigInt::one(), BigInt::from(p).pow(e_f + adjoined.n));
        current = adjoined.presentation;
        certificate = adjoined.certificate;
        rows = rs_relation_rows(&current, h_level, &sys_h);
        let b1_after = cols - mode.rank(&rows, cols);
        if b1_after >= b1 {
            return Err(Error::InvariantViolation(format!(
                "adjoining a power of a surviving element did not lower b1 ({b1} -> {b1_after})"
            )));
        }
        report.spent = Exact(report.spent.value() + &weight);
        report.steps.push(AdjunctionStep {
            f_text: current.alphabet().format_word(&f),
            f: f.clone(),
            n: adjoined.n,
            weight: Exact(weight),
            b1_before: b1,
            b1_after,
            witness_index: certificate.witness.as_ref().map_or(0, FiniteQuotientMap::order),
        });
        report.added.push(current.relators().last().unwrap().clone());
        b1 = b1_after;
    }
    report.final_b1 = b1;
    report.complete = b1 <= d_k;
    report.presentation = current;
    report.certificate = certificate;
    if report.spent.value() >= delta {
        return Err(Error::InvariantViolation("spent p-deficiency reached delta".into()));
    }
    Ok(report)
}
