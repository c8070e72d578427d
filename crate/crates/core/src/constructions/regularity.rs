//! Semi-decision of `p`-regularity through derived `p`-series witnesses.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::Presentation;
use crate::quotients::{self, puchta_presentation, FiniteQuotientMap, PuchtaCertificate, SubgroupPresentation};
use crate::rational::Exact;
use crate::words::{is_prime, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityStatus {
    Certified,
    Unknown,
}

/// The `p`-th root of a relator and its order in the witness quotient.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survivor {
    pub relator: usize,
    pub root: Word,
    pub root_order: u64,
}

/// One quotient tried by the witness search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchAttempt {
    pub level: usize,
    pub exponent: u32,
    /// Index reached, or the resource message when over budget.
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub status: RegularityStatus,
    pub prime: u64,
    pub witness: Option<FiniteQuotientMap>,
    pub witness_level: Option<usize>,
    pub witness_exponent: Option<u32>,
    pub survivors: Vec<Survivor>,
    pub attempts: Vec<SearchAttempt>,
}

impl RegularityCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == RegularityStatus::Certified
    }

    /// Replays the certificate against `presentation`: witness is a `p`-power
    /// quotient and every listed root acts non-trivially with the recorded order.
    pub fn recheck(&self, presentation: &Presentation) -> Result<bool> {
        let Some(w) = &self.witness else {
            return Ok(false);
        };
        w.check_relators(presentation)?;
        if !w.is_p_power_index(self.prime) {
            return Ok(false);
        }
        let roots = p_roots(presentation, self.prime)?;
        if roots.len() != self.survivors.len() {
            return Ok(false);
        }
        Ok(roots.iter().zip(&self.survivors).all(|((i, root), s)| {
            *i == s.relator && *root == s.root && !w.membership(root) && w.element_order(root) == s.root_order
        }))
    }
}

/// `(relator index, √[p]{r})` for every relator that is a proper `p`-th power.
fn p_roots(presentation: &Presentation, p: u64) -> Result<Vec<(usize, Word)>> {
    let mut out = Vec::new();
    for (i, r) in presentation.relators().iter().enumerate() {
        let d = r.p_root_decomposition(p)?;
        if d.exponent >= 1 {
            out.push((i, d.root(1)));
        }
    }
    Ok(out)
}

fn survivors_in(q: &FiniteQuotientMap, roots: &[(usize, Word)]) -> Option<Vec<Survivor>> {
    roots
        .iter()
        .map(|(i, root)| {
            (!q.membership(root)).then(|| Survivor {
                relator: *i,
                root: root.clone(),
                root_order: q.element_order(root),
            })
        })
        .collect()
}

/// Searches derived `p`-series levels of `presentation` for a quotient in
/// which every `√[p]{r}` survives. At each level `k ≤ depth_budget` the
/// steps `[G_{k-1}, G_{k-1}] G_{k-1}^(p^e)` for `e = 1..=max e_p(r)` are
/// tried in order; the series itself advances with `e = 1`.
pub fn is_p_regular(
    presentation: &Presentation,
    p: u64,
    depth_budget: usize,
    index_budget: u64,
) -> Result<RegularityCertificate> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    let roots = p_roots(presentation, p)?;
    let mut cert = RegularityCertificate {
        status: RegularityStatus::Unknown,
        prime: p,
        witness: None,
        witness_level: None,
        witness_exponent: None,
        survivors: Vec::new(),
        attempts: Vec::new(),
    };
    let mut level = FiniteQuotientMap::trivial(presentation.generators());
    if roots.is_empty() {
        cert.status = RegularityStatus::Certified;
        cert.witness = Some(level);
        cert.witness_level = Some(0);
        return Ok(cert);
    }
    let max_e = presentation
        .relators()
        .iter()
        .map(|r| r.p_exponent(p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1)
        .max(1);
    for k in 1..=depth_budget {
        let mut next_level = None;
        for e in 1..=max_e {
            match quotients::derived_step(presentation, &level, p, e, index_budget) {
                Ok(q) => {
                    cert.attempts.push(SearchAttempt {
                        level: k,
                        exponent: e,
                        outcome: q.order().to_string(),
                    });
                    if let Some(survivors) = survivors_in(&q, &roots) {
                        cert.status = RegularityStatus::Certified;
                        cert.survivors = survivors;
                        cert.witness = Some(q);
                        cert.witness_level = Some(k);
                        cert.witness_exponent = Some(e);
                        return Ok(cert);
                    }
                    if e == 1 {
                        next_level = Some(q);
                    }
                }
                Err(Error::ResourceLimit { required, .. }) => {
                    cert.attempts.push(SearchAttempt {
                        level: k,
                        exponent: e,
                        outcome: format!("over budget: {required}"),
                    });
                    break;
                }
                Err(err) => return Err(err),
            }
        }
        match next_level {
            Some(q) if q.order() > level.order() => level = q,
            _ => break,
        }
    }
    Ok(cert)
}

#[derive(Clone, Debug)]
pub struct AdjoinResult {
    pub presentation: Presentation,
    pub n: u32,
    /// Smallest `N` with `f^(p^N)` in the old witness kernel.
    pub lower_bound: u32,
    pub certificate: RegularityCertificate,
}

/// Adjoins `f^(p^n)` for the first `n ≥ max(start_n, N)` whose extended
/// presentation is certified `p`-regular, trying `extra_tries` further values.
#[allow(clippy::too_many_arguments)]
pub fn adjoin_power(
    presentation: &Presentation,
    f: &Word,
    p: u64,
    start_n: u32,
    cert: &RegularityCertificate,
    depth_budget: usize,
    index_budget: u64,
    extra_tries: u32,
) -> Result<AdjoinResult> {
    let Some(witness) = cert.witness.as_ref().filter(|_| cert.is_certified()) else {
        return Err(Error::Precondition("presentation is not certified p-regular".into()));
    };
    if f.is_identity() {
        return Err(Error::Precondition("cannot adjoin a power of the identity".into()));
    }
    presentation.alphabet().check_word(f)?;
    let order = witness.element_order(f);
    let lower_bound = log_p(order, p);
    let first = start_n.max(lower_bound);
    let mut last = None;
    for n in first..=first + extra_tries {
        let extended = presentation.with_relator(f.pow(p.pow(n) as i64))?;
        let certificate = is_p_regular(&extended, p, depth_budget, index_budget)?;
        let done = certificate.is_certified();
        last = Some(AdjoinResult {
            presentation: extended,
            n,
            lower_bound,
            certificate,
        });
        if done {
            break;
        }
    }
    Ok(last.expect("at least one exponent is tried"))
}

fn log_p(mut n: u64, p: u64) -> u32 {
    let mut k = 0;
    while n > 1 {
        n /= p;
        k += 1;
    }
    k
}

/// `p`-power-index normal subgroup with its relator-count presentation.
#[derive(Clone, Debug)]
pub struct PregularSubgroup {
    pub quotient: FiniteQuotientMap,
    pub presentation: SubgroupPresentation,
    pub certificate: PuchtaCertificate,
    pub deficiency: i64,
    /// `(def(H) − 1) / [G : H]`.
    pub normalized: Exact,
    pub p_deficiency: Exact,
    pub bound_holds: bool,
}

/// Kernel of the certificate's witness, presented with
/// `[G:H] / p^(e_p(r,F))` conjugates of each relator.
pub fn pregular_subgroup(
    presentation: &Presentation,
    p: u64,
    cert: &RegularityCertificate,
) -> Result<PregularSubgroup> {
    let Some(witness) = cert.witness.as_ref().filter(|_| cert.is_certified()) else {
        return Err(Error::Precondition("certificate is not Certified".into()));
    };
    let (sub, pc) = puchta_presentation(presentation, witness, p)?;
    let deficiency = sub.presentation.deficiency();
    let normalized = BigRational::new(BigInt::from(deficiency - 1), BigInt::from(pc.index));
    let def_p = presentation.p_deficiency(p)?;
    Ok(PregularSubgroup {
        quotient: witness.clone(),
        presentation: sub,
        certificate: pc,
        deficiency,
        bound_holds: normalized >= def_p,
        normalized: Exact(normalized),
        p_deficiency: Exact(def_p),
    })
}

/// Relator counts of the relator-count presentation agree with `[G:H] / p^(e_outer − e_inner)`.
pub fn puchta_count_check(presentation: &Presentation, q: &FiniteQuotientMap, p: u64) -> Result<bool> {
    let (_, cert) = puchta_presentation(presentation, q, p)?;
    for entry in &cert.entries {
        let r = &presentation.relators()[entry.relator];
        let e_inner = quotients::e_p_in_subgroup(q, r, p)?;
        let expected = cert.index / p.pow(entry.e_outer - e_inner);
        if entry.e_inner != e_inner || entry.count != expected {
            return Ok(false);
        }
    }
    Ok(true)
}
