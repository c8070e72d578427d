//! Explicit group constructions: the free-product family whose `ℚ`- and
//! `𝔽_p`-approximations differ, small-cancellation variants, `p`-regular
//! presentations and the staged tower with oscillating approximations.

mod driver;
mod excess;
mod regularity;
mod search;
pub mod verify;

pub use driver::{
    default_deltas, tower_driver, ConditionChecks, ConstructionState, DriverParams, LogRecord, StageFailure,
    StageRecord, StateSnapshot,
};
pub use excess::{kill_excess_homology, nielsen_split, AdjunctionStep, ExcessReport, FieldMode};
pub use regularity::{
    adjoin_power, is_p_regular, pregular_subgroup, puchta_count_check, AdjoinResult, PregularSubgroup,
    RegularityCertificate, RegularityStatus, SearchAttempt, Survivor,
};
pub use search::{find_small_cancellation_words, SmallCancellationSearch};

use crate::chains::{cyclic_chain, Chain};
use crate::error::{Error, Result};
use crate::presentations::Presentation;
use crate::words::is_prime;

/// `⟨x, y, z, t | x^p, y^q, z^q⟩ = (ℤ/p ∗ ℤ/q ∗ ℤ/q) ∗ ℤ` and the chain of
/// preimages of `n_i ℤ` under the projection onto the free factor `⟨t⟩`.
pub fn free_product_counterexample(p: u64, q: u64, moduli: &[u64], index_budget: u64) -> Result<(Presentation, Chain)> {
    for n in [p, q] {
        if !is_prime(n) {
            return Err(Error::Domain(format!("{n} is not prime")));
        }
    }
    if p == q {
        return Err(Error::Domain("the two primes must differ".into()));
    }
    let text = format!("< x, y, z, t | x^{p}, y^{q}, z^{q} >");
    let presentation = Presentation::parse(&text)?;
    let chain = cyclic_chain(&presentation, &[0, 0, 0, 1], moduli, index_budget)?;
    Ok((presentation, chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{report, ReferenceConstants, DEFAULT_MATRIX_BUDGET};
    use crate::homology::abelian_invariants;

    #[test]
    fn base_invariants() {
        let (g, _) = free_product_counterexample(2, 3, &[2], 100).unwrap();
        let h = Presentation::parse("< x, y, z | x^2, y^3, z^3 >").unwrap();
        let inv = abelian_invariants(&h, &[2, 3]);
        assert_eq!((inv.free_rank, inv.betti_mod[&2], inv.d_h1), (0, 1, 2));
        assert_eq!(g.generators(), 4);
    }

    #[test]
    fn level_four() {
        let (_, chain) = free_product_counterexample(2, 3, &[2, 4], 100).unwrap();
        let r = report(&chain, &[2], &ReferenceConstants::default(), DEFAULT_MATRIX_BUDGET).unwrap();
        let row = &r.rows[2];
        assert_eq!(
            (row.index, row.b1_rational, row.b1_mod[&2], row.d_h1, row.rank_upper),
            (4, 1, 5, 9, 13)
        );
    }

    #[test]
    fn equal_primes_rejected() {
        assert!(matches!(
            free_product_counterexample(3, 3, &[2], 100),
            Err(Error::Domain(_))
        ));
    }
}
