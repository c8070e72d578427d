//! Seeded search for commutator words giving a `C′(1/6)` presentation
//! `⟨x, y, z | x^p u⁻¹, y^q v⁻¹, z^q w⁻¹⟩`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentations::{small_cancellation_check, Presentation};
use crate::rational::Exact;
use crate::words::{is_prime, Alphabet, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SmallCancellationSearch {
    Found {
        u: Word,
        v: Word,
        w: Word,
        presentation: Presentation,
        worst_piece_ratio: Exact,
        attempts: usize,
    },
    Unknown {
        best_ratio: Exact,
        attempts: usize,
    },
}

/// Random cyclically reduced word of exactly `len` letters with zero
/// exponent sums, drawn from a balanced multiset of letters while avoiding
/// cancellation. `None` if the draw gets stuck.
fn balanced_word(rng: &mut ChaCha8Rng, gens: usize, len: usize) -> Option<Word> {
    let mut pool = Vec::with_capacity(len);
    for _ in 0..len / 2 {
        let g = rng.gen_range(1..=gens as i32);
        pool.push(g);
        pool.push(-g);
    }
    let mut letters: Vec<i32> = Vec::with_capacity(len);
    while !pool.is_empty() {
        let last = letters.last().copied();
        let allowed: Vec<usize> = (0..pool.len()).filter(|&i| Some(-pool[i]) != last).collect();
        let &i = allowed.choose(rng)?;
        letters.push(pool.swap_remove(i));
    }
    let w = Word::from_letters(letters);
    (w.len() == len && w.is_cyclically_reduced()).then_some(w)
}

/// Draws triples of balanced words, lengthening them every few failures,
/// until the presentation passes `C′(1/6)` or `budget` triples were tried.
pub fn find_small_cancellation_words(
    p: u64,
    q: u64,
    seed: u64,
    min_length: usize,
    budget: usize,
) -> Result<SmallCancellationSearch> {
    for n in [p, q] {
        if !is_prime(n) {
            return Err(Error::Domain(format!("{n} is not prime")));
        }
    }
    if min_length < 24 {
        return Err(Error::Precondition("min_length must be at least 24".into()));
    }
    let alphabet = Alphabet::new(["x", "y", "z"])?;
    let lambda = BigRational::new(BigInt::from(1), BigInt::from(6));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = BigRational::from_integer(BigInt::from(1));
    let mut len = min_length + min_length % 2;
    let mut attempts = 0;
    while attempts < budget {
        attempts += 1;
        if attempts % 8 == 0 {
            len += 2;
        }
        let words: Option<Vec<Word>> = (0..3).map(|_| balanced_word(&mut rng, 3, len)).collect();
        let Some(words) = words else { continue };
        let powers = [p, q, q];
        let relators = words
            .iter()
            .enumerate()
            .map(|(i, u)| {
                Word::from_letters([i as i32 + 1])
                    .pow(powers[i] as i64)
                    .multiply(&u.inverse())
            })
            .collect();
        let presentation = Presentation::new(alphabet.clone(), relators)?;
        let report = small_cancellation_check(&presentation, &lambda);
        if report.satisfied {
            let [u, v, w]: [Word; 3] = words.try_into().unwrap();
            return Ok(SmallCancellationSearch::Found {
                u,
                v,
                w,
                presentation,
                worst_piece_ratio: report.worst_piece_ratio,
                attempts,
            });
        }
        if report.worst_piece_ratio.value() < &best {
            best = report.worst_piece_ratio.value().clone();
        }
    }
    Ok(SmallCancellationSearch::Unknown {
        best_ratio: Exact(best),
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_is_deterministic_and_sound() {
        let a = find_small_cancellation_words(2, 3, 11, 24, 400).unwrap();
        let b = find_small_cancellation_words(2, 3, 11, 24, 400).unwrap();
        assert_eq!(a, b);
        match a {
            SmallCancellationSearch::Found {
                u, v, w, presentation, ..
            } => {
                for word in [&u, &v, &w] {
                    assert_eq!(word.exponent_sums(3), vec![0, 0, 0]);
                    assert!(word.len() >= 24);
                }
                let lambda = BigRational::new(1.into(), 6.into());
                assert!(small_cancellation_check(&presentation, &lambda).satisfied);
            }
            SmallCancellationSearch::Unknown { .. } => panic!("no words found"),
        }
    }

    #[test]
    fn tiny_budget_reports_unknown() {
        match find_small_cancellation_words(2, 3, 1, 24, 1).unwrap() {
            SmallCancellationSearch::Unknown { attempts, .. } => assert_eq!(attempts, 1),
            SmallCancellationSearch::Found { .. } => {}
        }
        assert!(find_small_cancellation_words(2, 3, 1, 10, 5).is_err());
    }
}
