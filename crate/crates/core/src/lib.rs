//! Exact computations around the first `L²`-Betti number of finitely
//! presented groups: normalized Betti numbers over `ℚ` and `𝔽_p` along
//! finite-index normal chains, rank-gradient bounds, `p`-deficiency, and
//! certificates for the constructions built from them.

pub mod chains;
pub mod constructions;
pub mod error;
pub mod groupring;
pub mod homology;
pub mod modp;
pub mod presentations;
pub mod quotients;
pub mod rational;
pub mod words;

pub use error::{Error, Result};
pub use presentations::Presentation;
pub use quotients::FiniteQuotientMap;
pub use rational::Exact;
pub use words::{Alphabet, Word};
