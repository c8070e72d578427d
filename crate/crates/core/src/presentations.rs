//! Finite presentations `⟨X | R⟩`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::IntMatrix;
use crate::rational::Exact;
use crate::words::{is_prime, Alphabet, Parser, Word};

/// Generators plus a multiset of reduced, non-identity relators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PresentationRecord", into = "PresentationRecord")]
pub struct Presentation {
    alphabet: Alphabet,
    relators: Vec<Word>,
}

/// Structured record form: generator names and relator strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationRecord {
    pub generators: Vec<String>,
    pub relators: Vec<String>,
}

impl Presentation {
    pub fn new(alphabet: Alphabet, relators: Vec<Word>) -> Result<Self> {
        for (i, r) in relators.iter().enumerate() {
            alphabet.check_word(r)?;
            if r.is_identity() {
                return Err(Error::Malformed(format!(
                    "relator {} reduces to the identity; trivial relators are not allowed",
                    i + 1
                )));
            }
        }
        Ok(Presentation { alphabet, relators })
    }

    /// The free group on `names`.
    pub fn free<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        Presentation::new(Alphabet::new(names)?, Vec::new())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parser = Parser::new(text);
        parser.expect(b'<')?;
        let mut names = vec![parser.ident()?];
        while parser.eat(b',') {
            names.push(parser.ident()?);
        }
        let alphabet = Alphabet::new(names).map_err(|e| parser.error(e.to_string()))?;
        parser.expect(b'|')?;
        let mut relators = Vec::new();
        parser.skip_ws();
        if parser.peek() != Some(b'>') {
            loop {
                parser.skip_ws();
                let at = parser.error("");
                let w = parser.word(&alphabet)?;
                if w.is_identity() {
                    let Error::Syntax { line, column, .. } = at else {
                        unreachable!()
                    };
                    return Err(Error::Syntax {
                        line,
                        column,
                        message: "relator reduces to the identity; trivial relators are not allowed".into(),
                    });
                }
                relators.push(w);
                if !parser.eat(b',') {
                    break;
                }
            }
        }
        parser.expect(b'>')?;
        parser.skip_ws();
        if !parser.at_end() {
            return Err(parser.error("unexpected input after `>`"));
        }
        Presentation::new(alphabet, relators)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn generators(&self) -> usize {
        self.alphabet.size()
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    /// A copy with one more relator.
    pub fn with_relator(&self, r: Word) -> Result<Self> {
        let mut relators = self.relators.clone();
        relators.push(r);
        Presentation::new(self.alphabet.clone(), relators)
    }

    pub fn with_relators(&self, extra: impl IntoIterator<Item = Word>) -> Result<Self> {
        let mut relators = self.relators.clone();
        relators.extend(extra);
        Presentation::new(self.alphabet.clone(), relators)
    }

    /// `|X| − |R|`.
    pub fn deficiency(&self) -> i64 {
        self.generators() as i64 - self.relators.len() as i64
    }

    /// `|X| − 1 − Σ_r p^(−e_p(r, F(X)))`, exactly.
    pub fn p_deficiency(&self, p: u64) -> Result<BigRational> {
        if !is_prime(p) {
            return Err(Error::Domain(format!("{p} is not prime")));
        }
        let mut def = BigRational::from_integer(BigInt::from(self.generators() as i64 - 1));
        for r in &self.relators {
            let e = r.p_exponent(p)?;
            def -= BigRational::new(BigInt::from(1), BigInt::from(p).pow(e));
        }
        Ok(def)
    }

    pub fn stats(&self, p: u64) -> Result<PresentationStats> {
        Ok(PresentationStats {
            generators: self.generators(),
            relator_count: self.relators.len(),
            deficiency: self.deficiency(),
            prime: p,
            p_deficiency: Exact(self.p_deficiency(p)?),
        })
    }

    /// `|R| × |X|` matrix of exponent sums.
    pub fn abelianized_relator_matrix(&self) -> IntMatrix {
        let d = self.generators();
        let rows: Vec<Vec<i64>> = self.relators.iter().map(|r| r.exponent_sums(d)).collect();
        IntMatrix::from_rows(d, &rows)
    }

    pub fn format_relator(&self, i: usize) -> String {
        self.alphabet.format_word(&self.relators[i])
    }

    pub fn to_record(&self) -> PresentationRecord {
        self.clone().into()
    }
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rels: Vec<String> = self.relators.iter().map(|r| self.alphabet.format_word(r)).collect();
        if rels.is_empty() {
            write!(f, "< {} | >", self.alphabet.names().join(", "))
        } else {
            write!(f, "< {} | {} >", self.alphabet.names().join(", "), rels.join(", "))
        }
    }
}

impl FromStr for Presentation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Presentation::parse(s)
    }
}

impl TryFrom<PresentationRecord> for Presentation {
    type Error = Error;
    fn try_from(rec: PresentationRecord) -> Result<Self> {
        let alphabet = Alphabet::new(rec.generators)?;
        let relators = rec
            .relators
            .iter()
            .map(|s| alphabet.parse_word(s))
            .collect::<Result<Vec<_>>>()?;
        Presentation::new(alphabet, relators)
    }
}

impl From<Presentation> for PresentationRecord {
    fn from(p: Presentation) -> Self {
        PresentationRecord {
            relators: p.relators.iter().map(|r| p.alphabet.format_word(r)).collect(),
            generators: p.alphabet.names().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationStats {
    pub generators: usize,
    pub relator_count: usize,
    pub deficiency: i64,
    pub prime: u64,
    /// `def_p` of this presentation; a lower bound for the group's `p`-deficiency.
    pub p_deficiency: Exact,
}

/// One element of the symmetrized relator set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetrizedPosition {
    pub relator: usize,
    pub shift: usize,
    pub inverted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceWitness {
    pub first: SymmetrizedPosition,
    pub second: SymmetrizedPosition,
    pub piece: Word,
    /// Length of the cyclic relator the ratio is measured against.
    pub relator_length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallCancellationReport {
    pub lambda: Exact,
    pub satisfied: bool,
    pub worst_piece_ratio: Exact,
    pub witness: Option<PieceWitness>,
}

/// Metric small cancellation `C′(λ)`.
///
/// The symmetrized set consists of every cyclic shift of every cyclically
/// reduced relator and of its inverse, indexed by position. A piece is a
/// common proper prefix of two different positions, so a relator that is a
/// proper power shares long pieces with its own shifts.
pub fn small_cancellation_check(p: &Presentation, lambda: &BigRational) -> SmallCancellationReport {
    let cores: Vec<Word> = p.relators().iter().map(|r| r.cyclic_reduce().0).collect();
    let mut elements: Vec<(SymmetrizedPosition, Word)> = Vec::new();
    for (i, core) in cores.iter().enumerate() {
        let inv = core.inverse();
        for shift in 0..core.len() {
            elements.push((
                SymmetrizedPosition {
                    relator: i,
                    shift,
                    inverted: false,
                },
                core.rotate(shift),
            ));
        }
        for shift in 0..inv.len() {
            elements.push((
                SymmetrizedPosition {
                    relator: i,
                    shift,
                    inverted: true,
                },
                inv.rotate(shift),
            ));
        }
    }
    let mut worst = BigRational::from_integer(BigInt::from(0));
    let mut witness: Option<PieceWitness> = None;
    for (a, (pa, wa)) in elements.iter().enumerate() {
        for (pb, wb) in elements.iter().skip(a + 1) {
            let cap = wa.len().min(wb.len()) - 1;
            let lcp = wa
                .letters()
                .iter()
                .zip(wb.letters())
                .take(cap)
                .take_while(|(x, y)| x == y)
                .count();
            if lcp == 0 {
                continue;
            }
            // measured against the shorter relator, which gives the larger ratio
            let len = wa.len().min(wb.len());
            let ratio = BigRational::new(BigInt::from(lcp), BigInt::from(len));
            if ratio > worst {
                worst = ratio;
                witness = Some(PieceWitness {
                    first: *pa,
                    second: *pb,
                    piece: Word::from_letters(wa.letters()[..lcp].iter().copied()),
                    relator_length: len,
                });
            }
        }
    }
    SmallCancellationReport {
        lambda: Exact(lambda.clone()),
        satisfied: worst < *lambda,
        worst_piece_ratio: Exact(worst),
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parse_examples() {
        let p: Presentation = "< x, y | x^4 >".parse().unwrap();
        assert_eq!(p.generators(), 2);
        assert_eq!(p.relators(), &[Word::from_letters([1, 1, 1, 1])]);

        let s: Presentation = "< a,b,c,d | [a,b]*[c,d] >".parse().unwrap();
        assert_eq!(s.relators()[0].len(), 8);

        let z: Presentation = "< x | >".parse().unwrap();
        assert_eq!(z.relators().len(), 0);
    }

    #[test]
    fn parse_errors_carry_locations() {
        match Presentation::parse("< x, y |\n  x^4, x*x^-1 >") {
            Err(Error::Syntax { line, column, message }) => {
                assert_eq!((line, column), (2, 8));
                assert!(message.contains("identity"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Presentation::parse("< x | y >"), Err(Error::Syntax { .. })));
        assert!(matches!(Presentation::parse("< x | x"), Err(Error::Syntax { .. })));
        assert!(matches!(Presentation::parse("< x, x | >"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn format_round_trip() {
        for text in [
            "< x, y | x^4 >",
            "< a,b,c,d | [a,b][c,d] >",
            "< x | >",
            "<x,y|x^2,y^3,(x y)^5>",
        ] {
            let p = Presentation::parse(text).unwrap();
            assert_eq!(Presentation::parse(&p.to_string()).unwrap(), p);
        }
        let p = Presentation::parse("< x, y | x^2, y^-3 >").unwrap();
        assert_eq!(p.to_string(), "< x, y | x^2, y^-3 >");
    }

    #[test]
    fn record_round_trip() {
        let p = Presentation::parse("< x, y | [x,y]^2 >").unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"generators":["x","y"],"relators":["x*y*x^-1*y^-1*x*y*x^-1*y^-1"]}"#
        );
        assert_eq!(serde_json::from_str::<Presentation>(&json).unwrap(), p);
    }

    #[test]
    fn p_deficiency_examples() {
        let p = Presentation::parse("< x, y | x^4 >").unwrap();
        assert_eq!(p.p_deficiency(2).unwrap(), rat(3, 4));
        let p = Presentation::parse("< x | >").unwrap();
        assert_eq!(p.p_deficiency(2).unwrap(), rat(0, 1));
        let p = Presentation::parse("< x, y | x^2, y^3 >").unwrap();
        assert_eq!(p.p_deficiency(2).unwrap(), rat(-1, 2));
        assert!(p.p_deficiency(4).is_err());
    }

    #[test]
    fn relator_matrices() {
        let m = |t: &str| Presentation::parse(t).unwrap().abelianized_relator_matrix();
        assert_eq!(m("<x,y|x^2,y^3>"), IntMatrix::from_rows(2, &[vec![2, 0], vec![0, 3]]));
        assert_eq!(m("<a,b,c,d|[a,b][c,d]>"), IntMatrix::zeros(1, 4));
        assert_eq!(m("<x|x^4>"), IntMatrix::from_rows(1, &[vec![4]]));
    }

    #[test]
    fn small_cancellation_examples() {
        let sixth = rat(1, 6);
        let check = |t: &str| small_cancellation_check(&Presentation::parse(t).unwrap(), &sixth);

        let r = check("< x, y | (x y)^7 >");
        assert!(!r.satisfied);
        assert_eq!(r.worst_piece_ratio.0, rat(13, 14));

        let r = check("< x | x^4 >");
        assert!(!r.satisfied);
        assert_eq!(r.worst_piece_ratio.0, rat(3, 4));
        assert_eq!(r.witness.unwrap().piece, Word::from_letters([1, 1, 1]));

        let r = check("< a, b, c, d | [a,b][c,d] >");
        assert!(r.satisfied);
        assert_eq!(r.worst_piece_ratio.0, rat(1, 8));
    }
}
