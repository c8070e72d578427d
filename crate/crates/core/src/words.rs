//! Free-group words over a finite alphabet.
//!
//! A [`Word`] is a freely reduced sequence of signed generator indices: the
//! letter `k > 0` stands for the `k`-th generator and `-k` for its inverse.
//! Words do not carry their alphabet; [`Alphabet::check_word`] validates a
//! word against a concrete generating set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generating set `X` of a free group `F(X)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    names: Vec<String>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Alphabet {
    /// Builds an alphabet from distinct identifiers matching `[A-Za-z][A-Za-z0-9_]*`.
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, name) in names.iter().enumerate() {
            if !valid_name(name) {
                return Err(Error::Malformed(format!("invalid generator name `{name}`")));
            }
            if names[..i].contains(name) {
                return Err(Error::Malformed(format!("duplicate generator name `{name}`")));
            }
        }
        Ok(Alphabet { names })
    }

    /// Generators named `prefix1, prefix2, ...`.
    pub fn numbered(prefix: &str, size: usize) -> Self {
        Alphabet {
            names: (1..=size).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, generator: usize) -> &str {
        &self.names[generator]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The word consisting of the single generator at zero-based `index`.
    pub fn generator(&self, index: usize) -> Word {
        assert!(index < self.size());
        Word(vec![index as i32 + 1])
    }

    pub fn check_word(&self, word: &Word) -> Result<()> {
        match word.0.iter().find(|l| l.unsigned_abs() as usize > self.size()) {
            Some(l) => Err(Error::AlphabetMismatch(format!(
                "letter {l} outside alphabet of size {}",
                self.size()
            ))),
            None => Ok(()),
        }
    }

    /// Parses a word in the text syntax, e.g. `x^2*[y,z]^-1`.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let mut parser = Parser::new(text);
        let word = parser.word(self)?;
        parser.skip_ws();
        if !parser.at_end() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(word)
    }

    pub fn format_word(&self, word: &Word) -> String {
        if word.is_identity() {
            return "1".to_string();
        }
        let mut parts = Vec::new();
        let letters = word.letters();
        let mut i = 0;
        while i < letters.len() {
            let l = letters[i];
            let mut run = 1;
            while i + run < letters.len() && letters[i + run] == l {
                run += 1;
            }
            let name = self.name(l.unsigned_abs() as usize - 1);
            let exp = if l > 0 { run as i64 } else { -(run as i64) };
            parts.push(if exp == 1 {
                name.to_string()
            } else {
                format!("{name}^{exp}")
            });
            i += run;
        }
        parts.join("*")
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Self> {
        Alphabet::new(names)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.names
    }
}

/// A freely reduced word in a free group.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<i32>);

/// Freely reduces raw signed letters, checking them against an alphabet size.
pub fn reduce(raw: &[i32], alphabet_size: usize) -> Result<Word> {
    if let Some(bad) = raw
        .iter()
        .find(|&&l| l == 0 || l.unsigned_abs() as usize > alphabet_size)
    {
        return Err(Error::Malformed(format!(
            "letter {bad} is not a signed generator index in 1..={alphabet_size}"
        )));
    }
    Ok(Word::from_letters(raw.iter().copied()))
}

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Reduces a letter sequence. Letters must be non-zero.
    pub fn from_letters(letters: impl IntoIterator<Item = i32>) -> Self {
        let mut out: Vec<i32> = Vec::new();
        for l in letters {
            debug_assert!(l != 0);
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn multiply(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &l in &other.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| -l).collect())
    }

    /// `t⁻¹ · self · t`.
    pub fn conjugate(&self, t: &Word) -> Word {
        t.inverse().multiply(self).multiply(t)
    }

    /// `[a, b] = a·b·a⁻¹·b⁻¹`.
    pub fn commutator(a: &Word, b: &Word) -> Word {
        a.multiply(b).multiply(&a.inverse()).multiply(&b.inverse())
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let (core, conj) = base.cyclic_reduce();
        let mut letters = Vec::with_capacity(core.len() * k.unsigned_abs() as usize);
        for _ in 0..k.unsigned_abs() {
            letters.extend_from_slice(&core.0);
        }
        conj.multiply(&Word(letters)).multiply(&conj.inverse())
    }

    /// Exponent sum of each generator (zero-based index).
    pub fn exponent_sums(&self, alphabet_size: usize) -> Vec<i64> {
        let mut sums = vec![0i64; alphabet_size];
        for &l in &self.0 {
            sums[l.unsigned_abs() as usize - 1] += l.signum() as i64;
        }
        sums
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.0.len() < 2 || self.0[0] != -self.0[self.0.len() - 1]
    }

    /// Splits the word as `conjugator · core · conjugator⁻¹` with a
    /// cyclically reduced core.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let w = &self.0;
        let mut k = 0;
        while 2 * k + 1 < w.len() && w[k] == -w[w.len() - 1 - k] {
            k += 1;
        }
        (Word(w[k..w.len() - k].to_vec()), Word(w[..k].to_vec()))
    }

    /// Cyclic permutation starting at letter `shift` (word must be cyclically reduced).
    pub fn rotate(&self, shift: usize) -> Word {
        let mut v = self.0[shift..].to_vec();
        v.extend_from_slice(&self.0[..shift]);
        Word(v)
    }

    /// Writes the word as `conjugator · base^(p^e) · conjugator⁻¹` with `e`
    /// maximal, i.e. `e = e_p(w, F)`.
    pub fn p_root_decomposition(&self, p: u64) -> Result<RootDecomposition> {
        if self.is_identity() {
            return Err(Error::UndefinedRoot);
        }
        if !is_prime(p) {
            return Err(Error::Domain(format!("{p} is not prime")));
        }
        let (core, conjugator) = self.cyclic_reduce();
        let (primitive, power) = primitive_root(core.letters());
        let mut exponent = 0u32;
        let mut rest = power;
        while rest % p as usize == 0 {
            rest /= p as usize;
            exponent += 1;
        }
        let mut base = Vec::with_capacity(primitive.len() * rest);
        for _ in 0..rest {
            base.extend_from_slice(primitive);
        }
        Ok(RootDecomposition {
            base: Word(base),
            exponent,
            conjugator,
            prime: p,
        })
    }

    /// `e_p(w, F)`.
    pub fn p_exponent(&self, p: u64) -> Result<u32> {
        Ok(self.p_root_decomposition(p)?.exponent)
    }
}

/// Shortest period `m` of a cyclically reduced sequence with `s = (s[..m])^(len/m)`.
fn primitive_root(s: &[i32]) -> (&[i32], usize) {
    let n = s.len();
    for m in 1..=n {
        if n.is_multiple_of(m) && (m..n).all(|i| s[i] == s[i - m]) {
            return (&s[..m], n / m);
        }
    }
    (s, 1)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `w = conjugator · base^(p^exponent) · conjugator⁻¹`, `base` not a p-th power.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootDecomposition {
    pub base: Word,
    pub exponent: u32,
    pub conjugator: Word,
    pub prime: u64,
}

impl RootDecomposition {
    /// The unique `p^j`-th root of the decomposed word, for `j ≤ exponent`.
    pub fn root(&self, j: u32) -> Word {
        assert!(j <= self.exponent);
        let k = self.prime.pow(self.exponent - j) as i64;
        self.base.pow(k).conjugate(&self.conjugator.inverse())
    }

    /// `conjugator · base^(p^e) · conjugator⁻¹`.
    pub fn reassemble(&self) -> Word {
        self.root(0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Recursive-descent parser shared by word and presentation syntax.
pub(crate) struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    pub(crate) fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == b'#' {
                while !matches!(self.peek(), None | Some(b'\n')) {
                    self.bump();
                }
            } else if c.is_ascii_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    /// Skips whitespace and consumes `c` if it is next.
    pub(crate) fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return Err(self.error("expected an identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.bump();
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let negative = if self.peek() == Some(b'-') {
            self.bump();
            true
        } else {
            false
        };
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: i64 = text.parse().map_err(|_| self.error("exponent out of range"))?;
        if value > 1 << 20 {
            return Err(self.error("exponent out of range"));
        }
        Ok(if negative { -value } else { value })
    }

    /// word := factor ('*'? factor)*
    pub(crate) fn word(&mut self, alphabet: &Alphabet) -> Result<Word> {
        let mut acc = self.factor(alphabet)?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    let f = self.factor(alphabet)?;
                    acc = acc.multiply(&f);
                }
                Some(c) if c.is_ascii_alphabetic() || c == b'(' || c == b'[' => {
                    let f = self.factor(alphabet)?;
                    acc = acc.multiply(&f);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self, alphabet: &Alphabet) -> Result<Word> {
        let mut atom = self.atom(alphabet)?;
        while self.eat(b'^') {
            let k = self.integer()?;
            atom = atom.pow(k);
        }
        Ok(atom)
    }

    fn atom(&mut self, alphabet: &Alphabet) -> Result<Word> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let w = self.word(alphabet)?;
                self.expect(b')')?;
                Ok(w)
            }
            Some(b'[') => {
                self.bump();
                let a = self.word(alphabet)?;
                self.expect(b',')?;
                let b = self.word(alphabet)?;
                self.expect(b']')?;
                Ok(Word::commutator(&a, &b))
            }
            Some(b'1') => {
                self.bump();
                Ok(Word::identity())
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let (line, column) = (self.line, self.column);
                let name = self.ident()?;
                match alphabet.index_of(&name) {
                    Some(i) => Ok(alphabet.generator(i)),
                    None => Err(Error::Syntax {
                        line,
                        column,
                        message: format!("unknown generator `{name}`"),
                    }),
                }
            }
            _ => Err(self.error("expected a generator, `(`, `[` or `1`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xyz() -> Alphabet {
        Alphabet::new(["x", "y", "z"]).unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(&[1, -1, 2], 2).unwrap(), Word(vec![2]));
        assert_eq!(reduce(&[], 2).unwrap(), Word::identity());
        assert_eq!(reduce(&[1, 2, -2, 1], 2).unwrap(), Word(vec![1, 1]));
        assert!(matches!(reduce(&[3], 2), Err(Error::Malformed(_))));
        assert!(matches!(reduce(&[0], 2), Err(Error::Malformed(_))));
    }

    #[test]
    fn group_operations() {
        let a = xyz();
        let x = a.generator(0);
        let y = a.generator(1);
        assert!(x.multiply(&x.inverse()).is_identity());
        assert_eq!(x.multiply(&y).inverse(), Word(vec![-2, -1]));
        let c = Word::commutator(&x, &y);
        assert_eq!(c, Word(vec![1, 2, -1, -2]));
        assert_eq!(c.len(), 4);
        assert_eq!(x.conjugate(&y), Word(vec![-2, 1, 2]));
    }

    #[test]
    fn cyclic_reduction_examples() {
        let a = xyz();
        let w = a.parse_word("x y x^-1").unwrap();
        assert_eq!(w.cyclic_reduce(), (Word(vec![2]), Word(vec![1])));
        let w = a.parse_word("x y").unwrap();
        assert_eq!(w.cyclic_reduce(), (w.clone(), Word::identity()));
        let w = a.parse_word("z (x y)^4 z^-1").unwrap();
        let (core, conj) = w.cyclic_reduce();
        assert_eq!(core, a.parse_word("(x y)^4").unwrap());
        assert_eq!(conj, Word(vec![3]));
    }

    #[test]
    fn root_examples() {
        let a = xyz();
        let d = a.parse_word("x^8").unwrap().p_root_decomposition(2).unwrap();
        assert_eq!((d.exponent, d.base.clone()), (3, Word(vec![1])));

        let d = a.parse_word("[x,y]").unwrap().p_root_decomposition(2).unwrap();
        assert_eq!(d.exponent, 0);

        let w = a.parse_word("z (x y^-1)^9 z^-1").unwrap();
        let d = w.p_root_decomposition(3).unwrap();
        assert_eq!(d.exponent, 2);
        assert_eq!(d.base, a.parse_word("x y^-1").unwrap());
        assert_eq!(d.conjugator, Word(vec![3]));
        assert_eq!(d.reassemble(), w);
        assert_eq!(d.root(1), a.parse_word("z (x y^-1)^3 z^-1").unwrap());

        // base may be a proper power of a non-p-th power
        let d = a.parse_word("x^12").unwrap().p_root_decomposition(2).unwrap();
        assert_eq!((d.exponent, d.base.len()), (2, 3));
    }

    #[test]
    fn root_of_identity_is_an_error() {
        assert_eq!(Word::identity().p_root_decomposition(2), Err(Error::UndefinedRoot));
    }

    #[test]
    fn parse_and_format() {
        let a = xyz();
        let w = a.parse_word("x^2*[y,z]^-1").unwrap();
        // [y,z]^-1 = z y z^-1 y^-1
        assert_eq!(w, Word(vec![1, 1, 3, 2, -3, -2]));
        assert_eq!(a.format_word(&w), "x^2*z*y*z^-1*y^-1");
        assert_eq!(a.parse_word(&a.format_word(&w)).unwrap(), w);
        assert_eq!(a.format_word(&Word::identity()), "1");
        assert!(a.parse_word("x w").is_err());
        assert!(a.parse_word("x^").is_err());
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new(["x", "x"]).is_err());
        assert!(Alphabet::new(["1x"]).is_err());
        assert!(Alphabet::new(["a_1", "B2"]).is_ok());
        let a = Alphabet::new(["x"]).unwrap();
        assert!(a.check_word(&Word(vec![2])).is_err());
    }
}
