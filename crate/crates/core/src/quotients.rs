//! Finite-index normal subgroups as kernels of maps onto finite groups.
//!
//! A [`FiniteQuotientMap`] stores the right regular action of the image
//! group on itself: one permutation of `0..order` per generator of `F(X)`,
//! with point `0` the identity coset. Since the action is regular, a word
//! lies in the kernel exactly when it fixes point `0`.

use std::collections::VecDeque;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::modp;
use crate::presentations::Presentation;
use crate::words::{is_prime, Alphabet, Word};

/// Default budget on the number of cosets of a constructed quotient.
pub const DEFAULT_INDEX_BUDGET: u64 = 5000;

/// Target groups accepted by [`quotient_from_images`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    /// `ℤ/n`, generator images given as residues.
    Cyclic { n: u64, images: Vec<i64> },
    /// `(ℤ/p)^k`, generator images given as vectors.
    ElementaryAbelian { p: u64, k: usize, images: Vec<Vec<u64>> },
    /// The group generated by explicit permutations of `0..degree`.
    Permutation { degree: usize, images: Vec<Vec<usize>> },
}

/// Serializable description of a quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientRecord {
    pub target_kind: String,
    pub parameters: serde_json::Value,
    pub generator_images: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QuotientRecord", into = "QuotientRecord")]
pub struct FiniteQuotientMap {
    rank: usize,
    perms: Vec<Vec<u32>>,
    inverses: Vec<Vec<u32>>,
    description: Description,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Description {
    Cyclic {
        n: u64,
        images: Vec<i64>,
    },
    ElementaryAbelian {
        p: u64,
        k: usize,
        images: Vec<Vec<u64>>,
    },
    Permutation {
        degree: usize,
        images: Vec<Vec<usize>>,
    },
    /// Built internally: derived steps, intersections, imported regular actions.
    Regular {
        label: String,
        parameters: serde_json::Value,
    },
}

fn invert_perm(perm: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; perm.len()];
    for (i, &j) in perm.iter().enumerate() {
        inv[j as usize] = i as u32;
    }
    inv
}

fn is_permutation(perm: &[u32]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &j in perm {
        match seen.get_mut(j as usize) {
            Some(s) if !*s => *s = true,
            _ => return false,
        }
    }
    true
}

impl FiniteQuotientMap {
    /// The identity map onto the trivial group.
    pub fn trivial(rank: usize) -> Self {
        FiniteQuotientMap::from_regular(rank, vec![vec![0]; rank], "trivial", json!({ "order": 1 }))
    }

    /// Wraps permutations already known to form a regular action.
    pub(crate) fn from_regular(rank: usize, perms: Vec<Vec<u32>>, label: &str, parameters: serde_json::Value) -> Self {
        debug_assert_eq!(perms.len(), rank);
        let inverses = perms.iter().map(|p| invert_perm(p)).collect();
        FiniteQuotientMap {
            rank,
            perms,
            inverses,
            description: Description::Regular {
                label: label.to_string(),
                parameters,
            },
        }
    }

    /// Number of generators of the free group acting.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `[G : H]`, the order of the image group.
    pub fn order(&self) -> usize {
        self.perms.first().map_or(1, Vec::len)
    }

    pub fn permutations(&self) -> &[Vec<u32>] {
        &self.perms
    }

    #[inline]
    pub fn act_letter(&self, point: usize, letter: i32) -> usize {
        let g = letter.unsigned_abs() as usize - 1;
        if letter > 0 {
            self.perms[g][point] as usize
        } else {
            self.inverses[g][point] as usize
        }
    }

    pub fn act(&self, point: usize, word: &Word) -> usize {
        word.letters().iter().fold(point, |c, &l| self.act_letter(c, l))
    }

    /// `w ∈ H`: the word acts trivially, equivalently fixes the identity coset.
    pub fn membership(&self, word: &Word) -> bool {
        self.act(0, word) == 0
    }

    /// Order of the image of `word` in the finite quotient.
    pub fn element_order(&self, word: &Word) -> u64 {
        let mut point = self.act(0, word);
        let mut k = 1;
        while point != 0 {
            point = self.act(point, word);
            k += 1;
        }
        k
    }

    pub fn is_p_power_index(&self, p: u64) -> bool {
        let mut n = self.order() as u64;
        while n.is_multiple_of(p) {
            n /= p;
        }
        n == 1
    }

    /// Checks that every relator of `presentation` lies in the kernel.
    pub fn check_relators(&self, presentation: &Presentation) -> Result<()> {
        if presentation.generators() != self.rank {
            return Err(Error::AlphabetMismatch(format!(
                "quotient acts on {} generators, presentation has {}",
                self.rank,
                presentation.generators()
            )));
        }
        for (i, r) in presentation.relators().iter().enumerate() {
            if !self.membership(r) {
                return Err(Error::NotAHomomorphism {
                    relator: presentation.format_relator(i),
                });
            }
        }
        Ok(())
    }

    /// Factoring map onto a coarser quotient: exists iff `ker(self) ⊆ ker(coarser)`.
    ///
    /// Returns the image of each point of `self` in `coarser`.
    pub fn factoring_map(&self, coarser: &FiniteQuotientMap) -> Option<Vec<usize>> {
        if coarser.rank != self.rank {
            return None;
        }
        let n = self.order();
        let mut map = vec![usize::MAX; n];
        map[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(c) = queue.pop_front() {
            for g in 0..self.rank {
                for letter in [g as i32 + 1, -(g as i32 + 1)] {
                    let d = self.act_letter(c, letter);
                    let image = coarser.act_letter(map[c], letter);
                    if map[d] == usize::MAX {
                        map[d] = image;
                        queue.push_back(d);
                    } else if map[d] != image {
                        return None;
                    }
                }
            }
        }
        Some(map)
    }

    /// Quotient whose kernel is `ker(self) ∩ ker(other)`.
    pub fn intersect(&self, other: &FiniteQuotientMap, index_budget: u64) -> Result<Self> {
        if self.rank != other.rank {
            return Err(Error::AlphabetMismatch(
                "intersecting quotients of different rank".into(),
            ));
        }
        let m = other.order();
        let mut id = std::collections::HashMap::new();
        let mut pairs = vec![(0usize, 0usize)];
        id.insert((0usize, 0usize), 0u32);
        let mut perms = vec![Vec::new(); self.rank];
        let mut head = 0;
        while head < pairs.len() {
            let (a, b) = pairs[head];
            for (g, perm) in perms.iter_mut().enumerate() {
                let next = (self.perms[g][a] as usize, other.perms[g][b] as usize);
                let k = match id.get(&next) {
                    Some(&k) => k,
                    None => {
                        let k = pairs.len() as u32;
                        if k as u64 >= index_budget {
                            return Err(Error::resource(
                                "intersection of quotients",
                                format!("more than {index_budget} cosets"),
                                index_budget,
                            ));
                        }
                        id.insert(next, k);
                        pairs.push(next);
                        k
                    }
                };
                perm.push(k);
            }
            head += 1;
        }
        Ok(FiniteQuotientMap::from_regular(
            self.rank,
            perms,
            "intersection",
            json!({ "order": pairs.len(), "factors": [self.order(), m] }),
        ))
    }

    pub fn to_record(&self) -> QuotientRecord {
        match &self.description {
            Description::Cyclic { n, images } => QuotientRecord {
                target_kind: "cyclic".into(),
                parameters: json!({ "n": n }),
                generator_images: json!(images),
            },
            Description::ElementaryAbelian { p, k, images } => QuotientRecord {
                target_kind: "elementary_abelian".into(),
                parameters: json!({ "p": p, "k": k }),
                generator_images: json!(images),
            },
            Description::Permutation { degree, images } => QuotientRecord {
                target_kind: "permutation".into(),
                parameters: json!({ "degree": degree }),
                generator_images: json!(images),
            },
            Description::Regular { label, parameters } => {
                let mut parameters = parameters.clone();
                parameters["construction"] = json!(label);
                QuotientRecord {
                    target_kind: "extension".into(),
                    parameters,
                    generator_images: json!(self.perms),
                }
            }
        }
    }

    /// Rebuilds a quotient of `presentation` from its record and checks the relators.
    pub fn from_record(presentation: &Presentation, record: &QuotientRecord) -> Result<Self> {
        let q = FiniteQuotientMap::try_from(record.clone())?;
        if q.rank != presentation.generators() {
            return Err(Error::AlphabetMismatch(format!(
                "quotient acts on {} generators, presentation has {}",
                q.rank,
                presentation.generators()
            )));
        }
        q.check_relators(presentation)?;
        Ok(q)
    }
}

/// Rebuilds the action and checks that it is regular. Relators are not
/// checked; see [`FiniteQuotientMap::check_relators`].
impl TryFrom<QuotientRecord> for FiniteQuotientMap {
    type Error = Error;

    fn try_from(record: QuotientRecord) -> Result<Self> {
        let bad = |what: &str| Error::Malformed(format!("quotient record: {what}"));
        let param_u64 = |key: &str| {
            record.parameters[key]
                .as_u64()
                .ok_or_else(|| bad(&format!("missing parameter `{key}`")))
        };
        let target = match record.target_kind.as_str() {
            "cyclic" => Target::Cyclic {
                n: param_u64("n")?,
                images: serde_json::from_value(record.generator_images.clone())
                    .map_err(|_| bad("cyclic images must be integers"))?,
            },
            "elementary_abelian" => Target::ElementaryAbelian {
                p: param_u64("p")?,
                k: param_u64("k")? as usize,
                images: serde_json::from_value(record.generator_images.clone())
                    .map_err(|_| bad("images must be vectors"))?,
            },
            "permutation" => Target::Permutation {
                degree: param_u64("degree")? as usize,
                images: serde_json::from_value(record.generator_images.clone())
                    .map_err(|_| bad("images must be permutations"))?,
            },
            "extension" | "trivial" => {
                let perms: Vec<Vec<u32>> = serde_json::from_value(record.generator_images.clone())
                    .map_err(|_| bad("images must be permutations"))?;
                let label = record.parameters["construction"]
                    .as_str()
                    .unwrap_or("extension")
                    .to_string();
                let mut parameters = record.parameters.clone();
                if let Some(obj) = parameters.as_object_mut() {
                    obj.remove("construction");
                }
                return checked_regular(perms.len(), perms, &label, parameters);
            }
            other => return Err(bad(&format!("unknown target kind `{other}`"))),
        };
        let rank = target.image_count();
        build_target(rank, target, u64::MAX)
    }
}

impl From<FiniteQuotientMap> for QuotientRecord {
    fn from(q: FiniteQuotientMap) -> Self {
        q.to_record()
    }
}

impl Target {
    fn image_count(&self) -> usize {
        match self {
            Target::Cyclic { images, .. } => images.len(),
            Target::ElementaryAbelian { images, .. } => images.len(),
            Target::Permutation { images, .. } => images.len(),
        }
    }
}

/// Validates explicit permutations as a regular action and wraps them.
pub fn regular_from_permutations(
    presentation: &Presentation,
    perms: Vec<Vec<u32>>,
    label: &str,
    parameters: serde_json::Value,
) -> Result<FiniteQuotientMap> {
    let q = checked_regular(presentation.generators(), perms, label, parameters)?;
    q.check_relators(presentation)?;
    Ok(q)
}

fn checked_regular(
    rank: usize,
    perms: Vec<Vec<u32>>,
    label: &str,
    parameters: serde_json::Value,
) -> Result<FiniteQuotientMap> {
    if perms.len() != rank {
        return Err(Error::AlphabetMismatch(format!(
            "{} generator images for {} generators",
            perms.len(),
            rank
        )));
    }
    let n = perms.first().map_or(1, Vec::len);
    if perms.iter().any(|p| p.len() != n || !is_permutation(p)) {
        return Err(Error::Malformed(
            "generator images are not permutations of one set".into(),
        ));
    }
    let q = FiniteQuotientMap::from_regular(rank, perms, label, parameters);
    check_regular(&q)?;
    Ok(q)
}

/// Transitivity and trivial point stabilizers, in `O(n²·|X|)` time.
fn check_regular(q: &FiniteQuotientMap) -> Result<()> {
    let n = q.order();
    let rank = q.rank;
    // BFS tree from 0: parent letter of each point
    let mut parent: Vec<Option<(usize, i32)>> = vec![None; n];
    let mut order = vec![0usize];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut head = 0;
    while head < order.len() {
        let c = order[head];
        head += 1;
        for g in 0..rank {
            for letter in [g as i32 + 1, -(g as i32 + 1)] {
                let d = q.act_letter(c, letter);
                if !seen[d] {
                    seen[d] = true;
                    parent[d] = Some((c, letter));
                    order.push(d);
                }
            }
        }
    }
    if order.len() != n {
        return Err(Error::NotSurjective {
            generated: order.len() as u64,
            target: n as u64,
        });
    }
    // For every start x, x·u_c must be compatible with the generator edges.
    let mut image = vec![0usize; n];
    for x in 0..n {
        image[0] = x;
        for &c in &order[1..] {
            let (pc, letter) = parent[c].unwrap();
            image[c] = q.act_letter(image[pc], letter);
        }
        for c in 0..n {
            for g in 0..rank {
                let d = q.perms[g][c] as usize;
                if q.perms[g][image[c]] as usize != image[d] {
                    return Err(Error::Malformed(
                        "permutation action is not regular (point stabilizers are non-trivial)".into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Builds the quotient map defined by generator images in a finite target.
pub fn quotient_from_images(
    presentation: &Presentation,
    target: Target,
    index_budget: u64,
) -> Result<FiniteQuotientMap> {
    let q = build_target(presentation.generators(), target, index_budget)?;
    q.check_relators(presentation)?;
    Ok(q)
}

fn build_target(rank: usize, target: Target, index_budget: u64) -> Result<FiniteQuotientMap> {
    let check_len = |len: usize| {
        if len == rank {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch(format!(
                "{len} generator images for {rank} generators"
            )))
        }
    };
    let q = match &target {
        Target::Cyclic { n, images } => {
            check_len(images.len())?;
            if *n == 0 {
                return Err(Error::Domain("cyclic target must have positive order".into()));
            }
            let g = images
                .iter()
                .fold(*n, |acc, &v| num_integer::gcd(acc, v.rem_euclid(*n as i64) as u64));
            let generated = n / g.max(1);
            if generated != *n {
                return Err(Error::NotSurjective { generated, target: *n });
            }
            if *n > index_budget {
                return Err(Error::resource("cyclic quotient", n, index_budget));
            }
            let perms = images
                .iter()
                .map(|&v| {
                    let s = v.rem_euclid(*n as i64) as u64;
                    (0..*n).map(|c| ((c + s) % n) as u32).collect()
                })
                .collect();
            FiniteQuotientMap {
                description: Description::Cyclic {
                    n: *n,
                    images: images.clone(),
                },
                ..FiniteQuotientMap::from_regular(rank, perms, "", json!(null))
            }
        }
        Target::ElementaryAbelian { p, k, images } => {
            check_len(images.len())?;
            if !is_prime(*p) {
                return Err(Error::Domain(format!("{p} is not prime")));
            }
            if images.iter().any(|v| v.len() != *k) {
                return Err(Error::Malformed(format!("images must have length {k}")));
            }
            let order = p
                .checked_pow(*k as u32)
                .filter(|&o| o <= index_budget)
                .ok_or_else(|| Error::resource("elementary abelian quotient", format!("{p}^{k}"), index_budget))?;
            let rows: Vec<Vec<u64>> = images.iter().map(|v| v.iter().map(|x| x % p).collect()).collect();
            let r = modp::rank(rows.clone(), *p);
            if r != *k {
                return Err(Error::NotSurjective {
                    generated: p.pow(r as u32),
                    target: order,
                });
            }
            let perms = rows
                .iter()
                .map(|v| {
                    (0..order)
                        .map(|c| {
                            // digit j of c is coordinate j
                            let mut out = 0u64;
                            let mut place = 1u64;
                            let mut rest = c;
                            for &x in v {
                                let digit = (rest % p + x) % p;
                                out += digit * place;
                                place *= p;
                                rest /= p;
                            }
                            out as u32
                        })
                        .collect()
                })
                .collect();
            FiniteQuotientMap {
                description: Description::ElementaryAbelian {
                    p: *p,
                    k: *k,
                    images: images.clone(),
                },
                ..FiniteQuotientMap::from_regular(rank, perms, "", json!(null))
            }
        }
        Target::Permutation { degree, images } => {
            check_len(images.len())?;
            let gens: Vec<Vec<u32>> = images.iter().map(|p| p.iter().map(|&x| x as u32).collect()).collect();
            if gens.iter().any(|p| p.len() != *degree || !is_permutation(p)) {
                return Err(Error::Malformed(format!("images must be permutations of 0..{degree}")));
            }
            let perms = regular_action_of(&gens, *degree, index_budget)?;
            FiniteQuotientMap {
                description: Description::Permutation {
                    degree: *degree,
                    images: images.clone(),
                },
                ..FiniteQuotientMap::from_regular(rank, perms, "", json!(null))
            }
        }
    };
    Ok(q)
}

/// Right regular action of the group generated by `gens` on its own elements.
fn regular_action_of(gens: &[Vec<u32>], degree: usize, budget: u64) -> Result<Vec<Vec<u32>>> {
    let identity: Vec<u32> = (0..degree as u32).collect();
    let mut elements = vec![identity.clone()];
    let mut index = std::collections::HashMap::new();
    index.insert(identity, 0u32);
    let mut perms = vec![Vec::new(); gens.len()];
    let mut head = 0;
    while head < elements.len() {
        let x = elements[head].clone();
        for (g, gen) in gens.iter().enumerate() {
            // x then g
            let y: Vec<u32> = x.iter().map(|&i| gen[i as usize]).collect();
            let k = match index.get(&y) {
                Some(&k) => k,
                None => {
                    let k = elements.len() as u32;
                    if k as u64 >= budget {
                        return Err(Error::resource(
                            "permutation group enumeration",
                            format!("more than {budget} elements"),
                            budget,
                        ));
                    }
                    index.insert(y.clone(), k);
                    elements.push(y);
                    k
                }
            };
            perms[g].push(k);
        }
        head += 1;
    }
    Ok(perms)
}

/// Schreier transversal and Schreier generators of the kernel of a quotient.
///
/// The transversal is built breadth-first, trying each generator and then
/// its inverse in generator order. Edges of the BFS tree give trivial
/// Schreier generators and are dropped, so a quotient of index `n` of a free
/// group of rank `d` yields `1 + n(d − 1)` generators.
#[derive(Clone, Debug)]
pub struct SchreierSystem {
    rank: usize,
    transversal: Vec<Word>,
    bfs_order: Vec<usize>,
    /// `edge_generator[c * rank + g]`: Schreier generator of `t_c · g · t_{c·g}⁻¹`.
    edge_generator: Vec<Option<usize>>,
    generators: Vec<Word>,
}

impl SchreierSystem {
    pub fn new(q: &FiniteQuotientMap) -> Self {
        let n = q.order();
        let rank = q.rank();
        let mut transversal: Vec<Option<Word>> = vec![None; n];
        let mut tree_edge = vec![false; n * rank];
        transversal[0] = Some(Word::identity());
        let mut bfs_order = vec![0usize];
        let mut head = 0;
        while head < bfs_order.len() {
            let c = bfs_order[head];
            head += 1;
            for g in 0..rank {
                for letter in [g as i32 + 1, -(g as i32 + 1)] {
                    let d = q.act_letter(c, letter);
                    if transversal[d].is_none() {
                        let mut letters = transversal[c].as_ref().unwrap().letters().to_vec();
                        letters.push(letter);
                        transversal[d] = Some(Word::from_letters(letters));
                        bfs_order.push(d);
                        if letter > 0 {
                            tree_edge[c * rank + g] = true;
                        } else {
                            tree_edge[d * rank + g] = true;
                        }
                    }
                }
            }
        }
        let transversal: Vec<Word> = transversal
            .into_iter()
            .map(|t| t.expect("quotient action is transitive"))
            .collect();
        let mut edge_generator = vec![None; n * rank];
        let mut generators = Vec::new();
        for c in 0..n {
            for g in 0..rank {
                if tree_edge[c * rank + g] {
                    continue;
                }
                let d = q.act_letter(c, g as i32 + 1);
                let w = transversal[c]
                    .multiply(&Word::from_letters([g as i32 + 1]))
                    .multiply(&transversal[d].inverse());
                edge_generator[c * rank + g] = Some(generators.len());
                generators.push(w);
            }
        }
        SchreierSystem {
            rank,
            transversal,
            bfs_order,
            edge_generator,
            generators,
        }
    }

    pub fn transversal(&self) -> &[Word] {
        &self.transversal
    }

    /// Cosets in the order they were discovered.
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs_order
    }

    /// Schreier generators as words in the ambient alphabet.
    pub fn generators(&self) -> &[Word] {
        &self.generators
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    /// Schreier generator on the edge `c --g--> c·g`, if it is not a tree edge.
    pub fn edge(&self, coset: usize, generator: usize) -> Option<usize> {
        self.edge_generator[coset * self.rank + generator]
    }

    /// Rewrites `word` read from coset `start` into Schreier generators.
    ///
    /// Letters of the result are `±(k + 1)` for generator `k`. Returns the
    /// reduced rewritten word and the end coset.
    pub fn rewrite(&self, q: &FiniteQuotientMap, word: &Word, start: usize) -> (Word, usize) {
        let mut out = Vec::new();
        let mut c = start;
        for &l in word.letters() {
            let g = l.unsigned_abs() as usize - 1;
            if l > 0 {
                if let Some(s) = self.edge(c, g) {
                    out.push(s as i32 + 1);
                }
                c = q.act_letter(c, l);
            } else {
                c = q.act_letter(c, l);
                if let Some(s) = self.edge(c, g) {
                    out.push(-(s as i32 + 1));
                }
            }
        }
        (Word::from_letters(out), c)
    }

    /// Exponent sums of the rewritten word, one entry per Schreier generator.
    pub fn rewrite_abelian(&self, q: &FiniteQuotientMap, word: &Word, start: usize) -> Vec<i64> {
        let mut v = vec![0i64; self.generators.len()];
        let mut c = start;
        for &l in word.letters() {
            let g = l.unsigned_abs() as usize - 1;
            if l > 0 {
                if let Some(s) = self.edge(c, g) {
                    v[s] += 1;
                }
                c = q.act_letter(c, l);
            } else {
                c = q.act_letter(c, l);
                if let Some(s) = self.edge(c, g) {
                    v[s] -= 1;
                }
            }
        }
        v
    }
}

/// Presentation of a kernel on its Schreier generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupPresentation {
    pub presentation: Presentation,
    /// Each Schreier generator as a word in the ambient alphabet.
    pub inclusion: Vec<Word>,
    /// Schreier transversal indexed by coset; `transversal[0]` is the identity.
    pub transversal: Vec<Word>,
}

fn schreier_alphabet(count: usize) -> Alphabet {
    Alphabet::numbered("s", count)
}

/// Reidemeister–Schreier presentation of the kernel of `q`.
///
/// Relators are the rewritten conjugates `t · r · t⁻¹` for every transversal
/// element `t` and ambient relator `r`.
pub fn reidemeister_schreier(presentation: &Presentation, q: &FiniteQuotientMap) -> Result<SubgroupPresentation> {
    q.check_relators(presentation)?;
    let system = SchreierSystem::new(q);
    let mut relators = Vec::with_capacity(q.order() * presentation.relators().len());
    for &c in system.bfs_order() {
        for r in presentation.relators() {
            let (w, end) = system.rewrite(q, r, c);
            debug_assert_eq!(end, c);
            relators.push(w);
        }
    }
    Ok(SubgroupPresentation {
        presentation: Presentation::new(schreier_alphabet(system.generator_count()), relators)?,
        inclusion: system.generators().to_vec(),
        transversal: system.transversal().to_vec(),
    })
}

/// Abelianized relator rows of the Reidemeister–Schreier presentation,
/// without materializing the rewritten words.
pub(crate) fn rs_relation_rows(
    presentation: &Presentation,
    q: &FiniteQuotientMap,
    system: &SchreierSystem,
) -> Vec<Vec<i64>> {
    let mut rows = Vec::with_capacity(q.order() * presentation.relators().len());
    for &c in system.bfs_order() {
        for r in presentation.relators() {
            rows.push(system.rewrite_abelian(q, r, c));
        }
    }
    rows
}

/// `e_p(r, F_H)`: the largest `j` such that the `p^j`-th root of `r` lies in the kernel.
pub fn e_p_in_subgroup(q: &FiniteQuotientMap, r: &Word, p: u64) -> Result<u32> {
    if !q.membership(r) {
        return Err(Error::Precondition("word does not lie in the kernel".into()));
    }
    let d = r.p_root_decomposition(p)?;
    for j in (0..=d.exponent).rev() {
        if q.membership(&d.root(j)) {
            return Ok(j);
        }
    }
    unreachable!("the 1st root is r itself, which lies in the kernel")
}

/// Per-relator data of the relator-count presentation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuchtaEntry {
    pub relator: usize,
    pub e_outer: u32,
    pub e_inner: u32,
    pub count: u64,
    pub conjugator_transversal: Vec<Word>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuchtaCertificate {
    pub prime: u64,
    pub index: u64,
    pub entries: Vec<PuchtaEntry>,
}

impl PuchtaCertificate {
    pub fn total_relators(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }
}

fn exact_log(mut n: u64, p: u64) -> Option<u32> {
    let mut k = 0;
    while n > 1 {
        if !n.is_multiple_of(p) {
            return None;
        }
        n /= p;
        k += 1;
    }
    Some(k)
}

/// For each relator `r = w^(p^e)`: a right transversal of `⟨w⟩·H` in `F`,
/// chosen greedily in BFS coset order.
fn root_transversal(q: &FiniteQuotientMap, system: &SchreierSystem, root: &Word) -> Vec<Word> {
    let n = q.order();
    let mut cyclic = vec![0usize];
    let mut point = q.act(0, root);
    while point != 0 {
        cyclic.push(point);
        point = q.act(point, root);
    }
    let mut covered = vec![false; n];
    let mut chosen = Vec::new();
    for &c in system.bfs_order() {
        if covered[c] {
            continue;
        }
        let t = &system.transversal()[c];
        for &a in &cyclic {
            covered[q.act(a, t)] = true;
        }
        chosen.push(t.clone());
    }
    chosen
}

/// Presentation of the kernel `H` (of `p`-power index) whose relators are
/// `[G:H] / p^(e_p(r,F) − e_p(r,F_H))` conjugates `t⁻¹ r t` of each relator.
pub fn puchta_presentation(
    presentation: &Presentation,
    q: &FiniteQuotientMap,
    p: u64,
) -> Result<(SubgroupPresentation, PuchtaCertificate)> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    let index = q.order() as u64;
    if exact_log(index, p).is_none() {
        return Err(Error::Domain(format!("index {index} is not a power of {p}")));
    }
    q.check_relators(presentation)?;
    let system = SchreierSystem::new(q);
    let mut relators = Vec::new();
    let mut entries = Vec::new();
    for (i, r) in presentation.relators().iter().enumerate() {
        let d = r.p_root_decomposition(p)?;
        let w = d.root(d.exponent);
        let ts = root_transversal(q, &system, &w);
        // |⟨w⟩ : ⟨w⟩ ∩ F_H| = p^(e_outer − e_inner)
        let k = exact_log(q.element_order(&w), p)
            .ok_or_else(|| Error::InvariantViolation("root order is not a p-power".into()))?;
        if k > d.exponent {
            return Err(Error::InvariantViolation(format!(
                "relator {} has root order exceeding p^e_p",
                i + 1
            )));
        }
        for t in &ts {
            let (rw, end) = system.rewrite(q, &r.conjugate(t), 0);
            debug_assert_eq!(end, 0);
            relators.push(rw);
        }
        entries.push(PuchtaEntry {
            relator: i,
            e_outer: d.exponent,
            e_inner: d.exponent - k,
            count: ts.len() as u64,
            conjugator_transversal: ts,
        });
    }
    let sub = SubgroupPresentation {
        presentation: Presentation::new(schreier_alphabet(system.generator_count()), relators)?,
        inclusion: system.generators().to_vec(),
        transversal: system.transversal().to_vec(),
    };
    Ok((
        sub,
        PuchtaCertificate {
            prime: p,
            index,
            entries,
        },
    ))
}

/// Relator counts of [`puchta_presentation`] without building the relators.
pub fn puchta_counts(presentation: &Presentation, q: &FiniteQuotientMap, p: u64) -> Result<Vec<u64>> {
    let index = q.order() as u64;
    if exact_log(index, p).is_none() {
        return Err(Error::Domain(format!("index {index} is not a power of {p}")));
    }
    presentation
        .relators()
        .iter()
        .map(|r| {
            let d = r.p_root_decomposition(p)?;
            let ord = q.element_order(&d.root(d.exponent));
            Ok(index / ord)
        })
        .collect()
}

/// Kernel `[H, H]·H^(p^e)` of the quotient `q` of `presentation`.
///
/// Cosets of the new kernel `H'` are pairs `(c, v)`: `c` a coset of `H`, `v`
/// in `H/H' ≅ H₁(H; ℤ/p^e)`. Writing a word as `h · t_c` with `h ∈ H`, right
/// multiplication by a generator `g` sends `(c, v)` to
/// `(c·g, v + [t_c · g · t_{c·g}⁻¹])`.
pub fn derived_step(
    presentation: &Presentation,
    q: &FiniteQuotientMap,
    p: u64,
    exponent: u32,
    index_budget: u64,
) -> Result<FiniteQuotientMap> {
    if !is_prime(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    if exponent == 0 {
        return Err(Error::Domain("exponent must be positive".into()));
    }
    let n = q.order() as u64;
    if exact_log(n, p).is_none() {
        return Err(Error::Domain(format!("index {n} is not a power of {p}")));
    }
    q.check_relators(presentation)?;
    // The kernel is free of rank m and each RS relator lowers the layer by at
    // most a factor p^e, which bounds the new index before any rewriting.
    let m = 1 + n as usize * (q.rank().max(1) - 1);
    let relator_rows = n as usize * presentation.relators().len();
    let lower = (m.saturating_sub(relator_rows) as u32) * exponent;
    let required_lower = BigUint::from(n) * BigUint::from(p).pow(lower);
    if required_lower > BigUint::from(index_budget) {
        return Err(Error::resource(
            "derived p-step",
            format!("at least {required_lower} cosets"),
            index_budget,
        ));
    }
    let system = SchreierSystem::new(q);
    debug_assert_eq!(system.generator_count(), m);
    let rows = rs_relation_rows(presentation, q, &system);
    let cokernel = modp::prime_power_cokernel(&rows, m, p, exponent);
    let required = BigUint::from(n) * cokernel.moduli.iter().map(|&x| BigUint::from(x)).product::<BigUint>();
    if required > BigUint::from(index_budget) {
        return Err(Error::resource(
            "derived p-step",
            format!("{required} cosets"),
            index_budget,
        ));
    }
    let layer: u64 = cokernel.moduli.iter().product();
    let total = (n * layer) as usize;
    let rank = q.rank();
    let moduli = &cokernel.moduli;
    let mut perms = vec![vec![0u32; total]; rank];
    let mut digits = vec![0u64; moduli.len()];
    for c in 0..n as usize {
        for (g, image) in perms.iter_mut().enumerate() {
            let d = q.perms[g][c] as usize;
            let shift = system.edge(c, g).map(|s| &cokernel.projection[s]);
            for code in 0..layer {
                let mut rest = code;
                for (digit, &mj) in digits.iter_mut().zip(moduli) {
                    *digit = rest % mj;
                    rest /= mj;
                }
                if let Some(shift) = shift {
                    for ((digit, &mj), &s) in digits.iter_mut().zip(moduli).zip(shift) {
                        *digit = (*digit + s) % mj;
                    }
                }
                let mut out = 0u64;
                for (&digit, &mj) in digits.iter().zip(moduli).rev() {
                    out = out * mj + digit;
                }
                image[c * layer as usize + code as usize] = (d as u64 * layer + out) as u32;
            }
        }
    }
    Ok(FiniteQuotientMap::from_regular(
        rank,
        perms,
        "derived_step",
        json!({
            "order": total,
            "base_order": n,
            "prime": p,
            "exponent": exponent,
            "layer_moduli": moduli,
        }),
    ))
}
