//! Finitely generated groups as reduced words over a symmetric generating set.
//!
//! Supported presentations are free groups `F_k` and abelian groups given by a
//! list of cyclic factors (`0` meaning an infinite cyclic factor), which covers
//! `ℤ^k`, finite cyclic groups and their products. Elements are stored as
//! canonical shortest words, so `len()` is the word length `|γ|`.

mod tower;

pub use tower::{tower_metric, QuotientTower, TowerElement};

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`GeneratingSet`]'s symbol list.
pub type Letter = u16;

/// Default cap on ball enumeration.
pub const DEFAULT_BALL_CAP: usize = 2_000_000;

/// Symmetric finite generating set: symbols plus the inverse involution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratingSet {
    symbols: Vec<String>,
    inverse: Vec<Letter>,
}

impl GeneratingSet {
    /// `pairs` lists `(symbol, inverse symbol)`; a pair with equal names is an
    /// order-2 generator and must be flagged in `order_two`.
    pub fn new(pairs: &[(&str, &str)], order_two: &[&str]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidGenerators("empty generating set".into()));
        }
        let mut symbols: Vec<String> = Vec::new();
        let mut inverse: Vec<Letter> = Vec::new();
        for &(s, t) in pairs {
            if symbols.iter().any(|x| x == s) || (s != t && symbols.iter().any(|x| x == t)) {
                return Err(Error::InvalidGenerators(format!("duplicate symbol in pair ({s}, {t})")));
            }
            let i = symbols.len() as Letter;
            if s == t {
                if !order_two.contains(&s) {
                    return Err(Error::InvalidGenerators(format!(
                        "symbol `{s}` is its own inverse but not flagged as order two"
                    )));
                }
                symbols.push(s.to_string());
                inverse.push(i);
            } else {
                symbols.push(s.to_string());
                symbols.push(t.to_string());
                inverse.push(i + 1);
                inverse.push(i);
            }
        }
        Ok(Self { symbols, inverse })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, l: Letter) -> &str {
        &self.symbols[l as usize]
    }

    pub fn inverse_of(&self, l: Letter) -> Letter {
        self.inverse[l as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<Letter> {
        self.symbols.iter().position(|s| s == name).map(|i| i as Letter)
    }
}

/// A group element in canonical reduced form.
///
/// Ordering is shortlex (length first, then letter indices).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    letters: Vec<Letter>,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self { letters: Vec::new() }
    }

    /// Word length with respect to the generating set.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Presentation {
    Free {
        rank: usize,
    },
    /// One entry per cyclic factor; `0` is an infinite cyclic factor.
    Abelian {
        moduli: Vec<u64>,
    },
}

/// A finitely generated group with a fixed symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    name: String,
    presentation: Presentation,
    generators: GeneratingSet,
    /// For abelian groups: `factor_of[letter] = (factor index, ±1)`.
    factor_of: Vec<(usize, i64)>,
}

fn letter_name(j: usize) -> (String, String) {
    let c = (b'a' + j as u8) as char;
    (c.to_string(), c.to_ascii_uppercase().to_string())
}

impl Group {
    /// Free group on `rank` generators `a, b, ...` with inverses `A, B, ...`.
    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::InvalidGenerators(format!(
                "free rank {rank} out of range 1..=26"
            )));
        }
        let names: Vec<(String, String)> = (0..rank).map(letter_name).collect();
        let pairs: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let generators = GeneratingSet::new(&pairs, &[])?;
        Ok(Self {
            name: format!("F{rank}"),
            presentation: Presentation::Free { rank },
            generators,
            factor_of: Vec::new(),
        })
    }

    /// Product of cyclic groups; a modulus of `0` means `ℤ`.
    pub fn abelian(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() || moduli.len() > 26 {
            return Err(Error::InvalidGenerators("abelian group needs 1..=26 factors".into()));
        }
        if moduli.contains(&1) {
            return Err(Error::InvalidGenerators("trivial factor ℤ/1 not allowed".into()));
        }
        let names: Vec<(String, String)> = (0..moduli.len()).map(letter_name).collect();
        let mut pairs = Vec::new();
        let mut order_two = Vec::new();
        let mut factor_of = Vec::new();
        for (j, (a, b)) in names.iter().enumerate() {
            if moduli[j] == 2 {
                pairs.push((a.as_str(), a.as_str()));
                order_two.push(a.as_str());
                factor_of.push((j, 1));
            } else {
                pairs.push((a.as_str(), b.as_str()));
                factor_of.push((j, 1));
                factor_of.push((j, -1));
            }
        }
        let generators = GeneratingSet::new(&pairs, &order_two)?;
        let name = moduli
            .iter()
            .map(|&m| if m == 0 { "Z".to_string() } else { format!("Z/{m}") })
            .collect::<Vec<_>>()
            .join("x");
        Ok(Self {
            name,
            presentation: Presentation::Abelian {
                moduli: moduli.to_vec(),
            },
            generators,
            factor_of,
        })
    }

    pub fn integers() -> Self {
        Self::abelian(&[0]).expect("ℤ is valid")
    }

    pub fn free_abelian(rank: usize) -> Result<Self> {
        Self::abelian(&vec![0; rank])
    }

    pub fn cyclic(m: u64) -> Result<Self> {
        Self::abelian(&[m])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn generators(&self) -> &GeneratingSet {
        &self.generators
    }

    pub fn is_free(&self) -> bool {
        matches!(self.presentation, Presentation::Free { .. })
    }

    /// Number of cyclic factors for abelian groups, rank for free groups.
    pub fn rank(&self) -> usize {
        match &self.presentation {
            Presentation::Free { rank } => *rank,
            Presentation::Abelian { moduli } => moduli.len(),
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity()
    }

    /// Single-letter element.
    pub fn generator(&self, l: Letter) -> GroupElement {
        self.reduce_letters(&[l])
    }

    /// Reduce an arbitrary letter sequence to canonical form.
    pub fn reduce_letters(&self, word: &[Letter]) -> GroupElement {
        match &self.presentation {
            Presentation::Free { .. } => {
                let mut out: Vec<Letter> = Vec::with_capacity(word.len());
                for &l in word {
                    if out.last().is_some_and(|&y| self.generators.inverse_of(y) == l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                GroupElement { letters: out }
            }
            Presentation::Abelian { moduli } => {
                let mut exps = vec![0i64; moduli.len()];
                for &l in word {
                    let (j, sign) = self.factor_of[l as usize];
                    exps[j] += sign;
                }
                self.from_exponents(&exps)
            }
        }
    }

    /// Parse and reduce a whitespace-separated word such as `"a b B"`,
    /// `"a⁴"`, `"a^-1 b"` or `"abAB"`.
    pub fn reduce(&self, word: &str) -> Result<GroupElement> {
        let mut letters = Vec::new();
        for token in word.split_whitespace() {
            self.parse_token(token, &mut letters)?;
        }
        Ok(self.reduce_letters(&letters))
    }

    /// Reduce a sequence of symbol names.
    pub fn reduce_symbols<S: AsRef<str>>(&self, symbols: &[S]) -> Result<GroupElement> {
        let mut letters = Vec::with_capacity(symbols.len());
        for s in symbols {
            let s = s.as_ref();
            let l = self
                .generators
                .lookup(s)
                .ok_or_else(|| Error::UnknownSymbol(s.to_string()))?;
            letters.push(l);
        }
        Ok(self.reduce_letters(&letters))
    }

    fn parse_token(&self, token: &str, out: &mut Vec<Letter>) -> Result<()> {
        let (name, exp) = split_exponent(token);
        let exp = exp.ok_or_else(|| Error::UnknownSymbol(token.to_string()))?;
        let base: Vec<Letter> = match self.generators.lookup(name) {
            Some(l) => vec![l],
            None => {
                // run of single-character symbols, e.g. "abAB"
                let mut run = Vec::new();
                for c in name.chars() {
                    let s = c.to_string();
                    run.push(
                        self.generators
                            .lookup(&s)
                            .ok_or_else(|| Error::UnknownSymbol(s.clone()))?,
                    );
                }
                if run.is_empty() {
                    return Err(Error::UnknownSymbol(token.to_string()));
                }
                run
            }
        };
        let (unit, count) = if exp < 0 {
            let inv: Vec<Letter> = base.iter().rev().map(|&l| self.generators.inverse_of(l)).collect();
            (inv, (-exp) as usize)
        } else {
            (base, exp as usize)
        };
        for _ in 0..count {
            out.extend_from_slice(&unit);
        }
        Ok(())
    }

    /// Canonical element for exponent vector (abelian groups only).
    pub fn from_exponents(&self, exps: &[i64]) -> GroupElement {
        let moduli = match &self.presentation {
            Presentation::Abelian { moduli } => moduli,
            Presentation::Free { .. } => panic!("from_exponents on a free group"),
        };
        let mut letters = Vec::new();
        let mut letter = 0usize;
        for (j, &m) in moduli.iter().enumerate() {
            let e = exps[j];
            let (pos, neg) = if m == 2 { (letter, letter) } else { (letter, letter + 1) };
            let signed = if m == 0 {
                e
            } else {
                let m = m as i64;
                let r = e.rem_euclid(m);
                if r <= m - r {
                    r
                } else {
                    r - m
                }
            };
            let l = if signed >= 0 { pos } else { neg } as Letter;
            letters.extend(std::iter::repeat_n(l, signed.unsigned_abs() as usize));
            letter += if m == 2 { 1 } else { 2 };
        }
        GroupElement { letters }
    }

    /// Least nonnegative residues (finite factors) / integers (ℤ factors).
    pub fn residues(&self, g: &GroupElement) -> Vec<i64> {
        let moduli = match &self.presentation {
            Presentation::Abelian { moduli } => moduli,
            Presentation::Free { .. } => panic!("residues on a free group"),
        };
        let mut exps = vec![0i64; moduli.len()];
        for &l in &g.letters {
            let (j, sign) = self.factor_of[l as usize];
            exps[j] += sign;
        }
        for (e, &m) in exps.iter_mut().zip(moduli) {
            if m != 0 {
                *e = e.rem_euclid(m as i64);
            }
        }
        exps
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let mut w = g.letters.clone();
        w.extend_from_slice(&h.letters);
        self.reduce_letters(&w)
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        let w: Vec<Letter> = g.letters.iter().rev().map(|&l| self.generators.inverse_of(l)).collect();
        self.reduce_letters(&w)
    }

    /// `g h⁻¹`
    pub fn quotient(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        self.mul(g, &self.inverse(h))
    }

    pub fn word_length(&self, g: &GroupElement) -> usize {
        g.len()
    }

    /// Word-metric distance `|g⁻¹h|`.
    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> usize {
        self.mul(&self.inverse(g), h).len()
    }

    /// Order of the group if finite.
    pub fn order(&self) -> Option<u64> {
        match &self.presentation {
            Presentation::Free { .. } => None,
            Presentation::Abelian { moduli } => {
                if moduli.contains(&0) {
                    None
                } else {
                    Some(moduli.iter().product())
                }
            }
        }
    }

    /// Word-metric diameter for finite groups.
    pub fn diameter(&self) -> Option<u64> {
        match &self.presentation {
            Presentation::Abelian { moduli } if !moduli.contains(&0) => Some(moduli.iter().map(|m| m / 2).sum()),
            _ => None,
        }
    }

    /// All elements with `|γ| < radius`, each once, in shortlex order.
    pub fn enumerate_ball(&self, radius: usize, cap: usize) -> Result<Vec<GroupElement>> {
        if radius == 0 {
            return Ok(Vec::new());
        }
        let mut all = vec![self.identity()];
        let mut seen: HashSet<GroupElement> = HashSet::from([self.identity()]);
        let mut layer = vec![self.identity()];
        for len in 1..radius {
            let mut next = Vec::new();
            for w in &layer {
                for l in 0..self.generators.len() as Letter {
                    let mut letters = w.letters.clone();
                    letters.push(l);
                    let g = self.reduce_letters(&letters);
                    if g.len() == len && seen.insert(g.clone()) {
                        next.push(g);
                        if seen.len() > cap {
                            return Err(Error::CapExceeded {
                                what: "ball enumeration",
                                needed: seen.len(),
                                cap,
                            });
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort();
            all.extend(next.iter().cloned());
            layer = next;
        }
        Ok(all)
    }

    /// Closed ball `|γ| <= radius`.
    pub fn closed_ball(&self, radius: usize, cap: usize) -> Result<Vec<GroupElement>> {
        self.enumerate_ball(radius + 1, cap)
    }

    pub fn format(&self, g: &GroupElement) -> String {
        if g.is_identity() {
            return "e".to_string();
        }
        g.letters
            .iter()
            .map(|&l| self.generators.symbol(l))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn display<'a>(&'a self, g: &'a GroupElement) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Group, &'a GroupElement);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0.format(self.1))
            }
        }
        D(self, g)
    }
}

const SUPERSCRIPTS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];

/// Split `"a^-2"`, `"a⁻¹"`, `"b⁴"` into name and exponent.
fn split_exponent(token: &str) -> (&str, Option<i64>) {
    if let Some((name, exp)) = token.split_once('^') {
        return (name, exp.parse().ok());
    }
    let cut = token
        .char_indices()
        .find(|(_, c)| *c == '⁻' || SUPERSCRIPTS.contains(c))
        .map(|(i, _)| i);
    let Some(cut) = cut else {
        return (token, Some(1));
    };
    let (name, tail) = token.split_at(cut);
    let mut sign = 1;
    let mut digits = String::new();
    for c in tail.chars() {
        if c == '⁻' && digits.is_empty() && sign == 1 {
            sign = -1;
        } else if let Some(d) = SUPERSCRIPTS.iter().position(|&s| s == c) {
            digits.push(char::from(b'0' + d as u8));
        } else {
            return (token, None);
        }
    }
    if digits.is_empty() {
        return (token, None);
    }
    (name, digits.parse::<i64>().ok().map(|d| sign * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_word_is_identity() {
        let f2 = Group::free(2).unwrap();
        let e = f2.reduce("").unwrap();
        assert!(e.is_identity());
        assert_eq!(f2.word_length(&e), 0);
    }

    #[test]
    fn free_cancellation() {
        let f2 = Group::free(2).unwrap();
        let g = f2.reduce("a b b⁻¹").unwrap();
        assert_eq!(f2.format(&g), "a");
        assert_eq!(g.len(), 1);
        assert_eq!(f2.reduce("a b a⁻¹").unwrap().len(), 3);
        assert_eq!(f2.reduce("abAB").unwrap().len(), 4);
    }

    #[test]
    fn cyclic_normal_form_table() {
        // exhaustive table for ℤ/3: a^k ↦ residue k mod 3, word a, A or e
        let z3 = Group::cyclic(3).unwrap();
        let expected = ["e", "a", "A"];
        for k in 0..12 {
            let g = z3.reduce(&format!("a^{k}")).unwrap();
            assert_eq!(z3.format(&g), expected[k % 3], "a^{k}");
            assert_eq!(z3.residues(&g), vec![(k % 3) as i64]);
        }
        let g = z3.reduce("a⁴").unwrap();
        assert_eq!(z3.format(&g), "a");
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn order_two_generator() {
        let z2 = Group::cyclic(2).unwrap();
        assert_eq!(z2.generators().len(), 1);
        assert!(z2.reduce("a a").unwrap().is_identity());
        assert!(GeneratingSet::new(&[("x", "x")], &[]).is_err());
    }

    #[test]
    fn unknown_symbol_is_named() {
        let f2 = Group::free(2).unwrap();
        match f2.reduce("a q") {
            Err(Error::UnknownSymbol(s)) => assert_eq!(s, "q"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(f2.reduce_symbols(&["a", "z"]).is_err());
    }

    #[test]
    fn ball_sizes() {
        let f2 = Group::free(2).unwrap();
        assert_eq!(f2.enumerate_ball(1, 100).unwrap(), vec![f2.identity()]);
        let b3 = f2.enumerate_ball(3, 100).unwrap();
        assert_eq!(b3.len(), 1 + 4 + 12);
        assert!(b3.iter().all(|g| g.len() <= 2));
        assert!(b3.windows(2).all(|w| w[0] < w[1]), "shortlex order");

        let z = Group::integers();
        let b = z.enumerate_ball(4, 100).unwrap();
        let mut values: Vec<i64> = b.iter().map(|g| z.residues(g)[0]).collect();
        values.sort();
        assert_eq!(values, (-3..=3).collect::<Vec<_>>());
    }

    #[test]
    fn ball_cap_is_enforced() {
        let f2 = Group::free(2).unwrap();
        match f2.enumerate_ball(8, 100) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn finite_ball_saturates() {
        let z8 = Group::cyclic(8).unwrap();
        assert_eq!(z8.enumerate_ball(100, 1000).unwrap().len(), 8);
        assert_eq!(z8.diameter(), Some(4));
        let z23 = Group::abelian(&[2, 3]).unwrap();
        assert_eq!(z23.enumerate_ball(10, 100).unwrap().len(), 6);
        assert_eq!(z23.diameter(), Some(2));
    }

    #[test]
    fn length_is_inverse_invariant() {
        let f2 = Group::free(2).unwrap();
        for g in f2.enumerate_ball(4, 1000).unwrap() {
            assert_eq!(g.len(), f2.inverse(&g).len());
            assert!(f2.mul(&g, &f2.inverse(&g)).is_identity());
        }
    }
}
