//! Proper 1-cocycles with integer sparse coordinates.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, GroupElement, Presentation};

/// Coordinate of the target `ℓ_p` space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Key {
    /// Oriented Cayley-tree edge `w → w·s` for a positive generator `s`.
    Edge { from: GroupElement, generator: u16 },
    /// Unit interval `[pos, pos + 1]` on one axis of `ℤ^k`.
    Site { axis: u16, pos: i64 },
}

/// Finitely supported integer vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseVector {
    coords: BTreeMap<Key, i64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn support(&self) -> usize {
        self.coords.len()
    }

    pub fn get(&self, key: &Key) -> i64 {
        self.coords.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &i64)> {
        self.coords.iter()
    }

    pub fn add_at(&mut self, key: Key, value: i64) {
        match self.coords.entry(key) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += value;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                if value != 0 {
                    e.insert(value);
                }
            }
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &v) in &other.coords {
            out.add_at(k.clone(), v);
        }
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &v) in &other.coords {
            out.add_at(k.clone(), -v);
        }
        out
    }

    /// `Σ c²`, exact.
    pub fn norm_sq(&self) -> i64 {
        self.coords.values().map(|v| v * v).sum()
    }

    /// `Σ |c|^p`.
    pub fn norm_pow(&self, p: f64) -> f64 {
        self.coords.values().map(|v| (v.abs() as f64).powf(p)).sum()
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.norm_pow(p).powf(1.0 / p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleKind {
    Tree,
    Shift,
}

/// A linear isometric representation `π` on sparse vectors with a 1-cocycle `b`.
#[derive(Clone, Debug)]
pub struct Cocycle {
    kind: CocycleKind,
    group: Group,
}

impl Cocycle {
    /// Edge-path cocycle of the Cayley tree of a free group.
    pub fn tree(group: &Group) -> Result<Self> {
        if !group.is_free() {
            return Err(Error::Contract(format!(
                "tree cocycle needs a free group, got {}",
                group.name()
            )));
        }
        Ok(Self {
            kind: CocycleKind::Tree,
            group: group.clone(),
        })
    }

    /// Interval cocycle of `ℤ^k`, one chain per axis.
    pub fn shift(group: &Group) -> Result<Self> {
        match group.presentation() {
            Presentation::Abelian { moduli } if moduli.iter().all(|&m| m == 0) => Ok(Self {
                kind: CocycleKind::Shift,
                group: group.clone(),
            }),
            _ => Err(Error::Contract(format!(
                "shift cocycle needs ℤ^k, got {}",
                group.name()
            ))),
        }
    }

    /// Tree cocycle for free groups, shift cocycle for `ℤ^k`.
    pub fn for_group(group: &Group) -> Result<Self> {
        if group.is_free() {
            Self::tree(group)
        } else {
            Self::shift(group)
        }
    }

    pub fn kind(&self) -> CocycleKind {
        self.kind
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    /// `b_γ`.
    pub fn value(&self, g: &GroupElement) -> SparseVector {
        let mut out = SparseVector::new();
        match self.kind {
            CocycleKind::Tree => {
                let letters = g.letters();
                for (i, &l) in letters.iter().enumerate() {
                    let generator = l / 2;
                    if l % 2 == 0 {
                        let from = self.group.reduce_letters(&letters[..i]);
                        out.add_at(Key::Edge { from, generator }, 1);
                    } else {
                        let from = self.group.reduce_letters(&letters[..=i]);
                        out.add_at(Key::Edge { from, generator }, -1);
                    }
                }
            }
            CocycleKind::Shift => {
                for (axis, &e) in self.group.residues(g).iter().enumerate() {
                    let (range, sign) = if e >= 0 { (0..e, 1) } else { (e..0, -1) };
                    for pos in range {
                        out.add_at(Key::Site { axis: axis as u16, pos }, sign);
                    }
                }
            }
        }
        out
    }

    /// `π_γ v`.
    pub fn act(&self, g: &GroupElement, v: &SparseVector) -> SparseVector {
        let shift = match self.kind {
            CocycleKind::Shift => self.group.residues(g),
            CocycleKind::Tree => Vec::new(),
        };
        let mut out = SparseVector::new();
        for (key, &c) in v.iter() {
            let moved = match key {
                Key::Edge { from, generator } => Key::Edge {
                    from: self.group.mul(g, from),
                    generator: *generator,
                },
                Key::Site { axis, pos } => Key::Site {
                    axis: *axis,
                    pos: pos + shift[*axis as usize],
                },
            };
            out.add_at(moved, c);
        }
        out
    }

    /// `α_γ v = π_γ v + b_γ`.
    pub fn affine(&self, g: &GroupElement, v: &SparseVector) -> SparseVector {
        self.act(g, v).plus(&self.value(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::DEFAULT_BALL_CAP;

    #[test]
    fn identity_and_norms() {
        let f2 = Group::free(2).unwrap();
        let tree = Cocycle::tree(&f2).unwrap();
        assert!(tree.value(&f2.identity()).is_zero());
        let g = f2.reduce("a b A b").unwrap();
        assert_eq!(tree.value(&g).norm(2.0), 2.0);
        let z = Group::integers();
        let shift = Cocycle::shift(&z).unwrap();
        assert!(shift.value(&z.identity()).is_zero());
        assert_eq!(shift.value(&z.from_exponents(&[9])).norm(2.0), 3.0);
        assert_eq!(shift.value(&z.from_exponents(&[-9])).norm_sq(), 9);
    }

    #[test]
    fn tree_cocycle_needs_free_group() {
        assert!(matches!(Cocycle::tree(&Group::integers()), Err(Error::Contract(_))));
        assert!(matches!(
            Cocycle::shift(&Group::free(2).unwrap()),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            Cocycle::shift(&Group::cyclic(4).unwrap()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn cocycle_identity_on_small_balls() {
        for group in [Group::free(2).unwrap(), Group::free_abelian(2).unwrap()] {
            let c = Cocycle::for_group(&group).unwrap();
            let ball = group.closed_ball(3, DEFAULT_BALL_CAP).unwrap();
            for g in &ball {
                for h in &ball {
                    let lhs = c.value(&group.mul(g, h));
                    let rhs = c.act(g, &c.value(h)).plus(&c.value(g));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn representation_is_isometric_and_multiplicative() {
        let f2 = Group::free(2).unwrap();
        let c = Cocycle::tree(&f2).unwrap();
        let v = c
            .value(&f2.reduce("a a B").unwrap())
            .minus(&c.value(&f2.reduce("b").unwrap()));
        let g = f2.reduce("b A").unwrap();
        let h = f2.reduce("a a").unwrap();
        assert_eq!(c.act(&g, &v).norm_sq(), v.norm_sq());
        assert_eq!(c.act(&f2.mul(&g, &h), &v), c.act(&g, &c.act(&h, &v)));
    }
}
