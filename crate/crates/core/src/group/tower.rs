//! Towers of finite quotients `ℤ^k / m_n ℤ^k` and the profinite max-metric.

use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Group;
use crate::error::{Error, Result};
use crate::scalar::Rational;

/// Nested finite quotients `Γ/Γ_n` of `Γ = ℤ^k` with `Γ_n = m_n ℤ^k`,
/// together with the scale sequence `a_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientTower {
    rank: usize,
    moduli: Vec<u64>,
    #[serde(with = "rational_vec")]
    scales: Vec<Rational>,
    #[serde(skip)]
    levels: Vec<Group>,
}

/// A compatible sequence `(g_1, …, g_N)` with `g_n ∈ Γ/Γ_n` as residue vectors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TowerElement {
    pub levels: Vec<Vec<i64>>,
}

impl QuotientTower {
    /// Tower with the default scales `a_1 = 1`, `a_{n+1} = a_n / (2 diam(Γ/Γ_n))`.
    pub fn new(rank: usize, moduli: &[u64]) -> Result<Self> {
        let levels = Self::build_levels(rank, moduli)?;
        let mut scales = vec![Rational::one()];
        for level in &levels[..levels.len() - 1] {
            let diam = level.diameter().expect("finite level") as i128;
            let prev = *scales.last().expect("nonempty");
            scales.push(prev / Rational::from_integer(2 * diam));
        }
        Self::with_scales(rank, moduli, scales)
    }

    /// Dyadic tower `Γ_n = 2ⁿ ℤ^k` up to `depth`.
    pub fn dyadic(rank: usize, depth: usize) -> Result<Self> {
        let moduli: Vec<u64> = (1..=depth).map(|n| 1u64 << n).collect();
        Self::new(rank, &moduli)
    }

    /// Tower with explicit scales, validated against
    /// `a_{n+1} < a_n / diam(Γ/Γ_n)`.
    pub fn with_scales(rank: usize, moduli: &[u64], scales: Vec<Rational>) -> Result<Self> {
        let levels = Self::build_levels(rank, moduli)?;
        if scales.len() != moduli.len() {
            return Err(Error::InvalidTower(format!(
                "{} scales for {} levels",
                scales.len(),
                moduli.len()
            )));
        }
        if scales.iter().any(|a| *a <= Rational::zero()) {
            return Err(Error::InvalidTower("scales must be positive".into()));
        }
        for n in 0..scales.len().saturating_sub(1) {
            let diam = levels[n].diameter().expect("finite level") as i128;
            let bound = scales[n] / Rational::from_integer(diam);
            if scales[n + 1] >= bound || scales[n + 1] >= scales[n] {
                return Err(Error::InvalidTower(format!(
                    "scale constraint a_{} < a_{} / diam(Γ/Γ_{}) fails: {} vs {}",
                    n + 2,
                    n + 1,
                    n + 1,
                    scales[n + 1],
                    bound
                )));
            }
        }
        Ok(Self {
            rank,
            moduli: moduli.to_vec(),
            scales,
            levels,
        })
    }

    fn build_levels(rank: usize, moduli: &[u64]) -> Result<Vec<Group>> {
        if rank == 0 {
            return Err(Error::InvalidTower("rank must be positive".into()));
        }
        if moduli.is_empty() {
            return Err(Error::InvalidTower("tower needs at least one level".into()));
        }
        let mut prev = 1u64;
        for &m in moduli {
            if m <= prev || m % prev != 0 {
                return Err(Error::InvalidTower(format!(
                    "moduli must strictly increase by divisibility, got {m} after {prev}"
                )));
            }
            prev = m;
        }
        moduli.iter().map(|&m| Group::abelian(&vec![m; rank])).collect()
    }

    /// Restore derived data after deserialization.
    pub fn rehydrate(self) -> Result<Self> {
        Self::with_scales(self.rank, &self.moduli, self.scales)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn depth(&self) -> usize {
        self.moduli.len()
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn scales(&self) -> &[Rational] {
        &self.scales
    }

    /// The finite quotient `Γ/Γ_n` (1-based level).
    pub fn level(&self, n: usize) -> &Group {
        &self.levels[n - 1]
    }

    /// The dense subgroup `Γ = ℤ^k`.
    pub fn base_group(&self) -> Group {
        Group::free_abelian(self.rank).expect("rank validated")
    }

    /// Image of `Γ/Γ_N` residues in every level `1..=N`.
    pub fn element_from_top(&self, residues: &[i64], depth: usize) -> TowerElement {
        let levels = self.moduli[..depth]
            .iter()
            .map(|&m| residues.iter().map(|r| r.rem_euclid(m as i64)).collect())
            .collect();
        TowerElement { levels }
    }

    /// Image of an element of `ℤ^k` (given by integer coordinates).
    pub fn image_of(&self, coords: &[i64], depth: usize) -> TowerElement {
        self.element_from_top(coords, depth)
    }

    /// Checks `g_{n-1} = q_n(g_n)` and residue ranges.
    pub fn validate(&self, g: &TowerElement) -> Result<()> {
        if g.levels.len() > self.depth() {
            return Err(Error::IncompatibleTower {
                level: self.depth() + 1,
                detail: "sequence deeper than tower".into(),
            });
        }
        for (n, level) in g.levels.iter().enumerate() {
            let m = self.moduli[n] as i64;
            if level.len() != self.rank || level.iter().any(|&r| r < 0 || r >= m) {
                return Err(Error::IncompatibleTower {
                    level: n + 1,
                    detail: format!("{level:?} is not a residue vector mod {m}"),
                });
            }
            if n > 0 {
                let pm = self.moduli[n - 1] as i64;
                let projected: Vec<i64> = level.iter().map(|r| r.rem_euclid(pm)).collect();
                if projected != g.levels[n - 1] {
                    return Err(Error::IncompatibleTower {
                        level: n + 1,
                        detail: format!("q({level:?}) = {projected:?} ≠ {:?}", g.levels[n - 1]),
                    });
                }
            }
        }
        Ok(())
    }

    /// Word length of a residue vector in `Γ/Γ_n` w.r.t. the image of `S`.
    pub fn level_length(&self, n: usize, residues: &[i64]) -> u64 {
        let m = self.moduli[n - 1] as i64;
        residues
            .iter()
            .map(|r| {
                let r = r.rem_euclid(m);
                r.min(m - r) as u64
            })
            .sum()
    }
}

/// `max_{n ≤ N} a_n · |g_n h_n⁻¹|_S`, exact.
pub fn tower_metric(g: &TowerElement, h: &TowerElement, tower: &QuotientTower, depth: usize) -> Result<Rational> {
    if g.levels.len() < depth || h.levels.len() < depth {
        return Err(Error::IncompatibleTower {
            level: depth,
            detail: "sequence shorter than requested depth".into(),
        });
    }
    if depth > tower.depth() {
        return Err(Error::IncompatibleTower {
            level: depth,
            detail: format!("tower has only {} levels", tower.depth()),
        });
    }
    let g = TowerElement {
        levels: g.levels[..depth].to_vec(),
    };
    let h = TowerElement {
        levels: h.levels[..depth].to_vec(),
    };
    tower.validate(&g)?;
    tower.validate(&h)?;
    let mut best = Rational::zero();
    for n in 1..=depth {
        let diff: Vec<i64> = g.levels[n - 1]
            .iter()
            .zip(&h.levels[n - 1])
            .map(|(a, b)| a - b)
            .collect();
        let len = tower.level_length(n, &diff);
        let value = tower.scales[n - 1] * Rational::from_integer(len as i128);
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

impl Serialize for TowerElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.levels.iter().all(|l| l.len() == 1) {
            let flat: Vec<i64> = self.levels.iter().map(|l| l[0]).collect();
            flat.serialize(serializer)
        } else {
            self.levels.serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for TowerElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Flat(Vec<i64>),
            Nested(Vec<Vec<i64>>),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Flat(v) => TowerElement {
                levels: v.into_iter().map(|r| vec![r]).collect(),
            },
            Repr::Nested(levels) => TowerElement { levels },
        })
    }
}

pub(crate) mod rational_vec {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use crate::scalar::{parse_rational, Rational, Scalar};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|r| r.render()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).ok_or_else(|| D::Error::custom(format!("bad rational `{s}`"))))
            .collect()
    }
}
