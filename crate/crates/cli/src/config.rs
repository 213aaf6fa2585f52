//! Experiment configuration: a versioned TOML document where unknown keys
//! are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use warpcone::scalar::Rational;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Towers,
    Warp,
    EmbedCheck,
    Rlocal,
    Cnd,
    Gap,
    Distort,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Towers => "towers",
            Stage::Warp => "warp",
            Stage::EmbedCheck => "embed-check",
            Stage::Rlocal => "rlocal",
            Stage::Cnd => "cnd",
            Stage::Gap => "gap",
            Stage::Distort => "distort",
        }
    }

    /// Stages whose inputs are the warped matrices.
    pub fn needs_warp(self) -> bool {
        matches!(self, Stage::EmbedCheck | Stage::Rlocal | Stage::Cnd | Stage::Distort)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    #[default]
    Auto,
    Off,
    Refresh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A level or scale: an integer, a float, or a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse() {
            Value::Int(i)
        } else if let Ok(f) = s.parse() {
            Value::Float(f)
        } else {
            Value::Text(s.to_string())
        }
    }

    pub fn to_f64(&self) -> Result<f64, CliError> {
        match self {
            Value::Int(i) => Ok(*i as f64),
            Value::Float(f) => Ok(*f),
            Value::Text(_) => {
                let r = self.to_rational()?;
                Ok(*r.numer() as f64 / *r.denom() as f64)
            }
        }
    }

    pub fn to_rational(&self) -> Result<Rational, CliError> {
        match self {
            Value::Int(i) => Ok(Rational::from_integer(*i as i128)),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.abs() < 1e15 {
                    Ok(Rational::from_integer(*f as i128))
                } else {
                    Err(CliError::Config(format!(
                        "{f} is not exact; write rational levels as \"p/q\""
                    )))
                }
            }
            Value::Text(s) => {
                let bad = || CliError::Config(format!("cannot read `{s}` as a number or p/q"));
                match s.split_once('/') {
                    Some((p, q)) => {
                        let p: i128 = p.trim().parse().map_err(|_| bad())?;
                        let q: i128 = q.trim().parse().map_err(|_| bad())?;
                        if q == 0 {
                            return Err(bad());
                        }
                        Ok(Rational::new(p, q))
                    }
                    None => s.trim().parse::<i128>().map(Rational::from_integer).map_err(|_| bad()),
                }
            }
        }
    }

    /// File-name friendly label: `576`, `1_2`, `2.5`.
    pub fn label(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format!("{f}"),
            Value::Text(s) => s.trim().replace('/', "_"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Instance {
    /// ℤ acting on the circle by the rotation `alpha`, nets of resolution `epsilon`.
    Circle {
        #[serde(default)]
        alpha: Option<f64>,
        epsilon: f64,
    },
    /// Free group acting on SU(2), `n`-point nets.
    Su2 {
        n: usize,
        #[serde(default)]
        generators: Option<Vec<[f64; 4]>>,
    },
    /// ℤ^rank acting on the finite quotient of a profinite completion.
    Profinite {
        #[serde(default = "one")]
        rank: usize,
        depth: usize,
        #[serde(default)]
        moduli: Option<Vec<u64>>,
        #[serde(default)]
        scales: Option<Vec<Value>>,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    pub points: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            points: warpcone::space::DEFAULT_POINT_CAP,
        }
    }
}

/// Family for the gap series; empty lists fall back to the instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    /// Profinite tower depths.
    #[serde(default)]
    pub depths: Vec<usize>,
    /// SU(2) net sizes.
    #[serde(default)]
    pub sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CndConfig {
    pub radius: usize,
    pub tuple_radius: usize,
    pub weightings: usize,
}

impl Default for CndConfig {
    fn default() -> Self {
        Self {
            radius: 4,
            tuple_radius: 2,
            weightings: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortConfig {
    #[serde(default)]
    pub dim: Option<usize>,
    pub starts: usize,
    pub iterations: usize,
    /// Levels with more points are skipped.
    pub max_points: usize,
}

impl Default for DistortConfig {
    fn default() -> Self {
        Self {
            dim: None,
            starts: 4,
            iterations: 1500,
            max_points: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub stages: Vec<Stage>,
    pub instance: Instance,
    pub levels: Vec<Value>,
    #[serde(rename = "R", default = "default_radii")]
    pub radii: Vec<Value>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub cache: CachePolicy,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub gap: GapConfig,
    #[serde(default)]
    pub cnd: CndConfig,
    #[serde(default)]
    pub distort: DistortConfig,
}

fn default_radii() -> Vec<Value> {
    vec![Value::Int(1)]
}

fn default_p() -> f64 {
    2.0
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.version != CONFIG_VERSION {
            return fail(format!("config version {} is not {CONFIG_VERSION}", self.version));
        }
        if self.levels.is_empty() {
            return fail("at least one level is required".into());
        }
        let levels = self.levels.iter().map(Value::to_f64).collect::<Result<Vec<_>, _>>()?;
        if levels.iter().any(|&t| !(t >= 1.0)) {
            return fail("levels must be at least 1".into());
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return fail("levels must be strictly increasing".into());
        }
        if matches!(self.instance, Instance::Profinite { .. }) {
            for v in &self.levels {
                v.to_rational()?;
            }
        }
        for r in &self.radii {
            if !(r.to_f64()? > 0.0) {
                return fail("R values must be positive".into());
            }
        }
        if !(self.p >= 1.0) {
            return fail(format!("p = {} < 1", self.p));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.caps.points == 0 {
            return fail("caps must be positive".into());
        }
        if self.distort.starts == 0 || self.distort.iterations == 0 || self.distort.max_points == 0 {
            return fail("distort settings must be positive".into());
        }
        if 2 * self.cnd.tuple_radius > self.cnd.radius {
            return fail("cnd.tuple_radius must be at most half of cnd.radius".into());
        }
        match &self.instance {
            Instance::Circle { epsilon, .. } if !(*epsilon > 0.0) => fail("epsilon must be positive".into()),
            Instance::Su2 { n, .. } if *n < 2 => fail("SU(2) nets need n >= 2".into()),
            Instance::Profinite { rank, depth, .. } if *rank == 0 || *depth == 0 => {
                fail("rank and depth must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "demo"
levels = [2, 4, "9/2"]
[instance]
kind = "profinite"
depth = 4
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.p, 2.0);
        assert_eq!(c.radii, vec![Value::Int(1)]);
        assert_eq!(c.levels[2].to_rational().unwrap(), Rational::new(9, 2));
        assert_eq!(c.levels[2].label(), "9_2");
        assert!(c.stages.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("name = \"demo\"", "name = \"demo\"\nlevles = [1]");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("depth = 4", "depth = 4\ndepht = 5");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn levels_must_increase() {
        let text = MINIMAL.replace("[2, 4, \"9/2\"]", "[4, 2]");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn inexact_profinite_level_is_rejected() {
        let text = MINIMAL.replace("[2, 4, \"9/2\"]", "[2.5]");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn shipped_configs_validate() {
        for text in [
            include_str!("../../../configs/profinite-z.toml"),
            include_str!("../../../configs/su2-f2.toml"),
            include_str!("../../../configs/circle.toml"),
            include_str!("../../../configs/zmod-gap.toml"),
        ] {
            ExperimentConfig::parse(text).unwrap();
        }
    }
}
