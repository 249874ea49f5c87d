use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GhzGap,
    Density,
    EpsilonLimit,
    ToricGround,
    PhiSweep,
    Prop1,
    Additivity,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::GhzGap,
        Experiment::Density,
        Experiment::EpsilonLimit,
        Experiment::ToricGround,
        Experiment::PhiSweep,
        Experiment::Prop1,
        Experiment::Additivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GhzGap => "ghz-gap",
            Experiment::Density => "density",
            Experiment::EpsilonLimit => "epsilon-limit",
            Experiment::ToricGround => "toric-ground",
            Experiment::PhiSweep => "phi-sweep",
            Experiment::Prop1 => "prop1",
            Experiment::Additivity => "additivity",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Sparse,
    #[default]
    Auto,
}

/// Inclusive size range `A..B`, optionally with a step: `A..B:S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SizeRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl SizeRange {
    pub fn new(start: usize, end: usize, step: usize) -> Result<Self> {
        if end < start || step == 0 {
            return Err(CliError::Config(format!("empty size range {start}..{end}:{step}")));
        }
        Ok(SizeRange { start, end, step })
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

impl FromStr for SizeRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Config(format!("size range must look like A..B or A..B:S, got {s:?}"));
        let (range, step) = match s.split_once(':') {
            Some((r, st)) => (r, st.trim().parse().map_err(|_| bad())?),
            None => (s, 1),
        };
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        SizeRange::new(a, b, step)
    }
}

impl TryFrom<String> for SizeRange {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SizeRange> for String {
    fn from(r: SizeRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.step == 1 {
            write!(f, "{}..{}", self.start, self.end)
        } else {
            write!(f, "{}..{}:{}", self.start, self.end, self.step)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Eigenvalues below this count as zero.
    pub tau_null: f64,
    /// A certified ground space needs the next eigenvalue above this.
    pub tau_gap: f64,
    /// Lanczos residual target.
    pub lanczos: f64,
    /// Ground-space agreement.
    pub ground_distance: f64,
    /// `||h v||` for vectors claimed to lie in a kernel.
    pub containment: f64,
    /// Distance of an alternating-projection fixed point to the claimed intersection.
    pub fixed_point: f64,
    /// Tail bound for the small-epsilon limit.
    pub limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_null: 1e-8,
            tau_gap: 1e-4,
            lanczos: 1e-12,
            ground_distance: 1e-8,
            containment: 1e-10,
            fixed_point: 1e-6,
            limit: 1e-6,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            ("tau_null", self.tau_null),
            ("tau_gap", self.tau_gap),
            ("lanczos", self.lanczos),
            ("ground_distance", self.ground_distance),
            ("containment", self.containment),
            ("fixed_point", self.fixed_point),
            ("limit", self.limit),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Chain lengths, or strip lengths for `phi-sweep`.
    pub sizes: SizeRange,
    pub r_values: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub iteration_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub backend: Backend,
}

/// Every field optional: the shape of a config file and of command-line
/// overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub experiment: Option<Experiment>,
    pub sizes: Option<SizeRange>,
    pub r_values: Option<Vec<usize>>,
    pub eps_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub tolerances: Option<Tolerances>,
    pub iteration_cap: Option<usize>,
    pub out: Option<PathBuf>,
    pub backend: Option<Backend>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `other` wins wherever it sets a field.
    pub fn merged(self, other: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            experiment: other.experiment.or(self.experiment),
            sizes: other.sizes.or(self.sizes),
            r_values: other.r_values.or(self.r_values),
            eps_grid: other.eps_grid.or(self.eps_grid),
            seed: other.seed.or(self.seed),
            tolerances: other.tolerances.or(self.tolerances),
            iteration_cap: other.iteration_cap.or(self.iteration_cap),
            out: other.out.or(self.out),
            backend: other.backend.or(self.backend),
        }
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    experiment: Experiment,
    sizes: &'a SizeRange,
    r_values: &'a [usize],
    eps_grid: &'a [f64],
    seed: u64,
    tolerances: &'a Tolerances,
    iteration_cap: usize,
    backend: Backend,
    version: &'a str,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (sizes, r_values) = match experiment {
            Experiment::GhzGap => (SizeRange { start: 4, end: 14, step: 1 }, vec![]),
            Experiment::Density => (SizeRange { start: 8, end: 12, step: 2 }, vec![]),
            Experiment::EpsilonLimit => (SizeRange { start: 3, end: 3, step: 1 }, vec![]),
            Experiment::ToricGround => (SizeRange { start: 2, end: 2, step: 1 }, vec![]),
            Experiment::PhiSweep => (SizeRange { start: 8, end: 10, step: 2 }, vec![3, 4, 5, 6, 7]),
            Experiment::Prop1 => (SizeRange { start: 3, end: 3, step: 1 }, vec![]),
            Experiment::Additivity => (SizeRange { start: 16, end: 16, step: 1 }, vec![]),
        };
        ExperimentConfig {
            experiment,
            sizes,
            r_values,
            eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4],
            seed: 7,
            tolerances: Tolerances::default(),
            iteration_cap: 1000,
            out: None,
            backend: Backend::Auto,
        }
    }

    pub fn resolve(experiment: Experiment, overrides: &ConfigOverrides) -> Result<Self> {
        let mut c = Self::defaults(experiment);
        if let Some(s) = overrides.sizes {
            c.sizes = s;
        }
        if let Some(r) = &overrides.r_values {
            c.r_values = r.clone();
        }
        if let Some(e) = &overrides.eps_grid {
            c.eps_grid = e.clone();
        }
        if let Some(s) = overrides.seed {
            c.seed = s;
        }
        if let Some(t) = &overrides.tolerances {
            c.tolerances = t.clone();
        }
        if let Some(i) = overrides.iteration_cap {
            c.iteration_cap = i;
        }
        c.out = overrides.out.clone();
        if let Some(b) = overrides.backend {
            c.backend = b;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        SizeRange::new(self.sizes.start, self.sizes.end, self.sizes.step)?;
        self.tolerances.validate()?;
        if self.iteration_cap == 0 {
            return Err(CliError::Config("iteration_cap must be >= 1".into()));
        }
        if self.experiment == Experiment::PhiSweep && self.r_values.is_empty() {
            return Err(CliError::Config("phi-sweep needs at least one r value".into()));
        }
        if self.experiment == Experiment::EpsilonLimit {
            if self.eps_grid.len() < 2 {
                return Err(CliError::Config("the epsilon grid needs at least two points".into()));
            }
            if self.eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) || self.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(CliError::Config("the epsilon grid must be positive and strictly descending".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 over every input that affects results; the output directory
    /// is excluded.
    pub fn hash(&self) -> String {
        let input = HashInput {
            experiment: self.experiment,
            sizes: &self.sizes,
            r_values: &self.r_values,
            eps_grid: &self.eps_grid,
            seed: self.seed,
            tolerances: &self.tolerances,
            iteration_cap: self.iteration_cap,
            backend: self.backend,
            version: VERSION,
        };
        let bytes = serde_json::to_vec(&input).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_ranges_parse() {
        assert_eq!("6..14".parse::<SizeRange>().unwrap().values(), (6..=14).collect::<Vec<_>>());
        assert_eq!("8..12:2".parse::<SizeRange>().unwrap().values(), vec![8, 10, 12]);
        assert!("9..3".parse::<SizeRange>().is_err());
        assert!("x".parse::<SizeRange>().is_err());
        let r: SizeRange = serde_json::from_str("\"8..12:2\"").unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"8..12:2\"");
    }

    #[test]
    fn command_line_overrides_file() {
        let file = ConfigOverrides::from_json(r#"{"seed": 3, "sizes": "4..6"}"#).unwrap();
        let cli = ConfigOverrides { seed: Some(9), ..Default::default() };
        let c = ExperimentConfig::resolve(Experiment::GhzGap, &file.merged(cli)).unwrap();
        assert_eq!((c.seed, c.sizes.values()), (9, vec![4, 5, 6]));
        assert!(ConfigOverrides::from_json(r#"{"sead": 3}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = ExperimentConfig::defaults(Experiment::Density);
        let mut b = a.clone();
        b.out = Some("/tmp/x".into());
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_tolerances_are_rejected() {
        let mut t = Tolerances::default();
        t.tau_null = 0.0;
        let o = ConfigOverrides { tolerances: Some(t), ..Default::default() };
        assert!(ExperimentConfig::resolve(Experiment::GhzGap, &o).is_err());
    }
}
