//! Run configuration: one JSON file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use simon_learn::optimize::{GaConfig, GdConfig, GridSpec, Periodicity};
use simon_learn::pipeline::OraclesPerSecret;
use simon_learn::{
    BitString, CircuitLayout, GateFamily, LookupTable, MappingTable, PostProcessor, TrainingSet,
};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutChoice {
    Fig4,
    Fig5,
    Fig6,
    /// Path to a JSON-serialized [`CircuitLayout`].
    Custom(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum SecretChoice {
    #[default]
    All,
    List(Vec<BitString>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SecretRepr {
    Word(String),
    List(Vec<BitString>),
}

impl Serialize for SecretChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SecretChoice::All => SecretRepr::Word("all".into()),
            SecretChoice::List(v) => SecretRepr::List(v.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SecretChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match SecretRepr::deserialize(d)? {
            SecretRepr::Word(w) if w == "all" => Ok(SecretChoice::All),
            SecretRepr::Word(w) => Err(serde::de::Error::custom(format!(
                "secrets must be \"all\" or a list of bitstrings, got {w:?}"
            ))),
            SecretRepr::List(v) => Ok(SecretChoice::List(v)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableInit {
    OracleSeeded,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostChoice {
    Gf2,
    Table(TableInit),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Gd(GdConfig),
    Ga(GaConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// Defaults to fig5 for `landscape`, fig6 for `train` at `n >= 3`, fig4 otherwise.
    pub layout: Option<LayoutChoice>,
    pub gate_family: GateFamily,
    /// Queries per episode; defaults to `n`.
    pub j: Option<usize>,
    pub secrets: SecretChoice,
    pub oracles_per_secret: OraclesPerSecret,
    /// Explicit oracle tables; when non-empty they replace the canonical ones.
    pub oracles: Vec<MappingTable>,
    pub post: PostChoice,
    pub optimizer: OptimizerChoice,
    /// Starting point for gradient descent; random from `seed` when absent.
    pub init: Option<Vec<f64>>,
    /// Table-swap steps per round when the post-processor is trained.
    pub table_steps: usize,
    pub grid: GridSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            layout: None,
            gate_family: GateFamily::Restricted,
            j: None,
            secrets: SecretChoice::All,
            oracles_per_secret: OraclesPerSecret::Count(1),
            oracles: Vec::new(),
            post: PostChoice::Gf2,
            optimizer: OptimizerChoice::Ga(GaConfig::default()),
            init: None,
            table_steps: 200,
            grid: GridSpec::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.output_dir = out.clone();
        }
        if let Some(n) = overrides.n {
            cfg.n = n;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Usage("n must be at least 1".into()));
        }
        if self.j == Some(0) {
            return Err(CliError::Usage("J must be at least 1".into()));
        }
        if self.oracles_per_secret == OraclesPerSecret::All
            && self.n > simon_learn::oracle::MAX_ENUMERATION_N
        {
            return Err(CliError::Usage(format!(
                "\"all\" oracles needs n <= {}, got n = {}",
                simon_learn::oracle::MAX_ENUMERATION_N,
                self.n
            )));
        }
        if let SecretChoice::List(v) = &self.secrets {
            if v.is_empty() {
                return Err(CliError::Usage("secret list is empty".into()));
            }
            if let Some(bad) = v.iter().find(|s| s.is_zero() || s.width() != self.n) {
                return Err(CliError::Usage(format!(
                    "secret {bad} must be a nonzero {}-bit string",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn j(&self) -> usize {
        self.j.unwrap_or(self.n)
    }

    pub fn secrets(&self) -> Vec<BitString> {
        match &self.secrets {
            SecretChoice::All => TrainingSet::all_secrets(self.n),
            SecretChoice::List(v) => v.clone(),
        }
    }

    pub fn layout_with_default(&self, default: LayoutChoice) -> Result<CircuitLayout, CliError> {
        let choice = self.layout.clone().unwrap_or(default);
        let layout = match choice {
            LayoutChoice::Fig4 => CircuitLayout::fig4(self.n, self.gate_family)?,
            LayoutChoice::Fig5 => CircuitLayout::fig5(self.n, self.gate_family)?,
            LayoutChoice::Fig6 => CircuitLayout::fig6(self.n, self.gate_family)?,
            LayoutChoice::Custom(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Usage(format!("cannot read layout {}: {e}", path.display()))
                })?;
                let layout: CircuitLayout = serde_json::from_str(&text).map_err(|e| {
                    CliError::Usage(format!("invalid layout {}: {e}", path.display()))
                })?;
                layout.validate()?;
                layout
            }
        };
        if layout.n != self.n {
            return Err(CliError::Usage(format!(
                "layout is for n = {}, config has n = {}",
                layout.n, self.n
            )));
        }
        Ok(layout)
    }

    /// Explicit oracles when given, otherwise canonical ones for `secrets`.
    pub fn training_set(&self, secrets: &[BitString]) -> Result<TrainingSet, CliError> {
        if self.oracles.is_empty() {
            return Ok(TrainingSet::canonical(
                self.n,
                self.j(),
                secrets,
                self.oracles_per_secret,
                self.seed,
            )?);
        }
        let mut per_secret: BTreeMap<BitString, Vec<MappingTable>> = BTreeMap::new();
        for f in &self.oracles {
            per_secret.entry(f.secret()).or_default().push(f.clone());
        }
        Ok(TrainingSet::new(self.n, self.j(), per_secret)?)
    }

    pub fn initial_post(&self) -> Result<PostProcessor, CliError> {
        Ok(match self.post {
            PostChoice::Gf2 => PostProcessor::Gf2,
            PostChoice::Table(TableInit::OracleSeeded) => {
                PostProcessor::Table(LookupTable::from_gf2(self.n, self.j())?)
            }
            PostChoice::Table(TableInit::Random) => PostProcessor::Table(LookupTable::random(
                self.n,
                self.j(),
                self.seed ^ TABLE_SEED_SALT,
            )?),
        })
    }

    /// Optimizer settings with the run seed and the layout's periodicity applied.
    pub fn optimizer_for(&self, layout: &CircuitLayout) -> OptimizerChoice {
        let mask = layout.periodic_mask();
        let periodicity = if mask.iter().all(|&m| m) {
            Periodicity::All
        } else {
            Periodicity::Mask(mask)
        };
        match &self.optimizer {
            OptimizerChoice::Gd(gd) => {
                let mut gd = gd.clone();
                if gd.periodicity == Periodicity::All {
                    gd.periodicity = periodicity;
                }
                OptimizerChoice::Gd(gd)
            }
            OptimizerChoice::Ga(ga) => {
                let mut ga = ga.clone();
                ga.seed = self.seed;
                if ga.periodicity == Periodicity::All {
                    ga.periodicity = periodicity;
                }
                OptimizerChoice::Ga(ga)
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the config JSON, leaving out
    /// `output_dir` so the same run hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let keyed = RunConfig {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

pub(crate) const TABLE_SEED_SALT: u64 = 0x7ab1e;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::load(
            None,
            &Overrides {
                seed: Some(4),
                n: Some(3),
                out: None,
            },
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.j(), 3);
        assert_eq!(cfg.secrets().len(), 7);
    }

    #[test]
    fn parses_json_shapes() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"n": 2, "layout": "fig5", "secrets": ["11"], "oracles_per_secret": "all",
                "post": {"table": "random"}, "optimizer": {"gd": {"eta": 0.05, "steps": 3}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.layout, Some(LayoutChoice::Fig5));
        assert_eq!(cfg.oracles_per_secret, OraclesPerSecret::All);
        assert_eq!(cfg.post, PostChoice::Table(TableInit::Random));
        assert!(
            matches!(cfg.optimizer, OptimizerChoice::Gd(ref g) if g.steps == 3 && g.fd_epsilon == 1e-5)
        );
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn capacity_gate_on_all_oracles() {
        let mut cfg = RunConfig {
            n: 5,
            oracles_per_secret: OraclesPerSecret::All,
            ..Default::default()
        };
        assert!(matches!(cfg.check(), Err(CliError::Usage(_))));
        cfg.n = 4;
        assert!(cfg.check().is_ok());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 1,
            ..Default::default()
        };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let moved = RunConfig {
            output_dir: PathBuf::from("elsewhere"),
            ..Default::default()
        };
        assert_eq!(a.hash(), moved.hash());
    }
}
