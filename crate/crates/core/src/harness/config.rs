use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmppo::HyperParams;
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hmppo,
    Ippo,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Hmppo, Algorithm::Ippo, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hmppo => "hmppo",
            Algorithm::Ippo => "ippo",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}' (expected hmppo, ippo or random)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { algorithm: Algorithm::Hmppo, seeds: vec![1], out_dir: PathBuf::from("runs/default") }
    }
}

/// Everything needed to reproduce a run: `[sys]`, `[hyper]` and `[run]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sys: SystemConfig,
    pub hyper: HyperParams,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// `"default"` yields the built-in configuration; anything else is read
    /// as a TOML file whose missing keys take their defaults.
    pub fn load(source: &str) -> Result<Self> {
        if source == "default" {
            return Ok(Self::default());
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    /// Applies one `section.key=value` override. The value is read as a TOML
    /// literal, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form section.key=value")))?;
        let key = key.trim();
        let (section, field) =
            key.split_once('.').ok_or_else(|| Error::Config(format!("override key '{key}' must be section.key")))?;

        let mut doc = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let table = doc
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::Config(format!("unknown config section '{section}' in '{key}'")))?;
        if !table.contains_key(field) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        table.insert(field.to_string(), parse_literal(raw.trim()));

        let updated: ExperimentConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("bad value for '{key}': {}", e.message())))?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sys.validate()?;
        self.hyper.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must list at least one seed".into()));
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.sys.num_ues = 6;
        cfg.run.algorithm = Algorithm::Ippo;
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("[sys]") && text.contains("[hyper]") && text.contains("[run]"));
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("[sys]\nnum_ues = 7\n[run]\nalgorithm = \"random\"\n").unwrap();
        assert_eq!(cfg.sys.num_ues, 7);
        assert_eq!(cfg.run.algorithm, Algorithm::Random);
        assert_eq!(cfg.hyper, HyperParams::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml("[sys]\nnum_uez = 7\n").unwrap_err().to_string();
        assert!(err.contains("num_uez"), "{err}");
        let mut cfg = ExperimentConfig::default();
        let err = cfg.set("sys.bogus=1").unwrap_err().to_string();
        assert!(err.contains("sys.bogus"), "{err}");
        let err = cfg.set("nope.num_ues=1").unwrap_err().to_string();
        assert!(err.contains("nope"), "{err}");
        let err = cfg.set("sys.num_ues=abc").unwrap_err().to_string();
        assert!(err.contains("sys.num_ues"), "{err}");
        assert!(cfg.set("sys.num_ues").is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("sys.num_ues=9").unwrap();
        cfg.set("hyper.actor_lr = 1e-4").unwrap();
        cfg.set("run.algorithm=ippo").unwrap();
        cfg.set("run.seeds=[4, 5]").unwrap();
        cfg.set("hyper.hidden=[32]").unwrap();
        cfg.set("sys.complexity_scaling=accuracy").unwrap();
        assert_eq!(cfg.sys.num_ues, 9);
        assert_eq!(cfg.hyper.actor_lr, 1e-4);
        assert_eq!(cfg.run.algorithm, Algorithm::Ippo);
        assert_eq!(cfg.run.seeds, vec![4, 5]);
        assert_eq!(cfg.hyper.hidden, vec![32]);
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ppo".parse::<Algorithm>().is_err());
    }
}
