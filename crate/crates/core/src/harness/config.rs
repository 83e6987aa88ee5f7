use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiments::check_params;
use crate::error::{Error, Result};

/// Registered experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    ThetaSelftest,
    AbsorbedTail,
    WLaplace,
    GwSemigroup,
    NbbmFront,
    NbrwFront,
    CutoffSpeed,
    CouplingCheck,
    LevyCompare,
    MesoVsLevy,
    LevyCumulants,
    StableppTests,
    Selftest,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 13] = [
        ExperimentId::ThetaSelftest,
        ExperimentId::AbsorbedTail,
        ExperimentId::WLaplace,
        ExperimentId::GwSemigroup,
        ExperimentId::NbbmFront,
        ExperimentId::NbrwFront,
        ExperimentId::CutoffSpeed,
        ExperimentId::CouplingCheck,
        ExperimentId::LevyCompare,
        ExperimentId::MesoVsLevy,
        ExperimentId::LevyCumulants,
        ExperimentId::StableppTests,
        ExperimentId::Selftest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ThetaSelftest => "theta-selftest",
            ExperimentId::AbsorbedTail => "absorbed-tail",
            ExperimentId::WLaplace => "w-laplace",
            ExperimentId::GwSemigroup => "gw-semigroup",
            ExperimentId::NbbmFront => "nbbm-front",
            ExperimentId::NbrwFront => "nbrw-front",
            ExperimentId::CutoffSpeed => "cutoff-speed",
            ExperimentId::CouplingCheck => "coupling-check",
            ExperimentId::LevyCompare => "levy-compare",
            ExperimentId::MesoVsLevy => "meso-vs-levy",
            ExperimentId::LevyCumulants => "levy-cumulants",
            ExperimentId::StableppTests => "stablepp-tests",
            ExperimentId::Selftest => "selftest",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::Config(format!("unknown format '{s}', expected csv, json or both"))),
        }
    }
}

/// The `[run]` section of a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    experiment: Option<String>,
    seed: Option<u64>,
    replicas: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Contents of the experiment's own section; missing keys take defaults.
    pub params: toml::Table,
    pub seed: u64,
    pub replicas: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        ExperimentConfig {
            experiment,
            params: toml::Table::new(),
            seed: 0,
            replicas: 1,
            workers: 1,
            out: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }

    /// Parses a config file. Besides `[run]`, every section must be named
    /// after a registered experiment and is validated against its parameters.
    /// `experiment` overrides `run.experiment`; if both are given they must agree.
    pub fn from_toml(text: &str, experiment: Option<ExperimentId>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut run = RunSection::default();
        let mut sections = Vec::new();
        for (key, value) in table {
            if key == "run" {
                run = value.try_into().map_err(|e: toml::de::Error| Error::Config(format!("[run]: {e}")))?;
                continue;
            }
            let id: ExperimentId = key.parse().map_err(|_| Error::Config(format!("unknown section [{key}]")))?;
            let toml::Value::Table(params) = value else {
                return Err(Error::Config(format!("[{key}] must be a table")));
            };
            check_params(id, &params)?;
            sections.push((id, params));
        }
        let from_file = run.experiment.as_deref().map(str::parse).transpose()?;
        let id = match (experiment, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for '{b}', asked to run '{a}'")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("no experiment named".into())),
        };
        let mut cfg = ExperimentConfig::new(id);
        cfg.params = sections.into_iter().find(|(s, _)| *s == id).map(|(_, p)| p).unwrap_or_default();
        cfg.seed = run.seed.unwrap_or(cfg.seed);
        cfg.replicas = run.replicas.unwrap_or(cfg.replicas);
        cfg.workers = run.workers.unwrap_or(cfg.workers);
        cfg.out = run.out.unwrap_or(cfg.out);
        cfg.format = run.format.unwrap_or(cfg.format);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        check_params(self.experiment, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{id}\""));
        }
        assert!("nope".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn run_section_and_params() {
        let cfg = ExperimentConfig::from_toml(
            "[run]\nexperiment = \"nbbm-front\"\nseed = 9\nreplicas = 3\nworkers = 2\nformat = \"json\"\n\n[nbbm-front]\nn = 20\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentId::NbbmFront);
        assert_eq!((cfg.seed, cfg.replicas, cfg.workers, cfg.format), (9, 3, 2, OutputFormat::Json));
        assert_eq!(cfg.params.get("n").and_then(toml::Value::as_integer), Some(20));
    }

    #[test]
    fn typos_are_errors() {
        let bad = [
            "[run]\nsed = 1\n",
            "[nbbm-frnt]\nn = 3\n",
            "[nbbm-front]\nnn = 3\n",
            "[run]\nexperiment = \"nbbm-front\"\nworkers = 0\n",
            "[run]\nformat = \"xml\"\n",
        ];
        for text in bad {
            let r = ExperimentConfig::from_toml(text, Some(ExperimentId::NbbmFront));
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn subcommand_must_match_the_file() {
        let text = "[run]\nexperiment = \"levy-compare\"\n";
        assert!(ExperimentConfig::from_toml(text, Some(ExperimentId::NbbmFront)).is_err());
        assert!(ExperimentConfig::from_toml(text, Some(ExperimentId::LevyCompare)).is_ok());
        assert!(ExperimentConfig::from_toml("", None).is_err());
    }
}
