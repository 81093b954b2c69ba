//! Experiment configuration files.
//!
//! A config is a TOML document with five sections plus an output path:
//!
//! ```toml
//! output = "runs/sbm_ugcn_trans"
//! representation = "unfolded"      # or "block_diagonal"
//!
//! [dataset]
//! preset = "sbm-paper"             # "sbm-iid", "two-block"; or manifest = "data/school.toml"
//! seed = 0
//! num_times = 8                    # sbm-iid only
//!
//! [model]
//! architecture = "gcn"             # "gat" switches the defaults (longer patience)
//! hidden_dim = 16
//!
//! [regime]
//! regime = "transductive"          # "temporal_transductive", "semi_inductive"
//! ratios = [0.2, 0.1, 0.35, 0.35]
//! n_fits = 10
//! n_permutations = 100
//! alpha = 0.1
//! seed = 0
//!
//! [score]
//! kind = "aps"                     # "raps", "saps"
//! randomized = true
//! ```
//!
//! Every key except `dataset` is optional and falls back to the defaults
//! shown. Environment variables `UNFOLDCP_<SECTION>__<KEY>` (for example
//! `UNFOLDCP_REGIME__ALPHA=0.05`) override single keys; top-level keys use
//! `UNFOLDCP_<KEY>` (`UNFOLDCP_OUTPUT`). Values parse as TOML and fall back
//! to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conformal::ScoreSpec;
use crate::error::{Error, Result};
use crate::evaluation::{Dataset, Regime, RegimeSpec};
use crate::generators::{make_iid_sbm, make_paper_sbm, make_two_block_example, sample_dsbm, DsbmSpec};
use crate::ingestion::{load_dataset, DatasetManifest};
use crate::gnn::{Architecture, ModelConfig};
use crate::representation::RepresentationKind;

pub const ENV_PREFIX: &str = "UNFOLDCP_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "sbm-paper")]
    SbmPaper,
    #[serde(rename = "sbm-iid")]
    SbmIid,
    #[serde(rename = "two-block")]
    TwoBlock,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::SbmPaper, Preset::SbmIid, Preset::TwoBlock];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SbmPaper => "sbm-paper",
            Preset::SbmIid => "sbm-iid",
            Preset::TwoBlock => "two-block",
        }
    }

    /// Dataset name used in reports and reference tables.
    pub fn dataset_name(self) -> &'static str {
        match self {
            Preset::SbmPaper => "sbm",
            Preset::SbmIid => "sbm-iid",
            Preset::TwoBlock => "two-block",
        }
    }

    pub fn spec(self, seed: u64, num_times: Option<usize>) -> Result<DsbmSpec> {
        match self {
            Preset::SbmPaper => Ok(make_paper_sbm(seed)),
            Preset::SbmIid => make_iid_sbm(seed, num_times.unwrap_or(8)),
            Preset::TwoBlock => Ok(make_two_block_example(seed)),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.replace('_', "-"))
            .ok_or_else(|| Error::config("dataset.preset", format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_times: Option<usize>,
}

impl DatasetSource {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        Self {
            preset: Some(preset),
            manifest: None,
            seed,
            num_times: None,
        }
    }

    pub fn manifest(path: impl Into<PathBuf>) -> Self {
        Self {
            preset: None,
            manifest: Some(path.into()),
            seed: 0,
            num_times: None,
        }
    }
}

/// Builds the dataset a config points at: samples a preset or loads a
/// manifest.
pub fn load_source(source: &DatasetSource) -> Result<Dataset> {
    match (&source.preset, &source.manifest) {
        (Some(p), None) => {
            let (graph, labels) = sample_dsbm(&p.spec(source.seed, source.num_times)?)?;
            Dataset::identity_features(p.dataset_name(), graph, labels)
        }
        (None, Some(path)) => {
            let manifest = DatasetManifest::from_file(path)?;
            let loaded = load_dataset(&manifest)?;
            Dataset::identity_features(loaded.name, loaded.graph, loaded.labels)
        }
        _ => Err(Error::config("dataset", "give exactly one of preset and manifest")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub representation: RepresentationKind,
    pub dataset: DatasetSource,
    pub model: ModelConfig,
    pub regime: RegimeSpec,
    pub score: ScoreSpec,
}

fn model_defaults(arch: Architecture) -> ModelConfig {
    match arch {
        Architecture::Gcn => ModelConfig::gcn(),
        Architecture::Gat => ModelConfig::gat(),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
    Error::config(
        "config",
        if line > 0 {
            format!("line {line}: {}", e.message())
        } else {
            e.message().to_string()
        },
    )
}

impl ExperimentConfig {
    /// Defaults for `preset` with the given method and regime.
    pub fn new(dataset: DatasetSource, representation: RepresentationKind, architecture: Architecture, regime: Regime) -> Self {
        Self {
            output: PathBuf::from("runs"),
            representation,
            dataset,
            model: model_defaults(architecture),
            regime: RegimeSpec::new(regime),
            score: ScoreSpec::aps(),
        }
    }

    /// Parses a config document, applying `overrides` (`section.key` → raw
    /// value) on top of it.
    pub fn parse_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        for (key, raw) in overrides {
            let value = parse_value(raw);
            match key.split_once('.') {
                Some((section, field)) => {
                    let entry = doc
                        .entry(section.to_string())
                        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                    let table = entry
                        .as_table_mut()
                        .ok_or_else(|| Error::config(section, "is not a section"))?;
                    table.insert(field.to_string(), value);
                }
                None => {
                    doc.insert(key.clone(), value);
                }
            }
        }
        // Model keys fall back to the defaults of the chosen architecture.
        let user_model = match doc.remove("model") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config("model", "must be a section")),
            None => toml::Table::new(),
        };
        let arch = match user_model.get("architecture") {
            Some(v) => Architecture::deserialize(v.clone())
                .map_err(|e| Error::config("model.architecture", e.message().to_string()))?,
            None => Architecture::Gcn,
        };
        let mut model = toml::Table::try_from(model_defaults(arch)).expect("defaults serialize");
        model.extend(user_model);
        doc.insert("model".into(), toml::Value::Table(model));
        doc.entry("output").or_insert_with(|| toml::Value::String("runs".into()));
        doc.entry("representation")
            .or_insert_with(|| toml::Value::String("unfolded".into()));
        for section in ["regime", "score"] {
            doc.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let config = ExperimentConfig::deserialize(toml::Value::Table(doc)).map_err(|e| {
            Error::config("config", e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    /// Reads `path`, applying `UNFOLDCP_` environment overrides. A relative
    /// dataset manifest resolves against the config's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse_with(&text, &env_overrides())?;
        if let Some(m) = &config.dataset.manifest {
            if m.is_relative() {
                config.dataset.manifest = Some(path.parent().unwrap_or(Path::new("")).join(m));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        crate::evaluation::report::content_hash(&self.to_toml())
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.preset, &self.dataset.manifest) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::config("dataset", "give exactly one of preset and manifest"))
            }
            _ => {}
        }
        if self.dataset.num_times == Some(0) {
            return Err(Error::config("dataset.num_times", "must be at least 1"));
        }
        self.model.validate()?;
        self.regime.validate()?;
        self.score.validate()
    }

    /// Method name used in output tables.
    pub fn method_name(&self) -> String {
        crate::evaluation::Method {
            representation: self.representation,
            model: self.model.clone(),
        }
        .name()
    }
}

/// `(section.key, value)` pairs from `UNFOLDCP_*` environment variables.
/// Variables the CLI handles itself (`UNFOLDCP_SEED`, `UNFOLDCP_JOBS`,
/// `UNFOLDCP_CONFIG`, `UNFOLDCP_LOG`) are skipped.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            if ["SEED", "JOBS", "CONFIG", "LOG", "PRESET"].contains(&rest) {
                return None;
            }
            Some((rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    out.sort();
    out
}

const METHODS: [(&str, RepresentationKind, Architecture); 4] = [
    ("ugcn", RepresentationKind::Unfolded, Architecture::Gcn),
    ("ugat", RepresentationKind::Unfolded, Architecture::Gat),
    ("blockgcn", RepresentationKind::BlockDiagonal, Architecture::Gcn),
    ("blockgat", RepresentationKind::BlockDiagonal, Architecture::Gat),
];

const REGIMES: [(&str, Regime); 3] = [
    ("trans", Regime::Transductive),
    ("semiind", Regime::SemiInductive),
    ("temptrans", Regime::TemporalTransductive),
];

/// Names of the shipped run presets, `<dataset>_<method>_<regime>` with
/// dataset `sbm` (paper SBM) or `sbmiid`.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for data in ["sbm", "sbmiid"] {
        for (m, _, _) in METHODS {
            for (r, _) in REGIMES {
                names.push(format!("{data}_{m}_{r}"));
            }
        }
    }
    names
}

/// A shipped run preset such as `sbm_ugcn_trans`.
pub fn run_preset(name: &str) -> Option<ExperimentConfig> {
    let mut parts = name.split('_');
    let data = match parts.next()? {
        "sbm" => Preset::SbmPaper,
        "sbmiid" => Preset::SbmIid,
        _ => return None,
    };
    let method = parts.next()?;
    let regime = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let (_, rep, arch) = METHODS.iter().find(|(m, _, _)| *m == method)?;
    let (_, regime) = REGIMES.iter().find(|(r, _)| *r == regime)?;
    let mut config = ExperimentConfig::new(DatasetSource::preset(data, 0), *rep, *arch, *regime);
    config.output = PathBuf::from("runs").join(name);
    Some(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let c = ExperimentConfig::parse("[dataset]\npreset = \"sbm-paper\"\n").unwrap();
        assert_eq!(c.model, ModelConfig::gcn());
        assert_eq!(c.regime, RegimeSpec::default());
        assert_eq!(c.representation, RepresentationKind::Unfolded);
    }

    #[test]
    fn gat_defaults_follow_architecture() {
        let c = ExperimentConfig::parse("[dataset]\npreset = \"two-block\"\n[model]\narchitecture = \"gat\"\nhidden_dim = 8\n")
            .unwrap();
        assert_eq!(c.model.patience, crate::gnn::GAT_PATIENCE);
        assert_eq!(c.model.hidden_dim, 8);
    }

    #[test]
    fn round_trip() {
        for name in preset_names() {
            let c = run_preset(&name).unwrap();
            assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn bad_ratios_name_the_field() {
        let err = ExperimentConfig::parse("[dataset]\npreset = \"sbm-paper\"\n[regime]\nratios = [0.5, 0.5, 0.5, 0.5]\n")
            .unwrap_err();
        assert!(err.to_string().contains("regime.ratios"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::parse_with(
            "[dataset]\npreset = \"sbm-paper\"\n",
            &[("regime.alpha".into(), "0.05".into()), ("output".into(), "elsewhere".into())],
        )
        .unwrap();
        assert_eq!(c.regime.alpha, 0.05);
        assert_eq!(c.output, PathBuf::from("elsewhere"));
    }

    #[test]
    fn exactly_one_source() {
        assert!(ExperimentConfig::parse("[dataset]\nseed = 1\n").is_err());
        assert!(
            ExperimentConfig::parse("[dataset]\npreset = \"sbm-paper\"\nmanifest = \"x.toml\"\n").is_err()
        );
    }
}
