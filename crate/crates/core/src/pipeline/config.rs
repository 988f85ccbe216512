//! Pipeline configuration: TOML file, defaults, environment overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendDescriptor, BackendKind, DecodingConfig};
use crate::detect::{ContextWindow, DEFAULT_PARAPHRASES, DEFAULT_THRESHOLD};
use crate::selfchat::SelfChatConfig;
use crate::tod::TerminationPolicy;
use crate::transition::DEFAULT_CANDIDATES;

/// Prefix of environment overrides. `BRIDGECHAT__IO__OUTPUT_PATH=out.jsonl`
/// sets `io.output_path`; values are parsed as TOML, falling back to a
/// plain string.
pub const ENV_PREFIX: &str = "BRIDGECHAT__";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: invalid TOML: {message}")]
    Syntax { path: String, message: String },
    #[error("{key}: {message}")]
    Field { key: String, message: String },
    #[error("environment override {var}: {message}")]
    Env { var: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub backends: BackendsConfig,
    pub selfchat: SelfChatConfig,
    pub detection: DetectionConfig,
    pub transition: TransitionConfig,
    pub continuation: ContinuationConfig,
    pub io: IoConfig,
    pub training: TrainingDefaults,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendsConfig {
    pub chitchat: BackendDescriptor,
    pub qa: BackendDescriptor,
    pub paraphrase: BackendDescriptor,
    pub transition: BackendDescriptor,
    pub tod_user: BackendDescriptor,
    pub tod_sales: BackendDescriptor,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        BackendsConfig {
            chitchat: BackendDescriptor::mock(BackendKind::Chat, "mock-chitchat"),
            qa: BackendDescriptor::mock(BackendKind::Qa, "mock-qa"),
            paraphrase: BackendDescriptor::mock(BackendKind::Paraphrase, "mock-paraphrase"),
            transition: BackendDescriptor::mock(BackendKind::Seq2seq, "mock-transition"),
            tod_user: BackendDescriptor::mock(BackendKind::Chat, "mock-tod-user")
                .with_decoding(DecodingConfig::simulator()),
            tod_sales: BackendDescriptor::mock(BackendKind::Chat, "mock-tod-sales")
                .with_decoding(DecodingConfig::simulator()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub threshold: f64,
    pub window: ContextWindow,
    pub n_paraphrases: usize,
    /// Catalog JSON to use instead of the built-in intents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog_file: Option<PathBuf>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            threshold: DEFAULT_THRESHOLD,
            window: ContextWindow::All,
            n_paraphrases: DEFAULT_PARAPHRASES,
            catalog_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionConfig {
    pub n_candidates: usize,
    /// Replace the template with a generated transition.
    pub generative: bool,
    pub decoding: DecodingConfig,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            n_candidates: DEFAULT_CANDIDATES,
            generative: true,
            decoding: DecodingConfig::transition(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContinuationMode {
    #[default]
    #[serde(alias = "MERGE_SGD", alias = "merge_sgd")]
    Merge,
    #[serde(alias = "SIMULATION", alias = "simulation")]
    Sim,
    #[serde(alias = "MIXED")]
    Mixed,
}

impl std::str::FromStr for ContinuationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "merge" | "merge_sgd" => Ok(ContinuationMode::Merge),
            "sim" | "simulation" => Ok(ContinuationMode::Sim),
            "mixed" => Ok(ContinuationMode::Mixed),
            other => Err(format!("unknown mode `{other}`, expected merge, sim or mixed")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub mode: ContinuationMode,
    /// Probability of simulation in mixed mode.
    pub p_sim: f64,
    pub policy: TerminationPolicy,
    pub decoding: DecodingConfig,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            mode: ContinuationMode::Merge,
            p_sim: 0.49,
            policy: TerminationPolicy::default(),
            decoding: DecodingConfig::simulator(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persona_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgd_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otters_path: Option<PathBuf>,
    pub output_path: PathBuf,
    /// Replace annotated slot values in SGD system turns when the corpus is
    /// not already delexicalized.
    pub sgd_delexicalize: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            persona_file: None,
            sgd_path: None,
            otters_path: None,
            output_path: PathBuf::from("corpus.jsonl"),
            sgd_delexicalize: false,
        }
    }
}

/// Hyperparameters handed to external trainers; nothing here is trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerDefaults {
    pub learning_rate: f64,
    pub batch_size: u32,
    pub epochs: u32,
    pub optimizer: String,
    pub model_selection: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingDefaults {
    pub qa: TrainerDefaults,
    pub transition: TrainerDefaults,
    pub simulators: TrainerDefaults,
}

impl Default for TrainingDefaults {
    fn default() -> Self {
        let seq2seq = TrainerDefaults {
            learning_rate: 5e-5,
            batch_size: 16,
            epochs: 5,
            optimizer: "adafactor".into(),
            model_selection: "lowest_dev_loss".into(),
        };
        TrainingDefaults {
            qa: TrainerDefaults {
                learning_rate: 3e-5,
                batch_size: 64,
                epochs: 20,
                optimizer: "adamw".into(),
                model_selection: "last".into(),
            },
            transition: seq2seq.clone(),
            simulators: seq2seq,
        }
    }
}

impl PipelineConfig {
    /// Range checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, message: String| ConfigError::Field {
            key: key.to_string(),
            message,
        };
        if !(0.0..=1.0).contains(&self.detection.threshold) {
            return Err(invalid("detection.threshold", "must be within [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.continuation.p_sim) {
            return Err(invalid("continuation.p_sim", "must be within [0, 1]".into()));
        }
        if self.transition.n_candidates == 0 {
            return Err(invalid("transition.n_candidates", "must be positive".into()));
        }
        if let ContextWindow::Last(0) = self.detection.window {
            return Err(invalid("detection.window", "must be positive".into()));
        }
        self.selfchat
            .validate()
            .map_err(|e| invalid("selfchat", e.to_string()))?;
        self.continuation
            .policy
            .validate()
            .map_err(|e| invalid("continuation.policy", e))?;
        for (key, d) in [
            ("selfchat.decoding", &self.selfchat.decoding),
            ("transition.decoding", &self.transition.decoding),
            ("continuation.decoding", &self.continuation.decoding),
        ] {
            d.validate().map_err(|e| invalid(key, e.to_string()))?;
        }
        let b = &self.backends;
        for (key, d, kind) in [
            ("backends.chitchat", &b.chitchat, BackendKind::Chat),
            ("backends.qa", &b.qa, BackendKind::Qa),
            ("backends.paraphrase", &b.paraphrase, BackendKind::Paraphrase),
            ("backends.transition", &b.transition, BackendKind::Seq2seq),
            ("backends.tod_user", &b.tod_user, BackendKind::Chat),
            ("backends.tod_sales", &b.tod_sales, BackendKind::Chat),
        ] {
            d.validate(kind).map_err(|e| invalid(key, e.to_string()))?;
        }
        Ok(())
    }

    /// Resolve relative input paths (not the output path) against `dir`.
    pub fn rebase_inputs(&mut self, dir: &Path) {
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = dir.join(&*path);
            }
        };
        rebase(&mut self.io.persona_file);
        rebase(&mut self.io.sgd_path);
        rebase(&mut self.io.otters_path);
        rebase(&mut self.detection.catalog_file);
        let b = &mut self.backends;
        for d in [
            &mut b.chitchat,
            &mut b.qa,
            &mut b.paraphrase,
            &mut b.transition,
            &mut b.tod_user,
            &mut b.tod_sales,
        ] {
            rebase(&mut d.mock_script);
        }
    }

    /// Every configured input path must exist, and the output directory too.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let mut inputs: Vec<(&str, &Path)> = Vec::new();
        let io = &self.io;
        for (key, p) in [
            ("io.persona_file", &io.persona_file),
            ("io.sgd_path", &io.sgd_path),
            ("io.otters_path", &io.otters_path),
            ("detection.catalog_file", &self.detection.catalog_file),
        ] {
            if let Some(p) = p {
                inputs.push((key, p));
            }
        }
        let b = &self.backends;
        let scripts = [
            ("backends.chitchat.mock_script", &b.chitchat),
            ("backends.qa.mock_script", &b.qa),
            ("backends.transition.mock_script", &b.transition),
            ("backends.tod_user.mock_script", &b.tod_user),
            ("backends.tod_sales.mock_script", &b.tod_sales),
        ];
        for (key, d) in &scripts {
            if let (Some(p), None) = (&d.mock_script, &d.endpoint) {
                inputs.push((key, p));
            }
        }
        for (key, path) in inputs {
            if !path.exists() {
                return Err(ConfigError::Field {
                    key: key.into(),
                    message: format!("{} does not exist", path.display()),
                });
            }
        }
        let parent = io.output_path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = parent {
            if !dir.is_dir() {
                return Err(ConfigError::Field {
                    key: "io.output_path".into(),
                    message: format!("directory {} does not exist", dir.display()),
                });
            }
        }
        Ok(())
    }
}

/// Read a config file, apply `BRIDGECHAT__*` overrides from the process
/// environment and validate.
pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut config = parse_config(&raw, &path.display().to_string(), std::env::vars())?;
    if let Some(dir) = path.parent() {
        config.rebase_inputs(dir);
    }
    Ok(config)
}

pub fn parse_config<I>(raw: &str, origin: &str, env: I) -> Result<PipelineConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut table: toml::Table = raw.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
        path: origin.to_string(),
        message: e.message().to_string(),
    })?;
    apply_env_overrides(&mut table, env)?;
    let config: PipelineConfig =
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError::Field {
            key: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    config.validate()?;
    Ok(config)
}

fn apply_env_overrides<I>(table: &mut toml::Table, env: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (var, raw) in vars {
        let keys: Vec<String> = var[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        if keys.iter().any(String::is_empty) {
            return Err(ConfigError::Env {
                var,
                message: "empty key segment".into(),
            });
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw));
        let (last, parents) = keys.split_last().expect("at least one segment");
        let mut node = &mut *table;
        for key in parents {
            let entry = node
                .entry(key.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = match entry {
                toml::Value::Table(t) => t,
                _ => {
                    return Err(ConfigError::Env {
                        var,
                        message: format!("`{key}` is not a table"),
                    })
                }
            };
        }
        node.insert(last.clone(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str) -> Result<PipelineConfig, ConfigError> {
        parse_config(raw, "test.toml", Vec::new())
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.transition.decoding.top_k, 80);
        assert_eq!(c.transition.decoding.top_p, 0.95);
        assert_eq!(c.continuation.decoding.top_k, 120);
        assert_eq!(c.transition.n_candidates, 5);
        assert_eq!(c.training.qa.learning_rate, 3e-5);
        assert_eq!(c.training.qa.batch_size, 64);
        assert_eq!(c.training.transition.batch_size, 16);
    }

    #[test]
    fn type_error_names_the_key() {
        let err = parse("[detection]\nthreshold = \"high\"\n").unwrap_err();
        match err {
            ConfigError::Field { key, .. } => assert_eq!(key, "detection.threshold"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("[selfchat]\nmax_turns = 3\n").unwrap_err();
        assert!(
            matches!(err, ConfigError::Field { ref key, .. } if key.starts_with("selfchat")),
            "{err}"
        );
        assert!(parse("colour = 1\n").is_err());
    }

    #[test]
    fn env_overrides_apply_last() {
        let env = vec![
            (
                "BRIDGECHAT__IO__OUTPUT_PATH".to_string(),
                "/tmp/x.jsonl".to_string(),
            ),
            ("BRIDGECHAT__MASTER_SEED".to_string(), "42".to_string()),
            ("BRIDGECHAT__CONTINUATION__MODE".to_string(), "sim".to_string()),
            ("OTHER".to_string(), "1".to_string()),
        ];
        let c = parse_config("master_seed = 1\n[io]\noutput_path = \"a.jsonl\"\n", "t", env).unwrap();
        assert_eq!(c.io.output_path, PathBuf::from("/tmp/x.jsonl"));
        assert_eq!(c.master_seed, 42);
        assert_eq!(c.continuation.mode, ContinuationMode::Sim);
    }

    #[test]
    fn ranges_are_checked() {
        assert!(parse("[continuation]\np_sim = 1.5\n").is_err());
        assert!(parse("[transition]\nn_candidates = 0\n").is_err());
        assert!(parse("[backends.qa]\nkind = \"chat\"\nname = \"x\"\n").is_err());
    }

    #[test]
    fn modes_parse() {
        assert_eq!(
            parse("[continuation]\nmode = \"mixed\"\n")
                .unwrap()
                .continuation
                .mode,
            ContinuationMode::Mixed
        );
        assert_eq!(
            "MERGE_SGD".parse::<ContinuationMode>().unwrap(),
            ContinuationMode::Merge
        );
        assert!("other".parse::<ContinuationMode>().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = PipelineConfig::default();
        let v = serde_json::to_value(&c).unwrap();
        let back: PipelineConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
