//! Batch generation: self-chat, detection, transition, continuation.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ContinuationMode, PipelineConfig};
use crate::backend::{BackendError, ChatBackend, MockChat, QaBackend, Seq2SeqBackend};
use crate::detect::{
    augment_with_paraphrases, build_question_catalog, detect_intent, load_catalog, DetectionParams,
    DetectionResult, IntentQuestionSet,
};
use crate::dialogue::{validate, write_corpus, Dialogue, Phase, Provenance, Speaker, Turn, CANDIDATE_COUNT};
use crate::intent::known_labels;
use crate::seed::{derive_labeled, derive_seed, rng};
use crate::selfchat::{
    builtin_persona_pool, load_persona_pool, run_selfchat, sample_persona, SelfChatConfig,
};
use crate::sgd::{load_sgd, SgdLoadOptions};
use crate::tod::{index_sgd, merge_continuation, simulate_continuation_from, SgdIndex};
use crate::transition::{generate_transitions, template_from_description};

const CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("backend setup: {0}")]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Setup(String),
    #[error("{path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiscardReason {
    /// No intent was detected within the chit-chat turn budget.
    NoIntent,
    BackendError,
    /// Merge mode found no SGD dialogue for the detected intent.
    NoSgdDialogue,
    /// The assembled dialogue failed validation.
    Invalid,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub written: usize,
    pub discarded: BTreeMap<DiscardReason, usize>,
    pub per_intent: BTreeMap<String, usize>,
    pub per_provenance: BTreeMap<Provenance, usize>,
}

impl GenerationReport {
    pub fn discarded_total(&self) -> usize {
        self.discarded.values().sum()
    }

    fn record(&mut self, outcome: &Result<Dialogue, Discard>) {
        self.requested += 1;
        match outcome {
            Ok(d) => {
                self.written += 1;
                if let Some(intent) = &d.intent {
                    *self.per_intent.entry(intent.name.clone()).or_default() += 1;
                }
                *self.per_provenance.entry(d.provenance).or_default() += 1;
            }
            Err(discard) => *self.discarded.entry(discard.reason).or_default() += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discard {
    pub reason: DiscardReason,
    pub detail: String,
}

impl Discard {
    fn new(reason: DiscardReason, detail: impl ToString) -> Discard {
        Discard {
            reason,
            detail: detail.to_string(),
        }
    }
}

/// Everything a run needs, built once and shared by all workers.
pub struct Pipeline {
    config: PipelineConfig,
    chitchat: Arc<dyn ChatBackend>,
    qa: Arc<dyn QaBackend>,
    transition: Arc<dyn Seq2SeqBackend>,
    tod_user: Arc<dyn ChatBackend>,
    tod_sales: Arc<dyn ChatBackend>,
    catalog: Vec<IntentQuestionSet>,
    personas: Vec<Vec<String>>,
    sgd: Option<SgdIndex>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Pipeline, PipelineError> {
        config.validate()?;
        config.check_paths()?;
        let b = &config.backends;

        let base = match &config.detection.catalog_file {
            Some(path) => load_catalog(path).map_err(|e| PipelineError::Setup(e.to_string()))?,
            None => {
                build_question_catalog(&known_labels()).map_err(|e| PipelineError::Setup(e.to_string()))?
            }
        };
        let catalog = if config.detection.n_paraphrases > 0 {
            let paraphraser = b.paraphrase.build_paraphrase()?;
            augment_with_paraphrases(&base, paraphraser.as_ref(), config.detection.n_paraphrases)?
        } else {
            base
        };

        let personas = match &config.io.persona_file {
            Some(path) => load_persona_pool(path).map_err(|e| PipelineError::Setup(e.to_string()))?,
            None => builtin_persona_pool(),
        };
        if personas.is_empty() {
            return Err(PipelineError::Setup("persona pool is empty".into()));
        }

        let sgd = match &config.io.sgd_path {
            Some(path) => {
                let corpus = load_sgd(
                    path,
                    SgdLoadOptions {
                        delexicalize: config.io.sgd_delexicalize,
                    },
                )
                .map_err(|e| PipelineError::Setup(e.to_string()))?;
                let index = index_sgd(&corpus);
                for w in &index.warnings {
                    log::warn!("sgd index: {w}");
                }
                Some(index)
            }
            None => None,
        };
        let needs_sgd = config.continuation.mode == ContinuationMode::Merge
            || (config.continuation.mode == ContinuationMode::Mixed && config.continuation.p_sim < 1.0);
        if needs_sgd && sgd.is_none() {
            return Err(PipelineError::Setup(
                "io.sgd_path is required when SGD dialogues are merged".into(),
            ));
        }

        Ok(Pipeline {
            chitchat: b.chitchat.build_chat()?,
            qa: b.qa.build_qa()?,
            transition: b.transition.build_seq2seq()?,
            tod_user: b.tod_user.build_chat_or(MockChat::tod_user)?,
            tod_sales: b.tod_sales.build_chat_or(MockChat::tod_sales)?,
            catalog,
            personas,
            sgd,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn catalog(&self) -> &[IntentQuestionSet] {
        &self.catalog
    }

    /// Generate dialogue `index` of the run. Pure in (config, index).
    pub fn generate_one(&self, index: u64) -> Result<Dialogue, Discard> {
        let cfg = &self.config;
        let seed = derive_seed(cfg.master_seed, index);

        let mut persona_rng = rng(derive_labeled(seed, "persona"));
        let user = sample_persona(&self.personas, Speaker::User, &mut persona_rng);
        let sales = sample_persona(&self.personas, Speaker::Sales, &mut persona_rng);

        let params = DetectionParams {
            threshold: cfg.detection.threshold,
            window: cfg.detection.window,
        };
        let detected: RefCell<Result<Option<DetectionResult>, String>> = RefCell::new(Ok(None));
        let selfchat = SelfChatConfig {
            decoding: cfg.selfchat.decoding.with_seed(seed),
            ..cfg.selfchat.clone()
        };
        let chitchat =
            run_selfchat(
                &user,
                &sales,
                &selfchat,
                self.chitchat.as_ref(),
                |turns| match detect_intent(turns, &self.catalog, self.qa.as_ref(), &params) {
                    Ok(None) => false,
                    Ok(found) => {
                        *detected.borrow_mut() = Ok(found);
                        true
                    }
                    Err(e) => {
                        *detected.borrow_mut() = Err(e.to_string());
                        true
                    }
                },
            )
            .map_err(|e| Discard::new(DiscardReason::BackendError, e))?;
        let detection = detected
            .into_inner()
            .map_err(|e| Discard::new(DiscardReason::BackendError, e))?
            .ok_or_else(|| Discard::new(DiscardReason::NoIntent, "no intent detected"))?;

        let intent = detection.intent.clone();
        let description = match &self.sgd {
            Some(index) => index.description_for(&intent),
            None => intent.description.clone(),
        };
        let template = template_from_description(&intent.name, &description)
            .map_err(|e| Discard::new(DiscardReason::Invalid, e))?;
        let transition_turn = |text: &str| {
            Turn::new(Speaker::Sales, text, Phase::Transition)
                .with_meta("template", template.as_str())
                .with_meta("confidence", detection.confidence)
                .with_meta("trigger_question", detection.trigger_question.as_str())
        };

        let provenance = match cfg.continuation.mode {
            ContinuationMode::Merge => Provenance::MergeSgd,
            ContinuationMode::Sim => Provenance::Simulation,
            ContinuationMode::Mixed => {
                if rng(derive_labeled(seed, "mode")).random_bool(cfg.continuation.p_sim) {
                    Provenance::Simulation
                } else {
                    Provenance::MergeSgd
                }
            }
        };

        let mut context = chitchat.clone();
        context.push(transition_turn(&template));
        let sim_decoding = cfg
            .continuation
            .decoding
            .with_seed(derive_labeled(seed, "simulation"));
        let mut tod = match provenance {
            Provenance::MergeSgd => {
                let index = self.sgd.as_ref().expect("checked at setup");
                merge_continuation(&intent, index, derive_labeled(seed, "merge"))
                    .map_err(|e| Discard::new(DiscardReason::NoSgdDialogue, e))?
            }
            Provenance::Simulation => {
                // One user turn first, so the transition can be regenerated
                // from both user utterances before the simulators continue.
                let text = self
                    .tod_user
                    .chat_reply(
                        &context,
                        &[],
                        &sim_decoding.with_seed(derive_seed(sim_decoding.seed, 0)),
                    )
                    .map_err(|e| Discard::new(DiscardReason::BackendError, e))?;
                vec![Turn::new(Speaker::User, &text, Phase::Tod).with_meta("backend", self.tod_user.name())]
            }
        };

        let mut candidates = Vec::new();
        if cfg.transition.generative {
            let past = chitchat
                .iter()
                .rev()
                .find(|t| t.speaker == Speaker::User)
                .map(|t| t.text.as_str())
                .unwrap_or_default();
            let future = tod[0].text.as_str();
            candidates = generate_transitions(
                past,
                future,
                self.transition.as_ref(),
                &cfg.transition
                    .decoding
                    .with_seed(derive_labeled(seed, "transition")),
                cfg.transition.n_candidates,
            )
            .map_err(|e| Discard::new(DiscardReason::BackendError, e))?;
            let last = context.len() - 1;
            context[last] = transition_turn(&candidates[0]).with_meta("generator", self.transition.name());
        }

        if provenance == Provenance::Simulation {
            tod = simulate_continuation_from(
                &context,
                tod,
                self.tod_user.as_ref(),
                self.tod_sales.as_ref(),
                &cfg.continuation.policy,
                &sim_decoding,
            )
            .map_err(|e| Discard::new(DiscardReason::BackendError, e))?;
        }

        context.extend(tod);
        let dialogue = Dialogue {
            id: format!("dlg-{}-{index:06}", cfg.master_seed),
            seed,
            provenance,
            intent: Some(intent),
            transition_candidates: if candidates.len() == CANDIDATE_COUNT {
                candidates
            } else {
                Vec::new()
            },
            turns: context,
        };
        let report = validate(&dialogue);
        if !report.is_valid() {
            return Err(Discard::new(DiscardReason::Invalid, report));
        }
        Ok(dialogue)
    }

    /// Generate `n` dialogues in parallel, handing each outcome to `sink`
    /// in index order.
    pub fn generate<F, E>(&self, n: usize, mut sink: F) -> Result<GenerationReport, E>
    where
        F: FnMut(u64, &Result<Dialogue, Discard>) -> Result<(), E>,
    {
        let mut report = GenerationReport::default();
        let mut start = 0usize;
        while start < n {
            let end = (start + CHUNK).min(n);
            let outcomes: Vec<Result<Dialogue, Discard>> = (start..end)
                .into_par_iter()
                .map(|i| self.generate_one(i as u64))
                .collect();
            for (offset, outcome) in outcomes.iter().enumerate() {
                let i = (start + offset) as u64;
                if let Err(d) = outcome {
                    log::debug!("dialogue {i} discarded ({:?}): {}", d.reason, d.detail);
                }
                report.record(outcome);
                sink(i, outcome)?;
            }
            start = end;
        }
        Ok(report)
    }
}

/// Path of the manifest written next to a corpus.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    master_seed: u64,
    n_dialogues: usize,
    config: &'a PipelineConfig,
    report: &'a GenerationReport,
}

/// Generate `n` dialogues into `config.io.output_path` and write the run
/// manifest beside it.
pub fn run_pipeline(config: PipelineConfig, n: usize) -> Result<GenerationReport, PipelineError> {
    let pipeline = Pipeline::new(config)?;
    let path = pipeline.config.io.output_path.clone();
    let output_error = |message: String| PipelineError::Output {
        path: path.display().to_string(),
        message,
    };
    let file = File::create(&path).map_err(|e| output_error(e.to_string()))?;
    let mut writer = BufWriter::new(file);
    let report = pipeline.generate(n, |_, outcome| match outcome {
        Ok(d) => write_corpus(&mut writer, std::slice::from_ref(d)).map_err(|e| output_error(e.to_string())),
        Err(_) => Ok(()),
    })?;
    writer.flush().map_err(|e| output_error(e.to_string()))?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        master_seed: pipeline.config.master_seed,
        n_dialogues: n,
        config: &pipeline.config,
        report: &report,
    };
    let manifest_file = manifest_path(&path);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_file, body + "\n").map_err(|e| PipelineError::Output {
        path: manifest_file.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(report)
}
