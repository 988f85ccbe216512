//! Implicit intent detection: question catalogs, QA-based detection and
//! construction of yes/no training data from annotated task dialogues.

pub mod catalog;
pub mod detector;
pub mod todqa;

pub use catalog::{
    augment_with_paraphrases, build_question_catalog, catalog_from_json, catalog_to_json, load_catalog,
    CatalogError, IntentQuestionSet, DEFAULT_PARAPHRASES,
};
pub use detector::{
    detect_intent, ContextWindow, DetectError, DetectionParams, DetectionResult, DEFAULT_THRESHOLD,
};
pub use todqa::{build_tod_qa, restrict_to_catalog, NegativeSampling, QaExample, TodQaError};
