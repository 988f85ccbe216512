use std::collections::HashMap;

use bridgechat::backend::{BackendError, QaAnswer, QaBackend, QaLabel};
use bridgechat::detect::{build_question_catalog, detect_intent, DetectionParams, IntentQuestionSet};
use bridgechat::dialogue::{Phase, Speaker, Turn};
use bridgechat::intent::{known_labels, IntentLabel};
use proptest::prelude::*;

struct TableQa(HashMap<String, QaAnswer>);

impl QaBackend for TableQa {
    fn name(&self) -> &str {
        "table"
    }
    fn answer(&self, _: &str, question: &str) -> Result<QaAnswer, BackendError> {
        Ok(self.0.get(question).cloned().unwrap_or(QaAnswer::no(0.5)))
    }
}

fn catalog() -> Vec<IntentQuestionSet> {
    let mut labels = known_labels();
    labels.push(IntentLabel::new("BookHotel", "Reserve a hotel room"));
    let mut cat = build_question_catalog(&labels).unwrap();
    for set in &mut cat {
        set.paraphrases = vec![format!("{} (alt)", set.base_question)];
    }
    cat
}

fn turns() -> Vec<Turn> {
    vec![
        Turn::new(Speaker::Sales, "hello", Phase::Chitchat),
        Turn::new(Speaker::User, "hi there", Phase::Chitchat),
    ]
}

fn answers() -> impl Strategy<Value = Vec<(bool, u8)>> {
    // Coarse confidences make ties common.
    proptest::collection::vec((any::<bool>(), 0u8..=10), 14)
}

fn table(cat: &[IntentQuestionSet], raw: &[(bool, u8)]) -> TableQa {
    let questions: Vec<&str> = cat.iter().flat_map(|s| s.questions()).collect();
    TableQa(
        questions
            .into_iter()
            .zip(raw)
            .map(|(q, &(yes, c))| {
                let c = c as f64 / 10.0;
                (
                    q.to_string(),
                    if yes { QaAnswer::yes(c) } else { QaAnswer::no(c) },
                )
            })
            .collect(),
    )
}

// Independent oracle: enumerate every hit, order by (confidence desc, rank asc).
fn oracle(cat: &[IntentQuestionSet], qa: &TableQa, threshold: f64) -> Option<(String, f64)> {
    let mut hits = Vec::new();
    for (pos, set) in cat.iter().enumerate() {
        for q in set.questions() {
            let a = &qa.0[q];
            if a.label == QaLabel::Yes && a.confidence >= threshold {
                let rank = set.intent.canonical_rank().map(|r| (0, r)).unwrap_or((1, pos));
                hits.push((set.intent.name.clone(), a.confidence, rank));
            }
        }
    }
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.2.cmp(&b.2)));
    hits.into_iter().next().map(|(n, c, _)| (n, c))
}

proptest! {
    #[test]
    fn matches_brute_force(raw in answers(), t in 0u8..=10) {
        let cat = catalog();
        let qa = table(&cat, &raw);
        let threshold = t as f64 / 10.0;
        let params = DetectionParams { threshold, ..DetectionParams::default() };
        let got = detect_intent(&turns(), &cat, &qa, &params).unwrap()
            .map(|r| (r.intent.name, r.confidence));
        prop_assert_eq!(got, oracle(&cat, &qa, threshold));
    }

    #[test]
    fn raising_threshold_never_adds(raw in answers(), lo in 0u8..=10, step in 0u8..=10) {
        let cat = catalog();
        let qa = table(&cat, &raw);
        let low = DetectionParams { threshold: lo as f64 / 10.0, ..DetectionParams::default() };
        let high = DetectionParams {
            threshold: (lo.saturating_add(step)).min(10) as f64 / 10.0,
            ..DetectionParams::default()
        };
        let a = detect_intent(&turns(), &cat, &qa, &low).unwrap();
        let b = detect_intent(&turns(), &cat, &qa, &high).unwrap();
        match (a, b) {
            (None, Some(_)) => prop_assert!(false, "higher threshold produced a detection"),
            (Some(a), Some(b)) => prop_assert_eq!(a.intent, b.intent),
            _ => {}
        }
    }
}
