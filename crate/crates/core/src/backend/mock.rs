//! Deterministic mock backends.
//!
//! Every mock is referentially transparent: equal inputs, including the
//! decoding seed, always produce equal outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{
    BackendError, ChatBackend, DecodingConfig, ParaphraseBackend, QaAnswer, QaBackend, QaLabel,
    Seq2SeqBackend,
};
use crate::dialogue::Turn;
use crate::intent::KnownIntent;
use crate::seed::hash_parts;
use crate::text::{match_key, normalize_whitespace};

const CHITCHAT_BANK: &[&str] = &[
    "Hello! How has your week been so far?",
    "I just got back from a long walk with my dog.",
    "That sounds lovely. What do you do for a living?",
    "I work as a nurse at the local hospital. It keeps me busy.",
    "Do you have any hobbies you enjoy on the weekends?",
    "I like cooking new recipes and gardening in the backyard.",
    "Cooking is great! What is your favorite dish to make?",
    "I make a pretty good lasagna, if I do say so myself.",
    "I have two cats and a very lazy hamster.",
    "I'm trying to get into running, but it is hard to stay motivated.",
    "Do you have any siblings you are close to?",
    "I grew up on a farm, so I still wake up really early.",
    "What kind of food do you like the most?",
    "I love reading mystery novels before bed.",
    "That's interesting. Tell me more about that.",
    "I've been learning to play chess online.",
    "The weather has been so nice lately.",
    "I'm thinking about redecorating my living room.",
    "I like to read a lot. I also like to go to the movies.",
    "I wonder what time the new superhero movie is showing tonight.",
    "I've always wanted to visit the museums in Paris.",
    "I listen to a lot of rap and hip hop these days.",
    "I could really use a good song to play right now.",
    "I'm always looking for new songs to listen to on my commute.",
];

/// Trigger substrings of [`CHITCHAT_BANK`] and the intent each one signals.
const KEYWORD_TRIGGERS: &[(&str, KnownIntent, f64)] = &[
    ("go to the movies", KnownIntent::FindMovies, 0.9),
    ("movie is showing", KnownIntent::GetTimesForMovie, 0.85),
    ("visit the museums", KnownIntent::FindAttractions, 0.9),
    ("rap and hip hop", KnownIntent::LookupMusic, 0.8),
    ("song to play", KnownIntent::PlaySong, 0.8),
    ("new songs to listen to", KnownIntent::LookupSong, 0.75),
];

const TOD_USER_BANK: &[&str] = &[
    "I'm looking for something fun to do this weekend.",
    "Can you find me something in San Francisco?",
    "Is there anything else you can suggest?",
    "That sounds good to me.",
    "Yes, that's right.",
    "What time does it start?",
    "I'd prefer something a bit cheaper.",
    "Can you tell me more about it?",
    "No, that is all. Thank you for your help.",
    "Great, thanks a lot. Bye!",
];

const TOD_SALES_BANK: &[&str] = &[
    "I found [count] options you might like. How about [title]?",
    "In which city are you looking?",
    "What about [attraction_name], a [category]?",
    "You want [title] at [time], is that right?",
    "Is there anything else I can help you with?",
    "Your request has been confirmed.",
    "Enjoy your day. Goodbye!",
    "Sure, [title] is playing at [theater_name].",
    "There are [count] results. Do you prefer [title] or [title]?",
    "Happy to help. <END>",
];

const TRANSITION_BANK: &[&str] = &[
    "That sounds fun! By the way, can I help you with something related to that?",
    "Speaking of which, are you interested in trying something like that today?",
    "I know what you mean. Would you like me to help you look into it?",
    "Oh nice! Shall we look for something you might enjoy?",
    "That reminds me, I could help you find something right now.",
    "Interesting! Would you like some suggestions?",
    "Sounds great. Do you want me to look something up for you?",
    "I love that too. Are you in the mood to explore some options?",
];

fn to_owned(bank: &[&str]) -> Vec<String> {
    bank.iter().map(|s| s.to_string()).collect()
}

fn read_script<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, BackendError> {
    let raw =
        fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
}

/// Chat mock that picks an utterance from a fixed bank with a seeded hash of
/// the persona and the last two utterances.
#[derive(Clone, Debug)]
pub struct MockChat {
    name: String,
    bank: Vec<String>,
}

impl MockChat {
    pub fn new(name: &str, bank: Vec<String>) -> Self {
        assert!(!bank.is_empty(), "MockChat needs a non-empty bank");
        MockChat {
            name: name.to_string(),
            bank,
        }
    }

    /// Open-domain bank, including lines that carry implicit intents.
    pub fn chitchat(name: &str) -> Self {
        MockChat::new(name, to_owned(CHITCHAT_BANK))
    }

    pub fn tod_user(name: &str) -> Self {
        MockChat::new(name, to_owned(TOD_USER_BANK))
    }

    pub fn tod_sales(name: &str) -> Self {
        MockChat::new(name, to_owned(TOD_SALES_BANK))
    }

    pub fn bank(&self) -> &[String] {
        &self.bank
    }
}

impl ChatBackend for MockChat {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate_reply(
        &self,
        context: &[Turn],
        persona: &[String],
        config: &DecodingConfig,
    ) -> Result<String, BackendError> {
        let recent = context.iter().rev().take(2).map(|t| t.text.as_bytes());
        let parts: Vec<&[u8]> = persona.iter().map(|p| p.as_bytes()).chain(recent).collect();
        let h = hash_parts(config.seed, parts);
        Ok(self.bank[(h % self.bank.len() as u64) as usize].clone())
    }
}

/// Chat mock that replays a fixed script: the reply to a context of `n`
/// turns is line `n` (cycling). Scripts are selected by decoding seed, with
/// a default for unlisted seeds.
#[derive(Clone, Debug)]
pub struct ScriptedChat {
    name: String,
    scripts: BTreeMap<u64, Vec<String>>,
    default: Vec<String>,
}

impl ScriptedChat {
    pub fn new(name: &str, default: Vec<String>) -> Self {
        assert!(
            !default.is_empty(),
            "ScriptedChat needs a non-empty default script"
        );
        ScriptedChat {
            name: name.to_string(),
            scripts: BTreeMap::new(),
            default,
        }
    }

    /// A script that always says the same thing.
    pub fn constant(name: &str, line: &str) -> Self {
        ScriptedChat::new(name, vec![line.to_string()])
    }

    pub fn with_script(mut self, seed: u64, lines: Vec<String>) -> Self {
        assert!(!lines.is_empty(), "scripts must be non-empty");
        self.scripts.insert(seed, lines);
        self
    }
}

impl ChatBackend for ScriptedChat {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate_reply(
        &self,
        context: &[Turn],
        _persona: &[String],
        config: &DecodingConfig,
    ) -> Result<String, BackendError> {
        let lines = self.scripts.get(&config.seed).unwrap_or(&self.default);
        Ok(lines[context.len() % lines.len()].clone())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChatScript {
    Bank {
        bank: Vec<String>,
    },
    Scripted {
        default: Vec<String>,
        // Keys are seeds; JSON object keys are strings.
        #[serde(default)]
        scripts: BTreeMap<String, Vec<String>>,
    },
}

/// Load a chat mock from a JSON script: either `{"bank": [...]}` or
/// `{"default": [...], "scripts": {"<seed>": [...]}}`.
pub fn load_chat_script(name: &str, path: &Path) -> Result<Arc<dyn ChatBackend>, BackendError> {
    let empty = || BackendError::Config(format!("{}: empty chat script", path.display()));
    Ok(match read_script::<ChatScript>(path)? {
        ChatScript::Bank { bank } if !bank.is_empty() => Arc::new(MockChat::new(name, bank)),
        ChatScript::Bank { .. } => return Err(empty()),
        ChatScript::Scripted { default, scripts } => {
            if default.is_empty() || scripts.values().any(Vec::is_empty) {
                return Err(empty());
            }
            let mut chat = ScriptedChat::new(name, default);
            for (seed, lines) in scripts {
                let seed = seed.parse::<u64>().map_err(|_| {
                    BackendError::Config(format!("{}: script key `{seed}` is not a seed", path.display()))
                })?;
                chat = chat.with_script(seed, lines);
            }
            Arc::new(chat)
        }
    })
}

/// One scripted QA answer: applies when the context contains `context`
/// (case-insensitively) and the question matches `question`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct QaRule {
    pub context: String,
    pub question: String,
    pub label: QaLabel,
    pub confidence: f64,
}

impl QaRule {
    pub fn new(context: &str, question: &str, answer: QaAnswer) -> Self {
        QaRule {
            context: context.to_string(),
            question: question.to_string(),
            label: answer.label,
            confidence: answer.confidence,
        }
    }
}

/// QA mock answering from a scripted table; unmatched questions get
/// `NO` with confidence 0.5. The first matching rule wins.
#[derive(Clone, Debug)]
pub struct MockQa {
    name: String,
    rules: Vec<QaRule>,
}

#[derive(Deserialize)]
struct QaScript {
    rules: Vec<QaRule>,
}

impl MockQa {
    pub fn new(name: &str, rules: Vec<QaRule>) -> Self {
        MockQa {
            name: name.to_string(),
            rules,
        }
    }

    /// Table keyed on the intent-bearing lines of the built-in chit-chat
    /// bank, asking the base question of each intent.
    pub fn keyword_table(name: &str) -> Self {
        let rules = KEYWORD_TRIGGERS
            .iter()
            .map(|(kw, intent, conf)| QaRule::new(kw, intent.base_question(), QaAnswer::yes(*conf)))
            .collect();
        MockQa::new(name, rules)
    }

    pub fn from_script(name: &str, path: &Path) -> Result<Self, BackendError> {
        let script: QaScript = read_script(path)?;
        Ok(MockQa::new(name, script.rules))
    }
}

impl QaBackend for MockQa {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(&self, context_text: &str, question: &str) -> Result<QaAnswer, BackendError> {
        let context = context_text.to_lowercase();
        let question = match_key(question);
        Ok(self
            .rules
            .iter()
            .find(|r| match_key(&r.question) == question && context.contains(&r.context.to_lowercase()))
            .map(|r| QaAnswer {
                label: r.label,
                confidence: r.confidence,
            })
            .unwrap_or(QaAnswer::no(0.5)))
    }
}

/// Paraphrase mock built from a synonym table and clause reordering.
#[derive(Clone, Debug)]
pub struct MockParaphrase {
    name: String,
}

const PHRASE_SYNONYMS: &[(&str, &[&str])] = &[
    (
        "is the user asking about",
        &[
            "Is the customer asking about",
            "Is the user inquiring about",
            "Is the user interested in",
            "Does the user want to talk about",
        ],
    ),
    ("asking about", &["inquiring about", "interested in"]),
    ("the user", &["the customer", "the person"]),
];

impl MockParaphrase {
    pub fn new(name: &str) -> Self {
        MockParaphrase {
            name: name.to_string(),
        }
    }

    /// All distinct rewrites of `question`, in a fixed order.
    fn rewrites(question: &str) -> Vec<String> {
        let q = normalize_whitespace(question);
        let body = q.trim_end_matches('?').trim().to_string();
        let lower = body.to_lowercase();
        let mut out = Vec::new();

        if !body.is_ascii() {
            // Byte offsets below are computed on the lower-cased copy.
            out.push(format!("In this conversation, {}?", lowercase_first(&body)));
            out.push(format!("Based on the dialogue, {}?", lowercase_first(&body)));
            return dedup_excluding(out, &q);
        }

        for (phrase, replacements) in PHRASE_SYNONYMS {
            if let Some(pos) = lower.find(phrase) {
                for rep in *replacements {
                    let mut rep = rep.to_string();
                    if pos > 0 {
                        rep = lowercase_first(&rep);
                    }
                    out.push(format!("{}{}{}?", &body[..pos], rep, &body[pos + phrase.len()..]));
                }
            }
        }

        // Clause reordering: "Is X asking about Y" -> "When it comes to Y, is X asking about it".
        if let (Some(rest), Some(about)) = (
            body.strip_prefix("Is "),
            lower.find(" asking about ").filter(|&i| i > 3),
        ) {
            let subject = &body[3..about];
            let topic = &body[about + " asking about ".len()..];
            out.push(format!("When it comes to {topic}, is {subject} asking about it?"));
            out.push(format!(
                "Would you say {subject} is {}?",
                &rest[subject.len() + 1..]
            ));
        }

        out.push(format!("In this conversation, {}?", lowercase_first(&body)));
        out.push(format!("Based on the dialogue, {}?", lowercase_first(&body)));

        dedup_excluding(out, &q)
    }
}

fn dedup_excluding(mut candidates: Vec<String>, input: &str) -> Vec<String> {
    let mut seen = vec![match_key(input)];
    candidates.retain(|c| {
        let k = match_key(c);
        if seen.contains(&k) {
            false
        } else {
            seen.push(k);
            true
        }
    });
    candidates
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

impl ParaphraseBackend for MockParaphrase {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate_paraphrases(&self, question: &str, n: usize) -> Result<Vec<String>, BackendError> {
        let rewrites = MockParaphrase::rewrites(question);
        Ok((0..n)
            .map(|k| {
                let base = &rewrites[k % rewrites.len()];
                match k / rewrites.len() {
                    0 => base.clone(),
                    round => format!("{} (rephrasing {})", base.trim_end_matches('?'), round + 1) + "?",
                }
            })
            .collect())
    }
}

/// Seq2seq mock choosing a bridging sentence by a seeded hash of the source.
#[derive(Clone, Debug)]
pub struct MockSeq2Seq {
    name: String,
    bank: Vec<String>,
}

#[derive(Deserialize)]
struct Seq2SeqScript {
    bank: Vec<String>,
}

impl MockSeq2Seq {
    pub fn new(name: &str, bank: Vec<String>) -> Self {
        assert!(!bank.is_empty(), "MockSeq2Seq needs a non-empty bank");
        MockSeq2Seq {
            name: name.to_string(),
            bank,
        }
    }

    pub fn transitions(name: &str) -> Self {
        MockSeq2Seq::new(name, to_owned(TRANSITION_BANK))
    }

    pub fn from_script(name: &str, path: &Path) -> Result<Self, BackendError> {
        let script: Seq2SeqScript = read_script(path)?;
        if script.bank.is_empty() {
            return Err(BackendError::Config(format!("{}: empty bank", path.display())));
        }
        Ok(MockSeq2Seq::new(name, script.bank))
    }
}

impl Seq2SeqBackend for MockSeq2Seq {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, source: &str, config: &DecodingConfig) -> Result<String, BackendError> {
        let h = hash_parts(config.seed, [source]);
        Ok(self.bank[(h % self.bank.len() as u64) as usize].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{Phase, Speaker};

    fn ctx() -> Vec<Turn> {
        vec![
            Turn::new(Speaker::Sales, "Hello there!", Phase::Chitchat),
            Turn::new(Speaker::User, "Hi, how are you?", Phase::Chitchat),
        ]
    }

    #[test]
    fn chat_mock_is_deterministic() {
        let chat = MockChat::chitchat("m");
        let persona = vec!["I have a dog.".to_string()];
        let cfg = DecodingConfig::simulator().with_seed(1);
        let a = chat.chat_reply(&ctx(), &persona, &cfg).unwrap();
        let b = chat.chat_reply(&ctx(), &persona, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chat_mock_seeds_diverge() {
        // Expected values follow from the mock's construction: the bank index
        // is hash(seed, persona, last two utterances) mod bank size.
        let chat = MockChat::chitchat("m");
        let persona = vec!["I have a dog.".to_string()];
        let pick = |seed| {
            let parts: Vec<&[u8]> = vec![
                persona[0].as_bytes(),
                "Hi, how are you?".as_bytes(),
                "Hello there!".as_bytes(),
            ];
            CHITCHAT_BANK[(hash_parts(seed, parts) % CHITCHAT_BANK.len() as u64) as usize]
        };
        let one = chat
            .chat_reply(&ctx(), &persona, &DecodingConfig::default().with_seed(1))
            .unwrap();
        let two = chat
            .chat_reply(&ctx(), &persona, &DecodingConfig::default().with_seed(2))
            .unwrap();
        assert_eq!(one, pick(1));
        assert_eq!(two, pick(2));
        assert_ne!(one, two);
    }

    #[test]
    fn chat_requires_context_or_persona() {
        let chat = MockChat::chitchat("m");
        let err = chat.chat_reply(&[], &[], &DecodingConfig::default()).unwrap_err();
        assert!(matches!(err, BackendError::Precondition(_)));
    }

    #[test]
    fn scripted_chat_indexes_by_context_length() {
        let chat = ScriptedChat::new("s", vec!["a".into(), "b".into()])
            .with_script(9, vec!["x".into(), "y".into(), "z".into()]);
        let cfg = DecodingConfig::default();
        assert_eq!(chat.chat_reply(&ctx(), &[], &cfg).unwrap(), "a");
        assert_eq!(chat.chat_reply(&ctx()[..1], &[], &cfg).unwrap(), "b");
        assert_eq!(chat.chat_reply(&ctx(), &[], &cfg.with_seed(9)).unwrap(), "z");
    }

    #[test]
    fn qa_table_lookup_and_default() {
        let q = KnownIntent::FindMovies.base_question();
        let qa = MockQa::new("qa", vec![QaRule::new("go to the movies", q, QaAnswer::yes(0.9))]);
        let hit = qa
            .answer_question("USER: I also like to go to the movies.", q)
            .unwrap();
        assert_eq!(hit, QaAnswer::yes(0.9));
        let miss = qa.answer_question("USER: I like dogs.", q).unwrap();
        assert_eq!(miss, QaAnswer::no(0.5));
    }

    #[test]
    fn qa_rejects_empty_question() {
        let qa = MockQa::keyword_table("qa");
        assert!(matches!(
            qa.answer_question("USER: hi", " "),
            Err(BackendError::Precondition(_))
        ));
    }

    #[test]
    fn paraphrases_are_distinct_and_differ_from_input() {
        let p = MockParaphrase::new("p");
        let q = "Is the user asking about playing songs?";
        let out = p.paraphrase(q, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_ne!(match_key(&out[0]), match_key(&out[1]));
        assert!(out.iter().all(|o| match_key(o) != match_key(q)));

        let many = p.paraphrase(q, 20).unwrap();
        let keys: std::collections::BTreeSet<_> = many.iter().map(|s| match_key(s)).collect();
        assert_eq!(keys.len(), 20);
        assert!(!keys.contains(&match_key(q)));
    }

    #[test]
    fn paraphrase_single_is_stable() {
        let p = MockParaphrase::new("p");
        let q = "Is the user asking about finding attractions?";
        assert_eq!(p.paraphrase(q, 1).unwrap(), p.paraphrase(q, 1).unwrap());
    }

    #[test]
    fn paraphrase_zero_is_an_error() {
        let p = MockParaphrase::new("p");
        assert!(p.paraphrase("Is it?", 0).is_err());
    }

    #[test]
    fn paraphrase_handles_unpatterned_questions() {
        let p = MockParaphrase::new("p");
        let out = p.paraphrase("Shall we dance?", 3).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|o| match_key(o) != "shall we dance?"));
    }

    #[test]
    fn seq2seq_is_stable_and_seed_sensitive() {
        let s = MockSeq2Seq::transitions("t");
        let cfg = DecodingConfig::transition().with_seed(3);
        let src = "past: I like movies. future: Find me a movie.";
        assert_eq!(
            s.seq2seq_generate(src, &cfg).unwrap(),
            s.seq2seq_generate(src, &cfg).unwrap()
        );
        let outs: std::collections::BTreeSet<_> = (0..10)
            .map(|seed| s.seq2seq_generate(src, &cfg.with_seed(seed)).unwrap())
            .collect();
        assert!(outs.len() > 1);
        assert!(s.seq2seq_generate("", &cfg).is_err());
    }

    #[test]
    fn chat_script_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let bank = dir.path().join("bank.json");
        fs::write(&bank, r#"{"bank": ["only line"]}"#).unwrap();
        let chat = load_chat_script("b", &bank).unwrap();
        assert_eq!(
            chat.chat_reply(&ctx(), &[], &DecodingConfig::default()).unwrap(),
            "only line"
        );
        let scripted = dir.path().join("scripted.json");
        fs::write(
            &scripted,
            r#"{"default": ["d"], "scripts": {"4": ["s0", "s1", "s2"]}}"#,
        )
        .unwrap();
        let chat = load_chat_script("s", &scripted).unwrap();
        let cfg = DecodingConfig::default().with_seed(4);
        assert_eq!(chat.chat_reply(&ctx(), &[], &cfg).unwrap(), "s2");
    }
}
