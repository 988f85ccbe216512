//! Corpus statistics: dialogue counts and average lengths (in turns) per
//! intent, per provenance and overall.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{Dialogue, Provenance};
use crate::intent::KnownIntent;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupStats {
    pub count: usize,
    pub total_turns: usize,
    pub min_turns: Option<usize>,
    pub max_turns: Option<usize>,
}

impl GroupStats {
    fn add(&mut self, turns: usize) {
        self.count += 1;
        self.total_turns += turns;
        self.min_turns = Some(self.min_turns.map_or(turns, |m| m.min(turns)));
        self.max_turns = Some(self.max_turns.map_or(turns, |m| m.max(turns)));
    }

    pub fn merge(&mut self, other: &GroupStats) {
        self.count += other.count;
        self.total_turns += other.total_turns;
        self.min_turns = match (self.min_turns, other.min_turns) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_turns = match (self.max_turns, other.max_turns) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    /// Mean dialogue length in turns; absent for an empty group.
    pub fn average(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total_turns as f64 / self.count as f64)
    }

    fn to_json(&self) -> Value {
        json!({ "count": self.count, "avg_length": self.average() })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub total: GroupStats,
    pub by_intent: BTreeMap<String, GroupStats>,
    pub by_provenance: BTreeMap<Provenance, GroupStats>,
}

pub fn compute_stats(corpus: &[Dialogue]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for d in corpus {
        let len = d.turns.len();
        stats.total.add(len);
        stats.by_provenance.entry(d.provenance).or_default().add(len);
        if let Some(intent) = &d.intent {
            stats.by_intent.entry(intent.name.clone()).or_default().add(len);
        }
    }
    stats
}

impl CorpusStats {
    /// Combine statistics of two disjoint corpora.
    pub fn merge(&mut self, other: &CorpusStats) {
        self.total.merge(&other.total);
        for (k, v) in &other.by_intent {
            self.by_intent.entry(k.clone()).or_default().merge(v);
        }
        for (k, v) in &other.by_provenance {
            self.by_provenance.entry(*k).or_default().merge(v);
        }
    }

    pub fn intent(&self, name: &str) -> GroupStats {
        self.by_intent.get(name).cloned().unwrap_or_default()
    }

    pub fn provenance(&self, p: Provenance) -> GroupStats {
        self.by_provenance.get(&p).cloned().unwrap_or_default()
    }

    /// Intent rows in presentation order: the built-in intents first in
    /// canonical order, then any others alphabetically.
    fn intent_rows(&self) -> Vec<(String, GroupStats)> {
        let mut rows: Vec<(String, GroupStats)> = KnownIntent::ALL
            .iter()
            .map(|i| (i.name().to_string(), self.intent(i.name())))
            .collect();
        rows.extend(
            self.by_intent
                .iter()
                .filter(|(k, _)| KnownIntent::from_name(k).is_none())
                .map(|(k, v)| (k.clone(), v.clone())),
        );
        rows
    }

    pub fn to_json(&self) -> Value {
        let intents: Vec<Value> = self
            .intent_rows()
            .into_iter()
            .map(|(name, g)| {
                let mut v = g.to_json();
                v["intent"] = json!(name);
                v
            })
            .collect();
        let provenance: Vec<Value> = Provenance::ALL
            .iter()
            .map(|p| {
                let mut v = self.provenance(*p).to_json();
                v["provenance"] = json!(p.as_str());
                v
            })
            .collect();
        json!({
            "intents": intents,
            "provenance": provenance,
            "total": self.total.to_json(),
        })
    }

    /// Plain-text table with one row per intent, per provenance and a total.
    pub fn to_table(&self) -> String {
        fn row(out: &mut String, label: &str, g: &GroupStats) {
            let avg = g.average().map_or_else(|| "-".to_string(), |a| format!("{a:.1}"));
            let _ = writeln!(out, "{label:<18} {:>10} {:>11}", thousands(g.count), avg);
        }
        let rule = "-".repeat(41);
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>10} {:>11}", "Intent", "#Dialogues", "Avg Length");
        let _ = writeln!(out, "{rule}");
        for (name, g) in self.intent_rows() {
            row(&mut out, &name, &g);
        }
        let _ = writeln!(out, "{rule}");
        row(&mut out, "Merge SGD", &self.provenance(Provenance::MergeSgd));
        row(
            &mut out,
            "TOD Simulation",
            &self.provenance(Provenance::Simulation),
        );
        let _ = writeln!(out, "{rule}");
        row(&mut out, "Total", &self.total);
        out
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}
