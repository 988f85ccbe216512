use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ingest::{Annotations, Task3Annotation};
use super::{Task, DETECTORS, WORKERS_PER_ITEM};
use crate::dialogue::Provenance;

/// Item means are binned at width 0.5 over [1, 5]; the last bin is closed.
pub const HISTOGRAM_BINS: usize = 8;

pub fn bin_label(bin: usize) -> String {
    let lo = 1.0 + bin as f64 * 0.5;
    format!("{:.1}-{:.1}", lo, lo + 0.5)
}

/// Bin of the mean `sum / n` of scores in [1, 5], in exact arithmetic.
fn bin_of(sum: u32, n: u32) -> usize {
    ((2 * (sum - n) / n) as usize).min(HISTOGRAM_BINS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub item_id: String,
    pub workers: usize,
    /// Per question, sum of worker scores.
    pub sums: Vec<u32>,
    /// Per question, mean of worker scores.
    pub means: Vec<f64>,
    /// Most chosen candidate (task 2); ties go to the lower index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_candidate: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionSummary {
    pub question: String,
    pub items: usize,
    /// Mean of item means; absent without items.
    pub mean: Option<f64>,
    pub histogram: [usize; HISTOGRAM_BINS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub task: u8,
    pub items: Vec<ItemScores>,
    pub questions: Vec<QuestionSummary>,
    /// Items without exactly three workers, with their worker counts.
    pub excluded: BTreeMap<String, usize>,
}

fn summarize(task: Task, items: &[&ItemScores]) -> Vec<QuestionSummary> {
    task.questions()
        .iter()
        .enumerate()
        .map(|(q, (_, name))| {
            let mut histogram = [0; HISTOGRAM_BINS];
            let mut total = 0.0;
            for item in items {
                histogram[bin_of(item.sums[q], item.workers as u32)] += 1;
                total += item.means[q];
            }
            QuestionSummary {
                question: name.to_string(),
                items: items.len(),
                mean: (!items.is_empty()).then(|| total / items.len() as f64),
                histogram,
            }
        })
        .collect()
}

/// Per-item means over the three workers and per-question distributions of
/// those means. Task 3 annotations have no scores and yield `None`.
pub fn aggregate_scores(annotations: &Annotations) -> Option<ScoreReport> {
    // item -> (per-worker scores, per-worker best index)
    let mut grouped: BTreeMap<&str, (Vec<&[u8]>, Vec<u8>)> = BTreeMap::new();
    let task = match annotations {
        Annotations::Task1(v) => {
            for a in v {
                grouped.entry(&a.dialogue_id).or_default().0.push(&a.scores);
            }
            Task::Dialogue
        }
        Annotations::Task2(v) => {
            for a in v {
                let e = grouped.entry(&a.dialogue_id).or_default();
                e.0.push(&a.scores);
                e.1.push(a.best_candidate_index);
            }
            Task::Transition
        }
        Annotations::Task3(_) => return None,
    };
    let n_questions = task.questions().len();

    let mut items = Vec::new();
    let mut excluded = BTreeMap::new();
    for (id, (scores, best)) in grouped {
        if scores.len() != WORKERS_PER_ITEM {
            excluded.insert(id.to_string(), scores.len());
            continue;
        }
        let sums: Vec<u32> = (0..n_questions)
            .map(|q| scores.iter().map(|s| s[q] as u32).sum())
            .collect();
        let means = sums.iter().map(|&s| s as f64 / scores.len() as f64).collect();
        let best_candidate = (!best.is_empty()).then(|| {
            let mut counts = [0usize; 5];
            for &b in &best {
                counts[b as usize] += 1;
            }
            let top = *counts.iter().max().expect("five counters");
            counts.iter().position(|&c| c == top).expect("max exists") as u8
        });
        items.push(ItemScores {
            item_id: id.to_string(),
            workers: scores.len(),
            sums,
            means,
            best_candidate,
        });
    }
    let refs: Vec<&ItemScores> = items.iter().collect();
    Some(ScoreReport {
        task: task.number(),
        questions: summarize(task, &refs),
        items,
        excluded,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into())
}

fn question_table(out: &mut String, summaries: &[QuestionSummary]) {
    let _ = write!(out, "{:<16}{:>6}", "Question", "Mean");
    for b in 0..HISTOGRAM_BINS {
        let _ = write!(out, "{:>9}", bin_label(b));
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(out, "{:<16}{:>6}", s.question, fmt_opt(s.mean));
        for c in s.histogram {
            let _ = write!(out, "{c:>9}");
        }
        out.push('\n');
    }
}

impl ScoreReport {
    pub fn task(&self) -> Task {
        Task::from_number(self.task).expect("report task is 1 or 2")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "Task {}: {} items, {} excluded (need {WORKERS_PER_ITEM} workers)\n",
            self.task,
            self.items.len(),
            self.excluded.len()
        );
        question_table(&mut out, &self.questions);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceComparison {
    pub task: u8,
    pub groups: BTreeMap<Provenance, Vec<QuestionSummary>>,
    /// Aggregated items whose id is not in the corpus.
    pub missing: usize,
}

impl ProvenanceComparison {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (p, summaries) in &self.groups {
            let n = summaries.first().map(|s| s.items).unwrap_or(0);
            let _ = writeln!(out, "{} ({n} items)", p.as_str());
            question_table(&mut out, summaries);
        }
        if self.missing > 0 {
            let _ = writeln!(out, "{} items not found in the corpus", self.missing);
        }
        out
    }
}

/// Split a score report by the provenance of each item's dialogue.
pub fn compare_provenance(
    report: &ScoreReport,
    provenance: &HashMap<String, Provenance>,
) -> ProvenanceComparison {
    let mut split: BTreeMap<Provenance, Vec<&ItemScores>> =
        Provenance::ALL.iter().map(|p| (*p, Vec::new())).collect();
    let mut missing = 0;
    for item in &report.items {
        match provenance.get(&item.item_id) {
            Some(p) => split.entry(*p).or_default().push(item),
            None => missing += 1,
        }
    }
    ProvenanceComparison {
        task: report.task,
        groups: split
            .into_iter()
            .map(|(p, items)| (p, summarize(report.task(), &items)))
            .collect(),
        missing,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    #[default]
    Population,
    Sample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankUnit {
    /// Every (snippet, worker) rank is one observation.
    #[default]
    Record,
    /// Each snippet contributes the mean of its workers' ranks.
    Snippet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorRank {
    pub detector: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub unit: RankUnit,
    pub std_mode: StdMode,
    pub detectors: Vec<DetectorRank>,
}

fn mean_std(values: &[f64], mode: StdMode) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = match mode {
        StdMode::Population => Some((ss / n as f64).sqrt()),
        StdMode::Sample if n > 1 => Some((ss / (n - 1) as f64).sqrt()),
        StdMode::Sample => None,
    };
    (Some(mean), std)
}

/// Mean and deviation of small integers from exact integer moments, so the
/// result does not depend on observation order.
fn moments(values: &[u8], mode: StdMode) -> (Option<f64>, Option<f64>) {
    let n = values.len() as i128;
    if n == 0 {
        return (None, None);
    }
    let sum: i128 = values.iter().map(|&v| v as i128).sum();
    let sum_sq: i128 = values.iter().map(|&v| (v as i128) * (v as i128)).sum();
    // n * sum of squared deviations
    let scaled_ss = n * sum_sq - sum * sum;
    let std = match mode {
        StdMode::Population => Some((scaled_ss as f64 / (n * n) as f64).sqrt()),
        StdMode::Sample if n > 1 => Some((scaled_ss as f64 / (n * (n - 1)) as f64).sqrt()),
        StdMode::Sample => None,
    };
    (Some(sum as f64 / n as f64), std)
}

/// Mean rank and standard deviation of each detector.
pub fn aggregate_ranks(records: &[Task3Annotation], unit: RankUnit, std_mode: StdMode) -> RankReport {
    let detectors = DETECTORS
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let (n, mean, std) = match unit {
                RankUnit::Record => {
                    let ranks: Vec<u8> = records.iter().map(|r| r.ranks[d]).collect();
                    let (mean, std) = moments(&ranks, std_mode);
                    (ranks.len(), mean, std)
                }
                RankUnit::Snippet => {
                    let mut per: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
                    for r in records {
                        let e = per.entry(&r.snippet_id).or_default();
                        e.0 += r.ranks[d] as u32;
                        e.1 += 1;
                    }
                    let values: Vec<f64> = per.values().map(|(s, n)| *s as f64 / *n as f64).collect();
                    let (mean, std) = mean_std(&values, std_mode);
                    (values.len(), mean, std)
                }
            };
            DetectorRank {
                detector: name.to_string(),
                n,
                mean,
                std,
            }
        })
        .collect();
    RankReport {
        unit,
        std_mode,
        detectors,
    }
}

impl RankReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12}{}\n", "Detector", "Avg. Rank");
        for d in &self.detectors {
            let _ = writeln!(out, "{:<12}{} ± {}", d.detector, fmt_opt(d.mean), fmt_opt(d.std));
        }
        let unit = match self.unit {
            RankUnit::Record => "records",
            RankUnit::Snippet => "snippet means",
        };
        let mode = match self.std_mode {
            StdMode::Population => "population",
            StdMode::Sample => "sample",
        };
        let _ = writeln!(out, "({mode} standard deviation over {unit})");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Task1Annotation, Task2Annotation};

    fn t1(item: &str, worker: &str, scores: [u8; 3]) -> Task1Annotation {
        Task1Annotation {
            dialogue_id: item.into(),
            worker_id: worker.into(),
            scores,
        }
    }

    fn t3(item: &str, worker: &str, ranks: [u8; 3]) -> Task3Annotation {
        Task3Annotation {
            snippet_id: item.into(),
            worker_id: worker.into(),
            ranks,
            own_intents: Default::default(),
        }
    }

    #[test]
    fn item_mean() {
        let a = Annotations::Task1(vec![
            t1("d", "a", [3, 3, 3]),
            t1("d", "b", [3, 3, 4]),
            t1("d", "c", [3, 3, 5]),
        ]);
        let r = aggregate_scores(&a).unwrap();
        assert_eq!(r.items[0].means[2], 4.0);
        assert_eq!(r.questions[0].histogram, [0, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(r.questions[2].histogram[6], 1);
    }

    #[test]
    fn all_threes_single_bin() {
        let a = Annotations::Task1(
            (0..4)
                .flat_map(|d| ["a", "b", "c"].map(|w| t1(&format!("d{d}"), w, [3, 3, 3])))
                .collect(),
        );
        let r = aggregate_scores(&a).unwrap();
        for q in &r.questions {
            assert_eq!(q.mean, Some(3.0));
            assert_eq!(q.histogram.iter().filter(|&&c| c > 0).count(), 1);
            assert_eq!(q.histogram[4], 4);
        }
    }

    #[test]
    fn bins_edges() {
        assert_eq!(bin_of(3, 3), 0);
        assert_eq!(bin_of(4, 3), 0); // 1.33
        assert_eq!(bin_of(5, 3), 1); // 1.67
        assert_eq!(bin_of(15, 3), 7); // 5.0 closes the last bin
        assert_eq!(bin_of(14, 3), 7); // 4.67
        assert_eq!(bin_label(0), "1.0-1.5");
        assert_eq!(bin_label(7), "4.5-5.0");
    }

    #[test]
    fn incomplete_items_are_excluded() {
        let a = Annotations::Task1(vec![t1("d", "a", [1, 1, 1]), t1("d", "b", [1, 1, 1])]);
        let r = aggregate_scores(&a).unwrap();
        assert!(r.items.is_empty());
        assert_eq!(r.excluded["d"], 2);
        assert_eq!(r.questions[0].mean, None);
    }

    #[test]
    fn modal_best_candidate() {
        let mk = |w: &str, b| Task2Annotation {
            dialogue_id: "d".into(),
            worker_id: w.into(),
            scores: [3; 4],
            best_candidate_index: b,
        };
        let r = aggregate_scores(&Annotations::Task2(vec![mk("a", 3), mk("b", 1), mk("c", 3)])).unwrap();
        assert_eq!(r.items[0].best_candidate, Some(3));
        let r = aggregate_scores(&Annotations::Task2(vec![mk("a", 4), mk("b", 2), mk("c", 0)])).unwrap();
        assert_eq!(r.items[0].best_candidate, Some(0));
        assert!(aggregate_scores(&Annotations::Task3(vec![])).is_none());
    }

    #[test]
    fn provenance_split() {
        let mut records = Vec::new();
        for (d, base) in [("m1", 2), ("m2", 2), ("s1", 3), ("s2", 3)] {
            for w in ["a", "b", "c"] {
                records.push(t1(d, w, [base; 3]));
            }
        }
        let r = aggregate_scores(&Annotations::Task1(records)).unwrap();
        let prov: HashMap<String, Provenance> = [
            ("m1", Provenance::MergeSgd),
            ("m2", Provenance::MergeSgd),
            ("s1", Provenance::Simulation),
            ("s2", Provenance::Simulation),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let c = compare_provenance(&r, &prov);
        assert_eq!(c.groups[&Provenance::MergeSgd][0].items, 2);
        assert_eq!(c.groups[&Provenance::Simulation][0].items, 2);
        let shift = c.groups[&Provenance::Simulation][2].mean.unwrap()
            - c.groups[&Provenance::MergeSgd][2].mean.unwrap();
        assert_eq!(shift, 1.0);

        let only_merge: HashMap<String, Provenance> =
            [("m1".to_string(), Provenance::MergeSgd)].into_iter().collect();
        let c = compare_provenance(&r, &only_merge);
        assert_eq!(c.groups[&Provenance::Simulation][0].items, 0);
        assert_eq!(c.missing, 3);
    }

    #[test]
    fn rank_means() {
        let recs = vec![
            t3("s", "a", [1, 2, 3]),
            t3("s", "b", [2, 1, 3]),
            t3("s", "c", [1, 2, 3]),
        ];
        let r = aggregate_ranks(&recs, RankUnit::Record, StdMode::Population);
        let means: Vec<f64> = r.detectors.iter().map(|d| d.mean.unwrap()).collect();
        assert!((means[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((means[1] - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(means[2], 3.0);
        assert_eq!(r.detectors[2].std, Some(0.0));
        assert!(r.to_table().contains("Detector1   1.33 ± 0.47"));
    }

    #[test]
    fn all_ties() {
        let recs: Vec<_> = ["a", "b", "c"].iter().map(|w| t3("s", w, [1, 1, 1])).collect();
        let r = aggregate_ranks(&recs, RankUnit::Record, StdMode::Sample);
        for d in &r.detectors {
            assert_eq!((d.mean, d.std), (Some(1.0), Some(0.0)));
        }
    }

    #[test]
    fn per_snippet_unit() {
        let recs = vec![
            t3("s1", "a", [1, 1, 1]),
            t3("s1", "b", [3, 3, 3]),
            t3("s2", "a", [1, 1, 1]),
        ];
        let r = aggregate_ranks(&recs, RankUnit::Snippet, StdMode::Population);
        assert_eq!(r.detectors[0].n, 2);
        assert_eq!(r.detectors[0].mean, Some(1.5));
        assert_eq!(r.detectors[0].std, Some(0.5));
        let r = aggregate_ranks(&[], RankUnit::Record, StdMode::Population);
        assert_eq!(r.detectors[0].mean, None);
    }
}
