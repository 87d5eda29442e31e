//! Corpus-level report: per-map metrics, per-group summaries, pairwise Welch
//! tests with Cohen's d, and chi-square tests on suggestion acceptance.
//!
//! A cell that cannot be computed carries an error string instead of a value;
//! it never prevents the rest of the report from being produced.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{concept_distinctness, map_diversity, suggestion_source_distance};
use super::stats::{chi_square_2x2, cohens_d_pooled, welch_t_test, SampleSummary, TestResult};
use crate::embedding::EmbeddingTable;
use crate::mindmap::MindMap;
use crate::session::SuggestionLogEntry;
use crate::walker::Regime;

pub const REPORT_VERSION: u32 = 1;

/// Metrics summarized per group and compared between groups, in report order.
pub const METRICS: [&str; 5] = [
    "node_count",
    "mean_depth",
    "diversity",
    "distinctness",
    "accepted_source_distance",
];

/// One map of the corpus with its condition label and (possibly empty) log.
#[derive(Debug, Clone)]
pub struct CorpusMap {
    pub group: String,
    pub map: MindMap,
    pub log: Vec<SuggestionLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub map_id: String,
    pub group: String,
    pub node_count: usize,
    pub mean_depth: f64,
    pub diversity: Option<f64>,
    pub resolved: usize,
    pub discarded: Vec<String>,
    pub offered: usize,
    pub accepted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub group: String,
    pub n: usize,
    pub summary: Option<SampleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Welch's test of `group_a` against `group_b`; `effect_size` holds Cohen's d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub welch: Option<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Rows are the compared categories, columns are (accepted, dismissed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareRow {
    pub rows: Vec<String>,
    pub table: Option<[[u64; 2]; 2]>,
    pub result: Option<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessSection {
    /// Distinct concepts are pooled across the whole corpus, each counted once.
    pub deduplicated: bool,
    pub concepts: usize,
    pub discarded: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSection {
    pub requests: usize,
    pub offered: usize,
    pub accepted: usize,
    pub unresolved_distances: usize,
    pub acceptance_by_group: ChiSquareRow,
    pub acceptance_by_regime: ChiSquareRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub maps: usize,
    pub nodes: usize,
    pub discarded_concepts: usize,
    pub offered: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub groups: Vec<String>,
    pub maps: Vec<MapRow>,
    pub summaries: Vec<SummaryRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub distinctness: DistinctnessSection,
    pub suggestions: SuggestionSection,
    pub totals: Totals,
}

fn acceptance_counts<'a>(entries: impl Iterator<Item = &'a SuggestionLogEntry>) -> [u64; 2] {
    let mut accepted = 0u64;
    let mut offered = 0u64;
    for e in entries {
        offered += e.offered.len() as u64;
        accepted += u64::from(e.accepted.is_some());
    }
    [accepted, offered - accepted]
}

fn chi_row(rows: Vec<String>, table: Option<[[u64; 2]; 2]>, missing: &str) -> ChiSquareRow {
    match table {
        None => ChiSquareRow {
            rows,
            table: None,
            result: None,
            error: Some(missing.to_string()),
        },
        Some(t) => {
            let (result, error) = match chi_square_2x2(t) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ChiSquareRow {
                rows,
                table: Some(t),
                result,
                error,
            }
        }
    }
}

pub fn corpus_report(corpus: &[CorpusMap], table: &EmbeddingTable) -> Report {
    let mut order: Vec<&CorpusMap> = corpus.iter().collect();
    order.sort_by(|a, b| (&a.group, a.map.map_id()).cmp(&(&b.group, b.map.map_id())));
    let groups: Vec<String> = order.iter().map(|c| c.group.clone()).collect::<BTreeSet<_>>().into_iter().collect();

    let mut samples: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut maps = Vec::with_capacity(order.len());
    for c in &order {
        let metrics = c.map.metrics();
        let [accepted, dismissed] = acceptance_counts(c.log.iter());
        let mut row = MapRow {
            map_id: c.map.map_id().to_string(),
            group: c.group.clone(),
            node_count: metrics.node_count,
            mean_depth: metrics.mean_depth,
            diversity: None,
            resolved: 0,
            discarded: Vec::new(),
            offered: (accepted + dismissed) as usize,
            accepted: accepted as usize,
            error: None,
        };
        match map_diversity(&c.map, table) {
            Ok(d) => {
                row.diversity = Some(d.value);
                row.resolved = d.resolved;
                row.discarded = d.discarded;
                samples.entry(("diversity", &c.group)).or_default().push(d.value);
            }
            Err(e) => {
                row.discarded = c.map.concepts().filter(|x| table.lookup(x).is_none()).map(str::to_string).collect();
                row.resolved = metrics.node_count - row.discarded.len();
                row.error = Some(e.to_string());
            }
        }
        samples.entry(("node_count", &c.group)).or_default().push(metrics.node_count as f64);
        samples.entry(("mean_depth", &c.group)).or_default().push(metrics.mean_depth);

        let distances = suggestion_source_distance(&c.log, table);
        let accepted_distances = samples.entry(("accepted_source_distance", &c.group)).or_default();
        accepted_distances.extend(distances.rows.iter().filter(|r| r.accepted).map(|r| r.distance));
        maps.push(row);
    }

    let all_maps: Vec<MindMap> = order.iter().map(|c| c.map.clone()).collect();
    let distinctness = match concept_distinctness(&all_maps, table) {
        Ok(d) => {
            for g in &groups {
                let concepts: BTreeSet<&str> = order
                    .iter()
                    .filter(|c| &c.group == g)
                    .flat_map(|c| c.map.concepts())
                    .collect();
                let scores = samples.entry(("distinctness", g)).or_default();
                scores.extend(concepts.iter().filter_map(|c| d.scores.get(*c)));
            }
            DistinctnessSection {
                deduplicated: true,
                concepts: d.scores.len(),
                discarded: d.discarded,
                error: None,
            }
        }
        Err(e) => DistinctnessSection {
            deduplicated: true,
            concepts: 0,
            discarded: Vec::new(),
            error: Some(e.to_string()),
        },
    };

    let mut summaries = Vec::new();
    let mut by_cell: BTreeMap<(&str, &str), Result<SampleSummary, String>> = BTreeMap::new();
    for metric in METRICS {
        for g in &groups {
            let xs = samples.get(&(metric, g.as_str())).map(Vec::as_slice).unwrap_or_default();
            let summary = SampleSummary::from_sample(xs).map_err(|e| e.to_string());
            summaries.push(SummaryRow {
                metric: metric.to_string(),
                group: g.clone(),
                n: xs.len(),
                summary: summary.as_ref().ok().copied(),
                error: summary.as_ref().err().cloned(),
            });
            by_cell.insert((metric, g.as_str()), summary);
        }
    }

    let mut comparisons = Vec::new();
    for metric in METRICS {
        for (i, a) in groups.iter().enumerate() {
            for b in &groups[i + 1..] {
                let outcome = match (&by_cell[&(metric, a.as_str())], &by_cell[&(metric, b.as_str())]) {
                    (Ok(sa), Ok(sb)) => welch_t_test(sa, sb)
                        .map(|mut r| {
                            r.effect_size = cohens_d_pooled(sa, sb).ok();
                            r
                        })
                        .map_err(|e| e.to_string()),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                comparisons.push(ComparisonRow {
                    metric: metric.to_string(),
                    group_a: a.clone(),
                    group_b: b.clone(),
                    welch: outcome.as_ref().ok().copied(),
                    error: outcome.err(),
                });
            }
        }
    }

    let all_entries = || order.iter().flat_map(|c| c.log.iter());
    let by_group = if groups.len() == 2 {
        let counts = |g: &String| acceptance_counts(order.iter().filter(|c| &c.group == g).flat_map(|c| c.log.iter()));
        Some([counts(&groups[0]), counts(&groups[1])])
    } else {
        None
    };
    let by_regime = [Regime::Bfs, Regime::Dfs].map(|r| acceptance_counts(all_entries().filter(|e| e.regime == r)));
    let [accepted, dismissed] = acceptance_counts(all_entries());
    let unresolved = order.iter().map(|c| suggestion_source_distance(&c.log, table).skipped).sum();

    let suggestions = SuggestionSection {
        requests: all_entries().count(),
        offered: (accepted + dismissed) as usize,
        accepted: accepted as usize,
        unresolved_distances: unresolved,
        acceptance_by_group: chi_row(groups.clone(), by_group, "requires exactly two groups"),
        acceptance_by_regime: chi_row(vec!["BFS".into(), "DFS".into()], Some(by_regime), ""),
    };

    let totals = Totals {
        maps: maps.len(),
        nodes: maps.iter().map(|m| m.node_count).sum(),
        discarded_concepts: maps.iter().map(|m| m.discarded.len()).sum(),
        offered: maps.iter().map(|m| m.offered).sum(),
        accepted: maps.iter().map(|m| m.accepted).sum(),
    };

    Report {
        version: REPORT_VERSION,
        groups,
        maps,
        summaries,
        comparisons,
        distinctness,
        suggestions,
        totals,
    }
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "n/a".into())
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Mind-map corpus report\n");
        let _ = writeln!(s, "Groups: {}\n", self.groups.join(", "));

        let _ = writeln!(s, "## Maps\n");
        let _ = writeln!(s, "| map | group | nodes | mean depth | diversity | discarded | offered | accepted |");
        let _ = writeln!(s, "|---|---|---:|---:|---:|---:|---:|---:|");
        for m in &self.maps {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                m.map_id,
                m.group,
                m.node_count,
                num(m.mean_depth),
                opt(m.diversity),
                m.discarded.len(),
                m.offered,
                m.accepted
            );
        }

        let _ = writeln!(s, "\n## Group summaries\n");
        let _ = writeln!(s, "| metric | group | n | M | σ |");
        let _ = writeln!(s, "|---|---|---:|---:|---:|");
        for r in &self.summaries {
            match (&r.summary, &r.error) {
                (Some(x), _) => {
                    let _ = writeln!(s, "| {} | {} | {} | {} | {} |", r.metric, r.group, r.n, num(x.mean), num(x.sd));
                }
                (None, e) => {
                    let _ = writeln!(s, "| {} | {} | {} | {} | |", r.metric, r.group, r.n, e.as_deref().unwrap_or(""));
                }
            }
        }

        let _ = writeln!(s, "\n## Welch tests\n");
        let _ = writeln!(s, "| metric | A | B | t | df | p | 95% CI | d |");
        let _ = writeln!(s, "|---|---|---|---:|---:|---:|---|---:|");
        for c in &self.comparisons {
            match &c.welch {
                Some(w) => {
                    let ci = w.ci95.map(|(lo, hi)| format!("[{}, {}]", num(lo), num(hi))).unwrap_or_default();
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | {} | {:.3e} | {} | {} |",
                        c.metric,
                        c.group_a,
                        c.group_b,
                        num(w.statistic),
                        num(w.df),
                        w.p_value,
                        ci,
                        opt(w.effect_size)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | | | | |",
                        c.metric,
                        c.group_a,
                        c.group_b,
                        c.error.as_deref().unwrap_or("")
                    );
                }
            }
        }

        let _ = writeln!(s, "\n## Suggestions\n");
        let sg = &self.suggestions;
        let _ = writeln!(
            s,
            "{} requests, {} offered, {} accepted, {} distances unresolved.\n",
            sg.requests, sg.offered, sg.accepted, sg.unresolved_distances
        );
        for (name, row) in [("group", &sg.acceptance_by_group), ("regime", &sg.acceptance_by_regime)] {
            match &row.result {
                Some(r) => {
                    let _ = writeln!(
                        s,
                        "- acceptance by {name} ({}): χ²(1) = {}, φ = {}, p = {:.3e}",
                        row.rows.join(" vs "),
                        num(r.statistic),
                        opt(r.effect_size),
                        r.p_value
                    );
                }
                None => {
                    let _ = writeln!(s, "- acceptance by {name}: {}", row.error.as_deref().unwrap_or(""));
                }
            }
        }

        let d = &self.distinctness;
        let _ = writeln!(
            s,
            "\nDistinctness pools {} distinct concepts (deduplicated); {} discarded.",
            d.concepts,
            d.discarded.len()
        );
        let t = &self.totals;
        let _ = writeln!(
            s,
            "\nTotals: {} maps, {} nodes, {} discarded concepts.",
            t.maps, t.nodes, t.discarded_concepts
        );
        s
    }
}
