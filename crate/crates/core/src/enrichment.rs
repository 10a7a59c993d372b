//! Job-posting ingest and co-occurrence based graph enrichment.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{KnowledgeGraph, NodeId, Provenance};
use crate::matcher::SkillMatcher;
use crate::taxonomy::IscoCode;

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
pub const DEFAULT_MIN_COUNT: u64 = 1;

#[derive(Debug, Error)]
pub enum EnrichmentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no valid job postings")]
    EmptyDataset { path: PathBuf },
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillMention {
    pub surface: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPostingRecord {
    pub posting_id: String,
    pub isco_code: IscoCode,
    pub mentions: Vec<SkillMention>,
}

/// Valid postings plus the number of input lines that failed validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostingDataset {
    pub records: Vec<JobPostingRecord>,
    pub skipped_lines: usize,
}

#[derive(Deserialize)]
struct RawPosting {
    posting_id: String,
    isco_code: String,
    mentions: Vec<SkillMention>,
}

fn validate(raw: RawPosting) -> Result<JobPostingRecord, String> {
    if raw.posting_id.trim().is_empty() {
        return Err("empty posting_id".into());
    }
    let isco_code = IscoCode::parse(&raw.isco_code).map_err(|e| e.to_string())?;
    if isco_code.level() != 4 {
        return Err(format!("isco_code {isco_code} is not level 4"));
    }
    for m in &raw.mentions {
        if m.surface.trim().is_empty() {
            return Err("empty mention surface".into());
        }
        if !(0.0..=1.0).contains(&m.confidence) {
            return Err(format!("confidence {} outside [0, 1]", m.confidence));
        }
    }
    Ok(JobPostingRecord {
        posting_id: raw.posting_id,
        isco_code,
        mentions: raw.mentions,
    })
}

/// Reads a JSON-lines posting file. Invalid lines and repeated posting ids
/// are skipped and counted; blank lines are ignored.
pub fn load_postings(path: &Path) -> Result<PostingDataset, EnrichmentError> {
    let io_err = |source| EnrichmentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut dataset = PostingDataset::default();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawPosting>(&line)
            .map_err(|e| e.to_string())
            .and_then(validate);
        match parsed {
            Ok(rec) if seen.insert(rec.posting_id.clone()) => dataset.records.push(rec),
            Ok(rec) => {
                log::warn!("{}:{}: duplicate posting_id {}", path.display(), idx + 1, rec.posting_id);
                dataset.skipped_lines += 1;
            }
            Err(msg) => {
                log::warn!("{}:{}: skipped: {msg}", path.display(), idx + 1);
                dataset.skipped_lines += 1;
            }
        }
    }
    if dataset.records.is_empty() {
        return Err(EnrichmentError::EmptyDataset {
            path: path.to_path_buf(),
        });
    }
    Ok(dataset)
}

/// Writes postings as JSON lines, one record per line.
pub fn write_postings(path: &Path, postings: &[JobPostingRecord]) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for p in postings {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentConfig {
    pub min_confidence: f64,
    pub min_count: u64,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        EnrichmentConfig {
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            min_count: DEFAULT_MIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentReport {
    pub postings_read: usize,
    pub postings_skipped: usize,
    pub mentions_total: usize,
    pub mentions_matched: usize,
    pub edges_added: usize,
    pub edges_reweighted: usize,
}

/// A posting's mentions resolved to catalog skill ids, in mention order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPosting {
    pub posting_id: String,
    pub isco_code: IscoCode,
    pub mentions_total: usize,
    pub skill_ids: Vec<String>,
}

/// Matches every mention with confidence at or above `min_confidence`.
/// Runs in parallel over postings; output order follows input order.
pub fn match_postings(
    postings: &[JobPostingRecord],
    matcher: &SkillMatcher,
    min_confidence: f64,
) -> Vec<MatchedPosting> {
    postings
        .par_iter()
        .map(|p| MatchedPosting {
            posting_id: p.posting_id.clone(),
            isco_code: p.isco_code.clone(),
            mentions_total: p.mentions.len(),
            skill_ids: p
                .mentions
                .iter()
                .filter(|m| m.confidence >= min_confidence)
                .filter_map(|m| matcher.match_mention(&m.surface).matched_skill_id)
                .collect(),
        })
        .collect()
}

/// Adds posting co-occurrence counts to the graph, then renormalizes weights.
///
/// Pairs seen fewer than `min_count` times create no new edge; existing edges
/// always receive their counts. Postings whose occupation is not in the graph
/// are skipped.
pub fn enrich(
    graph: &KnowledgeGraph,
    postings: &PostingDataset,
    matcher: &SkillMatcher,
    config: &EnrichmentConfig,
) -> Result<(KnowledgeGraph, EnrichmentReport), EnrichmentError> {
    let mut g = graph.clone();
    let mut report = EnrichmentReport {
        postings_read: postings.records.len() + postings.skipped_lines,
        postings_skipped: postings.skipped_lines,
        ..Default::default()
    };

    let known: Vec<JobPostingRecord> = postings
        .records
        .iter()
        .filter(|p| {
            let present = g.contains(&NodeId::occupation(p.isco_code.digits()));
            if !present {
                report.postings_skipped += 1;
            }
            present
        })
        .cloned()
        .collect();

    let matched = match_postings(&known, matcher, config.min_confidence);
    let mut tally: BTreeMap<(String, String), u64> = BTreeMap::new();
    for m in &matched {
        report.mentions_total += m.mentions_total;
        report.mentions_matched += m.skill_ids.len();
        for skill in &m.skill_ids {
            *tally
                .entry((m.isco_code.digits().to_string(), skill.clone()))
                .or_default() += 1;
        }
    }

    for ((occ, skill), count) in tally {
        if let Some(edge) = g.edge_mut(&occ, &skill) {
            edge.cooccurrence_count += count;
            if edge.provenance == Provenance::Taxonomy {
                edge.provenance = Provenance::Both;
            }
            report.edges_reweighted += 1;
        } else if count >= config.min_count {
            let s = NodeId::skill(skill.clone());
            if !g.contains(&s) {
                let label = matcher_label(matcher, &skill);
                g.upsert_node(s.clone(), label);
            }
            g.add_edge(&NodeId::occupation(occ), &s, 1.0, Provenance::Posting, count)?;
            report.edges_added += 1;
        }
    }

    normalize_weights(&mut g);
    Ok((g, report))
}

fn matcher_label(matcher: &SkillMatcher, skill_id: &str) -> String {
    matcher
        .label(skill_id)
        .map(str::to_string)
        .unwrap_or_else(|| skill_id.to_string())
}

/// Per-occupation max normalization of co-occurrence counts. Edges with no
/// observed co-occurrence get `1 / (1 + max)`; occupations with no observed
/// co-occurrence keep weight 1.0 everywhere.
pub fn normalize_weights(g: &mut KnowledgeGraph) {
    let mut max_count: BTreeMap<String, u64> = BTreeMap::new();
    for e in g.edges() {
        let m = max_count.entry(e.occupation.key.clone()).or_default();
        *m = (*m).max(e.cooccurrence_count);
    }
    for e in g.edges_mut() {
        let max = max_count[&e.occupation.key];
        e.weight = if max == 0 {
            1.0
        } else if e.cooccurrence_count == 0 {
            1.0 / (1.0 + max as f64)
        } else {
            e.cooccurrence_count as f64 / max as f64
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::MatcherConfig;
    use crate::taxonomy::SkillRecord;
    use std::fs;

    fn catalog() -> Vec<SkillRecord> {
        [("s", "software development"), ("t", "team leadership"), ("u", "feed livestock")]
            .iter()
            .map(|(id, l)| SkillRecord {
                skill_id: id.to_string(),
                label: l.to_string(),
            })
            .collect()
    }

    fn base_graph() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        g.upsert_node(NodeId::occupation("2132"), "programmers");
        g.upsert_node(NodeId::occupation("6121"), "farmers");
        g.upsert_node(NodeId::skill("t"), "team leadership");
        g.upsert_node(NodeId::skill("u"), "feed livestock");
        g.add_edge(&NodeId::occupation("2132"), &NodeId::skill("t"), 1.0, Provenance::Taxonomy, 0)
            .unwrap();
        g.add_edge(&NodeId::occupation("6121"), &NodeId::skill("u"), 1.0, Provenance::Taxonomy, 0)
            .unwrap();
        g
    }

    fn posting(id: &str, isco: &str, mentions: &[(&str, f64)]) -> JobPostingRecord {
        JobPostingRecord {
            posting_id: id.into(),
            isco_code: IscoCode::parse(isco).unwrap(),
            mentions: mentions
                .iter()
                .map(|(s, c)| SkillMention {
                    surface: s.to_string(),
                    confidence: *c,
                })
                .collect(),
        }
    }

    fn dataset(records: Vec<JobPostingRecord>) -> PostingDataset {
        PostingDataset {
            records,
            skipped_lines: 0,
        }
    }

    fn matcher() -> SkillMatcher {
        SkillMatcher::new(&catalog(), MatcherConfig::default()).unwrap()
    }

    #[test]
    fn loads_valid_lines_and_skips_bad_ones() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        fs::write(
            &path,
            concat!(
                r#"{"posting_id":"a","isco_code":"2132","mentions":[{"surface":"x","confidence":0.9}]}"#, "\n",
                r#"{"posting_id":"b","isco_code":"213","mentions":[]}"#, "\n",
                "\n",
                r#"{"posting_id":"c","isco_code":"6121","mentions":[]}"#, "\n",
                r#"{"posting_id":"a","isco_code":"6121","mentions":[]}"#, "\n",
                "not json\n",
                r#"{"posting_id":"d","isco_code":"6121","mentions":[{"surface":"y","confidence":1.5}]}"#, "\n",
            ),
        )
        .unwrap();
        let ds = load_postings(&path).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.skipped_lines, 4);
    }

    #[test]
    fn three_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let ps = vec![
            posting("1", "2132", &[("software development", 0.9)]),
            posting("2", "2132", &[]),
            posting("3", "6121", &[("feed livestock", 0.7)]),
        ];
        write_postings(&path, &ps).unwrap();
        let ds = load_postings(&path).unwrap();
        assert_eq!(ds.records, ps);
    }

    #[test]
    fn all_invalid_or_empty_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        fs::write(&path, "").unwrap();
        assert!(matches!(load_postings(&path), Err(EnrichmentError::EmptyDataset { .. })));
        fs::write(&path, "{}\n[1]\n").unwrap();
        assert!(matches!(load_postings(&path), Err(EnrichmentError::EmptyDataset { .. })));
    }

    #[test]
    fn single_mention_creates_posting_edge() {
        let ds = dataset(vec![posting("p", "2132", &[("Software development", 0.9)])]);
        let (g, report) = enrich(&base_graph(), &ds, &matcher(), &EnrichmentConfig::default()).unwrap();
        let e = g.edge(&NodeId::occupation("2132"), &NodeId::skill("s")).unwrap();
        assert_eq!(e.cooccurrence_count, 1);
        assert_eq!(e.provenance, Provenance::Posting);
        assert_eq!(g.label(&NodeId::skill("s")), Some("software development"));
        assert_eq!(report.edges_added, 1);
        assert_eq!(report.mentions_matched, 1);
        // The untouched taxonomy edge now sits below the observed one.
        let t = g.edge(&NodeId::occupation("2132"), &NodeId::skill("t")).unwrap();
        assert_eq!(e.weight, 1.0);
        assert_eq!(t.weight, 0.5);
    }

    #[test]
    fn low_confidence_mention_is_ignored() {
        let ds = dataset(vec![posting("p", "2132", &[("software development", 0.3)])]);
        let (g, report) = enrich(&base_graph(), &ds, &matcher(), &EnrichmentConfig::default()).unwrap();
        assert!(!g.contains(&NodeId::skill("s")));
        assert_eq!(report.edges_added, 0);
        assert_eq!(report.mentions_total, 1);
        assert_eq!(report.mentions_matched, 0);
    }

    #[test]
    fn taxonomy_edge_becomes_both_and_unknown_occupation_is_skipped() {
        let ds = dataset(vec![
            posting("p1", "2132", &[("team leadership", 0.9)]),
            posting("p2", "9999", &[("team leadership", 0.9)]),
        ]);
        let (g, report) = enrich(&base_graph(), &ds, &matcher(), &EnrichmentConfig::default()).unwrap();
        let e = g.edge(&NodeId::occupation("2132"), &NodeId::skill("t")).unwrap();
        assert_eq!(e.provenance, Provenance::Both);
        assert_eq!(e.cooccurrence_count, 1);
        assert_eq!(report.postings_skipped, 1);
        assert_eq!(report.postings_read, 2);
        assert_eq!(report.edges_reweighted, 1);
        assert!(!g.contains(&NodeId::occupation("9999")));
    }

    #[test]
    fn min_count_gates_new_edges_only() {
        let ds = dataset(vec![
            posting("p1", "2132", &[("software development", 0.9), ("team leadership", 0.9)]),
            posting("p2", "2132", &[("software development", 0.9)]),
        ]);
        let cfg = EnrichmentConfig {
            min_count: 3,
            ..Default::default()
        };
        let (g, report) = enrich(&base_graph(), &ds, &matcher(), &cfg).unwrap();
        assert!(!g.has_edge(&NodeId::occupation("2132"), &NodeId::skill("s")));
        assert_eq!(report.edges_added, 0);
        assert_eq!(report.edges_reweighted, 1);
    }

    #[test]
    fn per_occupation_max_normalization() {
        let mut g = KnowledgeGraph::new();
        let o = NodeId::occupation("1111");
        g.upsert_node(o.clone(), "o");
        for (s, c) in [("a", 4), ("b", 2), ("c", 1), ("d", 0)] {
            g.upsert_node(NodeId::skill(s), s);
            g.add_edge(&o, &NodeId::skill(s), 1.0, Provenance::Both, c).unwrap();
        }
        let o2 = NodeId::occupation("2222");
        g.upsert_node(o2.clone(), "o2");
        g.add_edge(&o2, &NodeId::skill("a"), 0.3, Provenance::Taxonomy, 0).unwrap();
        normalize_weights(&mut g);
        let w = |o: &NodeId, s: &str| g.edge(o, &NodeId::skill(s)).unwrap().weight;
        assert_eq!([w(&o, "a"), w(&o, "b"), w(&o, "c")], [1.0, 0.5, 0.25]);
        assert_eq!(w(&o, "d"), 1.0 / 5.0);
        assert_eq!(w(&o2, "a"), 1.0);
    }

    #[test]
    fn enrichment_is_additive_over_disjoint_datasets() {
        let a = vec![
            posting("a1", "2132", &[("software development", 0.9), ("team leadership", 0.8)]),
            posting("a2", "6121", &[("feed livestock", 0.9), ("software developmnet", 0.9)]),
        ];
        let b = vec![
            posting("b1", "2132", &[("software development", 0.9)]),
            posting("b2", "6121", &[("team leadership", 0.95), ("feed livestock", 0.6)]),
        ];
        let cfg = EnrichmentConfig::default();
        let m = matcher();
        let (ga, _) = enrich(&base_graph(), &dataset(a.clone()), &m, &cfg).unwrap();
        let (gab, _) = enrich(&ga, &dataset(b.clone()), &m, &cfg).unwrap();
        let mut all = a;
        all.extend(b);
        let (gu, _) = enrich(&base_graph(), &dataset(all), &m, &cfg).unwrap();
        assert_eq!(gab, gu);
        // Edge set only grows.
        for e in base_graph().edges() {
            assert!(gu.has_edge(&e.occupation, &e.skill));
        }
    }
}
