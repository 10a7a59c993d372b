use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{is_positive, sample_non_edges, LinkPair, LinkPredError, LinkScorer};
use crate::graph::{KnowledgeGraph, NodeId, NodeKind};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    pub fn from_counts(hits: usize, false_alarms: usize, misses: usize) -> Self {
        let precision = ratio(hits, hits + false_alarms);
        let recall = ratio(hits, hits + misses);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics { precision, recall, f1 }
    }
}

impl Confusion {
    pub fn class1(&self) -> ClassMetrics {
        ClassMetrics::from_counts(self.tp, self.fp, self.fn_)
    }

    pub fn class0(&self) -> ClassMetrics {
        ClassMetrics::from_counts(self.tn, self.fn_, self.fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub confusion: Confusion,
    pub class1: ClassMetrics,
    pub class0: ClassMetrics,
}

impl From<Confusion> for LinkMetrics {
    fn from(confusion: Confusion) -> Self {
        LinkMetrics {
            confusion,
            class1: confusion.class1(),
            class0: confusion.class0(),
        }
    }
}

/// Scores positives and negatives as one batch and tallies decisions at the
/// 0.5 threshold.
pub fn evaluate<S: LinkScorer + ?Sized>(scorer: &S, pos: &[LinkPair], neg: &[LinkPair]) -> Result<LinkMetrics, LinkPredError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(LinkPredError::EmptyPairs);
    }
    let pairs: Vec<LinkPair> = pos.iter().chain(neg).cloned().collect();
    let probs = scorer.score_pairs(&pairs)?;
    let mut c = Confusion::default();
    for (i, p) in probs.into_iter().enumerate() {
        match (i < pos.len(), is_positive(p)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ratio: usize,
    pub f1_class1: f64,
}

/// The negative sample used for `ratio` in a sweep: `ratio · n_pos` non-edges
/// of `g`, drawn from stream `ratio` of `seed`.
pub fn sweep_negatives(g: &KnowledgeGraph, n_pos: usize, ratio: usize, seed: u64) -> Result<Vec<LinkPair>, LinkPredError> {
    let mut rng = rng::stream_rng(seed, ratio as u64);
    sample_non_edges(g, ratio * n_pos, &BTreeSet::new(), &mut rng)
}

/// Class-1 F1 on `test_pos` against freshly sampled negatives at each ratio.
pub fn ratio_sweep<S: LinkScorer + ?Sized>(
    scorer: &S,
    test_pos: &[LinkPair],
    g: &KnowledgeGraph,
    ratios: &[usize],
    seed: u64,
) -> Result<Vec<SweepPoint>, LinkPredError> {
    ratios
        .iter()
        .map(|&r| {
            let neg = sweep_negatives(g, test_pos.len(), r, seed)?;
            let m = evaluate(scorer, test_pos, &neg)?;
            Ok(SweepPoint {
                ratio: r,
                f1_class1: m.class1.f1,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<(), LinkPredError> {
    let err = |e: csv::Error| LinkPredError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for p in points {
        w.serialize(p).map_err(err)?;
    }
    w.flush().map_err(|source| LinkPredError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub occupation: String,
    pub skill: String,
    pub probability: f64,
    pub exists_in_kg: bool,
}

/// Scores `occupation` against every skill node and returns the `k` most
/// probable, ties broken by skill id.
pub fn rank_candidate_skills<S: LinkScorer + ?Sized>(
    scorer: &S,
    g: &KnowledgeGraph,
    occupation: &str,
    k: usize,
) -> Result<Vec<Candidate>, LinkPredError> {
    let occ = NodeId::occupation(occupation);
    let adjacent = g.neighbors(&occ).map_err(|_| LinkPredError::UnknownNode(occ.clone()))?;
    let pairs: Vec<LinkPair> = g
        .nodes_of_kind(NodeKind::Skill)
        .map(|s| LinkPair::new(occupation, &s.key))
        .collect();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let probs = scorer.score_pairs(&pairs)?;
    let mut ranked: Vec<Candidate> = pairs
        .into_iter()
        .zip(probs)
        .map(|(p, probability)| Candidate {
            exists_in_kg: adjacent.contains(&p.skill_id()),
            occupation: p.occupation,
            skill: p.skill,
            probability,
        })
        .collect();
    ranked.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.skill.cmp(&b.skill)));
    ranked.truncate(k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Provenance;
    use std::collections::BTreeMap;

    /// Looks up a fixed probability per pair; unknown pairs get 0.
    struct Table(BTreeMap<LinkPair, f64>);
    impl LinkScorer for Table {
        fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
            Ok(pairs.iter().map(|p| self.0.get(p).copied().unwrap_or(0.0)).collect())
        }
    }

    struct Constant(f64);
    impl LinkScorer for Constant {
        fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
            Ok(vec![self.0; pairs.len()])
        }
    }

    fn pairs(prefix: &str, n: usize) -> Vec<LinkPair> {
        (0..n).map(|i| LinkPair::new(format!("{prefix}{i}"), "s")).collect()
    }

    #[test]
    fn hand_computed_confusion() {
        let c = Confusion { tp: 50, fp: 10, fn_: 20, tn: 40 };
        let m = LinkMetrics::from(c);
        assert!((m.class1.precision - 50.0 / 60.0).abs() < 1e-12);
        assert!((m.class1.recall - 50.0 / 70.0).abs() < 1e-12);
        assert!((m.class1.f1 - 100.0 / 130.0).abs() < 1e-12);
        assert_eq!(format!("{:.3} {:.3} {:.3}", m.class1.precision, m.class1.recall, m.class1.f1), "0.833 0.714 0.769");
        assert!((m.class0.precision - 40.0 / 60.0).abs() < 1e-12);
        assert!((m.class0.recall - 40.0 / 50.0).abs() < 1e-12);
        // recall + false-negative rate = 1
        assert!((m.class1.recall + 20.0 / 70.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_all_positive_scorers() {
        let pos = pairs("p", 10);
        let neg = pairs("n", 10);
        let table = Table(pos.iter().map(|p| (p.clone(), 0.9)).collect());
        let m = evaluate(&table, &pos, &neg).unwrap();
        for c in [m.class1, m.class0] {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        let m = evaluate(&Constant(0.7), &pos, &neg).unwrap();
        assert_eq!((m.class1.precision, m.class1.recall), (0.5, 1.0));
        assert!((m.class1.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.class0.f1, 0.0);
        assert!(matches!(evaluate(&Constant(0.7), &pos, &[]), Err(LinkPredError::EmptyPairs)));
    }

    #[test]
    fn permutation_invariant() {
        let pos = pairs("p", 6);
        let neg = pairs("n", 6);
        let probs = [0.9, 0.2, 0.6, 0.4, 0.51, 0.5, 0.1, 0.8, 0.55, 0.3, 0.7, 0.05];
        let table = Table(pos.iter().chain(&neg).cloned().zip(probs).collect());
        let a = evaluate(&table, &pos, &neg).unwrap();
        let mut pos_r = pos.clone();
        pos_r.reverse();
        let mut neg_r = neg.clone();
        neg_r.rotate_left(2);
        assert_eq!(a, evaluate(&table, &pos_r, &neg_r).unwrap());
        assert_eq!(a.confusion, Confusion { tp: 3, fp: 3, fn_: 3, tn: 3 });
    }

    fn sparse_graph() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        for o in 0..10 {
            g.upsert_node(NodeId::occupation(format!("o{o}")), "o");
        }
        for s in 0..20 {
            g.upsert_node(NodeId::skill(format!("s{s:02}")), "s");
        }
        for o in 0..10 {
            for s in [o, o + 10] {
                g.add_edge(&NodeId::occupation(format!("o{o}")), &NodeId::skill(format!("s{s:02}")), 1.0, Provenance::Taxonomy, 0)
                    .unwrap();
            }
        }
        g
    }

    #[test]
    fn perfect_scorer_sweeps_flat_and_ratio_one_matches_evaluate() {
        let g = sparse_graph();
        let pos: Vec<LinkPair> = g.edges().map(|e| LinkPair::new(&e.occupation.key, &e.skill.key)).collect();
        let table = Table(pos.iter().map(|p| (p.clone(), 1.0)).collect());
        let sweep = ratio_sweep(&table, &pos, &g, &[1, 2, 3, 4, 5, 6, 7], 11).unwrap();
        assert_eq!(sweep.len(), 7);
        assert!(sweep.iter().all(|p| p.f1_class1 == 1.0));

        let half = Constant(0.75);
        let sweep = ratio_sweep(&half, &pos, &g, &[1], 11).unwrap();
        let neg = sweep_negatives(&g, pos.len(), 1, 11).unwrap();
        assert_eq!(sweep[0].f1_class1, evaluate(&half, &pos, &neg).unwrap().class1.f1);
        assert!(matches!(
            ratio_sweep(&half, &pos, &g, &[10], 11),
            Err(LinkPredError::InsufficientNegatives { .. })
        ));
    }

    #[test]
    fn sweep_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &[SweepPoint { ratio: 1, f1_class1: 0.5 }, SweepPoint { ratio: 2, f1_class1: 0.25 }]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "ratio,f1_class1\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn candidates_are_ranked_with_existence_flags() {
        let g = sparse_graph();
        let mut scores = BTreeMap::new();
        scores.insert(LinkPair::new("o0", "s05"), 0.8);
        scores.insert(LinkPair::new("o0", "s00"), 0.8);
        scores.insert(LinkPair::new("o0", "s10"), 0.6);
        let top = rank_candidate_skills(&Table(scores), &g, "o0", 3).unwrap();
        let got: Vec<(&str, bool)> = top.iter().map(|c| (c.skill.as_str(), c.exists_in_kg)).collect();
        assert_eq!(got, [("s00", true), ("s05", false), ("s10", true)]);
        let all = rank_candidate_skills(&Constant(0.1), &g, "o0", 100).unwrap();
        assert_eq!(all.len(), 20);
        assert!(matches!(
            rank_candidate_skills(&Constant(0.1), &g, "nope", 3),
            Err(LinkPredError::UnknownNode(_))
        ));
    }
}
