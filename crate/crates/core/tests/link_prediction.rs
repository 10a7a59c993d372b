use std::collections::BTreeSet;

use proptest::prelude::*;

use skillgraph_core::fixture::{planted_partition, random_bipartite, PlantedPartition};
use skillgraph_core::graph::{KnowledgeGraph, NodeId, NodeKind, Provenance};
use skillgraph_core::linkpred::{
    edge_features, evaluate, rank_candidate_skills, split_edges, train_edge_classifier, train_node2vec,
    train_node2vec_scorer, ClassifierConfig, EdgeSplit, LabeledFeatures, LinkPair, LinkPredError, LinkScorer,
    Node2VecParams, NodeEmbeddings, SplitConfig,
};

fn two_blocks(seed: u64) -> KnowledgeGraph {
    blocks(0.5, seed)
}

fn blocks(p_in: f64, seed: u64) -> KnowledgeGraph {
    planted_partition(&PlantedPartition {
        occupations: vec![20, 20],
        skills: vec![30, 30],
        p_in: vec![p_in, p_in],
        p_out: 0.02,
        seed,
    })
}

fn features(emb: &NodeEmbeddings, pos: &[LinkPair], neg: &[LinkPair]) -> LabeledFeatures {
    let f = |p: &LinkPair| edge_features(emb, &p.occupation_id(), &p.skill_id()).unwrap();
    LabeledFeatures {
        features: pos.iter().chain(neg).map(f).collect(),
        labels: pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect(),
    }
}

fn train_graph(g: &KnowledgeGraph, split: &EdgeSplit) -> KnowledgeGraph {
    g.with_edges(split.train_pos.iter().map(|p| g.edge(&p.occupation_id(), &p.skill_id()).unwrap()))
        .unwrap()
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn flipped_labels_give_anticorrelated_scores() {
    let g = two_blocks(21);
    let split = split_edges(&g, &SplitConfig { seed: 21, ..Default::default() }).unwrap();
    let emb = train_node2vec(&train_graph(&g, &split), &Node2VecParams { dimensions: 16, seed: 21, ..Default::default() }).unwrap();
    let train = features(&emb, &split.train_pos, &split.train_neg);
    let flipped = LabeledFeatures {
        features: train.features.clone(),
        labels: train.labels.iter().map(|l| !l).collect(),
    };
    let cfg = ClassifierConfig { seed: 21, ..Default::default() };
    let model = train_edge_classifier(&train, None, &cfg).unwrap();
    let anti = train_edge_classifier(&flipped, None, &cfg).unwrap();
    let test = features(&emb, &split.test_pos, &split.test_neg);
    let a: Vec<f64> = test.features.iter().map(|x| model.probability(x)).collect();
    let b: Vec<f64> = test.features.iter().map(|x| anti.probability(x)).collect();
    let rho = spearman(&a, &b);
    assert!(rho < 0.0, "spearman {rho}");
}

#[test]
fn fitted_model_accepts_its_training_edges() {
    let g = blocks(0.85, 22);
    let split = split_edges(&g, &SplitConfig { seed: 22, ..Default::default() }).unwrap();
    let scorer = train_node2vec_scorer(
        &g,
        &split,
        &Node2VecParams { seed: 22, ..Default::default() },
        &ClassifierConfig { seed: 22, ..Default::default() },
    )
    .unwrap();
    let probs = scorer.score_pairs(&split.train_pos).unwrap();
    let accepted = probs.iter().filter(|&&p| p > 0.5).count();
    assert!(accepted * 10 >= probs.len() * 9, "{accepted}/{}", probs.len());
}

#[test]
fn missing_skill_of_a_structural_twin_is_suggested() {
    // Block A: occupations a0..a7 know skills x0..x7, except a0 lacks x7.
    // Block B is a disjoint copy, so x7 is exactly what a0's twins have.
    let mut g = KnowledgeGraph::new();
    for block in ["a", "b"] {
        for i in 0..8 {
            g.upsert_node(NodeId::occupation(format!("{block}{i}")), "o");
            g.upsert_node(NodeId::skill(format!("{block}x{i}")), "s");
        }
        for o in 0..8 {
            for s in 0..8 {
                if !(block == "a" && o == 0 && s == 7) {
                    g.add_edge(
                        &NodeId::occupation(format!("{block}{o}")),
                        &NodeId::skill(format!("{block}x{s}")),
                        1.0,
                        Provenance::Taxonomy,
                        0,
                    )
                    .unwrap();
                }
            }
        }
    }
    let split = split_edges(&g, &SplitConfig { seed: 23, ..Default::default() }).unwrap();
    let scorer = train_node2vec_scorer(
        &g,
        &split,
        &Node2VecParams { seed: 23, ..Default::default() },
        &ClassifierConfig { seed: 23, ..Default::default() },
    )
    .unwrap();
    let ranked = rank_candidate_skills(&scorer, &g, "a0", 8).unwrap();
    let hit = ranked.iter().find(|c| c.skill == "ax7").expect("ax7 among the top 8");
    assert!(!hit.exists_in_kg);
    let direct = scorer.score_pairs(&[LinkPair::new("a0", "ax7")]).unwrap()[0];
    assert_eq!(hit.probability, direct);
    let all = rank_candidate_skills(&scorer, &g, "a0", 100).unwrap();
    assert_eq!(all.len(), 16);
    assert!(all.windows(2).all(|w| w[0].probability >= w[1].probability));
    assert!(matches!(
        rank_candidate_skills(&scorer, &g, "zz", 3),
        Err(LinkPredError::UnknownNode(_))
    ));
}

/// Scores from a fixed table, so confusion identities can be checked on
/// arbitrary score vectors.
struct Table(Vec<f64>);

impl LinkScorer for Table {
    fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
        Ok(pairs
            .iter()
            .map(|p| self.0[p.skill.parse::<usize>().unwrap() % self.0.len()])
            .collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_edges_and_samples_clean_negatives(
        n_occ in 3usize..12, n_skill in 3usize..15, p in 0.2f64..0.6, seed in 0u64..1000, neg_ratio in 1usize..3,
    ) {
        let g = random_bipartite(n_occ, n_skill, p, seed);
        let cfg = SplitConfig { neg_ratio, seed, ..Default::default() };
        let Ok(split) = split_edges(&g, &cfg) else {
            // Too few non-edges for the requested negatives.
            return Ok(());
        };
        let edges: BTreeSet<LinkPair> = g.edges().map(|e| LinkPair::from_nodes(&e.occupation, &e.skill).unwrap()).collect();
        let pos: Vec<&LinkPair> = split.train_pos.iter().chain(&split.val_pos).chain(&split.test_pos).collect();
        prop_assert_eq!(pos.len(), edges.len());
        prop_assert_eq!(pos.iter().copied().cloned().collect::<BTreeSet<_>>(), edges.clone());
        let parts = [(&split.train_pos, &split.train_neg), (&split.val_pos, &split.val_neg), (&split.test_pos, &split.test_neg)];
        let mut negs = BTreeSet::new();
        for (pos, neg) in parts {
            prop_assert_eq!(neg.len(), pos.len() * neg_ratio);
            for n in neg {
                prop_assert!(!edges.contains(n));
                prop_assert!(g.contains(&n.occupation_id()) && g.contains(&n.skill_id()));
                prop_assert!(negs.insert(n.clone()), "duplicate negative");
            }
        }
        prop_assert_eq!(split_edges(&g, &cfg).unwrap(), split);
    }

    #[test]
    fn recall_and_false_negative_rate_sum_to_one(
        scores in prop::collection::vec(0.0f64..1.0, 1..40), n_pos in 1usize..20, n_neg in 1usize..20,
    ) {
        let pos: Vec<LinkPair> = (0..n_pos).map(|i| LinkPair::new(format!("o{i}"), format!("{i}"))).collect();
        let neg: Vec<LinkPair> = (0..n_neg).map(|i| LinkPair::new(format!("n{i}"), format!("{}", i + 7))).collect();
        let m = evaluate(&Table(scores), &pos, &neg).unwrap();
        let c = m.confusion;
        prop_assert_eq!(c.tp + c.fn_, n_pos);
        prop_assert_eq!(c.fp + c.tn, n_neg);
        let fnr = c.fn_ as f64 / n_pos as f64;
        prop_assert!((m.class1.recall + fnr - 1.0).abs() < 1e-12);
        let (p, r, f1) = (m.class1.precision, m.class1.recall, m.class1.f1);
        let want = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        prop_assert!((f1 - want).abs() < 1e-12);
    }
}

#[test]
fn node_kinds_are_respected_by_candidates() {
    let g = two_blocks(24);
    let split = split_edges(&g, &SplitConfig { seed: 24, ..Default::default() }).unwrap();
    let scorer = train_node2vec_scorer(
        &g,
        &split,
        &Node2VecParams { dimensions: 16, seed: 24, ..Default::default() },
        &ClassifierConfig { seed: 24, ..Default::default() },
    )
    .unwrap();
    let ranked = rank_candidate_skills(&scorer, &g, "c0o000", 5).unwrap();
    assert_eq!(ranked.len(), 5);
    for c in ranked {
        assert!(g.contains(&NodeId::skill(c.skill.as_str())));
        assert_eq!(g.has_edge(&NodeId::occupation("c0o000"), &NodeId::skill(c.skill.as_str())), c.exists_in_kg);
    }
    let _ = evaluate(&scorer, &split.test_pos, &split.test_neg).unwrap();
    assert_eq!(g.nodes_of_kind(NodeKind::Skill).count(), 60);
}
