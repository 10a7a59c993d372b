use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LinkPair, LinkPredError};
use crate::graph::{KnowledgeGraph, NodeKind};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Train, validation and test fractions of the positive edges.
    pub ratios: [f64; 3],
    /// Negatives per positive in each part.
    pub neg_ratio: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.55, 0.15, 0.30],
            neg_ratio: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub seed: u64,
    pub train_pos: Vec<LinkPair>,
    pub val_pos: Vec<LinkPair>,
    pub test_pos: Vec<LinkPair>,
    pub train_neg: Vec<LinkPair>,
    pub val_neg: Vec<LinkPair>,
    pub test_neg: Vec<LinkPair>,
}

impl EdgeSplit {
    pub fn save(&self, path: &Path) -> Result<(), LinkPredError> {
        let text = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, text + "\n").map_err(|source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<EdgeSplit, LinkPredError> {
        let text = fs::read_to_string(path).map_err(|source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| LinkPredError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn all_negatives(&self) -> impl Iterator<Item = &LinkPair> {
        self.train_neg.iter().chain(&self.val_neg).chain(&self.test_neg)
    }
}

/// Apportions `total` items by `ratios` with the largest-remainder method.
/// Equal remainders go to the earlier part, so the sizes always sum to `total`.
pub fn largest_remainder(total: usize, ratios: &[f64]) -> Vec<usize> {
    let sum: f64 = ratios.iter().sum();
    let quotas: Vec<f64> = ratios.iter().map(|r| r / sum * total as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    let frac = |i: usize| quotas[i] - sizes[i] as f64;
    // Remainders within 1e-9 of each other count as ties.
    order.sort_by(|&a, &b| {
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() < 1e-9 {
            a.cmp(&b)
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Uniformly samples `count` distinct occupation-skill non-edges that are not
/// in `exclude`.
pub fn sample_non_edges<R: Rng>(
    g: &KnowledgeGraph,
    count: usize,
    exclude: &BTreeSet<LinkPair>,
    rng: &mut R,
) -> Result<Vec<LinkPair>, LinkPredError> {
    let skills: Vec<&str> = g
        .nodes_of_kind(NodeKind::Skill)
        .map(|s| s.key.as_str())
        .collect();
    let mut pool = Vec::new();
    for occ in g.nodes_of_kind(NodeKind::Occupation) {
        let adjacent = g.neighbors(occ)?;
        for &skill in &skills {
            let pair = LinkPair::new(&occ.key, skill);
            if !adjacent.contains(&pair.skill_id()) && !exclude.contains(&pair) {
                pool.push(pair);
            }
        }
    }
    if pool.len() < count {
        return Err(LinkPredError::InsufficientNegatives {
            needed: count,
            available: pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

/// Partitions the graph's edges into train/validation/test positives and
/// samples disjoint bipartite non-edges as negatives for each part.
pub fn split_edges(g: &KnowledgeGraph, config: &SplitConfig) -> Result<EdgeSplit, LinkPredError> {
    let total = g.edge_count();
    if total < 10 {
        return Err(LinkPredError::TooFewEdges(total));
    }
    let ratios = config.ratios;
    let ratio_sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratio_sum - 1.0).abs() > 1e-9 {
        return Err(LinkPredError::InvalidRatios(ratios.to_vec()));
    }

    let mut rng = rng::rng(config.seed);
    let mut positives: Vec<LinkPair> = g
        .edges()
        .map(|e| LinkPair::new(&e.occupation.key, &e.skill.key))
        .collect();
    positives.shuffle(&mut rng);

    let sizes = largest_remainder(total, &ratios);
    let test_pos = positives.split_off(sizes[0] + sizes[1]);
    let val_pos = positives.split_off(sizes[0]);
    let train_pos = positives;

    let neg_counts: Vec<usize> = sizes.iter().map(|s| s * config.neg_ratio).collect();
    let mut negatives = sample_non_edges(g, neg_counts.iter().sum(), &BTreeSet::new(), &mut rng)?;
    let test_neg = negatives.split_off(neg_counts[0] + neg_counts[1]);
    let val_neg = negatives.split_off(neg_counts[0]);

    Ok(EdgeSplit {
        seed: config.seed,
        train_pos,
        val_pos,
        test_pos,
        train_neg: negatives,
        val_neg,
        test_neg,
    })
}
