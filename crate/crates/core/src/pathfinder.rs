//! Occupation similarity from shared skills and shortest career transitions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{KnowledgeGraph, NodeId, NodeKind};

pub const DEFAULT_MAX_DISTANCE: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{0} and {1} are of different kinds")]
    KindMismatch(NodeId, NodeId),
    #[error("{0} is not an occupation")]
    NotOccupation(NodeId),
    #[error("no transition path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("invalid distance {0}")]
    InvalidDistance(f64),
}

fn jaccard(a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    1.0 - inter as f64 / (a.len() + b.len() - inter) as f64
}

/// `1 - |Γ(a) ∩ Γ(b)| / |Γ(a) ∪ Γ(b)|`; two nodes without neighbors are at
/// distance 1.
pub fn jaccard_distance(g: &KnowledgeGraph, a: &NodeId, b: &NodeId) -> Result<f64, PathError> {
    if a.kind != b.kind {
        return Err(PathError::KindMismatch(a.clone(), b.clone()));
    }
    let na = g.neighbors(a).map_err(|_| PathError::UnknownNode(a.clone()))?;
    let nb = g.neighbors(b).map_err(|_| PathError::UnknownNode(b.clone()))?;
    Ok(jaccard(na, nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    SkillPair,
    OccupationPair,
}

impl From<NodeKind> for PairKind {
    fn from(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Skill => PairKind::SkillPair,
            NodeKind::Occupation => PairKind::OccupationPair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub a: NodeId,
    pub b: NodeId,
    pub distance: f64,
    pub kind: PairKind,
}

/// Summary of a distance sample. Quartiles use the nearest-rank method and
/// `std` is the sample standard deviation. An empty sample has count 0 and
/// all other fields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl DistributionStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return DistributionStats {
                count: 0,
                mean: 0.0,
                std: 0.0,
                min: 0.0,
                q25: 0.0,
                median: 0.0,
                q75: 0.0,
                max: 0.0,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        DistributionStats {
            count: n,
            mean,
            std,
            min: sorted[0],
            q25: rank(0.25),
            median: rank(0.5),
            q75: rank(0.75),
            max: sorted[n - 1],
        }
    }
}

/// Same-kind pairs `(a, b)` with `a < b` whose distance passes `keep`,
/// ordered by `(a, b)`.
fn pairwise<F>(g: &KnowledgeGraph, kind: NodeKind, keep: F) -> Vec<DistancePair>
where
    F: Fn(f64) -> bool + Sync,
{
    let nodes: Vec<&NodeId> = g.nodes_of_kind(kind).collect();
    let neighbors: Vec<&BTreeSet<NodeId>> = nodes
        .iter()
        .map(|n| g.neighbors(n).expect("node listed by graph"))
        .collect();
    (0..nodes.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (nodes, neighbors, keep) = (&nodes, &neighbors, &keep);
            (i + 1..nodes.len()).filter_map(move |j| {
                let distance = jaccard(neighbors[i], neighbors[j]);
                keep(distance).then(|| DistancePair {
                    a: nodes[i].clone(),
                    b: nodes[j].clone(),
                    distance,
                    kind: kind.into(),
                })
            })
        })
        .collect()
}

/// All same-kind pairs that share at least one neighbor, with summary
/// statistics of their distances.
pub fn distance_distribution(g: &KnowledgeGraph, kind: NodeKind) -> (DistributionStats, Vec<DistancePair>) {
    let pairs = pairwise(g, kind, |d| d < 1.0);
    let values: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    (DistributionStats::from_values(&values), pairs)
}

/// Occupations joined by an edge whenever their distance is strictly below
/// `max_distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    pub max_distance: f64,
    nodes: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TransitionGraph {
    pub fn build(g: &KnowledgeGraph, max_distance: f64) -> Result<Self, PathError> {
        let nodes: Vec<NodeId> = g.nodes_of_kind(NodeKind::Occupation).cloned().collect();
        let pairs = pairwise(g, NodeKind::Occupation, |d| d < max_distance);
        let edges: Vec<(NodeId, NodeId, f64)> = pairs.into_iter().map(|p| (p.a, p.b, p.distance)).collect();
        Self::from_distances(nodes, &edges, max_distance)
    }

    /// Builds from explicit pairwise distances; pairs at or above
    /// `max_distance` are dropped.
    pub fn from_distances(nodes: Vec<NodeId>, distances: &[(NodeId, NodeId, f64)], max_distance: f64) -> Result<Self, PathError> {
        let mut nodes = nodes;
        nodes.sort();
        nodes.dedup();
        let index: BTreeMap<NodeId, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (a, b, d) in distances {
            if !(0.0..=1.0).contains(d) {
                return Err(PathError::InvalidDistance(*d));
            }
            let ia = *index.get(a).ok_or_else(|| PathError::UnknownNode(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| PathError::UnknownNode(b.clone()))?;
            if ia != ib && *d < max_distance {
                adjacency[ia].push((ib, *d));
                adjacency[ib].push((ia, *d));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|(n, _)| *n);
            list.dedup_by_key(|(n, _)| *n);
        }
        Ok(TransitionGraph {
            max_distance,
            nodes,
            index,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn distance(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        let (ia, ib) = (*self.index.get(a)?, *self.index.get(b)?);
        self.adjacency[ia].iter().find(|(n, _)| *n == ib).map(|(_, d)| *d)
    }

    /// Edges as `(a, b, distance)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId, f64)> {
        self.adjacency.iter().enumerate().flat_map(move |(i, list)| {
            list.iter()
                .filter(move |(j, _)| *j > i)
                .map(move |(j, d)| (&self.nodes[i], &self.nodes[*j], *d))
        })
    }
}

pub fn build_transition_graph(g: &KnowledgeGraph, max_distance: f64) -> Result<TransitionGraph, PathError> {
    TransitionGraph::build(g, max_distance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CareerPath {
    pub nodes: Vec<NodeId>,
    pub step_distances: Vec<f64>,
    pub total_cost: f64,
}

/// Dijkstra label: cost, then hop count, then the node-key sequence.
#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    hops: usize,
    keys: Vec<String>,
    node: usize,
}

impl Label {
    fn cmp_label(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.hops.cmp(&other.hops))
            .then_with(|| self.keys.cmp(&other.keys))
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    // Reversed so the max-heap pops the smallest label.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cmp_label(self)
    }
}

/// Cheapest path by summed distance. Among equal costs the path with fewer
/// hops wins, then the lexicographically smaller key sequence. A query from
/// an occupation to itself yields that single node at cost 0.
pub fn shortest_transition(tg: &TransitionGraph, from: &NodeId, to: &NodeId) -> Result<CareerPath, PathError> {
    let src = *tg.index.get(from).ok_or_else(|| PathError::UnknownNode(from.clone()))?;
    let dst = *tg.index.get(to).ok_or_else(|| PathError::UnknownNode(to.clone()))?;
    let mut best: Vec<Option<Label>> = vec![None; tg.nodes.len()];
    let mut parent: Vec<Option<usize>> = vec![None; tg.nodes.len()];
    let mut done = vec![false; tg.nodes.len()];
    let start = Label {
        cost: 0.0,
        hops: 0,
        keys: vec![tg.nodes[src].key.clone()],
        node: src,
    };
    best[src] = Some(start.clone());
    let mut heap = BinaryHeap::from([start]);
    while let Some(label) = heap.pop() {
        let u = label.node;
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for &(v, d) in &tg.adjacency[u] {
            if done[v] {
                continue;
            }
            let mut keys = label.keys.clone();
            keys.push(tg.nodes[v].key.clone());
            let candidate = Label {
                cost: label.cost + d,
                hops: label.hops + 1,
                keys,
                node: v,
            };
            if best[v].as_ref().is_none_or(|b| candidate.cmp_label(b) == Ordering::Less) {
                best[v] = Some(candidate.clone());
                parent[v] = Some(u);
                heap.push(candidate);
            }
        }
    }
    let Some(end) = best[dst].as_ref().filter(|_| done[dst]) else {
        return Err(PathError::NoPath {
            from: from.clone(),
            to: to.clone(),
        });
    };
    let mut order = vec![dst];
    while let Some(p) = parent[*order.last().expect("non-empty")] {
        order.push(p);
    }
    order.reverse();
    let step_distances: Vec<f64> = order
        .windows(2)
        .map(|w| tg.adjacency[w[0]].iter().find(|(n, _)| *n == w[1]).expect("path edge").1)
        .collect();
    Ok(CareerPath {
        nodes: order.into_iter().map(|i| tg.nodes[i].clone()).collect(),
        step_distances,
        total_cost: end.cost,
    })
}

/// The `k` occupations closest to `occupation`, ascending by distance with
/// ties broken by key.
pub fn nearest_occupations(g: &KnowledgeGraph, occupation: &NodeId, k: usize) -> Result<Vec<(NodeId, f64)>, PathError> {
    if occupation.kind != NodeKind::Occupation {
        return Err(PathError::NotOccupation(occupation.clone()));
    }
    let own = g.neighbors(occupation).map_err(|_| PathError::UnknownNode(occupation.clone()))?;
    let mut ranked: Vec<(NodeId, f64)> = g
        .nodes_of_kind(NodeKind::Occupation)
        .filter(|o| *o != occupation)
        .map(|o| (o.clone(), jaccard(own, g.neighbors(o).expect("listed node"))))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}
