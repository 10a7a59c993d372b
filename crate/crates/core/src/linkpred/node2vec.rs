//! Node2Vec: second-order biased random walks over edge weights, followed by
//! skip-gram training with negative sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{sigmoid, train_edge_classifier, ClassifierConfig, EdgeClassifier, LabeledFeatures};
use super::{EdgeSplit, LinkPair, LinkPredError, LinkScorer};
use crate::graph::{KnowledgeGraph, NodeId, NodeKind};
use crate::rng;

const EMBEDDINGS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node2VecParams {
    pub dimensions: usize,
    /// Nodes per walk, including the start node.
    pub walk_length: usize,
    pub num_walks_per_node: usize,
    /// Total walk budget spread round-robin over nodes; overrides
    /// `num_walks_per_node` when set.
    pub total_walks: Option<usize>,
    pub p: f64,
    pub q: f64,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Node2VecParams {
    fn default() -> Self {
        Node2VecParams {
            dimensions: 64,
            walk_length: 4,
            num_walks_per_node: 10,
            total_walks: None,
            p: 1.0,
            q: 1.0,
            window: 2,
            epochs: 5,
            negative_samples: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl Node2VecParams {
    /// The published configuration: 1024 dimensions, walks of length 4,
    /// 2500 walks in total, p = q = 1.
    pub fn published() -> Self {
        Node2VecParams {
            dimensions: 1024,
            total_walks: Some(2500),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinkPredError> {
        let bad = |what: &str| Err(LinkPredError::InvalidParams(what.to_string()));
        if self.dimensions == 0 {
            return bad("dimensions must be positive");
        }
        if self.walk_length == 0 {
            return bad("walk_length must be positive");
        }
        if self.total_walks.unwrap_or(self.num_walks_per_node) == 0 {
            return bad("walk budget must be positive");
        }
        if !(self.p > 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite()) {
            return bad("p and q must be positive");
        }
        if self.window == 0 || self.epochs == 0 || self.negative_samples == 0 {
            return bad("window, epochs and negative_samples must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    fn total_walk_count(&self, nodes: usize) -> usize {
        self.total_walks.unwrap_or(self.num_walks_per_node * nodes)
    }
}

/// Number of walks each node starts when `total` walks are dealt round-robin
/// over `nodes` nodes.
pub fn walks_per_node(total: usize, nodes: usize) -> Vec<usize> {
    (0..nodes)
        .map(|i| total / nodes + usize::from(i < total % nodes))
        .collect()
}

/// Indexed, weighted adjacency for walking. Nodes are numbered in the
/// graph's `(kind, key)` order; neighbor lists are sorted by index.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WalkGraph {
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        let ids: Vec<NodeId> = g.nodes().map(|(id, _)| id.clone()).collect();
        let index: HashMap<NodeId, usize> = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        let mut adjacency = vec![Vec::new(); ids.len()];
        for e in g.edges() {
            let (o, s) = (index[&e.occupation], index[&e.skill]);
            adjacency[o].push((s, e.weight));
            adjacency[s].push((o, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by_key(|(n, _)| *n);
        }
        WalkGraph { ids, index, adjacency }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &NodeId {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search_by_key(&b, |(n, _)| *n).is_ok()
    }

    /// Unnormalized transition weights out of `current` given the previous
    /// node: edge weight scaled by 1/p for returning, 1 for neighbors of the
    /// previous node, 1/q otherwise.
    pub fn transition_weights(&self, previous: Option<usize>, current: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
        self.adjacency[current]
            .iter()
            .map(|&(next, w)| {
                let bias = match previous {
                    None => 1.0,
                    Some(prev) if prev == next => 1.0 / p,
                    Some(prev) if self.is_adjacent(prev, next) => 1.0,
                    Some(_) => 1.0 / q,
                };
                (next, w * bias)
            })
            .collect()
    }

    pub fn step<R: Rng>(&self, previous: Option<usize>, current: usize, p: f64, q: f64, rng: &mut R) -> Option<usize> {
        let weights = self.transition_weights(previous, current, p, q);
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if weights.is_empty() || total <= 0.0 {
            return None;
        }
        let mut target = rng.gen::<f64>() * total;
        for &(next, w) in &weights {
            if target < w {
                return Some(next);
            }
            target -= w;
        }
        weights.iter().rev().find(|(_, w)| *w > 0.0).map(|(n, _)| *n)
    }

    pub fn walk<R: Rng>(&self, start: usize, length: usize, p: f64, q: f64, rng: &mut R) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        while walk.len() < length {
            let current = walk[walk.len() - 1];
            let previous = walk.len().checked_sub(2).map(|i| walk[i]);
            match self.step(previous, current, p, q, rng) {
                Some(next) => walk.push(next),
                None => break,
            }
        }
        walk
    }
}

/// All walks, in round-robin order over nodes. Walk `w` starts at node
/// `w % n` and draws from its own seeded stream, so the result does not
/// depend on the thread count.
pub fn generate_walks(wg: &WalkGraph, params: &Node2VecParams) -> Vec<Vec<usize>> {
    let n = wg.len();
    if n == 0 {
        return Vec::new();
    }
    let total = params.total_walk_count(n);
    (0..total)
        .into_par_iter()
        .map(|w| {
            let mut rng = rng::stream_rng(params.seed, w as u64);
            wg.walk(w % n, params.walk_length, params.p, params.q, &mut rng)
        })
        .collect()
}

/// Gradient of the negative-sampling loss for one (center, context) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Loss `-log σ(c·o) - Σ log σ(-c·n_k)` and its gradient with respect to the
/// center input vector, the context output vector and each negative output
/// vector.
pub fn sgns_loss_and_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, SgnsGradient) {
    let pos = dot(center, context);
    let mut loss = -log_sigmoid(pos);
    // d/dx of -log σ(x) is σ(x) - 1.
    let g_pos = sigmoid(pos) - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|c| g_pos * c).collect();
    let grad_context: Vec<f64> = center.iter().map(|c| g_pos * c).collect();
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        loss -= log_sigmoid(-s);
        let g_neg = sigmoid(s);
        for (gc, n) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g_neg * n;
        }
        grad_negs.push(center.iter().map(|c| g_neg * c).collect());
    }
    (
        loss,
        SgnsGradient {
            center: grad_center,
            context: grad_context,
            negatives: grad_negs,
        },
    )
}

/// Dense vectors per node. Nodes without edges keep their random
/// initialization and are listed in `untrained`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub dimensions: usize,
    pub vectors: BTreeMap<NodeId, Vec<f64>>,
    pub untrained: BTreeSet<NodeId>,
}

impl NodeEmbeddings {
    pub fn get(&self, id: &NodeId) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn cosine(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        let (x, y) = (self.get(a)?, self.get(b)?);
        let denom = dot(x, x).sqrt() * dot(y, y).sqrt();
        (denom > 0.0).then(|| dot(x, y) / denom)
    }

    /// Text format: a `# embeddings format_version=1 dimensions=D` comment,
    /// a header row, then `node_kind,node_key,v0,...` per node.
    pub fn save(&self, path: &Path) -> Result<(), LinkPredError> {
        let io_err = |source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(
            out,
            "# embeddings format_version={EMBEDDINGS_FORMAT_VERSION} dimensions={}",
            self.dimensions
        )
        .map_err(io_err)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let csv_err = |e: csv::Error| LinkPredError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            };
            let mut header = vec!["node_kind".to_string(), "node_key".to_string()];
            header.extend((0..self.dimensions).map(|i| format!("v{i}")));
            w.write_record(&header).map_err(csv_err)?;
            for (id, v) in &self.vectors {
                let mut row = vec![id.kind.as_str().to_string(), id.key.clone()];
                row.extend(v.iter().map(|x| x.to_string()));
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<NodeEmbeddings, LinkPredError> {
        let format_err = |message: String| LinkPredError::Format {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|source| LinkPredError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let (first, rest) = text.split_once('\n').ok_or_else(|| format_err("empty file".into()))?;
        let version = first
            .split_whitespace()
            .find_map(|t| t.strip_prefix("format_version="))
            .and_then(|v| v.parse::<u32>().ok());
        if version != Some(EMBEDDINGS_FORMAT_VERSION) {
            return Err(format_err(format!("unsupported embeddings header {first:?}")));
        }
        let mut reader = csv::Reader::from_reader(rest.as_bytes());
        let dimensions = reader
            .headers()
            .map_err(|e| format_err(e.to_string()))?
            .len()
            .checked_sub(2)
            .ok_or_else(|| format_err("header too short".into()))?;
        let mut vectors = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| format_err(e.to_string()))?;
            let kind = NodeKind::parse(&record[0]).ok_or_else(|| format_err(format!("bad node kind {:?}", &record[0])))?;
            let v = record
                .iter()
                .skip(2)
                .map(|x| x.parse::<f64>().map_err(|e| format_err(e.to_string())))
                .collect::<Result<Vec<f64>, _>>()?;
            if v.len() != dimensions {
                return Err(format_err(format!("row for {} has {} values", &record[1], v.len())));
            }
            vectors.insert(
                NodeId {
                    kind,
                    key: record[1].to_string(),
                },
                v,
            );
        }
        Ok(NodeEmbeddings {
            dimensions,
            vectors,
            untrained: BTreeSet::new(),
        })
    }
}

/// Trains Node2Vec embeddings. Fully deterministic for a given seed: walks use
/// per-walk seeded streams and SGD runs single-threaded in a seeded order.
pub fn train_node2vec(g: &KnowledgeGraph, params: &Node2VecParams) -> Result<NodeEmbeddings, LinkPredError> {
    params.validate()?;
    if g.node_count() == 0 {
        return Err(LinkPredError::EmptyGraph);
    }
    let wg = WalkGraph::from_graph(g);
    let n = wg.len();
    let d = params.dimensions;
    let walks = generate_walks(&wg, params);

    let mut rng = rng::stream_rng(params.seed, u64::MAX);
    let mut input: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect())
        .collect();
    let mut output = vec![vec![0.0; d]; n];

    let mut freq = vec![0.0f64; n];
    for walk in &walks {
        for &v in walk {
            freq[v] += 1.0;
        }
    }
    let noise_weights: Vec<f64> = freq.iter().map(|f| f.powf(0.75)).collect();
    let untrained: BTreeSet<NodeId> = (0..n)
        .filter(|&i| wg.adjacency[i].is_empty())
        .map(|i| wg.id(i).clone())
        .collect();
    if !untrained.is_empty() {
        log::warn!("{} isolated nodes keep random embeddings", untrained.len());
    }

    if let Ok(noise) = WeightedIndex::new(&noise_weights) {
        let positions: usize = walks.iter().map(Vec::len).sum();
        let total_steps = (positions * params.epochs).max(1) as f64;
        let mut done = 0usize;
        let mut order: Vec<usize> = (0..walks.len()).collect();
        let mut negs = vec![0usize; params.negative_samples];
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &wi in &order {
                let walk = &walks[wi];
                for (i, &center) in walk.iter().enumerate() {
                    let lr = params.learning_rate * (1.0 - done as f64 / total_steps).max(1e-4);
                    done += 1;
                    let lo = i.saturating_sub(params.window);
                    let hi = (i + params.window).min(walk.len() - 1);
                    for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        for slot in negs.iter_mut() {
                            *slot = noise.sample(&mut rng);
                        }
                        let kept: Vec<usize> = negs.iter().copied().filter(|&k| k != context).collect();
                        let neg_vecs: Vec<&[f64]> = kept.iter().map(|&k| output[k].as_slice()).collect();
                        let (_, grad) = sgns_loss_and_grad(&input[center], &output[context], &neg_vecs);
                        for (x, g) in input[center].iter_mut().zip(&grad.center) {
                            *x -= lr * g;
                        }
                        for (x, g) in output[context].iter_mut().zip(&grad.context) {
                            *x -= lr * g;
                        }
                        for (&k, gk) in kept.iter().zip(&grad.negatives) {
                            for (x, g) in output[k].iter_mut().zip(gk) {
                                *x -= lr * g;
                            }
                        }
                    }
                }
            }
        }
    }

    let vectors = (0..n).map(|i| (wg.id(i).clone(), std::mem::take(&mut input[i]))).collect();
    Ok(NodeEmbeddings {
        dimensions: d,
        vectors,
        untrained,
    })
}

/// Hadamard product of the two node vectors.
pub fn edge_features(emb: &NodeEmbeddings, u: &NodeId, v: &NodeId) -> Result<Vec<f64>, LinkPredError> {
    let a = emb.get(u).ok_or_else(|| LinkPredError::UnknownNode(u.clone()))?;
    let b = emb.get(v).ok_or_else(|| LinkPredError::UnknownNode(v.clone()))?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

fn pair_features(emb: &NodeEmbeddings, pairs: &[LinkPair]) -> Result<Vec<Vec<f64>>, LinkPredError> {
    pairs
        .iter()
        .map(|p| edge_features(emb, &p.occupation_id(), &p.skill_id()))
        .collect()
}

fn labeled(emb: &NodeEmbeddings, pos: &[LinkPair], neg: &[LinkPair]) -> Result<LabeledFeatures, LinkPredError> {
    let mut features = pair_features(emb, pos)?;
    features.extend(pair_features(emb, neg)?);
    let labels = std::iter::repeat_n(true, pos.len())
        .chain(std::iter::repeat_n(false, neg.len()))
        .collect();
    Ok(LabeledFeatures { features, labels })
}

/// Node embeddings plus a logistic head over Hadamard edge features.
#[derive(Debug, Clone, PartialEq)]
pub struct Node2VecScorer {
    pub embeddings: NodeEmbeddings,
    pub classifier: EdgeClassifier,
}

impl LinkScorer for Node2VecScorer {
    fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
        pairs
            .iter()
            .map(|p| {
                let x = edge_features(&self.embeddings, &p.occupation_id(), &p.skill_id())?;
                Ok(sigmoid(self.classifier.logit(&x)))
            })
            .collect()
    }
}

/// Embeds the training graph (all nodes, training positives only) and fits
/// the edge classifier on the training pairs, early-stopping on validation.
pub fn train_node2vec_scorer(
    g: &KnowledgeGraph,
    split: &EdgeSplit,
    params: &Node2VecParams,
    classifier: &ClassifierConfig,
) -> Result<Node2VecScorer, LinkPredError> {
    let train_edges: Vec<_> = split
        .train_pos
        .iter()
        .map(|p| {
            g.edge(&p.occupation_id(), &p.skill_id())
                .cloned()
                .ok_or_else(|| LinkPredError::UnknownNode(p.skill_id()))
        })
        .collect::<Result<_, _>>()?;
    let train_graph = g.with_edges(&train_edges)?;
    let embeddings = train_node2vec(&train_graph, params)?;
    let train = labeled(&embeddings, &split.train_pos, &split.train_neg)?;
    let val = labeled(&embeddings, &split.val_pos, &split.val_neg)?;
    let val = (!val.features.is_empty()).then_some(val);
    let classifier = train_edge_classifier(&train, val.as_ref(), classifier)?;
    Ok(Node2VecScorer { embeddings, classifier })
}
