//! Link prediction between occupations and skills: edge splits with negative
//! sampling, preferential attachment, Node2Vec embeddings with a logistic edge
//! classifier, and evaluation.

mod classifier;
mod eval;
mod node2vec;
mod pa;
mod split;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeKind};

pub use classifier::{
    logistic_loss_and_grad, sigmoid, train_edge_classifier, ClassifierConfig, EdgeClassifier,
    LabeledFeatures,
};
pub use eval::{
    evaluate, rank_candidate_skills, ratio_sweep, sweep_negatives, write_sweep_csv, Candidate,
    ClassMetrics, Confusion, LinkMetrics, SweepPoint,
};
pub use node2vec::{
    edge_features, generate_walks, sgns_loss_and_grad, train_node2vec, train_node2vec_scorer,
    walks_per_node, Node2VecParams, Node2VecScorer, NodeEmbeddings, SgnsGradient, WalkGraph,
};
pub use pa::{pa_probability, pa_score, PreferentialAttachment};
pub use split::{largest_remainder, sample_non_edges, split_edges, EdgeSplit, SplitConfig};

/// Probabilities strictly above this value are positive predictions.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LinkPredError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("pair {0} -- {1} is not an occupation-skill pair")]
    NotBipartite(NodeId, NodeId),
    #[error("graph has {0} edges; at least 10 are needed to split")]
    TooFewEdges(usize),
    #[error("need {needed} negative pairs but only {available} bipartite non-edges are available")]
    InsufficientNegatives { needed: usize, available: usize },
    #[error("invalid split ratios {0:?}")]
    InvalidRatios(Vec<f64>),
    #[error("no pairs to score")]
    EmptyPairs,
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// An (occupation, skill) pair, the unit of link prediction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkPair {
    pub occupation: String,
    pub skill: String,
}

impl LinkPair {
    pub fn new(occupation: impl Into<String>, skill: impl Into<String>) -> Self {
        LinkPair {
            occupation: occupation.into(),
            skill: skill.into(),
        }
    }

    /// Orders two node ids into an occupation-skill pair.
    pub fn from_nodes(u: &NodeId, v: &NodeId) -> Result<Self, LinkPredError> {
        match (u.kind, v.kind) {
            (NodeKind::Occupation, NodeKind::Skill) => Ok(LinkPair::new(&u.key, &v.key)),
            (NodeKind::Skill, NodeKind::Occupation) => Ok(LinkPair::new(&v.key, &u.key)),
            _ => Err(LinkPredError::NotBipartite(u.clone(), v.clone())),
        }
    }

    pub fn occupation_id(&self) -> NodeId {
        NodeId::occupation(&self.occupation)
    }

    pub fn skill_id(&self) -> NodeId {
        NodeId::skill(&self.skill)
    }
}

impl fmt::Display for LinkPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.occupation, self.skill)
    }
}

/// Anything that turns a batch of candidate pairs into link probabilities.
///
/// Scoring is batch-wise because some scorers (preferential attachment)
/// normalize over the evaluated pair set.
pub trait LinkScorer {
    fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError>;
}

impl<T: LinkScorer + ?Sized> LinkScorer for &T {
    fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
        (**self).score_pairs(pairs)
    }
}

pub fn is_positive(probability: f64) -> bool {
    probability > DECISION_THRESHOLD
}

/// Probability of a single link. A preferential attachment scorer normalizes
/// a lone pair by itself, so any pair with a non-zero score gets 1.0.
pub fn predict_link<S: LinkScorer + ?Sized>(
    scorer: &S,
    u: &NodeId,
    v: &NodeId,
) -> Result<f64, LinkPredError> {
    let pair = LinkPair::from_nodes(u, v)?;
    Ok(scorer.score_pairs(std::slice::from_ref(&pair))?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64);
    impl LinkScorer for Fixed {
        fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
            Ok(vec![self.0; pairs.len()])
        }
    }

    #[test]
    fn boundary_is_negative() {
        assert!(!is_positive(0.5));
        assert!(is_positive(0.5 + f64::EPSILON));
        let p = predict_link(&Fixed(0.5), &NodeId::skill("s"), &NodeId::occupation("1")).unwrap();
        assert!(!is_positive(p));
    }

    #[test]
    fn same_kind_pair_rejected() {
        assert!(matches!(
            predict_link(&Fixed(0.9), &NodeId::skill("a"), &NodeId::skill("b")),
            Err(LinkPredError::NotBipartite(..))
        ));
    }

    #[test]
    fn logit_probability_duality_keeps_decisions() {
        // Any strictly monotone map that fixes 0.5 leaves decisions unchanged.
        for i in 0..=200 {
            let p = i as f64 / 200.0;
            let logit = (p / (1.0 - p)).ln();
            let back = sigmoid(logit);
            assert_eq!(is_positive(p), logit > 0.0, "p={p}");
            assert_eq!(is_positive(p), is_positive(back), "p={p}");
            let cubed = 0.5 + 4.0 * (p - 0.5).powi(3);
            assert_eq!(is_positive(p), is_positive(cubed));
        }
    }
}
