use super::{LinkPair, LinkPredError, LinkScorer};
use crate::graph::{KnowledgeGraph, NodeId};

/// Preferential attachment closeness `|Γ(u)| · |Γ(v)|`.
pub fn pa_score(g: &KnowledgeGraph, u: &NodeId, v: &NodeId) -> Result<u64, LinkPredError> {
    let du = g.degree(u).map_err(|_| LinkPredError::UnknownNode(u.clone()))?;
    let dv = g.degree(v).map_err(|_| LinkPredError::UnknownNode(v.clone()))?;
    Ok(du as u64 * dv as u64)
}

/// Closeness scores divided by their maximum over `pairs`. When every score
/// is zero all probabilities are zero.
pub fn pa_probability(g: &KnowledgeGraph, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
    if pairs.is_empty() {
        return Err(LinkPredError::EmptyPairs);
    }
    let raw = pairs
        .iter()
        .map(|p| pa_score(g, &p.occupation_id(), &p.skill_id()))
        .collect::<Result<Vec<u64>, _>>()?;
    let max = raw.iter().copied().max().unwrap_or(0);
    if max == 0 {
        log::warn!("all preferential attachment scores are zero");
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(raw.into_iter().map(|s| s as f64 / max as f64).collect())
}

/// Training-free scorer; degrees come from the wrapped graph.
#[derive(Debug, Clone, Copy)]
pub struct PreferentialAttachment<'g> {
    graph: &'g KnowledgeGraph,
}

impl<'g> PreferentialAttachment<'g> {
    pub fn new(graph: &'g KnowledgeGraph) -> Self {
        PreferentialAttachment { graph }
    }
}

impl LinkScorer for PreferentialAttachment<'_> {
    fn score_pairs(&self, pairs: &[LinkPair]) -> Result<Vec<f64>, LinkPredError> {
        pa_probability(self.graph, pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Provenance;
    use crate::linkpred::predict_link;
    use proptest::prelude::*;

    fn graph(edges: &[(u8, u8)]) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        for o in 0..6 {
            g.upsert_node(NodeId::occupation(format!("{o}")), "o");
        }
        for s in 0..8 {
            g.upsert_node(NodeId::skill(format!("{s}")), "s");
        }
        for (o, s) in edges {
            let (o, s) = (NodeId::occupation(format!("{o}")), NodeId::skill(format!("{s}")));
            if !g.has_edge(&o, &s) {
                g.add_edge(&o, &s, 1.0, Provenance::Taxonomy, 0).unwrap();
            }
        }
        g
    }

    #[test]
    fn degree_product() {
        let g = graph(&[(0, 0), (0, 1), (0, 2), (1, 3), (2, 3), (3, 3), (4, 3)]);
        assert_eq!(pa_score(&g, &NodeId::occupation("0"), &NodeId::skill("3")).unwrap(), 12);
        assert_eq!(pa_score(&g, &NodeId::occupation("5"), &NodeId::skill("3")).unwrap(), 0);
        assert!(matches!(
            pa_score(&g, &NodeId::occupation("9"), &NodeId::skill("3")),
            Err(LinkPredError::UnknownNode(_))
        ));
    }

    #[test]
    fn max_normalization() {
        // deg(o0)=4, deg(o1)=2, deg(o2)=1; skill 7 has degree 3: raw {12, 6, 3}.
        let g = graph(&[(0, 0), (0, 1), (0, 2), (0, 7), (1, 3), (1, 7), (2, 7)]);
        let pairs = [LinkPair::new("0", "7"), LinkPair::new("1", "7"), LinkPair::new("2", "7")];
        let probs = pa_probability(&g, &pairs).unwrap();
        assert_eq!(probs, [1.0, 0.5, 0.25]);
        let single = predict_link(&PreferentialAttachment::new(&g), &NodeId::skill("7"), &NodeId::occupation("2")).unwrap();
        assert_eq!(single, 1.0);
        assert!(matches!(pa_probability(&g, &[]), Err(LinkPredError::EmptyPairs)));
        let zeros = pa_probability(&g, &[LinkPair::new("5", "3"), LinkPair::new("4", "6")]).unwrap();
        assert_eq!(zeros, [0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn symmetric_and_monotone(edges in proptest::collection::vec((0u8..6, 0u8..8), 0..30), extra in (0u8..6, 0u8..8)) {
            let g = graph(&edges);
            let mut grown_edges = edges.clone();
            grown_edges.push(extra);
            let grown = graph(&grown_edges);
            for o in 0..6 {
                for s in 0..8 {
                    let (u, v) = (NodeId::occupation(format!("{o}")), NodeId::skill(format!("{s}")));
                    prop_assert_eq!(pa_score(&g, &u, &v).unwrap(), pa_score(&g, &v, &u).unwrap());
                    prop_assert!(pa_score(&grown, &u, &v).unwrap() >= pa_score(&g, &u, &v).unwrap());
                }
            }
        }
    }
}
