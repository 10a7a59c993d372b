//! The bipartite occupation-skill knowledge graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::TaxonomyBundle;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge {0} -- {1} would not connect an occupation to a skill")]
    NotBipartite(NodeId, NodeId),
    #[error("edge {0} -- {1} already exists")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("invalid edge weight {0}")]
    InvalidWeight(f64),
    #[error("taxonomy has no occupation-skill links")]
    EmptyTaxonomy,
    #[error("graph file format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Occupation,
    Skill,
}

impl NodeKind {
    pub fn other(self) -> NodeKind {
        match self {
            NodeKind::Occupation => NodeKind::Skill,
            NodeKind::Skill => NodeKind::Occupation,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Occupation => "occupation",
            NodeKind::Skill => "skill",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        match s {
            "occupation" => Some(NodeKind::Occupation),
            "skill" => Some(NodeKind::Skill),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Occupations are keyed by their level-4 ISCO digits, skills by skill id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub key: String,
}

impl NodeId {
    pub fn occupation(key: impl Into<String>) -> Self {
        NodeId {
            kind: NodeKind::Occupation,
            key: key.into(),
        }
    }

    pub fn skill(key: impl Into<String>) -> Self {
        NodeId {
            kind: NodeKind::Skill,
            key: key.into(),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Taxonomy,
    Posting,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub occupation: NodeId,
    pub skill: NodeId,
    pub weight: f64,
    pub provenance: Provenance,
    pub cooccurrence_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub skill_count: usize,
    pub occupation_count: usize,
    pub edge_count: usize,
    pub avg_degree: f64,
}

/// Undirected bipartite graph with a symmetric adjacency index.
///
/// Edges are keyed by `(occupation key, skill key)`; there are no self-loops
/// or parallel edges by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    labels: BTreeMap<NodeId, String>,
    edges: BTreeMap<(String, String), Edge>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a node; an existing node keeps its edges and gets the new label.
    pub fn upsert_node(&mut self, id: NodeId, label: impl Into<String>) {
        self.adjacency.entry(id.clone()).or_default();
        self.labels.insert(id, label.into());
    }

    pub fn add_node(&mut self, id: NodeId, label: impl Into<String>) -> Result<(), GraphError> {
        if self.labels.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        self.upsert_node(id, label);
        Ok(())
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.labels.contains_key(id)
    }

    pub fn label(&self, id: &NodeId) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    /// Adds an edge between an occupation and a skill (in either argument order).
    pub fn add_edge(
        &mut self,
        u: &NodeId,
        v: &NodeId,
        weight: f64,
        provenance: Provenance,
        cooccurrence_count: u64,
    ) -> Result<(), GraphError> {
        let (occupation, skill) = orient(u, v)?;
        for n in [occupation, skill] {
            if !self.contains(n) {
                return Err(GraphError::UnknownNode(n.clone()));
            }
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(GraphError::InvalidWeight(weight));
        }
        let key = (occupation.key.clone(), skill.key.clone());
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(occupation.clone(), skill.clone()));
        }
        self.adjacency
            .get_mut(occupation)
            .expect("node present")
            .insert(skill.clone());
        self.adjacency
            .get_mut(skill)
            .expect("node present")
            .insert(occupation.clone());
        self.edges.insert(
            key,
            Edge {
                occupation: occupation.clone(),
                skill: skill.clone(),
                weight,
                provenance,
                cooccurrence_count,
            },
        );
        Ok(())
    }

    pub fn edge(&self, u: &NodeId, v: &NodeId) -> Option<&Edge> {
        let (o, s) = orient(u, v).ok()?;
        self.edges.get(&(o.key.clone(), s.key.clone()))
    }

    pub(crate) fn edge_mut(&mut self, occupation: &str, skill: &str) -> Option<&mut Edge> {
        self.edges.get_mut(&(occupation.to_string(), skill.to_string()))
    }

    pub fn has_edge(&self, u: &NodeId, v: &NodeId) -> bool {
        self.edge(u, v).is_some()
    }

    /// Γ(u): the neighbor set of `u`.
    pub fn neighbors(&self, u: &NodeId) -> Result<&BTreeSet<NodeId>, GraphError> {
        self.adjacency
            .get(u)
            .ok_or_else(|| GraphError::UnknownNode(u.clone()))
    }

    pub fn degree(&self, u: &NodeId) -> Result<usize, GraphError> {
        self.neighbors(u).map(BTreeSet::len)
    }

    /// Edges in `(occupation key, skill key)` order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub(crate) fn edges_mut(&mut self) -> impl Iterator<Item = &mut Edge> {
        self.edges.values_mut()
    }

    /// Nodes in `(kind, key)` order.
    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &str)> {
        self.labels.iter().map(|(id, l)| (id, l.as_str()))
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &NodeId> {
        self.labels.keys().filter(move |id| id.kind == kind)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn stats(&self) -> GraphStats {
        let occupation_count = self.nodes_of_kind(NodeKind::Occupation).count();
        let node_count = self.node_count();
        let edge_count = self.edge_count();
        GraphStats {
            node_count,
            skill_count: node_count - occupation_count,
            occupation_count,
            edge_count,
            avg_degree: if node_count == 0 {
                0.0
            } else {
                2.0 * edge_count as f64 / node_count as f64
            },
        }
    }

    /// Same node set, restricted to the given edges.
    pub fn with_edges<'a, I>(&self, edges: I) -> Result<KnowledgeGraph, GraphError>
    where
        I: IntoIterator<Item = &'a Edge>,
    {
        let mut g = KnowledgeGraph::new();
        for (id, label) in self.nodes() {
            g.upsert_node(id.clone(), label);
        }
        for e in edges {
            g.add_edge(
                &e.occupation,
                &e.skill,
                e.weight,
                e.provenance,
                e.cooccurrence_count,
            )?;
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let doc = GraphDocument::from_graph(self);
        let mut text = serde_json::to_string_pretty(&doc).map_err(|source| GraphError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<KnowledgeGraph, GraphError> {
        let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json_err = |source| GraphError::Json {
            path: path.to_path_buf(),
            source,
        };
        let header: VersionProbe = serde_json::from_str(&text).map_err(json_err)?;
        if header.format_version != GRAPH_FORMAT_VERSION {
            return Err(GraphError::FormatVersionMismatch {
                found: header.format_version,
                expected: GRAPH_FORMAT_VERSION,
            });
        }
        let doc: GraphDocument = serde_json::from_str(&text).map_err(json_err)?;
        doc.into_graph()
    }
}

pub fn save_graph(g: &KnowledgeGraph, path: &Path) -> Result<(), GraphError> {
    g.save(path)
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, GraphError> {
    KnowledgeGraph::load(path)
}

fn orient<'a>(u: &'a NodeId, v: &'a NodeId) -> Result<(&'a NodeId, &'a NodeId), GraphError> {
    match (u.kind, v.kind) {
        (NodeKind::Occupation, NodeKind::Skill) => Ok((u, v)),
        (NodeKind::Skill, NodeKind::Occupation) => Ok((v, u)),
        _ => Err(GraphError::NotBipartite(u.clone(), v.clone())),
    }
}

/// Aggregates ESCO occupations to their level-4 ISCO group and links each
/// group to the union of its occupations' skills.
pub fn build_base_graph(bundle: &TaxonomyBundle) -> Result<KnowledgeGraph, GraphError> {
    if bundle.occupation_skill_links.is_empty() {
        return Err(GraphError::EmptyTaxonomy);
    }
    let mut g = KnowledgeGraph::new();
    for code in bundle.level4_codes() {
        let label = bundle.isco_label(&code);
        g.upsert_node(NodeId::occupation(code.digits()), label);
    }
    for (esco_id, skill_id) in &bundle.occupation_skill_links {
        let occ = &bundle.esco_occupations[esco_id];
        let skill = &bundle.skills[skill_id];
        let o = NodeId::occupation(occ.isco_code.digits());
        let s = NodeId::skill(skill_id.clone());
        if !g.contains(&s) {
            g.upsert_node(s.clone(), skill.label.clone());
        }
        if !g.has_edge(&o, &s) {
            g.add_edge(&o, &s, 1.0, Provenance::Taxonomy, 0)?;
        }
    }
    Ok(g)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    kind: NodeKind,
    key: String,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    occupation: String,
    skill: String,
    weight: f64,
    provenance: Provenance,
    cooccurrence_count: u64,
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    format_version: u32,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl GraphDocument {
    fn from_graph(g: &KnowledgeGraph) -> Self {
        let mut nodes: Vec<NodeRecord> = g
            .nodes()
            .map(|(id, label)| NodeRecord {
                kind: id.kind,
                key: id.key.clone(),
                label: label.to_string(),
            })
            .collect();
        nodes.sort_by(|a, b| a.key.cmp(&b.key).then(a.kind.cmp(&b.kind)));
        let edges = g
            .edges()
            .map(|e| EdgeRecord {
                occupation: e.occupation.key.clone(),
                skill: e.skill.key.clone(),
                weight: e.weight,
                provenance: e.provenance,
                cooccurrence_count: e.cooccurrence_count,
            })
            .collect();
        GraphDocument {
            format_version: GRAPH_FORMAT_VERSION,
            nodes,
            edges,
        }
    }

    fn into_graph(self) -> Result<KnowledgeGraph, GraphError> {
        let mut g = KnowledgeGraph::new();
        for n in self.nodes {
            g.add_node(NodeId { kind: n.kind, key: n.key }, n.label)?;
        }
        for e in self.edges {
            g.add_edge(
                &NodeId::occupation(e.occupation),
                &NodeId::skill(e.skill),
                e.weight,
                e.provenance,
                e.cooccurrence_count,
            )?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{EscoOccupationRecord, IscoCode, SkillRecord};
    use proptest::prelude::*;

    fn bundle(links: &[(&str, &str, &str)]) -> TaxonomyBundle {
        // (esco_id, isco_code, skill_id)
        let mut b = TaxonomyBundle::default();
        for (esco, isco, skill) in links {
            let code = IscoCode::parse(isco).unwrap();
            b.isco_groups.insert(code.clone(), format!("label {isco}"));
            b.esco_occupations.insert(
                esco.to_string(),
                EscoOccupationRecord {
                    esco_id: esco.to_string(),
                    label: esco.to_string(),
                    isco_code: code,
                },
            );
            b.skills.insert(
                skill.to_string(),
                SkillRecord {
                    skill_id: skill.to_string(),
                    label: format!("skill {skill}"),
                },
            );
            b.occupation_skill_links
                .insert((esco.to_string(), skill.to_string()));
        }
        b
    }

    #[test]
    fn aggregates_esco_occupations_by_isco_group() {
        let b = bundle(&[
            ("e1", "6121", "a"),
            ("e1", "6121", "b"),
            ("e2", "6121", "b"),
            ("e2", "6121", "c"),
        ]);
        let g = build_base_graph(&b).unwrap();
        let occ = NodeId::occupation("6121");
        let keys: Vec<&str> = g.neighbors(&occ).unwrap().iter().map(|n| n.key.as_str()).collect();
        assert_eq!(keys, ["a", "b", "c"]);
        assert_eq!(g.edge_count(), 3);
        for e in g.edges() {
            assert_eq!(e.weight, 1.0);
            assert_eq!(e.provenance, Provenance::Taxonomy);
        }
    }

    #[test]
    fn empty_taxonomy_rejected() {
        let mut b = bundle(&[("e1", "6121", "a")]);
        b.occupation_skill_links.clear();
        assert!(matches!(build_base_graph(&b), Err(GraphError::EmptyTaxonomy)));
    }

    #[test]
    fn rebuild_is_identical() {
        let b = bundle(&[("e1", "6121", "a"), ("e2", "2132", "a"), ("e3", "2132", "z")]);
        assert_eq!(build_base_graph(&b).unwrap(), build_base_graph(&b).unwrap());
    }

    #[test]
    fn neighbors_and_isolated_nodes() {
        let mut g = KnowledgeGraph::new();
        let o = NodeId::occupation("1111");
        g.add_node(o.clone(), "o").unwrap();
        for s in ["a", "b", "c"] {
            g.add_node(NodeId::skill(s), s).unwrap();
            g.add_edge(&o, &NodeId::skill(s), 1.0, Provenance::Taxonomy, 0).unwrap();
        }
        let lonely = NodeId::occupation("2222");
        g.add_node(lonely.clone(), "lonely").unwrap();
        assert_eq!(g.neighbors(&o).unwrap().len(), 3);
        assert!(g.neighbors(&lonely).unwrap().is_empty());
        assert!(g.neighbors(&o).unwrap().iter().all(|n| n.kind == NodeKind::Skill));
        assert!(matches!(
            g.neighbors(&NodeId::skill("nope")),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn rejects_same_kind_and_parallel_edges() {
        let mut g = KnowledgeGraph::new();
        let (o1, o2, s) = (NodeId::occupation("1"), NodeId::occupation("2"), NodeId::skill("s"));
        for n in [&o1, &o2, &s] {
            g.add_node(n.clone(), "x").unwrap();
        }
        assert!(matches!(
            g.add_edge(&o1, &o2, 1.0, Provenance::Taxonomy, 0),
            Err(GraphError::NotBipartite(..))
        ));
        g.add_edge(&s, &o1, 1.0, Provenance::Taxonomy, 0).unwrap();
        assert!(matches!(
            g.add_edge(&o1, &s, 1.0, Provenance::Taxonomy, 0),
            Err(GraphError::DuplicateEdge(..))
        ));
    }

    #[test]
    fn paper_scale_average_degree() {
        let stats = GraphStats {
            node_count: 1220,
            skill_count: 983,
            occupation_count: 237,
            edge_count: 3910,
            avg_degree: 2.0 * 3910.0 / 1220.0,
        };
        assert_eq!(format!("{:.1}", stats.avg_degree), "6.4");
        assert!((stats.avg_degree - 6.41).abs() < 0.005);
    }

    #[test]
    fn empty_graph_stats() {
        let s = KnowledgeGraph::new().stats();
        assert_eq!((s.node_count, s.edge_count, s.avg_degree), (0, 0, 0.0));
    }

    #[test]
    fn save_load_round_trip() {
        let b = bundle(&[("e1", "6121", "a"), ("e2", "2132", "a"), ("e3", "2132", "z")]);
        let mut g = build_base_graph(&b).unwrap();
        g.edge_mut("2132", "z").unwrap().weight = 0.123456789;
        g.edge_mut("2132", "a").unwrap().weight = 0.1 + 0.2;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        g.save(&path).unwrap();
        let back = KnowledgeGraph::load(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(
            back.edge(&NodeId::occupation("2132"), &NodeId::skill("z")).unwrap().weight.to_bits(),
            0.123456789f64.to_bits()
        );
        assert_eq!(
            back.edge(&NodeId::occupation("2132"), &NodeId::skill("a")).unwrap().weight.to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
    }

    #[test]
    fn unknown_format_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        fs::write(&path, r#"{"format_version": 7, "nodes": [], "edges": []}"#).unwrap();
        assert!(matches!(
            KnowledgeGraph::load(&path),
            Err(GraphError::FormatVersionMismatch { found: 7, expected: 1 })
        ));
    }

    proptest! {
        #[test]
        fn degree_sum_and_symmetry(pairs in proptest::collection::vec((0u8..8, 0u8..12), 0..60)) {
            let mut g = KnowledgeGraph::new();
            for o in 0..8 { g.add_node(NodeId::occupation(format!("{o}")), "o").unwrap(); }
            for s in 0..12 { g.add_node(NodeId::skill(format!("s{s}")), "s").unwrap(); }
            for (o, s) in pairs {
                let (o, s) = (NodeId::occupation(format!("{o}")), NodeId::skill(format!("s{s}")));
                if !g.has_edge(&o, &s) {
                    g.add_edge(&o, &s, 1.0, Provenance::Taxonomy, 0).unwrap();
                }
            }
            let degree_sum: usize = g.nodes().map(|(id, _)| g.degree(id).unwrap()).sum();
            prop_assert_eq!(degree_sum, 2 * g.edge_count());
            for (u, _) in g.nodes() {
                for v in g.neighbors(u).unwrap() {
                    prop_assert!(g.neighbors(v).unwrap().contains(u));
                    prop_assert_ne!(u.kind, v.kind);
                }
            }
        }
    }
}
