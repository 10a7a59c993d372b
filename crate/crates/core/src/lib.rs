//! Skills and occupations as a bipartite knowledge graph: taxonomy ingest,
//! fuzzy skill matching, enrichment from job postings, link prediction,
//! career-path search and skill relevance.

pub mod enrichment;
pub mod fixture;
pub mod graph;
pub mod linkpred;
pub mod matcher;
pub mod pathfinder;
pub mod relevance;
pub mod rng;
pub mod taxonomy;
