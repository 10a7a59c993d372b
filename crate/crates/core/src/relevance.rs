//! TF-IDF relevance of skills to ISCO groups, where each group's postings
//! form one document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrichment::{match_postings, MatchedPosting, PostingDataset};
use crate::matcher::SkillMatcher;

#[derive(Debug, Error, PartialEq)]
pub enum RelevanceError {
    #[error("aggregation level must be 1-4, got {0}")]
    InvalidLevel(u8),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("no matched skills in the posting dataset")]
    EmptyDataset,
    #[error("expected corpora for levels 1-4 in order")]
    MissingLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceCorpus {
    pub level: u8,
    /// Group code to per-skill mention counts; every count is at least 1.
    pub documents: BTreeMap<String, BTreeMap<String, u64>>,
    pub n: usize,
    pub df: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub group_code: String,
    pub skill_id: String,
    pub tf: f64,
    pub idf: f64,
    pub score: f64,
}

/// Groups matched mentions by ISCO code truncated to `level`. Postings whose
/// code is shorter than `level` are left out.
pub fn corpus_from_matches(matched: &[MatchedPosting], level: u8) -> Result<RelevanceCorpus, RelevanceError> {
    if !(1..=4).contains(&level) {
        return Err(RelevanceError::InvalidLevel(level));
    }
    let mut documents: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for m in matched {
        let Some(group) = m.isco_code.truncate(level) else {
            continue;
        };
        if m.skill_ids.is_empty() {
            continue;
        }
        let doc = documents.entry(group.digits().to_string()).or_default();
        for skill in &m.skill_ids {
            *doc.entry(skill.clone()).or_default() += 1;
        }
    }
    if documents.is_empty() {
        return Err(RelevanceError::EmptyDataset);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in documents.values() {
        for skill in doc.keys() {
            *df.entry(skill.clone()).or_default() += 1;
        }
    }
    Ok(RelevanceCorpus {
        level,
        n: documents.len(),
        documents,
        df,
    })
}

/// Matches every posting's mentions (confidence at or above
/// `min_confidence`) and builds the corpus at `level`.
pub fn build_corpus(
    postings: &PostingDataset,
    matcher: &SkillMatcher,
    min_confidence: f64,
    level: u8,
) -> Result<RelevanceCorpus, RelevanceError> {
    if !(1..=4).contains(&level) {
        return Err(RelevanceError::InvalidLevel(level));
    }
    corpus_from_matches(&match_postings(&postings.records, matcher, min_confidence), level)
}

/// Corpora for levels 1 to 4 from a single matching pass.
pub fn build_all_levels(
    postings: &PostingDataset,
    matcher: &SkillMatcher,
    min_confidence: f64,
) -> Result<Vec<RelevanceCorpus>, RelevanceError> {
    let matched = match_postings(&postings.records, matcher, min_confidence);
    (1..=4).map(|level| corpus_from_matches(&matched, level)).collect()
}

impl RelevanceCorpus {
    /// `ln(N / (df + 1))`; negative for skills present in every document.
    pub fn idf(&self, skill: &str) -> f64 {
        let df = self.df.get(skill).copied().unwrap_or(0);
        (self.n as f64 / (df + 1) as f64).ln()
    }

    fn document(&self, group: &str) -> Result<&BTreeMap<String, u64>, RelevanceError> {
        self.documents
            .get(group)
            .ok_or_else(|| RelevanceError::UnknownGroup(group.to_string()))
    }
}

pub fn tfidf(corpus: &RelevanceCorpus, skill: &str, group: &str) -> Result<RelevanceScore, RelevanceError> {
    let doc = corpus.document(group)?;
    let total: u64 = doc.values().sum();
    let count = doc.get(skill).copied().unwrap_or(0);
    let tf = count as f64 / total as f64;
    let idf = corpus.idf(skill);
    Ok(RelevanceScore {
        group_code: group.to_string(),
        skill_id: skill.to_string(),
        tf,
        idf,
        score: if count == 0 { 0.0 } else { tf * idf },
    })
}

/// The `k` highest-scoring skills of `group`, ties by skill id.
pub fn top_k_skills(corpus: &RelevanceCorpus, group: &str, k: usize) -> Result<Vec<RelevanceScore>, RelevanceError> {
    let doc = corpus.document(group)?;
    let mut scores = doc
        .keys()
        .map(|skill| tfidf(corpus, skill, group))
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.skill_id.cmp(&b.skill_id)));
    scores.truncate(k);
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceNode {
    pub group: String,
    pub level: u8,
    pub top_skills: Vec<RelevanceScore>,
    pub children: Vec<RelevanceNode>,
}

fn subtree(corpora: &[RelevanceCorpus], group: &str, k: usize) -> Result<RelevanceNode, RelevanceError> {
    let level = group.len() as u8;
    let corpus = &corpora[level as usize - 1];
    let top_skills = top_k_skills(corpus, group, k)?;
    let children = match corpora.get(level as usize) {
        Some(next) => next
            .documents
            .keys()
            .filter(|code| code.starts_with(group))
            .map(|code| subtree(corpora, code, k))
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    Ok(RelevanceNode {
        group: group.to_string(),
        level,
        top_skills,
        children,
    })
}

/// Top-`k` skills for `major_group` and each of its descendant groups that
/// occur in the data, nested by level and ordered by code. `corpora` holds
/// levels 1 to 4 in order.
pub fn relevance_tree(corpora: &[RelevanceCorpus], major_group: &str, k: usize) -> Result<RelevanceNode, RelevanceError> {
    if corpora.len() != 4 || corpora.iter().zip(1u8..).any(|(c, l)| c.level != l) {
        return Err(RelevanceError::MissingLevels);
    }
    if major_group.len() != 1 {
        return Err(RelevanceError::UnknownGroup(major_group.to_string()));
    }
    subtree(corpora, major_group, k)
}
