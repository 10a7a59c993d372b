//! Fuzzy matching of extracted skill mentions to catalog skills using
//! character n-gram Jaccard similarity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::SkillRecord;

pub const DEFAULT_NGRAM_N: usize = 3;
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.66;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("n-gram size must be at least 1, got {0}")]
    InvalidN(usize),
    #[error("match threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("skill catalog is empty")]
    EmptyCatalog,
}

/// Lowercased text with punctuation stripped and whitespace collapsed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalizedForm(String);

impl NormalizedForm {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Lowercases, turns every character that is not a letter or digit into a
/// separator, and joins the remaining words with single spaces.
pub fn normalize(raw: &str) -> NormalizedForm {
    let mapped: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    NormalizedForm(mapped.split_whitespace().collect::<Vec<_>>().join(" "))
}

/// Distinct character n-grams. Non-empty text shorter than `n` yields itself.
pub fn char_ngrams(form: &NormalizedForm, n: usize) -> Result<BTreeSet<String>, MatchError> {
    if n < 1 {
        return Err(MatchError::InvalidN(n));
    }
    let chars: Vec<char> = form.0.chars().collect();
    if chars.is_empty() {
        return Ok(BTreeSet::new());
    }
    if chars.len() < n {
        return Ok(BTreeSet::from([form.0.clone()]));
    }
    Ok(chars.windows(n).map(|w| w.iter().collect()).collect())
}

fn gram_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let inter = a.intersection(b).count();
            let union = a.len() + b.len() - inter;
            inter as f64 / union as f64
        }
    }
}

pub fn ngram_jaccard(a: &NormalizedForm, b: &NormalizedForm, n: usize) -> Result<f64, MatchError> {
    Ok(gram_jaccard(&char_ngrams(a, n)?, &char_ngrams(b, n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub ngram_n: usize,
    pub threshold: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            ngram_n: DEFAULT_NGRAM_N,
            threshold: DEFAULT_MATCH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub mention: String,
    pub matched_skill_id: Option<String>,
    pub similarity: f64,
    pub threshold: f64,
}

/// A skill catalog with its label n-grams precomputed, sorted by skill id.
#[derive(Debug, Clone)]
pub struct SkillMatcher {
    config: MatcherConfig,
    entries: Vec<CatalogEntry>,
}

#[derive(Debug, Clone)]
struct CatalogEntry {
    skill_id: String,
    label: String,
    grams: BTreeSet<String>,
}

impl SkillMatcher {
    pub fn new<'a, I>(catalog: I, config: MatcherConfig) -> Result<Self, MatchError>
    where
        I: IntoIterator<Item = &'a SkillRecord>,
    {
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(MatchError::InvalidThreshold(config.threshold));
        }
        let mut entries = catalog
            .into_iter()
            .map(|s| {
                Ok(CatalogEntry {
                    skill_id: s.skill_id.clone(),
                    label: s.label.clone(),
                    grams: char_ngrams(&normalize(&s.label), config.ngram_n)?,
                })
            })
            .collect::<Result<Vec<_>, MatchError>>()?;
        if entries.is_empty() {
            return Err(MatchError::EmptyCatalog);
        }
        entries.sort_by(|a, b| a.skill_id.cmp(&b.skill_id));
        Ok(SkillMatcher { config, entries })
    }

    pub fn config(&self) -> MatcherConfig {
        self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, skill_id: &str) -> Option<&str> {
        self.entries
            .binary_search_by(|e| e.skill_id.as_str().cmp(skill_id))
            .ok()
            .map(|i| self.entries[i].label.as_str())
    }

    /// Best-scoring catalog skill for `mention`; ties go to the smallest skill id.
    pub fn best(&self, mention: &str) -> (&str, f64) {
        let grams = char_ngrams(&normalize(mention), self.config.ngram_n)
            .expect("n validated at construction");
        let mut best = (self.entries[0].skill_id.as_str(), f64::NEG_INFINITY);
        for e in &self.entries {
            let sim = gram_jaccard(&grams, &e.grams);
            if sim > best.1 {
                best = (e.skill_id.as_str(), sim);
            }
        }
        best
    }

    pub fn match_mention(&self, mention: &str) -> MatchResult {
        let (id, similarity) = self.best(mention);
        MatchResult {
            mention: mention.to_string(),
            matched_skill_id: (similarity >= self.config.threshold).then(|| id.to_string()),
            similarity,
            threshold: self.config.threshold,
        }
    }
}

/// One-shot matching against `catalog`. Build a [`SkillMatcher`] when matching
/// many mentions against the same catalog.
pub fn match_mention(
    mention: &str,
    catalog: &[SkillRecord],
    n: usize,
    threshold: f64,
) -> Result<MatchResult, MatchError> {
    let matcher = SkillMatcher::new(catalog, MatcherConfig { ngram_n: n, threshold })?;
    Ok(matcher.match_mention(mention))
}
