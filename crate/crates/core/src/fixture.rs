//! Synthetic taxonomy, postings and graphs with known ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrichment::{write_postings, JobPostingRecord, SkillMention};
use crate::graph::{KnowledgeGraph, NodeId, Provenance};
use crate::matcher::{char_ngrams, normalize};
use crate::rng;
use crate::taxonomy::{major_group_name, EscoOccupationRecord, IscoCode, SkillRecord, TaxonomyBundle, TaxonomyError};

pub const MANIFEST_FILE: &str = "fixture_manifest.json";
pub const POSTINGS_FILE: &str = "postings.jsonl";

/// Generated skill labels are at least this long, so any single adjacent
/// swap keeps trigram similarity to the original above 0.66.
pub const MIN_LABEL_CHARS: usize = 22;
const MAX_LABEL_SIMILARITY: f64 = 0.45;
const MAX_OCCUPATIONS: usize = 729;
const HOME_CLUSTER_SHARE: f64 = 0.8;
const LINKED_MENTION_SHARE: f64 = 0.7;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("could not find {0} distinct skill labels")]
    LabelSpaceExhausted(usize),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_occupations: usize,
    pub n_skills: usize,
    pub links_per_occupation: usize,
    pub n_postings: usize,
    pub mentions_per_posting: usize,
    /// Probability that a mention surface has two adjacent characters swapped.
    pub mention_noise: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_occupations: 30,
            n_skills: 120,
            links_per_occupation: 8,
            n_postings: 600,
            mentions_per_posting: 4,
            mention_noise: 0.1,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: String| Err(FixtureError::InvalidSpec(m));
        if self.n_occupations == 0 || self.n_skills == 0 || self.links_per_occupation == 0 || self.n_postings == 0 || self.mentions_per_posting == 0 {
            return bad("all counts must be positive".into());
        }
        if self.n_occupations > MAX_OCCUPATIONS {
            return bad(format!("at most {MAX_OCCUPATIONS} occupations"));
        }
        if self.links_per_occupation > self.n_skills {
            return bad("links_per_occupation exceeds n_skills".into());
        }
        if !(0.0..=1.0).contains(&self.mention_noise) {
            return bad("mention_noise must be in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairCount {
    pub occupation: String,
    pub skill: String,
    pub count: u64,
}

/// Ground truth written next to the generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub spec: FixtureSpec,
    pub isco_groups: usize,
    pub esco_occupations: usize,
    pub skills: usize,
    pub links: usize,
    pub postings: usize,
    pub mentions: usize,
    pub perturbed_mentions: usize,
    /// Intended (occupation, skill) of every mention, tallied.
    pub pair_counts: Vec<PairCount>,
}

#[derive(Debug, Clone)]
pub struct GeneratedFixture {
    pub taxonomy: TaxonomyBundle,
    pub postings: Vec<JobPostingRecord>,
    pub manifest: FixtureManifest,
}

const VERBS: &[&str] = &[
    "operate", "maintain", "calibrate", "inspect", "negotiate", "supervise", "document", "assemble", "diagnose", "evaluate",
    "schedule", "install", "monitor", "prepare", "coordinate", "translate", "analyse", "design", "audit", "repair",
    "train", "develop", "forecast", "procure", "sterilise", "programme", "survey", "advise", "harvest", "package",
    "market", "restore", "demonstrate", "moderate", "reconcile", "dispatch", "measure", "compose", "verify", "formulate",
];

const MODIFIERS: &[&str] = &[
    "industrial", "hydraulic", "financial", "clinical", "agricultural", "electrical", "municipal", "maritime", "digital", "culinary",
    "structural", "veterinary", "logistical", "botanical", "forensic", "acoustic", "thermal", "textile", "pharmaceutical", "geological",
    "nautical", "orthopaedic", "ceramic", "horticultural", "actuarial", "seismic", "optical", "chemical", "ventilation", "archival",
    "ornamental", "automotive", "dietary", "nuclear", "railway", "cosmetic", "aeronautical", "judicial", "welding", "mining",
];

const NOUNS: &[&str] = &[
    "equipment", "contracts", "procedures", "machinery", "accounts", "samples", "installations", "inventories", "schedules", "records",
    "instruments", "shipments", "materials", "components", "budgets", "treatments", "structures", "networks", "surfaces", "catalogues",
    "specimens", "vessels", "pipelines", "workshops", "permits", "documents", "fixtures", "gardens", "circuits", "manuscripts",
    "engines", "claims", "campaigns", "reservations", "prototypes", "tariffs", "livestock", "sensors", "furnaces", "archives",
];

fn label_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Distinct multi-word labels, each at least [`MIN_LABEL_CHARS`] long and
/// with trigram similarity below 0.45 to every other label.
pub fn skill_labels<R: Rng>(n: usize, rng: &mut R) -> Result<Vec<String>, FixtureError> {
    let mut labels = Vec::with_capacity(n);
    let mut grams: Vec<BTreeSet<String>> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while labels.len() < n {
        attempts += 1;
        if attempts > 200 * n + 10_000 {
            return Err(FixtureError::LabelSpaceExhausted(n));
        }
        let mut label = format!(
            "{} {} {}",
            VERBS.choose(rng).expect("non-empty"),
            MODIFIERS.choose(rng).expect("non-empty"),
            NOUNS.choose(rng).expect("non-empty")
        );
        if label.chars().count() < MIN_LABEL_CHARS {
            label.push_str(" and ");
            label.push_str(NOUNS.choose(rng).expect("non-empty"));
        }
        let g = char_ngrams(&normalize(&label), 3).expect("n = 3");
        if grams.iter().all(|other| label_similarity(&g, other) < MAX_LABEL_SIMILARITY) {
            labels.push(label);
            grams.push(g);
        }
    }
    Ok(labels)
}

/// Swaps one pair of differing adjacent characters. Returns the input
/// unchanged when no such pair exists.
pub fn swap_adjacent<R: Rng>(s: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let candidates: Vec<usize> = (0..chars.len().saturating_sub(1)).filter(|&i| chars[i] != chars[i + 1]).collect();
    if let Some(&i) = candidates.choose(rng) {
        chars.swap(i, i + 1);
    }
    chars.into_iter().collect()
}

/// Level-4 code for the `i`-th occupation: majors cycle 1-9 and the lower
/// digits spread occupations over shared sub-major and minor groups.
fn occupation_code(i: usize) -> String {
    let major = 1 + i % 9;
    let j = i / 9;
    format!("{major}{}{}{}", 1 + j % 3, 1 + (j / 3) % 3, 1 + j / 9)
}

pub fn generate_fixture(spec: &FixtureSpec) -> Result<GeneratedFixture, FixtureError> {
    spec.validate()?;
    let mut label_rng = rng::stream_rng(spec.seed, 1);
    let mut link_rng = rng::stream_rng(spec.seed, 2);
    let mut posting_rng = rng::stream_rng(spec.seed, 3);

    let skills: Vec<SkillRecord> = skill_labels(spec.n_skills, &mut label_rng)?
        .into_iter()
        .enumerate()
        .map(|(i, label)| SkillRecord {
            skill_id: format!("S{i:05}"),
            label,
        })
        .collect();
    // Skill i belongs to the cluster of major group 1 + i % 9.
    let cluster_of = |i: usize| i % 9;

    let mut isco_groups = BTreeMap::new();
    let mut esco_occupations = BTreeMap::new();
    let mut links = BTreeSet::new();
    let mut linked: Vec<Vec<usize>> = Vec::with_capacity(spec.n_occupations);
    let codes: Vec<String> = (0..spec.n_occupations).map(occupation_code).collect();
    for (i, code) in codes.iter().enumerate() {
        let isco = IscoCode::parse(code)?;
        let major = isco.major_group();
        let major_label = major_group_name(code.chars().next().expect("4 digits")).unwrap_or("major group");
        isco_groups.insert(major, major_label.to_string());
        isco_groups.insert(isco.clone(), format!("occupation group {code}"));
        let esco_id = format!("E{i:04}");
        esco_occupations.insert(
            esco_id.clone(),
            EscoOccupationRecord {
                esco_id: esco_id.clone(),
                label: format!("occupation {code}"),
                isco_code: isco,
            },
        );

        let home: Vec<usize> = (0..spec.n_skills).filter(|&s| cluster_of(s) == i % 9).collect();
        let mut chosen = BTreeSet::new();
        while chosen.len() < spec.links_per_occupation {
            let from_home = !home.is_empty() && link_rng.gen_bool(HOME_CLUSTER_SHARE) && chosen.len() < home.len();
            let s = if from_home {
                *home.choose(&mut link_rng).expect("non-empty")
            } else {
                link_rng.gen_range(0..spec.n_skills)
            };
            chosen.insert(s);
        }
        for &s in &chosen {
            links.insert((esco_id.clone(), skills[s].skill_id.clone()));
        }
        linked.push(chosen.into_iter().collect());
    }

    let mut postings = Vec::with_capacity(spec.n_postings);
    let mut tally: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut perturbed = 0;
    for p in 0..spec.n_postings {
        let o = posting_rng.gen_range(0..spec.n_occupations);
        let home: Vec<usize> = (0..spec.n_skills).filter(|&s| cluster_of(s) == o % 9).collect();
        let mut mentions = Vec::with_capacity(spec.mentions_per_posting);
        for _ in 0..spec.mentions_per_posting {
            let s = if posting_rng.gen_bool(LINKED_MENTION_SHARE) || home.is_empty() {
                *linked[o].choose(&mut posting_rng).expect("links_per_occupation > 0")
            } else {
                *home.choose(&mut posting_rng).expect("non-empty")
            };
            let mut surface = skills[s].label.clone();
            if posting_rng.gen_bool(spec.mention_noise) {
                surface = swap_adjacent(&surface, &mut posting_rng);
                perturbed += 1;
            }
            let confidence = (posting_rng.gen_range(0.5..=1.0f64) * 1000.0).round() / 1000.0;
            mentions.push(SkillMention { surface, confidence });
            *tally.entry((codes[o].clone(), skills[s].skill_id.clone())).or_default() += 1;
        }
        postings.push(JobPostingRecord {
            posting_id: format!("P{p:06}"),
            isco_code: IscoCode::parse(&codes[o])?,
            mentions,
        });
    }

    let taxonomy = TaxonomyBundle {
        isco_groups,
        skills: skills.into_iter().map(|s| (s.skill_id.clone(), s)).collect(),
        esco_occupations,
        occupation_skill_links: links,
    };
    let manifest = FixtureManifest {
        spec: spec.clone(),
        isco_groups: taxonomy.isco_groups.len(),
        esco_occupations: taxonomy.esco_occupations.len(),
        skills: taxonomy.skills.len(),
        links: taxonomy.occupation_skill_links.len(),
        postings: postings.len(),
        mentions: spec.n_postings * spec.mentions_per_posting,
        perturbed_mentions: perturbed,
        pair_counts: tally
            .into_iter()
            .map(|((occupation, skill), count)| PairCount { occupation, skill, count })
            .collect(),
    };
    Ok(GeneratedFixture {
        taxonomy,
        postings,
        manifest,
    })
}

/// Generates the fixture and writes the four taxonomy CSVs, `postings.jsonl`
/// and `fixture_manifest.json` into `dir`.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<FixtureManifest, FixtureError> {
    let fixture = generate_fixture(spec)?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FixtureError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    fixture.taxonomy.write_to_dir(dir)?;
    let postings = dir.join(POSTINGS_FILE);
    write_postings(&postings, &fixture.postings).map_err(io_err(&postings))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&fixture.manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    Ok(fixture.manifest)
}

/// Block-structured bipartite graph: cluster `c` has `occupations[c]`
/// occupations and `skills[c]` skills joined with probability `p_in[c]`;
/// pairs across clusters are joined with probability `p_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub occupations: Vec<usize>,
    pub skills: Vec<usize>,
    pub p_in: Vec<f64>,
    pub p_out: f64,
    pub seed: u64,
}

pub fn planted_partition(spec: &PlantedPartition) -> KnowledgeGraph {
    let mut rng = rng::rng(spec.seed);
    let mut g = KnowledgeGraph::new();
    let mut occs = Vec::new();
    let mut skills = Vec::new();
    for (c, (&n_occ, &n_skill)) in spec.occupations.iter().zip(&spec.skills).enumerate() {
        for i in 0..n_occ {
            let id = NodeId::occupation(format!("c{c}o{i:03}"));
            g.upsert_node(id.clone(), format!("cluster {c} occupation {i}"));
            occs.push((c, id));
        }
        for i in 0..n_skill {
            let id = NodeId::skill(format!("c{c}s{i:03}"));
            g.upsert_node(id.clone(), format!("cluster {c} skill {i}"));
            skills.push((c, id));
        }
    }
    for (co, o) in &occs {
        for (cs, s) in &skills {
            let p = if co == cs { spec.p_in[*co] } else { spec.p_out };
            if rng.gen_bool(p) {
                g.add_edge(o, s, 1.0, Provenance::Taxonomy, 0).expect("nodes exist");
            }
        }
    }
    g
}

/// Bipartite graph with `n_occ` occupations and `n_skill` skills where each
/// pair is an edge with probability `p`.
pub fn random_bipartite(n_occ: usize, n_skill: usize, p: f64, seed: u64) -> KnowledgeGraph {
    planted_partition(&PlantedPartition {
        occupations: vec![n_occ],
        skills: vec![n_skill],
        p_in: vec![p],
        p_out: 0.0,
        seed,
    })
}
