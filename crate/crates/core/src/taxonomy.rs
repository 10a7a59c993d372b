//! ISCO / ESCO taxonomy ingest.
//!
//! Four CSV files make up a taxonomy: ISCO group labels, the ESCO skill
//! catalog, ESCO occupations with their level-4 ISCO code, and the
//! occupation-to-skill links. All files carry a mandatory header row.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ISCO_GROUPS_FILE: &str = "isco_groups.csv";
pub const SKILLS_FILE: &str = "skills.csv";
pub const ESCO_OCCUPATIONS_FILE: &str = "esco_occupations.csv";
pub const LINKS_FILE: &str = "occupation_skill_links.csv";

const ISCO_HEADER: [&str; 2] = ["code", "label"];
const SKILLS_HEADER: [&str; 2] = ["skill_id", "label"];
const ESCO_HEADER: [&str; 3] = ["esco_id", "label", "isco_code"];
const LINKS_HEADER: [&str; 2] = ["esco_id", "skill_id"];

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("malformed ISCO code {raw:?}: {reason}")]
    MalformedCode { raw: String, reason: &'static str },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: {kind} {id:?} is not defined")]
    DanglingReference {
        path: PathBuf,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("{path}:{line}: duplicate {kind} {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// A 1 to 4 digit ISCO-08 occupation group code.
///
/// The level equals the number of digits; the parent of a level `L` code is
/// its first `L - 1` digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IscoCode(String);

impl IscoCode {
    pub fn parse(raw: &str) -> Result<Self, TaxonomyError> {
        let malformed = |reason| TaxonomyError::MalformedCode {
            raw: raw.to_string(),
            reason,
        };
        if raw.is_empty() {
            return Err(malformed("empty code"));
        }
        if raw.len() > 4 {
            return Err(malformed("more than 4 digits"));
        }
        if !raw.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed("non-digit character"));
        }
        Ok(IscoCode(raw.to_string()))
    }

    pub fn digits(&self) -> &str {
        &self.0
    }

    pub fn level(&self) -> u8 {
        self.0.len() as u8
    }

    pub fn major_group(&self) -> IscoCode {
        IscoCode(self.0[..1].to_string())
    }

    pub fn parent(&self) -> Option<IscoCode> {
        (self.0.len() >= 2).then(|| IscoCode(self.0[..self.0.len() - 1].to_string()))
    }

    /// Ancestors from the immediate parent up to the major group.
    pub fn parents(&self) -> Vec<IscoCode> {
        (1..self.0.len())
            .rev()
            .map(|len| IscoCode(self.0[..len].to_string()))
            .collect()
    }

    /// The ancestor (or self) at `level`, if `level` does not exceed this code's level.
    pub fn truncate(&self, level: u8) -> Option<IscoCode> {
        let level = level as usize;
        (level >= 1 && level <= self.0.len()).then(|| IscoCode(self.0[..level].to_string()))
    }

    pub fn is_prefix_of(&self, other: &IscoCode) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for IscoCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for IscoCode {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IscoCode::parse(s)
    }
}

impl TryFrom<String> for IscoCode {
    type Error = TaxonomyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        IscoCode::parse(&value)
    }
}

impl From<IscoCode> for String {
    fn from(code: IscoCode) -> String {
        code.0
    }
}

/// Parse a raw ISCO code string.
pub fn parse_isco_code(raw: &str) -> Result<IscoCode, TaxonomyError> {
    IscoCode::parse(raw)
}

/// Major group names of ISCO-08, keyed by their single digit.
pub fn major_group_name(digit: char) -> Option<&'static str> {
    Some(match digit {
        '0' => "Armed forces occupations",
        '1' => "Managers",
        '2' => "Professionals",
        '3' => "Technicians and associate professionals",
        '4' => "Clerical support workers",
        '5' => "Service and sales workers",
        '6' => "Skilled agricultural, forestry and fishery workers",
        '7' => "Craft and related trades workers",
        '8' => "Plant and machine operators, and assemblers",
        '9' => "Elementary occupations",
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub skill_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscoOccupationRecord {
    pub esco_id: String,
    pub label: String,
    pub isco_code: IscoCode,
}

/// Validated, immutable view of the four taxonomy files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaxonomyBundle {
    pub isco_groups: BTreeMap<IscoCode, String>,
    pub skills: BTreeMap<String, SkillRecord>,
    pub esco_occupations: BTreeMap<String, EscoOccupationRecord>,
    pub occupation_skill_links: BTreeSet<(String, String)>,
}

impl TaxonomyBundle {
    /// Label of an ISCO group. Codes without an explicit label get the
    /// synthesized `group <digits>` label.
    pub fn isco_label(&self, code: &IscoCode) -> String {
        self.isco_groups
            .get(code)
            .cloned()
            .unwrap_or_else(|| synthesized_label(code))
    }

    /// Level-4 ISCO codes that at least one ESCO occupation maps to.
    pub fn level4_codes(&self) -> BTreeSet<IscoCode> {
        self.esco_occupations
            .values()
            .map(|o| o.isco_code.clone())
            .collect()
    }

    pub fn skill_catalog(&self) -> Vec<SkillRecord> {
        self.skills.values().cloned().collect()
    }

    /// Write the bundle back out as the four CSV files under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<TaxonomyPaths, TaxonomyError> {
        let paths = TaxonomyPaths::in_dir(dir);
        write_csv(
            &paths.isco_groups,
            &ISCO_HEADER,
            self.isco_groups
                .iter()
                .map(|(code, label)| vec![code.digits().to_string(), label.clone()]),
        )?;
        write_csv(
            &paths.skills,
            &SKILLS_HEADER,
            self.skills
                .values()
                .map(|s| vec![s.skill_id.clone(), s.label.clone()]),
        )?;
        write_csv(
            &paths.esco_occupations,
            &ESCO_HEADER,
            self.esco_occupations.values().map(|o| {
                vec![
                    o.esco_id.clone(),
                    o.label.clone(),
                    o.isco_code.digits().to_string(),
                ]
            }),
        )?;
        write_csv(
            &paths.links,
            &LINKS_HEADER,
            self.occupation_skill_links
                .iter()
                .map(|(o, s)| vec![o.clone(), s.clone()]),
        )?;
        Ok(paths)
    }
}

fn synthesized_label(code: &IscoCode) -> String {
    format!("group {}", code.digits())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyPaths {
    pub isco_groups: PathBuf,
    pub skills: PathBuf,
    pub esco_occupations: PathBuf,
    pub links: PathBuf,
}

impl TaxonomyPaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        TaxonomyPaths {
            isco_groups: dir.join(ISCO_GROUPS_FILE),
            skills: dir.join(SKILLS_FILE),
            esco_occupations: dir.join(ESCO_OCCUPATIONS_FILE),
            links: dir.join(LINKS_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.isco_groups,
            &self.skills,
            &self.esco_occupations,
            &self.links,
        ]
    }
}

/// Non-fatal conditions encountered while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    EmptyLinks { path: PathBuf },
    DuplicateLink {
        path: PathBuf,
        line: u64,
        esco_id: String,
        skill_id: String,
    },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::EmptyLinks { path } => {
                write!(f, "{}: no occupation-skill links", path.display())
            }
            IngestWarning::DuplicateLink {
                path,
                line,
                esco_id,
                skill_id,
            } => write!(
                f,
                "{}:{line}: duplicate link ({esco_id}, {skill_id}) collapsed",
                path.display()
            ),
        }
    }
}

/// Load and cross-validate the four taxonomy files, logging any warnings.
pub fn load_taxonomy(paths: &TaxonomyPaths) -> Result<TaxonomyBundle, TaxonomyError> {
    let (bundle, warnings) = load_taxonomy_with_warnings(paths)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    log::info!(
        "taxonomy: {} ISCO groups, {} skills, {} ESCO occupations, {} links",
        bundle.isco_groups.len(),
        bundle.skills.len(),
        bundle.esco_occupations.len(),
        bundle.occupation_skill_links.len()
    );
    Ok(bundle)
}

/// Reads the skill catalog file on its own.
pub fn load_skills(path: &Path) -> Result<BTreeMap<String, SkillRecord>, TaxonomyError> {
    let mut skills = BTreeMap::new();
    for (line, row) in read_rows(path, &SKILLS_HEADER)? {
        let skill_id = non_empty(path, line, "skill_id", &row[0])?;
        let label = non_empty(path, line, "label", &row[1])?;
        if skills.contains_key(&skill_id) {
            return Err(TaxonomyError::DuplicateId {
                path: path.to_path_buf(),
                line,
                kind: "skill_id",
                id: skill_id,
            });
        }
        skills.insert(skill_id.clone(), SkillRecord { skill_id, label });
    }
    Ok(skills)
}

pub fn load_taxonomy_with_warnings(
    paths: &TaxonomyPaths,
) -> Result<(TaxonomyBundle, Vec<IngestWarning>), TaxonomyError> {
    let mut warnings = Vec::new();
    let mut bundle = TaxonomyBundle::default();

    for (line, row) in read_rows(&paths.isco_groups, &ISCO_HEADER)? {
        let code = IscoCode::parse(&row[0]).map_err(|e| parse_err(&paths.isco_groups, line, e))?;
        let label = non_empty(&paths.isco_groups, line, "label", &row[1])?;
        if bundle.isco_groups.insert(code.clone(), label).is_some() {
            return Err(TaxonomyError::DuplicateId {
                path: paths.isco_groups.clone(),
                line,
                kind: "ISCO code",
                id: code.to_string(),
            });
        }
    }

    bundle.skills = load_skills(&paths.skills)?;

    for (line, row) in read_rows(&paths.esco_occupations, &ESCO_HEADER)? {
        let path = &paths.esco_occupations;
        let esco_id = non_empty(path, line, "esco_id", &row[0])?;
        let label = non_empty(path, line, "label", &row[1])?;
        let isco_code = IscoCode::parse(&row[2]).map_err(|e| parse_err(path, line, e))?;
        if isco_code.level() != 4 {
            return Err(TaxonomyError::Parse {
                path: path.clone(),
                line,
                message: format!("isco_code {isco_code} is not a level-4 code"),
            });
        }
        if !bundle.isco_groups.contains_key(&isco_code) {
            return Err(TaxonomyError::DanglingReference {
                path: path.clone(),
                line,
                kind: "ISCO code",
                id: isco_code.to_string(),
            });
        }
        if bundle.esco_occupations.contains_key(&esco_id) {
            return Err(TaxonomyError::DuplicateId {
                path: path.clone(),
                line,
                kind: "esco_id",
                id: esco_id,
            });
        }
        bundle.esco_occupations.insert(
            esco_id.clone(),
            EscoOccupationRecord {
                esco_id,
                label,
                isco_code,
            },
        );
    }

    // Intermediate levels are optional input.
    let missing: Vec<IscoCode> = bundle
        .isco_groups
        .keys()
        .flat_map(|c| c.parents())
        .filter(|c| !bundle.isco_groups.contains_key(c))
        .collect();
    for code in missing {
        let label = match (code.level(), code.digits().chars().next()) {
            (1, Some(d)) => major_group_name(d)
                .map(str::to_string)
                .unwrap_or_else(|| synthesized_label(&code)),
            _ => synthesized_label(&code),
        };
        bundle.isco_groups.insert(code, label);
    }

    let links = read_rows(&paths.links, &LINKS_HEADER)?;
    if links.is_empty() {
        warnings.push(IngestWarning::EmptyLinks {
            path: paths.links.clone(),
        });
    }
    for (line, row) in links {
        let path = &paths.links;
        let esco_id = non_empty(path, line, "esco_id", &row[0])?;
        let skill_id = non_empty(path, line, "skill_id", &row[1])?;
        if !bundle.esco_occupations.contains_key(&esco_id) {
            return Err(TaxonomyError::DanglingReference {
                path: path.clone(),
                line,
                kind: "esco_id",
                id: esco_id,
            });
        }
        if !bundle.skills.contains_key(&skill_id) {
            return Err(TaxonomyError::DanglingReference {
                path: path.clone(),
                line,
                kind: "skill_id",
                id: skill_id,
            });
        }
        if !bundle
            .occupation_skill_links
            .insert((esco_id.clone(), skill_id.clone()))
        {
            warnings.push(IngestWarning::DuplicateLink {
                path: path.clone(),
                line,
                esco_id,
                skill_id,
            });
        }
    }

    Ok((bundle, warnings))
}

fn parse_err(path: &Path, line: u64, e: TaxonomyError) -> TaxonomyError {
    TaxonomyError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn non_empty(path: &Path, line: u64, field: &str, value: &str) -> Result<String, TaxonomyError> {
    let value = value.trim();
    if value.is_empty() {
        return Err(TaxonomyError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("empty {field}"),
        });
    }
    Ok(value.to_string())
}

/// Reads every data row, checking the header and the column count.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>, TaxonomyError> {
    let file = File::open(path).map_err(|source| TaxonomyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let csv_err = |source| TaxonomyError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let found = reader.headers().map_err(csv_err)?.clone();
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != header {
        return Err(TaxonomyError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(TaxonomyError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), TaxonomyError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| TaxonomyError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| TaxonomyError::Io {
        path: path.to_path_buf(),
        source,
    })
}
