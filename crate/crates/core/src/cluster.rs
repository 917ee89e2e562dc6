//! Resilient-fingerprint construction.
//!
//! Top-Down partitions files by their import-list hash and then profiles the
//! sections common inside each group; Bottom-Up starts from section content
//! hashes and pulls together every file carrying the section, regardless of
//! import list. Both are fully deterministic: groups are ordered by size
//! descending with ascending-key tie-breaks, so two runs over the same
//! dataset produce identical output.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feed::Dataset;
use crate::keys::{imphash, SecKey};
use crate::model::{EvaluationConfig, FileReport, SectionLabel, SectionRecord};
use crate::taxonomy::classify;

/// Which algorithm produced a fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    TopDown,
    BottomUp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TopDown => f.write_str("TopDown"),
            Method::BottomUp => f.write_str("BottomUp"),
        }
    }
}

/// Section-level qualification flags: redundant, camouflage, malicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum QualFlag {
    RS,
    CS,
    MS,
}

/// Aggregated statistics for one section content hash within a scope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionGroupStats {
    pub sec_key: SecKey,
    pub label: SectionLabel,
    /// Total section copies observed (a file may contribute several).
    pub occurrence_count: u64,
    /// Distinct files the section appears in.
    pub distinct_file_count: u64,
    pub entropy_min: f64,
    pub entropy_max: f64,
    pub chi2_min: f64,
    pub chi2_max: f64,
}

/// File-level statistics over a fingerprint's members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileStats {
    pub file_count: u64,
    pub distinct_sha256: u64,
    pub size_min: u64,
    pub size_max: u64,
    /// vendor flag count -> number of member files with that count.
    pub vendor_flag_histogram: std::collections::BTreeMap<u32, u64>,
}

impl FileStats {
    fn from_reports<'a>(reports: impl IntoIterator<Item = &'a FileReport>) -> Self {
        let mut stats = FileStats {
            file_count: 0,
            distinct_sha256: 0,
            size_min: u64::MAX,
            size_max: 0,
            vendor_flag_histogram: Default::default(),
        };
        let mut sha_set = HashSet::new();
        for report in reports {
            stats.file_count += 1;
            sha_set.insert(report.sha256.as_str());
            stats.size_min = stats.size_min.min(report.size_bytes);
            stats.size_max = stats.size_max.max(report.size_bytes);
            *stats
                .vendor_flag_histogram
                .entry(report.vendor_malicious_count)
                .or_insert(0) += 1;
        }
        stats.distinct_sha256 = sha_set.len() as u64;
        if stats.file_count == 0 {
            stats.size_min = 0;
        }
        stats
    }
}

/// A cluster of files sharing an invariant component.
///
/// The fingerprint's redundancy is its member count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilientFingerprint {
    /// The imphash digest (Top-Down) or section content hash (Bottom-Up).
    pub key: String,
    pub method: Method,
    pub qualifications: BTreeSet<QualFlag>,
    pub file_ids: BTreeSet<String>,
    pub file_stats: FileStats,
    /// At most `top_sections` entries, sorted by occurrence count descending.
    pub section_profiles: Vec<SectionGroupStats>,
}

impl ResilientFingerprint {
    /// Number of files connected by this fingerprint.
    pub fn redundancy(&self) -> u64 {
        self.file_ids.len() as u64
    }
}

/// Group the sections of `files` by content hash.
///
/// Returns one stats entry per distinct hash, sorted by occurrence count
/// descending with ascending-hash tie-breaks. The label comes from the first
/// occurrence in scan order (copies of one content hash share entropy and
/// size in well-formed feeds).
fn group_sections<'a>(
    files: impl IntoIterator<Item = &'a FileReport>,
    cfg: &EvaluationConfig,
) -> Vec<SectionGroupStats> {
    struct Agg<'a> {
        representative: &'a SectionRecord,
        occurrence_count: u64,
        files: HashSet<&'a str>,
        entropy_min: f64,
        entropy_max: f64,
        chi2_min: f64,
        chi2_max: f64,
    }

    let mut groups: HashMap<&str, Agg> = HashMap::new();
    for file in files {
        for section in &file.sections {
            let agg = groups
                .entry(section.content_hash.as_str())
                .or_insert_with(|| Agg {
                    representative: section,
                    occurrence_count: 0,
                    files: HashSet::new(),
                    entropy_min: f64::INFINITY,
                    entropy_max: f64::NEG_INFINITY,
                    chi2_min: f64::INFINITY,
                    chi2_max: f64::NEG_INFINITY,
                });
            agg.occurrence_count += 1;
            agg.files.insert(file.file_id.as_str());
            agg.entropy_min = agg.entropy_min.min(section.entropy);
            agg.entropy_max = agg.entropy_max.max(section.entropy);
            agg.chi2_min = agg.chi2_min.min(section.chi2);
            agg.chi2_max = agg.chi2_max.max(section.chi2);
        }
    }

    let mut stats: Vec<SectionGroupStats> = groups
        .into_iter()
        .map(|(hash, agg)| SectionGroupStats {
            sec_key: SecKey::new(hash),
            label: classify(agg.representative, cfg),
            occurrence_count: agg.occurrence_count,
            distinct_file_count: agg.files.len() as u64,
            entropy_min: agg.entropy_min,
            entropy_max: agg.entropy_max,
            chi2_min: agg.chi2_min,
            chi2_max: agg.chi2_max,
        })
        .collect();
    stats.sort_by(|a, b| {
        b.occurrence_count
            .cmp(&a.occurrence_count)
            .then_with(|| a.sec_key.digest.cmp(&b.sec_key.digest))
    });
    stats
}

/// Qualification flags for a Top-Down cluster from its grouped sections.
///
/// A section is redundant when its content hash spans at least two distinct
/// member files; camouflage/malicious flags require such a redundant section
/// with the matching label.
pub fn qualify_cluster(section_groups: &[SectionGroupStats]) -> BTreeSet<QualFlag> {
    let mut quals = BTreeSet::new();
    for group in section_groups {
        if group.distinct_file_count >= 2 {
            quals.insert(QualFlag::RS);
            match group.label {
                SectionLabel::Camouflage => {
                    quals.insert(QualFlag::CS);
                }
                SectionLabel::Malicious => {
                    quals.insert(QualFlag::MS);
                }
                SectionLabel::Standard => {}
            }
        }
    }
    quals
}

/// Top-Down: partition importing files by import-list hash, then profile
/// each group's sections.
///
/// Files without imports never cluster. Groups smaller than
/// `min_cluster_size` are dropped. Each kept group keeps its top
/// `top_sections` section profiles by occurrence count; qualifications are
/// computed over all of the group's sections, not just the retained
/// profiles.
pub fn top_down(dataset: &Dataset, cfg: &EvaluationConfig) -> Vec<ResilientFingerprint> {
    let mut groups: HashMap<String, Vec<&FileReport>> = HashMap::new();
    for report in &dataset.reports {
        if report.has_imports() {
            let digest = imphash(&report.imports).expect("non-empty imports").digest;
            groups.entry(digest).or_default().push(report);
        }
    }

    let mut ordered: Vec<(String, Vec<&FileReport>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

    ordered
        .into_iter()
        .filter(|(_, files)| files.len() >= cfg.min_cluster_size)
        .map(|(digest, files)| {
            let all_groups = group_sections(files.iter().copied(), cfg);
            let qualifications = qualify_cluster(&all_groups);
            let mut section_profiles = all_groups;
            section_profiles.truncate(cfg.top_sections);
            ResilientFingerprint {
                key: digest,
                method: Method::TopDown,
                qualifications,
                file_ids: files.iter().map(|f| f.file_id.clone()).collect(),
                file_stats: FileStats::from_reports(files.iter().copied()),
                section_profiles,
            }
        })
        .collect()
}

/// Bottom-Up: group every section by content hash and pull each hash's files
/// into a fingerprint, deduplicated by file id.
///
/// A file holding many copies of the section counts once. Only hashes
/// spanning at least `min_cluster_size` distinct files survive. Each
/// fingerprint is always RS-qualified, plus CS or MS when its anchor section
/// classifies camouflage or malicious.
pub fn bottom_up(dataset: &Dataset, cfg: &EvaluationConfig) -> Vec<ResilientFingerprint> {
    struct Agg<'a> {
        representative: &'a SectionRecord,
        occurrence_count: u64,
        file_indices: BTreeSet<u32>,
        entropy_min: f64,
        entropy_max: f64,
        chi2_min: f64,
        chi2_max: f64,
    }

    let mut groups: HashMap<&str, Agg> = HashMap::new();
    for (file_index, report) in dataset.reports.iter().enumerate() {
        for section in &report.sections {
            let agg = groups
                .entry(section.content_hash.as_str())
                .or_insert_with(|| Agg {
                    representative: section,
                    occurrence_count: 0,
                    file_indices: BTreeSet::new(),
                    entropy_min: f64::INFINITY,
                    entropy_max: f64::NEG_INFINITY,
                    chi2_min: f64::INFINITY,
                    chi2_max: f64::NEG_INFINITY,
                });
            agg.occurrence_count += 1;
            agg.file_indices.insert(file_index as u32);
            agg.entropy_min = agg.entropy_min.min(section.entropy);
            agg.entropy_max = agg.entropy_max.max(section.entropy);
            agg.chi2_min = agg.chi2_min.min(section.chi2);
            agg.chi2_max = agg.chi2_max.max(section.chi2);
        }
    }

    let mut ordered: Vec<(&str, Agg)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| {
        b.1.occurrence_count
            .cmp(&a.1.occurrence_count)
            .then_with(|| a.0.cmp(b.0))
    });

    ordered
        .into_iter()
        .filter(|(_, agg)| agg.file_indices.len() >= cfg.min_cluster_size)
        .map(|(hash, agg)| {
            let members = agg
                .file_indices
                .iter()
                .map(|&i| &dataset.reports[i as usize]);
            let label = classify(agg.representative, cfg);
            let anchor = SectionGroupStats {
                sec_key: SecKey::new(hash),
                label,
                occurrence_count: agg.occurrence_count,
                distinct_file_count: agg.file_indices.len() as u64,
                entropy_min: agg.entropy_min,
                entropy_max: agg.entropy_max,
                chi2_min: agg.chi2_min,
                chi2_max: agg.chi2_max,
            };
            let mut qualifications = BTreeSet::from([QualFlag::RS]);
            match label {
                SectionLabel::Camouflage => {
                    qualifications.insert(QualFlag::CS);
                }
                SectionLabel::Malicious => {
                    qualifications.insert(QualFlag::MS);
                }
                SectionLabel::Standard => {}
            }
            ResilientFingerprint {
                key: hash.to_string(),
                method: Method::BottomUp,
                qualifications,
                file_ids: members.clone().map(|f| f.file_id.clone()).collect(),
                file_stats: FileStats::from_reports(members),
                section_profiles: vec![anchor],
            }
        })
        .collect()
}

/// Named qualification combinations used for selection and reporting.
///
/// The `Il`-prefixed combinations apply to Top-Down fingerprints; the bare
/// section combinations apply to Bottom-Up. Serialized names match the
/// display names so CSV and JSON reports agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Qualification {
    #[serde(rename = "ILRS")]
    IlRs,
    #[serde(rename = "ILCS")]
    IlCs,
    #[serde(rename = "ILMS")]
    IlMs,
    #[serde(rename = "ILCSMS")]
    IlCsMs,
    #[serde(rename = "ILCSorMS")]
    IlCsOrMs,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "CS")]
    Cs,
    #[serde(rename = "MS")]
    Ms,
    #[serde(rename = "CSorMS")]
    CsOrMs,
}

impl Qualification {
    /// Every combination, in reporting order.
    pub const ALL: [Qualification; 9] = [
        Qualification::IlRs,
        Qualification::IlCs,
        Qualification::IlMs,
        Qualification::IlCsMs,
        Qualification::IlCsOrMs,
        Qualification::Rs,
        Qualification::Cs,
        Qualification::Ms,
        Qualification::CsOrMs,
    ];

    /// Which clustering method this combination selects from.
    pub fn required_method(self) -> Method {
        match self {
            Qualification::IlRs
            | Qualification::IlCs
            | Qualification::IlMs
            | Qualification::IlCsMs
            | Qualification::IlCsOrMs => Method::TopDown,
            _ => Method::BottomUp,
        }
    }
}

impl fmt::Display for Qualification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Qualification::IlRs => "ILRS",
            Qualification::IlCs => "ILCS",
            Qualification::IlMs => "ILMS",
            Qualification::IlCsMs => "ILCSMS",
            Qualification::IlCsOrMs => "ILCSorMS",
            Qualification::Rs => "RS",
            Qualification::Cs => "CS",
            Qualification::Ms => "MS",
            Qualification::CsOrMs => "CSorMS",
        };
        f.write_str(name)
    }
}

impl FromStr for Qualification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_' && *c != '(' && *c != ')')
            .collect::<String>()
            .to_ascii_lowercase();
        match normalized.as_str() {
            "ilrs" => Ok(Qualification::IlRs),
            "ilcs" => Ok(Qualification::IlCs),
            "ilms" => Ok(Qualification::IlMs),
            "ilcsms" => Ok(Qualification::IlCsMs),
            "ilcsorms" => Ok(Qualification::IlCsOrMs),
            "rs" => Ok(Qualification::Rs),
            "cs" => Ok(Qualification::Cs),
            "ms" => Ok(Qualification::Ms),
            "csorms" => Ok(Qualification::CsOrMs),
            _ => Err(Error::InvalidConfig(format!("unknown qualification {s:?}"))),
        }
    }
}

/// Filter fingerprints by a qualification combination.
///
/// Errors when any fingerprint comes from the wrong method for the
/// combination. `CsOrMs` concatenates the CS-anchored and MS-anchored lists
/// (each anchor kept separately, so redundancy is additive); `IlCsOrMs` is a
/// plain disjunction over each Top-Down cluster's flags.
pub fn select(
    fingerprints: &[ResilientFingerprint],
    qualification: Qualification,
) -> Result<Vec<&ResilientFingerprint>> {
    let required = qualification.required_method();
    if let Some(bad) = fingerprints.iter().find(|fp| fp.method != required) {
        return Err(Error::QualificationMismatch {
            qualification: qualification.to_string(),
            expected: format!("{required} (got {})", bad.method),
        });
    }

    let has = |fp: &ResilientFingerprint, flag: QualFlag| fp.qualifications.contains(&flag);
    let selected = match qualification {
        Qualification::IlRs | Qualification::Rs => fingerprints
            .iter()
            .filter(|fp| has(fp, QualFlag::RS))
            .collect(),
        Qualification::IlCs | Qualification::Cs => fingerprints
            .iter()
            .filter(|fp| has(fp, QualFlag::CS))
            .collect(),
        Qualification::IlMs | Qualification::Ms => fingerprints
            .iter()
            .filter(|fp| has(fp, QualFlag::MS))
            .collect(),
        Qualification::IlCsMs => fingerprints
            .iter()
            .filter(|fp| has(fp, QualFlag::CS) && has(fp, QualFlag::MS))
            .collect(),
        Qualification::IlCsOrMs => fingerprints
            .iter()
            .filter(|fp| has(fp, QualFlag::CS) || has(fp, QualFlag::MS))
            .collect(),
        Qualification::CsOrMs => {
            let mut out: Vec<&ResilientFingerprint> = fingerprints
                .iter()
                .filter(|fp| has(fp, QualFlag::CS))
                .collect();
            out.extend(fingerprints.iter().filter(|fp| has(fp, QualFlag::MS)));
            out
        }
    };
    Ok(selected)
}
