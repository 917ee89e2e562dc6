//! Verdicts, redundancy-weighted accuracy, prevalence metrics, and the
//! baseline comparison table.
//!
//! Accuracy is file-weighted: each verdict bucket contributes the total
//! redundancy (member count) of its fingerprints, not the number of
//! fingerprints. Percentages are rounded half-up to one decimal.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cluster::{Qualification, ResilientFingerprint};
use crate::feed::Dataset;
use crate::keys::{baseline_row, imphash, percent, redundancy_exact, KeySelector};

/// Ground-truth verdict for one fingerprint under vendor threshold t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    FullyMalicious,
    Partial,
    FalsePositive,
}

/// Classify a fingerprint by its members' vendor flag counts.
///
/// FullyMalicious when every file is flagged by at least `t` vendors,
/// FalsePositive when every file is below `t`, Partial otherwise. Depends
/// only on the flag histogram, so it is invariant under member permutation.
pub fn verdict(fp: &ResilientFingerprint, t: u32) -> Verdict {
    let histogram = &fp.file_stats.vendor_flag_histogram;
    if histogram.keys().all(|&flags| flags >= t) {
        Verdict::FullyMalicious
    } else if histogram.keys().all(|&flags| flags < t) {
        Verdict::FalsePositive
    } else {
        Verdict::Partial
    }
}

/// One row of the detection tables: verdict counts and redundancy-weighted
/// accuracy for a qualification combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub qualification: Qualification,
    pub fingerprint_count: u64,
    pub fp_count: u64,
    pub fp_accuracy_pct: f64,
    pub fp_redundancy: u64,
    pub partial_count: u64,
    pub full_count: u64,
    pub tp_accuracy_pct: f64,
    pub tp_redundancy: u64,
    /// Set when no files were selected at all (accuracies reported 0.0/0.0).
    pub empty_result: bool,
}

/// The accuracy formula on its own: FP and TP shares of the identified files.
pub fn accuracy_from_redundancy(fp_redundancy: u64, tp_redundancy: u64) -> (f64, f64) {
    let total = fp_redundancy + tp_redundancy;
    (percent(fp_redundancy, total), percent(tp_redundancy, total))
}

/// Summarize fingerprints already filtered by `select(..., qualification)`.
///
/// TP combines Partial and FullyMalicious fingerprints.
pub fn summarize(
    fingerprints: &[&ResilientFingerprint],
    qualification: Qualification,
    vendor_threshold: u32,
) -> EvaluationSummary {
    let mut fp_count = 0u64;
    let mut partial_count = 0u64;
    let mut full_count = 0u64;
    let mut fp_redundancy = 0u64;
    let mut tp_redundancy = 0u64;
    for fp in fingerprints {
        match verdict(fp, vendor_threshold) {
            Verdict::FalsePositive => {
                fp_count += 1;
                fp_redundancy += fp.redundancy();
            }
            Verdict::Partial => {
                partial_count += 1;
                tp_redundancy += fp.redundancy();
            }
            Verdict::FullyMalicious => {
                full_count += 1;
                tp_redundancy += fp.redundancy();
            }
        }
    }
    let (fp_accuracy_pct, tp_accuracy_pct) = accuracy_from_redundancy(fp_redundancy, tp_redundancy);
    EvaluationSummary {
        qualification,
        fingerprint_count: fingerprints.len() as u64,
        fp_count,
        fp_accuracy_pct,
        fp_redundancy,
        partial_count,
        full_count,
        tp_accuracy_pct,
        tp_redundancy,
        empty_result: fp_redundancy + tp_redundancy == 0,
    }
}

/// Technique names for the comparison table, in declared row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Technique {
    #[serde(rename = "SHA256")]
    Sha256,
    #[serde(rename = "TLSH")]
    Tlsh,
    TopDown,
    BottomUp,
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Technique::Sha256 => f.write_str("SHA256"),
            Technique::Tlsh => f.write_str("TLSH"),
            Technique::TopDown => f.write_str("TopDown"),
            Technique::BottomUp => f.write_str("BottomUp"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub technique: Technique,
    pub files_identified: u64,
    pub accuracy_pct: f64,
}

/// Compare both clustering methods against the exact-hash baselines.
///
/// `td` and `bu` must be summaries over the same dataset (best combinations:
/// IL with CS-or-MS for Top-Down, CS-or-MS for Bottom-Up). Rows are always
/// SHA256, TLSH, TopDown, BottomUp; accuracy is files identified over the
/// full group size.
pub fn comparison_table(
    dataset: &Dataset,
    td: &EvaluationSummary,
    bu: &EvaluationSummary,
) -> Vec<ComparisonRow> {
    let total = dataset.len() as u64;
    let sha = baseline_row(dataset, KeySelector::Sha256);
    let tlsh = baseline_row(dataset, KeySelector::Tlsh);
    vec![
        ComparisonRow {
            technique: Technique::Sha256,
            files_identified: sha.files_identified,
            accuracy_pct: sha.accuracy_pct,
        },
        ComparisonRow {
            technique: Technique::Tlsh,
            files_identified: tlsh.files_identified,
            accuracy_pct: tlsh.accuracy_pct,
        },
        ComparisonRow {
            technique: Technique::TopDown,
            files_identified: td.tp_redundancy,
            accuracy_pct: percent(td.tp_redundancy, total),
        },
        ComparisonRow {
            technique: Technique::BottomUp,
            files_identified: bu.tp_redundancy,
            accuracy_pct: percent(bu.tp_redundancy, total),
        },
    ]
}

/// Feature axes of the prevalence report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Feature {
    #[serde(rename = "SHA256")]
    Sha256,
    #[serde(rename = "TLSH")]
    Tlsh,
    ImportList,
    Sections,
    Resources,
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Feature::Sha256 => f.write_str("SHA256"),
            Feature::Tlsh => f.write_str("TLSH"),
            Feature::ImportList => f.write_str("ImportList"),
            Feature::Sections => f.write_str("Sections"),
            Feature::Resources => f.write_str("Resources"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceRow {
    pub feature: Feature,
    pub population: u64,
    pub redundancy: u64,
    pub redundancy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceReport {
    pub rows: Vec<PrevalenceRow>,
}

/// Exact-key redundancy per feature axis.
///
/// File-level axes count over files carrying the feature; section and
/// resource axes count over the whole section/resource population, where the
/// duplication actually lives.
pub fn prevalence(dataset: &Dataset) -> PrevalenceReport {
    let row = |feature: Feature, population: u64, redundancy: u64| PrevalenceRow {
        feature,
        population,
        redundancy,
        redundancy_pct: percent(redundancy, population),
    };

    let sha_red = redundancy_exact(dataset.reports.iter().map(|r| r.sha256.as_str()));

    let tlsh_keys: Vec<&str> = dataset
        .reports
        .iter()
        .filter_map(|r| r.tlsh.as_deref())
        .collect();
    let tlsh_population = tlsh_keys.len() as u64;
    let tlsh_red = redundancy_exact(tlsh_keys);

    let import_digests: Vec<String> = dataset
        .reports
        .iter()
        .filter(|r| r.has_imports())
        .map(|r| imphash(&r.imports).expect("non-empty imports").digest)
        .collect();
    let import_population = import_digests.len() as u64;
    let import_red = redundancy_exact(import_digests.iter().map(String::as_str));

    let section_population: u64 = dataset
        .reports
        .iter()
        .map(|r| r.sections.len() as u64)
        .sum();
    let section_red = redundancy_exact(
        dataset
            .reports
            .iter()
            .flat_map(|r| r.sections.iter().map(|s| s.content_hash.as_str())),
    );

    let resource_population: u64 = dataset
        .reports
        .iter()
        .map(|r| r.resources.len() as u64)
        .sum();
    let resource_red = redundancy_exact(
        dataset
            .reports
            .iter()
            .flat_map(|r| r.resources.iter().map(|s| s.content_hash.as_str())),
    );

    PrevalenceReport {
        rows: vec![
            row(Feature::Sha256, dataset.len() as u64, sha_red),
            row(Feature::Tlsh, tlsh_population, tlsh_red),
            row(Feature::ImportList, import_population, import_red),
            row(Feature::Sections, section_population, section_red),
            row(Feature::Resources, resource_population, resource_red),
        ],
    }
}

/// Histogram of vendor flag counts over a fingerprint's member files.
pub fn flag_histogram(fp: &ResilientFingerprint) -> BTreeMap<u32, u64> {
    fp.file_stats.vendor_flag_histogram.clone()
}
