//! JSON-lines feed parsing, validation, and grouping.
//!
//! Feed batches in the wild contain noise, so malformed lines are counted and
//! skipped rather than aborting the run. Accepted reports always satisfy every
//! field invariant.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{is_lower_hex, FileReport};

/// One chronological group of accepted reports.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub reports: Vec<FileReport>,
    pub group_id: String,
    pub ingest_stats: IngestStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// Counters describing one ingest pass.
///
/// Invariant: `lines_read = accepted + skipped_malformed + skipped_non_pe`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines_read: u64,
    pub accepted: u64,
    pub skipped_malformed: u64,
    pub skipped_non_pe: u64,
    /// Accepted records with no import libraries (excluded from Top-Down).
    pub missing_imports: u64,
    /// Accepted records with no tlsh digest (excluded from the TLSH baseline).
    pub missing_tlsh: u64,
}

/// Parse one feed file into a [`Dataset`] tagged with `group_id`.
///
/// Each line must be one JSON object in the canonical schema. Malformed lines
/// (bad JSON, invariant violations, duplicate file ids) and, when `filter_pe`
/// is set, non-PE file types are counted and skipped, never fatal. A zero-line
/// or all-skipped file yields an empty dataset, not an error.
pub fn ingest(path: &Path, group_id: &str, filter_pe: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), path, group_id, filter_pe)
}

fn ingest_reader<R: BufRead>(
    reader: R,
    path: &Path,
    group_id: &str,
    filter_pe: bool,
) -> Result<Dataset> {
    let mut stats = IngestStats::default();
    let mut reports: Vec<FileReport> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();

    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        stats.lines_read += 1;

        let mut report: FileReport = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                stats.skipped_malformed += 1;
                continue;
            }
        };

        // Type filter applies before validation: a non-PE line is skipped as
        // non-PE even if its other fields are broken.
        if filter_pe && !report.file_type.is_pe() {
            stats.skipped_non_pe += 1;
            continue;
        }

        normalize(&mut report);
        report.group_id = group_id.to_string();

        if !validate(&report).is_empty() || !seen_ids.insert(report.file_id.clone()) {
            stats.skipped_malformed += 1;
            continue;
        }

        stats.accepted += 1;
        if !report.has_imports() {
            stats.missing_imports += 1;
        }
        if report.tlsh.is_none() {
            stats.missing_tlsh += 1;
        }
        reports.push(report);
    }

    Ok(Dataset {
        reports,
        group_id: group_id.to_string(),
        ingest_stats: stats,
    })
}

/// Lowercase every hash field so key equality is case-insensitive by construction.
fn normalize(report: &mut FileReport) {
    report.sha256.make_ascii_lowercase();
    report.md5.make_ascii_lowercase();
    if let Some(tlsh) = report.tlsh.as_mut() {
        tlsh.make_ascii_lowercase();
    }
    for section in &mut report.sections {
        section.content_hash.make_ascii_lowercase();
    }
    for resource in &mut report.resources {
        resource.content_hash.make_ascii_lowercase();
    }
}

/// Check every field invariant of a (normalized) report.
///
/// Returns one description per violation; an empty list means the report is ok.
pub fn validate(report: &FileReport) -> Vec<String> {
    let mut violations = Vec::new();
    if report.file_id.is_empty() {
        violations.push("file id is empty".to_string());
    }
    if !is_lower_hex(&report.sha256, 64) {
        violations.push(format!(
            "sha256 is not 64 lowercase hex chars: {:?}",
            report.sha256
        ));
    }
    if !is_lower_hex(&report.md5, 32) {
        violations.push(format!(
            "md5 is not 32 lowercase hex chars: {:?}",
            report.md5
        ));
    }
    if report.vendor_malicious_count > 71 {
        violations.push(format!(
            "vendor count out of range: {} > 71",
            report.vendor_malicious_count
        ));
    }
    for (i, section) in report.sections.iter().enumerate() {
        if !is_lower_hex(&section.content_hash, 32) {
            violations.push(format!(
                "section {i}: content hash is not 32 lowercase hex chars"
            ));
        }
        if !(0.0..=8.0).contains(&section.entropy) {
            violations.push(format!(
                "section {i}: entropy {} outside [0, 8]",
                section.entropy
            ));
        }
        if !section.chi2.is_finite() || section.chi2 < 0.0 {
            violations.push(format!("section {i}: chi2 {} is negative", section.chi2));
        }
    }
    for (i, resource) in report.resources.iter().enumerate() {
        if !(0.0..=8.0).contains(&resource.entropy) {
            violations.push(format!(
                "resource {i}: entropy {} outside [0, 8]",
                resource.entropy
            ));
        }
        if !resource.chi2.is_finite() || resource.chi2 < 0.0 {
            violations.push(format!("resource {i}: chi2 {} is negative", resource.chi2));
        }
    }
    violations
}

/// Write a dataset back out as canonical JSON lines.
pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for report in &dataset.reports {
        serde_json::to_writer(&mut writer, report)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
