//! Canonical keys and exact-match baselines.
//!
//! The import-list hash keys Top-Down clustering; section content hashes key
//! Bottom-Up. Redundancy under an exact key (N minus distinct) is the metric
//! both the prevalence analysis and the traditional-fingerprinting baselines
//! are built on.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feed::Dataset;
use crate::model::ImportLibrary;

/// Deterministic digest of a full ordered import list, 64 lowercase hex chars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImpHash {
    pub digest: String,
}

/// A section content hash plus its short display id.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SecKey {
    /// The section content hash, verbatim.
    pub digest: String,
    /// First two plus last two characters of the digest.
    pub display_id: String,
}

impl SecKey {
    pub fn new(digest: impl Into<String>) -> Self {
        let digest = digest.into();
        let display_id = match (
            digest.get(..2),
            digest.get(digest.len().saturating_sub(2)..),
        ) {
            (Some(head), Some(tail)) if digest.len() >= 4 => format!("{head}{tail}"),
            _ => digest.clone(),
        };
        SecKey { digest, display_id }
    }
}

/// Hash an ordered import list into its canonical digest.
///
/// Every `library.function` entry is emitted in report order with the library
/// name lowercased (function case preserved), joined with `;`, and hashed with
/// SHA-256. Any reordering therefore changes the digest; equality means the
/// two files declare byte-identical functionality.
pub fn imphash(imports: &[ImportLibrary]) -> Result<ImpHash> {
    if imports.is_empty() {
        return Err(Error::NoImports);
    }
    let mut canonical = String::new();
    for library in imports {
        let library_name = library.library_name.to_ascii_lowercase();
        for function in &library.functions {
            if !canonical.is_empty() {
                canonical.push(';');
            }
            canonical.push_str(&library_name);
            canonical.push('.');
            canonical.push_str(function);
        }
    }
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(ImpHash {
        digest: to_hex(&digest),
    })
}

fn to_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Redundancy under an exact key: N minus the number of distinct keys.
pub fn redundancy_exact<'a>(keys: impl IntoIterator<Item = &'a str>) -> u64 {
    let mut total: u64 = 0;
    let mut distinct = HashSet::new();
    for key in keys {
        total += 1;
        distinct.insert(key);
    }
    total - distinct.len() as u64
}

/// Round half-up to one decimal place (table precision).
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// `100 * part / whole` rounded to one decimal; 0.0 when the whole is zero.
pub fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round1(100.0 * part as f64 / whole as f64)
    }
}

/// File-level key used for a traditional-fingerprinting baseline row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeySelector {
    Sha256,
    Tlsh,
    ImpHash,
}

/// Files identified by exact-match redundancy under one key, plus the share
/// of the whole group that represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineRow {
    pub files_identified: u64,
    pub accuracy_pct: f64,
}

/// Exact-match baseline for one key over a dataset.
///
/// Records missing the key (no tlsh digest, no imports) are excluded from the
/// redundancy count but stay in the denominator: the group size is what the
/// technique had the chance to identify.
pub fn baseline_row(dataset: &Dataset, selector: KeySelector) -> BaselineRow {
    let files_identified = match selector {
        KeySelector::Sha256 => redundancy_exact(dataset.reports.iter().map(|r| r.sha256.as_str())),
        KeySelector::Tlsh => {
            redundancy_exact(dataset.reports.iter().filter_map(|r| r.tlsh.as_deref()))
        }
        KeySelector::ImpHash => {
            let digests: Vec<String> = dataset
                .reports
                .iter()
                .filter(|r| r.has_imports())
                .map(|r| imphash(&r.imports).expect("non-empty imports").digest)
                .collect();
            redundancy_exact(digests.iter().map(String::as_str))
        }
    };
    BaselineRow {
        files_identified,
        accuracy_pct: percent(files_identified, dataset.len() as u64),
    }
}
