//! Domain types for PE file-feed reports.
//!
//! One [`FileReport`] mirrors a single feed line: file-level hashes and
//! vendor votes at the top, import libraries, sections, and resources
//! underneath. All types are immutable after construction and safe to share
//! across workers.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// PE file kinds kept by the feed filter. Anything else maps to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FileType {
    #[serde(rename = "Win32 EXE")]
    Win32Exe,
    #[serde(rename = "Win32 DLL")]
    Win32Dll,
    #[serde(rename = "Win64 EXE")]
    Win64Exe,
    #[serde(rename = "Win64 DLL")]
    Win64Dll,
    #[serde(other)]
    Other,
}

impl FileType {
    /// True for the four Windows PE types under study.
    pub fn is_pe(self) -> bool {
        !matches!(self, FileType::Other)
    }
}

/// Section permission flags, read/write/execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SectionFlags {
    pub read: bool,
    pub write: bool,
    pub execute: bool,
}

impl SectionFlags {
    /// Parse a flag string made of `r`, `w`, `x` characters (each at most once).
    pub fn parse(s: &str) -> Option<Self> {
        let mut flags = SectionFlags::default();
        for c in s.chars() {
            match c {
                'r' if !flags.read => flags.read = true,
                'w' if !flags.write => flags.write = true,
                'x' if !flags.execute => flags.execute = true,
                _ => return None,
            }
        }
        Some(flags)
    }
}

impl fmt::Display for SectionFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.read {
            f.write_str("r")?;
        }
        if self.write {
            f.write_str("w")?;
        }
        if self.execute {
            f.write_str("x")?;
        }
        Ok(())
    }
}

impl Serialize for SectionFlags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SectionFlags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SectionFlags::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid section flags {s:?}")))
    }
}

/// One imported library and the functions pulled from it, in report order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportLibrary {
    #[serde(rename = "library")]
    pub library_name: String,
    /// May be empty; order is preserved exactly as read from input.
    pub functions: Vec<String>,
}

/// Per-section metadata as reported by the feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRecord {
    /// MD5 of the section content, 32 lowercase hex chars.
    #[serde(rename = "md5")]
    pub content_hash: String,
    pub name: String,
    /// Shannon entropy over bytes, in [0, 8].
    pub entropy: f64,
    pub chi2: f64,
    pub raw_size: u64,
    pub virtual_address: u64,
    pub virtual_size: u64,
    pub flags: SectionFlags,
}

/// Non-executable resource metadata (icons, strings, images).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRecord {
    #[serde(rename = "hash")]
    pub content_hash: String,
    #[serde(rename = "type")]
    pub resource_type: String,
    pub entropy: f64,
    pub chi2: f64,
}

/// Invariant-section taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionLabel {
    Malicious,
    Standard,
    Camouflage,
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionLabel::Malicious => f.write_str("Malicious"),
            SectionLabel::Standard => f.write_str("Standard"),
            SectionLabel::Camouflage => f.write_str("Camouflage"),
        }
    }
}

/// One feed record. Wire keys follow the canonical JSON-lines schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    #[serde(rename = "id")]
    pub file_id: String,
    /// UTC seconds.
    pub first_seen: i64,
    #[serde(rename = "type")]
    pub file_type: FileType,
    pub md5: String,
    pub sha256: String,
    /// Fuzzy digest; not present on every record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlsh: Option<String>,
    #[serde(rename = "size")]
    pub size_bytes: u64,
    /// How many of the 71 vendors flagged the file malicious.
    pub vendor_malicious_count: u32,
    #[serde(default)]
    pub imports: Vec<ImportLibrary>,
    #[serde(default)]
    pub sections: Vec<SectionRecord>,
    #[serde(default)]
    pub resources: Vec<ResourceRecord>,
    /// Chronological group tag, assigned at ingest (not part of the wire form).
    #[serde(skip)]
    pub group_id: String,
}

impl FileReport {
    /// True when the record carries at least one import library.
    pub fn has_imports(&self) -> bool {
        !self.imports.is_empty()
    }
}

/// Thresholds and knobs shared across clustering and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Vendor threshold t: a file counts as malicious when flagged by >= t vendors.
    pub vendor_threshold: u32,
    /// Smallest group of files that forms a fingerprint.
    pub min_cluster_size: usize,
    /// How many section profiles to retain per fingerprint.
    pub top_sections: usize,
    /// Entropy above this classifies a section Malicious.
    pub entropy_malicious: f64,
    /// Camouflage sections must have raw size strictly below this.
    pub camouflage_max_raw: u64,
    /// Entropy at or below this counts as zero (decimal-text parsing noise).
    pub camouflage_entropy_eps: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            vendor_threshold: 4,
            min_cluster_size: 2,
            top_sections: 10,
            entropy_malicious: 5.0,
            camouflage_max_raw: 4096,
            camouflage_entropy_eps: 1e-9,
        }
    }
}

impl EvaluationConfig {
    /// Check config invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.vendor_threshold < 1 {
            return Err("vendor_threshold must be >= 1".into());
        }
        if self.top_sections < 1 {
            return Err("top_sections must be >= 1".into());
        }
        Ok(())
    }
}

/// True when `s` is exactly `len` lowercase hex characters.
pub fn is_lower_hex(s: &str, len: usize) -> bool {
    s.len() == len
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}
