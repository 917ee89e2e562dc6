//! Seeded synthetic feed generation with planted clusters.
//!
//! Every cluster fixes an import list and a handful of invariant sections
//! (malicious, standard, one camouflage), then each member file mutates all
//! the non-functional parts: file hashes, section names, virtual sizes and
//! addresses, camouflage copy counts, and padding section counts. The planted
//! assignment is returned as ground truth so clustering results can be scored
//! against a known answer.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feed::{Dataset, IngestStats};
use crate::keys::imphash;
use crate::model::{
    FileReport, FileType, ImportLibrary, ResourceRecord, SectionFlags, SectionRecord,
};

/// Inclusive integer range, serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u64, u64)", into = "(u64, u64)")]
pub struct Span {
    pub min: u64,
    pub max: u64,
}

impl Span {
    pub const fn new(min: u64, max: u64) -> Self {
        Span { min, max }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        rng.random_range(self.min..=self.max)
    }
}

impl From<(u64, u64)> for Span {
    fn from((min, max): (u64, u64)) -> Self {
        Span { min, max }
    }
}

impl From<Span> for (u64, u64) {
    fn from(span: Span) -> Self {
        (span.min, span.max)
    }
}

/// Parameters for one generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub cluster_count: u64,
    pub files_per_cluster: Span,
    pub noise_files: u64,
    /// Fraction of cluster files whose import list is perturbed so they
    /// leave their imphash group while keeping planted section keys.
    pub mutate_imports_fraction: f64,
    #[serde(default = "defaults::sections_per_file")]
    pub sections_per_file: Span,
    #[serde(default = "defaults::camouflage_copies")]
    pub camouflage_copies: Span,
    #[serde(default = "defaults::virtual_size_range")]
    pub virtual_size_range: Span,
    #[serde(default = "defaults::virtual_address_range")]
    pub virtual_address_range: Span,
    #[serde(default = "defaults::vendor_flags_malicious")]
    pub vendor_flags_malicious: Span,
    #[serde(default = "defaults::vendor_flags_benign")]
    pub vendor_flags_benign: Span,
    /// Fraction of each cluster's files sharing one tlsh digest, to give the
    /// TLSH baseline partial success over SHA256.
    #[serde(default)]
    pub tlsh_share_fraction: f64,
    #[serde(default = "defaults::group_id")]
    pub group_id: String,
}

mod defaults {
    use super::Span;

    pub fn sections_per_file() -> Span {
        Span::new(10, 50)
    }
    pub fn camouflage_copies() -> Span {
        Span::new(12, 15)
    }
    pub fn virtual_size_range() -> Span {
        Span::new(0, 3500)
    }
    pub fn virtual_address_range() -> Span {
        Span::new(100_000, 1_600_000)
    }
    pub fn vendor_flags_malicious() -> Span {
        Span::new(20, 40)
    }
    pub fn vendor_flags_benign() -> Span {
        Span::new(0, 3)
    }
    pub fn group_id() -> String {
        "synthetic".to_string()
    }
}

// Largest planted malicious + standard section count per cluster.
const MAX_PLANTED_CODE_SECTIONS: u64 = 4;

impl SyntheticSpec {
    /// Check range and fraction invariants, including feasibility of fitting
    /// planted sections into the per-file section budget.
    pub fn validate(&self) -> Result<()> {
        let spans = [
            ("files_per_cluster", self.files_per_cluster),
            ("sections_per_file", self.sections_per_file),
            ("camouflage_copies", self.camouflage_copies),
            ("virtual_size_range", self.virtual_size_range),
            ("virtual_address_range", self.virtual_address_range),
            ("vendor_flags_malicious", self.vendor_flags_malicious),
            ("vendor_flags_benign", self.vendor_flags_benign),
        ];
        for (name, span) in spans {
            if span.min > span.max {
                return Err(Error::InvalidSpec(format!(
                    "{name} range is empty: {span:?}"
                )));
            }
        }
        for (name, fraction) in [
            ("mutate_imports_fraction", self.mutate_imports_fraction),
            ("tlsh_share_fraction", self.tlsh_share_fraction),
        ] {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidSpec(format!("{name} must be in [0, 1]")));
            }
        }
        if self.vendor_flags_malicious.max > 71 || self.vendor_flags_benign.max > 71 {
            return Err(Error::InvalidSpec("vendor flag ranges exceed 71".into()));
        }
        let planted_max = self.camouflage_copies.max + MAX_PLANTED_CODE_SECTIONS;
        if planted_max > self.sections_per_file.max {
            return Err(Error::InvalidSpec(format!(
                "camouflage_copies max {} plus planted code sections cannot fit in \
                 sections_per_file max {}",
                self.camouflage_copies.max, self.sections_per_file.max
            )));
        }
        Ok(())
    }
}

/// Planted role of every generated file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileTruth {
    /// Planted cluster id, or None for noise files.
    pub cluster: Option<String>,
    /// Whether the file's import list was perturbed away from the cluster's.
    pub imports_mutated: bool,
}

/// Planted invariants of one cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub imphash: String,
    pub malicious_sections: Vec<String>,
    pub standard_sections: Vec<String>,
    pub camouflage_section: String,
}

/// The oracle: who was planted where, and with which invariant keys.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub files: BTreeMap<String, FileTruth>,
    pub clusters: BTreeMap<String, ClusterTruth>,
}

impl GroundTruth {
    /// Ids of all non-noise files.
    pub fn planted_file_ids(&self) -> impl Iterator<Item = &str> {
        self.files
            .iter()
            .filter(|(_, t)| t.cluster.is_some())
            .map(|(id, _)| id.as_str())
    }
}

/// Deterministic unique-hash source: SHA-256 over (seed, stream, counter).
///
/// Distinct streams and counters give distinct digests, so generated file and
/// section hashes never collide across clusters or runs with the same seed.
struct HashMint {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl HashMint {
    fn new(seed: u64, stream: u64) -> Self {
        HashMint {
            seed,
            stream,
            counter: 0,
        }
    }

    fn next_digest(&mut self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.stream.to_le_bytes());
        hasher.update(self.counter.to_le_bytes());
        self.counter += 1;
        let digest = hasher.finalize();
        use std::fmt::Write;
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn hex64(&mut self) -> String {
        self.next_digest()
    }

    fn hex32(&mut self) -> String {
        self.next_digest()[..32].to_string()
    }

    fn tlsh(&mut self) -> String {
        format!("t1{}", &self.next_digest()[..48])
    }
}

struct PlantedSection {
    content_hash: String,
    entropy: f64,
    chi2: f64,
    raw_size: u64,
}

fn random_name(rng: &mut ChaCha8Rng, len: usize) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect()
}

fn random_flags(rng: &mut ChaCha8Rng) -> SectionFlags {
    let choices = ["r", "rw", "rx", "rwx"];
    SectionFlags::parse(choices[rng.random_range(0..choices.len())]).unwrap()
}

fn random_file_type(rng: &mut ChaCha8Rng) -> FileType {
    match rng.random_range(0..4) {
        0 => FileType::Win32Exe,
        1 => FileType::Win32Dll,
        2 => FileType::Win64Exe,
        _ => FileType::Win64Dll,
    }
}

/// Generate a corpus and its ground truth. Same spec, same output, always.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;

    let mut truth = GroundTruth::default();
    let mut reports: Vec<FileReport> = Vec::new();

    // Shared resource pool: resources repeat across unrelated files, which is
    // exactly why they are excluded from clustering.
    let mut pool_mint = HashMint::new(spec.seed, 0);
    let pool_size = (8 + spec.cluster_count).min(64) as usize;
    let resource_pool: Vec<String> = (0..pool_size).map(|_| pool_mint.hex32()).collect();
    let resource_types = ["Data", "ASCII text", "Image/x-png", "Image/gif"];

    for cluster_index in 0..spec.cluster_count {
        let cluster_id = format!("c{cluster_index:03}");
        let stream = 1 + cluster_index;
        let mut rng = sub_rng(spec.seed, stream);
        let mut mint = HashMint::new(spec.seed, stream);

        // The cluster's invariant import list. The extra mint-backed function
        // makes the list structurally unique across clusters and noise.
        let mut imports: Vec<ImportLibrary> = (0..rng.random_range(2..=5))
            .map(|_| ImportLibrary {
                library_name: format!("{}.dll", random_name(&mut rng, 8)),
                functions: (0..rng.random_range(3..=8))
                    .map(|_| format!("Fn{}", random_name(&mut rng, 10)))
                    .collect(),
            })
            .collect();
        imports
            .last_mut()
            .unwrap()
            .functions
            .push(format!("Fn{}", &mint.hex32()[..12]));
        let planted_imphash = imphash(&imports)?.digest;

        let malicious: Vec<PlantedSection> = (0..rng.random_range(1..=2))
            .map(|_| PlantedSection {
                content_hash: mint.hex32(),
                entropy: rng.random_range(5.1..=7.99),
                chi2: rng.random_range(0.0..500_000.0),
                raw_size: rng.random_range(4096..=65_536),
            })
            .collect();
        let standard: Vec<PlantedSection> = (0..rng.random_range(1..=2))
            .map(|_| PlantedSection {
                content_hash: mint.hex32(),
                entropy: rng.random_range(2.0..=4.5),
                chi2: rng.random_range(0.0..500_000.0),
                raw_size: rng.random_range(4096..=65_536),
            })
            .collect();
        let camouflage = PlantedSection {
            content_hash: mint.hex32(),
            entropy: 0.0,
            chi2: rng.random_range(0.0..500_000.0),
            raw_size: rng.random_range(1..4096),
        };
        let shared_tlsh = mint.tlsh();

        truth.clusters.insert(
            cluster_id.clone(),
            ClusterTruth {
                imphash: planted_imphash,
                malicious_sections: malicious.iter().map(|s| s.content_hash.clone()).collect(),
                standard_sections: standard.iter().map(|s| s.content_hash.clone()).collect(),
                camouflage_section: camouflage.content_hash.clone(),
            },
        );

        let file_count = spec.files_per_cluster.draw(&mut rng);
        for file_index in 0..file_count {
            let file_id = format!("{cluster_id}-f{file_index:05}");
            let mutated = rng.random_bool(spec.mutate_imports_fraction);

            let mut file_imports = imports.clone();
            if mutated {
                file_imports
                    .last_mut()
                    .unwrap()
                    .functions
                    .push(format!("Mut{}", &mint.hex32()[..12]));
            }

            let tlsh = if rng.random_bool(spec.tlsh_share_fraction) {
                shared_tlsh.clone()
            } else {
                mint.tlsh()
            };

            let camouflage_copies = spec.camouflage_copies.draw(&mut rng);
            let planted_total = malicious.len() as u64 + standard.len() as u64 + camouflage_copies;
            let target = Span::new(
                spec.sections_per_file.min.max(planted_total),
                spec.sections_per_file.max.max(planted_total),
            )
            .draw(&mut rng);
            let padding = target - planted_total;

            let mut sections: Vec<SectionRecord> = Vec::with_capacity(target as usize);
            let emit = |rng: &mut ChaCha8Rng, planted: &PlantedSection| SectionRecord {
                content_hash: planted.content_hash.clone(),
                name: format!(".{}", random_name(rng, 7)),
                entropy: planted.entropy,
                chi2: planted.chi2,
                raw_size: planted.raw_size,
                virtual_address: spec.virtual_address_range.draw(rng),
                virtual_size: spec.virtual_size_range.draw(rng),
                flags: random_flags(rng),
            };
            for planted in malicious.iter().chain(standard.iter()) {
                sections.push(emit(&mut rng, planted));
            }
            for _ in 0..camouflage_copies {
                sections.push(emit(&mut rng, &camouflage));
            }
            for _ in 0..padding {
                let unique = PlantedSection {
                    content_hash: mint.hex32(),
                    entropy: rng.random_range(0.5..=7.9),
                    chi2: rng.random_range(0.0..500_000.0),
                    raw_size: rng.random_range(100..=50_000),
                };
                sections.push(emit(&mut rng, &unique));
            }
            shuffle(&mut sections, &mut rng);

            reports.push(FileReport {
                file_id: file_id.clone(),
                first_seen: 1_650_000_000 + rng.random_range(0..2_000_000),
                file_type: random_file_type(&mut rng),
                md5: mint.hex32(),
                sha256: mint.hex64(),
                tlsh: Some(tlsh),
                size_bytes: rng.random_range(10_000..=5_000_000),
                vendor_malicious_count: spec.vendor_flags_malicious.draw(&mut rng) as u32,
                imports: file_imports,
                sections,
                resources: draw_resources(&mut rng, &resource_pool, &resource_types),
                group_id: spec.group_id.clone(),
            });
            truth.files.insert(
                file_id,
                FileTruth {
                    cluster: Some(cluster_id.clone()),
                    imports_mutated: mutated,
                },
            );
        }
    }

    // Noise: unique everything, benign flag counts.
    let noise_stream = 1 + spec.cluster_count;
    let mut rng = sub_rng(spec.seed, noise_stream);
    let mut mint = HashMint::new(spec.seed, noise_stream);
    for noise_index in 0..spec.noise_files {
        let file_id = format!("n{noise_index:06}");
        let mut imports: Vec<ImportLibrary> = (0..rng.random_range(1..=4))
            .map(|_| ImportLibrary {
                library_name: format!("{}.dll", random_name(&mut rng, 8)),
                functions: (0..rng.random_range(2..=6))
                    .map(|_| format!("Fn{}", random_name(&mut rng, 10)))
                    .collect(),
            })
            .collect();
        imports
            .last_mut()
            .unwrap()
            .functions
            .push(format!("Fn{}", &mint.hex32()[..12]));

        let section_count = spec.sections_per_file.draw(&mut rng);
        let sections: Vec<SectionRecord> = (0..section_count)
            .map(|_| SectionRecord {
                content_hash: mint.hex32(),
                entropy: rng.random_range(0.5..=7.9),
                chi2: rng.random_range(0.0..500_000.0),
                raw_size: rng.random_range(100..=50_000),
                name: format!(".{}", random_name(&mut rng, 7)),
                virtual_address: spec.virtual_address_range.draw(&mut rng),
                virtual_size: spec.virtual_size_range.draw(&mut rng),
                flags: random_flags(&mut rng),
            })
            .collect();

        reports.push(FileReport {
            file_id: file_id.clone(),
            first_seen: 1_650_000_000 + rng.random_range(0..2_000_000),
            file_type: random_file_type(&mut rng),
            md5: mint.hex32(),
            sha256: mint.hex64(),
            tlsh: Some(mint.tlsh()),
            size_bytes: rng.random_range(10_000..=5_000_000),
            vendor_malicious_count: spec.vendor_flags_benign.draw(&mut rng) as u32,
            imports,
            sections,
            resources: draw_resources(&mut rng, &resource_pool, &resource_types),
            group_id: spec.group_id.clone(),
        });
        truth.files.insert(
            file_id,
            FileTruth {
                cluster: None,
                imports_mutated: false,
            },
        );
    }

    let stats = IngestStats {
        lines_read: reports.len() as u64,
        accepted: reports.len() as u64,
        ..Default::default()
    };
    Ok((
        Dataset {
            reports,
            group_id: spec.group_id.clone(),
            ingest_stats: stats,
        },
        truth,
    ))
}

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// Fisher-Yates; rand's shuffle trait is avoided to keep the draw sequence
// under our explicit control.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

fn draw_resources(rng: &mut ChaCha8Rng, pool: &[String], types: &[&str]) -> Vec<ResourceRecord> {
    (0..rng.random_range(0..=3))
        .map(|_| ResourceRecord {
            content_hash: pool[rng.random_range(0..pool.len())].clone(),
            resource_type: types[rng.random_range(0..types.len())].to_string(),
            entropy: rng.random_range(0.0..8.0),
            chi2: rng.random_range(0.0..100_000.0),
        })
        .collect()
}

/// Read a spec from its JSON file.
pub fn read_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))
}

/// Write the ground-truth sidecar as pretty JSON.
pub fn write_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(truth)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))
}
