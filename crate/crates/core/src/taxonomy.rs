//! Invariant-section taxonomy.
//!
//! Every section gets exactly one label from its entropy and raw size:
//! camouflage padding is zero-entropy and small, malicious payloads sit above
//! the entropy threshold, everything else is standard operational code.

use crate::model::{EvaluationConfig, SectionLabel, SectionRecord};

/// Classify one section. Total over valid sections; flags are ignored.
///
/// Camouflage requires both near-zero entropy and a raw size under the
/// configured ceiling; a zero-entropy section with a large raw size is
/// Standard. The entropy boundary itself is Standard: Malicious starts
/// strictly above it.
pub fn classify(section: &SectionRecord, cfg: &EvaluationConfig) -> SectionLabel {
    if section.entropy <= cfg.camouflage_entropy_eps && section.raw_size < cfg.camouflage_max_raw {
        SectionLabel::Camouflage
    } else if section.entropy > cfg.entropy_malicious {
        SectionLabel::Malicious
    } else {
        SectionLabel::Standard
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SectionFlags;

    fn section(entropy: f64, raw_size: u64) -> SectionRecord {
        SectionRecord {
            content_hash: "0".repeat(32),
            name: ".sect".into(),
            entropy,
            chi2: 10.0,
            raw_size,
            virtual_address: 4096,
            virtual_size: raw_size,
            flags: SectionFlags::parse("r").unwrap(),
        }
    }

    fn label(entropy: f64, raw_size: u64) -> SectionLabel {
        classify(&section(entropy, raw_size), &EvaluationConfig::default())
    }

    #[test]
    fn published_section_rows_reclassify_exactly() {
        // Worm Autospread profile: camouflage rows are small padding, the
        // rest are ordinary-sized code sections.
        let rows = [
            (0.0, 1024, SectionLabel::Camouflage),
            (7.89, 20_000, SectionLabel::Malicious),
            (2.81, 20_000, SectionLabel::Standard),
            (7.91, 20_000, SectionLabel::Malicious),
            (2.79, 20_000, SectionLabel::Standard),
        ];
        for (entropy, raw, expected) in rows {
            assert_eq!(label(entropy, raw), expected, "entropy {entropy}");
        }
    }

    #[test]
    fn spyware_fingerprint_rows_reclassify_exactly() {
        let rows = [
            (0.0, 512, SectionLabel::Camouflage),
            (0.0, 512, SectionLabel::Camouflage),
            (0.0, 2048, SectionLabel::Camouflage),
            (5.14, 20_000, SectionLabel::Malicious),
            (2.78, 20_000, SectionLabel::Standard),
            (4.04, 20_000, SectionLabel::Standard),
            (0.0, 3000, SectionLabel::Camouflage),
            (4.09, 20_000, SectionLabel::Standard),
            (7.82, 20_000, SectionLabel::Malicious),
            (6.67, 20_000, SectionLabel::Malicious),
        ];
        for (entropy, raw, expected) in rows {
            assert_eq!(label(entropy, raw), expected, "entropy {entropy}");
        }
    }

    #[test]
    fn entropy_boundary_is_standard() {
        assert_eq!(label(5.0, 20_000), SectionLabel::Standard);
        assert_eq!(label(5.000000001, 20_000), SectionLabel::Malicious);
    }

    #[test]
    fn camouflage_needs_small_raw_size() {
        assert_eq!(label(0.0, 8192), SectionLabel::Standard);
        assert_eq!(label(0.0, 4096), SectionLabel::Standard); // boundary: < 4096 strictly
        assert_eq!(label(0.0, 4095), SectionLabel::Camouflage);
    }

    #[test]
    fn near_zero_entropy_within_eps_is_camouflage() {
        assert_eq!(label(1e-10, 100), SectionLabel::Camouflage);
        assert_eq!(label(1e-6, 100), SectionLabel::Standard);
    }
}
