//! End-to-end oracle tests: generated corpora with planted ground truth,
//! scored against the planted assignment rather than against the pipeline's
//! own output.

use std::collections::{BTreeSet, HashSet};

use refit_core::cluster::{bottom_up, select, top_down, Qualification};
use refit_core::evaluation::{prevalence, summarize, Feature};
use refit_core::feed::ingest;
use refit_core::keys::{baseline_row, KeySelector};
use refit_core::model::EvaluationConfig;
use refit_core::synth::{generate, GroundTruth, Span, SyntheticSpec};

fn spec(seed: u64, clusters: u64, files: u64, noise: u64, mutate: f64) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        cluster_count: clusters,
        files_per_cluster: Span::new(files, files),
        noise_files: noise,
        mutate_imports_fraction: mutate,
        sections_per_file: Span::new(18, 26),
        camouflage_copies: Span::new(12, 15),
        virtual_size_range: Span::new(0, 3500),
        virtual_address_range: Span::new(100_000, 1_600_000),
        vendor_flags_malicious: Span::new(20, 40),
        vendor_flags_benign: Span::new(0, 3),
        tlsh_share_fraction: 0.0,
        group_id: "synthetic".into(),
    }
}

/// Oracle grouping: planted cluster id -> member file ids.
fn planted_partition(truth: &GroundTruth) -> Vec<BTreeSet<String>> {
    let mut by_cluster: std::collections::BTreeMap<&str, BTreeSet<String>> = Default::default();
    for (file_id, file_truth) in &truth.files {
        if let Some(cluster) = file_truth.cluster.as_deref() {
            by_cluster
                .entry(cluster)
                .or_default()
                .insert(file_id.clone());
        }
    }
    by_cluster.into_values().collect()
}

#[test]
fn top_down_recovers_untouched_planted_partition_exactly() {
    let (dataset, truth) = generate(&spec(11, 6, 9, 40, 0.0)).unwrap();
    let fingerprints = top_down(&dataset, &EvaluationConfig::default());

    let predicted: BTreeSet<BTreeSet<String>> =
        fingerprints.iter().map(|fp| fp.file_ids.clone()).collect();
    let planted: BTreeSet<BTreeSet<String>> = planted_partition(&truth).into_iter().collect();
    assert_eq!(predicted, planted);
    assert_eq!(fingerprints.len(), 6);
}

#[test]
fn mutation_splits_top_down_but_not_bottom_up() {
    let (dataset, truth) = generate(&spec(23, 5, 20, 30, 0.3)).unwrap();
    let cfg = EvaluationConfig::default();

    // Oracle: which planted files should Top-Down still reach? Exactly the
    // unmutated ones, in clusters keeping at least two unmutated members.
    let mut unmutated_per_cluster: std::collections::HashMap<&str, Vec<&str>> = Default::default();
    for (file_id, file_truth) in &truth.files {
        if let (Some(cluster), false) = (file_truth.cluster.as_deref(), file_truth.imports_mutated)
        {
            unmutated_per_cluster
                .entry(cluster)
                .or_default()
                .push(file_id);
        }
    }
    let expected_td: BTreeSet<&str> = unmutated_per_cluster
        .values()
        .filter(|members| members.len() >= cfg.min_cluster_size)
        .flatten()
        .copied()
        .collect();
    // the draw at 30% must actually have mutated something for this test to bite
    let planted_total = truth.planted_file_ids().count();
    assert!(expected_td.len() < planted_total);

    let td = top_down(&dataset, &cfg);
    let covered_td: BTreeSet<&str> = td
        .iter()
        .flat_map(|fp| fp.file_ids.iter().map(String::as_str))
        .collect();
    assert_eq!(covered_td, expected_td);

    // Bottom-Up via camouflage-or-malicious anchors reaches every planted
    // file regardless of import mutation, and no noise files.
    let bu = bottom_up(&dataset, &cfg);
    let selected = select(&bu, Qualification::CsOrMs).unwrap();
    let covered_bu: BTreeSet<&str> = selected
        .iter()
        .flat_map(|fp| fp.file_ids.iter().map(String::as_str))
        .collect();
    let planted: BTreeSet<&str> = truth.planted_file_ids().collect();
    assert_eq!(covered_bu, planted);

    // and its anchor keys are exactly the planted camouflage and malicious
    // section hashes (padding and noise sections never recur)
    let anchors: BTreeSet<&str> = selected.iter().map(|fp| fp.key.as_str()).collect();
    let planted_keys: BTreeSet<&str> = truth
        .clusters
        .values()
        .flat_map(|c| {
            c.malicious_sections
                .iter()
                .map(String::as_str)
                .chain(std::iter::once(c.camouflage_section.as_str()))
        })
        .collect();
    assert_eq!(anchors, planted_keys);
}

#[test]
fn sha256_baseline_is_blind_to_generated_variants() {
    let (dataset, _) = generate(&spec(31, 4, 10, 20, 0.0)).unwrap();
    let row = baseline_row(&dataset, KeySelector::Sha256);
    assert_eq!(row.files_identified, 0);
    assert_eq!(row.accuracy_pct, 0.0);
}

#[test]
fn prevalence_matches_direct_counts_and_orders_features() {
    let (dataset, _) = generate(&spec(47, 4, 12, 25, 0.0)).unwrap();
    let report = prevalence(&dataset);

    // Direct-count oracle over the generated corpus.
    let total_sections: u64 = dataset
        .reports
        .iter()
        .map(|r| r.sections.len() as u64)
        .sum();
    let distinct_sections: HashSet<&str> = dataset
        .reports
        .iter()
        .flat_map(|r| r.sections.iter().map(|s| s.content_hash.as_str()))
        .collect();
    let expected_section_red = total_sections - distinct_sections.len() as u64;

    let sections = report
        .rows
        .iter()
        .find(|r| r.feature == Feature::Sections)
        .unwrap();
    assert_eq!(sections.population, total_sections);
    assert_eq!(sections.redundancy, expected_section_red);

    let sha = report
        .rows
        .iter()
        .find(|r| r.feature == Feature::Sha256)
        .unwrap();
    assert_eq!(sha.redundancy, 0);
    // camouflage copies alone guarantee heavy section-level redundancy
    assert!(sections.redundancy_pct > sha.redundancy_pct);
}

#[test]
fn summaries_on_planted_corpus_are_fully_malicious() {
    let (dataset, _) = generate(&spec(59, 5, 8, 50, 0.0)).unwrap();
    let cfg = EvaluationConfig::default();

    let td = top_down(&dataset, &cfg);
    let selected = select(&td, Qualification::IlCsOrMs).unwrap();
    let summary = summarize(&selected, Qualification::IlCsOrMs, cfg.vendor_threshold);
    // cluster files draw 20..40 vendor flags, all above t=4
    assert_eq!(summary.fp_count, 0);
    assert_eq!(summary.full_count, summary.fingerprint_count);
    assert_eq!(summary.tp_accuracy_pct, 100.0);
    assert_eq!(summary.tp_redundancy, 5 * 8);
}

#[test]
fn written_corpus_ingests_back_identically() {
    let (dataset, _) = generate(&spec(71, 3, 6, 10, 0.2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    refit_core::feed::write_jsonl(&dataset, &path).unwrap();

    let ingested = ingest(&path, "synthetic", true).unwrap();
    assert_eq!(ingested.reports, dataset.reports);
    assert_eq!(ingested.ingest_stats.accepted as usize, dataset.len());
    assert_eq!(ingested.ingest_stats.skipped_malformed, 0);

    // clustering the re-ingested corpus gives identical fingerprints
    let cfg = EvaluationConfig::default();
    assert_eq!(top_down(&ingested, &cfg), top_down(&dataset, &cfg));
    assert_eq!(bottom_up(&ingested, &cfg), bottom_up(&dataset, &cfg));
}

#[test]
fn inclusion_exclusion_holds_on_generated_corpora() {
    for seed in [5, 17, 29] {
        let (dataset, _) = generate(&spec(seed, 6, 10, 30, 0.4)).unwrap();
        let td = top_down(&dataset, &EvaluationConfig::default());
        let cs = select(&td, Qualification::IlCs).unwrap();
        let ms = select(&td, Qualification::IlMs).unwrap();
        let both = select(&td, Qualification::IlCsMs).unwrap();
        let either = select(&td, Qualification::IlCsOrMs).unwrap();
        assert_eq!(either.len(), cs.len() + ms.len() - both.len());

        let union: HashSet<&str> = cs
            .iter()
            .chain(ms.iter())
            .map(|fp| fp.key.as_str())
            .collect();
        let either_keys: HashSet<&str> = either.iter().map(|fp| fp.key.as_str()).collect();
        assert_eq!(either_keys, union);
    }
}

#[test]
fn cs_or_ms_redundancy_is_additive() {
    let (dataset, _) = generate(&spec(83, 5, 10, 20, 0.2)).unwrap();
    let bu = bottom_up(&dataset, &EvaluationConfig::default());
    let cs: u64 = select(&bu, Qualification::Cs)
        .unwrap()
        .iter()
        .map(|fp| fp.redundancy())
        .sum();
    let ms: u64 = select(&bu, Qualification::Ms)
        .unwrap()
        .iter()
        .map(|fp| fp.redundancy())
        .sum();
    let or: u64 = select(&bu, Qualification::CsOrMs)
        .unwrap()
        .iter()
        .map(|fp| fp.redundancy())
        .sum();
    assert_eq!(or, cs + ms);
}
