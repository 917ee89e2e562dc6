//! Command-line driver and report emitters.
//!
//! Every emitter is byte-deterministic for fixed inputs and config: sorted
//! keys, fixed column order, `\n` line endings, one-decimal percentages.
//! Exit codes are a stable contract: 0 success, 2 usage/config error,
//! 3 empty input, 4 i/o error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use refit_core::cluster::{bottom_up, select, top_down, Method, Qualification};
use refit_core::evaluation::{
    comparison_table, prevalence, summarize, ComparisonRow, EvaluationSummary, PrevalenceReport,
};
use refit_core::feed::{ingest, write_jsonl, Dataset};
use refit_core::model::EvaluationConfig;
use refit_core::synth::{generate, read_spec, write_ground_truth};

/// Error carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, spec, or method/qualification mismatch (exit 2).
    Usage(String),
    /// Input contained no accepted reports (exit 3).
    EmptyInput(String),
    /// Filesystem failure (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::EmptyInput(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::EmptyInput(msg) | CliError::Io(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl From<refit_core::Error> for CliError {
    fn from(error: refit_core::Error) -> Self {
        match error {
            refit_core::Error::Io { .. } => CliError::Io(error.to_string()),
            _ => CliError::Usage(error.to_string()),
        }
    }
}

pub type CliResult = Result<(), CliError>;

/// Report serialization format for the tabular commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    #[value(name = "top-down")]
    TopDown,
    #[value(name = "bottom-up")]
    BottomUp,
}

impl MethodArg {
    fn run(
        self,
        dataset: &Dataset,
        cfg: &EvaluationConfig,
    ) -> Vec<refit_core::cluster::ResilientFingerprint> {
        match self {
            MethodArg::TopDown => top_down(dataset, cfg),
            MethodArg::BottomUp => bottom_up(dataset, cfg),
        }
    }

    fn method(self) -> Method {
        match self {
            MethodArg::TopDown => Method::TopDown,
            MethodArg::BottomUp => Method::BottomUp,
        }
    }
}

/// Optional JSON config file; command-line flags override these values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threshold: Option<u32>,
    pub min_cluster: Option<usize>,
    pub top_sections: Option<usize>,
    pub min_report_size: Option<u64>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub group_id: Option<String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "refit",
    about = "Cluster PE file reports into resilient fingerprints and evaluate them",
    version
)]
pub struct Cli {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Smallest group of files that forms a fingerprint.
    #[arg(long)]
    pub min_cluster: Option<usize>,

    /// Section profiles retained per fingerprint.
    #[arg(long)]
    pub top_sections: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus plus its ground-truth sidecar.
    Generate {
        /// Synthetic spec (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Output dataset path (JSON lines); the ground truth lands next to
        /// it with a .truth.json extension.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a feed file, reporting ingest counters.
    IngestCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-feature exact-key redundancy over a feed file.
    Prevalence {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Build resilient fingerprints and emit one JSON record per fingerprint.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Qualification filter (e.g. il-cs-or-ms, cs, ms); default keeps all.
        #[arg(long)]
        qualify: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only report fingerprints with at least this many files.
        #[arg(long)]
        min_report: Option<u64>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Score one qualification combination against vendor-label ground truth.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        qualify: String,
        /// Vendor threshold t.
        #[arg(long)]
        threshold: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Compare both methods at their best combinations against SHA256/TLSH.
    Compare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

/// Run one parsed command.
pub fn run(cli: Cli) -> CliResult {
    let file_config = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { input, out, seed } => cmd_generate(&file_config, &input, &out, seed),
        Command::IngestCheck { input, out } => {
            cmd_ingest_check(&file_config, &input, out.as_deref())
        }
        Command::Prevalence { input, out, format } => {
            cmd_prevalence(&file_config, &input, out.as_deref(), format)
        }
        Command::Cluster {
            input,
            method,
            qualify,
            out,
            min_report,
            engine,
        } => cmd_cluster(
            &file_config,
            &input,
            method,
            qualify.as_deref(),
            out.as_deref(),
            min_report,
            &engine,
        ),
        Command::Evaluate {
            input,
            method,
            qualify,
            threshold,
            out,
            format,
            engine,
        } => cmd_evaluate(
            &file_config,
            &input,
            method,
            &qualify,
            threshold,
            out.as_deref(),
            format,
            &engine,
        ),
        Command::Compare {
            input,
            threshold,
            out,
            format,
            engine,
        } => cmd_compare(
            &file_config,
            &input,
            threshold,
            out.as_deref(),
            format,
            &engine,
        ),
    }
}

fn resolve_engine(
    file_config: &FileConfig,
    engine: &EngineArgs,
    threshold: Option<u32>,
) -> Result<EvaluationConfig, CliError> {
    let mut cfg = EvaluationConfig::default();
    if let Some(t) = threshold.or(file_config.threshold) {
        cfg.vendor_threshold = t;
    }
    if let Some(m) = engine.min_cluster.or(file_config.min_cluster) {
        cfg.min_cluster_size = m;
    }
    if let Some(t) = engine.top_sections.or(file_config.top_sections) {
        cfg.top_sections = t;
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn resolve_format(file_config: &FileConfig, flag: Option<Format>) -> Format {
    flag.or(file_config.format).unwrap_or(Format::Csv)
}

/// Group tag defaults to the input file stem.
fn group_of(file_config: &FileConfig, input: &Path) -> String {
    file_config.group_id.clone().unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "default".to_string())
    })
}

fn load_dataset(file_config: &FileConfig, input: &Path) -> Result<Dataset, CliError> {
    let dataset = ingest(input, &group_of(file_config, input), true)?;
    if dataset.is_empty() {
        return Err(CliError::EmptyInput(format!(
            "no reports accepted from {} ({:?})",
            input.display(),
            dataset.ingest_stats
        )));
    }
    Ok(dataset)
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Sidecar path for the ground truth: the dataset path with a
/// `.truth.json` extension.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

fn cmd_generate(
    file_config: &FileConfig,
    input: &Path,
    out: &Path,
    seed: Option<u64>,
) -> CliResult {
    let mut spec = read_spec(input)?;
    if let Some(seed) = seed.or(file_config.seed) {
        spec.seed = seed;
    }
    let (dataset, truth) = generate(&spec)?;
    write_jsonl(&dataset, out)?;
    write_ground_truth(&truth, &truth_path(out))?;
    eprintln!(
        "generated {} reports ({} clusters, {} noise files) -> {}",
        dataset.len(),
        truth.clusters.len(),
        dataset.len() - truth.planted_file_ids().count(),
        out.display()
    );
    Ok(())
}

fn cmd_ingest_check(file_config: &FileConfig, input: &Path, out: Option<&Path>) -> CliResult {
    let dataset = ingest(input, &group_of(file_config, input), true)?;
    if dataset.is_empty() {
        eprintln!("warning: no reports accepted from {}", input.display());
    }
    let mut content =
        serde_json::to_string(&dataset.ingest_stats).map_err(|e| CliError::Io(e.to_string()))?;
    content.push('\n');
    write_output(out, &content)
}

fn emit_prevalence(report: &PrevalenceReport, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("feature,population,redundancy,redundancy_pct\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{:.1}\n",
                    row.feature, row.population, row.redundancy, row.redundancy_pct
                ));
            }
            out
        }
        Format::Json => report
            .rows
            .iter()
            .map(|row| serde_json::to_string(row).expect("serializable row"))
            .fold(String::new(), |mut acc, line| {
                acc.push_str(&line);
                acc.push('\n');
                acc
            }),
    }
}

fn cmd_prevalence(
    file_config: &FileConfig,
    input: &Path,
    out: Option<&Path>,
    format: Option<Format>,
) -> CliResult {
    let dataset = load_dataset(file_config, input)?;
    let report = prevalence(&dataset);
    write_output(
        out,
        &emit_prevalence(&report, resolve_format(file_config, format)),
    )
}

fn cmd_cluster(
    file_config: &FileConfig,
    input: &Path,
    method: MethodArg,
    qualify: Option<&str>,
    out: Option<&Path>,
    min_report: Option<u64>,
    engine: &EngineArgs,
) -> CliResult {
    let cfg = resolve_engine(file_config, engine, None)?;
    let min_report = min_report.or(file_config.min_report_size).unwrap_or(1);
    // usage errors win over empty-input errors, so vet the qualification
    // before touching the feed
    let qualification = qualify
        .map(|name| {
            let qualification: Qualification = name.parse()?;
            if qualification.required_method() != method.method() {
                return Err(CliError::Usage(format!(
                    "qualification {qualification} does not apply to {} fingerprints",
                    method.method()
                )));
            }
            Ok(qualification)
        })
        .transpose()?;
    let dataset = load_dataset(file_config, input)?;

    let fingerprints = method.run(&dataset, &cfg);
    let selected: Vec<&refit_core::cluster::ResilientFingerprint> = match qualification {
        Some(qualification) => select(&fingerprints, qualification)?,
        None => fingerprints.iter().collect(),
    };

    let mut content = String::new();
    let mut reported = 0usize;
    for fp in &selected {
        if fp.redundancy() >= min_report {
            content.push_str(&serde_json::to_string(fp).expect("serializable fingerprint"));
            content.push('\n');
            reported += 1;
        }
    }
    if reported == 0 {
        eprintln!("warning: no fingerprints to report");
    }
    write_output(out, &content)
}

fn emit_summary(summary: &EvaluationSummary, format: Format) -> String {
    match format {
        Format::Csv => format!(
            "qualification,fingerprints,fp_num,fp_acc,fp_redundancy,partial_num,full_num,tp_acc,tp_redundancy\n\
             {},{},{},{:.1},{},{},{},{:.1},{}\n",
            summary.qualification,
            summary.fingerprint_count,
            summary.fp_count,
            summary.fp_accuracy_pct,
            summary.fp_redundancy,
            summary.partial_count,
            summary.full_count,
            summary.tp_accuracy_pct,
            summary.tp_redundancy,
        ),
        Format::Json => {
            let mut line = serde_json::to_string(summary).expect("serializable summary");
            line.push('\n');
            line
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    file_config: &FileConfig,
    input: &Path,
    method: MethodArg,
    qualify: &str,
    threshold: Option<u32>,
    out: Option<&Path>,
    format: Option<Format>,
    engine: &EngineArgs,
) -> CliResult {
    let cfg = resolve_engine(file_config, engine, threshold)?;
    let qualification: Qualification = qualify.parse()?;
    if qualification.required_method() != method.method() {
        return Err(CliError::Usage(format!(
            "qualification {qualification} does not apply to {} fingerprints",
            method.method()
        )));
    }
    let dataset = load_dataset(file_config, input)?;
    let fingerprints = method.run(&dataset, &cfg);
    let selected = select(&fingerprints, qualification)?;
    if selected.is_empty() {
        eprintln!("warning: no fingerprints selected by {qualification}");
    }
    let summary = summarize(&selected, qualification, cfg.vendor_threshold);
    write_output(
        out,
        &emit_summary(&summary, resolve_format(file_config, format)),
    )
}

fn emit_comparison(rows: &[ComparisonRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("technique,files,accuracy_pct\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{:.1}\n",
                    row.technique, row.files_identified, row.accuracy_pct
                ));
            }
            out
        }
        Format::Json => rows
            .iter()
            .map(|row| serde_json::to_string(row).expect("serializable row"))
            .fold(String::new(), |mut acc, line| {
                acc.push_str(&line);
                acc.push('\n');
                acc
            }),
    }
}

fn cmd_compare(
    file_config: &FileConfig,
    input: &Path,
    threshold: Option<u32>,
    out: Option<&Path>,
    format: Option<Format>,
    engine: &EngineArgs,
) -> CliResult {
    let cfg = resolve_engine(file_config, engine, threshold)?;
    let dataset = load_dataset(file_config, input)?;

    let td_fingerprints = top_down(&dataset, &cfg);
    let td_selected = select(&td_fingerprints, Qualification::IlCsOrMs)?;
    let td_summary = summarize(&td_selected, Qualification::IlCsOrMs, cfg.vendor_threshold);

    let bu_fingerprints = bottom_up(&dataset, &cfg);
    let bu_selected = select(&bu_fingerprints, Qualification::CsOrMs)?;
    let bu_summary = summarize(&bu_selected, Qualification::CsOrMs, cfg.vendor_threshold);

    let rows = comparison_table(&dataset, &td_summary, &bu_summary);
    write_output(
        out,
        &emit_comparison(&rows, resolve_format(file_config, format)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use refit_core::evaluation::{accuracy_from_redundancy, PrevalenceRow, Technique};

    fn summary(fp_red: u64, tp_red: u64) -> EvaluationSummary {
        let (fp_accuracy_pct, tp_accuracy_pct) = accuracy_from_redundancy(fp_red, tp_red);
        EvaluationSummary {
            qualification: Qualification::IlRs,
            fingerprint_count: 560,
            fp_count: 51,
            fp_accuracy_pct,
            fp_redundancy: fp_red,
            partial_count: 158,
            full_count: 351,
            tp_accuracy_pct,
            tp_redundancy: tp_red,
            empty_result: false,
        }
    }

    #[test]
    fn summary_csv_row_layout() {
        let text = emit_summary(&summary(40_034, 544_613), Format::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "qualification,fingerprints,fp_num,fp_acc,fp_redundancy,partial_num,full_num,tp_acc,tp_redundancy"
        );
        // tp side prints 93.2: 93.15% rounds up at table precision
        assert_eq!(lines[1], "ILRS,560,51,6.8,40034,158,351,93.2,544613");
    }

    #[test]
    fn prevalence_csv_row_layout() {
        let report = PrevalenceReport {
            rows: vec![PrevalenceRow {
                feature: refit_core::evaluation::Feature::Sha256,
                population: 100,
                redundancy: 16,
                redundancy_pct: 16.0,
            }],
        };
        let text = emit_prevalence(&report, Format::Csv);
        assert_eq!(
            text,
            "feature,population,redundancy,redundancy_pct\nSHA256,100,16,16.0\n"
        );
    }

    #[test]
    fn comparison_csv_row_layout() {
        let rows = vec![ComparisonRow {
            technique: Technique::Sha256,
            files_identified: 172_102,
            accuracy_pct: 16.2,
        }];
        assert_eq!(
            emit_comparison(&rows, Format::Csv),
            "technique,files,accuracy_pct\nSHA256,172102,16.2\n"
        );
    }

    #[test]
    fn json_lines_end_with_newline() {
        let text = emit_summary(&summary(0, 10), Format::Json);
        assert!(text.ends_with('\n'));
        let parsed: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(parsed["tp_accuracy_pct"], 100.0);
    }

    #[test]
    fn truth_sidecar_path_replaces_extension() {
        assert_eq!(
            truth_path(Path::new("/tmp/corpus.jsonl")),
            Path::new("/tmp/corpus.truth.json")
        );
        assert_eq!(
            truth_path(Path::new("corpus")),
            Path::new("corpus.truth.json")
        );
    }
}
