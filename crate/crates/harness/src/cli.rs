use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qgbench_core::agreement::{aggregate_ratings, kappa_per_criterion, read_ratings, TargetInfo};
use qgbench_core::corpus::{
    parse_line, parse_quads, split, stats, validate, write_split, QuadRecord, Severity, SplitSpec,
};
use qgbench_core::digest::sha256_hex;
use qgbench_core::generation::{
    list_runs, read_run, write_run, GenParams, GenerationAdapter, Generator, HttpAdapter,
    MockAdapter, ResponseCache,
};
use qgbench_core::metrics::{
    evaluate_run, EmbeddingProvider, OneHotEmbeddings, ScoreReport, VectorFileEmbeddings,
};
use qgbench_core::promptkit::{render_instruction, render_segmented, InputStyle, PromptSetting, Side};
use qgbench_core::report::{render_report, typology, ReportInputs, Sections};

use crate::config::Config;
use crate::{service, SCORES_FILE};

pub const MOCK_MODEL: &str = "mock-echo";

#[derive(Debug, Parser)]
#[command(name = "qgbench", version, about = "Benchmark harness for prompt-based question generation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Lines)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Lines,
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    Long,
    Short,
    None,
    All,
}

impl SettingArg {
    fn settings(self) -> Vec<PromptSetting> {
        match self {
            SettingArg::Long => vec![PromptSetting::WithLongPrompt],
            SettingArg::Short => vec![PromptSetting::WithShortPrompt],
            SettingArg::None => vec![PromptSetting::WithoutPrompt],
            SettingArg::All => PromptSetting::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderKind {
    Instruction,
    SegmentedSource,
    SegmentedTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StyleArg {
    Instruction,
    Segmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Section {
    Dataset,
    Typology,
    Automatic,
    Human,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus against the record schema.
    Validate(CorpusArg),
    /// Corpus size, subject counts, mean lengths and leading bigrams.
    Stats {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Seeded train/test split.
    Split {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print model inputs, one per line.
    Render {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long, value_enum, default_value_t = RenderKind::Instruction)]
        kind: RenderKind,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate questions for every record and write run directories.
    Generate(GenerateArgs),
    /// Score a run against the corpus gold questions.
    Score {
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        corpus: CorpusArg,
        /// Precomputed token embeddings for BERTScore.
        #[arg(long, conflicts_with = "one_hot")]
        embeddings: Option<PathBuf>,
        /// Offline BERTScore stand-in using hashed one-hot token vectors.
        #[arg(long)]
        one_hot: bool,
    },
    /// Fleiss' kappa per criterion over a ratings log.
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
    },
    /// Markdown report plus one CSV per table.
    Report(ReportArgs),
    /// Run the rating service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Model id from the config file, or `mock-echo` for the offline mock.
    #[arg(long, default_value = MOCK_MODEL)]
    pub model: String,
    #[arg(long, value_enum, default_value_t = SettingArg::All)]
    pub setting: SettingArg,
    #[arg(long, value_enum, default_value_t = StyleArg::Instruction)]
    pub style: StyleArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Seed of the split the corpus came from, recorded in the manifest.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<PathBuf>,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Section::Dataset, Section::Typology, Section::Automatic, Section::Human])]
    pub sections: Vec<Section>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

/// Rows of string cells with a header.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push<I: IntoIterator<Item = S>, S: ToString>(&mut self, row: I) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    fn write(&self, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
        match format {
            Format::Lines => {
                for row in &self.rows {
                    writeln!(out, "{}", row.join("\t"))?;
                }
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.headers)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
            Format::Md => {
                writeln!(out, "| {} |", self.headers.join(" | "))?;
                writeln!(out, "|{}", "---|".repeat(self.headers.len()))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
                    writeln!(out, "| {} |", cells.join(" | "))?;
                }
            }
        }
        Ok(())
    }
}

fn read_corpus(path: &Path) -> anyhow::Result<Vec<QuadRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_quads(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    let config = load_config(cli.config.as_deref())?;
    let format = cli.format;
    match cli.command {
        Command::Validate(c) => cmd_validate(&c.corpus, format, out),
        Command::Stats { corpus, top } => cmd_stats(&corpus.corpus, top, format, out).map(|_| 0),
        Command::Split { corpus, ratio, seed, out: dir } => {
            cmd_split(&corpus.corpus, ratio, seed, &dir, format, out).map(|_| 0)
        }
        Command::Render { corpus, setting, kind, limit } => {
            cmd_render(&corpus.corpus, setting, kind, limit, format, out).map(|_| 0)
        }
        Command::Generate(args) => cmd_generate(&config, &args, format, out).map(|_| 0),
        Command::Score { run, corpus, embeddings, one_hot } => {
            cmd_score(&run, &corpus.corpus, embeddings.as_deref(), one_hot, format, out).map(|_| 0)
        }
        Command::Kappa { ratings } => cmd_kappa(&ratings, format, out).map(|_| 0),
        Command::Report(args) => cmd_report(&args, format, out).map(|_| 0),
        Command::Serve { port, bind } => {
            let mut server = config.server.clone();
            if let Some(p) = port {
                server.port = p;
            }
            if let Some(b) = bind {
                server.bind = b;
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(&server))?;
            Ok(0)
        }
    }
}

fn cmd_validate(path: &Path, format: Format, out: &mut dyn Write) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table = Table::new(&["line", "id", "severity", "code", "message"]);
    let mut seen: HashMap<String, usize> = HashMap::new();
    let (mut n_records, mut n_errors, mut n_warnings) = (0, 0, 0);
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match parse_line(line, line_no) {
            Ok(r) => r,
            Err(e) => {
                n_errors += 1;
                table.push([line_no.to_string(), String::new(), "Error".into(), "ParseError".into(), e.to_string()]);
                continue;
            }
        };
        n_records += 1;
        if let Some(first) = seen.insert(record.id.clone(), line_no) {
            n_errors += 1;
            table.push([
                line_no.to_string(),
                record.id.clone(),
                "Error".into(),
                "DuplicateId".into(),
                format!("id also used on line {first}"),
            ]);
        }
        for issue in validate(&record) {
            match issue.severity {
                Severity::Error => n_errors += 1,
                Severity::Warning => n_warnings += 1,
            }
            table.push([
                line_no.to_string(),
                record.id.clone(),
                format!("{:?}", issue.severity),
                format!("{:?}", issue.code),
                issue.message,
            ]);
        }
    }
    table.write(format, out)?;
    eprintln!("{n_records} records, {n_errors} errors, {n_warnings} warnings");
    Ok(if n_errors > 0 { 1 } else { 0 })
}

fn cmd_stats(path: &Path, top: usize, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
    let records = read_corpus(path)?;
    let s = stats(&records);
    let mut table = Table::new(&["section", "key", "value"]);
    table.push(["total", "", &s.total.to_string()]);
    for (subject, n) in &s.per_subject {
        table.push(["subject".to_string(), subject.to_string(), n.to_string()]);
    }
    if let Some(m) = &s.mean_words {
        for (k, v) in [
            ("context", m.context),
            ("long_prompt", m.long_prompt),
            ("short_prompt", m.short_prompt),
            ("question", m.question),
        ] {
            table.push(["mean_words", k, &format!("{v:.2}")]);
        }
    }
    for b in s.leading_bigrams.iter().take(top) {
        table.push(["bigram_share_pct", &b.bigram, &format!("{:.2}", b.share)]);
    }
    let questions: Vec<&str> = records.iter().map(|r| r.question.as_str()).collect();
    if let Ok(t) = typology(&questions) {
        for (kind, n) in &t.counts {
            table.push(["question_type".to_string(), kind.to_string(), n.to_string()]);
        }
        table.push(["deep_ratio_pct", "", &format!("{:.2}", t.deep_ratio * 100.0)]);
    }
    table.write(format, out)
}

fn cmd_split(
    path: &Path,
    ratio: f64,
    seed: u64,
    dir: &Path,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let records = parse_quads(bytes.as_slice())?;
    let spec = SplitSpec::new(ratio, seed)?;
    let parts = split(&records, spec)?;
    let manifest = write_split(dir, &bytes, spec, &parts)?;
    let mut table = Table::new(&["key", "value"]);
    table.push(["train", &manifest.train_count.to_string()]);
    table.push(["test", &manifest.test_count.to_string()]);
    table.push(["input_digest", &manifest.input_digest]);
    table.push(["train_file", &manifest.train_file.display().to_string()]);
    table.push(["test_file", &manifest.test_file.display().to_string()]);
    table.write(format, out)
}

fn cmd_render(
    path: &Path,
    setting: SettingArg,
    kind: RenderKind,
    limit: Option<usize>,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let records = read_corpus(path)?;
    let mut table = Table::new(&["id", "setting", "rendered"]);
    for setting in setting.settings() {
        for r in records.iter().take(limit.unwrap_or(usize::MAX)) {
            let input = match kind {
                RenderKind::Instruction => render_instruction(r, setting),
                RenderKind::SegmentedSource => render_segmented(r, setting, Side::Source),
                RenderKind::SegmentedTarget => render_segmented(r, setting, Side::Target),
            };
            table.push([r.id.clone(), setting.slug().to_string(), input.flatten()]);
        }
    }
    if format == Format::Lines {
        for row in &table.rows {
            writeln!(out, "{}", row[2])?;
        }
        return Ok(());
    }
    table.write(format, out)
}

fn build_adapter(config: &Config, model: &str) -> anyhow::Result<Box<dyn GenerationAdapter>> {
    if model == MOCK_MODEL {
        return Ok(Box::new(MockAdapter::default()));
    }
    let Some(m) = config.model(model) else {
        bail!("model `{model}` is not in the config file (known: {})", {
            let ids: Vec<&str> = config.models.iter().map(|m| m.id.as_str()).collect();
            if ids.is_empty() { "none".to_string() } else { ids.join(", ") }
        });
    };
    let timeout = Duration::from_secs(config.generation.timeout_secs);
    Ok(Box::new(HttpAdapter::with_key_from_env(
        m.adapter_config(timeout),
        &config.generation.api_key_env,
    )?))
}

fn cmd_generate(config: &Config, args: &GenerateArgs, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
    let bytes = std::fs::read(&args.corpus.corpus)
        .with_context(|| format!("reading {}", args.corpus.corpus.display()))?;
    let records = parse_quads(bytes.as_slice())?;
    let adapter = build_adapter(config, &args.model)?;
    let params = config
        .model(&args.model)
        .map(|m| m.params())
        .unwrap_or_else(GenParams::chat);
    let cache = match args.cache.as_ref().or(config.generation.cache_dir.as_ref()) {
        Some(dir) => Some(ResponseCache::open(dir.clone())?),
        None => None,
    };
    let mut generator = Generator::new(adapter.as_ref());
    if let Some(cache) = &cache {
        generator = generator.with_cache(cache);
    }
    let style = match args.style {
        StyleArg::Instruction => InputStyle::Instruction,
        StyleArg::Segmented => InputStyle::Segmented,
    };
    let parallelism = args.parallelism.unwrap_or(config.generation.parallelism);
    let digest = sha256_hex(&bytes);
    let mut table = Table::new(&["run_id", "setting", "n_results", "n_ok", "dir"]);
    for setting in args.setting.settings() {
        let run = generator.run_batch(&records, setting, style, &params, parallelism)?;
        let manifest = write_run(&run, &args.out, Some(digest.clone()), args.split_seed)?;
        table.push([
            manifest.run_id.clone(),
            setting.slug().to_string(),
            manifest.n_results.to_string(),
            manifest.n_ok.to_string(),
            args.out.join(&manifest.run_id).display().to_string(),
        ]);
    }
    table.write(format, out)
}

fn gold_map(records: &[QuadRecord]) -> HashMap<String, String> {
    records.iter().map(|r| (r.id.clone(), r.question.clone())).collect()
}

fn cmd_score(
    run_dir: &Path,
    corpus: &Path,
    embeddings: Option<&Path>,
    one_hot: bool,
    format: Format,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let (_, run) = read_run(run_dir)?;
    let records = read_corpus(corpus)?;
    let provider: Option<Box<dyn EmbeddingProvider>> = match (embeddings, one_hot) {
        (Some(p), _) => Some(Box::new(VectorFileEmbeddings::open(p)?)),
        (None, true) => Some(Box::new(OneHotEmbeddings::default())),
        (None, false) => None,
    };
    let report = evaluate_run(&run, &gold_map(&records), provider.as_deref())?;
    std::fs::write(run_dir.join(SCORES_FILE), serde_json::to_vec_pretty(&report)?)?;
    report.write_ndjson(std::io::BufWriter::new(File::create(run_dir.join("scores.ndjson"))?))?;
    let m = &report.corpus_means;
    let mut table = Table::new(&["metric", "value"]);
    for (k, v) in [
        ("rouge2_p", m.rouge2.precision),
        ("rouge2_r", m.rouge2.recall),
        ("rouge2_f1", m.rouge2.f1),
        ("rougel_p", m.rouge_l.precision),
        ("rougel_r", m.rouge_l.recall),
        ("rougel_f1", m.rouge_l.f1),
        ("meteor", m.meteor),
        ("chrf", m.chrf),
        ("bleu", m.bleu),
        ("corpus_bleu", report.corpus_bleu),
    ] {
        table.push([k.to_string(), format!("{v:.6}")]);
    }
    if let Some(b) = m.bertscore {
        table.push(["bertscore_f1".to_string(), format!("{:.6}", b.f1)]);
    }
    table.push(["n_scored".to_string(), report.n_scored.to_string()]);
    table.push(["n_failed".to_string(), report.n_failed.to_string()]);
    table.write(format, out)
}

fn load_ratings(path: &Path) -> anyhow::Result<Vec<qgbench_core::agreement::RatingRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_ratings(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn cmd_kappa(path: &Path, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
    let ratings = load_ratings(path)?;
    let report = kappa_per_criterion(&ratings)?;
    let mut table = Table::new(&["criterion", "kappa"]);
    for (c, k) in &report.kappa {
        table.push([c.to_string(), format!("{k:.6}")]);
    }
    table.write(format, out)?;
    eprintln!("{} items, {} raters", report.n_items, report.n_raters);
    Ok(())
}

fn cmd_report(args: &ReportArgs, format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
    let want = |s: Section| args.sections.contains(&s);
    let records = args.corpus.as_deref().map(read_corpus).transpose()?;
    let dataset_stats = match &records {
        Some(r) if want(Section::Dataset) => Some(stats(r)),
        _ => None,
    };
    let typology_summary = match &records {
        Some(r) if want(Section::Typology) => {
            let questions: Vec<&str> = r.iter().map(|q| q.question.as_str()).collect();
            typology(&questions).ok()
        }
        _ => None,
    };

    let runs = match &args.runs {
        Some(dir) => list_runs(dir)?,
        None => Vec::new(),
    };
    let mut scores: Vec<ScoreReport> = Vec::new();
    if want(Section::Automatic) {
        for (manifest, run) in &runs {
            let stored = args.runs.as_ref().map(|d| d.join(&manifest.run_id).join(SCORES_FILE));
            match stored.filter(|p| p.is_file()) {
                Some(p) => scores.push(serde_json::from_slice(&std::fs::read(&p)?)?),
                None => match &records {
                    Some(r) => scores.push(evaluate_run(run, &gold_map(r), None)?),
                    None => bail!("run `{}` has no stored scores; pass --corpus to score it", manifest.run_id),
                },
            }
        }
    }

    let (mut agreement, mut ratings_table) = (None, None);
    if want(Section::Human) {
        if let Some(path) = &args.ratings {
            let ratings = load_ratings(path)?;
            let targets: HashMap<String, TargetInfo> = runs
                .iter()
                .flat_map(|(_, run)| {
                    run.results.iter().map(move |r| {
                        (
                            run.target_id(&r.record_id),
                            TargetInfo { model_id: run.model_id.clone(), setting: run.setting },
                        )
                    })
                })
                .collect();
            ratings_table = Some(aggregate_ratings(&ratings, &targets));
            agreement = match kappa_per_criterion(&ratings) {
                Ok(a) => Some(a),
                Err(e) => {
                    eprintln!("agreement not reported: {e}");
                    None
                }
            };
        }
    }

    let rendered = render_report(&ReportInputs {
        stats: dataset_stats.as_ref(),
        typology: typology_summary.as_ref(),
        scores: &scores,
        agreement: agreement.as_ref(),
        ratings: ratings_table.as_ref(),
        top_bigrams: args.top,
        sections: Sections {
            automatic: want(Section::Automatic),
            human: want(Section::Human),
        },
    })?;
    std::fs::create_dir_all(&args.out)?;
    let mut table = Table::new(&["file"]);
    let md_path = args.out.join("report.md");
    std::fs::write(&md_path, &rendered.markdown)?;
    table.push([md_path.display().to_string()]);
    for (name, body) in &rendered.csv {
        let p = args.out.join(name);
        std::fs::write(&p, body)?;
        table.push([p.display().to_string()]);
    }
    table.write(format, out)
}
