//! `htkgh` command-line entry point.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use htkgh::anonymize::{apply_anonymization, build_maps, AnonMode, AnonymizationMap};
use htkgh::baselines::{evaluate_heuristic, CopyOptions, Heuristic};
use htkgh::benchmark::provider::{Constant, EchoGold, FrequencyStub, HttpProvider};
use htkgh::benchmark::{
    build_test_set, parse_response, read_test_set, render_prompt_with, run_benchmark, score_predictions, write_run,
    write_test_set, BenchConfig, Candidates, MatchedBy, Mode, ParsedAnswer, Provider, RenderOptions,
};
use htkgh::export::export_windowed_examples;
use htkgh::factfile::{load_dataset, save_dataset};
use htkgh::ingest::{ingest, ColumnMap, InputFormat};
use htkgh::retrieval::{validate_forecasting, FilterConfig, ForecastingReport, HistoryIndex, RelationQuery};
use htkgh::stats::{compute_stats, emit_stats};
use htkgh::synth::{generate_synthetic, Regime, SynthConfig};
use htkgh::{validate_dataset, Dataset, Timestamp};

const FORMATS: &str = "\
File formats:
  facts      JSON Lines, one fact per line:
             {\"a\":[actor..],\"r\":relation,\"rc\":[recipient..],\"t\":\"YYYY-MM-DD\",\"q\":[[qualifier,value]..]}
  test set   JSON Lines, one query per line with entity/relation ids of the
             fact file it was drawn from (also valid for its anonymized copies):
             {\"qid\":0,\"actors\":[..],\"recipients\":[..],\"qualifiers\":[{\"qrel\":0,\"value\":3}],\"t\":\"YYYY-MM-DD\",\"gold\":2}
  preds      CSV with header qid,label; label is a relation label or ABSTAIN
  map        {\"seed\":..,\"mode\":\"entities|all\",\"countries\":{..},\"relations\":{..}|null}
  stats      stats.csv: #SECTION rows, each followed by name,value rows
  bench      metrics.json and responses.jsonl (one record per query)
  export     examples.jsonl plus entities.tsv, relations.tsv, qualrels.tsv (id<TAB>label)

Exit status: 0 success, 1 invalid data or failed run, 2 usage error.";

#[derive(Parser)]
#[command(name = "htkgh", version, about = "Hyper-relational temporal event graphs: ETL, retrieval, baselines, LLM benchmark", after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a fact file from event records (CSV or JSON Lines).
    Ingest(IngestArgs),
    /// Generate a synthetic fact file.
    Synth(SynthArgs),
    /// Write stats.csv and optional SVG charts.
    Stats(StatsArgs),
    /// Write a country/relation-shuffled copy of a fact file.
    Anonymize(AnonArgs),
    /// Sample a stratified test set.
    Split(SplitArgs),
    /// Run a heuristic forecaster over a test set.
    Baseline(BaselineArgs),
    /// Render prompts for a test set.
    Prompt(PromptArgs),
    /// Run the LLM benchmark against a provider.
    Bench(BenchArgs),
    /// Score a predictions CSV against a test set.
    Eval(EvalArgs),
    /// Export windowed examples for the GNN forecaster.
    ExportGnn(ExportArgs),
    /// Check a fact file (and optionally a test set) for invalid or leaking facts.
    Validate(ValidateArgs),
}

fn parse_filters(s: &str) -> Result<FilterConfig, String> {
    FilterConfig::parse(s)
}

fn parse_date(s: &str) -> Result<Timestamp, String> {
    Timestamp::parse(s).map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err("must be in (0, 1]".into())
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args)]
struct Retrieval {
    /// Filters, any of e (entity), l (location), c (context), comma separated. Omitted means none.
    #[arg(long, value_parser = parse_filters, default_value = "")]
    filters: FilterConfig,
    /// History length.
    #[arg(long, default_value_t = 100)]
    h: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// JSON object overriding column names (keys as in the default ColumnMap).
    #[arg(long)]
    columns: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the build report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum RegimeArg {
    Mixed,
    CopyChain,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    entities: usize,
    #[arg(long, default_value_t = 16)]
    relations: usize,
    #[arg(long, default_value_t = 10_000)]
    facts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mixed")]
    regime: RegimeArg,
    /// Days between occurrences of a copy chain.
    #[arg(long, default_value_t = 7)]
    period: u32,
    #[arg(long)]
    out: PathBuf,
    /// Where to write generator ground truth as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long)]
    plots: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Entities,
    All,
}

#[derive(Args)]
struct AnonArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "entities")]
    mode: ModeArg,
    /// Forbid symbols mapping to themselves.
    #[arg(long)]
    derangement: bool,
    /// Apply an existing map instead of building one.
    #[arg(long, conflicts_with_all = ["seed", "mode", "derangement"])]
    apply_map: Option<PathBuf>,
    /// With --apply-map, apply its inverse.
    #[arg(long, requires = "apply_map")]
    invert: bool,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the map that was used.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_fraction, default_value = "0.01")]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop facts before this day (YYYY-MM-DD).
    #[arg(long, value_parser = parse_date)]
    drop_before: Option<Timestamp>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(Heuristic))]
    heuristic: Heuristic,
    #[command(flatten)]
    retrieval: Retrieval,
    /// Copy also requires equal qualifiers.
    #[arg(long)]
    copy_include_qualifiers: bool,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Render {
    #[arg(long, value_parser = clap::value_parser!(Mode), default_value = "nonthinking")]
    mode: Mode,
    /// Override the mode's default token limit (14 / 16384).
    #[arg(long, value_parser = parse_positive)]
    max_tokens: Option<usize>,
    /// Shuffle candidates per query with this seed instead of id order.
    #[arg(long)]
    shuffle_candidates: Option<u64>,
}

impl Render {
    fn options(&self) -> RenderOptions {
        RenderOptions {
            mode: self.mode,
            max_tokens: self.max_tokens.map(|n| n as u32),
            shuffle_candidates: self.shuffle_candidates,
        }
    }
}

#[derive(Args)]
struct PromptArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    retrieval: Retrieval,
    #[command(flatten)]
    render: Render,
    /// Print this query's prompt text only.
    #[arg(long)]
    qid: Option<u64>,
    /// JSON Lines of prompt instances; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
enum StubArg {
    EchoGold,
    Frequency,
    Constant(String),
}

fn parse_stub(s: &str) -> Result<StubArg, String> {
    match s {
        "echo-gold" => Ok(StubArg::EchoGold),
        "frequency" => Ok(StubArg::Frequency),
        _ => s
            .strip_prefix("constant:")
            .map(|t| StubArg::Constant(t.to_string()))
            .ok_or_else(|| "expected echo-gold, frequency or constant:TEXT".into()),
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    retrieval: Retrieval,
    #[command(flatten)]
    render: Render,
    /// Completion endpoint, POST {prompt,max_tokens} -> {text}.
    #[arg(long, env = "HTKGH_PROVIDER_URL", required_unless_present = "stub")]
    provider_url: Option<String>,
    /// Bearer token for the endpoint.
    #[arg(long, env = "HTKGH_PROVIDER_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Offline provider: echo-gold, frequency or constant:TEXT.
    #[arg(long, value_parser = parse_stub, conflicts_with = "provider_url")]
    stub: Option<StubArg>,
    /// Concurrent requests.
    #[arg(long, value_parser = parse_positive, default_value = "4")]
    workers: usize,
    #[arg(long, default_value_t = 2)]
    retries: u32,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// metrics JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Window length in days.
    #[arg(long, value_parser = parse_positive, default_value = "7")]
    delta: usize,
    /// Number of windows.
    #[arg(long = "windows", value_parser = parse_positive, default_value = "4")]
    count: usize,
    #[arg(long, value_parser = parse_filters, default_value = "")]
    filters: FilterConfig,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Also check that retrieved histories for these queries precede them.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Training fact file that must precede every test query.
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[command(flatten)]
    retrieval: Retrieval,
}

/// Failure that maps to exit status 1 without an `error:` prefix.
#[derive(Debug)]
struct Invalid;

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for Invalid {}

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("reading {}", path.display()))
}

fn load_queries(d: &Dataset, path: &Path) -> Result<Vec<RelationQuery>> {
    let qs = read_test_set(path).with_context(|| format!("reading {}", path.display()))?;
    let v = d.vocab();
    for q in &qs {
        let fact = q.to_fact(0);
        if v.num_relations() <= q.gold.index()
            || fact
                .actors
                .iter()
                .chain(&fact.recipients)
                .chain(fact.qualifiers.iter().map(|p| &p.value))
                .any(|e| e.index() >= v.num_entities())
        {
            bail!("query {} refers to ids missing from the fact file", q.qid);
        }
    }
    Ok(qs)
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let columns: ColumnMap = match &a.columns {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).context("column map")?,
        None => ColumnMap::default(),
    };
    let format = match a.format {
        Format::Csv => InputFormat::Csv,
        Format::Jsonl => InputFormat::Jsonl,
    };
    let input = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let meta = a.input.display().to_string();
    let (d, report) = ingest(BufReader::new(input), format, &columns, &meta)?;
    save_dataset(&d, &a.out)?;
    eprintln!(
        "kept {} facts; {} parse issues, {} unresolvable, {} dropped by integrity filter",
        report.kept,
        report.parse_issues.len(),
        report.unresolvable.len(),
        report.dropped_by_filter
    );
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let regime = match a.regime {
        RegimeArg::Mixed => Regime::Mixed,
        RegimeArg::CopyChain => Regime::CopyChain { period: a.period },
    };
    let cfg = SynthConfig::new(a.entities, a.relations, a.facts, a.seed, regime);
    let (d, truth) = generate_synthetic(&cfg)?;
    save_dataset(&d, &a.out)?;
    if let Some(p) = &a.truth {
        // seq is not preserved by the fact file, so planted queries are
        // reported by line number
        let line_of: HashMap<u64, usize> = d.facts().iter().enumerate().map(|(i, f)| (f.seq, i)).collect();
        let planted: Vec<serde_json::Value> = truth
            .planted_copy
            .iter()
            .map(|pq| serde_json::json!({"line": line_of[&pq.seq], "relation": d.vocab().relation_label(pq.relation)}))
            .collect();
        write_json(
            p,
            &serde_json::json!({
                "config": cfg,
                "edge_types": truth.edge_types,
                "chains": truth.chains,
                "groups": truth.groups,
                "planted_copy": planted,
            }),
        )?;
    }
    eprintln!("wrote {} facts", d.len());
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let d = load(&a.data)?;
    let r = compute_stats(&d, a.top_k);
    for p in emit_stats(&r, &a.out, a.plots)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_anonymize(a: AnonArgs) -> Result<()> {
    let d = load(&a.data)?;
    let m = match &a.apply_map {
        Some(p) => {
            let m = AnonymizationMap::load(p)?;
            if a.invert {
                m.inverse()
            } else {
                m
            }
        }
        None => {
            let mode = match a.mode {
                ModeArg::Entities => AnonMode::Entities,
                ModeArg::All => AnonMode::All,
            };
            build_maps(&d, a.seed, mode, a.derangement)?
        }
    };
    let out = apply_anonymization(&d, &m)?;
    save_dataset(&out, &a.out)?;
    if let Some(p) = &a.map {
        m.save(p)?;
    }
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = build_test_set(&d, a.fraction, a.seed, a.drop_before)?;
    write_test_set(&a.out, &qs)?;
    eprintln!("sampled {} queries", qs.len());
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = load_queries(&d, &a.test)?;
    let opts = CopyOptions {
        include_qualifiers: a.copy_include_qualifiers,
    };
    let run = evaluate_heuristic(&d, &qs, a.heuristic, a.retrieval.filters, a.retrieval.h, opts);
    let mut w = csv::Writer::from_writer(out_writer(a.out.as_deref())?);
    w.write_record(["qid", "label"])?;
    for (q, p) in qs.iter().zip(&run.predictions) {
        let label = p.relation.map_or("ABSTAIN", |r| d.vocab().relation_label(r));
        w.write_record([q.qid.to_string().as_str(), label])?;
    }
    w.flush()?;
    eprintln!(
        "{} filters=[{}] h={}: accuracy {:.4} ({} / {}), {} abstained",
        a.heuristic,
        a.retrieval.filters.spelling(),
        a.retrieval.h,
        run.accuracy(),
        run.correct,
        qs.len(),
        run.abstained
    );
    Ok(())
}

fn cmd_prompt(a: PromptArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = load_queries(&d, &a.test)?;
    let index = HistoryIndex::new(&d);
    let render = |q: &RelationQuery| {
        let hc = index.retrieve(q, a.retrieval.filters, a.retrieval.h);
        render_prompt_with(q, &hc, d.vocab(), a.render.options())
    };
    if let Some(qid) = a.qid {
        let q = qs.iter().find(|q| q.qid == qid).with_context(|| format!("no query with qid {qid}"))?;
        let mut w = out_writer(a.out.as_deref())?;
        writeln!(w, "{}", render(q).text)?;
        w.flush()?;
        return Ok(());
    }
    let mut w = out_writer(a.out.as_deref())?;
    for q in &qs {
        serde_json::to_writer(&mut w, &render(q))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = load_queries(&d, &a.test)?;
    let provider: Box<dyn Provider> = match (&a.stub, &a.provider_url) {
        (Some(StubArg::EchoGold), _) => Box::new(EchoGold {
            gold: qs.iter().map(|q| (q.qid, d.vocab().relation_label(q.gold).to_string())).collect(),
        }),
        (Some(StubArg::Frequency), _) => Box::new(FrequencyStub),
        (Some(StubArg::Constant(t)), _) => Box::new(Constant(t.clone())),
        (None, Some(url)) => Box::new(HttpProvider::new(url.clone(), a.token.clone(), Duration::from_secs(a.timeout_secs))),
        (None, None) => bail!("no provider configured"),
    };
    let cfg = BenchConfig {
        filters: a.retrieval.filters,
        h: a.retrieval.h,
        render: a.render.options(),
        workers: a.workers,
        retries: a.retries,
    };
    let run = run_benchmark(&d, &qs, &cfg, provider.as_ref())?;
    write_run(&run, &a.out)?;
    let m = &run.metrics;
    if m.errored > 0 {
        eprintln!(
            "warning: {} of {} queries got no response and are excluded from accuracy (accuracy over all: {:.4})",
            m.errored, m.total, m.accuracy_all
        );
    }
    eprintln!("accuracy {:.4}, misformatted {:.4} over {} scored queries", m.accuracy, m.misformat_rate, m.scored);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = load_queries(&d, &a.test)?;
    let file = File::open(&a.predictions).with_context(|| format!("opening {}", a.predictions.display()))?;
    let mut rows: HashMap<u64, String> = HashMap::new();
    for rec in csv::Reader::from_reader(BufReader::new(file)).records() {
        let rec = rec?;
        let (Some(qid), Some(label)) = (rec.get(0), rec.get(1)) else {
            bail!("prediction rows need qid,label");
        };
        let qid: u64 = qid.trim().parse().with_context(|| format!("qid {qid:?}"))?;
        if rows.insert(qid, label.to_string()).is_some() {
            bail!("duplicate prediction for qid {qid}");
        }
    }
    let candidates = Candidates::in_id_order(d.vocab());
    let mut preds = Vec::with_capacity(qs.len());
    for q in &qs {
        let label = rows.remove(&q.qid).with_context(|| format!("no prediction for qid {}", q.qid))?;
        preds.push(match d.vocab().relation(&label) {
            Some(r) => ParsedAnswer {
                prediction: Some(r),
                matched_by: MatchedBy::Raw,
            },
            None if label == "ABSTAIN" => ParsedAnswer::MISFORMATTED,
            None => parse_response(&label, &candidates),
        });
    }
    if !rows.is_empty() {
        bail!("{} predictions for qids not in the test set", rows.len());
    }
    let m = score_predictions(&preds, &qs)?;
    let mut w = out_writer(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &m)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let d = load(&a.data)?;
    let qs = load_queries(&d, &a.test)?;
    let files = export_windowed_examples(&d, &qs, a.delta as u32, a.count, a.filters, &a.out)?;
    for p in files {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn report_leaks(r: &ForecastingReport) -> bool {
    for v in &r.violations {
        println!("{}", serde_json::to_string(v).expect("serializable"));
    }
    r.is_clean()
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let d = load(&a.data)?;
    let report = validate_dataset(&d);
    for v in &report.violations {
        println!("{}", serde_json::to_string(v)?);
    }
    let mut ok = report.is_valid();
    eprintln!(
        "{} facts: {} violations, {} warnings",
        d.len(),
        report.violations.len(),
        report.warnings.len()
    );
    if let Some(test) = &a.test {
        let qs = load_queries(&d, test)?;
        let index = HistoryIndex::new(&d);
        let mut leaks = ForecastingReport::default();
        for q in &qs {
            leaks.check_history(&index.retrieve(q, a.retrieval.filters, a.retrieval.h));
        }
        ok &= report_leaks(&leaks);
        if let Some(train) = &a.train {
            ok &= report_leaks(&validate_forecasting(&load(train)?, &qs));
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Invalid.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Anonymize(a) => cmd_anonymize(a),
        Command::Split(a) => cmd_split(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Prompt(a) => cmd_prompt(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
        Command::ExportGnn(a) => cmd_export(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Invalid>() => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
