mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mcqforge_core::augment::{run_pipeline_files, sample_for_review, PipelineError};
use mcqforge_core::eval::{
    compare_models, evaluate_model, read_responses, score_responses, EvalError, EvalRecord, EvalReport,
    EvalSettings,
};
use mcqforge_core::gateway::{Gateway, GatewayError};
use mcqforge_core::jsonl::{self, JsonlError};
use mcqforge_core::model::{self, SourceTag};
use mcqforge_core::prompt::emit_train_jsonl;
use mcqforge_core::split::stratified_split;
use mcqforge_core::tokens::ApproxTokenCounter;
use serde_json::Value;

use config::{parse_override, ConfigError, Settings};

#[derive(Parser)]
#[command(name = "mcqforge", version, about = "Build and score Arabic cultural MCQ benchmarks")]
struct Cli {
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set llm.parallelism=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw QA records, assign missing ids and write canonical qa.jsonl.
    Ingest(IngestArgs),
    /// Turn QA pairs into MCQ items through the LLM stages.
    Augment(AugmentArgs),
    /// Country-stratified two-way split of a JSONL dataset.
    Split(SplitArgs),
    /// Render MCQ items as fine-tuning examples.
    EmitTrain(EmitTrainArgs),
    /// Zero-shot evaluation of one model on one MCQ dataset.
    Evaluate(EvaluateArgs),
    /// Combine evaluation summaries into a model-by-dataset table.
    Report(ReportArgs),
    /// Export a seeded sample of MCQ items for manual review.
    ReviewSample(ReviewArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Source tag for records that carry none: palm, palmx_ext or user.
    #[arg(long, default_value = "user")]
    source_tag: String,
    /// Prefix for synthetic ids; defaults to the source tag.
    #[arg(long)]
    id_prefix: Option<String>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rejection ledger; defaults to rejected.jsonl next to --out.
    #[arg(long)]
    rejected: Option<PathBuf>,
    /// Option shuffle seed (pipeline.shuffle_seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_a: PathBuf,
    #[arg(long)]
    out_b: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EmitTrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model name sent to the endpoint and recorded in the report.
    #[arg(long)]
    model: String,
    /// MCQ dataset (mcq.jsonl).
    #[arg(long)]
    dataset: PathBuf,
    /// Per-item records file.
    #[arg(long)]
    out: PathBuf,
    /// Concurrent requests (llm.parallelism).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Score pre-generated `{"item_id","raw_response"}` lines instead of querying.
    #[arg(long)]
    responses: Option<PathBuf>,
    /// JSON summary; defaults to `<out>.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Dataset label for reports; defaults to the dataset file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary files written by `evaluate`.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Markdown table.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON copy of the table.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReviewArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Sampling seed (review.seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            tracing::error!("{err:#}");
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for configuration and credential problems, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let gateway_config = |e: &GatewayError| matches!(e, GatewayError::Config(_) | GatewayError::Auth { .. });
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<GatewayError>() {
            if gateway_config(e) {
                return 2;
            }
        }
        match cause.downcast_ref::<PipelineError>() {
            Some(PipelineError::Config(_)) => return 2,
            Some(PipelineError::Gateway(e)) if gateway_config(e) => return 2,
            _ => {}
        }
        if let Some(EvalError::Gateway(e)) = cause.downcast_ref::<EvalError>() {
            if gateway_config(e) {
                return 2;
            }
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli
        .set
        .iter()
        .map(|raw| parse_override(raw))
        .collect::<Result<Vec<_>, _>>()?;
    match &cli.command {
        Command::Augment(a) => {
            if let Some(seed) = a.seed {
                overrides.push(("pipeline.shuffle_seed".into(), seed.to_string()));
            }
        }
        Command::Evaluate(e) => {
            if let Some(p) = e.parallelism {
                overrides.push(("llm.parallelism".into(), p.to_string()));
            }
        }
        Command::ReviewSample(r) => {
            if let Some(seed) = r.seed {
                overrides.push(("review.seed".into(), seed.to_string()));
            }
        }
        _ => {}
    }
    let settings = Settings::from_process(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Augment(a) => runtime()?.block_on(augment(&a, &settings)),
        Command::Split(a) => split(&a),
        Command::EmitTrain(a) => {
            let items = jsonl::read_mcq(&a.input)?;
            let n = emit_train_jsonl(&items, &a.out)?;
            tracing::info!(lines = n, out = %a.out.display(), "training file written");
            Ok(())
        }
        Command::Evaluate(a) => runtime()?.block_on(evaluate(&a, &settings)),
        Command::Report(a) => report(&a),
        Command::ReviewSample(a) => {
            let items = jsonl::read_mcq(&a.input)?;
            let ids = sample_for_review(&items, a.n, settings.parse("review.seed")?, &a.out)?;
            tracing::info!(rows = ids.len(), out = %a.out.display(), "review sheet written");
            Ok(())
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let Some(tag) = SourceTag::parse(&a.source_tag) else {
        return Err(ConfigError(format!("--source-tag must be palm, palmx_ext or user, got {:?}", a.source_tag)).into());
    };
    let tag_value = serde_json::to_value(tag)?;
    let prefix = a
        .id_prefix
        .clone()
        .unwrap_or_else(|| tag_value.as_str().unwrap_or("qa").replace('_', "-"));

    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (n, (line, mut value)) in jsonl::read_values(&a.input)?.into_iter().enumerate() {
        if let Value::Object(obj) = &mut value {
            obj.entry("id").or_insert_with(|| Value::String(format!("{prefix}-{:04}", n + 1)));
            obj.entry("source_tag").or_insert_with(|| tag_value.clone());
        }
        match model::validate_qa(&value) {
            Ok(qa) => records.push(qa),
            Err(source) => problems.push(JsonlError::Invalid {
                path: a.input.clone(),
                line,
                source,
            }),
        }
    }
    if !problems.is_empty() {
        for p in &problems {
            tracing::error!("{p}");
        }
        bail!("{} invalid record(s) in {}", problems.len(), a.input.display());
    }
    model::check_unique_ids(records.iter().map(|q| q.id.as_str())).map_err(|source| JsonlError::Dataset {
        path: a.input.clone(),
        source,
    })?;
    jsonl::write_jsonl(&a.out, &records)?;
    tracing::info!(records = records.len(), out = %a.out.display(), "ingested");
    Ok(())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

async fn augment(a: &AugmentArgs, settings: &Settings) -> Result<()> {
    let cfg = settings.pipeline_config()?;
    let gateway = Gateway::new(settings.gateway_config()?)?;
    let rejected = a.rejected.clone().unwrap_or_else(|| sibling(&a.out, "rejected.jsonl"));
    let out = run_pipeline_files(&a.input, &a.out, &rejected, &cfg, &gateway, &ApproxTokenCounter).await?;
    tracing::info!(
        accepted = out.accepted.len(),
        rejected = out.rejected.len(),
        http_requests = gateway.http_requests(),
        "augmentation written"
    );
    Ok(())
}

fn split(a: &SplitArgs) -> Result<()> {
    let rows = jsonl::read_values(&a.input)?;
    let mut keyed = Vec::with_capacity(rows.len());
    for (line, v) in &rows {
        let Some(id) = v.get("id").and_then(Value::as_str) else {
            bail!("{}:{line}: record has no string `id`", a.input.display());
        };
        let country = v.get("country").and_then(Value::as_str).map(str::to_string);
        keyed.push((id.to_string(), country));
    }
    let split = stratified_split(&keyed, a.ratio, a.seed).map_err(|e| match e {
        mcqforge_core::split::SplitError::InvalidRatio(_) => anyhow::Error::new(ConfigError(e.to_string())),
        other => anyhow::anyhow!("{}: {other}", a.input.display()),
    })?;
    let in_a: std::collections::HashSet<&str> = split.half_a.iter().map(String::as_str).collect();
    let (mut first, mut second): (Vec<&Value>, Vec<&Value>) = (Vec::new(), Vec::new());
    for ((id, _), (_, v)) in keyed.iter().zip(&rows) {
        if in_a.contains(id.as_str()) {
            first.push(v);
        } else {
            second.push(v);
        }
    }
    let by_id = |v: &&Value| v["id"].as_str().unwrap_or("").to_string();
    first.sort_by_key(by_id);
    second.sort_by_key(by_id);
    jsonl::write_jsonl(&a.out_a, &first)?;
    jsonl::write_jsonl(&a.out_b, &second)?;
    tracing::info!(half_a = first.len(), half_b = second.len(), "split written");
    Ok(())
}

async fn evaluate(a: &EvaluateArgs, settings: &Settings) -> Result<()> {
    let items = jsonl::read_mcq(&a.dataset)?;
    let dataset = a.name.clone().unwrap_or_else(|| {
        a.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let (records, report): (Vec<EvalRecord>, EvalReport) = match &a.responses {
        Some(path) => score_responses(&items, &read_responses(path)?, &a.model, &dataset)?,
        None => {
            let gateway = Gateway::new(settings.gateway_config()?)?;
            let eval = EvalSettings {
                model: a.model.clone(),
                dataset,
                max_tokens: settings.parse("eval.max_tokens")?,
                parallelism: gateway.parallelism(),
            };
            evaluate_model(&items, &gateway, &eval).await?
        }
    };
    jsonl::write_jsonl(&a.out, &records)?;
    let summary = a.summary.clone().unwrap_or_else(|| {
        let mut name = a.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".summary.json");
        a.out.with_file_name(name)
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    jsonl::write_atomic(&summary, text.as_bytes()).with_context(|| summary.display().to_string())?;
    tracing::info!(
        model = %report.model,
        dataset = %report.dataset,
        accuracy = format!("{:.2}", report.accuracy_pct),
        unparsed = report.n_unparsed,
        "evaluation written"
    );
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::new();
    for path in &a.inputs {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        let report: EvalReport =
            serde_json::from_str(&text).with_context(|| format!("{}: not an evaluation summary", path.display()))?;
        reports.push(report);
    }
    let table = compare_models(&reports)?;
    jsonl::write_atomic(&a.out, table.to_markdown().as_bytes()).with_context(|| a.out.display().to_string())?;
    if let Some(path) = &a.json {
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|(model, cells)| {
                let cells: serde_json::Map<String, Value> = table
                    .datasets
                    .iter()
                    .zip(cells)
                    .map(|(d, c)| (d.clone(), c.map(Value::from).unwrap_or(Value::Null)))
                    .collect();
                serde_json::json!({"model": model, "accuracy_pct": cells})
            })
            .collect();
        let doc = serde_json::json!({"datasets": table.datasets, "rows": rows});
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        jsonl::write_atomic(path, text.as_bytes()).with_context(|| path.display().to_string())?;
    }
    tracing::info!(models = table.rows.len(), datasets = table.datasets.len(), "report written");
    Ok(())
}
