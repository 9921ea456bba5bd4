//! `rct`: the prompt-compression trial pipeline as subcommands.
//!
//! Exit codes: 0 success or gate pass, 1 gate failure, 2 usage, I/O or
//! configuration errors.

mod artifacts;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rct_core::analysis::tables::{render_tables, to_csv, TableFormat};
use rct_core::analysis::{
    assignment_sensitivity, consort_counts, hypothesis_suite, AnalysisInput, Population, ResultsDocument,
};
use rct_core::corpus::{corpus_digest, load_records, prepare, to_jsonl, SourceFile};
use rct_core::cost::{breakeven_surface, surface_csv};
use rct_core::design::{rerandomize_until_balanced, validate_balance};
use rct_core::harness::http::HttpBackend;
use rct_core::harness::{
    control_baseline_plan, plan_from_allocation, run_trials, Clock, ModelBackend, ResumeMode, RunOptions, SimClock,
    SimulatedBackend, SystemClock,
};
use rct_core::similarity::{
    build_pairs, score_pairs, scores_to_jsonl, CachedProvider, EmbeddingCache, EmbeddingProvider, HttpEmbeddingProvider,
};
use rct_core::{Arm, Error as CoreError};

use artifacts::{OutDir, PrepareReport};
use config::{BackendKind, Loaded, ProviderKind};

#[derive(Parser, Debug)]
#[command(name = "rct", version, about = "Prompt-compression randomized trial pipeline")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// First randomization seed; overrides randomization.seed0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest raw records, apply inclusion rules, deduplicate, write the corpus.
    Prepare,
    /// Stratified permuted-block randomization with the balance gate.
    Randomize,
    /// Re-check balance of the current allocation (exit 1 if it fails).
    ValidateBalance,
    /// Execute trials, resuming from the existing log.
    Run(RunArgs),
    /// Score treatment responses against control baselines.
    ScoreSimilarity,
    /// Run the hypothesis suite on one analysis population.
    Analyze(PopulationArg),
    /// Render tables from an analysis results document.
    Report {
        #[command(flatten)]
        population: PopulationArg,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Break-even output expansion over a grid of compression ratios.
    Breakeven(BreakevenArgs),
    /// Participant-flow counts from raw records to analysis.
    Consort,
    /// Assignment-level cost efficiency over every randomized trial.
    Sensitivity,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Re-queue trials whose logged outcome is a failure.
    #[arg(long)]
    retry_failures: bool,
    /// Run every treatment stimulus uncompressed into the baseline log.
    #[arg(long)]
    control_baseline: bool,
}

#[derive(Args, Debug)]
struct PopulationArg {
    /// complete-case or all; overrides analysis.population.
    #[arg(long)]
    population: Option<Population>,
}

#[derive(Args, Debug)]
struct BreakevenArgs {
    /// Baseline input tokens.
    #[arg(long = "I")]
    input: f64,
    /// Baseline output tokens.
    #[arg(long = "O")]
    output: f64,
    /// Output-to-input price ratio.
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    /// Comma-separated compression ratios.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
    grid: Vec<f64>,
    /// Observed expansion factor; adds a margin column.
    #[arg(long)]
    observed: Option<f64>,
}

enum Status {
    Ok,
    GateFail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::GateFail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<Status> {
    if let Command::Breakeven(args) = &cli.command {
        return breakeven(args);
    }
    let loaded = Loaded::load(cli.config.as_deref())?;
    let out = match (&cli.out_dir, &loaded.config.out_dir) {
        (Some(flag), _) => flag.clone(),
        (None, Some(p)) => loaded.resolve(p),
        (None, None) => bail!("no output directory: pass --out-dir or set out_dir in the config"),
    };
    let out = OutDir::new(out)?;
    match cli.command {
        Command::Prepare => prepare_cmd(&loaded, &out),
        Command::Randomize => randomize(&loaded, &out, cli.seed),
        Command::ValidateBalance => validate(&loaded, &out),
        Command::Run(args) => run(&loaded, &out, &args),
        Command::ScoreSimilarity => score(&loaded, &out),
        Command::Analyze(p) => analyze(&loaded, &out, p.population),
        Command::Report { population, format } => report(&loaded, &out, population.population, &format),
        Command::Consort => consort(&out),
        Command::Sensitivity => sensitivity(&out),
        Command::Breakeven(_) => unreachable!("handled above"),
    }
}

fn prepare_cmd(loaded: &Loaded, out: &OutDir) -> Result<Status> {
    let cfg = &loaded.config;
    config::require_inputs(cfg)?;
    let files: Vec<SourceFile> = cfg
        .corpus
        .inputs
        .iter()
        .map(|i| SourceFile {
            path: loaded.resolve(&i.path),
            source: i.source,
        })
        .collect();
    let mut loaded_records = load_records(&files)?;
    // Report input paths as written in the config, not as resolved.
    for s in &mut loaded_records.skipped {
        if let Some(i) = files.iter().position(|f| f.path == s.path) {
            s.path = cfg.corpus.inputs[i].path.clone();
        }
    }
    let mut inputs = Vec::new();
    for (f, i) in files.iter().zip(&cfg.corpus.inputs) {
        let bytes = std::fs::read(&f.path).with_context(|| format!("cannot read {}", f.path.display()))?;
        inputs.push((i.path.display().to_string(), corpus_digest(&bytes)));
    }
    let prepared = prepare(loaded_records.records, &cfg.corpus.inclusion)?;
    let corpus_bytes = to_jsonl(&prepared.stimuli)?;
    out.write(artifacts::CORPUS, &corpus_bytes)?;
    let report = PrepareReport {
        assessed: prepared.assessed,
        tally: prepared.tally,
        skipped: loaded_records.skipped,
        corpus_digest: corpus_digest(&corpus_bytes),
        n_stimuli: prepared.stimuli.len(),
        inputs,
    };
    out.write_json(artifacts::PREPARE_REPORT, &report)?;
    println!(
        "assessed {}, excluded {} short / {} status / {} fixture, {} duplicates, {} stimuli",
        report.assessed,
        report.tally.too_short,
        report.tally.bad_status,
        report.tally.test_fixture,
        report.tally.duplicates,
        report.n_stimuli
    );
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct RandomizationRecord {
    seed: u64,
    attempts_used: u64,
    allocation_digest: String,
    corpus_digest: String,
    arm_counts: std::collections::BTreeMap<Arm, usize>,
    balance: rct_core::design::BalanceReport,
}

fn randomize(loaded: &Loaded, out: &OutDir, seed: Option<u64>) -> Result<Status> {
    let r = &loaded.config.randomization;
    let (corpus, corpus_bytes) = out.corpus()?;
    let seed0 = seed.unwrap_or(r.seed0);
    match rerandomize_until_balanced(&corpus, seed0, r.max_attempts, r.criteria()) {
        Ok(done) => {
            out.write(artifacts::ALLOCATION, &done.table.to_csv()?)?;
            let record = RandomizationRecord {
                seed: done.table.seed().unwrap_or(seed0),
                attempts_used: done.attempts_used,
                allocation_digest: done.table.digest()?,
                corpus_digest: corpus_digest(&corpus_bytes),
                arm_counts: done.table.arm_counts(),
                balance: done.report,
            };
            out.write_json(artifacts::RANDOMIZATION, &record)?;
            println!(
                "accepted seed {} after {} attempt(s)",
                record.seed, record.attempts_used
            );
            Ok(Status::Ok)
        }
        Err(e @ CoreError::NoBalancedAllocation { .. }) => {
            eprintln!("balance gate failed: {e}");
            Ok(Status::GateFail)
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(loaded: &Loaded, out: &OutDir) -> Result<Status> {
    let (corpus, _) = out.corpus()?;
    let alloc = out.allocation()?;
    let report = validate_balance(&corpus, &alloc, loaded.config.randomization.criteria())?;
    out.write_json(artifacts::BALANCE, &report)?;
    if report.passed {
        println!("balance: pass (max pairwise SMD {:.4})", report.max_pairwise_smd);
        Ok(Status::Ok)
    } else {
        println!("balance: fail ({})", report.failing.join(", "));
        Ok(Status::GateFail)
    }
}

fn run(loaded: &Loaded, out: &OutDir, args: &RunArgs) -> Result<Status> {
    let inf = &loaded.config.inference;
    let (corpus, _) = out.corpus()?;
    let alloc = out.allocation()?;
    let (plan, log_name) = if args.control_baseline {
        (control_baseline_plan(&alloc), artifacts::BASELINE)
    } else {
        (plan_from_allocation(&alloc), artifacts::TRIALS)
    };
    let kind = args.backend.unwrap_or(inf.backend);
    let (backend, clock): (Box<dyn ModelBackend>, Box<dyn Clock>) = match kind {
        BackendKind::Simulated => (
            Box::new(SimulatedBackend::new(inf.simulated.clone())?),
            Box::new(SimClock::new(inf.simulated_start)),
        ),
        BackendKind::Http => {
            let Some(http) = &inf.http else {
                bail!("config field inference.http is required for the http backend");
            };
            (Box::new(HttpBackend::new(http)?), Box::new(SystemClock::new()))
        }
    };
    let mut opts = RunOptions::new(clock.as_ref());
    opts.workers = inf.workers.max(1);
    opts.resume = if args.retry_failures {
        ResumeMode::RetryFailures
    } else {
        ResumeMode::SkipAttempted
    };
    let log_path = out.path(log_name);
    let summary = run_trials(&plan, &corpus, backend.as_ref(), &inf.params, &log_path, &opts)?;
    out.record_digest(log_name)?;
    println!(
        "submitted {}, succeeded {}, failed {}, already logged {}",
        summary.submitted, summary.succeeded, summary.failed, summary.already_logged
    );
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SimilarityReport {
    pairs: usize,
    unmatched: Vec<String>,
    by_method: std::collections::BTreeMap<String, usize>,
    fallback_reasons: std::collections::BTreeMap<String, usize>,
}

fn score(loaded: &Loaded, out: &OutDir) -> Result<Status> {
    let sim = &loaded.config.similarity;
    let treatment = out.log(artifacts::TRIALS)?;
    let control = out.log(artifacts::BASELINE)?;
    let pairing = build_pairs(&treatment, &control)?;
    let provider: Option<Box<dyn EmbeddingProvider>> = match sim.provider {
        ProviderKind::Jaccard => None,
        ProviderKind::Embedding => {
            let Some(cfg) = &sim.embedding else {
                bail!("config field similarity.embedding is required for the embedding provider");
            };
            let inner = HttpEmbeddingProvider::new(cfg)?;
            Some(match &sim.cache_dir {
                Some(dir) => Box::new(CachedProvider::new(inner, EmbeddingCache::new(loaded.resolve(dir))?)),
                None => Box::new(inner),
            })
        }
    };
    let scored = score_pairs(&pairing.pairs, provider.as_deref(), sim.threshold);
    let mut report = SimilarityReport {
        pairs: scored.len(),
        unmatched: pairing.unmatched,
        by_method: Default::default(),
        fallback_reasons: Default::default(),
    };
    for (s, reason) in &scored {
        *report.by_method.entry(s.method.name().to_string()).or_default() += 1;
        if let Some(r) = reason {
            *report.fallback_reasons.entry(r.clone()).or_default() += 1;
        }
    }
    let scores: Vec<_> = scored.into_iter().map(|(s, _)| s).collect();
    out.write(artifacts::SIMILARITY, &scores_to_jsonl(&scores)?)?;
    out.write_json(artifacts::SIMILARITY_REPORT, &report)?;
    println!("scored {} pairs, {} unmatched", report.pairs, report.unmatched.len());
    Ok(Status::Ok)
}

fn analyze(loaded: &Loaded, out: &OutDir, population: Option<Population>) -> Result<Status> {
    let mut cfg = loaded.config.analysis.clone();
    if let Some(p) = population {
        cfg.population = p;
    }
    let (corpus, _) = out.corpus()?;
    let alloc = out.allocation()?;
    let log = out.log(artifacts::TRIALS)?;
    let scores = out.scores_if_present()?;
    let doc = hypothesis_suite(
        &AnalysisInput {
            log: &log,
            corpus: &corpus,
            allocation: Some(&alloc),
            scores: &scores,
        },
        &cfg,
    )?;
    let name = artifacts::results_name(cfg.population);
    out.write(&name, &doc.to_json()?)?;
    for h in [&doc.h1, &doc.h2, &doc.h3, &doc.h4, &doc.h5] {
        println!("{}: {}", h.hypothesis, h.verdict.as_deref().unwrap_or("no verdict"));
    }
    Ok(Status::Ok)
}

fn report(loaded: &Loaded, out: &OutDir, population: Option<Population>, format: &str) -> Result<Status> {
    let population = population.unwrap_or(loaded.config.analysis.population);
    let format: TableFormat = format.parse()?;
    let name = artifacts::results_name(population);
    let bytes = out.read_required(&name, "analyze")?;
    let doc: ResultsDocument = serde_json::from_slice(&bytes).with_context(|| format!("cannot parse {name}"))?;
    for table in render_tables(&doc, format)? {
        let rel = format!("tables/{}/{}", population.label(), table.file_name);
        out.write(&rel, table.contents.as_bytes())?;
        println!("wrote {rel}");
    }
    Ok(Status::Ok)
}

fn consort(out: &OutDir) -> Result<Status> {
    let bytes = out.read_required(artifacts::PREPARE_REPORT, "prepare")?;
    let prep: PrepareReport = serde_json::from_slice(&bytes)?;
    let alloc = out.allocation()?;
    let log = out.log_if_present(artifacts::TRIALS)?;
    let flow = consort_counts(&prep.tally, &alloc, &log)?;
    out.write_json(artifacts::CONSORT, &flow)?;
    println!(
        "assessed {} -> eligible {} -> randomized {} -> analyzed {}",
        flow.assessed, flow.after_exclusions, flow.randomized, flow.analyzed_total
    );
    Ok(Status::Ok)
}

fn sensitivity(out: &OutDir) -> Result<Status> {
    let alloc = out.allocation()?;
    let log = out.log(artifacts::TRIALS)?;
    let rows = assignment_sensitivity(&alloc, &log)?;
    out.write_json(artifacts::SENSITIVITY, &rows)?;
    out.write(artifacts::SENSITIVITY_CSV, to_csv(&rows)?.as_bytes())?;
    for r in &rows {
        println!(
            "{:<10} assigned {:>4} successful {:>4} successes/$ {}",
            r.arm.to_string(),
            r.assigned,
            r.successful,
            r.successes_per_dollar.map_or("-".into(), |v| format!("{v:.1}"))
        );
    }
    Ok(Status::Ok)
}

fn breakeven(args: &BreakevenArgs) -> Result<Status> {
    let mut rows = breakeven_surface(args.input, args.output, args.k, &args.grid)?;
    if let Some(e) = args.observed {
        rows = rows.into_iter().map(|r| r.with_observed(e)).collect();
    }
    print!("{}", surface_csv(&rows));
    Ok(Status::Ok)
}
