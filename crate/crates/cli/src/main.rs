mod config;
mod report;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use codeplexity::ast::{parse, read_corpus, AstCorpus};
use codeplexity::evaluation::{elo_order, items_of, peg_report, Comparison, MetricRanking, Split};
use codeplexity::metrics::structural_score;
use codeplexity::model::{encode, fit, soft_labels, ComplexityModel, FeatureMatrix, ModelError, OutcomeMatrix, SoftLabels};
use codeplexity::pipeline::{
    apply_review, apply_threshold, read_store, render_script, run_funnel, write_store, FunnelCounts, FunnelOptions,
    GenerationClient, HttpClient, ReviewDecision, SceneGraph, Scorer, SelectionRule, StubClient, StubFixture,
};
use codeplexity::pipeline::prompts::DEFAULT_API_SPEC;
use codeplexity::significance::significant_sets;
use codeplexity::subtree::{mine_catalog, SubtreeCatalog};

use config::{ClientKind, RunConfig};
use report::{report_json, report_line, RunReport};

#[derive(Parser)]
#[command(name = "codeplexity", version, about = "Question complexity from generated visual programs")]
struct Cli {
    /// TOML run configuration; library defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the JSON run-report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize a JSONL corpus of programs into trees.
    Parse {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lines of code and cyclomatic complexity per program.
    Metrics {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine the subtree catalog from parsed trees.
    Mine {
        #[arg(long)]
        asts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subtree-presence features of every tree.
    Encode {
        #[arg(long)]
        asts: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the complexity model on soft success labels.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[command(flatten)]
        models: ModelSelection,
        #[arg(long)]
        out: PathBuf,
    },
    /// Complexity score of every encoded question.
    Score {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subtrees significantly associated with failure, per model.
    Analyze {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PEG curve and mPEG of a score file.
    Peg {
        /// JSONL with `question_id` and a numeric field, higher = harder.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "score")]
        field: String,
        #[arg(long)]
        outcomes: PathBuf,
        #[command(flatten)]
        models: ModelSelection,
        #[arg(long)]
        out: PathBuf,
    },
    /// Elo ordering from pairwise comparisons.
    Elo {
        /// JSONL of `{winner, loser}` in the order they were judged.
        #[arg(long)]
        comparisons: PathBuf,
        /// One item id per line; every compared id when absent.
        #[arg(long)]
        items: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render scene graphs into video scripts.
    RenderScripts {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, program and score candidate questions into a store.
    Generate {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Candidate store; existing entries are reused.
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum)]
        client: Option<ClientKind>,
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Apply a threshold and review decisions to a candidate store.
    Select {
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        rule: RuleArgs,
        /// JSONL of `{id, decision: reject|restore, note}`.
        #[arg(long)]
        review: Option<PathBuf>,
        /// Defaults to rewriting the store in place.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelSelection {
    /// Comma-separated model ids; all models in the outcomes when absent.
    #[arg(long, value_delimiter = ',', conflicts_with = "split")]
    models: Vec<String>,
    /// Split file: train uses its train models and questions, peg its
    /// validation ones.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args)]
struct RuleArgs {
    /// Keep candidates with score ≥ delta.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "top_frac")]
    delta: Option<f64>,
    /// Threshold letting this fraction of the reference scores through.
    #[arg(long, requires = "reference")]
    top_frac: Option<f64>,
    /// JSONL score file with a `score` field.
    #[arg(long)]
    reference: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Metrics { .. } => "metrics",
            Command::Mine { .. } => "mine",
            Command::Encode { .. } => "encode",
            Command::Train { .. } => "train",
            Command::Score { .. } => "score",
            Command::Analyze { .. } => "analyze",
            Command::Peg { .. } => "peg",
            Command::Elo { .. } => "elo",
            Command::RenderScripts { .. } => "render-scripts",
            Command::Generate { .. } => "generate",
            Command::Select { .. } => "select",
        }
    }
}

const EXAMPLES: &[(&str, &str)] = &[
    ("parse", "codeplexity parse --corpus programs.jsonl --out asts.json"),
    ("metrics", "codeplexity metrics --corpus programs.jsonl --out metrics.jsonl"),
    ("mine", "codeplexity mine --asts asts.json --out catalog.json"),
    ("encode", "codeplexity encode --asts asts.json --catalog catalog.json --out features.json"),
    ("train", "codeplexity train --features features.json --outcomes outcomes.jsonl --models m1,m2 --out model.json"),
    ("score", "codeplexity score --features features.json --model model.json --out scores.jsonl"),
    (
        "analyze",
        "codeplexity analyze --catalog catalog.json --features features.json --outcomes outcomes.jsonl --models m1,m2 --out significance.json",
    ),
    ("peg", "codeplexity peg --scores scores.jsonl --outcomes outcomes.jsonl --out peg.json"),
    ("elo", "codeplexity elo --comparisons comparisons.jsonl --out elo.json"),
    ("render-scripts", "codeplexity render-scripts --scenes scenes.jsonl --out scripts.jsonl"),
    (
        "generate",
        "codeplexity generate --scenes scenes.jsonl --catalog catalog.json --model model.json --store candidates.jsonl --client stub --delta -0.4",
    ),
    ("select", "codeplexity select --store candidates.jsonl --top-frac 0.1 --reference scores.jsonl"),
];

fn example_for(args: &[String]) -> &'static str {
    args.iter()
        .find_map(|a| EXAMPLES.iter().find(|(name, _)| name == a))
        .map_or("codeplexity mine --asts asts.json --out catalog.json", |(_, ex)| ex)
}

/// Failure that is not the caller's fault.
#[derive(Debug)]
struct Internal(String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err.chain().any(|c| {
        c.downcast_ref::<Internal>().is_some()
            || matches!(c.downcast_ref::<ModelError>(), Some(ModelError::NonConvergence { .. }))
    });
    if internal {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("example: {}", example_for(&args[1..]));
            return ExitCode::from(1);
        }
    };
    let start = Instant::now();
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let mut report = RunReport::new(cli.command.name(), cfg.digest());
    if let Some(p) = &cli.config {
        if let Ok(bytes) = std::fs::read(p) {
            report.input("config", p, &bytes);
        }
    }
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cli.command, &cfg, &mut report)));
    let code = match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            report.status = "error";
            report.error = Some(format!("{e:#}"));
            exit_code(&e)
        }
        Err(_) => {
            report.status = "error";
            report.error = Some("internal error: panic".into());
            2
        }
    };
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let text = report_json(&report);
    match &cli.report {
        Some(p) => {
            if let Err(e) = write_file(p, &text) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}

fn read_text(report: &mut RunReport, name: &str, path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {name} {}", path.display()))?;
    report.input(name, path, &bytes);
    String::from_utf8(bytes).with_context(|| format!("{name} {} is not UTF-8", path.display()))
}

/// Writes through a sibling temporary file so readers never see a partial
/// artifact.
fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_output(report: &mut RunReport, name: &str, path: &Path, text: &str) -> Result<()> {
    write_file(path, text)?;
    report.output(name, path);
    Ok(())
}

/// Analysis outputs carry the digest of the configuration that made them.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_digest: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&report_line(&item));
        out.push('\n');
    }
    out
}

fn read_asts(report: &mut RunReport, path: &Path) -> Result<AstCorpus> {
    let text = read_text(report, "asts", path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing trees {}", path.display()))
}

fn read_catalog(report: &mut RunReport, path: &Path) -> Result<SubtreeCatalog> {
    let text = read_text(report, "catalog", path)?;
    SubtreeCatalog::from_json(&text).with_context(|| format!("catalog {}", path.display()))
}

fn read_features(report: &mut RunReport, path: &Path) -> Result<FeatureMatrix> {
    let text = read_text(report, "features", path)?;
    FeatureMatrix::from_json(&text).with_context(|| format!("features {}", path.display()))
}

fn read_outcomes(report: &mut RunReport, path: &Path) -> Result<OutcomeMatrix> {
    let text = read_text(report, "outcomes", path)?;
    OutcomeMatrix::from_jsonl(&text).with_context(|| format!("outcomes {}", path.display()))
}

fn read_model(report: &mut RunReport, path: &Path) -> Result<ComplexityModel> {
    let text = read_text(report, "model", path)?;
    ComplexityModel::from_json(&text).with_context(|| format!("model {}", path.display()))
}

fn read_split(report: &mut RunReport, path: &Path) -> Result<Split> {
    let text = read_text(report, "split", path)?;
    serde_json::from_str(&text).with_context(|| format!("split {}", path.display()))
}

/// `(question_id, value)` pairs from a JSONL file's numeric `field`.
fn read_scores(report: &mut RunReport, name: &str, path: &Path, field: &str) -> Result<Vec<(String, f64)>> {
    let text = read_text(report, name, path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let q = v["question_id"]
            .as_str()
            .ok_or_else(|| anyhow!("{}:{}: missing question_id", path.display(), i + 1))?;
        let s = v[field]
            .as_f64()
            .ok_or_else(|| anyhow!("{}:{}: missing numeric field `{field}`", path.display(), i + 1))?;
        out.push((q.to_string(), s));
    }
    Ok(out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(report: &mut RunReport, name: &str, path: &Path) -> Result<Vec<T>> {
    let text = read_text(report, name, path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Scene lines that fail to deserialize are reported, not fatal.
fn read_scenes(report: &mut RunReport, path: &Path) -> Result<Vec<SceneGraph>> {
    let text = read_text(report, "scenes", path)?;
    let mut scenes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match SceneGraph::from_json(line) {
            Ok(s) => scenes.push(s),
            Err(e) => report.warnings.push(format!("scene line {} rejected: {e}", i + 1)),
        }
    }
    Ok(scenes)
}

fn all_models(outcomes: &OutcomeMatrix, chosen: &[String]) -> Vec<String> {
    if chosen.is_empty() {
        outcomes.model_ids.clone()
    } else {
        chosen.to_vec()
    }
}

fn restrict_labels(labels: SoftLabels, keep: &BTreeSet<&str>) -> SoftLabels {
    let mut out = SoftLabels {
        question_ids: Vec::new(),
        labels: Vec::new(),
        weights: Vec::new(),
        excluded: labels.excluded,
    };
    for i in 0..labels.question_ids.len() {
        if keep.contains(labels.question_ids[i].as_str()) {
            out.question_ids.push(labels.question_ids[i].clone());
            out.labels.push(labels.labels[i]);
            out.weights.push(labels.weights[i]);
        }
    }
    out
}

fn selection_rule(report: &mut RunReport, args: &RuleArgs) -> Result<Option<SelectionRule>> {
    match (args.delta, args.top_frac, &args.reference) {
        (Some(delta), None, _) => Ok(Some(SelectionRule::Threshold { delta })),
        (None, Some(fraction), Some(path)) => {
            let reference = read_scores(report, "reference", path, "score")?
                .into_iter()
                .map(|(_, s)| s)
                .collect();
            Ok(Some(SelectionRule::TopFraction { fraction, reference }))
        }
        _ => Ok(None),
    }
}

fn build_client(cfg: &RunConfig, kind: Option<ClientKind>, report: &mut RunReport) -> Result<Box<dyn GenerationClient>> {
    match kind.unwrap_or(cfg.client.kind) {
        ClientKind::Stub => {
            let fixture = match &cfg.client.stub_fixture {
                Some(p) => {
                    let p = &cfg.resolve(p);
                    let text = read_text(report, "stub_fixture", p)?;
                    serde_json::from_str::<StubFixture>(&text).with_context(|| format!("stub fixture {}", p.display()))?
                }
                None => StubFixture::default(),
            };
            Ok(Box::new(StubClient {
                fixture,
                questions_per_script: cfg.client.questions_per_script,
            }))
        }
        ClientKind::Http => Ok(Box::new(HttpClient::new(cfg.client.http.clone())?)),
    }
}

fn tally(report: &mut RunReport, counts: &FunnelCounts) {
    if let Value::Object(m) = serde_json::to_value(counts).expect("serializable counts") {
        for (k, v) in m {
            report.count(&k, v);
        }
    }
}

fn run(command: &Command, cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    match command {
        Command::Parse { corpus, out } => {
            let canon = cfg.canonicalization()?;
            let programs = read_corpus(&read_text(report, "corpus", corpus)?)?;
            let mut asts = Vec::with_capacity(programs.len());
            for p in &programs {
                let outcome =
                    parse(&p.question_id, &p.source, &canon).with_context(|| format!("question {}", p.question_id))?;
                for site in &outcome.opaque {
                    report
                        .warnings
                        .push(format!("{} line {}: `{}` kept as an opaque statement", p.question_id, site.line, site.construct));
                }
                asts.push(outcome.ast);
            }
            report.count("programs", asts.len());
            report.count("nodes", asts.iter().map(|a| a.node_count).sum::<usize>());
            let corpus = AstCorpus {
                canonicalization_digest: canon.digest(),
                asts,
            };
            write_output(report, "asts", out, &(serde_json::to_string_pretty(&corpus)? + "\n"))
        }
        Command::Metrics { corpus, out } => {
            let canon = cfg.canonicalization()?;
            let programs = read_corpus(&read_text(report, "corpus", corpus)?)?;
            let mut rows = Vec::with_capacity(programs.len());
            for p in &programs {
                let ast = parse(&p.question_id, &p.source, &canon)
                    .with_context(|| format!("question {}", p.question_id))?
                    .ast;
                rows.push(structural_score(&p.question_id, &p.source, &ast)?);
            }
            report.count("programs", rows.len());
            write_output(report, "metrics", out, &jsonl(&rows))
        }
        Command::Mine { asts, out } => {
            let corpus = read_asts(report, asts)?;
            let catalog = mine_catalog(&corpus.asts, &corpus.canonicalization_digest, cfg.mining)?;
            for q in &catalog.truncated_programs {
                report
                    .warnings
                    .push(format!("{q}: per-node pattern cap reached, enumeration truncated"));
            }
            report.count("programs", corpus.asts.len());
            report.count("patterns", catalog.len());
            write_output(report, "catalog", out, &catalog.to_json())
        }
        Command::Encode { asts, catalog, out } => {
            let corpus = read_asts(report, asts)?;
            let catalog = read_catalog(report, catalog)?;
            let features = encode(&corpus, &catalog)?;
            report.count("questions", features.len());
            report.count("features", features.n_features);
            write_output(report, "features", out, &features.to_json())
        }
        Command::Train {
            features,
            outcomes,
            models,
            out,
        } => {
            let features = read_features(report, features)?;
            let outcomes = read_outcomes(report, outcomes)?;
            let labels = match &models.split {
                Some(p) => {
                    let split = read_split(report, p)?;
                    let (train, _) = split.questions(&features.question_ids)?;
                    let keep: BTreeSet<&str> = train.iter().map(String::as_str).collect();
                    restrict_labels(soft_labels(&outcomes, &split.train_models)?, &keep)
                }
                None => soft_labels(&outcomes, &all_models(&outcomes, &models.models))?,
            };
            if !labels.excluded.is_empty() {
                report
                    .warnings
                    .push(format!("{} question(s) without outcomes excluded", labels.excluded.len()));
            }
            let model = fit(&features, &labels, cfg.fit_options())?;
            report.count("questions", model.fit_report.n_questions);
            report.count("iterations", model.fit_report.iterations);
            report.count("objective", model.fit_report.objective);
            write_output(report, "model", out, &model.to_json())
        }
        Command::Score { features, model, out } => {
            let features = read_features(report, features)?;
            let model = read_model(report, model)?;
            let scores = model.score(&features)?;
            report.count("questions", scores.len());
            #[derive(Serialize)]
            struct Row<'a> {
                question_id: &'a str,
                score: f64,
            }
            write_output(
                report,
                "scores",
                out,
                &jsonl(scores.iter().map(|(q, s)| Row { question_id: q, score: *s })),
            )
        }
        Command::Analyze {
            catalog,
            features,
            outcomes,
            models,
            out,
        } => {
            let catalog = read_catalog(report, catalog)?;
            let features = read_features(report, features)?;
            let outcomes = read_outcomes(report, outcomes)?;
            let models = all_models(&outcomes, models);
            let result = significant_sets(&catalog, &features, &outcomes, &models, cfg.analysis)?;
            report.count("models", result.models.len());
            report.count("intersection", result.intersection.len());
            let digest = report.config_digest.clone();
            let body = report_json(&Stamped {
                config_digest: &digest,
                body: &result,
            });
            write_output(report, "significance", out, &body)
        }
        Command::Peg {
            scores,
            field,
            outcomes,
            models,
            out,
        } => {
            let scores = read_scores(report, "scores", scores, field)?;
            let outcomes = read_outcomes(report, outcomes)?;
            let mut ranking = MetricRanking::from_scores(field, &scores)?;
            let (model_ids, split) = match &models.split {
                Some(p) => {
                    let split = read_split(report, p)?;
                    let ids: Vec<String> = scores.iter().map(|(q, _)| q.clone()).collect();
                    let (_, val) = split.questions(&ids)?;
                    let keep: BTreeSet<&str> = val.iter().map(String::as_str).collect();
                    ranking = ranking.restrict(&|q| keep.contains(q));
                    (split.val_models.clone(), Some(split))
                }
                None => (all_models(&outcomes, &models.models), None),
            };
            let mut per_model = Vec::with_capacity(model_ids.len());
            for m in &model_ids {
                let column: HashMap<String, bool> = outcomes.column(m)?.into_iter().collect();
                per_model.push((m.clone(), column));
            }
            let mut result = peg_report(&ranking, &per_model, &cfg.peg.alpha_grid)?;
            result.split = split;
            report.count("questions", ranking.question_ids.len());
            report.count("models", per_model.len());
            let digest = report.config_digest.clone();
            let body = report_json(&Stamped {
                config_digest: &digest,
                body: &result,
            });
            write_output(report, "peg", out, &body)
        }
        Command::Elo { comparisons, items, out } => {
            let comparisons: Vec<Comparison> = read_jsonl(report, "comparisons", comparisons)?;
            let items = match items {
                Some(p) => read_text(report, "items", p)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect(),
                None => items_of(&comparisons),
            };
            let state = elo_order(&items, &comparisons, cfg.elo)?;
            #[derive(Serialize)]
            struct EloOutput<'a> {
                #[serde(flatten)]
                state: &'a codeplexity::evaluation::EloState,
                ordering: Vec<(String, f64)>,
            }
            report.count("items", state.scores.len());
            report.count("comparisons", state.comparisons_applied);
            let digest = report.config_digest.clone();
            let body = report_json(&Stamped {
                config_digest: &digest,
                body: &EloOutput {
                    ordering: state.ordering(),
                    state: &state,
                },
            });
            write_output(report, "elo", out, &body)
        }
        Command::RenderScripts { scenes, out } => {
            let scenes = read_scenes(report, scenes)?;
            #[derive(Serialize)]
            struct Script<'a> {
                video_id: &'a str,
                script_hash: String,
                script: String,
            }
            let mut rows = Vec::new();
            for s in &scenes {
                match render_script(s) {
                    Ok(script) => rows.push(Script {
                        video_id: &s.video_id,
                        script_hash: codeplexity::digest::of_str(&script),
                        script,
                    }),
                    Err(e) => report.warnings.push(format!("video {} rejected: {e}", s.video_id)),
                }
            }
            report.count("scripts", rows.len());
            report.count("rejected", report.warnings.len());
            write_output(report, "scripts", out, &jsonl(&rows))
        }
        Command::Generate {
            scenes,
            catalog,
            model,
            store,
            client,
            rule,
        } => {
            let scenes = read_scenes(report, scenes)?;
            let catalog = read_catalog(report, catalog)?;
            let model = read_model(report, model)?;
            let canon = cfg.canonicalization()?;
            let scorer = Scorer::new(&model, &catalog, &canon)?;
            let rule = selection_rule(report, rule)?;
            let previous = if store.exists() {
                read_store(&read_text(report, "previous_store", store)?)?
            } else {
                Vec::new()
            };
            let client = build_client(cfg, *client, report)?;
            let api_spec = match &cfg.client.api_spec {
                Some(p) => read_text(report, "api_spec", &cfg.resolve(p))?,
                None => DEFAULT_API_SPEC.to_string(),
            };
            let opts = FunnelOptions {
                max_in_flight: cfg.client.max_in_flight,
                api_spec,
                unclassified_note: cfg.client.unclassified_note,
            };
            let out = run_funnel(&scenes, client.as_ref(), &scorer, rule.as_ref(), &previous, &opts)?;
            for r in &out.rejected_videos {
                report.warnings.push(format!("video {} rejected: {}", r.video_id, r.reason));
            }
            tally(report, &out.counts);
            if let Some(d) = out.delta {
                report.count("delta", d);
            }
            write_output(report, "store", store, &write_store(&out.candidates))
        }
        Command::Select {
            store,
            rule,
            review,
            out,
        } => {
            let mut candidates = read_store(&read_text(report, "store", store)?)?;
            let rule = selection_rule(report, rule)?.ok_or_else(|| anyhow!("select needs --delta or --top-frac"))?;
            if let Some(p) = review {
                let decisions: Vec<ReviewDecision> = read_jsonl(report, "review", p)?;
                apply_review(&mut candidates, &decisions)?;
                report.count("review_decisions", decisions.len());
            }
            let delta = rule.delta()?;
            apply_threshold(&mut candidates, delta);
            for c in &candidates {
                c.check().map_err(Internal)?;
            }
            tally(report, &FunnelCounts::tally(&candidates));
            report.count("delta", delta);
            let target = out.as_ref().unwrap_or(store);
            write_output(report, "store", target, &write_store(&candidates))
        }
    }
}
