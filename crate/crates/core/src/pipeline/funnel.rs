//! Candidate generation, scoring and threshold selection.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::{ClientError, GenerationClient, QuestionDraft};
use super::prompts::{program_prompt, prompt_hash, question_prompt, DEFAULT_API_SPEC};
use super::scene::{render_script, SceneGraph};
use super::PipelineError;
use crate::ast::{parse, Canonicalization};
use crate::digest;
use crate::model::{encode_tree, ComplexityModel};
use crate::subtree::SubtreeCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Candidate,
    Selected,
    FilteredOut,
    ManuallyRejected,
}

/// Everything needed to replay how a candidate got its score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub client_id: String,
    pub script_hash: String,
    pub question_prompt_hash: String,
    #[serde(default)]
    pub program_prompt_hash: Option<String>,
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub catalog_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateQuestion {
    /// `<video_id>/<index>`, index zero-padded to three digits.
    pub id: String,
    pub video_id: String,
    pub question: String,
    /// Exactly five: the answer at `correct_index`, distractors in order.
    pub options: Vec<String>,
    pub correct_index: usize,
    pub provenance: Provenance,
    #[serde(default)]
    pub score: Option<f64>,
    pub status: Status,
    #[serde(default)]
    pub reason: Option<String>,
}

pub const N_OPTIONS: usize = 5;

impl CandidateQuestion {
    fn from_draft(video_id: &str, index: usize, draft: &QuestionDraft, provenance: Provenance) -> Self {
        let correct_index = (digest::short(&format!("{video_id}\u{0}{}", draft.q)) % N_OPTIONS as u64) as usize;
        let mut options: Vec<String> = draft.distractors().iter().map(|d| d.to_string()).collect();
        options.insert(correct_index, draft.ans.clone());
        CandidateQuestion {
            id: format!("{video_id}/{index:03}"),
            video_id: video_id.to_string(),
            question: draft.q.clone(),
            options,
            correct_index,
            provenance,
            score: None,
            status: Status::Candidate,
            reason: None,
        }
    }

    pub fn answer(&self) -> &str {
        &self.options[self.correct_index]
    }

    pub fn check(&self) -> Result<(), String> {
        if self.options.len() != N_OPTIONS {
            return Err(format!("{}: {} options", self.id, self.options.len()));
        }
        if self.correct_index >= N_OPTIONS {
            return Err(format!("{}: correct index {}", self.id, self.correct_index));
        }
        if matches!(self.status, Status::FilteredOut | Status::ManuallyRejected) && self.reason.is_none() {
            return Err(format!("{}: dropped without a reason", self.id));
        }
        Ok(())
    }
}

/// Either an absolute threshold or the threshold that lets the top
/// `fraction` of a reference score distribution through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionRule {
    Threshold { delta: f64 },
    TopFraction { fraction: f64, reference: Vec<f64> },
}

impl SelectionRule {
    pub fn delta(&self) -> Result<f64, PipelineError> {
        match self {
            SelectionRule::Threshold { delta } if delta.is_finite() => Ok(*delta),
            SelectionRule::Threshold { .. } => Err(PipelineError::InvalidParams("delta must be finite".into())),
            SelectionRule::TopFraction { fraction, reference } => calibrate_threshold(reference, *fraction),
        }
    }
}

/// δ = the k-th largest reference score with k = ⌈fraction·N⌉, so exactly k
/// items score ≥ δ when scores are distinct and ties at δ are all admitted.
pub fn calibrate_threshold(reference: &[f64], fraction: f64) -> Result<f64, PipelineError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PipelineError::InvalidParams(format!("fraction {fraction} outside (0, 1)")));
    }
    if reference.is_empty() || reference.iter().any(|s| !s.is_finite()) {
        return Err(PipelineError::InvalidParams("reference scores must be non-empty and finite".into()));
    }
    let mut sorted = reference.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    // the epsilon keeps 0.1·200 = 20.000000000000004 from rounding up to 21
    let k = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[k - 1])
}

/// Applies `score ≥ δ` to every scored candidate that is not manually
/// rejected. Unscored candidates keep their recorded failure.
pub fn apply_threshold(candidates: &mut [CandidateQuestion], delta: f64) {
    for c in candidates {
        if c.status == Status::ManuallyRejected {
            continue;
        }
        if let Some(s) = c.score {
            if s >= delta {
                c.status = Status::Selected;
                c.reason = None;
            } else {
                c.status = Status::FilteredOut;
                c.reason = Some(format!("score {s} below threshold {delta}"));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Restore,
}

/// One line of an offline review file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewDecision {
    pub id: String,
    pub decision: Decision,
    #[serde(default)]
    pub note: Option<String>,
}

/// Rejections move any candidate to manually-rejected; restores move a
/// manually rejected one back to candidate so the next threshold pass
/// decides it again.
pub fn apply_review(candidates: &mut [CandidateQuestion], decisions: &[ReviewDecision]) -> Result<(), PipelineError> {
    let index: HashMap<String, usize> = candidates.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
    for d in decisions {
        let &i = index
            .get(&d.id)
            .ok_or_else(|| PipelineError::UnknownCandidate(d.id.clone()))?;
        let c = &mut candidates[i];
        match d.decision {
            Decision::Reject => {
                c.status = Status::ManuallyRejected;
                c.reason = Some(match &d.note {
                    Some(n) => format!("manual review: {n}"),
                    None => "manual review".into(),
                });
            }
            Decision::Restore if c.status == Status::ManuallyRejected => {
                c.status = Status::Candidate;
                c.reason = None;
            }
            Decision::Restore => {}
        }
    }
    Ok(())
}

pub fn write_store(candidates: &[CandidateQuestion]) -> String {
    let mut out = String::new();
    for c in candidates {
        out.push_str(&serde_json::to_string(c).expect("serializable candidate"));
        out.push('\n');
    }
    out
}

pub fn read_store(text: &str) -> Result<Vec<CandidateQuestion>, PipelineError> {
    let mut out: Vec<CandidateQuestion> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let store = |message: String| PipelineError::Store { line: i + 1, message };
        let c: CandidateQuestion = serde_json::from_str(line).map_err(|e| store(e.to_string()))?;
        c.check().map_err(store)?;
        if !seen.insert(c.id.clone()) {
            return Err(store(format!("duplicate candidate id {}", c.id)));
        }
        out.push(c);
    }
    Ok(out)
}

/// The model and catalog used to score programs, checked to belong together.
pub struct Scorer<'a> {
    pub model: &'a ComplexityModel,
    pub catalog: &'a SubtreeCatalog,
    pub canonicalization: &'a Canonicalization,
}

impl<'a> Scorer<'a> {
    pub fn new(
        model: &'a ComplexityModel,
        catalog: &'a SubtreeCatalog,
        canonicalization: &'a Canonicalization,
    ) -> Result<Self, PipelineError> {
        let fp = catalog.fingerprint();
        if model.catalog_fingerprint != fp || model.weights.len() != catalog.len() {
            return Err(PipelineError::CatalogMismatch {
                expected: fp,
                found: model.catalog_fingerprint.clone(),
            });
        }
        let digest = canonicalization.digest();
        if catalog.canonicalization_digest != digest {
            return Err(PipelineError::CatalogMismatch {
                expected: catalog.canonicalization_digest.clone(),
                found: digest,
            });
        }
        Ok(Scorer {
            model,
            catalog,
            canonicalization,
        })
    }

    /// Score of a program source, or the parse failure.
    pub fn score(&self, id: &str, source: &str) -> Result<f64, crate::ast::AstError> {
        let outcome = parse(id, source, self.canonicalization)?;
        let row = encode_tree(&outcome.ast.root, self.catalog);
        Ok(self.model.score_row(&row))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelOptions {
    /// Upper bound on concurrent client requests.
    pub max_in_flight: usize,
    pub api_spec: String,
    /// Adds the instruction about actors without a role to question prompts.
    pub unclassified_note: bool,
}

impl Default for FunnelOptions {
    fn default() -> Self {
        FunnelOptions {
            max_in_flight: 4,
            api_spec: DEFAULT_API_SPEC.to_string(),
            unclassified_note: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedVideo {
    pub video_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub videos: usize,
    pub rejected_videos: usize,
    pub candidates: usize,
    pub scored: usize,
    pub selected: usize,
    pub filtered_out: usize,
    pub manually_rejected: usize,
    /// Candidates taken from a previous store without new client calls.
    pub reused: usize,
}

impl FunnelCounts {
    pub fn tally(candidates: &[CandidateQuestion]) -> Self {
        let mut c = FunnelCounts {
            candidates: candidates.len(),
            ..Default::default()
        };
        for q in candidates {
            c.scored += q.score.is_some() as usize;
            match q.status {
                Status::Selected => c.selected += 1,
                Status::FilteredOut => c.filtered_out += 1,
                Status::ManuallyRejected => c.manually_rejected += 1,
                Status::Candidate => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelOutput {
    pub candidates: Vec<CandidateQuestion>,
    pub rejected_videos: Vec<RejectedVideo>,
    pub delta: Option<f64>,
    pub counts: FunnelCounts,
}

struct VideoDrafts {
    video_id: String,
    drafts: Result<Vec<CandidateQuestion>, String>,
}

/// Runs scenes through question generation, program generation, scoring and
/// (when a rule is given) selection. Per-candidate failures are recorded on
/// the candidate; per-video failures are listed in `rejected_videos`.
///
/// Candidates already present in `previous` are reused together with their
/// programs and manual-review status, so a rerun only calls the client for
/// work that is missing. Output order follows scene order then question
/// order regardless of scheduling.
pub fn run_funnel(
    scenes: &[SceneGraph],
    client: &dyn GenerationClient,
    scorer: &Scorer,
    rule: Option<&SelectionRule>,
    previous: &[CandidateQuestion],
    opts: &FunnelOptions,
) -> Result<FunnelOutput, PipelineError> {
    if opts.max_in_flight == 0 {
        return Err(PipelineError::InvalidParams("max_in_flight must be positive".into()));
    }
    let delta = rule.map(SelectionRule::delta).transpose()?;
    let mut seen = HashSet::new();
    for s in scenes {
        if !seen.insert(s.video_id.as_str()) {
            return Err(PipelineError::DuplicateVideo(s.video_id.clone()));
        }
    }
    let mut prior: BTreeMap<&str, Vec<&CandidateQuestion>> = BTreeMap::new();
    for c in previous {
        prior.entry(c.video_id.as_str()).or_default().push(c);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.max_in_flight)
        .build()
        .map_err(|e| PipelineError::InvalidParams(e.to_string()))?;
    let client_id = client.id();

    let per_video: Vec<VideoDrafts> = pool.install(|| {
        scenes
            .par_iter()
            .map(|scene| {
                let video_id = scene.video_id.clone();
                let script = match render_script(scene) {
                    Ok(s) => s,
                    Err(e) => {
                        return VideoDrafts {
                            video_id,
                            drafts: Err(e.to_string()),
                        }
                    }
                };
                let prompt = question_prompt(&script, opts.unclassified_note);
                let script_hash = digest::of_str(&script);
                let question_prompt_hash = prompt_hash(&prompt);
                let drafts = match prior.get(video_id.as_str()) {
                    Some(old) if old.iter().all(|c| c.provenance.script_hash == script_hash) => {
                        Ok(old.iter().map(|c| (*c).clone()).collect())
                    }
                    _ => client
                        .generate_questions(&prompt)
                        .map(|ds| {
                            ds.iter()
                                .enumerate()
                                .map(|(i, d)| {
                                    CandidateQuestion::from_draft(
                                        &video_id,
                                        i,
                                        d,
                                        Provenance {
                                            client_id: client_id.clone(),
                                            script_hash: script_hash.clone(),
                                            question_prompt_hash: question_prompt_hash.clone(),
                                            program_prompt_hash: None,
                                            program: None,
                                            catalog_fingerprint: None,
                                        },
                                    )
                                })
                                .collect()
                        })
                        .map_err(|e| format!("question generation failed: {e}")),
                };
                VideoDrafts { video_id, drafts }
            })
            .collect()
    });

    let mut rejected_videos = Vec::new();
    let mut pending: Vec<CandidateQuestion> = Vec::new();
    let mut reused = 0;
    for v in per_video {
        match v.drafts {
            Ok(cs) => {
                reused += cs.iter().filter(|c| c.provenance.program.is_some()).count();
                pending.extend(cs);
            }
            Err(reason) => rejected_videos.push(RejectedVideo {
                video_id: v.video_id,
                reason,
            }),
        }
    }

    let fingerprint = scorer.catalog.fingerprint();
    let candidates: Vec<CandidateQuestion> = pool.install(|| {
        pending
            .into_par_iter()
            .map(|mut c| {
                let prompt = program_prompt(&opts.api_spec, &c.question, &c.options);
                let hash = prompt_hash(&prompt);
                let program: Result<String, ClientError> = match &c.provenance.program {
                    Some(p) if c.provenance.program_prompt_hash.as_deref() == Some(hash.as_str()) => Ok(p.clone()),
                    _ => client.generate_program(&prompt),
                };
                c.provenance.program_prompt_hash = Some(hash);
                c.provenance.catalog_fingerprint = Some(fingerprint.clone());
                c.score = None;
                let manual = c.status == Status::ManuallyRejected;
                let failure = match program {
                    Ok(src) => {
                        let result = scorer.score(&c.id, &src);
                        c.provenance.program = Some(src);
                        match result {
                            Ok(s) => {
                                c.score = Some(s);
                                None
                            }
                            Err(e) => Some(format!("parse error: {e}")),
                        }
                    }
                    Err(e) => {
                        c.provenance.program = None;
                        Some(format!("program generation failed: {e}"))
                    }
                };
                if !manual {
                    match failure {
                        Some(reason) => {
                            c.status = Status::FilteredOut;
                            c.reason = Some(reason);
                        }
                        None => {
                            c.status = Status::Candidate;
                            c.reason = None;
                        }
                    }
                }
                c
            })
            .collect()
    });

    let mut candidates = candidates;
    if let Some(d) = delta {
        apply_threshold(&mut candidates, d);
    }
    let mut counts = FunnelCounts::tally(&candidates);
    counts.videos = scenes.len();
    counts.rejected_videos = rejected_videos.len();
    counts.reused = reused;
    Ok(FunnelOutput {
        candidates,
        rejected_videos,
        delta,
        counts,
    })
}
