//! The pipeline commands. Each reads its predecessors' artifacts from the
//! workdir, writes its own, and records both in a stage manifest.

use promptner::backend::{GenerationBackend, RemoteBackend, ScriptedBackend};
use promptner::corpus::{
    label_sentences_at, parse_annotations, parse_notes, Corpus, EntityRegistry, EntityType, GoldAnnotation, Labeled,
    Note, RuleSegmenter, Segmenter, Sentence,
};
use promptner::dataset::{revise_positives, split, EntityDataset, RevisionLog};
use promptner::ensemble::{predictions, run_sentences, Inference, Prediction, PromptEnsemble, ScreeningResult};
use promptner::evalkit::{match_entities, EntityCounts, MetricsReport};
use promptner::posttrain::{
    build_dpo_dataset, build_sft_dataset, gate_for_dpo, is_incorrect, predict_sft, SftEntityStats, SftExample,
    SftSource,
};
use promptner::promptgen::{generate_candidates, select_ensemble, CandidatePrompt};
use promptner::scheduler::{LedgerReport, TokenLedger};
use promptner::text::{dedup_key, slug};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use tracing::{info, warn};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::workdir::{Stage, Workdir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Ingest,
    Segment,
    BuildDatasets,
    GenPrompts,
    SelectPrompts,
    Infer,
    Evaluate,
    ExportSft,
    ExportDpo,
    GateDpo,
    Report,
    TokenUsage,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Ingest,
        Command::Segment,
        Command::BuildDatasets,
        Command::GenPrompts,
        Command::SelectPrompts,
        Command::Infer,
        Command::Evaluate,
        Command::ExportSft,
        Command::ExportDpo,
        Command::GateDpo,
        Command::Report,
        Command::TokenUsage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Segment => "segment",
            Command::BuildDatasets => "build-datasets",
            Command::GenPrompts => "gen-prompts",
            Command::SelectPrompts => "select-prompts",
            Command::Infer => "infer",
            Command::Evaluate => "evaluate",
            Command::ExportSft => "export-sft",
            Command::ExportDpo => "export-dpo",
            Command::GateDpo => "gate-dpo",
            Command::Report => "report",
            Command::TokenUsage => "token-usage",
        }
    }
}

/// Entities that have a dataset, plus those skipped for lack of positives.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub entities: Vec<String>,
    pub skipped: Vec<String>,
}

/// One line of `inference/screening.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningRecord {
    pub entity: String,
    #[serde(flatten)]
    pub result: ScreeningResult,
}

/// One line of `posttrain/sft_predictions.jsonl`, aligned with
/// `posttrain/sft_train.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftPrediction {
    pub index: usize,
    pub entity: String,
    pub reply: Option<String>,
    pub error: Option<String>,
    pub incorrect: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftStats {
    pub entities: BTreeMap<String, SftEntityStats>,
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub min_f1: f64,
    pub eligible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub commands: BTreeMap<String, LedgerReport>,
    pub total: LedgerReport,
}

const CORPUS_NOTES: &str = "corpus/notes.jsonl";
const CORPUS_ANNOTATIONS: &str = "corpus/annotations.jsonl";
const EVAL_NOTES: &str = "corpus/eval_notes.jsonl";
const EVAL_ANNOTATIONS: &str = "corpus/eval_annotations.jsonl";
const ENTITIES: &str = "corpus/entities.json";
const SENTENCES: &str = "corpus/sentences.jsonl";
const EVAL_SENTENCES: &str = "corpus/eval_sentences.jsonl";
const DATASET_INDEX: &str = "datasets/index.json";
const PREDICTIONS: &str = "inference/predictions.jsonl";
const REPORT_JSON: &str = "eval/report.json";
const SFT_TRAIN: &str = "posttrain/sft_train.jsonl";

fn dataset_path(entity: &str) -> String {
    format!("datasets/{}.json", slug(entity))
}

fn candidates_path(entity: &str) -> String {
    format!("prompts/{}.candidates.json", slug(entity))
}

fn ensemble_path(entity: &str) -> String {
    format!("prompts/{}.ensemble.json", slug(entity))
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    registry: EntityRegistry,
}

impl Ctx<'_> {
    fn entity(&self, name: &str) -> Result<&EntityType, CliError> {
        self.registry.get(name).ok_or_else(|| CliError::Data(format!("unknown entity type {name:?}")))
    }

    fn backend(&self) -> Result<Box<dyn GenerationBackend>, CliError> {
        let cfg = self.cfg;
        Ok(match &cfg.mock_rules {
            Some(path) => Box::new(
                ScriptedBackend::from_jsonl(path)?
                    .with_context_window(cfg.context_window)
                    .with_model_name(cfg.model_name.clone()),
            ),
            None => Box::new(RemoteBackend::new(cfg.backend_config())?),
        })
    }
}

fn inference<'a>(cfg: &PipelineConfig, backend: &'a dyn GenerationBackend, ledger: &'a TokenLedger) -> Inference<'a> {
    Inference { backend, policy: cfg.retry_policy(), ledger, max_new_tokens: cfg.max_new_tokens }
}

fn write_ledger(stage: &mut Stage<'_>, command: Command, ledger: &TokenLedger) -> Result<(), CliError> {
    stage.write_json(&format!("ledger/{}.json", command.name()), &ledger.snapshot())
}

/// Runs one command and returns the text to print on success.
pub fn run(command: Command, cfg: &PipelineConfig) -> Result<String, CliError> {
    let wd = Workdir::new(&cfg.workdir);
    let ctx = Ctx { cfg, registry: EntityRegistry::builtin() };
    let mut stage = Stage::new(&wd, command.name(), cfg.digest());
    info!(command = command.name(), workdir = %wd.root().display(), "starting");
    let summary = match command {
        Command::Ingest => ingest(&ctx, &mut stage),
        Command::Segment => segment(&mut stage),
        Command::BuildDatasets => build_datasets(&ctx, &mut stage),
        Command::GenPrompts => gen_prompts(&ctx, &mut stage),
        Command::SelectPrompts => select_prompts(&ctx, &mut stage),
        Command::Infer => infer(&ctx, &mut stage),
        Command::Evaluate => evaluate(&ctx, &mut stage),
        Command::ExportSft => export_sft(&ctx, &mut stage),
        Command::ExportDpo => export_dpo(&ctx, &mut stage),
        Command::GateDpo => gate_dpo(&ctx, &mut stage),
        Command::Report => report(&mut stage),
        Command::TokenUsage => token_usage(&mut stage),
    }?;
    stage.finish()?;
    Ok(summary)
}

fn ingest(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let notes_path = cfg.notes.as_deref().ok_or_else(|| CliError::Usage("notes is not configured".into()))?;
    let ann_path = cfg.annotations.as_deref().ok_or_else(|| CliError::Usage("annotations is not configured".into()))?;
    let notes = parse_notes(&stage.read_external(notes_path)?, notes_path)?;
    let annotations = parse_annotations(&stage.read_external(ann_path)?, ann_path, &notes, &ctx.registry)?;

    let (eval_notes, eval_annotations) = match (&cfg.eval_notes, &cfg.eval_annotations) {
        (None, None) => (notes.clone(), annotations.clone()),
        (Some(n), Some(a)) => {
            let en = parse_notes(&stage.read_external(n)?, n)?;
            let ea = parse_annotations(&stage.read_external(a)?, a, &en, &ctx.registry)?;
            (en, ea)
        }
        _ => return Err(CliError::Usage("eval-notes and eval-annotations must be set together".into())),
    };

    let corpus = Corpus { notes, annotations };
    let entities = if cfg.entities.is_empty() {
        corpus.annotated_entities(&ctx.registry)
    } else {
        for e in &cfg.entities {
            if ctx.registry.get(e).is_none() {
                return Err(CliError::Usage(format!("unknown entity type {e:?} in entities")));
            }
        }
        cfg.entities.clone()
    };
    if entities.is_empty() {
        return Err(CliError::Data("no entity types to run: the annotations are empty".into()));
    }

    stage.write_jsonl(CORPUS_NOTES, &corpus.notes)?;
    stage.write_jsonl(CORPUS_ANNOTATIONS, &corpus.annotations)?;
    stage.write_jsonl(EVAL_NOTES, &eval_notes)?;
    stage.write_jsonl(EVAL_ANNOTATIONS, &eval_annotations)?;
    stage.write_json(ENTITIES, &entities)?;
    Ok(format!(
        "ingested {} notes and {} annotations ({} evaluation notes, {} annotations); entities: {}",
        corpus.notes.len(),
        corpus.annotations.len(),
        eval_notes.len(),
        eval_annotations.len(),
        entities.join(", ")
    ))
}

fn segment(stage: &mut Stage<'_>) -> Result<String, CliError> {
    let seg = RuleSegmenter::default();
    let notes: Vec<Note> = stage.read_jsonl(CORPUS_NOTES, "ingest")?;
    let eval_notes: Vec<Note> = stage.read_jsonl(EVAL_NOTES, "ingest")?;
    let sentences: Vec<Sentence> = notes.iter().flat_map(|n| seg.segment(n)).collect();
    let eval_sentences: Vec<Sentence> = eval_notes.iter().flat_map(|n| seg.segment(n)).collect();
    stage.write_jsonl(SENTENCES, &sentences)?;
    stage.write_jsonl(EVAL_SENTENCES, &eval_sentences)?;
    Ok(format!("{} sentences, {} evaluation sentences", sentences.len(), eval_sentences.len()))
}

fn label_all(ctx: &Ctx<'_>, stage: &mut Stage<'_>, entities: &[String]) -> Result<Vec<(String, Labeled)>, CliError> {
    let sentences: Vec<Sentence> = stage.read_jsonl(SENTENCES, "segment")?;
    let annotations: Vec<GoldAnnotation> = stage.read_jsonl(CORPUS_ANNOTATIONS, "ingest")?;
    Ok(entities
        .iter()
        .map(|e| (e.clone(), label_sentences_at(&sentences, &annotations, e, ctx.cfg.match_threshold)))
        .collect())
}

fn build_datasets(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let entities: Vec<String> = stage.read_json(ENTITIES, "ingest")?;
    let labeled = label_all(ctx, stage, &entities)?;
    let split_cfg = cfg.split_config();
    let backend = if cfg.use_re { Some(ctx.backend()?) } else { None };
    let ledger = TokenLedger::new();

    let mut index = DatasetIndex::default();
    let mut revisions: Vec<RevisionLog> = Vec::new();
    let mut summary = String::new();
    for (name, lab) in &labeled {
        if lab.positives.is_empty() {
            warn!(entity = %name, "no positive sentences; skipped");
            index.skipped.push(name.clone());
            continue;
        }
        let mut ds = split(name, &lab.positives, &lab.negatives, &lab.golds, &split_cfg);
        if let Some(b) = &backend {
            let inf = inference(cfg, b.as_ref(), &ledger);
            let (kept, log) = revise_positives(name, &ds.train_pos, &inf);
            ds.train_pos = kept;
            revisions.push(log);
        }
        let _ = writeln!(
            summary,
            "{name}: train {}+{}, val {}+{}, test {}+{}{}",
            ds.train_pos.len(),
            ds.train_neg.len(),
            ds.val_pos.len(),
            ds.val_neg.len(),
            ds.test_pos.len(),
            ds.test_neg.len(),
            if ds.small_entity_mode { " (small-entity mode)" } else { "" }
        );
        stage.write_json(&dataset_path(name), &ds)?;
        stage.write(&format!("datasets/{}.tsv", slug(name)), &ds.manifest_tsv())?;
        index.entities.push(name.clone());
    }
    if index.entities.is_empty() {
        return Err(CliError::Data("no entity type has a positive sentence".into()));
    }
    stage.write_json(DATASET_INDEX, &index)?;
    if backend.is_some() {
        stage.write_json("datasets/revision.json", &revisions)?;
        write_ledger(stage, Command::BuildDatasets, &ledger)?;
    }
    Ok(summary.trim_end().to_string())
}

fn read_datasets(stage: &mut Stage<'_>) -> Result<Vec<EntityDataset>, CliError> {
    let index: DatasetIndex = stage.read_json(DATASET_INDEX, "build-datasets")?;
    index.entities.iter().map(|e| stage.read_json(&dataset_path(e), "build-datasets")).collect()
}

fn read_index(stage: &mut Stage<'_>) -> Result<Vec<String>, CliError> {
    Ok(stage.read_json::<DatasetIndex>(DATASET_INDEX, "build-datasets")?.entities)
}

fn read_ensembles(stage: &mut Stage<'_>, entities: &[String]) -> Result<Vec<PromptEnsemble>, CliError> {
    entities.iter().map(|e| stage.read_json(&ensemble_path(e), "select-prompts")).collect()
}

fn gen_prompts(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let datasets = read_datasets(stage)?;
    let pcfg = cfg.prompt_config();
    let backend = ctx.backend()?;
    let ledger = TokenLedger::new();
    let inf = inference(cfg, backend.as_ref(), &ledger);
    let mut summary = String::new();
    for ds in &datasets {
        let entity = ctx.entity(&ds.entity)?;
        let cands = generate_candidates(entity, ds, &pcfg, &inf)?;
        let unreachable =
            !cands.is_empty() && cands.iter().all(|c| c.failed && c.rounds.iter().all(|r| r.backend_error.is_some()));
        if unreachable {
            let last = cands.iter().flat_map(|c| &c.rounds).filter_map(|r| r.backend_error.clone()).next_back();
            return Err(CliError::Backend(format!(
                "every generation request for {} failed; last error: {}",
                ds.entity,
                last.unwrap_or_default()
            )));
        }
        let ok = cands.iter().filter(|c| !c.failed).count();
        let best = cands.iter().filter_map(|c| c.test_f1).fold(f64::NAN, f64::max);
        let _ = writeln!(summary, "{}: {ok}/{} candidates verified, best test F1 {best:.3}", ds.entity, cands.len());
        stage.write_json(&candidates_path(&ds.entity), &cands)?;
    }
    write_ledger(stage, Command::GenPrompts, &ledger)?;
    Ok(summary.trim_end().to_string())
}

fn select_prompts(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let entities = read_index(stage)?;
    let pcfg = ctx.cfg.prompt_config();
    let mut summary = String::new();
    for e in &entities {
        let cands: Vec<CandidatePrompt> = stage.read_json(&candidates_path(e), "gen-prompts")?;
        let ens = select_ensemble(&cands, &pcfg).map_err(|err| {
            CliError::Data(format!("{err}; rerun `promptner gen-prompts` with more rounds or candidates"))
        })?;
        let members: Vec<String> =
            ens.prompts.iter().map(|m| format!("#{} (F1 {:.3})", m.candidate_id, m.f1)).collect();
        let _ = writeln!(summary, "{e}: {}", members.join(", "));
        stage.write_json(&ensemble_path(e), &ens)?;
    }
    Ok(summary.trim_end().to_string())
}

fn infer(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let entities = read_index(stage)?;
    let ensembles = read_ensembles(stage, &entities)?;
    let sentences: Vec<Sentence> = stage.read_jsonl(EVAL_SENTENCES, "segment")?;
    let backend = ctx.backend()?;
    let ledger = TokenLedger::new();
    let inf = inference(cfg, backend.as_ref(), &ledger);

    let mut preds: Vec<Prediction> = Vec::new();
    let mut audit: Vec<ScreeningRecord> = Vec::new();
    let mut summary = String::new();
    for ens in &ensembles {
        let run = run_sentences(&sentences, ens, &inf)?;
        let advanced = run.screening.iter().filter(|r| r.advanced).count();
        let p = predictions(&run.extractions);
        let _ = writeln!(summary, "{}: {advanced} sentences advanced, {} mentions", ens.entity, p.len());
        preds.extend(p);
        audit.extend(run.screening.into_iter().map(|result| ScreeningRecord { entity: ens.entity.clone(), result }));
    }
    stage.write_jsonl(PREDICTIONS, &preds)?;
    stage.write_jsonl("inference/screening.jsonl", &audit)?;
    write_ledger(stage, Command::Infer, &ledger)?;
    Ok(summary.trim_end().to_string())
}

/// Note-level counts for one entity: each note's predictions, deduplicated,
/// are matched one-to-one against that note's gold texts.
pub fn entity_counts(preds: &[Prediction], golds: &[GoldAnnotation], entity: &str, threshold: f64) -> EntityCounts {
    let mut notes: BTreeMap<&str, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for p in preds.iter().filter(|p| p.entity == entity) {
        if seen.insert((p.note_id.as_str(), dedup_key(&p.text))) {
            notes.entry(&p.note_id).or_default().0.push(&p.text);
        }
    }
    for g in golds.iter().filter(|g| g.entity_type == entity) {
        notes.entry(&g.note_id).or_default().1.push(&g.text);
    }
    notes.values().map(|(p, g)| match_entities(p, g, threshold)).sum()
}

fn evaluate(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let entities = read_index(stage)?;
    let preds: Vec<Prediction> = stage.read_jsonl(PREDICTIONS, "infer")?;
    let golds: Vec<GoldAnnotation> = stage.read_jsonl(EVAL_ANNOTATIONS, "ingest")?;
    let rows: Vec<(String, EntityCounts)> =
        entities.iter().map(|e| (e.clone(), entity_counts(&preds, &golds, e, ctx.cfg.match_threshold))).collect();
    let report = MetricsReport::<f64>::from_counts(rows);
    stage.write_json(REPORT_JSON, &report)?;
    Ok(format!("micro F1 {:.3}, macro F1 {:.3}", report.micro.f1, report.macro_avg.f1))
}

fn report(stage: &mut Stage<'_>) -> Result<String, CliError> {
    let report: MetricsReport<f64> = stage.read_json(REPORT_JSON, "evaluate")?;
    let table = report.render_table();
    stage.write("eval/report.txt", &table)?;
    stage.write("eval/report.tsv", &report.render_tsv())?;
    Ok(table.trim_end().to_string())
}

fn export_sft(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let entities = read_index(stage)?;
    let ensembles = read_ensembles(stage, &entities)?;
    let labeled = label_all(ctx, stage, &entities)?;
    let sources: Vec<SftSource<'_>> = labeled
        .iter()
        .zip(&ensembles)
        .map(|((name, lab), ens)| {
            let top = ens.prompts.first().ok_or_else(|| CliError::Data(format!("ensemble for {name} is empty")))?;
            Ok(SftSource {
                entity: name,
                system_prompt: &top.text,
                positives: &lab.positives,
                negatives: &lab.negatives,
                golds: &lab.golds,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let ds = build_sft_dataset(&sources, &ctx.cfg.sft_config());
    stage.write_jsonl(SFT_TRAIN, &ds.train)?;
    stage.write_jsonl("posttrain/sft_val.jsonl", &ds.val)?;
    stage.write_json("posttrain/sft_stats.json", &SftStats { entities: ds.stats.clone(), skipped: ds.skipped })?;
    let mut summary = String::new();
    for (e, s) in &ds.stats {
        let _ = writeln!(summary, "{e}: train {}+{}, val {}+{}", s.train_pos, s.train_neg, s.val_pos, s.val_neg);
    }
    Ok(summary.trim_end().to_string())
}

fn export_dpo(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let cfg = ctx.cfg;
    let train: Vec<SftExample> = stage.read_jsonl(SFT_TRAIN, "export-sft")?;
    let backend = ctx.backend()?;
    let ledger = TokenLedger::new();
    let inf = inference(cfg, backend.as_ref(), &ledger);
    let results = predict_sft(&train, &cfg.sft_model_name, &inf);
    if !train.is_empty() && results.iter().all(|r| r.is_err()) {
        let last = results.iter().rev().find_map(|r| r.as_ref().err()).map(|e| e.to_string());
        return Err(CliError::Backend(format!(
            "every prediction request to {} failed; last error: {}",
            cfg.sft_model_name,
            last.unwrap_or_default()
        )));
    }
    let replies: Vec<Option<String>> = results.iter().map(|r| r.as_ref().ok().cloned()).collect();
    let records: Vec<SftPrediction> = train
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(index, (ex, r))| SftPrediction {
            index,
            entity: ex.entity.clone(),
            incorrect: r.as_ref().is_ok_and(|reply| is_incorrect(ex, reply, cfg.match_threshold)),
            reply: r.as_ref().ok().cloned(),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    let pairs = build_dpo_dataset(&train, &replies, cfg.match_threshold);
    stage.write_jsonl("posttrain/sft_predictions.jsonl", &records)?;
    stage.write_jsonl("posttrain/dpo_pairs.jsonl", &pairs)?;
    write_ledger(stage, Command::ExportDpo, &ledger)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    Ok(format!("{} preference pairs from {} predictions ({failed} failed)", pairs.len(), records.len()))
}

fn gate_dpo(ctx: &Ctx<'_>, stage: &mut Stage<'_>) -> Result<String, CliError> {
    let report: MetricsReport<f64> = stage.read_json(REPORT_JSON, "evaluate")?;
    let eligible = gate_for_dpo(&report, ctx.cfg.dpo_min_f1);
    let decision =
        GateDecision { micro_f1: report.micro.f1, macro_f1: report.macro_avg.f1, min_f1: ctx.cfg.dpo_min_f1, eligible };
    stage.write_json("posttrain/gate.json", &decision)?;
    Ok(format!(
        "{}: micro F1 {:.3}, macro F1 {:.3}, threshold {}",
        if eligible { "eligible for DPO" } else { "not eligible for DPO" },
        decision.micro_f1,
        decision.macro_f1,
        decision.min_f1
    ))
}

fn token_usage(stage: &mut Stage<'_>) -> Result<String, CliError> {
    let mut commands = BTreeMap::new();
    for c in Command::ALL {
        let rel = format!("ledger/{}.json", c.name());
        if stage.workdir().exists(&rel) {
            let report: LedgerReport = stage.read_json(&rel, c.name())?;
            commands.insert(c.name().to_string(), report);
        }
    }
    let total = LedgerReport::merge(commands.values());
    let mut out = String::new();
    for (name, r) in &commands {
        let _ = writeln!(out, "{name}: {} requests, {} tokens", r.requests, r.total_tokens);
    }
    out.push_str(&total.render_table());
    stage.write_json("usage/token_usage.json", &UsageSummary { commands, total })?;
    Ok(out.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(note: &str, text: &str) -> Prediction {
        Prediction { note_id: note.into(), sentence_index: 0, entity: "Stage".into(), text: text.into() }
    }

    fn gold(note: &str, text: &str) -> GoldAnnotation {
        GoldAnnotation { note_id: note.into(), entity_type: "Stage".into(), text: text.into() }
    }

    #[test]
    fn note_level_counts() {
        let preds = [pred("a", "Stage III"), pred("a", "stage III."), pred("a", "Grade B"), pred("b", "Stage II")];
        let golds = [gold("a", "Stage III"), gold("c", "Stage IV")];
        // a: one deduplicated hit plus one spurious; b: spurious; c: missed.
        assert_eq!(entity_counts(&preds, &golds, "Stage", 80.0), EntityCounts::new(1, 2, 1));
        assert_eq!(entity_counts(&preds, &golds, "Age", 80.0), EntityCounts::default());
    }

    #[test]
    fn predictions_do_not_cross_notes() {
        let preds = [pred("a", "Stage III")];
        let golds = [gold("b", "Stage III")];
        assert_eq!(entity_counts(&preds, &golds, "Stage", 80.0), EntityCounts::new(0, 1, 1));
    }
}
