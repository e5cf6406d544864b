//! Batch pipeline commands: template extraction, split construction,
//! concept enhancement, classifier training, and evaluation. Every command
//! is deterministic under a fixed seed; all artifacts are plain TSV/JSON.

use crate::corpus::{read_corpus, write_corpus};
use crate::enhance::{
    build_bipartite_graph, denoise_top_n, fingerprint_features, graph_features,
    materialize_enhanced, stage_a_filter, train_ebm, BipartiteGraph, EdgeLabel, EncoderKind,
    EnhanceConfig,
};
use crate::learn::{
    evaluate_topk, prepare_examples, train_classifier, Classifier, ClassifierConfig, IrmConfig,
    TrainExample, TrainMode,
};
use crate::numerics::{load_model, save_model};
use crate::splits::{
    make_covariate_split, make_label_split, summarize_shift, validate_manifest,
    CovariateCriterion, SplitError, SplitManifest,
};
use crate::templates::{assign_corpus_templates, CorpusTemplates, Reaction, Template};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_IO: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;
pub const EXIT_NONFINITE: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(String),
    #[error("empty output: {0}")]
    EmptyOutput(String),
    #[error("infeasible split: {0}")]
    Infeasible(String),
    #[error("invariant breach: {0}")]
    InvariantBreach(String),
    #[error("non-finite training: {0}")]
    NonFinite(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::EmptyOutput(_) => EXIT_EMPTY,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::InvariantBreach(_) => EXIT_INVARIANT,
            CliError::NonFinite(_) => EXIT_NONFINITE,
            CliError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<crate::corpus::CorpusError> for CliError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        CliError::Infeasible(e.to_string())
    }
}

impl From<crate::enhance::EnhanceError> for CliError {
    fn from(e: crate::enhance::EnhanceError) -> Self {
        match e {
            crate::enhance::EnhanceError::Numeric(crate::numerics::NumError::NonFinite(m)) => {
                CliError::NonFinite(m)
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<crate::learn::LearnError> for CliError {
    fn from(e: crate::learn::LearnError) -> Self {
        match e {
            crate::learn::LearnError::Numeric(crate::numerics::NumError::NonFinite(m)) => {
                CliError::NonFinite(m)
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| CliError::Io(e.to_string()))?;
    file.write_all(b"\n")?;
    Ok(())
}

fn content_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

/// Resolve the output directory: explicit flag, else RETROSHIFT_OUT_DIR,
/// else ./out.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("RETROSHIFT_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_template_table(path: &Path, templates: &CorpusTemplates) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "template_id\tradius\tcanonical_string\tfrequency")?;
    for t in &templates.table {
        writeln!(file, "{}\t{}\t{}\t{}", t.template_id, t.radius, t.canonical_string, t.frequency)?;
    }
    Ok(())
}

fn write_assignment(path: &Path, templates: &CorpusTemplates) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "reaction_id\ttemplate_id")?;
    for (rid, tid) in &templates.assignment {
        writeln!(file, "{rid}\t{tid}")?;
    }
    Ok(())
}

/// extract-templates: template table, per-reaction assignment, skip report.
pub fn cmd_extract(corpus_path: &Path, radius: usize, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let corpus = read_corpus(corpus_path)?;
    let templates = assign_corpus_templates(&corpus, radius);
    if templates.table.is_empty() {
        return Err(CliError::EmptyOutput(format!(
            "no templates extracted at radius {radius} from {} reactions",
            corpus.len()
        )));
    }
    write_template_table(&out.join(format!("templates_r{radius}.tsv")), &templates)?;
    write_assignment(&out.join(format!("assignments_r{radius}.tsv")), &templates)?;
    write_json(&out.join("skip_report.json"), &templates.skipped)?;
    eprintln!(
        "extracted {} templates over {} reactions ({} skipped)",
        templates.table.len(),
        templates.assignment.len(),
        templates.skipped.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKindArg {
    LabelMinimal,
    LabelRetro,
    CovariateSize,
    CovariateScaffold,
}

pub struct SplitParams {
    pub kind: SplitKindArg,
    pub radius: usize,
    pub ood_fraction: f64,
    pub min_class_size: usize,
    pub seed: u64,
}

/// split: manifest + shift summary, validated before writing.
pub fn cmd_split(corpus_path: &Path, params: &SplitParams, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let corpus = read_corpus(corpus_path)?;
    let radius = match params.kind {
        SplitKindArg::LabelMinimal => 0,
        SplitKindArg::LabelRetro => params.radius.max(1),
        SplitKindArg::CovariateSize | SplitKindArg::CovariateScaffold => 0,
    };
    let templates = assign_corpus_templates(&corpus, radius);
    let manifest = match params.kind {
        SplitKindArg::LabelMinimal | SplitKindArg::LabelRetro => {
            make_label_split(&corpus, &templates, params.ood_fraction, params.seed)?
        }
        SplitKindArg::CovariateSize => make_covariate_split(
            &corpus,
            &templates,
            CovariateCriterion::Size,
            params.min_class_size,
            params.ood_fraction,
            params.seed,
        )?,
        SplitKindArg::CovariateScaffold => make_covariate_split(
            &corpus,
            &templates,
            CovariateCriterion::Scaffold,
            params.min_class_size,
            params.ood_fraction,
            params.seed,
        )?,
    };
    let report = validate_manifest(&manifest, &corpus, &templates);
    if !report.all_passed() {
        return Err(CliError::InvariantBreach(format!("{report:?}")));
    }
    manifest.save(&out.join("manifest.json"))?;
    write_json(&out.join("validation.json"), &report)?;
    write_json(&out.join("summary.json"), &summarize_shift(&manifest, &corpus, &templates))?;
    for (name, ids) in manifest.partitions.iter() {
        eprintln!("{name}: {} reactions", ids.len());
    }
    eprintln!("discarded: {}", manifest.metadata.discarded.len());
    Ok(())
}

fn load_manifest(path: &Path) -> Result<SplitManifest, CliError> {
    SplitManifest::load(path).map_err(|e| CliError::Io(e.to_string()))
}

fn partition_reactions<'a>(
    corpus: &'a [Reaction],
    ids: &[String],
) -> Result<Vec<&'a Reaction>, CliError> {
    let by_id: BTreeMap<&str, &Reaction> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    ids.iter()
        .map(|rid| {
            by_id
                .get(rid.as_str())
                .copied()
                .ok_or_else(|| CliError::Io(format!("manifest id {rid} missing from corpus")))
        })
        .collect()
}

fn write_edge_tsv(
    path: &Path,
    graph: &BipartiteGraph,
    energies: &BTreeMap<(usize, usize), f64>,
    relabel: &BTreeSet<(usize, usize)>,
) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "m_id\tt_id\tlabel\tenergy")?;
    let mut rows: Vec<(&str, &str, &str, String)> = Vec::new();
    for e in &graph.edges {
        let pair = (e.molecule, e.template);
        let label = match e.label {
            EdgeLabel::Gt => "gt",
            EdgeLabel::Candidate if relabel.contains(&pair) => "enhanced",
            EdgeLabel::Candidate => "candidate",
        };
        let energy = energies.get(&pair).map(|f| format!("{f}")).unwrap_or_default();
        rows.push((
            graph.molecules[e.molecule].id.as_str(),
            graph.templates[e.template].id.as_str(),
            label,
            energy,
        ));
    }
    rows.sort();
    for (m, t, l, en) in rows {
        writeln!(file, "{m}\t{t}\t{l}\t{en}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EnhanceReport {
    seed: u64,
    manifest_hash: String,
    train_reactions: usize,
    molecule_nodes: usize,
    template_nodes: usize,
    full_edges: usize,
    stage_a_retained: usize,
    stage_a_removed: usize,
    gt_edges: usize,
    enhanced_edges: usize,
    top_n: usize,
    sandwich_holds: bool,
    count_bound_holds: bool,
}

/// enhance: Stage A/B/C over the train partition; artifacts plus the
/// sandwich-invariant check (exit 5 on breach).
pub fn cmd_enhance(
    corpus_path: &Path,
    manifest_path: &Path,
    cfg: &EnhanceConfig,
    radius: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let corpus = read_corpus(corpus_path)?;
    let manifest = load_manifest(manifest_path)?;
    let train: Vec<&Reaction> = partition_reactions(&corpus, &manifest.partitions.train)?;
    let train_owned: Vec<Reaction> = train.iter().map(|r| (*r).clone()).collect();

    let radius = radius.max(1);
    let templates = assign_corpus_templates(&train_owned, radius);
    if templates.table.is_empty() {
        return Err(CliError::EmptyOutput("no templates on the train partition".into()));
    }
    let full = build_bipartite_graph(&train_owned, &templates)?;
    let (filtered, stage_a) = stage_a_filter(&full, cfg.max_matches)?;

    let features = match cfg.encoder {
        EncoderKind::Fingerprint { nbits, radius } => {
            fingerprint_features(&filtered, nbits, radius)?
        }
        EncoderKind::Mpnn { .. } => graph_features(&filtered)?,
    };
    let (model, log) = train_ebm(&filtered, &features, cfg, seed)?;
    let (enhanced, selected) =
        denoise_top_n(&filtered, &model, &features, cfg.top_n, cfg.k_hops, cfg.score_highest)?;

    // sandwich invariant: E_gt <= E_enh <= E'_enh <= E_full
    let gt_pairs = filtered.edge_pairs(Some(EdgeLabel::Gt));
    let filtered_pairs = filtered.edge_pairs(None);
    let full_pairs = full.edge_pairs(None);
    let sandwich = gt_pairs.is_subset(&enhanced)
        && enhanced.is_subset(&filtered_pairs)
        && filtered_pairs.is_subset(&full_pairs);
    let count_bound = enhanced.len() <= gt_pairs.len() * (cfg.top_n + 1);

    let energies: BTreeMap<(usize, usize), f64> =
        selected.iter().map(|&(m, t, f)| ((m, t), f)).collect();
    let enhanced_only: BTreeSet<(usize, usize)> =
        enhanced.difference(&gt_pairs).copied().collect();

    let mut mol_file = std::io::BufWriter::new(std::fs::File::create(out.join("molecules.tsv"))?);
    writeln!(mol_file, "m_id\tsmiles")?;
    for m in &filtered.molecules {
        writeln!(mol_file, "{}\t{}", m.id, m.smiles)?;
    }
    drop(mol_file);
    write_template_table(&out.join("templates.tsv"), &templates)?;
    write_edge_tsv(
        &out.join("stage_a_edges.tsv"),
        &filtered,
        &BTreeMap::new(),
        &BTreeSet::new(),
    )?;
    write_edge_tsv(&out.join("enhanced_edges.tsv"), &filtered, &energies, &enhanced_only)?;
    save_model(&out.join("ebm_checkpoint.json"), "ebm", &model)?;
    write_json(&out.join("training_log.json"), &log)?;

    // enhanced corpus: observed train rows plus one row per enhanced edge
    let selected_pairs: Vec<(usize, usize)> = enhanced_only.iter().copied().collect();
    let materialized = materialize_enhanced(&filtered, &selected_pairs, cfg.max_matches);
    let mut rows: Vec<Reaction> = train_owned.clone();
    rows.extend(materialized);
    write_corpus(&out.join("enhanced_corpus.tsv"), &rows, true)?;

    let report = EnhanceReport {
        seed,
        manifest_hash: content_hash(manifest_path)?,
        train_reactions: train_owned.len(),
        molecule_nodes: filtered.molecules.len(),
        template_nodes: filtered.templates.len(),
        full_edges: full.edges.len(),
        stage_a_retained: stage_a.retained,
        stage_a_removed: stage_a.removed,
        gt_edges: gt_pairs.len(),
        enhanced_edges: enhanced.len(),
        top_n: cfg.top_n,
        sandwich_holds: sandwich,
        count_bound_holds: count_bound,
    };
    write_json(&out.join("enhance_report.json"), &report)?;
    if !sandwich || !count_bound {
        return Err(CliError::InvariantBreach(format!(
            "sandwich {sandwich}, count bound {count_bound}"
        )));
    }
    eprintln!(
        "enhance: {} gt, {} enhanced, {} filtered, {} full",
        gt_pairs.len(),
        enhanced.len(),
        filtered_pairs.len(),
        full_pairs.len()
    );
    Ok(())
}

/// Extract the template id from an enhanced-row id ("enh_<mol>_<template>").
fn enhanced_template_id(row_id: &str) -> Option<&str> {
    let rest = row_id.strip_prefix("enh_")?;
    let (_mol, tid) = rest.split_once('_')?;
    Some(tid)
}

#[derive(Serialize)]
struct MetricsReport {
    mode: String,
    seed: u64,
    radius: usize,
    manifest_hash: String,
    enhanced_corpus: Option<String>,
    train_only_inputs: bool,
    partitions: BTreeMap<String, BTreeMap<String, f64>>,
}

pub struct TrainParams {
    pub mode: TrainMode,
    pub irm: IrmConfig,
    pub classifier: ClassifierConfig,
    pub radius: Option<usize>,
    pub seed: u64,
    pub include_train_metrics: bool,
    pub max_matches: usize,
}

fn eval_radius(manifest: &SplitManifest, requested: Option<usize>) -> usize {
    match requested {
        Some(r) => r,
        None => {
            if manifest.split_kind.is_label() {
                manifest.template_radius
            } else {
                manifest.template_radius.max(1)
            }
        }
    }
}

fn evaluate_partitions(
    corpus: &[Reaction],
    manifest: &SplitManifest,
    classifier: &Classifier,
    template_map: &BTreeMap<String, Template>,
    include_train: bool,
    max_matches: usize,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, CliError> {
    let ks = [1usize, 3, 5, 10];
    let mut out = BTreeMap::new();
    let mut eval_one = |name: &str, ids: &[String]| -> Result<(), CliError> {
        let refs = partition_reactions(corpus, ids)?;
        let result = evaluate_topk(classifier, &refs, template_map, &ks, max_matches)?;
        let row: BTreeMap<String, f64> =
            result.topk.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        out.insert(name.to_string(), row);
        Ok(())
    };
    if include_train {
        eval_one("train", &manifest.partitions.train)?;
    }
    eval_one("test_id", &manifest.partitions.test_id)?;
    eval_one("test_ood", &manifest.partitions.test_ood)?;
    Ok(out)
}

/// train: fit the reference classifier on the manifest's train partition
/// (optionally with an enhanced corpus prepended) and report ID/OOD top-k.
pub fn cmd_train(
    corpus_path: &Path,
    manifest_path: &Path,
    enhanced_path: Option<&Path>,
    params: &TrainParams,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let corpus = read_corpus(corpus_path)?;
    let manifest = load_manifest(manifest_path)?;
    let radius = eval_radius(&manifest, params.radius);
    let train: Vec<&Reaction> = partition_reactions(&corpus, &manifest.partitions.train)?;
    let train_owned: Vec<Reaction> = train.iter().map(|r| (*r).clone()).collect();

    let templates = assign_corpus_templates(&train_owned, radius);
    let minimal = if radius == 0 {
        templates.clone()
    } else {
        assign_corpus_templates(&train_owned, 0)
    };
    if templates.table.is_empty() {
        return Err(CliError::EmptyOutput("no templates on the train partition".into()));
    }

    // optional enhanced corpus rows, prepended; observed duplicates collapse
    let mut combined: Vec<Reaction> = Vec::new();
    let mut enhanced_assignment: BTreeMap<String, String> = templates.assignment.clone();
    if let Some(path) = enhanced_path {
        let known_tids: BTreeSet<&str> =
            templates.table.iter().map(|t| t.template_id.as_str()).collect();
        let enhanced_rows = read_corpus(path)?;
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for row in enhanced_rows {
            if seen.contains(&row.id) {
                continue;
            }
            if row.provenance == crate::templates::Provenance::Enhanced {
                let Some(tid) = enhanced_template_id(&row.id) else { continue };
                if !known_tids.contains(tid) {
                    continue;
                }
                enhanced_assignment.insert(row.id.clone(), tid.to_string());
            }
            seen.insert(row.id.clone());
            combined.push(row);
        }
        for r in &train_owned {
            if !seen.contains(&r.id) {
                combined.push(r.clone());
            }
        }
    } else {
        combined = train_owned.clone();
    }

    let refs: Vec<&Reaction> = combined.iter().collect();
    let (examples, vocab, aux_vocab) = prepare_examples(
        &refs,
        &enhanced_assignment,
        &minimal.assignment,
        &params.irm,
        &params.classifier,
    )?;
    let (classifier, log) = train_classifier(
        &examples,
        vocab,
        aux_vocab,
        params.mode,
        &params.irm,
        &params.classifier,
        params.seed,
    )?;
    save_model(&out.join("classifier_checkpoint.json"), "classifier", &classifier)?;
    write_json(&out.join("training_log.json"), &log)?;

    let template_map: BTreeMap<String, Template> = templates
        .table
        .iter()
        .filter(|t| classifier.vocabulary.contains(&t.template_id))
        .map(|t| (t.template_id.clone(), t.clone()))
        .collect();
    let partitions = evaluate_partitions(
        &corpus,
        &manifest,
        &classifier,
        &template_map,
        params.include_train_metrics,
        params.max_matches,
    )?;
    let report = MetricsReport {
        mode: match params.mode {
            TrainMode::Erm => "erm".into(),
            TrainMode::Irm => "irm".into(),
        },
        seed: params.seed,
        radius,
        manifest_hash: content_hash(manifest_path)?,
        enhanced_corpus: enhanced_path.map(|p| p.display().to_string()),
        train_only_inputs: true,
        partitions,
    };
    write_json(&out.join("metrics_report.json"), &report)?;
    for (name, row) in &report.partitions {
        let mut line = format!("{name}:");
        for (k, v) in row {
            line.push_str(&format!(" top-{k} {:.3}", v));
        }
        eprintln!("{line}");
    }
    Ok(())
}

/// eval: score a saved classifier checkpoint on a manifest's partitions.
pub fn cmd_eval(
    corpus_path: &Path,
    manifest_path: &Path,
    checkpoint_path: &Path,
    include_train: bool,
    max_matches: usize,
    out: &Path,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let corpus = read_corpus(corpus_path)?;
    let manifest = load_manifest(manifest_path)?;
    let classifier: Classifier = load_model(checkpoint_path, "classifier")
        .map_err(|e| CliError::Io(e.to_string()))?;
    let train: Vec<&Reaction> = partition_reactions(&corpus, &manifest.partitions.train)?;
    let train_owned: Vec<Reaction> = train.iter().map(|r| (*r).clone()).collect();
    let radius = eval_radius(&manifest, None);
    let templates = assign_corpus_templates(&train_owned, radius);
    let template_map: BTreeMap<String, Template> = templates
        .table
        .iter()
        .filter(|t| classifier.vocabulary.contains(&t.template_id))
        .map(|t| (t.template_id.clone(), t.clone()))
        .collect();
    let partitions = evaluate_partitions(
        &corpus,
        &manifest,
        &classifier,
        &template_map,
        include_train,
        max_matches,
    )?;
    let report = MetricsReport {
        mode: "eval".into(),
        seed: 0,
        radius,
        manifest_hash: content_hash(manifest_path)?,
        enhanced_corpus: None,
        train_only_inputs: true,
        partitions,
    };
    write_json(&out.join("metrics_report.json"), &report)?;
    Ok(())
}

// re-exported for the binary and the tests
pub use crate::learn::TrainMode as Mode;

#[allow(unused)]
fn _assert_examples_type(_e: &TrainExample) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enhanced_id_parsing() {
        assert_eq!(enhanced_template_id("enh_m000003_r1_ab12cd34"), Some("r1_ab12cd34"));
        assert_eq!(enhanced_template_id("obs_001"), None);
        assert_eq!(enhanced_template_id("enh_nounderscore"), None);
    }

    #[test]
    fn out_dir_resolution() {
        let explicit = resolve_out_dir(Some(PathBuf::from("/tmp/x")));
        assert_eq!(explicit, PathBuf::from("/tmp/x"));
    }
}
