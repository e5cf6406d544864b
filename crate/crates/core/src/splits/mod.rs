//! Benchmark split construction: label shift over templates (whole template
//! classes held out) and covariate shift over target molecules (per-class
//! size or scaffold ordering), both seeded and reproducible.

use crate::templates::{CorpusTemplates, Reaction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("infeasible split: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    LabelMinimal,
    LabelRetro,
    CovariateSize,
    CovariateScaffold,
}

impl SplitKind {
    pub fn is_label(self) -> bool {
        matches!(self, SplitKind::LabelMinimal | SplitKind::LabelRetro)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateCriterion {
    Size,
    Scaffold,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Partitions {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test_id: Vec<String>,
    pub test_ood: Vec<String>,
}

impl Partitions {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Vec<String>)> {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test_id", &self.test_id),
            ("test_ood", &self.test_ood),
        ]
        .into_iter()
    }

    pub fn total(&self) -> usize {
        self.iter().map(|(_, v)| v.len()).sum()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitMetadata {
    pub counts: BTreeMap<String, usize>,
    pub discarded: Vec<String>,
    pub template_classes_id: usize,
    pub template_classes_ood: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split_kind: SplitKind,
    pub seed: u64,
    pub template_radius: usize,
    pub partitions: Partitions,
    pub metadata: SplitMetadata,
}

impl SplitManifest {
    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, self).map_err(std::io::Error::other)
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<SplitManifest> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        serde_json::from_reader(file).map_err(std::io::Error::other)
    }
}

/// 7:1:1 partition of already-shuffled ids; val and test_id get
/// round(n / 9) each and train takes the rest.
fn split_711(mut ids: Vec<String>, rng: &mut impl Rng) -> (Vec<String>, Vec<String>, Vec<String>) {
    ids.shuffle(rng);
    let n = ids.len();
    let side = ((n as f64) / 9.0).round() as usize;
    let test_id = ids.split_off(n - side);
    let val = ids.split_off(ids.len() - side);
    (ids, val, test_id)
}

fn finalize(
    split_kind: SplitKind,
    seed: u64,
    template_radius: usize,
    partitions: Partitions,
    discarded: Vec<String>,
    templates: &CorpusTemplates,
) -> SplitManifest {
    let assignment = &templates.assignment;
    let side_classes = |ids: &[Vec<String>]| -> usize {
        ids.iter()
            .flatten()
            .filter_map(|rid| assignment.get(rid))
            .collect::<BTreeSet<_>>()
            .len()
    };
    let id_side = side_classes(&[
        partitions.train.clone(),
        partitions.val.clone(),
        partitions.test_id.clone(),
    ]);
    let ood_side = side_classes(&[partitions.test_ood.clone()]);
    let mut counts: BTreeMap<String, usize> =
        partitions.iter().map(|(k, v)| (k.to_string(), v.len())).collect();
    counts.insert("discarded".into(), discarded.len());
    SplitManifest {
        split_kind,
        seed,
        template_radius,
        partitions,
        metadata: SplitMetadata {
            counts,
            discarded,
            template_classes_id: id_side,
            template_classes_ood: ood_side,
        },
    }
}

/// Label-shift split: whole template classes are sampled uniformly at random
/// into test_ood until it reaches `ood_fraction` of the assigned corpus; the
/// remaining reactions are split 7:1:1.
pub fn make_label_split(
    corpus: &[Reaction],
    templates: &CorpusTemplates,
    ood_fraction: f64,
    seed: u64,
) -> Result<SplitManifest, SplitError> {
    if !(0.0..0.5).contains(&ood_fraction) || ood_fraction <= 0.0 {
        return Err(SplitError::Infeasible(format!(
            "ood_fraction {ood_fraction} outside (0, 0.5)"
        )));
    }
    let classes = templates.classes();
    let assigned: usize = classes.values().map(|v| v.len()).sum();
    if assigned == 0 {
        return Err(SplitError::Infeasible("no reactions carry a template".into()));
    }
    let budget = ((assigned as f64) * ood_fraction).ceil().max(1.0) as usize;
    // sampling whole classes overshoots the target; tolerated up to twice the
    // mean class size beyond it
    let mean_class = (assigned as f64 / classes.len() as f64).ceil() as usize;
    let cap = budget + 2 * mean_class;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<&String> = classes.keys().collect();
    let mut test_ood: Vec<String> = Vec::new();
    while test_ood.len() < budget {
        let idx = rng.random_range(0..pool.len());
        let tid = pool.swap_remove(idx);
        test_ood.extend(classes[tid].iter().cloned());
        if test_ood.len() > cap {
            return Err(SplitError::Infeasible(format!(
                "moving class {tid} puts test_ood at {} reactions, past the tolerated {cap} \
                 (budget {budget})",
                test_ood.len()
            )));
        }
    }
    let ood_set: BTreeSet<&String> = test_ood.iter().collect();
    let rest: Vec<String> = classes
        .values()
        .flatten()
        .filter(|rid| !ood_set.contains(rid))
        .cloned()
        .collect();
    let (train, val, test_id) = split_711(rest, &mut rng);
    let mut test_ood = test_ood;
    test_ood.sort();

    let known: BTreeSet<&String> = templates.assignment.keys().collect();
    let discarded: Vec<String> =
        corpus.iter().filter(|r| !known.contains(&r.id)).map(|r| r.id.clone()).collect();
    let partitions = Partitions { train, val, test_id, test_ood };
    Ok(finalize(
        if templates.radius == 0 { SplitKind::LabelMinimal } else { SplitKind::LabelRetro },
        seed,
        templates.radius,
        partitions,
        discarded,
        templates,
    ))
}

/// Scaffold complexity key: (ring count, heavy atoms, canonical string) of
/// the product's Murcko scaffold. Total, deterministic, monotone in
/// complexity; acyclic products share the empty-scaffold key.
pub fn scaffold_key(reaction: &Reaction) -> (usize, usize, String) {
    let scaffold = crate::molgraph::murcko_scaffold(&reaction.product);
    (
        scaffold.ring_count(),
        scaffold.heavy_atom_count(),
        crate::molgraph::to_canonical_smiles(&scaffold, false),
    )
}

/// Covariate-shift split: per minimal-template class, order by the criterion
/// ascending, send the top `max(1, round(size * ood_fraction))` to test_ood,
/// and split the remainder 7:1:1. Classes below `min_class_size` are
/// discarded entirely.
pub fn make_covariate_split(
    corpus: &[Reaction],
    templates: &CorpusTemplates,
    criterion: CovariateCriterion,
    min_class_size: usize,
    ood_fraction: f64,
    seed: u64,
) -> Result<SplitManifest, SplitError> {
    if min_class_size < 2 {
        return Err(SplitError::Infeasible("min_class_size must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&ood_fraction) || ood_fraction <= 0.0 {
        return Err(SplitError::Infeasible(format!(
            "ood_fraction {ood_fraction} outside (0, 1)"
        )));
    }
    let by_id: BTreeMap<&str, &Reaction> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let classes = templates.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partitions = Partitions::default();
    let mut discarded: Vec<String> = Vec::new();
    let mut retained_any = false;

    for (_tid, members) in &classes {
        if members.len() < min_class_size {
            discarded.extend(members.iter().cloned());
            continue;
        }
        retained_any = true;
        let mut ordered: Vec<&String> = members.iter().collect();
        match criterion {
            CovariateCriterion::Size => {
                ordered.sort_by_key(|rid| {
                    (by_id[rid.as_str()].product.heavy_atom_count(), (*rid).clone())
                });
            }
            CovariateCriterion::Scaffold => {
                ordered.sort_by_key(|rid| {
                    let key = scaffold_key(by_id[rid.as_str()]);
                    (key.0, key.1, key.2, (*rid).clone())
                });
            }
        }
        let size = ordered.len();
        let ood = (((size as f64) * ood_fraction).round() as usize)
            .max(1)
            .min(size - 1);
        let ood_ids: Vec<String> = ordered[size - ood..].iter().map(|s| (*s).clone()).collect();
        let rest: Vec<String> = ordered[..size - ood].iter().map(|s| (*s).clone()).collect();
        let (train, val, test_id) = split_711(rest, &mut rng);
        partitions.train.extend(train);
        partitions.val.extend(val);
        partitions.test_id.extend(test_id);
        partitions.test_ood.extend(ood_ids);
    }
    if !retained_any {
        return Err(SplitError::Infeasible(format!(
            "no template class reaches min_class_size {min_class_size}"
        )));
    }
    // reactions the template pass skipped are discarded as well
    let known: BTreeSet<&String> = templates.assignment.keys().collect();
    discarded.extend(
        corpus.iter().filter(|r| !known.contains(&r.id)).map(|r| r.id.clone()),
    );
    discarded.sort();

    let kind = match criterion {
        CovariateCriterion::Size => SplitKind::CovariateSize,
        CovariateCriterion::Scaffold => SplitKind::CovariateScaffold,
    };
    Ok(finalize(kind, seed, templates.radius, partitions, discarded, templates))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Check every manifest invariant against the corpus it was built from.
/// Template assignments are recomputed at the manifest's radius.
pub fn validate_manifest(
    manifest: &SplitManifest,
    corpus: &[Reaction],
    templates: &CorpusTemplates,
) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(ValidationCheck { name: name.to_string(), passed, detail });
    };

    let parts: Vec<(&str, &Vec<String>)> = manifest.partitions.iter().collect();
    let mut disjoint = true;
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let a: BTreeSet<&String> = parts[i].1.iter().collect();
            if parts[j].1.iter().any(|x| a.contains(x)) {
                disjoint = false;
            }
        }
    }
    push("partitions_disjoint", disjoint, String::new());

    let mut union: BTreeSet<String> = manifest
        .partitions
        .iter()
        .flat_map(|(_, v)| v.iter().cloned())
        .collect();
    let union_size_before = union.len() + manifest.metadata.discarded.len();
    union.extend(manifest.metadata.discarded.iter().cloned());
    let corpus_ids: BTreeSet<String> = corpus.iter().map(|r| r.id.clone()).collect();
    push(
        "union_plus_discarded_covers_corpus",
        union == corpus_ids && union.len() == union_size_before,
        format!("{} vs {} corpus ids", union.len(), corpus_ids.len()),
    );

    push(
        "partitions_nonempty",
        manifest.partitions.iter().all(|(_, v)| !v.is_empty()),
        String::new(),
    );

    let tid_of = |rid: &String| templates.assignment.get(rid);
    if manifest.split_kind.is_label() {
        let id_side: BTreeSet<_> = manifest
            .partitions
            .train
            .iter()
            .chain(&manifest.partitions.val)
            .chain(&manifest.partitions.test_id)
            .filter_map(tid_of)
            .collect();
        let ood_side: BTreeSet<_> =
            manifest.partitions.test_ood.iter().filter_map(tid_of).collect();
        let overlap: Vec<_> = id_side.intersection(&ood_side).collect();
        push(
            "label_template_disjointness",
            overlap.is_empty(),
            format!("{} overlapping template ids", overlap.len()),
        );
    } else {
        let train_tids: BTreeSet<_> =
            manifest.partitions.train.iter().filter_map(tid_of).collect();
        let ood_tids: BTreeSet<_> =
            manifest.partitions.test_ood.iter().filter_map(tid_of).collect();
        let all_tids: BTreeSet<_> = manifest
            .partitions
            .iter()
            .flat_map(|(_, v)| v.iter())
            .filter_map(tid_of)
            .collect();
        let both_sides = all_tids
            .iter()
            .all(|t| train_tids.contains(*t) && ood_tids.contains(*t));
        push(
            "covariate_classes_on_both_sides",
            both_sides,
            format!("{} retained classes", all_tids.len()),
        );
    }
    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{desk_corpus, tiny_fixture};
    use crate::templates::assign_corpus_templates;

    #[test]
    fn tiny_label_split_moves_one_whole_class() {
        let corpus = tiny_fixture();
        assert_eq!(corpus.len(), 20);
        let templates = assign_corpus_templates(&corpus, 0);
        assert_eq!(templates.table.len(), 4);
        for seed in 0..5u64 {
            let manifest = make_label_split(&corpus, &templates, 0.1, seed).unwrap();
            // budget is 2; any sampled class has >= 2 members, so exactly one
            // whole class moves
            let ood_tids: BTreeSet<_> = manifest
                .partitions
                .test_ood
                .iter()
                .map(|rid| templates.assignment[rid].clone())
                .collect();
            assert_eq!(ood_tids.len(), 1, "seed {seed}");
            let tid = ood_tids.iter().next().unwrap();
            let class_size = templates.classes()[tid].len();
            assert_eq!(manifest.partitions.test_ood.len(), class_size);
            assert!(class_size >= 2);
            let report = validate_manifest(&manifest, &corpus, &templates);
            assert!(report.all_passed(), "{report:?}");
        }
    }

    #[test]
    fn label_split_is_deterministic_and_disjoint() {
        let corpus = desk_corpus(17);
        let templates = assign_corpus_templates(&corpus, 1);
        let a = make_label_split(&corpus, &templates, 0.1, 7).unwrap();
        let b = make_label_split(&corpus, &templates, 0.1, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let report = validate_manifest(&a, &corpus, &templates);
        assert!(report.all_passed(), "{report:?}");
        // ratios approximately 7:1:1:1 under the documented rounding rule
        let n_id = a.partitions.train.len() + a.partitions.val.len() + a.partitions.test_id.len();
        let side = ((n_id as f64) / 9.0).round() as usize;
        assert_eq!(a.partitions.val.len(), side);
        assert_eq!(a.partitions.test_id.len(), side);
        assert!(a.partitions.test_ood.len() >= (corpus.len() as f64 * 0.1).ceil() as usize);
    }

    #[test]
    fn infeasible_when_class_dwarfs_budget() {
        // one class of 24 against three tiny ones: budget 3, tolerated cap 19,
        // so any seed that samples the big class errors out
        let corpus = crate::synth::fixture(&[
            ("amide", 24),
            ("ester", 2),
            ("ether", 2),
            ("thioether", 2),
        ]);
        let templates = assign_corpus_templates(&corpus, 0);
        let outcomes: Vec<bool> = (0..40u64)
            .map(|seed| make_label_split(&corpus, &templates, 0.1, seed).is_ok())
            .collect();
        assert!(outcomes.iter().any(|ok| !ok), "no seed hit the infeasible class");
        assert!(outcomes.iter().any(|ok| *ok), "every seed failed");
        // fraction outside (0, 0.5) is rejected outright
        assert!(matches!(
            make_label_split(&corpus, &templates, 0.9, 1),
            Err(SplitError::Infeasible(_))
        ));
    }

    #[test]
    fn covariate_split_keeps_classes_on_both_sides() {
        let corpus = desk_corpus(17);
        let templates = assign_corpus_templates(&corpus, 0);
        for criterion in [CovariateCriterion::Size, CovariateCriterion::Scaffold] {
            let manifest =
                make_covariate_split(&corpus, &templates, criterion, 10, 0.1, 3).unwrap();
            let report = validate_manifest(&manifest, &corpus, &templates);
            assert!(report.all_passed(), "{criterion:?}: {report:?}");
            // the three small families fall below min_class_size
            assert!(!manifest.metadata.discarded.is_empty());
            assert!(manifest
                .metadata
                .discarded
                .iter()
                .all(|rid| rid.starts_with("n_methyl_amide")
                    || rid.starts_with("nitro_reduction")
                    || rid.starts_with("imine")));
        }
    }

    #[test]
    fn covariate_size_split_sends_largest_products_ood() {
        let corpus = desk_corpus(17);
        let templates = assign_corpus_templates(&corpus, 0);
        let manifest = make_covariate_split(
            &corpus,
            &templates,
            CovariateCriterion::Size,
            10,
            0.1,
            3,
        )
        .unwrap();
        let by_id: BTreeMap<&str, &Reaction> =
            corpus.iter().map(|r| (r.id.as_str(), r)).collect();
        let mean = |ids: &[String]| {
            ids.iter()
                .map(|rid| by_id[rid.as_str()].product.heavy_atom_count() as f64)
                .sum::<f64>()
                / ids.len() as f64
        };
        assert!(
            mean(&manifest.partitions.test_ood) > mean(&manifest.partitions.train),
            "ood {} vs train {}",
            mean(&manifest.partitions.test_ood),
            mean(&manifest.partitions.train)
        );
    }

    #[test]
    fn covariate_split_infeasible_when_nothing_survives() {
        let corpus = tiny_fixture();
        let templates = assign_corpus_templates(&corpus, 0);
        assert!(matches!(
            make_covariate_split(&corpus, &templates, CovariateCriterion::Size, 100, 0.1, 1),
            Err(SplitError::Infeasible(_))
        ));
        assert!(matches!(
            make_covariate_split(&corpus, &templates, CovariateCriterion::Size, 1, 0.1, 1),
            Err(SplitError::Infeasible(_))
        ));
    }

    #[test]
    fn validate_catches_moved_ood_id() {
        let corpus = tiny_fixture();
        let templates = assign_corpus_templates(&corpus, 0);
        let mut manifest = make_label_split(&corpus, &templates, 0.1, 2).unwrap();
        let moved = manifest.partitions.test_ood.pop().unwrap();
        manifest.partitions.train.push(moved);
        let report = validate_manifest(&manifest, &corpus, &templates);
        assert!(!report.all_passed());
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "label_template_disjointness" && !c.passed));
    }

    #[test]
    fn empty_manifest_fails_structurally() {
        let corpus = tiny_fixture();
        let templates = assign_corpus_templates(&corpus, 0);
        let manifest = SplitManifest {
            split_kind: SplitKind::LabelMinimal,
            seed: 0,
            template_radius: 0,
            partitions: Partitions::default(),
            metadata: SplitMetadata::default(),
        };
        let report = validate_manifest(&manifest, &corpus, &templates);
        assert!(!report.all_passed());
    }

    #[test]
    fn summary_is_deterministic_and_disjoint_on_label_split() {
        let corpus = desk_corpus(17);
        let templates = assign_corpus_templates(&corpus, 0);
        let manifest = make_label_split(&corpus, &templates, 0.1, 11).unwrap();
        let s1 = summarize_shift(&manifest, &corpus, &templates);
        let s2 = summarize_shift(&manifest, &corpus, &templates);
        assert_eq!(serde_json::to_string(&s1).unwrap(), serde_json::to_string(&s2).unwrap());
        let id_keys: BTreeSet<_> = s1.template_histogram["train"]
            .keys()
            .chain(s1.template_histogram["val"].keys())
            .chain(s1.template_histogram["test_id"].keys())
            .collect();
        let ood_keys: BTreeSet<_> = s1.template_histogram["test_ood"].keys().collect();
        assert!(id_keys.is_disjoint(&ood_keys));
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftSummary {
    /// partition -> template id -> count
    pub template_histogram: BTreeMap<String, BTreeMap<String, usize>>,
    /// partition -> product heavy-atom count -> count
    pub size_histogram: BTreeMap<String, BTreeMap<usize, usize>>,
    /// partition -> scaffold canonical string -> count
    pub scaffold_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Per-partition template-frequency, molecule-size, and scaffold-class
/// distributions (the data behind the shift figures).
pub fn summarize_shift(
    manifest: &SplitManifest,
    corpus: &[Reaction],
    templates: &CorpusTemplates,
) -> ShiftSummary {
    let by_id: BTreeMap<&str, &Reaction> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut summary = ShiftSummary {
        template_histogram: BTreeMap::new(),
        size_histogram: BTreeMap::new(),
        scaffold_counts: BTreeMap::new(),
    };
    for (name, ids) in manifest.partitions.iter() {
        let th = summary.template_histogram.entry(name.to_string()).or_default();
        let sh = summary.size_histogram.entry(name.to_string()).or_default();
        let sc = summary.scaffold_counts.entry(name.to_string()).or_default();
        for rid in ids {
            if let Some(tid) = templates.assignment.get(rid) {
                *th.entry(tid.clone()).or_default() += 1;
            }
            if let Some(r) = by_id.get(rid.as_str()) {
                *sh.entry(r.product.heavy_atom_count()).or_default() += 1;
                *sc.entry(scaffold_key(r).2).or_default() += 1;
            }
        }
    }
    summary
}
