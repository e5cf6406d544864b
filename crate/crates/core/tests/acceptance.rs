//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --release --test acceptance --
//! --nocapture` to see the lines and the measured margins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retroshift::corpus::write_corpus;
use retroshift::enhance::{
    khop_subgraph, khop_subgraph_brute_force, train_ebm_with_budget, BipartiteGraph, Edge,
    EdgeLabel, EncoderKind, EnhanceConfig, MoleculeNode, TemplateNode,
};
use retroshift::learn::{
    train_classifier, BinCriterion, Classifier, ClassifierConfig, IrmConfig, IrmScope,
    TrainExample, TrainMode,
};
use retroshift::numerics::{finite_diff_check, DenseTensor};
use retroshift::synth::{desk_corpus, irm_task, planted_bipartite, ranking_auc};
use retroshift::templates::{apply_template, assign_corpus_templates, extract_template};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_retroshift")
}

fn desk_corpus_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/desk_corpus.tsv")
}

#[test]
fn criterion_01_khop_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n_m = rng.random_range(2..=40);
        let n_t = rng.random_range(2..=20);
        let density = rng.random_range(0.1..0.4);
        let molecules = (0..n_m)
            .map(|i| MoleculeNode { id: format!("m{i}"), smiles: String::new() })
            .collect();
        let templates = (0..n_t)
            .map(|j| TemplateNode { id: format!("t{j}"), frequency: 1, template: None })
            .collect();
        let mut edges = Vec::new();
        for m in 0..n_m {
            for t in 0..n_t {
                if rng.random_range(0.0..1.0) < density {
                    let label = if rng.random_range(0.0..1.0) < 0.3 {
                        EdgeLabel::Gt
                    } else {
                        EdgeLabel::Candidate
                    };
                    edges.push(Edge { molecule: m, template: t, label });
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let seed_edge = edges[rng.random_range(0..edges.len())];
        let graph = BipartiteGraph::from_parts(molecules, templates, edges);
        for k in 1..=3 {
            let fast =
                khop_subgraph(&graph, (seed_edge.molecule, seed_edge.template), k).unwrap();
            let slow =
                khop_subgraph_brute_force(&graph, (seed_edge.molecule, seed_edge.template), k)
                    .unwrap();
            assert_eq!(fast, slow, "divergence on graph {checked} at k={k}");
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "criterion 1 (k-hop oracle equivalence)",
        format!("{checked} subgraph comparisons agreed in {elapsed:?}"),
    );
}

#[test]
fn criterion_02_gradient_exactness() {
    use retroshift::enhance::sample_loss_and_grad;
    use retroshift::learn::classifier_loss_and_grad;

    let mut worst: f64 = 0.0;
    let mut draws = 0usize;

    // EBM subgraph loss: fresh random parameters each draw
    let cfg = EnhanceConfig {
        hidden: 8,
        embed: 8,
        dropout: 0.0,
        max_negatives: 12,
        encoder: EncoderKind::Fingerprint { nbits: 0, radius: 0 },
        ..EnhanceConfig::default()
    };
    for seed in 0..100u64 {
        let (graph, features) = planted_bipartite(12, 6, 3, 4, seed % 7);
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let dim = match &features.molecules[0] {
            retroshift::enhance::EntityInput::Vector(v) => v.len(),
            _ => unreachable!(),
        };
        let model = retroshift::enhance::EnergyModel::init(&cfg, dim, &mut rng);
        let gt = graph.gt_edges();
        let edge = graph.edges[gt[seed as usize % gt.len()]];
        let sample = khop_subgraph(&graph, (edge.molecule, edge.template), 1).unwrap();
        if sample.neg_edges.is_empty() {
            continue;
        }
        let negs: Vec<usize> = sample.neg_edges.iter().copied().take(12).collect();
        let params = model.flatten();
        let (_, analytic) =
            sample_loss_and_grad(&graph, &features, &model, &sample.pos_edges, &negs, false)
                .unwrap();
        let report = finite_diff_check(
            |flat: &[DenseTensor]| {
                let mut m = model.clone();
                m.set_from_flat(flat);
                sample_loss_and_grad(&graph, &features, &m, &sample.pos_edges, &negs, false)
                    .unwrap()
                    .0
            },
            &params,
            &analytic,
            1e-5,
            3,
        );
        worst = worst.max(report.max_rel_error);
        assert!(report.passes(1e-4), "ebm draw {seed}: {report:?}");
        draws += 1;
    }
    assert!(draws >= 100, "only {draws} EBM draws had negatives");

    // classifier objective (risks + IRMv1 penalty) over random draws
    let mut clf_draws = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(31_000 + seed);
        let examples: Vec<TrainExample> = (0..24)
            .map(|i| TrainExample {
                id: format!("x{i}"),
                features: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..3usize),
                aux_label: None,
                env: i % 2,
            })
            .collect();
        let clf_cfg = ClassifierConfig {
            hidden: 8,
            dropout: 0.0,
            epochs: 1,
            lr: 0.001,
            linear: seed % 2 == 0,
            ..ClassifierConfig::default()
        };
        let irm_cfg = IrmConfig { lambda: 1.0, environments: 2, ..IrmConfig::default() };
        let (classifier, _) = train_classifier(
            &examples,
            vec!["a".into(), "b".into(), "c".into()],
            Vec::new(),
            TrainMode::Irm,
            &irm_cfg,
            &clf_cfg,
            seed,
        )
        .unwrap();
        let params = classifier.flatten_params();
        let (_, analytic) = classifier_loss_and_grad(&classifier, &examples, 1.0).unwrap();
        let report = finite_diff_check(
            |flat: &[DenseTensor]| {
                let mut m = classifier.clone();
                m.set_params(flat);
                classifier_loss_and_grad(&m, &examples, 1.0).unwrap().0
            },
            &params,
            &analytic,
            1e-5,
            3,
        );
        worst = worst.max(report.max_rel_error);
        assert!(report.passes(1e-4), "classifier draw {seed}: {report:?}");
        clf_draws += 1;
    }
    assert!(clf_draws >= 100);
    pass(
        "criterion 2 (gradient exactness)",
        format!("max relative error {worst:.2e} over {} draws", draws + clf_draws),
    );
}

#[test]
fn criterion_04_irm_benefit() {
    let mut erm_accs = Vec::new();
    let mut irm_accs = Vec::new();
    for seed in 0..5u64 {
        let task = irm_task(500, 500, 100 + seed);
        let examples: Vec<TrainExample> = task
            .train
            .iter()
            .enumerate()
            .map(|(i, (x, y, env))| TrainExample {
                id: format!("s{i}"),
                features: x.clone(),
                label: *y,
                aux_label: None,
                env: *env,
            })
            .collect();
        let vocab: Vec<String> = vec!["0".into(), "1".into()];
        let clf_cfg = ClassifierConfig {
            linear: true,
            epochs: 300,
            lr: 0.01,
            dropout: 0.0,
            ..ClassifierConfig::default()
        };
        let accuracy = |clf: &Classifier| {
            let hits = task
                .test
                .iter()
                .filter(|(x, y)| {
                    let scores = clf.scores(x).unwrap();
                    let pred = scores
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    pred == *y
                })
                .count();
            hits as f64 / task.test.len() as f64
        };

        let erm_cfg = IrmConfig { lambda: 0.0, ..IrmConfig::default() };
        let (erm, _) = train_classifier(
            &examples,
            vocab.clone(),
            Vec::new(),
            TrainMode::Erm,
            &erm_cfg,
            &clf_cfg,
            7 + seed,
        )
        .unwrap();
        erm_accs.push(accuracy(&erm));

        let mut best_irm: f64 = 0.0;
        for lambda in [1.0, 10.0, 100.0] {
            let irm_cfg = IrmConfig {
                lambda,
                warmup_epochs: 50,
                environments: 2,
                criterion: BinCriterion::Size,
                scope: IrmScope::WholeLoss,
            };
            let (irm, _) = train_classifier(
                &examples,
                vocab.clone(),
                Vec::new(),
                TrainMode::Irm,
                &irm_cfg,
                &clf_cfg,
                7 + seed,
            )
            .unwrap();
            best_irm = best_irm.max(accuracy(&irm));
        }
        irm_accs.push(best_irm);

        // bit-exact lambda = 0 equivalence
        let (irm_zero, _) = train_classifier(
            &examples,
            vocab.clone(),
            Vec::new(),
            TrainMode::Irm,
            &erm_cfg,
            &clf_cfg,
            7 + seed,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&erm).unwrap(),
            serde_json::to_string(&irm_zero).unwrap(),
            "IRM at lambda 0 must reproduce ERM bit-exactly"
        );
    }
    erm_accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    irm_accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let erm_median = erm_accs[2];
    let irm_median = irm_accs[2];
    assert!(erm_median <= 0.70, "ERM median {erm_median} above 0.70: {erm_accs:?}");
    assert!(irm_median >= 0.80, "IRM median {irm_median} below 0.80: {irm_accs:?}");
    pass(
        "criterion 4 (IRM benefit)",
        format!("median ERM {erm_median:.3} <= 0.70, median IRM {irm_median:.3} >= 0.80"),
    );
}

#[test]
fn criterion_03_ebm_separation() {
    let start = Instant::now();
    let mut aucs = Vec::new();
    for seed in 0..5u64 {
        let (graph, features) = planted_bipartite(200, 40, 8, 24, 1000 + seed);
        let cfg = EnhanceConfig {
            hidden: 32,
            embed: 32,
            dropout: 0.0,
            epochs: 64,
            batch_size: 16,
            max_negatives: 100,
            lr: 0.001,
            encoder: EncoderKind::Fingerprint { nbits: 0, radius: 0 },
            ..EnhanceConfig::default()
        };
        let (model, log) =
            train_ebm_with_budget(&graph, &features, &cfg, 2000 + seed, 500).unwrap();
        assert!(log.adam_steps <= 500, "budget exceeded: {}", log.adam_steps);
        let mut gt_e = Vec::new();
        let mut cand_e = Vec::new();
        for e in &graph.edges {
            let f = model
                .energy(&features.molecules[e.molecule], &features.templates[e.template])
                .unwrap();
            match e.label {
                EdgeLabel::Gt => gt_e.push(f),
                EdgeLabel::Candidate => cand_e.push(f),
            }
        }
        aucs.push(ranking_auc(&gt_e, &cand_e));
    }
    aucs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = aucs[2];
    let elapsed = start.elapsed();
    assert!(median >= 0.95, "median AUC {median}: {aucs:?}");
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        "criterion 3 (EBM separation)",
        format!("median AUC {median:.4} over 5 seeds in {elapsed:?}"),
    );
}

#[test]
fn criterion_05_split_invariants_on_desk_corpus() {
    let corpus = desk_corpus(17);
    // label splits at both radii: ID/OOD template sets disjoint
    for radius in [0usize, 1] {
        let templates = assign_corpus_templates(&corpus, radius);
        let manifest =
            retroshift::splits::make_label_split(&corpus, &templates, 0.1, 7).unwrap();
        let report = retroshift::splits::validate_manifest(&manifest, &corpus, &templates);
        assert!(report.all_passed(), "radius {radius}: {report:?}");
        // partition arithmetic per the documented rounding rule
        let n_id = manifest.partitions.train.len()
            + manifest.partitions.val.len()
            + manifest.partitions.test_id.len();
        let side = ((n_id as f64) / 9.0).round() as usize;
        assert!(manifest.partitions.val.len().abs_diff(side) <= 1);
        assert!(manifest.partitions.test_id.len().abs_diff(side) <= 1);
        let budget = ((templates.assignment.len() as f64) * 0.1).ceil() as usize;
        assert!(manifest.partitions.test_ood.len() >= budget);
    }
    // covariate splits: retained classes on both sides, small classes gone
    let minimal = assign_corpus_templates(&corpus, 0);
    for criterion in
        [retroshift::splits::CovariateCriterion::Size, retroshift::splits::CovariateCriterion::Scaffold]
    {
        let manifest = retroshift::splits::make_covariate_split(
            &corpus, &minimal, criterion, 10, 0.1, 7,
        )
        .unwrap();
        let report = retroshift::splits::validate_manifest(&manifest, &corpus, &minimal);
        assert!(report.all_passed(), "{criterion:?}: {report:?}");
        let classes = minimal.classes();
        for (tid, members) in &classes {
            if members.len() < 10 {
                for rid in members {
                    assert!(
                        manifest.metadata.discarded.contains(rid),
                        "small-class reaction {rid} of {tid} not discarded"
                    );
                }
            }
        }
        assert!(!manifest.metadata.discarded.is_empty());
    }
    pass(
        "criterion 5 (split invariants)",
        format!("label radii {{0,1}} disjoint, covariate splits class-complete on {} reactions",
            corpus.len()),
    );
}

#[test]
fn criterion_06_template_round_trip() {
    let corpus = desk_corpus(17);
    let mut hits = 0usize;
    for r in &corpus {
        let tpl = extract_template(r, 1).unwrap();
        let outcomes = apply_template(&tpl, &r.product, 100);
        if outcomes.contains(&r.canonical_precursor_set()) {
            hits += 1;
        }
    }
    let rate = hits as f64 / corpus.len() as f64;
    assert!(rate >= 0.95, "round trip rate {rate} ({hits}/{})", corpus.len());

    // byte determinism under precursor reordering
    let mut reordered = 0usize;
    for r in corpus.iter().step_by(11) {
        if r.precursors.len() < 2 {
            continue;
        }
        let mut flipped = r.clone();
        flipped.precursors.reverse();
        let a = extract_template(r, 1).unwrap();
        let b = extract_template(&flipped, 1).unwrap();
        assert_eq!(a.canonical_string, b.canonical_string, "{}", r.id);
        reordered += 1;
    }
    assert!(reordered > 10);
    pass(
        "criterion 6 (template round trip)",
        format!("{hits}/{} regenerate ground truth ({rate:.3}); {reordered} reorderings stable",
            corpus.len()),
    );
}

fn run_ok(args: &[&str]) {
    let out = Command::new(binary()).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_07_sandwich_invariant_over_n() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = desk_corpus_path();
    let split_dir = dir.path().join("split");
    run_ok(&[
        "split",
        "--corpus",
        corpus_path.to_str().unwrap(),
        "--kind",
        "label-retro",
        "--seed",
        "7",
        "--out",
        split_dir.to_str().unwrap(),
    ]);
    let manifest = split_dir.join("manifest.json");
    for n in [0usize, 2, 5, 10] {
        let out = dir.path().join(format!("enh_{n}"));
        run_ok(&[
            "enhance",
            "--corpus",
            corpus_path.to_str().unwrap(),
            "--split",
            manifest.to_str().unwrap(),
            "--top-n",
            &n.to_string(),
            "--epochs",
            "1",
            "--hidden",
            "16",
            "--embed",
            "16",
            "--fingerprint-bits",
            "128",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("enhance_report.json")).unwrap())
                .unwrap();
        assert_eq!(report["sandwich_holds"], true, "n={n}");
        assert_eq!(report["count_bound_holds"], true, "n={n}");
        let gt = report["gt_edges"].as_u64().unwrap();
        let enh = report["enhanced_edges"].as_u64().unwrap();
        assert!(enh <= gt * (n as u64 + 1), "n={n}: {enh} > {gt}*(n+1)");
        if n == 0 {
            assert_eq!(enh, gt, "n=0 must keep exactly the gt edges");
        }
    }
    pass("criterion 7 (sandwich invariant)", "holds for n in {0, 2, 5, 10}".into());
}

#[test]
fn criterion_08_degradation_direction() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = desk_corpus_path();
    let train_args = |split: &Path, out: &Path| -> Vec<String> {
        vec![
            "train".into(),
            "--corpus".into(),
            corpus_path.to_str().unwrap().into(),
            "--split".into(),
            split.to_str().unwrap().into(),
            "--mode".into(),
            "erm".into(),
            "--epochs".into(),
            "30".into(),
            "--hidden".into(),
            "64".into(),
            "--fingerprint-bits".into(),
            "512".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let top1 = |out: &Path| -> (f64, f64) {
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("metrics_report.json")).unwrap())
                .unwrap();
        (
            report["partitions"]["test_id"]["1"].as_f64().unwrap(),
            report["partitions"]["test_ood"]["1"].as_f64().unwrap(),
        )
    };

    // covariate split
    let cov_split = dir.path().join("cov");
    run_ok(&[
        "split",
        "--corpus",
        corpus_path.to_str().unwrap(),
        "--kind",
        "covariate-size",
        "--seed",
        "7",
        "--out",
        cov_split.to_str().unwrap(),
    ]);
    let cov_out = dir.path().join("cov_train");
    let args = train_args(&cov_split.join("manifest.json"), &cov_out);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let (cov_id, cov_ood) = top1(&cov_out);
    assert!(cov_ood <= cov_id, "covariate: OOD {cov_ood} > ID {cov_id}");

    // retro-template label split
    let retro_split = dir.path().join("retro");
    run_ok(&[
        "split",
        "--corpus",
        corpus_path.to_str().unwrap(),
        "--kind",
        "label-retro",
        "--seed",
        "7",
        "--out",
        retro_split.to_str().unwrap(),
    ]);
    let retro_out = dir.path().join("retro_train");
    let args = train_args(&retro_split.join("manifest.json"), &retro_out);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let (retro_id, retro_ood) = top1(&retro_out);
    assert!(retro_ood <= retro_id, "retro label: OOD {retro_ood} > ID {retro_id}");

    // minimal-template label split: near-zero OOD
    let min_split = dir.path().join("minimal");
    run_ok(&[
        "split",
        "--corpus",
        corpus_path.to_str().unwrap(),
        "--kind",
        "label-minimal",
        "--seed",
        "7",
        "--out",
        min_split.to_str().unwrap(),
    ]);
    let min_out = dir.path().join("min_train");
    let args = train_args(&min_split.join("manifest.json"), &min_out);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let (min_id, min_ood) = top1(&min_out);
    assert!(min_ood < 0.05, "minimal label: OOD top-1 {min_ood} not near zero");

    pass(
        "criterion 8 (degradation direction)",
        format!(
            "covariate {cov_ood:.3}<={cov_id:.3}, retro {retro_ood:.3}<={retro_id:.3}, \
             minimal OOD {min_ood:.3} (ID {min_id:.3})"
        ),
    );
}

#[test]
fn criterion_09_uspto_scale_data_gated() {
    let Some(path) = std::env::var_os("USPTO50K_PATH") else {
        println!(
            "[SKIP] criterion 9 (USPTO50K scale): optional, set USPTO50K_PATH to a corpus TSV"
        );
        return;
    };
    let corpus = retroshift::corpus::read_corpus(Path::new(&path)).expect("readable corpus");
    let templates = assign_corpus_templates(&corpus, 1);
    let graph = retroshift::enhance::build_bipartite_graph(&corpus, &templates).unwrap();
    let within = |value: f64, target: f64| (value - target).abs() <= 0.15 * target;
    assert!(
        within(graph.molecules.len() as f64, 34750.0),
        "molecule nodes {}",
        graph.molecules.len()
    );
    assert!(
        within(graph.templates.len() as f64, 6788.0),
        "template nodes {}",
        graph.templates.len()
    );
    let (filtered, _) = retroshift::enhance::stage_a_filter(&graph, 100).unwrap();
    assert!(within(filtered.edges.len() as f64, 2_018_153.0), "edges {}", filtered.edges.len());
    let minimal = assign_corpus_templates(&corpus, 0);
    let manifest = retroshift::splits::make_covariate_split(
        &corpus,
        &minimal,
        retroshift::splits::CovariateCriterion::Size,
        10,
        0.1,
        7,
    )
    .unwrap();
    assert!(
        within(manifest.metadata.discarded.len() as f64, 4472.0),
        "discarded {}",
        manifest.metadata.discarded.len()
    );
    pass("criterion 9 (USPTO50K scale)", "graph and discard counts within 15%".into());
}

#[test]
fn criterion_10_command_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = retroshift::synth::fixture(&[
        ("amide", 12),
        ("ester", 12),
        ("ether", 11),
        ("sulfonamide", 10),
    ]);
    // two identical run roots; commands use relative paths so every recorded
    // string matches byte for byte
    let mut artifacts: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for run in ["r1", "r2"] {
        let root = dir.path().join(run);
        std::fs::create_dir_all(&root).unwrap();
        write_corpus(&root.join("corpus.tsv"), &corpus, false).unwrap();
        let exec = |args: &[&str]| {
            let out = Command::new(binary())
                .current_dir(&root)
                .args(args)
                .output()
                .expect("binary runs");
            assert!(
                out.status.success(),
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        };
        exec(&[
            "--deterministic",
            "extract-templates",
            "--corpus",
            "corpus.tsv",
            "--radius",
            "1",
            "--out",
            "tpl",
        ]);
        exec(&[
            "--deterministic",
            "split",
            "--corpus",
            "corpus.tsv",
            "--kind",
            "label-retro",
            "--seed",
            "3",
            "--out",
            "split",
        ]);
        exec(&[
            "--deterministic",
            "enhance",
            "--corpus",
            "corpus.tsv",
            "--split",
            "split/manifest.json",
            "--epochs",
            "1",
            "--hidden",
            "16",
            "--embed",
            "16",
            "--fingerprint-bits",
            "128",
            "--top-n",
            "2",
            "--seed",
            "2",
            "--out",
            "enh",
        ]);
        exec(&[
            "--deterministic",
            "train",
            "--corpus",
            "corpus.tsv",
            "--split",
            "split/manifest.json",
            "--mode",
            "irm",
            "--lambda",
            "1.0",
            "--enhanced",
            "enh/enhanced_corpus.tsv",
            "--epochs",
            "6",
            "--hidden",
            "24",
            "--fingerprint-bits",
            "128",
            "--seed",
            "5",
            "--out",
            "train",
        ]);
        exec(&[
            "--deterministic",
            "eval",
            "--corpus",
            "corpus.tsv",
            "--split",
            "split/manifest.json",
            "--checkpoint",
            "train/classifier_checkpoint.json",
            "--out",
            "eval",
        ]);
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for entry in walk(&root) {
            let rel = entry.strip_prefix(&root).unwrap().display().to_string();
            files.push((rel, std::fs::read(&entry).unwrap()));
        }
        files.sort();
        artifacts.push(files);
    }
    let names: Vec<&String> = artifacts[0].iter().map(|(n, _)| n).collect();
    assert!(names.len() > 10, "expected a full artifact tree, got {names:?}");
    assert_eq!(
        artifacts[0].iter().map(|(n, _)| n).collect::<Vec<_>>(),
        artifacts[1].iter().map(|(n, _)| n).collect::<Vec<_>>()
    );
    for ((name, a), (_, b)) in artifacts[0].iter().zip(&artifacts[1]) {
        assert_eq!(a, b, "artifact {name} differs between reruns");
    }
    pass(
        "criterion 10 (determinism)",
        format!("{} artifacts byte-identical across reruns", artifacts[0].len()),
    );
}

fn walk(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}
