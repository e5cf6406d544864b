//! Reference single-step learner: product fingerprint to a score over the
//! training split's template vocabulary, trainable under plain ERM or with
//! the IRMv1 penalty over environment bins, plus the top-k exact-match
//! evaluation harness.

mod eval;

pub use eval::{evaluate_topk, EvalResult};


use crate::molgraph::circular_fingerprint;
use crate::numerics::{
    adam_step, mlp_apply, mlp_leaves, mlp_to_tape, AdamState, DenseTensor, MlpParams, Tape, Var,
};
use crate::splits::scaffold_key;
use crate::templates::Reaction;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] crate::numerics::NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCriterion {
    Size,
    Scaffold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrmScope {
    /// penalty on the whole template-selection loss
    WholeLoss,
    /// penalty restricted to the auxiliary center-prediction head
    AuxHead,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrmConfig {
    pub lambda: f64,
    pub environments: usize,
    pub criterion: BinCriterion,
    pub warmup_epochs: usize,
    pub scope: IrmScope,
}

impl Default for IrmConfig {
    fn default() -> Self {
        IrmConfig {
            lambda: 1.0,
            environments: 4,
            criterion: BinCriterion::Size,
            warmup_epochs: 5,
            scope: IrmScope::WholeLoss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Erm,
    Irm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub fingerprint_bits: usize,
    pub fingerprint_radius: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub lr: f64,
    /// add the center-prediction auxiliary head (minimal-template classes)
    pub aux_head: bool,
    /// linear model with no hidden embedding (synthetic benchmarks)
    pub linear: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            fingerprint_bits: 2048,
            fingerprint_radius: 2,
            hidden: 256,
            dropout: 0.1,
            epochs: 40,
            lr: 0.001,
            aux_head: false,
            linear: false,
        }
    }
}

/// One training row: features, label index in the vocabulary, optional
/// auxiliary (minimal-template) label, and environment index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainExample {
    pub id: String,
    pub features: Vec<f64>,
    pub label: usize,
    pub aux_label: Option<usize>,
    pub env: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classifier {
    /// feature extractor; None for the linear benchmark model
    pub embed: Option<MlpParams>,
    pub head: MlpParams,
    pub aux_head: Option<MlpParams>,
    /// template ids scoreable by the head, frozen at training time
    pub vocabulary: Vec<String>,
    pub aux_vocabulary: Vec<String>,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: usize,
}

impl Classifier {
    /// Raw scores over the vocabulary for a feature row.
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>, LearnError> {
        let mut tape = Tape::new();
        let x = tape.constant(DenseTensor::row_vector(features.to_vec()));
        let h = match &self.embed {
            Some(embed) => {
                let vars = mlp_to_tape(&mut tape, embed);
                mlp_apply(&mut tape, &vars, x, false, 0)?
            }
            None => x,
        };
        let head_vars = mlp_to_tape(&mut tape, &self.head);
        let z = mlp_apply(&mut tape, &head_vars, h, false, 0)?;
        Ok(tape.value(z).values.clone())
    }

    pub fn fingerprint(&self, product: &crate::molgraph::MolecularGraph) -> Vec<f64> {
        circular_fingerprint(product, self.fingerprint_radius, self.fingerprint_bits)
            .expect("fingerprint parameters validated at construction")
            .to_f64_vec()
    }

    /// All vocabulary templates ordered by descending score, ties broken by
    /// template id.
    pub fn rank_templates(
        &self,
        product: &crate::molgraph::MolecularGraph,
    ) -> Result<Vec<(String, f64)>, LearnError> {
        let scores = self.scores(&self.fingerprint(product))?;
        let mut ranked: Vec<(String, f64)> = self
            .vocabulary
            .iter()
            .cloned()
            .zip(scores)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).expect("finite scores").then_with(|| a.0.cmp(&b.0))
        });
        Ok(ranked)
    }
}

/// Quantile bins over ascending product size, or scaffold-key groups
/// round-robined into E bins.
pub fn bin_environments(
    train: &[&Reaction],
    criterion: BinCriterion,
    environments: usize,
) -> Result<BTreeMap<String, usize>, LearnError> {
    if environments < 2 {
        return Err(LearnError::Config("need at least 2 environments".into()));
    }
    if train.len() < environments {
        return Err(LearnError::TooFewSamples(format!(
            "{} samples for {environments} environments",
            train.len()
        )));
    }
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    match criterion {
        BinCriterion::Size => {
            let mut order: Vec<&&Reaction> = train.iter().collect();
            order.sort_by_key(|r| (r.product.heavy_atom_count(), r.id.clone()));
            let n = order.len();
            for (pos, r) in order.into_iter().enumerate() {
                let bin = (pos * environments) / n;
                out.insert(r.id.clone(), bin.min(environments - 1));
            }
        }
        BinCriterion::Scaffold => {
            let mut groups: BTreeMap<(usize, usize, String), Vec<&str>> = BTreeMap::new();
            for r in train {
                groups.entry(scaffold_key(r)).or_default().push(&r.id);
            }
            for (gi, (_, members)) in groups.into_iter().enumerate() {
                for id in members {
                    out.insert(id.to_string(), gi % environments);
                }
            }
            // fewer scaffold groups than bins: rebalance singles so every
            // bin is populated
            let mut counts = vec![0usize; environments];
            for &b in out.values() {
                counts[b] += 1;
            }
            for empty in 0..environments {
                while counts[empty] == 0 {
                    let donor = (0..environments).max_by_key(|&b| counts[b]).unwrap();
                    let moved = out
                        .iter()
                        .filter(|(_, &b)| b == donor)
                        .map(|(id, _)| id.clone())
                        .next_back()
                        .expect("donor bin non-empty");
                    out.insert(moved, empty);
                    counts[donor] -= 1;
                    counts[empty] += 1;
                }
            }
        }
    }
    Ok(out)
}

/// IRMv1 penalty from per-environment risk gradients with respect to the
/// scalar classifier multiplier at w = 1: the summed squared norms.
pub fn irm_penalty(env_risk_gradients: &[f64]) -> f64 {
    env_risk_gradients.iter().map(|g| g * g).sum()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClassifierEpochLog {
    pub env_risks: Vec<f64>,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClassifierLog {
    pub epochs: Vec<ClassifierEpochLog>,
    pub seed: u64,
}

/// Per-environment cross-entropy risk and its w-gradient on the tape.
/// The risk is weighted n_e / N so the environment sum equals the pooled
/// mean; the penalty term keeps the plain per-environment form.
fn env_risk_and_grad(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
) -> Result<(Var, Var), LearnError> {
    let lse = tape.log_sum_exp_rows(logits);
    let picked = tape.gather_rows(logits, labels.to_vec())?;
    let per_sample = tape.sub(lse, picked)?;
    let risk = tape.mean_all(per_sample);
    // d/dw mean CE(w z) at w=1 = mean(sum_j p_j z_j - z_y)
    let centered = tape.sub_col(logits, lse)?;
    let softmax = tape.exp(centered);
    let weighted = tape.mul(softmax, logits)?;
    let expected = tape.row_sums(weighted);
    let diff = tape.sub(expected, picked)?;
    let grad = tape.mean_all(diff);
    Ok((risk, grad))
}

/// Train the template classifier. ERM and IRM share one code path: the
/// penalty term is only added when the mode is IRM, lambda is positive, and
/// the warmup has elapsed, so IRM at lambda = 0 reproduces ERM bit-exactly.
pub fn train_classifier(
    examples: &[TrainExample],
    vocabulary: Vec<String>,
    aux_vocabulary: Vec<String>,
    mode: TrainMode,
    irm_cfg: &IrmConfig,
    clf_cfg: &ClassifierConfig,
    seed: u64,
) -> Result<(Classifier, ClassifierLog), LearnError> {
    if examples.is_empty() {
        return Err(LearnError::TooFewSamples("no training examples".into()));
    }
    if vocabulary.is_empty() {
        return Err(LearnError::Config("empty template vocabulary".into()));
    }
    let input_dim = examples[0].features.len();
    if examples.iter().any(|e| e.features.len() != input_dim) {
        return Err(LearnError::Config("inconsistent feature dimensions".into()));
    }
    let n_envs = examples.iter().map(|e| e.env).max().unwrap() + 1;
    let total = examples.len();

    // per-environment feature matrices and labels, fixed across epochs
    let mut env_rows: Vec<Vec<&TrainExample>> = vec![Vec::new(); n_envs];
    for e in examples {
        env_rows[e.env].push(e);
    }
    // aux rows are the subset with a minimal-template label (enhanced rows
    // have none)
    let env_inputs: Vec<(DenseTensor, Vec<usize>, Option<(DenseTensor, Vec<usize>)>)> = env_rows
        .iter()
        .map(|rows| {
            let x = DenseTensor::from_rows(rows.iter().map(|r| r.features.clone()).collect())
                .map_err(LearnError::Numeric)?;
            let y: Vec<usize> = rows.iter().map(|r| r.label).collect();
            let aux_rows: Vec<&&TrainExample> =
                rows.iter().filter(|r| r.aux_label.is_some()).collect();
            let aux = if clf_cfg.aux_head && !aux_rows.is_empty() {
                let ax = DenseTensor::from_rows(
                    aux_rows.iter().map(|r| r.features.clone()).collect(),
                )
                .map_err(LearnError::Numeric)?;
                let ay = aux_rows.iter().map(|r| r.aux_label.unwrap()).collect();
                Some((ax, ay))
            } else {
                None
            };
            Ok((x, y, aux))
        })
        .collect::<Result<Vec<_>, LearnError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embed = if clf_cfg.linear {
        None
    } else {
        Some(MlpParams::init(
            &[input_dim, clf_cfg.hidden, clf_cfg.hidden],
            clf_cfg.dropout,
            &mut rng,
        ))
    };
    let feat_dim = if clf_cfg.linear { input_dim } else { clf_cfg.hidden };
    let head = MlpParams::init(&[feat_dim, vocabulary.len()], 0.0, &mut rng);
    let aux_head = if clf_cfg.aux_head {
        if aux_vocabulary.is_empty() {
            return Err(LearnError::Config("aux head requested without aux vocabulary".into()));
        }
        Some(MlpParams::init(&[feat_dim, aux_vocabulary.len()], 0.0, &mut rng))
    } else {
        None
    };
    let mut model = Classifier {
        embed,
        head,
        aux_head,
        vocabulary,
        aux_vocabulary,
        fingerprint_bits: clf_cfg.fingerprint_bits,
        fingerprint_radius: clf_cfg.fingerprint_radius,
    };

    let mut params: Vec<DenseTensor> = flatten_classifier(&model);
    let mut adam = AdamState::new(&params, clf_cfg.lr);
    let mut log = ClassifierLog { seed, ..ClassifierLog::default() };

    for epoch in 0..clf_cfg.epochs {
        set_classifier_from_flat(&mut model, &params);
        let mut tape = Tape::new();
        let embed_vars = model.embed.as_ref().map(|m| mlp_to_tape(&mut tape, m));
        let head_vars = mlp_to_tape(&mut tape, &model.head);
        let aux_vars = model.aux_head.as_ref().map(|m| mlp_to_tape(&mut tape, m));
        let mut leaves: Vec<Var> = Vec::new();
        if let Some(v) = &embed_vars {
            leaves.extend(mlp_leaves(v));
        }
        leaves.extend(mlp_leaves(&head_vars));
        if let Some(v) = &aux_vars {
            leaves.extend(mlp_leaves(v));
        }

        let lambda_active = match mode {
            TrainMode::Erm => 0.0,
            TrainMode::Irm if epoch < irm_cfg.warmup_epochs => 0.0,
            TrainMode::Irm => irm_cfg.lambda,
        };

        let mut total_loss: Option<Var> = None;
        let mut epoch_log = ClassifierEpochLog::default();
        for (env_idx, (x, y, aux)) in env_inputs.iter().enumerate() {
            if y.is_empty() {
                epoch_log.env_risks.push(0.0);
                continue;
            }
            let xv = tape.constant(x.clone());
            let h = match &embed_vars {
                Some(vars) => mlp_apply(
                    &mut tape,
                    vars,
                    xv,
                    true,
                    seed ^ ((epoch as u64) << 16) ^ env_idx as u64,
                )?,
                None => xv,
            };
            let logits = mlp_apply(&mut tape, &head_vars, h, false, 0)?;
            let (risk, grad) = env_risk_and_grad(&mut tape, logits, y)?;
            epoch_log.env_risks.push(tape.value(risk).item());
            let weighted = tape.scale(risk, y.len() as f64 / total as f64);
            total_loss = Some(match total_loss {
                None => weighted,
                Some(t) => tape.add(t, weighted)?,
            });

            // the auxiliary center-prediction head sees the labeled subset
            let mut aux_grad: Option<Var> = None;
            if let (Some(avars), Some((ax, ay))) = (&aux_vars, aux) {
                let axv = tape.constant(ax.clone());
                let ah = match &embed_vars {
                    Some(vars) => mlp_apply(
                        &mut tape,
                        vars,
                        axv,
                        true,
                        seed ^ ((epoch as u64) << 16) ^ env_idx as u64 ^ 0xa5a5,
                    )?,
                    None => axv,
                };
                let aux_logits = mlp_apply(&mut tape, avars, ah, false, 0)?;
                let (aux_risk, g) = env_risk_and_grad(&mut tape, aux_logits, ay)?;
                let aux_weighted = tape.scale(aux_risk, ay.len() as f64 / total as f64);
                total_loss = Some(tape.add(total_loss.unwrap(), aux_weighted)?);
                aux_grad = Some(g);
            }
            let pen_grad = match irm_cfg.scope {
                IrmScope::AuxHead => aux_grad,
                IrmScope::WholeLoss => Some(grad),
            };
            if lambda_active > 0.0 {
                if let Some(g) = pen_grad {
                    let pen = tape.mul(g, g)?;
                    epoch_log.penalty += tape.value(pen).item();
                    let scaled = tape.scale(pen, lambda_active);
                    total_loss = Some(tape.add(total_loss.unwrap(), scaled)?);
                }
            }
        }
        let loss = total_loss.expect("at least one environment");
        epoch_log.total = tape.value(loss).item();
        log.epochs.push(epoch_log);
        let grads = tape.backward(loss, &leaves)?;
        adam_step(&mut adam, &mut params, &grads)?;
    }
    set_classifier_from_flat(&mut model, &params);
    Ok((model, log))
}

impl Classifier {
    pub fn flatten_params(&self) -> Vec<DenseTensor> {
        flatten_classifier(self)
    }

    pub fn set_params(&mut self, flat: &[DenseTensor]) {
        set_classifier_from_flat(self, flat)
    }
}

/// Value and exact gradients (in `flatten_params` order) of the full
/// objective (per-environment risks plus lambda times the IRMv1 penalty) at
/// inference settings. The entry point for finite-difference verification.
pub fn classifier_loss_and_grad(
    classifier: &Classifier,
    examples: &[TrainExample],
    lambda: f64,
) -> Result<(f64, Vec<DenseTensor>), LearnError> {
    if examples.is_empty() {
        return Err(LearnError::TooFewSamples("no examples".into()));
    }
    let n_envs = examples.iter().map(|e| e.env).max().unwrap() + 1;
    let total = examples.len();
    let mut env_rows: Vec<Vec<&TrainExample>> = vec![Vec::new(); n_envs];
    for e in examples {
        env_rows[e.env].push(e);
    }
    let mut tape = Tape::new();
    let embed_vars = classifier.embed.as_ref().map(|m| mlp_to_tape(&mut tape, m));
    let head_vars = mlp_to_tape(&mut tape, &classifier.head);
    let aux_vars = classifier.aux_head.as_ref().map(|m| mlp_to_tape(&mut tape, m));
    let mut leaves: Vec<Var> = Vec::new();
    if let Some(v) = &embed_vars {
        leaves.extend(mlp_leaves(v));
    }
    leaves.extend(mlp_leaves(&head_vars));
    if let Some(v) = &aux_vars {
        leaves.extend(mlp_leaves(v));
    }
    let mut total_loss: Option<Var> = None;
    for rows in env_rows.iter().filter(|r| !r.is_empty()) {
        let x = DenseTensor::from_rows(rows.iter().map(|r| r.features.clone()).collect())
            .map_err(LearnError::Numeric)?;
        let y: Vec<usize> = rows.iter().map(|r| r.label).collect();
        let xv = tape.constant(x);
        let h = match &embed_vars {
            Some(vars) => mlp_apply(&mut tape, vars, xv, false, 0)?,
            None => xv,
        };
        let logits = mlp_apply(&mut tape, &head_vars, h, false, 0)?;
        let (risk, grad) = env_risk_and_grad(&mut tape, logits, &y)?;
        let weighted = tape.scale(risk, y.len() as f64 / total as f64);
        total_loss = Some(match total_loss {
            None => weighted,
            Some(t) => tape.add(t, weighted)?,
        });
        if lambda > 0.0 {
            let pen = tape.mul(grad, grad)?;
            let scaled = tape.scale(pen, lambda);
            total_loss = Some(tape.add(total_loss.unwrap(), scaled)?);
        }
    }
    let loss = total_loss.expect("at least one environment");
    let value = tape.value(loss).item();
    let grads = tape.backward(loss, &leaves)?;
    Ok((value, grads))
}

fn flatten_classifier(model: &Classifier) -> Vec<DenseTensor> {
    let mut out = Vec::new();
    if let Some(e) = &model.embed {
        out.extend(e.flatten());
    }
    out.extend(model.head.flatten());
    if let Some(a) = &model.aux_head {
        out.extend(a.flatten());
    }
    out
}

fn set_classifier_from_flat(model: &mut Classifier, flat: &[DenseTensor]) {
    let mut cursor = 0usize;
    if let Some(e) = &mut model.embed {
        let n = e.layers.len() * 2;
        e.unflatten_into(&flat[cursor..cursor + n]);
        cursor += n;
    }
    let n = model.head.layers.len() * 2;
    model.head.unflatten_into(&flat[cursor..cursor + n]);
    cursor += n;
    if let Some(a) = &mut model.aux_head {
        let n = a.layers.len() * 2;
        a.unflatten_into(&flat[cursor..cursor + n]);
    }
}

/// Training rows for a split's train partition: canonical fingerprints,
/// vocabulary indices at the split radius, minimal-template aux labels, and
/// environment bins.
pub fn prepare_examples(
    train: &[&Reaction],
    assignment: &BTreeMap<String, String>,
    minimal_assignment: &BTreeMap<String, String>,
    irm_cfg: &IrmConfig,
    clf_cfg: &ClassifierConfig,
) -> Result<(Vec<TrainExample>, Vec<String>, Vec<String>), LearnError> {
    let bins = bin_environments(train, irm_cfg.criterion, irm_cfg.environments)?;
    let mut vocabulary: Vec<String> = train
        .iter()
        .filter_map(|r| assignment.get(&r.id).cloned())
        .collect();
    vocabulary.sort();
    vocabulary.dedup();
    let mut aux_vocabulary: Vec<String> = train
        .iter()
        .filter_map(|r| minimal_assignment.get(&r.id).cloned())
        .collect();
    aux_vocabulary.sort();
    aux_vocabulary.dedup();
    let vocab_index: BTreeMap<&str, usize> =
        vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let aux_index: BTreeMap<&str, usize> =
        aux_vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let mut examples = Vec::new();
    for r in train {
        let Some(tid) = assignment.get(&r.id) else { continue };
        let Some(&label) = vocab_index.get(tid.as_str()) else { continue };
        let fp = circular_fingerprint(
            &r.product,
            clf_cfg.fingerprint_radius,
            clf_cfg.fingerprint_bits,
        )
        .map_err(|e| LearnError::Config(e.to_string()))?;
        examples.push(TrainExample {
            id: r.id.clone(),
            features: fp.to_f64_vec(),
            label,
            aux_label: minimal_assignment
                .get(&r.id)
                .and_then(|t| aux_index.get(t.as_str()).copied()),
            env: bins[&r.id],
        });
    }
    Ok((examples, vocabulary, aux_vocabulary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::fixture;

    #[test]
    fn quantile_bins_over_sizes() {
        // products with 8 distinct sizes -> 4 bins of 2
        let corpus = fixture(&[("ether", 8)]);
        let refs: Vec<&Reaction> = corpus.iter().collect();
        let bins = bin_environments(&refs, BinCriterion::Size, 4).unwrap();
        let mut counts = vec![0usize; 4];
        for &b in bins.values() {
            counts[b] += 1;
        }
        assert_eq!(counts, vec![2, 2, 2, 2]);
        // ordered by size: bin index non-decreasing in product size
        let mut by_size: Vec<(usize, usize)> = corpus
            .iter()
            .map(|r| (r.product.heavy_atom_count(), bins[&r.id]))
            .collect();
        by_size.sort();
        let bin_seq: Vec<usize> = by_size.iter().map(|&(_, b)| b).collect();
        let mut sorted = bin_seq.clone();
        sorted.sort_unstable();
        assert_eq!(bin_seq, sorted);
    }

    #[test]
    fn too_few_samples_rejected() {
        let corpus = fixture(&[("ether", 2)]);
        let refs: Vec<&Reaction> = corpus.iter().collect();
        assert!(matches!(
            bin_environments(&refs, BinCriterion::Size, 4),
            Err(LearnError::TooFewSamples(_))
        ));
    }

    #[test]
    fn scaffold_bins_are_all_populated() {
        let corpus = fixture(&[("amide", 12), ("biaryl", 6)]);
        let refs: Vec<&Reaction> = corpus.iter().collect();
        let bins = bin_environments(&refs, BinCriterion::Scaffold, 4).unwrap();
        let mut counts = vec![0usize; 4];
        for &b in bins.values() {
            counts[b] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }

    fn task_examples(task: &crate::synth::IrmTask) -> Vec<TrainExample> {
        task.train
            .iter()
            .enumerate()
            .map(|(i, (x, y, env))| TrainExample {
                id: format!("s{i}"),
                features: x.clone(),
                label: *y,
                aux_label: None,
                env: *env,
            })
            .collect()
    }

    fn test_accuracy(clf: &Classifier, task: &crate::synth::IrmTask) -> f64 {
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
    }

    #[test]
    fn irm_with_zero_lambda_reproduces_erm_bit_exactly() {
        let task = crate::synth::irm_task(150, 100, 3);
        let examples = task_examples(&task);
        let vocab = vec!["0".into(), "1".into()];
        let clf_cfg = ClassifierConfig { linear: true, epochs: 30, lr: 0.01, dropout: 0.0, ..ClassifierConfig::default() };
        let irm_cfg = IrmConfig { lambda: 0.0, warmup_epochs: 0, ..IrmConfig::default() };
        let (erm, erm_log) = train_classifier(
            &examples,
            vocab.clone(),
            Vec::new(),
            TrainMode::Erm,
            &irm_cfg,
            &clf_cfg,
            9,
        )
        .unwrap();
        let (irm, irm_log) = train_classifier(
            &examples,
            vocab,
            Vec::new(),
            TrainMode::Irm,
            &irm_cfg,
            &clf_cfg,
            9,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&erm).unwrap(),
            serde_json::to_string(&irm).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&erm_log.epochs).unwrap(),
            serde_json::to_string(&irm_log.epochs).unwrap()
        );
    }

    #[test]
    fn irm_beats_erm_on_spurious_shift() {
        let task = crate::synth::irm_task(400, 400, 21);
        let examples = task_examples(&task);
        let vocab: Vec<String> = vec!["0".into(), "1".into()];
        let clf_cfg = ClassifierConfig {
            linear: true,
            epochs: 300,
            lr: 0.01,
            dropout: 0.0,
            ..ClassifierConfig::default()
        };
        let erm_cfg = IrmConfig { lambda: 0.0, ..IrmConfig::default() };
        let (erm, _) = train_classifier(
            &examples,
            vocab.clone(),
            Vec::new(),
            TrainMode::Erm,
            &erm_cfg,
            &clf_cfg,
            5,
        )
        .unwrap();
        let irm_cfg = IrmConfig { lambda: 100.0, warmup_epochs: 50, ..IrmConfig::default() };
        let (irm, _) = train_classifier(
            &examples,
            vocab,
            Vec::new(),
            TrainMode::Irm,
            &irm_cfg,
            &clf_cfg,
            5,
        )
        .unwrap();
        let erm_acc = test_accuracy(&erm, &task);
        let irm_acc = test_accuracy(&irm, &task);
        assert!(erm_acc <= 0.75, "erm {erm_acc}");
        assert!(irm_acc >= 0.80, "irm {irm_acc}");
    }

    #[test]
    fn penalty_matches_logistic_hand_values() {
        // single-sample logistic risk R(w) = softplus(-y z w), y = +1
        let d_dw = |z: f64| -z * (1.0 / (1.0 + (z).exp()));
        assert_eq!(irm_penalty(&[d_dw(0.0)]), 0.0);
        let p = irm_penalty(&[d_dw(2.0)]);
        assert!((p - 0.05684).abs() < 1e-4, "{p}");
        assert!(irm_penalty(&[d_dw(20.0)]) < 1e-12);
    }
}
