//! Energy model over (molecule, template) pairs and its subgraph-aware
//! contrastive training loop. The molecule and each precursor-side pattern go
//! through their own encoder; pattern embeddings are averaged; the energy
//! head reads [h_m ; h_t ; h_m * h_t].

use super::khop::khop_subgraph;
use super::{BipartiteGraph, EnhanceError};
use crate::molgraph::circular_fingerprint;
use crate::numerics::{
    adam_step, mlp_apply, mlp_leaves, mlp_to_tape, mpnn_to_tape, AdamState, DenseTensor,
    GraphInput, MlpParams, MlpVars, MpnnParams, MpnnVars, Tape, Var,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Fingerprint { nbits: usize, radius: usize },
    Mpnn { depth: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhanceConfig {
    /// k-hop count for subgraph extraction
    pub k_hops: usize,
    /// negative cutoff per sample
    pub max_negatives: usize,
    /// enhanced candidates kept per gt edge in the denoising stage
    pub top_n: usize,
    pub tau: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    pub embed: usize,
    pub dropout: f64,
    pub encoder: EncoderKind,
    /// include the positive edge in the contrastive denominator
    pub include_positive: bool,
    /// take the literal highest-energy reading in the denoising stage
    pub score_highest: bool,
    pub max_matches: usize,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            k_hops: 1,
            max_negatives: 100,
            top_n: 5,
            tau: 1.0,
            epochs: 3,
            batch_size: 16,
            lr: 0.001,
            hidden: 256,
            embed: 256,
            dropout: 0.1,
            encoder: EncoderKind::Fingerprint { nbits: 2048, radius: 2 },
            include_positive: false,
            score_highest: false,
            max_matches: 100,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        if self.k_hops < 1 {
            return Err(EnhanceError::Config("k_hops must be >= 1".into()));
        }
        if self.max_negatives < 1 {
            return Err(EnhanceError::Config("max_negatives must be >= 1".into()));
        }
        if self.tau <= 0.0 {
            return Err(EnhanceError::Config("tau must be positive".into()));
        }
        if self.batch_size < 1 || self.epochs < 1 {
            return Err(EnhanceError::Config("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Encoder input for one entity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EntityInput {
    Vector(Vec<f64>),
    Graph(GraphInput),
}

/// Cached encoder inputs per node of the bipartite graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EbmFeatures {
    pub molecules: Vec<EntityInput>,
    /// one input per precursor-side pattern of each template
    pub templates: Vec<Vec<EntityInput>>,
}

/// Fingerprint features for a chemistry-backed graph.
pub fn fingerprint_features(
    graph: &BipartiteGraph,
    nbits: usize,
    radius: usize,
) -> Result<EbmFeatures, EnhanceError> {
    let molecules = (0..graph.molecules.len())
        .map(|m| {
            let fp = circular_fingerprint(&graph.parsed_molecule(m), radius, nbits)
                .map_err(|e| EnhanceError::Config(e.to_string()))?;
            Ok(EntityInput::Vector(fp.to_f64_vec()))
        })
        .collect::<Result<Vec<_>, EnhanceError>>()?;
    let templates = graph
        .templates
        .iter()
        .map(|node| {
            let tpl = node
                .template
                .as_ref()
                .ok_or_else(|| EnhanceError::Config("template node has no pattern".into()))?;
            tpl.precursor_patterns
                .iter()
                .map(|p| {
                    let fp = circular_fingerprint(p, radius, nbits)
                        .map_err(|e| EnhanceError::Config(e.to_string()))?;
                    Ok(EntityInput::Vector(fp.to_f64_vec()))
                })
                .collect::<Result<Vec<_>, EnhanceError>>()
        })
        .collect::<Result<Vec<_>, EnhanceError>>()?;
    Ok(EbmFeatures { molecules, templates })
}

/// Featurized-graph inputs for the message-passing encoder.
pub fn graph_features(graph: &BipartiteGraph) -> Result<EbmFeatures, EnhanceError> {
    let molecules = (0..graph.molecules.len())
        .map(|m| Ok(EntityInput::Graph(GraphInput::from_graph(&graph.parsed_molecule(m))?)))
        .collect::<Result<Vec<_>, EnhanceError>>()?;
    let templates = graph
        .templates
        .iter()
        .map(|node| {
            let tpl = node
                .template
                .as_ref()
                .ok_or_else(|| EnhanceError::Config("template node has no pattern".into()))?;
            tpl.precursor_patterns
                .iter()
                .map(|p| Ok(EntityInput::Graph(GraphInput::from_graph(p)?)))
                .collect::<Result<Vec<_>, EnhanceError>>()
        })
        .collect::<Result<Vec<_>, EnhanceError>>()?;
    Ok(EbmFeatures { molecules, templates })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mol_encoder: MlpParams,
    pub tpl_encoder: MlpParams,
    pub head: MlpParams,
    pub mol_mpnn: Option<MpnnParams>,
    pub tpl_mpnn: Option<MpnnParams>,
    pub tau: f64,
    pub kind: EncoderKind,
}

impl EnergyModel {
    pub fn init(cfg: &EnhanceConfig, vector_dim: usize, rng: &mut impl rand::Rng) -> Self {
        let (mol_mpnn, tpl_mpnn, enc_input) = match cfg.encoder {
            EncoderKind::Fingerprint { .. } => (None, None, vector_dim),
            EncoderKind::Mpnn { depth } => (
                Some(MpnnParams::init(
                    crate::molgraph::ATOM_FEATURE_LEN,
                    cfg.hidden,
                    depth,
                    cfg.dropout,
                    rng,
                )),
                Some(MpnnParams::init(
                    crate::molgraph::ATOM_FEATURE_LEN,
                    cfg.hidden,
                    depth,
                    cfg.dropout,
                    rng,
                )),
                cfg.hidden,
            ),
        };
        EnergyModel {
            mol_encoder: MlpParams::init(&[enc_input, cfg.hidden, cfg.embed], cfg.dropout, rng),
            tpl_encoder: MlpParams::init(&[enc_input, cfg.hidden, cfg.embed], cfg.dropout, rng),
            head: MlpParams::init(&[3 * cfg.embed, cfg.hidden, 1], cfg.dropout, rng),
            mol_mpnn,
            tpl_mpnn,
            tau: cfg.tau,
            kind: cfg.encoder,
        }
    }

    pub fn flatten(&self) -> Vec<DenseTensor> {
        let mut out = Vec::new();
        if let Some(m) = &self.mol_mpnn {
            out.extend(m.flatten());
        }
        out.extend(self.mol_encoder.flatten());
        if let Some(m) = &self.tpl_mpnn {
            out.extend(m.flatten());
        }
        out.extend(self.tpl_encoder.flatten());
        out.extend(self.head.flatten());
        out
    }

    pub fn set_from_flat(&mut self, flat: &[DenseTensor]) {
        let mut cursor = 0usize;
        if let Some(m) = &mut self.mol_mpnn {
            m.unflatten_into(&flat[cursor..cursor + 7]);
            cursor += 7;
        }
        let n = self.mol_encoder.layers.len() * 2;
        self.mol_encoder.unflatten_into(&flat[cursor..cursor + n]);
        cursor += n;
        if let Some(m) = &mut self.tpl_mpnn {
            m.unflatten_into(&flat[cursor..cursor + 7]);
            cursor += 7;
        }
        let n = self.tpl_encoder.layers.len() * 2;
        self.tpl_encoder.unflatten_into(&flat[cursor..cursor + n]);
        cursor += n;
        let n = self.head.layers.len() * 2;
        self.head.unflatten_into(&flat[cursor..cursor + n]);
    }

    /// Energy of one (molecule, template) pair at inference.
    pub fn energy(
        &self,
        mol: &EntityInput,
        tpl_patterns: &[EntityInput],
    ) -> Result<f64, EnhanceError> {
        let mut tape = Tape::new();
        let vars = EbmVars::on_tape(&mut tape, self);
        let e = vars.energy(&mut tape, mol, tpl_patterns, false, 0)?;
        Ok(tape.value(e).item())
    }
}

pub(super) struct EbmVars {
    mol_mpnn: Option<MpnnVars>,
    mol_mlp: MlpVars,
    tpl_mpnn: Option<MpnnVars>,
    tpl_mlp: MlpVars,
    head: MlpVars,
}

impl EbmVars {
    pub(super) fn on_tape(tape: &mut Tape, model: &EnergyModel) -> EbmVars {
        EbmVars {
            mol_mpnn: model.mol_mpnn.as_ref().map(|m| mpnn_to_tape(tape, m)),
            mol_mlp: mlp_to_tape(tape, &model.mol_encoder),
            tpl_mpnn: model.tpl_mpnn.as_ref().map(|m| mpnn_to_tape(tape, m)),
            tpl_mlp: mlp_to_tape(tape, &model.tpl_encoder),
            head: mlp_to_tape(tape, &model.head),
        }
    }

    pub(super) fn leaves(&self) -> Vec<Var> {
        let mut out = Vec::new();
        if let Some(m) = &self.mol_mpnn {
            out.extend(m.leaves.iter().copied());
        }
        out.extend(mlp_leaves(&self.mol_mlp));
        if let Some(m) = &self.tpl_mpnn {
            out.extend(m.leaves.iter().copied());
        }
        out.extend(mlp_leaves(&self.tpl_mlp));
        out.extend(mlp_leaves(&self.head));
        out
    }

    fn encode(
        &self,
        tape: &mut Tape,
        mpnn: &Option<MpnnVars>,
        mlp: &MlpVars,
        input: &EntityInput,
        training: bool,
        seed: u64,
    ) -> Result<Var, EnhanceError> {
        let x = match (input, mpnn) {
            (EntityInput::Vector(v), _) => tape.constant(DenseTensor::row_vector(v.clone())),
            (EntityInput::Graph(g), Some(vars)) => {
                crate::numerics::message_passing_encode(tape, vars, g)?
            }
            (EntityInput::Graph(_), None) => {
                return Err(EnhanceError::Config(
                    "graph input but the model has no message-passing encoder".into(),
                ))
            }
        };
        Ok(mlp_apply(tape, mlp, x, training, seed)?)
    }

    /// Template embedding: per-pattern encodings averaged, so the result is
    /// invariant to pattern order.
    fn encode_template(
        &self,
        tape: &mut Tape,
        patterns: &[EntityInput],
        training: bool,
        seed: u64,
    ) -> Result<Var, EnhanceError> {
        if patterns.is_empty() {
            return Err(EnhanceError::Config("template with no patterns".into()));
        }
        let mut acc: Option<Var> = None;
        for (i, p) in patterns.iter().enumerate() {
            let h = self.encode(tape, &self.tpl_mpnn, &self.tpl_mlp, p, training, seed ^ (i as u64))?;
            acc = Some(match acc {
                None => h,
                Some(a) => tape.add(a, h)?,
            });
        }
        Ok(tape.scale(acc.unwrap(), 1.0 / patterns.len() as f64))
    }

    pub(super) fn energy(
        &self,
        tape: &mut Tape,
        mol: &EntityInput,
        tpl_patterns: &[EntityInput],
        training: bool,
        seed: u64,
    ) -> Result<Var, EnhanceError> {
        let h_m = self.encode(tape, &self.mol_mpnn, &self.mol_mlp, mol, training, seed)?;
        let h_t = self.encode_template(tape, tpl_patterns, training, seed.rotate_left(17))?;
        let prod = tape.mul(h_m, h_t)?;
        let cat = tape.concat_cols(h_m, h_t)?;
        let cat = tape.concat_cols(cat, prod)?;
        Ok(mlp_apply(tape, &self.head, cat, training, seed.rotate_left(31))?)
    }
}

/// Contrastive subgraph loss on plain energy values, matching the printed
/// form: the denominator holds negatives only unless `include_positive`.
pub fn subgraph_loss_value(
    pos_energies: &[f64],
    neg_energies: &[f64],
    tau: f64,
    include_positive: bool,
) -> Result<f64, EnhanceError> {
    if neg_energies.is_empty() {
        return Err(EnhanceError::EmptyNegatives);
    }
    assert!(!pos_energies.is_empty(), "loss needs at least one positive");
    let lse = |xs: &[f64]| {
        let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + xs.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln()
    };
    let mut total = 0.0;
    for &fp in pos_energies {
        let mut scaled: Vec<f64> = neg_energies.iter().map(|&f| -f / tau).collect();
        if include_positive {
            scaled.push(-fp / tau);
        }
        total += fp / tau + lse(&scaled);
    }
    Ok(total / pos_energies.len() as f64)
}

/// Deterministic negative truncation: negatives sharing the seed's molecule
/// first, then by (template frequency desc, template id, molecule id).
pub(super) fn truncate_negatives(
    graph: &BipartiteGraph,
    seed_mol: usize,
    neg_edges: &[usize],
    max_negatives: usize,
) -> Vec<usize> {
    let mut ordered: Vec<usize> = neg_edges.to_vec();
    ordered.sort_by_key(|&e| {
        let edge = &graph.edges[e];
        (
            edge.molecule != seed_mol,
            Reverse(graph.templates[edge.template].frequency),
            graph.templates[edge.template].id.clone(),
            graph.molecules[edge.molecule].id.clone(),
        )
    });
    ordered.truncate(max_negatives);
    ordered
}

struct EdgeEnergies<'a> {
    graph: &'a BipartiteGraph,
    features: &'a EbmFeatures,
    mol_cache: HashMap<usize, Var>,
    tpl_cache: HashMap<usize, Var>,
}

impl<'a> EdgeEnergies<'a> {
    fn new(graph: &'a BipartiteGraph, features: &'a EbmFeatures) -> Self {
        EdgeEnergies {
            graph,
            features,
            mol_cache: HashMap::new(),
            tpl_cache: HashMap::new(),
        }
    }

    fn energy_of(
        &mut self,
        tape: &mut Tape,
        vars: &EbmVars,
        edge_idx: usize,
        training: bool,
        seed: u64,
    ) -> Result<Var, EnhanceError> {
        let edge = &self.graph.edges[edge_idx];
        let h_m = match self.mol_cache.get(&edge.molecule) {
            Some(&v) => v,
            None => {
                let v = vars.encode(
                    tape,
                    &vars.mol_mpnn,
                    &vars.mol_mlp,
                    &self.features.molecules[edge.molecule],
                    training,
                    seed ^ (edge.molecule as u64).wrapping_mul(0x9e3779b97f4a7c15),
                )?;
                self.mol_cache.insert(edge.molecule, v);
                v
            }
        };
        let h_t = match self.tpl_cache.get(&edge.template) {
            Some(&v) => v,
            None => {
                let v = vars.encode_template(
                    tape,
                    &self.features.templates[edge.template],
                    training,
                    seed ^ (edge.template as u64).wrapping_mul(0xd1b54a32d192ed03),
                )?;
                self.tpl_cache.insert(edge.template, v);
                v
            }
        };
        let prod = tape.mul(h_m, h_t)?;
        let cat = tape.concat_cols(h_m, h_t)?;
        let cat = tape.concat_cols(cat, prod)?;
        Ok(mlp_apply(tape, &vars.head, cat, training, seed ^ edge_idx as u64)?)
    }
}

/// Tape-side subgraph loss for one sample with already-truncated negatives.
fn sample_loss_on_tape(
    tape: &mut Tape,
    vars: &EbmVars,
    energies: &mut EdgeEnergies,
    pos_edges: &[usize],
    neg_edges: &[usize],
    tau: f64,
    include_positive: bool,
    training: bool,
    seed: u64,
) -> Result<Var, EnhanceError> {
    if neg_edges.is_empty() {
        return Err(EnhanceError::EmptyNegatives);
    }
    let neg_vars: Vec<Var> = neg_edges
        .iter()
        .map(|&e| {
            let f = energies.energy_of(tape, vars, e, training, seed)?;
            Ok(tape.scale(f, -1.0 / tau))
        })
        .collect::<Result<Vec<_>, EnhanceError>>()?;
    let shared_lse = if include_positive {
        None
    } else {
        let row = tape.stack_scalars(neg_vars.clone())?;
        Some(tape.log_sum_exp_rows(row))
    };
    let mut total: Option<Var> = None;
    for &pe in pos_edges {
        let fp = energies.energy_of(tape, vars, pe, training, seed)?;
        let fp_scaled = tape.scale(fp, 1.0 / tau);
        let lse = match shared_lse {
            Some(v) => v,
            None => {
                let mut entries = neg_vars.clone();
                entries.push(tape.scale(fp, -1.0 / tau));
                let row = tape.stack_scalars(entries)?;
                tape.log_sum_exp_rows(row)
            }
        };
        let term = tape.add(fp_scaled, lse)?;
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    Ok(tape.scale(total.expect("at least one positive"), 1.0 / pos_edges.len() as f64))
}

/// Loss value and exact gradients (in `EnergyModel::flatten` order) of the
/// subgraph loss for one sample at inference settings. The entry point for
/// finite-difference verification.
pub fn sample_loss_and_grad(
    graph: &BipartiteGraph,
    features: &EbmFeatures,
    model: &EnergyModel,
    pos_edges: &[usize],
    neg_edges: &[usize],
    include_positive: bool,
) -> Result<(f64, Vec<DenseTensor>), EnhanceError> {
    let mut tape = Tape::new();
    let vars = EbmVars::on_tape(&mut tape, model);
    let leaves = vars.leaves();
    let mut energies = EdgeEnergies::new(graph, features);
    let loss = sample_loss_on_tape(
        &mut tape,
        &vars,
        &mut energies,
        pos_edges,
        neg_edges,
        model.tau,
        include_positive,
        false,
        0,
    )?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss, &leaves).map_err(EnhanceError::Numeric)?;
    Ok((value, grads))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpochLog {
    pub mean_loss: f64,
    pub mean_pos_energy: f64,
    pub mean_neg_energy: f64,
    pub samples: usize,
    pub skipped_no_negatives: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub seed: u64,
    pub adam_steps: u64,
}

/// Train the energy model: per gt edge, extract its k-hop sample, truncate
/// negatives, accumulate the contrastive loss, and take Adam steps per batch.
pub fn train_ebm(
    graph: &BipartiteGraph,
    features: &EbmFeatures,
    cfg: &EnhanceConfig,
    seed: u64,
) -> Result<(EnergyModel, TrainingLog), EnhanceError> {
    train_ebm_with_budget(graph, features, cfg, seed, u64::MAX)
}

/// As `train_ebm`, stopping after at most `max_steps` Adam updates.
pub fn train_ebm_with_budget(
    graph: &BipartiteGraph,
    features: &EbmFeatures,
    cfg: &EnhanceConfig,
    seed: u64,
    max_steps: u64,
) -> Result<(EnergyModel, TrainingLog), EnhanceError> {
    cfg.validate()?;
    if features.molecules.len() != graph.molecules.len()
        || features.templates.len() != graph.templates.len()
    {
        return Err(EnhanceError::Config("feature table does not match the graph".into()));
    }
    let vector_dim = match (&cfg.encoder, features.molecules.first()) {
        (EncoderKind::Fingerprint { .. }, Some(EntityInput::Vector(v))) => v.len(),
        (EncoderKind::Mpnn { .. }, Some(EntityInput::Graph(_))) => 0,
        _ => return Err(EnhanceError::Config("feature kind does not match encoder".into())),
    };
    let gt = graph.gt_edges();
    if gt.is_empty() {
        return Err(EnhanceError::Config("graph has no gt edges".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = EnergyModel::init(cfg, vector_dim, &mut rng);
    let mut params = model.flatten();
    let mut adam = AdamState::new(&params, cfg.lr);
    let mut log = TrainingLog { seed, ..TrainingLog::default() };

    // samples are fixed across epochs; extract once
    let mut prepared: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut skipped = 0usize;
    for &edge_idx in &gt {
        let e = &graph.edges[edge_idx];
        let sample = khop_subgraph(graph, (e.molecule, e.template), cfg.k_hops)?;
        let negs =
            truncate_negatives(graph, e.molecule, &sample.neg_edges, cfg.max_negatives);
        if negs.is_empty() {
            skipped += 1;
            continue;
        }
        prepared.push((edge_idx, sample.pos_edges, negs));
    }
    if prepared.is_empty() {
        return Err(EnhanceError::Config("no trainable samples (all without negatives)".into()));
    }

    'training: for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut pos_sum = 0.0;
        let mut pos_n = 0usize;
        let mut neg_sum = 0.0;
        let mut neg_n = 0usize;
        let mut batches = 0usize;

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            model.set_from_flat(&params);
            let mut tape = Tape::new();
            let vars = EbmVars::on_tape(&mut tape, &model);
            let leaves = vars.leaves();
            let mut energies = EdgeEnergies::new(graph, features);
            let dropout_seed =
                seed ^ ((epoch as u64) << 32) ^ ((batch_idx as u64) << 8) ^ 0x5bd1e995;
            let mut batch_total: Option<Var> = None;
            for &si in chunk {
                let (_, pos, negs) = &prepared[si];
                let loss = sample_loss_on_tape(
                    &mut tape,
                    &vars,
                    &mut energies,
                    pos,
                    negs,
                    cfg.tau,
                    cfg.include_positive,
                    true,
                    dropout_seed ^ (si as u64),
                )?;
                for &pe in pos {
                    let v =
                        energies.energy_of(&mut tape, &vars, pe, true, dropout_seed ^ (si as u64))?;
                    pos_sum += tape.value(v).item();
                    pos_n += 1;
                }
                for &ne in negs {
                    let v =
                        energies.energy_of(&mut tape, &vars, ne, true, dropout_seed ^ (si as u64))?;
                    neg_sum += tape.value(v).item();
                    neg_n += 1;
                }
                batch_total = Some(match batch_total {
                    None => loss,
                    Some(t) => tape.add(t, loss)?,
                });
            }
            let batch_loss =
                tape.scale(batch_total.expect("non-empty batch"), 1.0 / chunk.len() as f64);
            epoch_loss += tape.value(batch_loss).item();
            batches += 1;
            let grads = tape.backward(batch_loss, &leaves)?;
            adam_step(&mut adam, &mut params, &grads)?;
            log.adam_steps += 1;
            if log.adam_steps >= max_steps {
                model.set_from_flat(&params);
                log.epochs.push(EpochLog {
                    mean_loss: epoch_loss / batches as f64,
                    mean_pos_energy: pos_sum / pos_n.max(1) as f64,
                    mean_neg_energy: neg_sum / neg_n.max(1) as f64,
                    samples: prepared.len(),
                    skipped_no_negatives: skipped,
                });
                break 'training;
            }
        }
        model.set_from_flat(&params);
        log.epochs.push(EpochLog {
            mean_loss: epoch_loss / batches.max(1) as f64,
            mean_pos_energy: pos_sum / pos_n.max(1) as f64,
            mean_neg_energy: neg_sum / neg_n.max(1) as f64,
            samples: prepared.len(),
            skipped_no_negatives: skipped,
        });
    }
    model.set_from_flat(&params);
    Ok((model, log))
}

/// Stage C: per gt edge, re-extract the k-hop sample and keep the top-n most
/// ground-truth-like candidates (lowest energy by default), unioned with the
/// gt edges. Returns the enhanced pair set and the scored selections.
pub fn denoise_top_n(
    graph: &BipartiteGraph,
    model: &EnergyModel,
    features: &EbmFeatures,
    n: usize,
    k: usize,
    score_highest: bool,
) -> Result<(BTreeSet<(usize, usize)>, Vec<(usize, usize, f64)>), EnhanceError> {
    let mut enhanced: BTreeSet<(usize, usize)> = graph
        .gt_edges()
        .iter()
        .map(|&e| (graph.edges[e].molecule, graph.edges[e].template))
        .collect();
    let mut selected: Vec<(usize, usize, f64)> = Vec::new();
    if n == 0 {
        return Ok((enhanced, selected));
    }
    // energies are pure given the checkpoint; cache per (mol, tpl)
    let mut energy_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let gt = graph.gt_edges();
    for &edge_idx in &gt {
        let e = &graph.edges[edge_idx];
        let sample = khop_subgraph(graph, (e.molecule, e.template), k)?;
        let mut scored: Vec<(f64, usize, usize)> = Vec::new();
        for &ne in &sample.neg_edges {
            let pair = (graph.edges[ne].molecule, graph.edges[ne].template);
            let f = match energy_cache.get(&pair) {
                Some(&f) => f,
                None => {
                    let f = model.energy(
                        &features.molecules[pair.0],
                        &features.templates[pair.1],
                    )?;
                    energy_cache.insert(pair, f);
                    f
                }
            };
            scored.push((f, pair.0, pair.1));
        }
        scored.sort_by(|a, b| {
            let ord = a.0.partial_cmp(&b.0).expect("finite energies");
            let ord = if score_highest { ord.reverse() } else { ord };
            ord.then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        });
        for &(f, m, t) in scored.iter().take(n) {
            if enhanced.insert((m, t)) {
                selected.push((m, t, f));
            }
        }
    }
    selected.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok((enhanced, selected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::EdgeLabel;
    use crate::synth::{planted_bipartite, ranking_auc};

    fn small_cfg() -> EnhanceConfig {
        EnhanceConfig {
            hidden: 16,
            embed: 16,
            dropout: 0.0,
            epochs: 6,
            batch_size: 8,
            max_negatives: 40,
            encoder: EncoderKind::Fingerprint { nbits: 0, radius: 0 },
            ..EnhanceConfig::default()
        }
    }

    #[test]
    fn planted_graph_training_separates_energies() {
        let (graph, features) = planted_bipartite(30, 10, 3, 8, 5);
        let mut cfg = small_cfg();
        cfg.lr = 0.01;
        cfg.epochs = 10;
        let (model, log) = train_ebm(&graph, &features, &cfg, 11).unwrap();
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
        let auc = ranking_auc(&gt_e, &cand_e);
        assert!(auc >= 0.85, "auc {auc}, log {log:?}");
        assert!(
            log.epochs.last().unwrap().mean_pos_energy
                < log.epochs.last().unwrap().mean_neg_energy
        );
    }

    #[test]
    fn training_is_deterministic_under_fixed_seed() {
        let (graph, features) = planted_bipartite(20, 8, 3, 4, 2);
        let mut cfg = small_cfg();
        cfg.epochs = 2;
        let (a, _) = train_ebm(&graph, &features, &cfg, 33).unwrap();
        let (b, _) = train_ebm(&graph, &features, &cfg, 33).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn denoise_n_zero_returns_gt_only() {
        let (graph, features) = planted_bipartite(20, 8, 3, 4, 2);
        let mut cfg = small_cfg();
        cfg.epochs = 1;
        let (model, _) = train_ebm(&graph, &features, &cfg, 1).unwrap();
        let (enhanced, selected) = denoise_top_n(&graph, &model, &features, 0, 1, false).unwrap();
        let gt_pairs = graph.edge_pairs(Some(EdgeLabel::Gt));
        assert_eq!(enhanced, gt_pairs);
        assert!(selected.is_empty());
    }

    #[test]
    fn denoise_respects_count_bound_and_sandwich() {
        let (graph, features) = planted_bipartite(24, 10, 3, 4, 7);
        let mut cfg = small_cfg();
        cfg.epochs = 1;
        let (model, _) = train_ebm(&graph, &features, &cfg, 1).unwrap();
        let gt_pairs = graph.edge_pairs(Some(EdgeLabel::Gt));
        let all_pairs = graph.edge_pairs(None);
        for n in [1usize, 3, 5] {
            let (enhanced, _) = denoise_top_n(&graph, &model, &features, n, 1, false).unwrap();
            assert!(gt_pairs.is_subset(&enhanced));
            assert!(enhanced.is_subset(&all_pairs));
            assert!(enhanced.len() <= gt_pairs.len() * (n + 1));
        }
    }

    #[test]
    fn loss_matches_hand_values() {
        // equal energies, one negative: ratio 1, loss 0
        let l = subgraph_loss_value(&[0.7], &[0.7], 1.0, false).unwrap();
        assert!(l.abs() < 1e-12);
        // two zero-energy negatives: ln 2
        let l = subgraph_loss_value(&[0.0], &[0.0, 0.0], 1.0, false).unwrap();
        assert!((l - 2.0f64.ln()).abs() < 1e-12, "{l}");
        // the as-printed denominator admits negative losses
        let l = subgraph_loss_value(&[0.0], &[1.0], 0.5, false).unwrap();
        assert!((l + 2.0).abs() < 1e-12, "{l}");
    }

    #[test]
    fn include_positive_variant_is_bounded_below() {
        for (fp, fns) in [(0.0, vec![5.0]), (3.0, vec![-1.0, 2.0]), (-2.0, vec![0.0])] {
            let l = subgraph_loss_value(&[fp], &fns, 1.0, true).unwrap();
            assert!(l >= 0.0, "{l}");
        }
    }

    #[test]
    fn empty_negatives_is_an_error() {
        assert!(matches!(
            subgraph_loss_value(&[0.0], &[], 1.0, false),
            Err(EnhanceError::EmptyNegatives)
        ));
    }
}
