//! Concept enhancement over the target-template bipartite graph: build the
//! full graph, filter it with the rule-based stage, extract k-hop
//! reaction-level subgraphs, train the energy model on the subgraph-aware
//! contrastive loss, and select the top-n enhanced edges.

mod ebm;
mod khop;

pub use ebm::{
    denoise_top_n, fingerprint_features, graph_features, sample_loss_and_grad,
    subgraph_loss_value, train_ebm, train_ebm_with_budget, EbmFeatures, EncoderKind, EnergyModel,
    EnhanceConfig, EntityInput, TrainingLog,
};
pub use khop::{khop_subgraph, khop_subgraph_brute_force, SubgraphSample};

use crate::molgraph::{parse_smiles, to_canonical_smiles, MolecularGraph};
use crate::templates::{apply_template, CorpusTemplates, Reaction, Template};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("edge ({0}, {1}) not present in the graph")]
    MissingEdge(usize, usize),
    #[error("subgraph sample has no negative edges")]
    EmptyNegatives,
    #[error("templates must be extracted at radius >= 1 for enhancement, got {0}")]
    Radius(usize),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] crate::numerics::NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Gt,
    Candidate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoleculeNode {
    pub id: String,
    pub smiles: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateNode {
    pub id: String,
    pub frequency: usize,
    /// Present for chemistry-backed graphs; synthetic benchmark graphs carry
    /// feature vectors only.
    pub template: Option<Template>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub molecule: usize,
    pub template: usize,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub molecules: Vec<MoleculeNode>,
    pub templates: Vec<TemplateNode>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    mol_adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    tpl_adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl BipartiteGraph {
    pub fn from_parts(
        molecules: Vec<MoleculeNode>,
        templates: Vec<TemplateNode>,
        edges: Vec<Edge>,
    ) -> Self {
        let mut g = BipartiteGraph {
            molecules,
            templates,
            edges,
            mol_adjacency: Vec::new(),
            tpl_adjacency: Vec::new(),
            edge_lookup: HashMap::new(),
        };
        g.rebuild_index();
        g
    }

    pub fn rebuild_index(&mut self) {
        self.mol_adjacency = vec![Vec::new(); self.molecules.len()];
        self.tpl_adjacency = vec![Vec::new(); self.templates.len()];
        self.edge_lookup = HashMap::with_capacity(self.edges.len());
        for (idx, e) in self.edges.iter().enumerate() {
            self.mol_adjacency[e.molecule].push(idx);
            self.tpl_adjacency[e.template].push(idx);
            self.edge_lookup.insert((e.molecule, e.template), idx);
        }
    }

    pub fn edge_index(&self, molecule: usize, template: usize) -> Option<usize> {
        self.edge_lookup.get(&(molecule, template)).copied()
    }

    pub fn molecule_edges(&self, m: usize) -> &[usize] {
        &self.mol_adjacency[m]
    }

    pub fn template_edges(&self, t: usize) -> &[usize] {
        &self.tpl_adjacency[t]
    }

    pub fn gt_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].label == EdgeLabel::Gt).collect()
    }

    pub fn edge_pairs(&self, label: Option<EdgeLabel>) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| label.map(|l| e.label == l).unwrap_or(true))
            .map(|e| (e.molecule, e.template))
            .collect()
    }

    pub fn parsed_molecule(&self, m: usize) -> MolecularGraph {
        parse_smiles(&self.molecules[m].smiles).expect("stored molecule smiles parses")
    }
}

/// Complete target-template graph: one node per distinct product, one per
/// template, a candidate edge for every pair, and gt labels on observed
/// (product, template) pairs.
pub fn build_bipartite_graph(
    corpus: &[Reaction],
    templates: &CorpusTemplates,
) -> Result<BipartiteGraph, EnhanceError> {
    if templates.radius == 0 {
        return Err(EnhanceError::Radius(0));
    }
    let mut product_smiles: Vec<String> = corpus
        .iter()
        .filter(|r| templates.assignment.contains_key(&r.id))
        .map(|r| to_canonical_smiles(&r.product, false))
        .collect();
    product_smiles.sort();
    product_smiles.dedup();
    let mol_index: BTreeMap<&str, usize> =
        product_smiles.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let molecules: Vec<MoleculeNode> = product_smiles
        .iter()
        .enumerate()
        .map(|(i, s)| MoleculeNode { id: format!("m{i:06}"), smiles: s.clone() })
        .collect();

    let tpl_index: BTreeMap<&str, usize> = templates
        .table
        .iter()
        .enumerate()
        .map(|(i, t)| (t.template_id.as_str(), i))
        .collect();
    let template_nodes: Vec<TemplateNode> = templates
        .table
        .iter()
        .map(|t| TemplateNode {
            id: t.template_id.clone(),
            frequency: t.frequency,
            template: Some(t.clone()),
        })
        .collect();

    let mut gt_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for r in corpus {
        if let Some(tid) = templates.assignment.get(&r.id) {
            let m = mol_index[to_canonical_smiles(&r.product, false).as_str()];
            let t = tpl_index[tid.as_str()];
            gt_pairs.insert((m, t));
        }
    }

    let mut edges = Vec::with_capacity(molecules.len() * template_nodes.len());
    for m in 0..molecules.len() {
        for t in 0..template_nodes.len() {
            let label =
                if gt_pairs.contains(&(m, t)) { EdgeLabel::Gt } else { EdgeLabel::Candidate };
            edges.push(Edge { molecule: m, template: t, label });
        }
    }
    Ok(BipartiteGraph::from_parts(molecules, template_nodes, edges))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageAReport {
    pub retained: usize,
    pub removed: usize,
    pub gt_failures: Vec<(usize, usize)>,
}

/// Rule-based filter: drop candidate edges whose template has no embedding
/// in the molecule or whose every rewrite fails validity. Gt edges are
/// always retained (failures are reported, not dropped).
pub fn stage_a_filter(
    graph: &BipartiteGraph,
    max_matches: usize,
) -> Result<(BipartiteGraph, StageAReport), EnhanceError> {
    let parsed: Vec<MolecularGraph> =
        (0..graph.molecules.len()).map(|m| graph.parsed_molecule(m)).collect();
    let verdicts: Vec<(usize, bool)> = graph
        .edges
        .par_iter()
        .enumerate()
        .map(|(idx, e)| {
            let tpl = graph.templates[e.template]
                .template
                .as_ref()
                .expect("chemistry graph has templates");
            let ok = !apply_template(tpl, &parsed[e.molecule], max_matches).is_empty();
            (idx, ok)
        })
        .collect();

    let mut edges = Vec::new();
    let mut removed = 0usize;
    let mut gt_failures = Vec::new();
    for (idx, ok) in verdicts {
        let e = graph.edges[idx];
        match (e.label, ok) {
            (EdgeLabel::Gt, ok) => {
                if !ok {
                    gt_failures.push((e.molecule, e.template));
                }
                edges.push(e);
            }
            (EdgeLabel::Candidate, true) => edges.push(e),
            (EdgeLabel::Candidate, false) => removed += 1,
        }
    }
    let report = StageAReport { retained: edges.len(), removed, gt_failures };
    Ok((
        BipartiteGraph::from_parts(graph.molecules.clone(), graph.templates.clone(), edges),
        report,
    ))
}

/// Materialize selected (molecule, template) edges as enhanced reaction
/// records: the first canonical outcome of apply_template per edge.
pub fn materialize_enhanced(
    graph: &BipartiteGraph,
    selected: &[(usize, usize)],
    max_matches: usize,
) -> Vec<Reaction> {
    let mut out = Vec::new();
    for &(m, t) in selected {
        let Some(tpl) = graph.templates[t].template.as_ref() else { continue };
        let product = graph.parsed_molecule(m);
        let outcomes = apply_template(tpl, &product, max_matches);
        let Some(first) = outcomes.into_iter().next() else { continue };
        let precursors: Vec<MolecularGraph> =
            first.iter().map(|s| parse_smiles(s).expect("outcome parses")).collect();
        out.push(Reaction {
            id: format!("enh_{}_{}", graph.molecules[m].id, graph.templates[t].id),
            reaction_class: None,
            precursors,
            product,
            provenance: crate::templates::Provenance::Enhanced,
        });
    }
    out
}
