//! K-hop reaction-level subgraph extraction: K rounds of first-neighbor set
//! replacement from the seed edge, then the vertex-induced subgraph.

use super::{BipartiteGraph, EdgeLabel, EnhanceError};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphSample {
    pub seed: (usize, usize),
    pub mol_rim: BTreeSet<usize>,
    pub tpl_rim: BTreeSet<usize>,
    /// induced gt edges (indices into the graph's edge list)
    pub pos_edges: Vec<usize>,
    /// induced candidate edges
    pub neg_edges: Vec<usize>,
    pub k: usize,
}

pub fn khop_subgraph(
    graph: &BipartiteGraph,
    seed: (usize, usize),
    k: usize,
) -> Result<SubgraphSample, EnhanceError> {
    let (m, t) = seed;
    if graph.edge_index(m, t).is_none() {
        return Err(EnhanceError::MissingEdge(m, t));
    }
    let mut mol_rim: BTreeSet<usize> = BTreeSet::from([m]);
    let mut tpl_rim: BTreeSet<usize> = BTreeSet::from([t]);
    for _ in 0..k {
        // both replacements read the sets from the previous round
        let next_mols: BTreeSet<usize> = tpl_rim
            .iter()
            .flat_map(|&tt| graph.template_edges(tt).iter().map(|&e| graph.edges[e].molecule))
            .collect();
        let next_tpls: BTreeSet<usize> = mol_rim
            .iter()
            .flat_map(|&mm| graph.molecule_edges(mm).iter().map(|&e| graph.edges[e].template))
            .collect();
        mol_rim = next_mols;
        tpl_rim = next_tpls;
    }
    let mut pos_edges = Vec::new();
    let mut neg_edges = Vec::new();
    for &mm in &mol_rim {
        for &e in graph.molecule_edges(mm) {
            if tpl_rim.contains(&graph.edges[e].template) {
                match graph.edges[e].label {
                    EdgeLabel::Gt => pos_edges.push(e),
                    EdgeLabel::Candidate => neg_edges.push(e),
                }
            }
        }
    }
    pos_edges.sort_unstable();
    neg_edges.sort_unstable();
    Ok(SubgraphSample { seed, mol_rim, tpl_rim, pos_edges, neg_edges, k })
}

/// Independent literal trace of the set-replacement pseudocode, scanning the
/// whole edge list each round with no adjacency index. Test oracle only.
pub fn khop_subgraph_brute_force(
    graph: &BipartiteGraph,
    seed: (usize, usize),
    k: usize,
) -> Result<SubgraphSample, EnhanceError> {
    let (m, t) = seed;
    if !graph.edges.iter().any(|e| e.molecule == m && e.template == t) {
        return Err(EnhanceError::MissingEdge(m, t));
    }
    let mut mol_rim: BTreeSet<usize> = BTreeSet::from([m]);
    let mut tpl_rim: BTreeSet<usize> = BTreeSet::from([t]);
    for _ in 0..k {
        let mut next_mols = BTreeSet::new();
        let mut next_tpls = BTreeSet::new();
        for e in &graph.edges {
            if tpl_rim.contains(&e.template) {
                next_mols.insert(e.molecule);
            }
            if mol_rim.contains(&e.molecule) {
                next_tpls.insert(e.template);
            }
        }
        mol_rim = next_mols;
        tpl_rim = next_tpls;
    }
    let mut pos_edges = Vec::new();
    let mut neg_edges = Vec::new();
    for (idx, e) in graph.edges.iter().enumerate() {
        if mol_rim.contains(&e.molecule) && tpl_rim.contains(&e.template) {
            match e.label {
                EdgeLabel::Gt => pos_edges.push(idx),
                EdgeLabel::Candidate => neg_edges.push(idx),
            }
        }
    }
    Ok(SubgraphSample { seed, mol_rim, tpl_rim, pos_edges, neg_edges, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enhance::{Edge, MoleculeNode, TemplateNode};

    fn toy_graph(pairs: &[(usize, usize)], gt: &[(usize, usize)], n_m: usize, n_t: usize) -> BipartiteGraph {
        let molecules = (0..n_m)
            .map(|i| MoleculeNode { id: format!("m{i}"), smiles: "C".into() })
            .collect();
        let templates = (0..n_t)
            .map(|i| TemplateNode { id: format!("t{i}"), frequency: 1, template: None })
            .collect();
        let edges = pairs
            .iter()
            .map(|&(m, t)| Edge {
                molecule: m,
                template: t,
                label: if gt.contains(&(m, t)) { EdgeLabel::Gt } else { EdgeLabel::Candidate },
            })
            .collect();
        BipartiteGraph::from_parts(molecules, templates, edges)
    }

    // graph from the worked example: edges {(m1,t1),(m2,t1),(m1,t2),(m3,t2)}
    fn example_graph() -> BipartiteGraph {
        toy_graph(&[(0, 0), (1, 0), (0, 1), (2, 1)], &[(0, 0)], 3, 2)
    }

    #[test]
    fn one_hop_from_worked_example() {
        let g = example_graph();
        let s = khop_subgraph(&g, (0, 0), 1).unwrap();
        assert_eq!(s.mol_rim, BTreeSet::from([0, 1]));
        assert_eq!(s.tpl_rim, BTreeSet::from([0, 1]));
        let covered: BTreeSet<(usize, usize)> = s
            .pos_edges
            .iter()
            .chain(&s.neg_edges)
            .map(|&e| (g.edges[e].molecule, g.edges[e].template))
            .collect();
        assert_eq!(covered, BTreeSet::from([(0, 0), (1, 0), (0, 1)]));
    }

    #[test]
    fn two_hops_cover_all_edges() {
        let g = example_graph();
        let s = khop_subgraph(&g, (0, 0), 2).unwrap();
        assert_eq!(s.pos_edges.len() + s.neg_edges.len(), 4);
    }

    #[test]
    fn isolated_seed_edge_is_a_fixed_point() {
        let g = toy_graph(&[(0, 0), (1, 1)], &[(0, 0)], 2, 2);
        for k in 1..=4 {
            let s = khop_subgraph(&g, (0, 0), k).unwrap();
            assert_eq!(s.mol_rim, BTreeSet::from([0]));
            assert_eq!(s.tpl_rim, BTreeSet::from([0]));
            assert_eq!(s.pos_edges.len(), 1);
            assert!(s.neg_edges.is_empty());
        }
    }

    #[test]
    fn missing_edge_rejected() {
        let g = example_graph();
        assert!(matches!(
            khop_subgraph(&g, (2, 0), 1),
            Err(EnhanceError::MissingEdge(2, 0))
        ));
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n_m = rng.random_range(2..12);
            let n_t = rng.random_range(2..8);
            let mut pairs = Vec::new();
            let mut gt = Vec::new();
            for m in 0..n_m {
                for t in 0..n_t {
                    if rng.random_range(0.0..1.0) < 0.3 {
                        pairs.push((m, t));
                        if rng.random_range(0.0..1.0) < 0.3 {
                            gt.push((m, t));
                        }
                    }
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let g = toy_graph(&pairs, &gt, n_m, n_t);
            let seed = pairs[rng.random_range(0..pairs.len())];
            for k in 1..=3 {
                let fast = khop_subgraph(&g, seed, k).unwrap();
                let slow = khop_subgraph_brute_force(&g, seed, k).unwrap();
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn seed_edge_always_inside_its_sample() {
        let g = example_graph();
        for k in 1..=3 {
            let s = khop_subgraph(&g, (0, 0), k).unwrap();
            assert!(s.mol_rim.contains(&0) && s.tpl_rim.contains(&0));
            let seed_edge = g.edge_index(0, 0).unwrap();
            assert!(s.pos_edges.contains(&seed_edge));
        }
    }
}
