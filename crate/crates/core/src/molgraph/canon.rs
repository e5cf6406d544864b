//! Canonical atom ranking by iterative neighborhood refinement with
//! exhaustive tie-breaking: every member of the first ambiguous class is
//! tried and the labeling that yields the lexicographically smallest SMILES
//! wins, so the result is invariant to input atom order.

use super::writer::write_smiles;
use super::MolecularGraph;

/// Refinement budget per component; beyond it the tie-break keeps the first
/// candidate. Corpus-scale molecules stay far below this.
const REFINE_BUDGET: usize = 50_000;

/// Canonical ranks for a whole (possibly multi-component) graph. Ranks are a
/// permutation of 0..n; components are ordered by their canonical strings.
pub fn canonical_ranks(graph: &MolecularGraph) -> Vec<usize> {
    let comps = graph.connected_components();
    if comps.is_empty() {
        return Vec::new();
    }
    if comps.len() == 1 {
        return component_ranks(graph);
    }
    let mut pieces: Vec<(String, String, Vec<usize>, Vec<usize>)> = Vec::new();
    for comp in comps {
        let (sub, order) = graph.induced_subgraph(&comp);
        let ranks = component_ranks(&sub);
        let plain = write_smiles(&sub, &ranks, false);
        let mapped = write_smiles(&sub, &ranks, true);
        pieces.push((plain, mapped, ranks, order));
    }
    pieces.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let mut global = vec![0usize; graph.atom_count()];
    let mut offset = 0usize;
    for (_, _, ranks, order) in pieces {
        for (local_idx, &orig) in order.iter().enumerate() {
            global[orig] = offset + ranks[local_idx];
        }
        offset += order.len();
    }
    global
}

/// Canonical ranks for one connected component.
pub(super) fn component_ranks(graph: &MolecularGraph) -> Vec<usize> {
    let n = graph.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let init = dense_rank(&initial_keys(graph));
    let ranks = refine(graph, init);
    let mut budget = REFINE_BUDGET;
    let (ranks, _) = disambiguate(graph, ranks, &mut budget);
    ranks
}

/// Order-independent starting invariant per atom. Atom maps and chirality
/// annotations are deliberately excluded so renumbering cannot change ranks.
fn initial_keys(graph: &MolecularGraph) -> Vec<Vec<u16>> {
    (0..graph.atom_count())
        .map(|i| {
            let atom = graph.atom(i);
            let mut key: Vec<u16> = Vec::new();
            for b in atom.element.bytes() {
                key.push(b as u16);
            }
            key.push(0);
            key.push(atom.aromatic as u16);
            key.push((atom.charge as i16 + 16) as u16);
            key.push(graph.degree(i) as u16);
            key.push(atom.hydrogens as u16);
            key.push(atom.isotope.unwrap_or(0));
            let mut orders: Vec<u16> = graph
                .neighbors(i)
                .iter()
                .map(|&(_, b)| graph.bonds()[b].order.code() as u16)
                .collect();
            orders.sort_unstable();
            key.extend(orders);
            key
        })
        .collect()
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    let mut seen: Vec<usize> = ranks.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Iterate (rank, sorted neighbor (bond, rank) list) re-ranking until the
/// partition stops splitting.
fn refine(graph: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..graph.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(u8, usize)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (graph.bonds()[b].order.code(), ranks[j]))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let new_ranks = dense_rank(&keys);
        let new_classes = class_count(&new_ranks);
        ranks = new_ranks;
        if new_classes == classes {
            return ranks;
        }
        classes = new_classes;
    }
}

fn disambiguate(
    graph: &MolecularGraph,
    ranks: Vec<usize>,
    budget: &mut usize,
) -> (Vec<usize>, (String, String)) {
    let n = graph.atom_count();
    if class_count(&ranks) == n {
        // refinement stays map-blind; among automorphic labelings the mapped
        // string breaks the tie so map placement is deterministic too
        let s = (write_smiles(graph, &ranks, false), write_smiles(graph, &ranks, true));
        return (ranks, s);
    }
    // smallest rank value held by more than one atom
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r] += 1;
    }
    let tied_rank = (0..n).find(|&r| counts[r] > 1).expect("tied class exists");
    let members: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied_rank).collect();

    let mut best: Option<(Vec<usize>, (String, String))> = None;
    for member in members {
        let mut promoted: Vec<usize> = ranks.iter().map(|&r| r * 2 + 1).collect();
        promoted[member] = tied_rank * 2;
        let refined = refine(graph, dense_rank(&promoted));
        let candidate = disambiguate(graph, refined, budget);
        let better = match &best {
            None => true,
            Some((_, s)) => candidate.1 < *s,
        };
        if better {
            best = Some(candidate);
        }
        if *budget == 0 {
            break;
        }
        *budget -= 1;
    }
    best.expect("at least one candidate")
}
