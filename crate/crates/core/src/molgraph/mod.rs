//! Molecular graphs parsed from SMILES: atoms, bonds, atom maps, ring
//! perception, scaffolds, fingerprints, and feature vectors.
//!
//! All operations here are pure functions of their inputs and safe to call
//! from any number of threads.

mod canon;
mod features;
mod fingerprint;
mod parser;
mod scaffold;
mod writer;

pub use canon::canonical_ranks;
pub use features::{featurize, AtomFeatures, BondFeatures, ATOM_FEATURE_LEN, BOND_FEATURE_LEN};
pub use fingerprint::{circular_fingerprint, Fingerprint};
pub use parser::parse_smiles;
pub use scaffold::murcko_scaffold;
pub use writer::to_canonical_smiles;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MolError {
    #[error("smiles syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("valence error on atom {atom}: {msg}")]
    Valence { atom: usize, msg: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// Bond order as written in SMILES. Aromatic bonds count one valence unit;
/// the delocalized contribution is handled separately for aromatic atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable small integer used in hashing and canonical sorting.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Other,
    Unspecified,
}

/// Tetrahedral parity annotation as written (`@` or `@@`). Preserved through
/// parse/write; ignored by all matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    Anticlockwise,
    Clockwise,
}

/// Directional single-bond annotation (`/` or `\`), stored relative to the
/// bond's (a, b) orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondDir {
    Up,
    Down,
}

impl BondDir {
    pub fn flipped(self) -> Self {
        match self {
            BondDir::Up => BondDir::Down,
            BondDir::Down => BondDir::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    pub charge: i8,
    /// Total attached hydrogens (implicit hydrogens are resolved at parse time).
    pub hydrogens: u8,
    pub aromatic: bool,
    pub atom_map: Option<u32>,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
}

impl Atom {
    pub fn new(element: &str) -> Self {
        Atom {
            element: element.to_string(),
            charge: 0,
            hydrogens: 0,
            aromatic: false,
            atom_map: None,
            isotope: None,
            chirality: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub dir: Option<BondDir>,
}

/// Undirected molecular graph. Possibly multi-component (dot-separated
/// SMILES parse into a single graph).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Allowed valences for the fixed element table. Elements not listed are
/// accepted without a valence check.
pub fn allowed_valences(element: &str) -> Option<&'static [u8]> {
    match element {
        "C" => Some(&[4]),
        "N" => Some(&[3]),
        "O" => Some(&[2]),
        "S" => Some(&[2, 4, 6]),
        "P" => Some(&[3, 5]),
        "F" | "Cl" | "Br" | "I" => Some(&[1]),
        "H" => Some(&[1]),
        "B" => Some(&[3]),
        "Si" => Some(&[4]),
        _ => None,
    }
}

/// Allowed valences shifted for formal charge. Electronegative elements gain
/// capacity with positive charge and lose it with negative charge (N+ is
/// tetravalent, O- is monovalent); boron runs the other way; carbon and
/// silicon lose a unit either way.
pub fn effective_valences(element: &str, charge: i8) -> Option<Vec<i16>> {
    let base = allowed_valences(element)?;
    let shift: i16 = match element {
        "N" | "O" | "S" | "P" | "F" | "Cl" | "Br" | "I" => charge as i16,
        "B" => -(charge as i16),
        "C" | "Si" => -(charge.unsigned_abs() as i16),
        _ => 0,
    };
    Some(base.iter().map(|&v| (v as i16 + shift).max(0)).collect())
}

/// Default hydrogen count for an atom written without brackets: fill up to
/// the smallest allowed valence. Aromatic atoms reserve one unit for the
/// delocalized system.
pub fn default_implicit_h(element: &str, aromatic: bool, bond_units: u8) -> u8 {
    let Some(allowed) = allowed_valences(element) else {
        return 0;
    };
    if aromatic {
        let v0 = allowed[0];
        v0.saturating_sub(bond_units + 1)
    } else {
        allowed
            .iter()
            .copied()
            .find(|&v| v >= bond_units)
            .map(|v| v - bond_units)
            .unwrap_or(0)
    }
}

impl MolecularGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, MolError> {
        self.add_bond_with_dir(a, b, order, None)
    }

    pub fn add_bond_with_dir(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        dir: Option<BondDir>,
    ) -> Result<usize, MolError> {
        if a >= self.atoms.len() || b >= self.atoms.len() {
            return Err(MolError::Invalid(format!("bond endpoint out of range: {a}-{b}")));
        }
        if a == b {
            return Err(MolError::Invalid(format!("self bond on atom {a}")));
        }
        if self.bond_between(a, b).is_some() {
            return Err(MolError::Invalid(format!("duplicate bond {a}-{b}")));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond { a, b, order, dir });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    /// Neighbors of atom `i` as (neighbor index, bond index) pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|(_, idx)| *idx)
    }

    /// Rebuild the adjacency index (needed after deserialization).
    pub fn rebuild_adjacency(&mut self) {
        self.adjacency = vec![Vec::new(); self.atoms.len()];
        for (idx, bond) in self.bonds.iter().enumerate() {
            self.adjacency[bond.a].push((bond.b, idx));
            self.adjacency[bond.b].push((bond.a, idx));
        }
    }

    /// Sum of bond valence units incident on atom `i` (aromatic bonds count 1).
    pub fn bond_units(&self, i: usize) -> u8 {
        self.adjacency[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence_units())
            .sum()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != "H").count()
    }

    /// Indices of bonds that are part of some ring (non-bridge edges).
    pub fn ring_bond_flags(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut flags = vec![true; self.bonds.len()];
        // iterative bridge finding (Tarjan low-link)
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        let mut stack: Vec<(usize, usize, usize)> = Vec::new(); // (node, parent bond, next adj idx)
        for start in 0..n {
            if disc[start] != usize::MAX {
                continue;
            }
            disc[start] = timer;
            low[start] = timer;
            timer += 1;
            stack.push((start, usize::MAX, 0));
            while let Some(&mut (u, pbond, ref mut next)) = stack.last_mut() {
                if *next < self.adjacency[u].len() {
                    let (v, bidx) = self.adjacency[u][*next];
                    *next += 1;
                    if bidx == pbond {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bidx, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&mut (p, _, _)) = stack.last_mut() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            flags[pbond] = false; // bridge
                        }
                    }
                }
            }
        }
        flags
    }

    pub fn atom_in_ring(&self, i: usize) -> bool {
        let flags = self.ring_bond_flags();
        self.adjacency[i].iter().any(|&(_, b)| flags[b])
    }

    /// Number of independent rings (cyclomatic number).
    pub fn ring_count(&self) -> usize {
        let comps = self.connected_components().len();
        self.bonds.len() + comps - self.atoms.len()
    }

    /// Smallest set of smallest rings, one shortest cycle per independent ring.
    pub fn smallest_rings(&self) -> Vec<Vec<usize>> {
        let flags = self.ring_bond_flags();
        let target = self.ring_count();
        let mut rings: Vec<Vec<usize>> = Vec::new();
        let mut seen: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        for (bidx, bond) in self.bonds.iter().enumerate() {
            if !flags[bidx] {
                continue;
            }
            if let Some(path) = self.shortest_path_avoiding(bond.a, bond.b, bidx) {
                let mut ring = path;
                let mut key = ring.clone();
                key.sort_unstable();
                if seen.insert(key) {
                    candidates.push(std::mem::take(&mut ring));
                }
            }
        }
        candidates.sort_by_key(|r| (r.len(), r.clone()));
        for ring in candidates {
            if rings.len() >= target {
                break;
            }
            rings.push(ring);
        }
        rings
    }

    fn shortest_path_avoiding(&self, from: usize, to: usize, skip_bond: usize) -> Option<Vec<usize>> {
        let n = self.atoms.len();
        let mut prev = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        prev[from] = from;
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &(v, bidx) in &self.adjacency[u] {
                if bidx == skip_bond || prev[v] != usize::MAX {
                    continue;
                }
                prev[v] = u;
                queue.push_back(v);
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        Some(path)
    }

    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Induced subgraph on the given atom indices. Returns the subgraph and
    /// the mapping from new index to original index.
    pub fn induced_subgraph(&self, keep: &[usize]) -> (MolecularGraph, Vec<usize>) {
        let mut order: Vec<usize> = keep.to_vec();
        order.sort_unstable();
        order.dedup();
        let mut back = std::collections::HashMap::new();
        let mut sub = MolecularGraph::new();
        for (new_idx, &old) in order.iter().enumerate() {
            back.insert(old, new_idx);
            sub.add_atom(self.atoms[old].clone());
        }
        for bond in &self.bonds {
            if let (Some(&na), Some(&nb)) = (back.get(&bond.a), back.get(&bond.b)) {
                sub.bonds.push(Bond { a: na, b: nb, order: bond.order, dir: bond.dir });
                let idx = sub.bonds.len() - 1;
                sub.adjacency[na].push((nb, idx));
                sub.adjacency[nb].push((na, idx));
            }
        }
        (sub, order)
    }

    /// Remove the listed atoms, returning the remaining graph. Hydrogen
    /// counts on surviving atoms absorb the valence units of removed bonds.
    pub fn remove_atoms(&self, drop: &[usize]) -> MolecularGraph {
        let dropset: std::collections::HashSet<usize> = drop.iter().copied().collect();
        let keep: Vec<usize> = (0..self.atoms.len()).filter(|i| !dropset.contains(i)).collect();
        let (mut sub, order) = self.induced_subgraph(&keep);
        for (new_idx, &old) in order.iter().enumerate() {
            let lost: u8 = self.adjacency[old]
                .iter()
                .filter(|(n, _)| dropset.contains(n))
                .map(|&(_, b)| self.bonds[b].order.valence_units())
                .sum();
            sub.atoms[new_idx].hydrogens = sub.atoms[new_idx].hydrogens.saturating_add(lost);
        }
        sub
    }

    /// Copy without the bond between `a` and `b` (hydrogens not adjusted).
    pub fn without_bond(&self, a: usize, b: usize) -> Option<MolecularGraph> {
        let drop = self.bond_between(a, b)?;
        let mut g = MolecularGraph::new();
        for atom in &self.atoms {
            g.add_atom(atom.clone());
        }
        for (idx, bond) in self.bonds.iter().enumerate() {
            if idx != drop {
                g.add_bond_with_dir(bond.a, bond.b, bond.order, bond.dir).ok()?;
            }
        }
        Some(g)
    }

    /// Disjoint union; returns the merged graph and the index offset of
    /// `other`'s atoms.
    pub fn merged_with(&self, other: &MolecularGraph) -> (MolecularGraph, usize) {
        let mut g = self.clone();
        let offset = g.atoms.len();
        for atom in &other.atoms {
            g.add_atom(atom.clone());
        }
        for bond in &other.bonds {
            g.add_bond_with_dir(bond.a + offset, bond.b + offset, bond.order, bond.dir)
                .expect("disjoint union cannot clash");
        }
        (g, offset)
    }

    /// Copy with one bond's order replaced (hydrogens not adjusted).
    pub fn with_bond_order(&self, a: usize, b: usize, order: BondOrder) -> Option<MolecularGraph> {
        let idx = self.bond_between(a, b)?;
        let mut g = self.clone();
        g.bonds[idx].order = order;
        Some(g)
    }

    /// Derived hybridization from explicit bonds; no perception beyond input
    /// notation.
    pub fn hybridization(&self, i: usize) -> Hybridization {
        if self.atoms[i].aromatic {
            return Hybridization::Sp2;
        }
        let mut doubles = 0;
        let mut triples = 0;
        for &(_, b) in &self.adjacency[i] {
            match self.bonds[b].order {
                BondOrder::Double => doubles += 1,
                BondOrder::Triple => triples += 1,
                _ => {}
            }
        }
        if triples >= 1 || doubles >= 2 {
            Hybridization::Sp
        } else if doubles == 1 {
            Hybridization::Sp2
        } else if matches!(
            self.atoms[i].element.as_str(),
            "C" | "N" | "O" | "P" | "S" | "Si" | "B"
        ) {
            Hybridization::Sp3
        } else {
            Hybridization::Unspecified
        }
    }

    /// A bond is conjugated when aromatic, a multiple bond adjacent to
    /// another multiple/aromatic bond, or a single bond bridging two of them.
    pub fn bond_conjugated(&self, bidx: usize) -> bool {
        let bond = &self.bonds[bidx];
        let multiple = |b: &Bond| {
            matches!(b.order, BondOrder::Double | BondOrder::Triple | BondOrder::Aromatic)
        };
        if bond.order == BondOrder::Aromatic {
            return true;
        }
        let endpoint_has_multiple = |atom: usize| {
            self.adjacency[atom]
                .iter()
                .any(|&(_, ob)| ob != bidx && multiple(&self.bonds[ob]))
        };
        match bond.order {
            BondOrder::Double | BondOrder::Triple => {
                endpoint_has_multiple(bond.a) || endpoint_has_multiple(bond.b)
            }
            BondOrder::Single => endpoint_has_multiple(bond.a) && endpoint_has_multiple(bond.b),
            BondOrder::Aromatic => true,
        }
    }

    /// Recompute the hydrogen count of one atom from the valence table,
    /// used after rewrites edit its bonds or charge.
    pub fn recompute_hydrogens(&mut self, i: usize) {
        let units = self.bond_units(i);
        let atom = &self.atoms[i];
        let h = match effective_valences(&atom.element, atom.charge) {
            Some(allowed) => {
                let reserve = if atom.aromatic { 1 } else { 0 };
                allowed
                    .iter()
                    .copied()
                    .find(|&v| v >= units as i16 + reserve)
                    .map(|v| (v - units as i16 - reserve) as u8)
                    .unwrap_or(0)
            }
            None => 0,
        };
        self.atoms[i].hydrogens = h;
    }

    /// Check every structural invariant: endpoint validity, no duplicate
    /// bonds, unique atom maps, and the valence table.
    pub fn validate(&self) -> Result<(), MolError> {
        let mut seen_pairs = std::collections::HashSet::new();
        for bond in &self.bonds {
            if bond.a >= self.atoms.len() || bond.b >= self.atoms.len() {
                return Err(MolError::Invalid("bond endpoint out of range".into()));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen_pairs.insert(key) {
                return Err(MolError::Invalid(format!("duplicate bond {}-{}", bond.a, bond.b)));
            }
        }
        let mut seen_maps = std::collections::HashSet::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if let Some(m) = atom.atom_map {
                if m == 0 || !seen_maps.insert(m) {
                    return Err(MolError::Invalid(format!(
                        "atom map {m} duplicated or zero on atom {i}"
                    )));
                }
            }
        }
        for i in 0..self.atoms.len() {
            self.check_valence(i)?;
        }
        Ok(())
    }

    pub fn check_valence(&self, i: usize) -> Result<(), MolError> {
        let atom = &self.atoms[i];
        let Some(allowed) = allowed_valences(&atom.element) else {
            return Ok(());
        };
        let used = self.bond_units(i) as i16 + atom.hydrogens as i16;
        let max = *allowed.iter().max().unwrap() as i16 + atom.charge.unsigned_abs() as i16;
        if used > max {
            return Err(MolError::Valence {
                atom: i,
                msg: format!(
                    "{}{} has valence {used}, maximum {max}",
                    atom.element,
                    atom.charge
                ),
            });
        }
        Ok(())
    }

    /// Atom maps present in the graph.
    pub fn atom_maps(&self) -> std::collections::BTreeSet<u32> {
        self.atoms.iter().filter_map(|a| a.atom_map).collect()
    }

    pub fn atom_index_by_map(&self, map: u32) -> Option<usize> {
        self.atoms.iter().position(|a| a.atom_map == Some(map))
    }

    /// Copy of the graph with all atom maps removed.
    pub fn without_maps(&self) -> MolecularGraph {
        let mut g = self.clone();
        for a in &mut g.atoms {
            a.atom_map = None;
        }
        g
    }

    /// Copy of the graph with atoms permuted into canonical rank order.
    /// Feature vectors computed on the result are input-order invariant.
    pub fn canonical_reorder(&self) -> MolecularGraph {
        let ranks = canonical_ranks(self);
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by_key(|&i| ranks[i]);
        let mut new_index = vec![0usize; self.atoms.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut g = MolecularGraph::new();
        for &old in &order {
            g.add_atom(self.atoms[old].clone());
        }
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| {
                let (mut a, mut bb) = (new_index[b.a], new_index[b.b]);
                let mut dir = b.dir;
                if a > bb {
                    std::mem::swap(&mut a, &mut bb);
                    dir = dir.map(BondDir::flipped);
                }
                Bond { a, b: bb, order: b.order, dir }
            })
            .collect();
        bonds.sort_by_key(|b| (b.a, b.b));
        for b in bonds {
            g.bonds.push(b.clone());
            let idx = g.bonds.len() - 1;
            g.adjacency[b.a].push((b.b, idx));
            g.adjacency[b.b].push((b.a, idx));
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_bond_rejects_duplicates_and_bad_indices() {
        let mut g = MolecularGraph::new();
        let a = g.add_atom(Atom::new("C"));
        let b = g.add_atom(Atom::new("O"));
        g.add_bond(a, b, BondOrder::Single).unwrap();
        assert!(g.add_bond(a, b, BondOrder::Double).is_err());
        assert!(g.add_bond(a, 7, BondOrder::Single).is_err());
        assert!(g.add_bond(a, a, BondOrder::Single).is_err());
    }

    #[test]
    fn ring_bonds_detected() {
        // triangle with a tail: 0-1-2-0 plus 2-3
        let mut g = MolecularGraph::new();
        for _ in 0..4 {
            g.add_atom(Atom::new("C"));
        }
        g.add_bond(0, 1, BondOrder::Single).unwrap();
        g.add_bond(1, 2, BondOrder::Single).unwrap();
        g.add_bond(2, 0, BondOrder::Single).unwrap();
        g.add_bond(2, 3, BondOrder::Single).unwrap();
        let flags = g.ring_bond_flags();
        assert_eq!(flags, vec![true, true, true, false]);
        assert_eq!(g.ring_count(), 1);
        assert!(g.atom_in_ring(0));
        assert!(!g.atom_in_ring(3));
    }

    #[test]
    fn smallest_rings_benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let rings = g.smallest_rings();
        assert_eq!(rings.len(), 1);
        assert_eq!(rings[0].len(), 6);
    }

    #[test]
    fn valence_check_table() {
        let mut g = MolecularGraph::new();
        let c = g.add_atom(Atom::new("C"));
        for _ in 0..5 {
            let h = g.add_atom(Atom::new("F"));
            g.add_bond(c, h, BondOrder::Single).unwrap();
        }
        assert!(matches!(g.validate(), Err(MolError::Valence { .. })));
    }
}
