//! One-hot feature vectors for atoms and bonds. Block sizes are fixed:
//! atoms 65+10+5+7+5+1+5 = 98, bonds 4+1+1 = 6. Out-of-vocabulary values
//! land in the reserved last slot of their block.

use super::{BondOrder, Hybridization, MolecularGraph};

/// Fixed element order for the atom-category block (64 symbols + "other").
const ELEMENT_VOCAB: [&str; 64] = [
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al", "I", "B",
    "V", "K", "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H", "Li", "Ge", "Cu",
    "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb", "W", "Ru", "Nb", "Re", "Te", "Rh",
    "Ta", "Tc", "Ba", "Bi", "Hf", "Mo", "U", "Sm", "Os", "Ir", "Ce", "Gd", "Ga", "Cs", "Sr",
];

const ATOM_CATEGORY: usize = 65;
const ATOM_DEGREE: usize = 10;
const ATOM_CHARGE: usize = 5;
const ATOM_VALENCY: usize = 7;
const ATOM_HYDROGENS: usize = 5;
const ATOM_AROMATIC: usize = 1;
const ATOM_HYBRIDIZATION: usize = 5;

pub const ATOM_FEATURE_LEN: usize = ATOM_CATEGORY
    + ATOM_DEGREE
    + ATOM_CHARGE
    + ATOM_VALENCY
    + ATOM_HYDROGENS
    + ATOM_AROMATIC
    + ATOM_HYBRIDIZATION;
pub const BOND_FEATURE_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomFeatures(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct BondFeatures(pub Vec<f64>);

fn one_hot(vec: &mut Vec<f64>, width: usize, slot: Option<usize>) {
    let start = vec.len();
    vec.resize(start + width, 0.0);
    // out-of-vocabulary goes to the reserved last slot
    let idx = slot.filter(|&s| s < width - 1).unwrap_or(width - 1);
    vec[start + idx] = 1.0;
}

/// Per-atom and per-bond feature rows, aligned with `graph.atoms()` and
/// `graph.bonds()` order. Call on a canonically reordered graph when
/// atom-order invariance is required.
pub fn featurize(graph: &MolecularGraph) -> (Vec<AtomFeatures>, Vec<BondFeatures>) {
    let ring_flags = graph.ring_bond_flags();
    let atoms = (0..graph.atom_count())
        .map(|i| {
            let atom = graph.atom(i);
            let mut v: Vec<f64> = Vec::with_capacity(ATOM_FEATURE_LEN);
            one_hot(
                &mut v,
                ATOM_CATEGORY,
                ELEMENT_VOCAB.iter().position(|&e| e == atom.element),
            );
            let degree = graph.degree(i);
            one_hot(&mut v, ATOM_DEGREE, Some(degree));
            // charge vocabulary: -1, 0, +1, +2
            let charge_slot = match atom.charge {
                -1 => Some(0),
                0 => Some(1),
                1 => Some(2),
                2 => Some(3),
                _ => None,
            };
            one_hot(&mut v, ATOM_CHARGE, charge_slot);
            let valency = graph.bond_units(i) as usize + atom.hydrogens as usize;
            one_hot(&mut v, ATOM_VALENCY, Some(valency));
            one_hot(&mut v, ATOM_HYDROGENS, Some(atom.hydrogens as usize));
            v.push(if atom.aromatic { 1.0 } else { 0.0 });
            let hyb_slot = match graph.hybridization(i) {
                Hybridization::Sp => 0,
                Hybridization::Sp2 => 1,
                Hybridization::Sp3 => 2,
                Hybridization::Other => 3,
                Hybridization::Unspecified => 4,
            };
            one_hot(&mut v, ATOM_HYBRIDIZATION, Some(hyb_slot));
            debug_assert_eq!(v.len(), ATOM_FEATURE_LEN);
            AtomFeatures(v)
        })
        .collect();
    let bonds = graph
        .bonds()
        .iter()
        .enumerate()
        .map(|(bidx, bond)| {
            let mut v: Vec<f64> = Vec::with_capacity(BOND_FEATURE_LEN);
            let type_slot = match bond.order {
                BondOrder::Single => 0,
                BondOrder::Double => 1,
                BondOrder::Triple => 2,
                BondOrder::Aromatic => 3,
            };
            for s in 0..4 {
                v.push(if s == type_slot { 1.0 } else { 0.0 });
            }
            v.push(if graph.bond_conjugated(bidx) { 1.0 } else { 0.0 });
            v.push(if ring_flags[bidx] { 1.0 } else { 0.0 });
            debug_assert_eq!(v.len(), BOND_FEATURE_LEN);
            BondFeatures(v)
        })
        .collect();
    (atoms, bonds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    #[test]
    fn atom_vector_length_is_98() {
        assert_eq!(ATOM_FEATURE_LEN, 98);
        let g = parse_smiles("CCO").unwrap();
        let (atoms, bonds) = featurize(&g);
        assert!(atoms.iter().all(|a| a.0.len() == 98));
        assert!(bonds.iter().all(|b| b.0.len() == 6));
    }

    #[test]
    fn blocks_have_at_most_one_bit() {
        let g = parse_smiles("[NH4+].c1ccccc1C(=O)[O-]").unwrap();
        let (atoms, _) = featurize(&g);
        let blocks = [65usize, 10, 5, 7, 5, 1, 5];
        for a in &atoms {
            let mut off = 0;
            for width in blocks {
                let ones: f64 = a.0[off..off + width].iter().sum();
                assert!(ones <= 1.0 + 1e-12);
                off += width;
            }
        }
    }

    #[test]
    fn aromatic_carbon_sets_aromatic_flag() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let (atoms, bonds) = featurize(&g);
        let arom_idx = 65 + 10 + 5 + 7 + 5;
        assert!(atoms.iter().all(|a| a.0[arom_idx] == 1.0));
        // all benzene bonds aromatic, conjugated, in ring
        assert!(bonds.iter().all(|b| b.0[3] == 1.0 && b.0[4] == 1.0 && b.0[5] == 1.0));
    }

    #[test]
    fn oov_element_uses_last_slot() {
        let g = parse_smiles("[Xe]").unwrap();
        let (atoms, _) = featurize(&g);
        assert_eq!(atoms[0].0[64], 1.0);
    }

    #[test]
    fn determinism_after_canonical_reorder() {
        let a = parse_smiles("OCC(N)c1ccccc1").unwrap().canonical_reorder();
        let b = parse_smiles("c1ccccc1C(N)CO").unwrap().canonical_reorder();
        assert_eq!(featurize(&a), featurize(&b));
    }
}
