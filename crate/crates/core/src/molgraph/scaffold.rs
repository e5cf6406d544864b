//! Murcko scaffolds: ring systems plus connecting linkers, obtained by
//! iteratively deleting degree-<=1 atoms. Acyclic inputs reduce to the empty
//! graph, which serializes as the empty string.

use super::MolecularGraph;

pub fn murcko_scaffold(graph: &MolecularGraph) -> MolecularGraph {
    let mut current = graph.clone();
    loop {
        let leaves: Vec<usize> =
            (0..current.atom_count()).filter(|&i| current.degree(i) <= 1).collect();
        if leaves.is_empty() {
            return current;
        }
        current = current.remove_atoms(&leaves);
        if current.is_empty() {
            return current;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, to_canonical_smiles};

    fn scaffold_smiles(s: &str) -> String {
        to_canonical_smiles(&murcko_scaffold(&parse_smiles(s).unwrap()), false)
    }

    #[test]
    fn toluene_reduces_to_benzene() {
        assert_eq!(scaffold_smiles("Cc1ccccc1"), scaffold_smiles("c1ccccc1"));
    }

    #[test]
    fn acyclic_gives_empty() {
        assert_eq!(scaffold_smiles("CCO"), "");
        assert_eq!(scaffold_smiles("CC(C)CC(N)C(=O)O"), "");
    }

    #[test]
    fn linker_between_rings_retained() {
        let s = "c1ccc(Cc2ccccc2)cc1";
        assert_eq!(scaffold_smiles(s), to_canonical_smiles(&parse_smiles(s).unwrap(), false));
    }

    #[test]
    fn idempotent() {
        for s in ["Cc1ccccc1CCN", "O=C(O)c1ccc2ccccc2c1", "C1CCC(CC1)N"] {
            let one = murcko_scaffold(&parse_smiles(s).unwrap());
            let two = murcko_scaffold(&one);
            assert_eq!(
                to_canonical_smiles(&one, false),
                to_canonical_smiles(&two, false),
                "{s}"
            );
        }
    }
}
