//! Template application: enumerate embeddings of the product pattern, rewrite
//! each by deleting/forming bonds and attaching leaving groups, recompute
//! hydrogens on edited atoms, validate, and canonicalize the outcomes.

use super::matcher::{find_embeddings, MatchOptions};
use super::{mapped_bond_set, Template, TemplateError};
use crate::molgraph::{to_canonical_smiles, BondOrder, MolecularGraph};
use std::collections::{BTreeMap, BTreeSet};

/// A precursor set: canonical SMILES of each predicted precursor molecule.
pub type PrecursorSet = BTreeSet<String>;

/// Apply a template to a product, returning every distinct valid precursor
/// set (empty when no embedding exists or every rewrite fails).
pub fn apply_template(
    template: &Template,
    product: &MolecularGraph,
    max_matches: usize,
) -> BTreeSet<PrecursorSet> {
    apply_inner(template, product, max_matches).0
}

/// Strict variant: raises `RewriteError` when embeddings exist but every
/// rewrite outcome failed validation.
pub fn apply_template_strict(
    template: &Template,
    product: &MolecularGraph,
    max_matches: usize,
) -> Result<BTreeSet<PrecursorSet>, TemplateError> {
    let (outcomes, had_embeddings) = apply_inner(template, product, max_matches);
    if had_embeddings && outcomes.is_empty() {
        return Err(TemplateError::Rewrite);
    }
    Ok(outcomes)
}

fn apply_inner(
    template: &Template,
    product: &MolecularGraph,
    max_matches: usize,
) -> (BTreeSet<PrecursorSet>, bool) {
    // canonical order makes the max_matches truncation input-order invariant
    let target = product.canonical_reorder();
    let pattern = &template.product_pattern;
    let strict: Vec<bool> = (0..pattern.atom_count())
        .map(|i| {
            pattern
                .atom(i)
                .atom_map
                .map(|m| template.changed_maps.contains(&m))
                .unwrap_or(false)
        })
        .collect();
    let opts = MatchOptions {
        pattern,
        target: &target,
        strict,
        enforce_degree: template.radius >= 1,
        max_matches,
    };
    let embeddings = find_embeddings(&opts);
    let had_embeddings = !embeddings.is_empty();

    let mut outcomes: BTreeSet<PrecursorSet> = BTreeSet::new();
    for embedding in embeddings {
        if let Some(set) = rewrite(template, &target, &embedding) {
            outcomes.insert(set);
        }
    }
    (outcomes, had_embeddings)
}

/// Rewrite one embedding. Returns None when the outcome fails to validate.
fn rewrite(
    template: &Template,
    target: &MolecularGraph,
    embedding: &[usize],
) -> Option<PrecursorSet> {
    let pattern = &template.product_pattern;
    // anchor map -> target atom
    let mut map_to_target: BTreeMap<u32, usize> = BTreeMap::new();
    // anchor map -> product-side pattern charge
    let mut product_charge: BTreeMap<u32, i8> = BTreeMap::new();
    for (p_idx, &t_idx) in embedding.iter().enumerate() {
        if let Some(m) = pattern.atom(p_idx).atom_map {
            map_to_target.insert(m, t_idx);
            product_charge.insert(m, pattern.atom(p_idx).charge);
        }
    }

    let product_pairs = mapped_bond_set(&[pattern]);
    let refs: Vec<&MolecularGraph> = template.precursor_patterns.iter().collect();
    let precursor_pairs = mapped_bond_set(&refs);

    let mut deletions: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut order_changes: BTreeMap<(usize, usize), BondOrder> = BTreeMap::new();
    let mut additions: Vec<(usize, usize, BondOrder)> = Vec::new();
    let mut touched: BTreeSet<usize> = BTreeSet::new();
    let tkey = |a: usize, b: usize| (a.min(b), a.max(b));

    for (&(ma, mb), &order) in &product_pairs {
        let (ta, tb) = (map_to_target[&ma], map_to_target[&mb]);
        match precursor_pairs.get(&(ma, mb)) {
            None => {
                deletions.insert(tkey(ta, tb));
                touched.insert(ta);
                touched.insert(tb);
            }
            Some(&pre) if pre != order => {
                order_changes.insert(tkey(ta, tb), pre);
                touched.insert(ta);
                touched.insert(tb);
            }
            _ => {}
        }
    }
    for (&(ma, mb), &order) in &precursor_pairs {
        if !product_pairs.contains_key(&(ma, mb)) {
            let (ta, tb) = (map_to_target[&ma], map_to_target[&mb]);
            additions.push((ta, tb, order));
            touched.insert(ta);
            touched.insert(tb);
        }
    }

    // charge edits and H-change anchors from the precursor side
    let mut charge_edits: BTreeMap<usize, i8> = BTreeMap::new();
    for pat in &template.precursor_patterns {
        for atom in pat.atoms() {
            if let Some(m) = atom.atom_map {
                let t = map_to_target[&m];
                if product_charge.get(&m) != Some(&atom.charge) {
                    charge_edits.insert(t, atom.charge);
                    touched.insert(t);
                }
                if template.changed_maps.contains(&m) {
                    touched.insert(t);
                }
            }
        }
    }

    // build the rewritten graph
    let mut g = MolecularGraph::new();
    for i in 0..target.atom_count() {
        let mut atom = target.atom(i).clone();
        if let Some(&c) = charge_edits.get(&i) {
            atom.charge = c;
        }
        g.add_atom(atom);
    }
    for bond in target.bonds() {
        let key = tkey(bond.a, bond.b);
        if deletions.contains(&key) {
            continue;
        }
        let order = order_changes.get(&key).copied().unwrap_or(bond.order);
        g.add_bond_with_dir(bond.a, bond.b, order, bond.dir).ok()?;
    }
    for (ta, tb, order) in additions {
        if let Some(existing) = g.bond_between(ta, tb) {
            // monomorphism may have matched over an existing extra bond
            if g.bonds()[existing].order != order {
                return None;
            }
        } else {
            g.add_bond(ta, tb, order).ok()?;
        }
    }
    // leaving groups arrive with their recorded hydrogens
    for pat in &template.precursor_patterns {
        let mut new_index: BTreeMap<usize, usize> = BTreeMap::new();
        for i in 0..pat.atom_count() {
            if pat.atom(i).atom_map.is_none() {
                new_index.insert(i, g.add_atom(pat.atom(i).clone()));
            }
        }
        for bond in pat.bonds() {
            let resolve = |i: usize| -> Option<usize> {
                match pat.atom(i).atom_map {
                    None => new_index.get(&i).copied(),
                    Some(m) => map_to_target.get(&m).copied(),
                }
            };
            let (Some(a), Some(b)) = (resolve(bond.a), resolve(bond.b)) else {
                return None;
            };
            if pat.atom(bond.a).atom_map.is_some() && pat.atom(bond.b).atom_map.is_some() {
                continue; // anchor-anchor bonds were handled as additions
            }
            g.add_bond(a, b, bond.order).ok()?;
        }
    }
    for &t in &touched {
        g.recompute_hydrogens(t);
    }

    g.validate().ok()?;
    let comps = g.connected_components();
    let mut set: PrecursorSet = BTreeSet::new();
    for comp in comps {
        let (molecule, _) = g.induced_subgraph(&comp);
        molecule.validate().ok()?;
        set.insert(to_canonical_smiles(&molecule, false));
    }
    Some(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_reaction_smiles;
    use crate::molgraph::parse_smiles;
    use crate::templates::extract_template;

    const AMIDE: &str =
        "[CH3:1][C:2](=[O:3])[OH:4].[NH2:5][CH3:6]>>[CH3:1][C:2](=[O:3])[NH:5][CH3:6]";

    #[test]
    fn amide_cleavage_regenerates_precursors() {
        let r = parse_reaction_smiles("rx", None, AMIDE).unwrap();
        let tpl = extract_template(&r, 1).unwrap();
        let product = parse_smiles("CC(=O)NC").unwrap();
        let outcomes = apply_template(&tpl, &product, 100);
        let canon = |s: &str| to_canonical_smiles(&parse_smiles(s).unwrap(), false);
        let expected: PrecursorSet = BTreeSet::from([canon("CC(=O)O"), canon("CN")]);
        assert!(
            outcomes.contains(&expected),
            "expected {expected:?} among {outcomes:?}"
        );
    }

    #[test]
    fn no_embedding_gives_empty_set() {
        let r = parse_reaction_smiles("rx", None, AMIDE).unwrap();
        let tpl = extract_template(&r, 1).unwrap();
        let product = parse_smiles("CCO").unwrap();
        assert!(apply_template(&tpl, &product, 100).is_empty());
    }

    #[test]
    fn ground_truth_round_trip() {
        let r = parse_reaction_smiles("rx", None, AMIDE).unwrap();
        let tpl = extract_template(&r, 1).unwrap();
        let outcomes = apply_template(&tpl, &r.product, 100);
        let gt = r.canonical_precursor_set();
        assert!(outcomes.contains(&gt), "gt {gt:?} not among {outcomes:?}");
    }

    #[test]
    fn strict_mode_flags_total_rewrite_failure() {
        // template applied to a product where the embedding exists but the
        // rewrite is fine: strict must not error
        let r = parse_reaction_smiles("rx", None, AMIDE).unwrap();
        let tpl = extract_template(&r, 1).unwrap();
        assert!(apply_template_strict(&tpl, &r.product, 100).is_ok());
    }
}
