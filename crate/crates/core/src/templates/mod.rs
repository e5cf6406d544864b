//! Reaction templates: center detection from atom-mapped reactions,
//! extraction at a configurable radius, canonical serialization, and
//! application to products via subgraph matching and graph rewriting.

mod apply;
mod extract;
mod matcher;

pub use apply::{apply_template, apply_template_strict, PrecursorSet};
pub use extract::{canonical_template_string, extract_template};

use crate::molgraph::{to_canonical_smiles, MolecularGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("mapping error in reaction {reaction}: {msg}")]
    Mapping { reaction: String, msg: String },
    #[error("empty reaction center in reaction {0}")]
    EmptyCenter(String),
    #[error("rewrite produced no valid outcome")]
    Rewrite,
    #[error("invalid template: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mol(#[from] crate::molgraph::MolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Enhanced,
}

/// An atom-mapped reaction: precursor molecules and one product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reaction {
    pub id: String,
    pub reaction_class: Option<u32>,
    pub precursors: Vec<MolecularGraph>,
    pub product: MolecularGraph,
    pub provenance: Provenance,
}

impl Reaction {
    /// Every product atom map must have exactly one precursor counterpart.
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.product.atom_count() == 0 {
            return Err(TemplateError::Mapping {
                reaction: self.id.clone(),
                msg: "empty product".into(),
            });
        }
        if self.precursors.is_empty() {
            return Err(TemplateError::Mapping {
                reaction: self.id.clone(),
                msg: "no precursors".into(),
            });
        }
        let mut precursor_maps: BTreeMap<u32, usize> = BTreeMap::new();
        for p in &self.precursors {
            for m in p.atom_maps() {
                *precursor_maps.entry(m).or_insert(0) += 1;
            }
        }
        for m in self.product.atom_maps() {
            match precursor_maps.get(&m) {
                Some(1) => {}
                Some(k) => {
                    return Err(TemplateError::Mapping {
                        reaction: self.id.clone(),
                        msg: format!("product map {m} matched by {k} precursor atoms"),
                    })
                }
                None => {
                    return Err(TemplateError::Mapping {
                        reaction: self.id.clone(),
                        msg: format!("product map {m} has no precursor counterpart"),
                    })
                }
            }
        }
        Ok(())
    }

    /// Canonical precursor set (maps stripped), the exact-match target.
    pub fn canonical_precursor_set(&self) -> BTreeSet<String> {
        self.precursors
            .iter()
            .flat_map(|p| {
                let s = to_canonical_smiles(p, false);
                s.split('.').map(str::to_string).collect::<Vec<_>>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondChange {
    Formed,
    Broken,
    OrderChanged,
}

/// Atoms and bonds that differ between the mapped precursor and product
/// graphs. Map pairs are stored unordered (small, large).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReactionCenter {
    pub changed_bonds: BTreeSet<(u32, u32, BondChange)>,
    pub changed_atoms: BTreeSet<u32>,
}

impl ReactionCenter {
    pub fn is_empty(&self) -> bool {
        self.changed_bonds.is_empty() && self.changed_atoms.is_empty()
    }

    /// Union of maps touched by any bond or atom change.
    pub fn center_maps(&self) -> BTreeSet<u32> {
        let mut maps: BTreeSet<u32> = self.changed_atoms.clone();
        for &(a, b, _) in &self.changed_bonds {
            maps.insert(a);
            maps.insert(b);
        }
        maps
    }
}

pub(crate) fn mapped_bond_set(
    graphs: &[&MolecularGraph],
) -> BTreeMap<(u32, u32), crate::molgraph::BondOrder> {
    let mut out = BTreeMap::new();
    for g in graphs {
        for bond in g.bonds() {
            if let (Some(ma), Some(mb)) =
                (g.atom(bond.a).atom_map, g.atom(bond.b).atom_map)
            {
                out.insert((ma.min(mb), ma.max(mb)), bond.order);
            }
        }
    }
    out
}

/// Symmetric difference of the mapped bond sets, plus atoms whose hydrogen
/// count or formal charge changed between sides.
pub fn detect_reaction_center(reaction: &Reaction) -> Result<ReactionCenter, TemplateError> {
    reaction.validate()?;
    let product_bonds = mapped_bond_set(&[&reaction.product]);
    let precursor_refs: Vec<&MolecularGraph> = reaction.precursors.iter().collect();
    let precursor_bonds = mapped_bond_set(&precursor_refs);

    let mut center = ReactionCenter::default();
    for (&pair, &order) in &product_bonds {
        match precursor_bonds.get(&pair) {
            None => {
                center.changed_bonds.insert((pair.0, pair.1, BondChange::Formed));
            }
            Some(&pre) if pre != order => {
                center.changed_bonds.insert((pair.0, pair.1, BondChange::OrderChanged));
            }
            _ => {}
        }
    }
    for (&pair, _) in &precursor_bonds {
        if !product_bonds.contains_key(&pair) {
            center.changed_bonds.insert((pair.0, pair.1, BondChange::Broken));
        }
    }

    // H-count / charge changes on atoms present on both sides
    let mut precursor_atoms: BTreeMap<u32, (u8, i8)> = BTreeMap::new();
    for p in &reaction.precursors {
        for atom in p.atoms() {
            if let Some(m) = atom.atom_map {
                precursor_atoms.insert(m, (atom.hydrogens, atom.charge));
            }
        }
    }
    for atom in reaction.product.atoms() {
        if let Some(m) = atom.atom_map {
            if let Some(&(h, c)) = precursor_atoms.get(&m) {
                if h != atom.hydrogens || c != atom.charge {
                    center.changed_atoms.insert(m);
                }
            }
        }
    }
    Ok(center)
}

/// A retro-strategy: product-side pattern plus precursor-side patterns at a
/// stated radius. Anchor atoms carry maps renumbered 1..n in canonical order;
/// leaving-group atoms are unmapped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    pub template_id: String,
    pub radius: usize,
    pub product_pattern: MolecularGraph,
    pub precursor_patterns: Vec<MolecularGraph>,
    pub canonical_string: String,
    pub frequency: usize,
    /// Renumbered anchor maps on a changed bond or with an H/charge change;
    /// these anchors get the strict matching constraints.
    pub changed_maps: BTreeSet<u32>,
}

impl Template {
    /// Rebuild a template from its canonical `precursors>>product` string.
    /// Per-precursor grouping is not preserved; each connected component of
    /// the precursor side becomes one pattern.
    pub fn parse(canonical_string: &str, radius: usize) -> Result<Template, TemplateError> {
        let (prec, prod) = canonical_string
            .split_once(">>")
            .ok_or_else(|| TemplateError::Invalid("missing '>>'".into()))?;
        let product_pattern = crate::molgraph::parse_smiles(prod)?;
        let prec_graph = crate::molgraph::parse_smiles(prec)?;
        let precursor_patterns: Vec<MolecularGraph> = prec_graph
            .connected_components()
            .into_iter()
            .map(|comp| prec_graph.induced_subgraph(&comp).0)
            .collect();
        let changed_maps =
            extract::recompute_changed_maps(&product_pattern, &precursor_patterns);
        Ok(Template {
            template_id: extract::template_id_for(canonical_string, radius),
            radius,
            product_pattern,
            precursor_patterns,
            canonical_string: canonical_string.to_string(),
            frequency: 0,
            changed_maps,
        })
    }
}

/// One corpus-level template table: per-reaction assignment plus the table
/// sorted by descending frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusTemplates {
    pub radius: usize,
    /// reaction id -> template id
    pub assignment: BTreeMap<String, String>,
    /// sorted by (frequency desc, canonical string asc)
    pub table: Vec<Template>,
    /// reactions skipped with the reason (identity reactions, mapping errors)
    pub skipped: Vec<(String, String)>,
}

impl CorpusTemplates {
    pub fn by_id(&self, template_id: &str) -> Option<&Template> {
        self.table.iter().find(|t| t.template_id == template_id)
    }

    /// template id -> set of reaction ids assigned to it
    pub fn classes(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (rid, tid) in &self.assignment {
            out.entry(tid.clone()).or_default().push(rid.clone());
        }
        out
    }
}

/// Extract one template per reaction at the given radius and aggregate the
/// frequency table. Reactions without a center are collected, not fatal.
pub fn assign_corpus_templates(corpus: &[Reaction], radius: usize) -> CorpusTemplates {
    let extracted: Vec<(String, Result<Template, TemplateError>)> = corpus
        .par_iter()
        .map(|r| (r.id.clone(), extract_template(r, radius)))
        .collect();

    let mut by_string: BTreeMap<String, (Template, usize)> = BTreeMap::new();
    let mut assignment_strings: BTreeMap<String, String> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (rid, result) in extracted {
        match result {
            Ok(tpl) => {
                assignment_strings.insert(rid, tpl.canonical_string.clone());
                let entry = by_string
                    .entry(tpl.canonical_string.clone())
                    .or_insert_with(|| (tpl, 0));
                entry.1 += 1;
            }
            Err(e) => skipped.push((rid, e.to_string())),
        }
    }

    let mut table: Vec<Template> = by_string
        .into_values()
        .map(|(mut tpl, freq)| {
            tpl.frequency = freq;
            tpl
        })
        .collect();
    table.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.canonical_string.cmp(&b.canonical_string))
    });

    let id_of: BTreeMap<String, String> = table
        .iter()
        .map(|t| (t.canonical_string.clone(), t.template_id.clone()))
        .collect();
    let assignment = assignment_strings
        .into_iter()
        .map(|(rid, s)| (rid, id_of[&s].clone()))
        .collect();

    CorpusTemplates { radius, assignment, table, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_reaction_smiles;

    const AMIDE: &str =
        "[CH3:1][C:2](=[O:3])[OH:4].[NH2:5][CH3:6]>>[CH3:1][C:2](=[O:3])[NH:5][CH3:6]";

    #[test]
    fn amide_center() {
        let r = parse_reaction_smiles("rx1", None, AMIDE).unwrap();
        let center = detect_reaction_center(&r).unwrap();
        assert!(center.changed_bonds.contains(&(2, 5, BondChange::Formed)));
        assert!(center.changed_bonds.contains(&(2, 4, BondChange::Broken)));
        let maps = center.center_maps();
        assert!(maps.contains(&2) && maps.contains(&4) && maps.contains(&5));
    }

    #[test]
    fn identity_reaction_has_empty_center() {
        let r = parse_reaction_smiles("rx2", None, "[CH3:1][OH:2]>>[CH3:1][OH:2]").unwrap();
        let center = detect_reaction_center(&r).unwrap();
        assert!(center.is_empty());
    }

    #[test]
    fn missing_counterpart_is_mapping_error() {
        // built by hand: the corpus reader would reject this at parse time
        let precursor = crate::molgraph::parse_smiles("[CH3:1][OH:2]").unwrap();
        let product = crate::molgraph::parse_smiles("[CH3:1][OH:7]").unwrap();
        let r = Reaction {
            id: "rx3".into(),
            reaction_class: None,
            precursors: vec![precursor],
            product,
            provenance: Provenance::Observed,
        };
        assert!(matches!(
            detect_reaction_center(&r),
            Err(TemplateError::Mapping { .. })
        ));
    }

    #[test]
    fn corpus_assignment_groups_identical_centers() {
        let rs: Vec<Reaction> = ["a", "b", "c"]
            .iter()
            .map(|id| parse_reaction_smiles(id, None, AMIDE).unwrap())
            .collect();
        let corpus = assign_corpus_templates(&rs, 0);
        assert_eq!(corpus.table.len(), 1);
        assert_eq!(corpus.table[0].frequency, 3);
        assert_eq!(corpus.assignment.len(), 3);
        assert!(corpus.skipped.is_empty());
    }

    #[test]
    fn empty_corpus_gives_empty_table() {
        let corpus = assign_corpus_templates(&[], 1);
        assert!(corpus.table.is_empty());
        assert!(corpus.assignment.is_empty());
    }
}
