//! Template extraction: induce the product pattern within `radius` bonds of
//! the reaction center, carry over the corresponding precursor anchors plus
//! adjacent leaving groups, and renumber maps 1..n in canonical order.

use super::{detect_reaction_center, Reaction, Template, TemplateError};
use crate::molgraph::{canonical_ranks, to_canonical_smiles, MolecularGraph};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

fn hash64(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    h
}

pub(super) fn template_id_for(canonical_string: &str, radius: usize) -> String {
    format!("r{radius}_{:016x}", hash64(canonical_string))
}

/// Deterministic, injective-on-isomorphism-classes serialized form.
pub fn canonical_template_string(template: &Template) -> String {
    template.canonical_string.clone()
}

pub fn extract_template(reaction: &Reaction, radius: usize) -> Result<Template, TemplateError> {
    let center = detect_reaction_center(reaction)?;
    if center.is_empty() {
        return Err(TemplateError::EmptyCenter(reaction.id.clone()));
    }
    let center_maps = center.center_maps();
    let product = &reaction.product;
    let product_maps: BTreeSet<u32> = product.atom_maps();

    // multi-source BFS out to `radius` bonds from center atoms in the product
    let seeds: Vec<usize> = (0..product.atom_count())
        .filter(|&i| {
            product
                .atom(i)
                .atom_map
                .map(|m| center_maps.contains(&m))
                .unwrap_or(false)
        })
        .collect();
    if seeds.is_empty() {
        return Err(TemplateError::EmptyCenter(reaction.id.clone()));
    }
    let mut dist = vec![usize::MAX; product.atom_count()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in &seeds {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for &(v, _) in product.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let keep: Vec<usize> = (0..product.atom_count()).filter(|&i| dist[i] <= radius).collect();
    let (mut product_pattern, _) = product.induced_subgraph(&keep);
    let included_maps: BTreeSet<u32> = product_pattern.atom_maps();

    // precursor side: anchors with included maps plus adjacent leaving groups
    let mut precursor_patterns: Vec<MolecularGraph> = Vec::new();
    for precursor in &reaction.precursors {
        let n = precursor.atom_count();
        let is_core: Vec<bool> = (0..n)
            .map(|i| {
                precursor
                    .atom(i)
                    .atom_map
                    .map(|m| included_maps.contains(&m))
                    .unwrap_or(false)
            })
            .collect();
        // leaving atoms: unmapped, or mapped with no product counterpart
        let is_leaving: Vec<bool> = (0..n)
            .map(|i| match precursor.atom(i).atom_map {
                None => true,
                Some(m) => !product_maps.contains(&m),
            })
            .collect();
        let mut include: Vec<bool> = is_core.clone();
        // connected components of the leaving-only subgraph, kept when they
        // touch a core atom
        let mut comp_seen = vec![false; n];
        for start in 0..n {
            if !is_leaving[start] || comp_seen[start] {
                continue;
            }
            let mut members = vec![start];
            comp_seen[start] = true;
            let mut q = VecDeque::from([start]);
            while let Some(u) = q.pop_front() {
                for &(v, _) in precursor.neighbors(u) {
                    if is_leaving[v] && !comp_seen[v] {
                        comp_seen[v] = true;
                        members.push(v);
                        q.push_back(v);
                    }
                }
            }
            let touches_core = members
                .iter()
                .any(|&u| precursor.neighbors(u).iter().any(|&(v, _)| is_core[v]));
            if touches_core {
                for &m in &members {
                    include[m] = true;
                }
            }
        }
        let atoms: Vec<usize> = (0..n).filter(|&i| include[i]).collect();
        if atoms.is_empty() {
            continue;
        }
        let (mut pattern, order) = precursor.induced_subgraph(&atoms);
        // leaving atoms lose their precursor-only maps
        for (new_idx, &old) in order.iter().enumerate() {
            if is_leaving[old] {
                pattern.atom_mut(new_idx).atom_map = None;
            }
        }
        precursor_patterns.push(pattern);
    }
    if precursor_patterns.is_empty() {
        return Err(TemplateError::Mapping {
            reaction: reaction.id.clone(),
            msg: "no precursor atoms correspond to the product pattern".into(),
        });
    }

    // renumber anchor maps 1..n following the product pattern's canonical order
    let ranks = canonical_ranks(&product_pattern);
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    for i in 0..product_pattern.atom_count() {
        if let Some(m) = product_pattern.atom(i).atom_map {
            remap.insert(m, ranks[i] as u32 + 1);
        }
    }
    for i in 0..product_pattern.atom_count() {
        if let Some(m) = product_pattern.atom(i).atom_map {
            product_pattern.atom_mut(i).atom_map = Some(remap[&m]);
        }
    }
    for pattern in &mut precursor_patterns {
        for i in 0..pattern.atom_count() {
            if let Some(m) = pattern.atom(i).atom_map {
                pattern.atom_mut(i).atom_map = Some(remap[&m]);
            }
        }
    }

    // a symmetric product pattern admits several equivalent map labelings;
    // pick the automorphism image with the smallest serialized template
    let mut best: Option<(String, MolecularGraph, Vec<MolecularGraph>)> = None;
    for sigma in pattern_automorphisms(&product_pattern) {
        let mut relabel: BTreeMap<u32, u32> = BTreeMap::new();
        for (i, &j) in sigma.iter().enumerate() {
            if let (Some(from), Some(to)) =
                (product_pattern.atom(i).atom_map, product_pattern.atom(j).atom_map)
            {
                relabel.insert(from, to);
            }
        }
        let apply_relabel = |g: &MolecularGraph| {
            let mut out = g.clone();
            for i in 0..out.atom_count() {
                if let Some(m) = out.atom(i).atom_map {
                    out.atom_mut(i).atom_map = Some(relabel[&m]);
                }
            }
            out
        };
        let prod = apply_relabel(&product_pattern);
        let mut precs: Vec<MolecularGraph> = precursor_patterns.iter().map(apply_relabel).collect();
        precs.sort_by_key(|p| (to_canonical_smiles(p, false), to_canonical_smiles(p, true)));
        let precursor_side =
            precs.iter().map(|p| to_canonical_smiles(p, true)).collect::<Vec<_>>().join(".");
        let candidate = format!("{precursor_side}>>{}", to_canonical_smiles(&prod, true));
        if best.as_ref().map(|(s, _, _)| candidate < *s).unwrap_or(true) {
            best = Some((candidate, prod, precs));
        }
    }
    let (canonical_string, product_pattern, precursor_patterns) =
        best.expect("identity automorphism always present");
    let changed_maps = recompute_changed_maps(&product_pattern, &precursor_patterns);

    Ok(Template {
        template_id: template_id_for(&canonical_string, radius),
        radius,
        product_pattern,
        precursor_patterns,
        canonical_string,
        frequency: 0,
        changed_maps,
    })
}

/// All automorphisms of a pattern graph (atom equality on element, charge,
/// aromatic flag, hydrogens, and isotope; bond equality on order). Patterns
/// are small, so plain backtracking suffices.
fn pattern_automorphisms(g: &MolecularGraph) -> Vec<Vec<usize>> {
    let n = g.atom_count();
    let atom_eq = |a: usize, b: usize| {
        let (x, y) = (g.atom(a), g.atom(b));
        x.element == y.element
            && x.charge == y.charge
            && x.aromatic == y.aromatic
            && x.hydrogens == y.hydrogens
            && x.isotope == y.isotope
            && x.atom_map.is_some() == y.atom_map.is_some()
            && g.degree(a) == g.degree(b)
    };
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut assignment = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn recurse(
        g: &MolecularGraph,
        atom_eq: &impl Fn(usize, usize) -> bool,
        pos: usize,
        assignment: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let n = g.atom_count();
        if out.len() >= 5000 {
            return;
        }
        if pos == n {
            out.push(assignment.clone());
            return;
        }
        'cand: for t in 0..n {
            if used[t] || !atom_eq(pos, t) {
                continue;
            }
            for &(nb, bidx) in g.neighbors(pos) {
                if nb < pos {
                    match g.bond_between(t, assignment[nb]) {
                        Some(tb) if g.bonds()[tb].order == g.bonds()[bidx].order => {}
                        _ => continue 'cand,
                    }
                }
            }
            // degree equality plus total injectivity makes this an automorphism
            assignment[pos] = t;
            used[t] = true;
            recurse(g, atom_eq, pos + 1, assignment, used, out);
            assignment[pos] = usize::MAX;
            used[t] = false;
        }
    }
    recurse(g, &atom_eq, 0, &mut assignment, &mut used, &mut out);
    out
}

/// Anchor maps that sit on a bond differing between the two sides, carry an
/// H-count or charge difference, or hold a leaving-group attachment. These
/// anchors get the strict matching constraints.
pub(super) fn recompute_changed_maps(
    product_pattern: &MolecularGraph,
    precursor_patterns: &[MolecularGraph],
) -> BTreeSet<u32> {
    let mut changed: BTreeSet<u32> = BTreeSet::new();
    let product_bonds = super::mapped_bond_set(&[product_pattern]);
    let refs: Vec<&MolecularGraph> = precursor_patterns.iter().collect();
    let precursor_bonds = super::mapped_bond_set(&refs);
    for (&(a, b), &order) in &product_bonds {
        if precursor_bonds.get(&(a, b)) != Some(&order) {
            changed.insert(a);
            changed.insert(b);
        }
    }
    for (&(a, b), &order) in &precursor_bonds {
        if product_bonds.get(&(a, b)) != Some(&order) {
            changed.insert(a);
            changed.insert(b);
        }
    }
    let mut product_atoms: BTreeMap<u32, (u8, i8)> = BTreeMap::new();
    for atom in product_pattern.atoms() {
        if let Some(m) = atom.atom_map {
            product_atoms.insert(m, (atom.hydrogens, atom.charge));
        }
    }
    for pattern in precursor_patterns {
        for i in 0..pattern.atom_count() {
            let atom = pattern.atom(i);
            if let Some(m) = atom.atom_map {
                if let Some(&(h, c)) = product_atoms.get(&m) {
                    if h != atom.hydrogens || c != atom.charge {
                        changed.insert(m);
                    }
                }
                let attached_to_leaving = pattern
                    .neighbors(i)
                    .iter()
                    .any(|&(v, _)| pattern.atom(v).atom_map.is_none());
                if attached_to_leaving {
                    changed.insert(m);
                }
            }
        }
    }
    changed
}
