//! SMILES output under a canonical atom ranking. Two traversal passes per
//! component: the first finds ring-closure bonds, the second emits text.

use super::canon::component_ranks;
use super::{default_implicit_h, Atom, BondDir, BondOrder, Chirality, MolecularGraph};
use std::collections::HashMap;

/// Canonical SMILES for a graph (multi-component graphs emit dot-joined,
/// lexicographically sorted component strings). With `keep_maps == false`
/// every atom-map annotation is dropped.
pub fn to_canonical_smiles(graph: &MolecularGraph, keep_maps: bool) -> String {
    let comps = graph.connected_components();
    let mut parts: Vec<(String, String)> = Vec::with_capacity(comps.len());
    for comp in comps {
        let (sub, _) = graph.induced_subgraph(&comp);
        let ranks = component_ranks(&sub);
        let plain = write_smiles(&sub, &ranks, false);
        let emit = if keep_maps { write_smiles(&sub, &ranks, true) } else { plain.clone() };
        parts.push((plain, emit));
    }
    parts.sort();
    parts.into_iter().map(|(_, emit)| emit).collect::<Vec<_>>().join(".")
}

/// Emit SMILES following the given atom ranking (lower rank written first,
/// neighbors visited in ascending rank order). Components are joined by '.'
/// in rank order; `to_canonical_smiles` is the sorted-canonical entry point.
pub fn write_smiles(graph: &MolecularGraph, ranks: &[usize], keep_maps: bool) -> String {
    let n = graph.atom_count();
    if n == 0 {
        return String::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);

    let mut visited = vec![false; n];
    let mut pieces: Vec<String> = Vec::new();
    for &start in &order {
        if visited[start] {
            continue;
        }
        let mut writer = Writer {
            graph,
            ranks,
            keep_maps,
            visited: &mut visited,
            opening: HashMap::new(),
            closing: HashMap::new(),
            digits_in_use: Vec::new(),
        };
        writer.find_ring_closures(start);
        pieces.push(writer.emit(start, None));
    }
    pieces.join(".")
}

struct Writer<'a> {
    graph: &'a MolecularGraph,
    ranks: &'a [usize],
    keep_maps: bool,
    visited: &'a mut Vec<bool>,
    /// ancestor atom -> descendants that close a ring back to it
    opening: HashMap<usize, Vec<usize>>,
    /// atom -> (partner, digit) closures to write at this atom
    closing: HashMap<usize, Vec<(usize, u16)>>,
    digits_in_use: Vec<u16>,
}

impl<'a> Writer<'a> {
    fn sorted_neighbors(&self, u: usize, parent: Option<usize>) -> Vec<(usize, usize)> {
        let mut nbrs: Vec<(usize, usize)> = self
            .graph
            .neighbors(u)
            .iter()
            .copied()
            .filter(|&(v, _)| Some(v) != parent)
            .collect();
        nbrs.sort_by_key(|&(v, _)| self.ranks[v]);
        nbrs
    }

    fn find_ring_closures(&mut self, start: usize) {
        // iterative DFS mirroring the recursive emit order; uses local marks
        // so the shared `visited` stays reserved for the emit pass
        let mut seen = vec![false; self.graph.atom_count()];
        let mut on_path = vec![false; self.graph.atom_count()];
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(start, None, 0)];
        seen[start] = true;
        on_path[start] = true;
        while let Some(&mut (u, parent, ref mut next)) = stack.last_mut() {
            let nbrs = self.sorted_neighbors(u, parent);
            if *next < nbrs.len() {
                let (v, _) = nbrs[*next];
                *next += 1;
                if on_path[v] {
                    self.opening.entry(v).or_default().push(u);
                } else if !seen[v] {
                    seen[v] = true;
                    on_path[v] = true;
                    stack.push((v, Some(u), 0));
                }
            } else {
                on_path[u] = false;
                stack.pop();
            }
        }
    }

    fn allocate_digit(&mut self) -> u16 {
        let mut d = 1u16;
        while self.digits_in_use.contains(&d) {
            d += 1;
        }
        self.digits_in_use.push(d);
        d
    }

    fn release_digit(&mut self, d: u16) {
        if let Some(pos) = self.digits_in_use.iter().position(|&x| x == d) {
            self.digits_in_use.remove(pos);
        }
    }

    fn emit(&mut self, u: usize, parent: Option<usize>) -> String {
        self.visited[u] = true;
        let mut out = String::new();
        if let Some(p) = parent {
            out.push_str(&self.bond_token(p, u));
        }
        out.push_str(&atom_token(self.graph, u, self.keep_maps));

        // close rings opened by ancestors toward this atom
        if let Some(mut closures) = self.closing.remove(&u) {
            closures.sort_by_key(|&(_, d)| d);
            for (partner, digit) in closures {
                out.push_str(&self.bond_token(u, partner));
                out.push_str(&digit_token(digit));
                self.release_digit(digit);
            }
        }
        // open rings that descendants will close back here
        if let Some(descendants) = self.opening.remove(&u) {
            for d in descendants {
                let digit = self.allocate_digit();
                out.push_str(&self.bond_token(u, d));
                out.push_str(&digit_token(digit));
                self.closing.entry(d).or_default().push((u, digit));
            }
        }

        let nbrs = self.sorted_neighbors(u, parent);
        let mut branches: Vec<String> = Vec::new();
        for (v, _) in nbrs {
            if !self.visited[v] {
                branches.push(self.emit(v, Some(u)));
            }
        }
        if branches.len() > 1 {
            for b in &branches[..branches.len() - 1] {
                out.push('(');
                out.push_str(b);
                out.push(')');
            }
        }
        if let Some(last) = branches.last() {
            out.push_str(last);
        }
        out
    }

    /// Bond symbol for traversal direction from -> to; empty when implied.
    fn bond_token(&self, from: usize, to: usize) -> String {
        let bidx = self.graph.bond_between(from, to).expect("bond exists");
        let bond = &self.graph.bonds()[bidx];
        if let Some(dir) = bond.dir {
            let d = if bond.a == from { dir } else { dir.flipped() };
            return match d {
                BondDir::Up => "/".to_string(),
                BondDir::Down => "\\".to_string(),
            };
        }
        let both_aromatic = self.graph.atom(from).aromatic && self.graph.atom(to).aromatic;
        match bond.order {
            BondOrder::Single => {
                if both_aromatic {
                    "-".to_string()
                } else {
                    String::new()
                }
            }
            BondOrder::Double => "=".to_string(),
            BondOrder::Triple => "#".to_string(),
            BondOrder::Aromatic => {
                if both_aromatic {
                    String::new()
                } else {
                    ":".to_string()
                }
            }
        }
    }
}

fn digit_token(d: u16) -> String {
    if d > 9 {
        format!("%{d:02}")
    } else {
        d.to_string()
    }
}

fn bare_symbol_ok(atom: &Atom) -> bool {
    if atom.aromatic {
        matches!(atom.element.as_str(), "B" | "C" | "N" | "O" | "P" | "S")
    } else {
        matches!(
            atom.element.as_str(),
            "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I"
        )
    }
}

fn atom_token(graph: &MolecularGraph, i: usize, keep_maps: bool) -> String {
    let atom = graph.atom(i);
    let units = graph.bond_units(i);
    let default_h = default_implicit_h(&atom.element, atom.aromatic, units);
    let needs_bracket = !bare_symbol_ok(atom)
        || atom.charge != 0
        || atom.isotope.is_some()
        || atom.chirality.is_some()
        || (keep_maps && atom.atom_map.is_some())
        || atom.hydrogens != default_h;
    let symbol = if atom.aromatic {
        atom.element.to_lowercase()
    } else {
        atom.element.clone()
    };
    if !needs_bracket {
        return symbol;
    }
    let mut out = String::from("[");
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(&symbol);
    match atom.chirality {
        Some(Chirality::Anticlockwise) => out.push('@'),
        Some(Chirality::Clockwise) => out.push_str("@@"),
        None => {}
    }
    match atom.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => out.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    if keep_maps {
        if let Some(m) = atom.atom_map {
            out.push_str(&format!(":{m}"));
        }
    }
    out.push(']');
    out
}
