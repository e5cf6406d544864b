//! SMILES reader covering the organic subset, bracket atoms with charge,
//! isotope, hydrogen count, chirality and atom maps, ring closures (including
//! `%nn`), branches, directional bonds, and dot-separated fragments.

use super::{
    allowed_valences, default_implicit_h, Atom, BondDir, BondOrder, Chirality, MolError,
    MolecularGraph,
};

const PERIODIC: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",
];

fn is_known_element(sym: &str) -> bool {
    PERIODIC.contains(&sym)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> MolError {
        MolError::Syntax { pos: self.pos, msg: msg.into() }
    }
}

/// Pending bond symbol between the previous atom and the next one.
#[derive(Clone, Copy)]
enum PendingBond {
    None,
    Order(BondOrder),
    Dir(BondDir),
}

struct RingOpen {
    atom: usize,
    pending: PendingBond,
}

pub fn parse_smiles(text: &str) -> Result<MolecularGraph, MolError> {
    if text.is_empty() {
        return Err(MolError::Syntax { pos: 0, msg: "empty SMILES".into() });
    }
    let mut cur = Cursor { bytes: text.as_bytes(), pos: 0 };
    let mut graph = MolecularGraph::new();
    // atoms needing implicit hydrogens resolved after all bonds are known
    let mut bare_atoms: Vec<usize> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending = PendingBond::None;
    let mut branch_stack: Vec<Option<usize>> = Vec::new();
    let mut rings: std::collections::HashMap<u16, RingOpen> = std::collections::HashMap::new();

    while let Some(c) = cur.peek() {
        match c {
            b'(' => {
                cur.next();
                if prev.is_none() {
                    return Err(cur.err("branch with no preceding atom"));
                }
                branch_stack.push(prev);
            }
            b')' => {
                cur.next();
                match branch_stack.pop() {
                    Some(p) => prev = p,
                    None => return Err(cur.err("unbalanced ')'")),
                }
                if !matches!(pending, PendingBond::None) {
                    return Err(cur.err("dangling bond before ')'"));
                }
            }
            b'.' => {
                cur.next();
                if !matches!(pending, PendingBond::None) {
                    return Err(cur.err("bond before '.'"));
                }
                prev = None;
            }
            b'-' => {
                cur.next();
                pending = PendingBond::Order(BondOrder::Single);
            }
            b'=' => {
                cur.next();
                pending = PendingBond::Order(BondOrder::Double);
            }
            b'#' => {
                cur.next();
                pending = PendingBond::Order(BondOrder::Triple);
            }
            b':' => {
                cur.next();
                pending = PendingBond::Order(BondOrder::Aromatic);
            }
            b'/' => {
                cur.next();
                pending = PendingBond::Dir(BondDir::Up);
            }
            b'\\' => {
                cur.next();
                pending = PendingBond::Dir(BondDir::Down);
            }
            b'0'..=b'9' | b'%' => {
                let digit = read_ring_digit(&mut cur)?;
                let from = prev.ok_or_else(|| cur.err("ring digit with no atom"))?;
                match rings.remove(&digit) {
                    Some(open) => {
                        close_ring(&mut graph, open, from, pending, &cur)?;
                    }
                    None => {
                        rings.insert(digit, RingOpen { atom: from, pending });
                    }
                }
                pending = PendingBond::None;
            }
            b'[' => {
                let atom = read_bracket_atom(&mut cur)?;
                let idx = graph.add_atom(atom);
                connect(&mut graph, prev, idx, pending, &cur)?;
                pending = PendingBond::None;
                prev = Some(idx);
            }
            _ => {
                let atom = read_bare_atom(&mut cur)?;
                let idx = graph.add_atom(atom);
                bare_atoms.push(idx);
                connect(&mut graph, prev, idx, pending, &cur)?;
                pending = PendingBond::None;
                prev = Some(idx);
            }
        }
    }
    if !branch_stack.is_empty() {
        return Err(MolError::Syntax { pos: text.len(), msg: "unbalanced '('".into() });
    }
    if !rings.is_empty() {
        let mut digits: Vec<u16> = rings.keys().copied().collect();
        digits.sort_unstable();
        return Err(MolError::Syntax {
            pos: text.len(),
            msg: format!("unclosed ring bond(s): {digits:?}"),
        });
    }
    if !matches!(pending, PendingBond::None) {
        return Err(MolError::Syntax { pos: text.len(), msg: "dangling bond".into() });
    }

    for idx in bare_atoms {
        let units = graph.bond_units(idx);
        let atom = graph.atom(idx);
        if allowed_valences(&atom.element)
            .map(|allowed| {
                !atom.aromatic && units > *allowed.iter().max().unwrap()
            })
            .unwrap_or(false)
        {
            return Err(MolError::Valence {
                atom: idx,
                msg: format!("{} exceeds its maximum valence", atom.element),
            });
        }
        let h = default_implicit_h(&atom.element, atom.aromatic, units);
        graph.atom_mut(idx).hydrogens = h;
    }
    graph.validate()?;
    Ok(graph)
}

fn connect(
    graph: &mut MolecularGraph,
    prev: Option<usize>,
    idx: usize,
    pending: PendingBond,
    cur: &Cursor,
) -> Result<(), MolError> {
    let Some(p) = prev else {
        if !matches!(pending, PendingBond::None) {
            return Err(cur.err("bond with no preceding atom"));
        }
        return Ok(());
    };
    let (order, dir) = resolve_bond(graph, p, idx, pending);
    graph
        .add_bond_with_dir(p, idx, order, dir)
        .map_err(|e| cur.err(e.to_string()))?;
    Ok(())
}

fn resolve_bond(
    graph: &MolecularGraph,
    a: usize,
    b: usize,
    pending: PendingBond,
) -> (BondOrder, Option<BondDir>) {
    match pending {
        PendingBond::Order(o) => (o, None),
        PendingBond::Dir(d) => (BondOrder::Single, Some(d)),
        PendingBond::None => {
            if graph.atom(a).aromatic && graph.atom(b).aromatic {
                (BondOrder::Aromatic, None)
            } else {
                (BondOrder::Single, None)
            }
        }
    }
}

fn close_ring(
    graph: &mut MolecularGraph,
    open: RingOpen,
    to: usize,
    pending: PendingBond,
    cur: &Cursor,
) -> Result<(), MolError> {
    let merged = match (open.pending, pending) {
        (p, PendingBond::None) => p,
        // the closing-end symbol is written looking back toward the opener
        (PendingBond::None, PendingBond::Dir(y)) => PendingBond::Dir(y.flipped()),
        (PendingBond::None, p) => p,
        (PendingBond::Order(x), PendingBond::Order(y)) if x == y => PendingBond::Order(x),
        (PendingBond::Dir(x), PendingBond::Dir(y)) if x == y.flipped() => PendingBond::Dir(x),
        _ => return Err(cur.err("conflicting bond orders on ring closure")),
    };
    let (order, dir) = resolve_bond(graph, open.atom, to, merged);
    graph
        .add_bond_with_dir(open.atom, to, order, dir)
        .map_err(|e| cur.err(e.to_string()))?;
    Ok(())
}

fn read_ring_digit(cur: &mut Cursor) -> Result<u16, MolError> {
    match cur.next().unwrap() {
        b'%' => {
            let mut value = 0u16;
            for _ in 0..2 {
                match cur.next() {
                    Some(d @ b'0'..=b'9') => value = value * 10 + (d - b'0') as u16,
                    _ => return Err(cur.err("'%' needs two digits")),
                }
            }
            Ok(value)
        }
        d => Ok((d - b'0') as u16),
    }
}

fn read_bare_atom(cur: &mut Cursor) -> Result<Atom, MolError> {
    let start = cur.pos;
    let c = cur.next().unwrap();
    let (symbol, aromatic) = match c {
        b'C' => {
            if cur.peek() == Some(b'l') {
                cur.next();
                ("Cl", false)
            } else {
                ("C", false)
            }
        }
        b'B' => {
            if cur.peek() == Some(b'r') {
                cur.next();
                ("Br", false)
            } else {
                ("B", false)
            }
        }
        b'N' => ("N", false),
        b'O' => ("O", false),
        b'P' => ("P", false),
        b'S' => ("S", false),
        b'F' => ("F", false),
        b'I' => ("I", false),
        b'b' => ("B", true),
        b'c' => ("C", true),
        b'n' => ("N", true),
        b'o' => ("O", true),
        b'p' => ("P", true),
        b's' => ("S", true),
        other => {
            return Err(MolError::Syntax {
                pos: start,
                msg: format!("unexpected character '{}'", other as char),
            })
        }
    };
    let mut atom = Atom::new(symbol);
    atom.aromatic = aromatic;
    Ok(atom)
}

fn read_bracket_atom(cur: &mut Cursor) -> Result<Atom, MolError> {
    cur.next(); // consume '['
    let mut isotope: Option<u16> = None;
    while let Some(d @ b'0'..=b'9') = cur.peek() {
        cur.next();
        isotope = Some(isotope.unwrap_or(0) * 10 + (d - b'0') as u16);
    }
    let (symbol, aromatic) = read_bracket_symbol(cur)?;
    if !is_known_element(&symbol) {
        return Err(cur.err(format!("unknown element '{symbol}'")));
    }
    let mut atom = Atom::new(&symbol);
    atom.aromatic = aromatic;
    atom.isotope = isotope;
    // chirality
    if cur.peek() == Some(b'@') {
        cur.next();
        if cur.peek() == Some(b'@') {
            cur.next();
            atom.chirality = Some(Chirality::Clockwise);
        } else {
            atom.chirality = Some(Chirality::Anticlockwise);
        }
    }
    // hydrogen count
    if cur.peek() == Some(b'H') {
        cur.next();
        let mut h = 1u8;
        if let Some(d @ b'0'..=b'9') = cur.peek() {
            cur.next();
            h = d - b'0';
        }
        atom.hydrogens = h;
    }
    // charge
    match cur.peek() {
        Some(b'+') => {
            cur.next();
            atom.charge = read_charge_magnitude(cur, b'+');
        }
        Some(b'-') => {
            cur.next();
            atom.charge = -read_charge_magnitude(cur, b'-');
        }
        _ => {}
    }
    // atom map
    if cur.peek() == Some(b':') {
        cur.next();
        let mut map = 0u32;
        let mut any = false;
        while let Some(d @ b'0'..=b'9') = cur.peek() {
            cur.next();
            map = map * 10 + (d - b'0') as u32;
            any = true;
        }
        if !any {
            return Err(cur.err("':' in bracket atom needs a map number"));
        }
        if map > 0 {
            atom.atom_map = Some(map);
        }
    }
    if cur.next() != Some(b']') {
        return Err(cur.err("expected ']'"));
    }
    Ok(atom)
}

fn read_charge_magnitude(cur: &mut Cursor, sign: u8) -> i8 {
    let mut magnitude = 1i8;
    if let Some(d @ b'0'..=b'9') = cur.peek() {
        cur.next();
        magnitude = (d - b'0') as i8;
    } else {
        while cur.peek() == Some(sign) {
            cur.next();
            magnitude += 1;
        }
    }
    magnitude
}

fn read_bracket_symbol(cur: &mut Cursor) -> Result<(String, bool), MolError> {
    let c = cur.next().ok_or_else(|| cur.err("unterminated bracket atom"))?;
    if c.is_ascii_uppercase() {
        let mut sym = String::from(c as char);
        if let Some(l) = cur.peek() {
            if l.is_ascii_lowercase() && l != b'h' {
                // 'h' would swallow the hydrogen-count token for symbols like [CH4]
                let two = format!("{}{}", c as char, l as char);
                if is_known_element(&two) {
                    cur.next();
                    sym = two;
                }
            }
        }
        Ok((sym, false))
    } else if c.is_ascii_lowercase() {
        // aromatic symbols: b c n o p s se as
        let sym = match c {
            b's' if cur.peek() == Some(b'e') => {
                cur.next();
                "Se".to_string()
            }
            b'a' if cur.peek() == Some(b's') => {
                cur.next();
                "As".to_string()
            }
            b'b' => "B".to_string(),
            b'c' => "C".to_string(),
            b'n' => "N".to_string(),
            b'o' => "O".to_string(),
            b'p' => "P".to_string(),
            b's' => "S".to_string(),
            _ => {
                return Err(cur.err(format!("invalid aromatic symbol '{}'", c as char)));
            }
        };
        Ok((sym, true))
    } else {
        Err(cur.err(format!("invalid element start '{}'", c as char)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::BondOrder;

    #[test]
    fn ethanol_counts() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bonds().len(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(g.ring_count(), 0);
        assert_eq!(g.atom(0).hydrogens, 3);
        assert_eq!(g.atom(1).hydrogens, 2);
        assert_eq!(g.atom(2).hydrogens, 1);
    }

    #[test]
    fn benzene_aromatic() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bonds().len(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic));
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(g.ring_count(), 1);
        assert!(g.atoms().iter().all(|a| a.hydrogens == 1));
    }

    #[test]
    fn atom_maps_captured() {
        let g = parse_smiles("[CH3:1][OH:4]").unwrap();
        let maps: Vec<u32> = g.atom_maps().into_iter().collect();
        assert_eq!(maps, vec![1, 4]);
        assert_eq!(g.atom(0).hydrogens, 3);
        assert_eq!(g.atom(1).hydrogens, 1);
    }

    #[test]
    fn unbalanced_paren_is_syntax_error() {
        assert!(matches!(parse_smiles("C("), Err(MolError::Syntax { .. })));
        assert!(matches!(parse_smiles("C)C"), Err(MolError::Syntax { .. })));
        assert!(matches!(parse_smiles("C1CC"), Err(MolError::Syntax { .. })));
    }

    #[test]
    fn unknown_element_rejected() {
        assert!(matches!(parse_smiles("[Xx]"), Err(MolError::Syntax { .. })));
    }

    #[test]
    fn valence_violation_rejected() {
        assert!(matches!(parse_smiles("C(=O)(=O)=O"), Err(MolError::Valence { .. })));
        assert!(matches!(parse_smiles("[CH5]"), Err(MolError::Valence { .. })));
    }

    #[test]
    fn charges_and_isotopes() {
        let g = parse_smiles("[13CH3-][NH3+]").unwrap();
        assert_eq!(g.atom(0).isotope, Some(13));
        assert_eq!(g.atom(0).charge, -1);
        assert_eq!(g.atom(1).charge, 1);
        assert_eq!(g.atom(1).hydrogens, 3);
        let g2 = parse_smiles("[O--]").unwrap();
        assert_eq!(g2.atom(0).charge, -2);
        let g3 = parse_smiles("[Fe+2]").unwrap();
        assert_eq!(g3.atom(0).charge, 2);
    }

    #[test]
    fn dot_makes_multi_component_graph() {
        let g = parse_smiles("CC(=O)O.NC").unwrap();
        assert_eq!(g.connected_components().len(), 2);
    }

    #[test]
    fn pyridine_and_pyrrole_hydrogens() {
        let pyridine = parse_smiles("c1ccncc1").unwrap();
        let n = pyridine.atoms().iter().position(|a| a.element == "N").unwrap();
        assert_eq!(pyridine.atom(n).hydrogens, 0);
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        let n = pyrrole.atoms().iter().position(|a| a.element == "N").unwrap();
        assert_eq!(pyrrole.atom(n).hydrogens, 1);
        assert!(pyrrole.validate().is_ok());
    }

    #[test]
    fn ring_bond_order_at_either_end() {
        let g = parse_smiles("C=1CCCCC=1").unwrap();
        assert!(g.bonds().iter().any(|b| b.order == BondOrder::Double));
        assert!(parse_smiles("C=1CCCCC#1").is_err());
    }

    #[test]
    fn directional_bonds_preserved() {
        let g = parse_smiles("C/C=C/C").unwrap();
        assert_eq!(g.bonds().iter().filter(|b| b.dir.is_some()).count(), 2);
    }

    #[test]
    fn percent_ring_closure() {
        let g = parse_smiles("C%12CCCCC%12").unwrap();
        assert_eq!(g.ring_count(), 1);
    }
}
