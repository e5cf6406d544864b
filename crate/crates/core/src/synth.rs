//! Synthetic atom-mapped reaction corpora. Products are assembled from a
//! fragment library around a family-specific core, precursors are derived by
//! the family's retro edit, and every product atom carries a map. The
//! bundled desk corpus and the test fixtures both come from here.

use crate::molgraph::{parse_smiles, Atom, BondOrder, MolecularGraph};
use crate::templates::{Provenance, Reaction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// CH2-rooted substituents: families that cleave an R2-carbon bond use these
/// so the root hydrogen count (and with it the minimal template) stays fixed.
const CH2_ROOTED: &[&str] = &[
    "CC",
    "CCC",
    "CCCC",
    "CCCCC",
    "CCCCCC",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "Cc1ccc(C)cc1",
    "Cc1ccc(Cl)cc1",
    "Cc1ccc(OC)cc1",
    "CCOC",
    "CC(C)C",
    "CC1CCCCC1",
    "Cc1ccco1",
    "Cc1cccs1",
    "CCCOC",
];

/// General substituents for positions whose root is not part of the minimal
/// pattern.
const ANY_ROOT: &[&str] = &[
    "C",
    "CC",
    "CCC",
    "C(C)C",
    "CCCC",
    "C(C)(C)C",
    "C1CCCCC1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "c1ccccc1",
    "c1ccc(C)cc1",
    "c1ccc(Cl)cc1",
    "c1ccc(OC)cc1",
    "c1ccc(F)cc1",
    "c1ccc2ccccc2c1",
    "c1ccco1",
    "c1cccs1",
    "CCOC",
    "CCCCCC",
];

/// Aromatic-rooted substituents.
const ARYL: &[&str] = &[
    "c1ccccc1",
    "c1ccc(C)cc1",
    "c1ccc(CC)cc1",
    "c1ccc(Cl)cc1",
    "c1ccc(OC)cc1",
    "c1ccc(F)cc1",
    "c1ccc2ccccc2c1",
    "c1ccc(CCC)cc1",
    "c1ccc(C(C)C)cc1",
    "c1cc(C)cc(C)c1",
];

/// Attach a fragment's first-written atom to `base_atom` and refill the
/// junction hydrogens.
fn attach(base: &MolecularGraph, base_atom: usize, frag_smiles: &str) -> (MolecularGraph, usize) {
    attach_with_order(base, base_atom, frag_smiles, BondOrder::Single)
}

fn attach_with_order(
    base: &MolecularGraph,
    base_atom: usize,
    frag_smiles: &str,
    order: BondOrder,
) -> (MolecularGraph, usize) {
    let frag = parse_smiles(frag_smiles).expect("fragment parses");
    let (mut g, offset) = base.merged_with(&frag);
    g.add_bond(base_atom, offset, order).expect("attach bond");
    g.recompute_hydrogens(base_atom);
    g.recompute_hydrogens(offset);
    (g, offset)
}

fn map_all(mut g: MolecularGraph) -> MolecularGraph {
    for i in 0..g.atom_count() {
        g.atom_mut(i).atom_map = Some(i as u32 + 1);
    }
    g
}

/// Retro edit: break one product bond, optionally cap each side with an
/// unmapped leaving fragment, refill hydrogens, and split into molecules.
fn cleave(
    product: &MolecularGraph,
    a: usize,
    b: usize,
    left_cap: Option<(&str, BondOrder)>,
    right_cap: Option<(&str, BondOrder)>,
) -> Vec<MolecularGraph> {
    let mut g = product.without_bond(a, b).expect("cleaved bond exists");
    if let Some((cap, order)) = left_cap {
        let (next, _) = attach_with_order(&g, a, cap, order);
        g = next;
    } else {
        g.recompute_hydrogens(a);
    }
    if let Some((cap, order)) = right_cap {
        let (next, _) = attach_with_order(&g, b, cap, order);
        g = next;
    } else {
        g.recompute_hydrogens(b);
    }
    g.connected_components()
        .into_iter()
        .map(|comp| g.induced_subgraph(&comp).0)
        .collect()
}

fn single_molecule(g: MolecularGraph) -> Vec<MolecularGraph> {
    g.connected_components()
        .into_iter()
        .map(|comp| g.induced_subgraph(&comp).0)
        .collect()
}

struct Family {
    name: &'static str,
    class: u32,
    count: usize,
    left: &'static [&'static str],
    right: &'static [&'static str],
    build: fn(&str, &str) -> (MolecularGraph, Vec<MolecularGraph>),
}

fn new_core(elements: &[(&str, i8)]) -> MolecularGraph {
    let mut g = MolecularGraph::new();
    for (el, charge) in elements {
        let mut atom = Atom::new(el);
        atom.charge = *charge;
        g.add_atom(atom);
    }
    g
}

fn amide(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-C(=O)-N(H)-R2; precursors: R1-C(=O)-OH + H2N-R2
    let mut g = new_core(&[("C", 0), ("O", 0), ("N", 0)]);
    g.add_bond(0, 1, BondOrder::Double).unwrap();
    g.add_bond(0, 2, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 2, r2);
    for i in [0usize, 1, 2] {
        g.recompute_hydrogens(i);
    }
    let product = map_all(g);
    let precursors = cleave(&product, 0, 2, Some(("O", BondOrder::Single)), None);
    (product, precursors)
}

fn tert_amide(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-C(=O)-N(CH3)-R2; the N-methyl variant is its own class
    let mut g = new_core(&[("C", 0), ("O", 0), ("N", 0), ("C", 0)]);
    g.add_bond(0, 1, BondOrder::Double).unwrap();
    g.add_bond(0, 2, BondOrder::Single).unwrap();
    g.add_bond(2, 3, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 2, r2);
    for i in [0usize, 1, 2, 3] {
        g.recompute_hydrogens(i);
    }
    let product = map_all(g);
    let precursors = cleave(&product, 0, 2, Some(("O", BondOrder::Single)), None);
    (product, precursors)
}

fn ester(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-C(=O)-O-R2; precursors: R1-C(=O)-OH + HO-R2
    let mut g = new_core(&[("C", 0), ("O", 0), ("O", 0)]);
    g.add_bond(0, 1, BondOrder::Double).unwrap();
    g.add_bond(0, 2, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 2, r2);
    for i in [0usize, 1, 2] {
        g.recompute_hydrogens(i);
    }
    let product = map_all(g);
    let precursors = cleave(&product, 0, 2, Some(("O", BondOrder::Single)), None);
    (product, precursors)
}

fn ether(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-O-CH2R2'; precursors: R1-OH + Br-CH2R2'
    let g = new_core(&[("O", 0)]);
    let (g, _) = attach(&g, 0, r1);
    let (mut g, r2_root) = attach(&g, 0, r2);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let precursors = cleave(&product, 0, r2_root, None, Some(("Br", BondOrder::Single)));
    (product, precursors)
}

fn aryl_ether(r1: &str, ar: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-O-Ar; precursors: R1-OH + F-Ar
    let g = new_core(&[("O", 0)]);
    let (g, _) = attach(&g, 0, r1);
    let (mut g, ar_root) = attach(&g, 0, ar);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let precursors = cleave(&product, 0, ar_root, None, Some(("F", BondOrder::Single)));
    (product, precursors)
}

fn amine(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-NH-CH2R2'; precursors: R1-NH2 + Cl-CH2R2'
    let g = new_core(&[("N", 0)]);
    let (g, _) = attach(&g, 0, r1);
    let (mut g, r2_root) = attach(&g, 0, r2);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let precursors = cleave(&product, 0, r2_root, None, Some(("Cl", BondOrder::Single)));
    (product, precursors)
}

fn thioether(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    let g = new_core(&[("S", 0)]);
    let (g, _) = attach(&g, 0, r1);
    let (mut g, r2_root) = attach(&g, 0, r2);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let precursors = cleave(&product, 0, r2_root, None, Some(("Br", BondOrder::Single)));
    (product, precursors)
}

fn biaryl(ar1: &str, ar2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: Ar1-Ar2; precursors: Ar1-Br + Ar2-B(O)O
    let g = parse_smiles(ar1).expect("aryl parses");
    let (mut g, root2) = attach(&g, 0, ar2);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let precursors = cleave(&product, 0, root2, Some(("Br", BondOrder::Single)), Some(("B(O)O", BondOrder::Single)));
    (product, precursors)
}

fn sulfonamide(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-S(=O)(=O)-NH-R2; precursors: R1-S(=O)(=O)Cl + H2N-R2
    let mut g = new_core(&[("S", 0), ("O", 0), ("O", 0), ("N", 0)]);
    g.add_bond(0, 1, BondOrder::Double).unwrap();
    g.add_bond(0, 2, BondOrder::Double).unwrap();
    g.add_bond(0, 3, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 3, r2);
    for i in [0usize, 1, 2, 3] {
        g.recompute_hydrogens(i);
    }
    let product = map_all(g);
    let precursors = cleave(&product, 0, 3, Some(("Cl", BondOrder::Single)), None);
    (product, precursors)
}

fn alcohol_from_ketone(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-CH(OH)-R2; precursor: R1-C(=O)-R2
    let mut g = new_core(&[("C", 0), ("O", 0)]);
    g.add_bond(0, 1, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 0, r2);
    g.recompute_hydrogens(0);
    g.recompute_hydrogens(1);
    let product = map_all(g);
    let mut ketone = product.with_bond_order(0, 1, BondOrder::Double).unwrap();
    ketone.recompute_hydrogens(0);
    ketone.recompute_hydrogens(1);
    (product, single_molecule(ketone))
}

fn alkane_from_alkene(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-CH2-CH2-R2; precursor: R1-CH=CH-R2
    let mut g = new_core(&[("C", 0), ("C", 0)]);
    g.add_bond(0, 1, BondOrder::Single).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 1, r2);
    g.recompute_hydrogens(0);
    g.recompute_hydrogens(1);
    let product = map_all(g);
    let mut alkene = product.with_bond_order(0, 1, BondOrder::Double).unwrap();
    alkene.recompute_hydrogens(0);
    alkene.recompute_hydrogens(1);
    (product, single_molecule(alkene))
}

fn aniline_from_nitro(ar: &str, _unused: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: Ar-NH2; precursor: Ar-[N+](=O)[O-]
    let g = new_core(&[("N", 0)]);
    let (mut g, _) = attach(&g, 0, ar);
    g.recompute_hydrogens(0);
    let product = map_all(g);
    let mut nitro = product.clone();
    nitro.atom_mut(0).charge = 1;
    let (nitro, _) = attach_with_order(&nitro, 0, "O", BondOrder::Double);
    let (mut nitro, _) = attach(&nitro, 0, "[O-]");
    nitro.recompute_hydrogens(0);
    (product, single_molecule(nitro))
}

fn imine(r1: &str, r2: &str) -> (MolecularGraph, Vec<MolecularGraph>) {
    // product: R1-CH=N-R2; precursors: R1-CHO + H2N-R2
    let mut g = new_core(&[("C", 0), ("N", 0)]);
    g.add_bond(0, 1, BondOrder::Double).unwrap();
    let (g, _) = attach(&g, 0, r1);
    let (mut g, _) = attach(&g, 1, r2);
    g.recompute_hydrogens(0);
    g.recompute_hydrogens(1);
    let product = map_all(g);
    let precursors = cleave(&product, 0, 1, Some(("O", BondOrder::Double)), None);
    (product, precursors)
}

const FAMILIES: &[Family] = &[
    Family { name: "amide", class: 1, count: 72, left: ANY_ROOT, right: ANY_ROOT, build: amide },
    Family { name: "ester", class: 2, count: 66, left: ANY_ROOT, right: ANY_ROOT, build: ester },
    Family { name: "ether", class: 3, count: 58, left: ANY_ROOT, right: CH2_ROOTED, build: ether },
    Family { name: "amine", class: 4, count: 52, left: ANY_ROOT, right: CH2_ROOTED, build: amine },
    Family { name: "biaryl", class: 5, count: 50, left: ARYL, right: ARYL, build: biaryl },
    Family {
        name: "sulfonamide",
        class: 6,
        count: 46,
        left: ANY_ROOT,
        right: ANY_ROOT,
        build: sulfonamide,
    },
    Family {
        name: "ketone_reduction",
        class: 7,
        count: 44,
        left: ANY_ROOT,
        right: ANY_ROOT,
        build: alcohol_from_ketone,
    },
    Family {
        name: "hydrogenation",
        class: 8,
        count: 40,
        left: ANY_ROOT,
        right: ANY_ROOT,
        build: alkane_from_alkene,
    },
    Family {
        name: "aryl_ether",
        class: 9,
        count: 35,
        left: ANY_ROOT,
        right: ARYL,
        build: aryl_ether,
    },
    Family {
        name: "thioether",
        class: 10,
        count: 32,
        left: ANY_ROOT,
        right: CH2_ROOTED,
        build: thioether,
    },
    Family {
        name: "n_methyl_amide",
        class: 11,
        count: 8,
        left: ANY_ROOT,
        right: ANY_ROOT,
        build: tert_amide,
    },
    Family {
        name: "nitro_reduction",
        class: 12,
        count: 6,
        left: ARYL,
        right: ARYL,
        build: aniline_from_nitro,
    },
    Family { name: "imine", class: 13, count: 5, left: ANY_ROOT, right: ANY_ROOT, build: imine },
];

/// Build one reaction from a family and a substituent pair.
fn build_reaction(family: &Family, idx: usize, r1: &str, r2: &str) -> Reaction {
    let (product, precursors) = (family.build)(r1, r2);
    let reaction = Reaction {
        id: format!("{}_{idx:03}", family.name),
        reaction_class: Some(family.class),
        precursors,
        product,
        provenance: Provenance::Observed,
    };
    reaction.validate().expect("generated reaction is consistent");
    reaction
}

/// The bundled desk corpus: ~500 mapped reactions over 13 template families
/// with controlled class sizes and a broad product-size spread.
pub fn desk_corpus(seed: u64) -> Vec<Reaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for family in FAMILIES {
        let mut pairs: Vec<(usize, usize)> = (0..family.left.len())
            .flat_map(|i| (0..family.right.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| family.name != "biaryl" || i <= j)
            .collect();
        pairs.shuffle(&mut rng);
        assert!(pairs.len() >= family.count, "family {} needs more fragments", family.name);
        for (k, &(i, j)) in pairs.iter().take(family.count).enumerate() {
            out.push(build_reaction(family, k, family.left[i], family.right[j]));
        }
    }
    out
}

/// Fixture with explicit per-family counts, e.g. `[("amide", 8), ("ester", 6)]`.
pub fn fixture(spec: &[(&str, usize)]) -> Vec<Reaction> {
    let mut out = Vec::new();
    for (name, count) in spec {
        let family = FAMILIES
            .iter()
            .find(|f| f.name == *name)
            .unwrap_or_else(|| panic!("unknown family {name}"));
        for k in 0..*count {
            let r1 = family.left[k % family.left.len()];
            let r2 = family.right[(k / family.left.len() + k + 3) % family.right.len()];
            out.push(build_reaction(family, k, r1, r2));
        }
    }
    out
}

/// Tiny fixture: 4 template classes with sizes 8/6/4/2 (20 reactions).
pub fn tiny_fixture() -> Vec<Reaction> {
    fixture(&[("amide", 8), ("ester", 6), ("ether", 4), ("sulfonamide", 2)])
}

use crate::enhance::{
    BipartiteGraph, EbmFeatures, Edge, EdgeLabel, EntityInput, MoleculeNode, TemplateNode,
};
use rand::Rng;

/// Planted-feature bipartite benchmark: each molecule and template carries a
/// hidden key; gt edges connect matching keys. Feature vectors expose the
/// key as a one-hot block plus random noise dimensions.
pub fn planted_bipartite(
    n_molecules: usize,
    n_templates: usize,
    n_keys: usize,
    noise_dims: usize,
    seed: u64,
) -> (BipartiteGraph, EbmFeatures) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mol_keys: Vec<usize> = (0..n_molecules).map(|_| rng.random_range(0..n_keys)).collect();
    let tpl_keys: Vec<usize> = (0..n_templates).map(|_| rng.random_range(0..n_keys)).collect();

    let molecules = (0..n_molecules)
        .map(|i| MoleculeNode { id: format!("m{i:04}"), smiles: String::new() })
        .collect();
    let templates = (0..n_templates)
        .map(|j| TemplateNode { id: format!("t{j:04}"), frequency: 1, template: None })
        .collect();
    let mut edges = Vec::with_capacity(n_molecules * n_templates);
    for i in 0..n_molecules {
        for j in 0..n_templates {
            let matched = mol_keys[i] == tpl_keys[j];
            let label = if matched && rng.random_range(0.0..1.0) < 0.7 {
                EdgeLabel::Gt
            } else {
                EdgeLabel::Candidate
            };
            edges.push(Edge { molecule: i, template: j, label });
        }
    }
    let graph = BipartiteGraph::from_parts(molecules, templates, edges);

    let feature = |key: usize, rng: &mut ChaCha8Rng| {
        let mut v = vec![0.0; n_keys + noise_dims];
        v[key] = 1.0;
        for slot in v.iter_mut().skip(n_keys) {
            *slot = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { 0.0 };
        }
        v
    };
    let features = EbmFeatures {
        molecules: mol_keys.iter().map(|&k| EntityInput::Vector(feature(k, &mut rng))).collect(),
        templates: tpl_keys
            .iter()
            .map(|&k| vec![EntityInput::Vector(feature(k, &mut rng))])
            .collect(),
    };
    (graph, features)
}

/// Two-environment invariant-vs-spurious task. The invariant feature agrees
/// with the label 90% of the time everywhere; the spurious feature agrees
/// 95% / 85% in the two training environments and only 10% at test.
pub struct IrmTask {
    /// (features, label, environment)
    pub train: Vec<(Vec<f64>, usize, usize)>,
    pub test: Vec<(Vec<f64>, usize)>,
}

pub fn irm_task(n_per_env: usize, n_test: usize, seed: u64) -> IrmTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |spur_agree: f64, rng: &mut ChaCha8Rng| {
        let y = rng.random_range(0..2usize);
        let inv = if rng.random_range(0.0..1.0) < 0.9 { y } else { 1 - y };
        let spur = if rng.random_range(0.0..1.0) < spur_agree { y } else { 1 - y };
        let to_signed = |b: usize| if b == 1 { 1.0 } else { -1.0 };
        (vec![to_signed(inv), to_signed(spur), 1.0], y)
    };
    let mut train = Vec::new();
    for (env, agree) in [(0usize, 0.95), (1usize, 0.85)] {
        for _ in 0..n_per_env {
            let (x, y) = sample(agree, &mut rng);
            train.push((x, y, env));
        }
    }
    let test = (0..n_test).map(|_| sample(0.10, &mut rng)).collect();
    IrmTask { train, test }
}

/// Probability that a gt energy ranks below a candidate energy (ties count
/// half): the separation AUC for an energy model.
pub fn ranking_auc(gt_energies: &[f64], candidate_energies: &[f64]) -> f64 {
    if gt_energies.is_empty() || candidate_energies.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0;
    for &p in gt_energies {
        for &n in candidate_energies {
            if p < n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (gt_energies.len() * candidate_energies.len()) as f64
}
