use retroshift::corpus::parse_reaction_smiles;
use retroshift::molgraph::parse_smiles;
use retroshift::templates::{apply_template, extract_template};

fn main() {
    let amide = "[CH3:1][C:2](=[O:3])[OH:4].[NH2:5][CH3:6]>>[CH3:1][C:2](=[O:3])[NH:5][CH3:6]";
    let r = parse_reaction_smiles("rx", None, amide).unwrap();
    let tpl = extract_template(&r, 1).unwrap();
    println!("canonical_string: {}", tpl.canonical_string);
    println!("changed_maps: {:?}", tpl.changed_maps);
    for (i, p) in tpl.precursor_patterns.iter().enumerate() {
        println!("prec pattern {i}: atoms {:?}", p.atoms());
    }
    let product = parse_smiles("CC(=O)NC").unwrap();
    let outcomes = apply_template(&tpl, &product, 100);
    println!("outcomes: {outcomes:?}");
}
