//! Reaction corpus I/O. Corpora are TSV files with columns
//! `id<TAB>class<TAB>reaction_smiles` (optionally a fourth provenance
//! column), where reaction_smiles is `precursors>agents>product` or
//! `precursors>>product`. The agents segment is ignored.

use crate::molgraph::{parse_smiles, to_canonical_smiles, MolecularGraph};
use crate::templates::{Provenance, Reaction};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Parse one reaction SMILES. Each dot-separated precursor component becomes
/// one precursor molecule.
pub fn parse_reaction_smiles(
    id: &str,
    reaction_class: Option<u32>,
    text: &str,
) -> Result<Reaction, CorpusError> {
    let parts: Vec<&str> = text.split('>').collect();
    let (precursor_part, product_part) = match parts.as_slice() {
        [p, _agents, prod] => (*p, *prod),
        _ => {
            return Err(CorpusError::Parse {
                line: 0,
                msg: format!("reaction '{id}': expected 'precursors>agents>product'"),
            })
        }
    };
    let err = |msg: String| CorpusError::Parse { line: 0, msg: format!("reaction '{id}': {msg}") };
    let precursor_graph = parse_smiles(precursor_part).map_err(|e| err(e.to_string()))?;
    let product = parse_smiles(product_part).map_err(|e| err(e.to_string()))?;
    let precursors: Vec<MolecularGraph> = precursor_graph
        .connected_components()
        .into_iter()
        .map(|comp| precursor_graph.induced_subgraph(&comp).0)
        .collect();
    let reaction = Reaction {
        id: id.to_string(),
        reaction_class,
        precursors,
        product,
        provenance: Provenance::Observed,
    };
    reaction.validate().map_err(|e| err(e.to_string()))?;
    Ok(reaction)
}

/// Mapped reaction SMILES for a reaction record.
pub fn reaction_smiles(reaction: &Reaction) -> String {
    let precursors = reaction
        .precursors
        .iter()
        .map(|p| to_canonical_smiles(p, true))
        .collect::<Vec<_>>()
        .join(".");
    format!("{precursors}>>{}", to_canonical_smiles(&reaction.product, true))
}

pub fn read_corpus(path: &Path) -> Result<Vec<Reaction>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(CorpusError::Parse {
                line: lineno + 1,
                msg: format!("expected at least 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let id = fields[0];
        let class = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse::<u32>().map_err(|_| CorpusError::Parse {
                line: lineno + 1,
                msg: format!("bad class '{}'", fields[1]),
            })?)
        };
        let mut reaction = parse_reaction_smiles(id, class, fields[2]).map_err(|e| match e {
            CorpusError::Parse { msg, .. } => CorpusError::Parse { line: lineno + 1, msg },
            other => other,
        })?;
        if fields.len() >= 4 && fields[3] == "enhanced" {
            reaction.provenance = Provenance::Enhanced;
        }
        out.push(reaction);
    }
    Ok(out)
}

pub fn write_corpus(
    path: &Path,
    reactions: &[Reaction],
    with_provenance: bool,
) -> Result<(), CorpusError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reactions {
        let class = r.reaction_class.map(|c| c.to_string()).unwrap_or_default();
        if with_provenance {
            let prov = match r.provenance {
                Provenance::Observed => "observed",
                Provenance::Enhanced => "enhanced",
            };
            writeln!(file, "{}\t{}\t{}\t{}", r.id, class, reaction_smiles(r), prov)?;
        } else {
            writeln!(file, "{}\t{}\t{}", r.id, class, reaction_smiles(r))?;
        }
    }
    Ok(())
}
