//! Hashed circular fingerprints. Atom environments start from the element
//! level (symbol, charge, aromatic) and grow by hashing sorted neighbor
//! invariants per iteration; every environment sets one bit.

use super::{MolecularGraph, MolError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    pub nbits: usize,
    pub radius: usize,
}

impl Fingerprint {
    fn new(nbits: usize, radius: usize) -> Self {
        Fingerprint { words: vec![0; nbits.div_ceil(64)], nbits, radius }
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.nbits).map(|b| if self.get(b) { 1.0 } else { 0.0 }).collect()
    }

    pub fn tanimoto(&self, other: &Fingerprint) -> f64 {
        let inter: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        let union: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones())
            .sum();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

// splitmix64: pinned hash so fingerprints are stable across builds
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn combine(seed: u64, value: u64) -> u64 {
    mix(seed ^ mix(value))
}

pub fn circular_fingerprint(
    graph: &MolecularGraph,
    radius: usize,
    nbits: usize,
) -> Result<Fingerprint, MolError> {
    if nbits < 64 {
        return Err(MolError::Invalid(format!("nbits {nbits} below minimum 64")));
    }
    let mut fp = Fingerprint::new(nbits, radius);
    let n = graph.atom_count();
    let mut invariants: Vec<u64> = (0..n)
        .map(|i| {
            let atom = graph.atom(i);
            let mut h = 0xcbf2_9ce4_8422_2325u64;
            for b in atom.element.bytes() {
                h = combine(h, b as u64);
            }
            h = combine(h, (atom.charge as i64 as u64).wrapping_add(7));
            combine(h, atom.aromatic as u64)
        })
        .collect();
    let mut environments: std::collections::BTreeSet<u64> = invariants.iter().copied().collect();
    for level in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut nbrs: Vec<u64> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| combine(graph.bonds()[b].order.code() as u64, invariants[j]))
                    .collect();
                nbrs.sort_unstable();
                let mut h = combine(level as u64, invariants[i]);
                for v in nbrs {
                    h = combine(h, v);
                }
                h
            })
            .collect();
        invariants = next;
        environments.extend(invariants.iter().copied());
    }
    for env in environments {
        fp.set((env % nbits as u64) as usize);
    }
    Ok(fp)
}
