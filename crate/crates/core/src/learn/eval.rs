//! Top-k exact-match evaluation: walk the template ranking, apply templates,
//! and collect distinct canonical precursor sets until k are gathered; a hit
//! is the first position whose set equals the ground truth.

use super::{Classifier, LearnError};
use crate::templates::{apply_template, Reaction, Template};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    /// k -> accuracy
    pub topk: BTreeMap<usize, f64>,
    /// per-sample 0-based rank of the ground-truth set, None when missed
    pub ranks: Vec<Option<usize>>,
    pub samples: usize,
}

impl EvalResult {
    fn from_ranks(ranks: Vec<Option<usize>>, ks: &[usize]) -> EvalResult {
        let samples = ranks.len();
        let mut topk = BTreeMap::new();
        for &k in ks {
            let hits = ranks.iter().filter(|r| r.map(|p| p < k).unwrap_or(false)).count();
            topk.insert(k, hits as f64 / samples.max(1) as f64);
        }
        EvalResult { topk, ranks, samples }
    }
}

/// Rank of the ground-truth precursor set among distinct predicted sets for
/// one product. Templates that fail to apply consume no slot.
fn best_match_rank(
    classifier: &Classifier,
    templates: &BTreeMap<String, Template>,
    reaction: &Reaction,
    max_k: usize,
    max_matches: usize,
) -> Result<Option<usize>, LearnError> {
    let gt = reaction.canonical_precursor_set();
    let ranked = classifier.rank_templates(&reaction.product)?;
    let mut seen: Vec<std::collections::BTreeSet<String>> = Vec::new();
    for (tid, _) in ranked {
        let Some(tpl) = templates.get(&tid) else { continue };
        let outcomes = apply_template(tpl, &reaction.product, max_matches);
        for outcome in outcomes {
            if seen.contains(&outcome) {
                continue;
            }
            seen.push(outcome);
            if *seen.last().unwrap() == gt {
                return Ok(Some(seen.len() - 1));
            }
            if seen.len() >= max_k {
                return Ok(None);
            }
        }
    }
    Ok(None)
}

/// Top-k exact match over a partition. Evaluation is parallel per sample and
/// deterministic (order-preserving collect over a frozen checkpoint).
pub fn evaluate_topk(
    classifier: &Classifier,
    partition: &[&Reaction],
    templates: &BTreeMap<String, Template>,
    ks: &[usize],
    max_matches: usize,
) -> Result<EvalResult, LearnError> {
    let max_k = ks.iter().copied().max().unwrap_or(10);
    let ranks: Vec<Option<usize>> = partition
        .par_iter()
        .map(|r| best_match_rank(classifier, templates, r, max_k, max_matches))
        .collect::<Result<Vec<_>, LearnError>>()?;
    Ok(EvalResult::from_ranks(ranks, ks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_arithmetic() {
        let ranks = vec![Some(0), Some(3), None];
        let result = EvalResult::from_ranks(ranks, &[1, 3, 5, 10]);
        assert!((result.topk[&1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((result.topk[&3] - 1.0 / 3.0).abs() < 1e-12);
        assert!((result.topk[&5] - 2.0 / 3.0).abs() < 1e-12);
        assert!((result.topk[&10] - 2.0 / 3.0).abs() < 1e-12);
        // monotone in k
        let vals: Vec<f64> = result.topk.values().copied().collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sample_hit_at_rank_three() {
        let result = EvalResult::from_ranks(vec![Some(2)], &[1, 3, 5]);
        assert_eq!(result.topk[&1], 0.0);
        assert_eq!(result.topk[&3], 1.0);
        assert_eq!(result.topk[&5], 1.0);
    }
}
