//! Toolkit for out-of-distribution single-step retrosynthesis: reaction
//! template extraction from atom-mapped corpora, label-shift and
//! covariate-shift benchmark splits, energy-based concept enhancement over a
//! target-template bipartite graph, and an IRMv1-regularized reference
//! template ranker with a top-k exact-match evaluation harness.

pub mod cli;
pub mod corpus;
pub mod enhance;
pub mod learn;
pub mod molgraph;
pub mod numerics;
pub mod splits;
pub mod synth;
pub mod templates;
