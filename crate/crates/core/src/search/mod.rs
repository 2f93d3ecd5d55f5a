//! Universe enumeration, pairwise agnosticism tables, and the clique search
//! that turns them into maximal sets of mutually agnostic encodings.

mod cliques;
mod pairs;
mod sweep;
mod universe;

pub use cliques::{
    build_graph, build_graph_seq, local_scores, local_scores_seq, max_cliques, max_cliques_seq,
    Clique, CompatibilityGraph, DEFAULT_EXPANSION_BUDGET,
};
pub use pairs::PairTable;
pub use sweep::{
    select_clique, symmetry_classes, threshold_sweep, threshold_sweep_seq, write_fig_csv,
    CliqueSummary, SweepParams, SweepResult, SweepStep, SymmetryAnalysis,
};
pub use universe::{
    enumerate_order4, filter_hadamard, filter_hadamard_seq, order4_encoding, permute_rows,
    sylvester_permutation_universe, MatrixUniverse, Provenance, UniverseManifest,
};
