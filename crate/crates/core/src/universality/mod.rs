//! Grouping, bin components, block decomposition and the fidelity bounds
//! built on them.

mod blocks;
mod bounds;
mod grouping;

pub use blocks::{
    block_decompose, class_count, default_block_width, prepare_block_from_epr, trace_norm, BlockDecomposition,
    DecompositionChecks, QBlock, MAX_UNIFORM_QUBITS,
};
pub use bounds::{
    check_lower_bound_empirically, check_offdiag_bound, evaluate_lower_bound, fact_calculus_check, ComponentState,
    EmpiricalBound, LowerBoundReport, BOUND_FORMULA, BOUND_FORMULA_EIGHTH, H_FORMULA,
};
pub use grouping::{
    bin_components, build_grouped_state, component_state, grouped_spread, grouping_bin, grouping_multiplicity,
    max_bin_spread, BinComponent, GroupedAtom, GroupedSpectrum, MAX_GROUPED_ATOMS, MAX_GROUPING,
};
