//! Martingale transport on the real line: shadows, left-curtain and barcode
//! couplings, Monge approximation of martingale couplings, uniqueness
//! diagnostics, backward-deterministic peacock chains, and a small LP oracle.

pub mod builders;
pub mod convex_order;
pub mod coupling;
pub mod error;
pub mod measure;
pub mod oracle;
pub mod peacock;
pub mod shadow;

pub use builders::{
    barcode, barcode_cells, decompose_singular, decompose_singular_ordered, left_curtain,
    left_curtain_cells, left_monotone_violation, monge_approximate, uniqueness_check,
    BarcodeIteration, BarcodeTrace, Uniqueness, UniquenessReport, UniquenessWitness,
    BARCODE_MAX_ITERATIONS, DEFAULT_STOP_EPS,
};
pub use convex_order::{
    irreducible_components, leq_cx, leq_cx_witness, leq_e, leq_e_witness, potential, Component,
    OrderWitness, Potential, Verdict, ORDER_TOL,
};
pub use coupling::{gauss_legendre, w1_distance, Coupling, Link, MongeReport};
pub use error::{MmtError, Result};
pub use measure::{Atom, Cell, Interval, Measure, Piece, MASS_EPS, SUB_EPS};
pub use oracle::{
    discretize_target, solve_mot, solve_shadow_lp, value_gap, GapRow, LpInstance, MotSolution, ValueGap,
};
pub use peacock::{
    backward_determinism_score, build_chain, sample_paths, strassen_refine, ForwardKernel,
    KernelCell, PathMatrix, PeacockChain,
};
pub use shadow::{atom_shadow, shadow, shadow_ordered, ShadowOrder, ShadowResult, DEFAULT_RESOLUTION};
