//! Brute-force linear programs used to validate the constructions on small
//! grids.

mod mot;
pub mod simplex;

pub use mot::{
    discretize_target, solve_mot, solve_shadow_lp, value_gap, GapRow, LpInstance, MotSolution, ValueGap,
    MAX_SHADOW_POINTS, MAX_X_POINTS, MAX_Y_POINTS,
};
pub use simplex::Certificate;
