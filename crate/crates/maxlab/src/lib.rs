//! A numerical laboratory for lower bounds of maximal-function operators.
//!
//! The crate builds discrete models of the classical maximal operators —
//! centered, uncentered, the lambda-interpolated family between them, dyadic,
//! and the one-sided operator on the line — and verifies quantitatively that
//! they *increase* L^p norms: `||Mf||_p >= A ||f||_p` with explicit constants
//! `A > 1`. Everything is built on exact integrals of step functions, so
//! observed ratios and inequality margins carry no quadrature noise beyond
//! floating-point rounding.
//!
//! The main entry points:
//!
//! * [`grid`] — step functions on uniform grids, exact box integrals
//!   ([`grid::SummedTable`]), body averages, and the `.ggrid` text format.
//! * [`operators`] — maximal fields: the lambda family over boxes and balls,
//!   the dyadic operator, the one-sided operator, and norm-ratio reports.
//! * [`bellman`] — the Bellman function certifying the dyadic lower bound,
//!   its chord and main inequalities, and per-node certificates on
//!   partition trees.
//! * [`partition`] — density-controlled filtrations: splitting boxes so that
//!   child averages stay within a factor lambda of the parent.
//! * [`covering`] — level families, a greedy disjoint subfamily extractor,
//!   overlap functions, and the layer-cake route to lower bounds.
//! * [`search`] — simulated annealing over grid functions to hunt for
//!   extremal norm ratios, plus analytic baselines.
//!
//! Run `cargo run --example uncentered_sharpness` (or any other example) for
//! a guided tour; the `maxlab` binary exposes the same capabilities as
//! subcommands.

pub mod bellman;
pub mod body;
pub mod builtins;
pub mod covering;
pub mod error;
pub mod grid;
pub mod operators;
pub mod partition;
pub mod search;

pub use bellman::{bellman_eval, theorem_constants, BellmanPoint, TheoremConstants};
pub use builtins::builtin;
pub use covering::{
    besicovitch_extract, build_psi, dichotomy_check, layer_cake_report, level_family,
    stein_check, LevelSetCover, Verdict,
};
pub use body::{BodyKind, BodySpec};
pub use error::{Error, Result};
pub use grid::{body_average, GridFunction, SummedTable};
pub use operators::{MaximalField, Mode, OperatorSpec};
pub use partition::{build_filtration, split_box, verify_density, AxisBox, FiltrationTree};
pub use search::{
    almost_centered_bound, grafakos_check, minimize_ratio, ratio, RatioOperator, RatioReport,
    SearchOutcome,
};
