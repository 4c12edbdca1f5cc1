//! Position-optimization games.
//!
//! `n` players each pick a position; every weighted target goes to the
//! players closest to it, split evenly on ties. This crate builds such
//! games, projects targets onto their closest positions, constructs and
//! checks pure equilibria, and analyses symmetric mixed equilibria.
//!
//! ```
//! use posopt_core::{generate_pure, project, verify_pure, GameDefinition};
//!
//! let game = GameDefinition::separated(&[0.3, 0.7]).unwrap();
//! let ps = project(&game).unwrap();
//! let counts = generate_pure(&ps, 7).unwrap();
//! assert_eq!(counts.0, vec![2, 5]);
//!
//! let report = verify_pure(&game, &counts.profile(&ps), &ps.pseudo_targets).unwrap();
//! assert!(report.is_equilibrium);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod error;
pub mod format;
pub mod game;
pub mod instances;
pub mod mixed;
pub mod projection;
pub mod pure;
pub mod repro;

pub use error::{Error, Result};
pub use format::{game_to_json, parse_game, GameFile};
pub use game::{
    counts, pure_utilities, win_shares, Counts, Edge, GameDefinition, Metric, Position, PureProfile, Space, Target,
    UtilityVector, WinShareVector,
};
pub use instances::{build, deviation_grid, InstanceSpec};
pub use mixed::{
    big_g, big_g_inverse, check_mixed_bounds, coverage_probability, e1_direct_sum, exact_symmetric_utility, fig6_curve,
    g_lower, gbar, mc_symmetric_utility, solve_two_point, CoverageMode, Estimate, MixedReport, MixedStrategy,
};
pub use projection::{project, PseudoSpace};
pub use pure::{
    best_response_dynamics, check_pure_theorems, empirical_distribution, enumerate_pure_equilibria, generate_pure,
    kl_bound, kl_divergence, verify_pure, CountVector, EquilibriumReport, MoveRule,
};
