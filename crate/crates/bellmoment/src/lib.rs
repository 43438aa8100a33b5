//! Moment-based tests of local realism for two observers: inequality
//! evaluation on second-second order moment tables, exact quantum
//! scenarios, weak-measurement Monte Carlo, an explicit local
//! hidden-variable construction, a positive non-SOS witness polynomial,
//! and derivative-free violation search.

pub mod consts;
pub mod eigen;
pub mod error;
pub mod inequalities;
pub mod lhv;
pub mod matrix;
pub mod quantum;
pub mod scenarios;
pub mod search;
pub mod sospoly;
pub mod table;
pub mod weakmeas;

pub use error::{Error, Result};
pub use inequalities::{
    cfrd_coeffs, eval_cfrd, eval_in33, eval_in33_clamped, eval_in33r, eval_in33r_clamped,
    eval_ine22, eval_ine22_clamped, eval_salles_class, normalize_salles_coeffs, InequalityReport,
};
pub use lhv::{build_lhv, lhv_moments, max_moment_discrepancy, sample_lhv, LhvModel};
pub use matrix::{tensor, ComplexMatrix};
pub use quantum::{expectation, moment, schmidt, BipartiteState, Observable, Party};
pub use scenarios::{
    bell_three_choices, equatorial_projector, sweep_ine22, tilted_coefficients,
    tilted_two_choices, BipartiteScenario, SweepPoint,
};
pub use search::{multi_start, nelder_mead, objective, NmOptions, SearchResult, SearchSpace};
pub use sospoly::{eval_w, min_w, non_sos_certificate, quantum_avg_w, PolyPoint};
pub use table::MomentTable;
pub use weakmeas::{table_from_weak, Scheme, WeakConfig, WeakTable};
