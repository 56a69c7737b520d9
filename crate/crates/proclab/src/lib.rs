//! proclab: a numerical laboratory for multitime quantum processes.
//!
//! The crate builds process tensors for exactly diagonalizable
//! system-environment Hamiltonians, their dephased equilibrium counterparts,
//! and everything needed to compare the two: multitime instrument
//! statistics, finite-time-averaged deviations (analytic and by quadrature),
//! operational diamond distances over finite instrument sets, and the
//! right-hand sides of the corresponding equilibration bounds.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the
//! `proclab` binary for batch verification campaigns.

pub mod bounds;
pub mod channels;
pub mod comb;
pub mod distance;
pub mod error;
pub mod linalg;
pub mod process;
pub mod spectral;
pub mod timeavg;

pub use bounds::{
    ck_rhs, conditions_check, diamond_bound_rhs, infinite_time_rhs, k2_rhs, k3_rhs,
    verify_general_term, BoundReport, GeneralTermPattern,
};
pub use channels::{ChoiMatrix, KrausMap, PovmElement};
pub use comb::{Leg, LegOp};
pub use distance::{
    classicality_defect, geometric_measure, operational_diamond, time_averaged_distance,
    CandidateSet,
};
pub use error::{Error, Result};
pub use linalg::{C64, CMat};
pub use process::{
    build_equilibrium, build_process, build_tester, d_eff_min, effective_dimension, expectation,
    intermediate_state, sequential_expectation, InstrumentChain, InstrumentSet, ProcessTensor,
    Tester, TesterRecipe,
};
pub use spectral::{diagonalize, gap_census, GapCensus, Hamiltonian, Spectrum};
pub use timeavg::{
    analytic_second_moment, build_g_tensors, g_factor, g_norm, phase_average,
    quadrature_second_moment, s_factor, GTensors, TimeWindows,
};
