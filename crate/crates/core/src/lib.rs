//! Decoherent-histories analysis of quantum search.
//!
//! The crate evaluates the history branches of a search on N items in three
//! ways (exact propagation, the four-case closed formula and its large-N
//! simplification), assembles the decoherence functional, and implements
//! the δ-parameterized environment model whose search time moves from
//! O(√N) at δ = 1 to O(N) at δ = 0.
//!
//! ```
//! use dechist_core::{closed, params::DerivedQuantities};
//!
//! let d = DerivedQuantities::new(10_000, 10.0).unwrap();
//! assert_eq!(closed::grover_query_count(&d).unwrap(), 17);
//! ```

pub mod closed;
pub mod env;
pub mod error;
pub mod exact;
pub mod history;
pub mod params;
pub mod specfun;
pub mod sum;

pub use closed::{
    branch_amplitude_approx, branch_amplitude_closed, failure_amplitude, grover_query_count,
    phase_exponent, success_amplitude, CaseLabel, SFFactors,
};
pub use env::{
    evaluate_direct, normalization_closed, scaling_fit, search_time, success_probability_closed,
    success_probability_delta0, success_probability_delta1, DeltaModel, DeltaModelEvaluation,
    ScalingFit, SearchTime,
};
pub use error::{Error, Result};
pub use exact::{
    branch_amplitude_exact, decoherence_functional, gram_matrix, propagator_full,
    resummation_residual, step_unitary, BranchAmplitude, GramMatrix, Provenance, StepUnitary,
};
pub use history::{count_histories, decompose_streaks, History, StreakDecomposition};
pub use params::{derive_quantities, DerivedQuantities, ModelParams};
pub use specfun::{binomsq_powsum, legendre_p, log_binomial, ScaledReal};
