//! Predictions, simulations and analysis tools for interferometric tests of
//! whether photon absorption and emission suppress quantum superposition.
//!
//! Two hypotheses are compared throughout:
//!
//! * [`Hypothesis::Pos`]: superposition survives, and a tuned interferometer sends
//!   every particle to the same counter.
//! * [`Hypothesis::Ccqi`]: absorbing or emitting a photon localises the particle
//!   to one arm, so it reaches either counter with probability 1/2.
//!
//! The decay experiment also admits [`Hypothesis::ModifiedRate`], in which
//! superposition survives but the decay rate inside the interferometer changes.

pub mod error;
pub mod fringes;
pub mod model;
pub mod montecarlo;
pub mod predict;
pub mod sectors;
pub mod stats;

pub use error::{Error, Result};
pub use fringes::{
    calibration_patterns, coherent_pattern, incoherent_pattern, locate_maxima, FringeGeometry,
    FringeProfile,
};
pub use model::{
    purity_time_offset, survival_fraction, CountTable, DecayParams, ExcitationParams, Experiment,
    ExperimentParams, Hypothesis, PhotonCountTable, PhotonParams,
};
pub use montecarlo::{simulate_decay, simulate_excitation, simulate_photon, SimConfig};
pub use predict::{predict_decay, predict_excitation, predict_photon};
pub use sectors::{
    is_valid_observable, purity, sector_matrix_element, superselect, DensityMatrix,
    SectorObservable, SectorSpace, StateVector,
};
pub use stats::{
    build_model, discriminate, log_likelihood, min_sample_size, min_sample_size_simulated,
    CategoryLayout, CategoryModel, Counts, Decision, DiscriminationReport, SampleSizePlan,
    TestSettings,
};
