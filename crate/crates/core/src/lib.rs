//! Numerical toolkit for product-formula (Trotter) simulation of a single
//! particle hopping on a finite chain.
//!
//! The crate is generic over the real scalar type; [`f64`] is the working
//! precision and is what the aliases at the bottom of this file pin.

pub mod chain;
pub mod numeric;
pub mod operator;
pub mod rabi;
pub mod scalar;
pub mod semiclassics;
pub mod special;
pub mod spectral;
pub mod trotter;

pub use scalar::{lit, Cplx, Real};

pub type ChainSpec = chain::ChainSpec<f64>;
pub type PotentialFamily = chain::PotentialFamily<f64>;
pub type SmoothPotential = chain::SmoothPotential<f64>;
pub type DenseOperator = operator::DenseOperator<f64>;
pub type TrotterPlan = trotter::TrotterPlan<f64>;
pub type Ordering = trotter::Ordering<f64>;
pub type StepCircuit = trotter::StepCircuit<f64>;
pub type EffectiveHamiltonian = trotter::EffectiveHamiltonian<f64>;
pub type SpectrumReport = spectral::SpectrumReport<f64>;
pub type DoubletReport = spectral::DoubletReport<f64>;
pub type PhaseSpaceModel = semiclassics::PhaseSpaceModel<f64>;
pub type LevelPrediction = semiclassics::LevelPrediction<f64>;
pub type ExperimentConfig = rabi::ExperimentConfig<f64>;
pub type RabiTrace = rabi::RabiTrace<f64>;
