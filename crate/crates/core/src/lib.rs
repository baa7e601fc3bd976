//! Isotropic steady states of the gravitational Vlasov-Poisson system built
//! from an energy-Casimir variational principle, their energy functionals and
//! scaling laws, and particle simulations that probe their nonlinear
//! stability.

pub mod casimir;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod numerics;
pub mod stability;
pub mod steadystate;

pub use casimir::{CasimirKind, CasimirModel, EnergyCutoff, IsotropicDf, Moment, TabulatedQ, ValidationReport};
pub use error::{Error, Result};
pub use steadystate::{GridControl, ScalingTransform, SteadyStateProfile};
pub use dynamics::{Backend, IntegratorConfig, ParticleEnsemble};
pub use functionals::FunctionalReport;
pub use stability::{PerturbationSpec, StabilityTimeSeries};
