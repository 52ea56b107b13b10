//! Schrödinger dynamics on the line with a time-dependent point interaction,
//! solved through the Volterra equation for the charge `q(t) = alpha(t) u(t, 0)`.

pub mod acceptance;
pub mod charge;
pub mod constants;
pub mod coupling;
pub mod dyadic;
pub mod error;
pub mod fixtures;
pub mod oracles;
pub mod propagator;
pub mod quadrature;
pub mod regularity;
pub mod scalar;
pub mod signal;
pub mod wavefield;

pub use error::{LabError, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic types.
pub type Grid = signal::UniformGrid<f64>;
pub type Signal = signal::ComplexSignal<f64>;
pub type Coupling = coupling::CouplingPath<f64>;
pub type Charge = charge::ChargeSolution<f64>;
pub type Field = wavefield::WaveField<f64>;
pub type Partition = dyadic::DyadicPartition<f64>;
