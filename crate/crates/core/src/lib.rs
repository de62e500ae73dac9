//! Strong-coupling quantum thermometry: skew information, quantum Fisher
//! information, mean-force thermodynamics and the damped oscillator.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod oscillator;
pub mod quadrature;
pub mod random;
pub mod skew;
pub mod special;
pub mod thermo;
pub mod verify;

pub use error::{Error, Result};
pub use fisher::{ExponentialFamily, FnFamily, QfiReport, StateFamily};
pub use linalg::{ComplexMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition};
pub use skew::VariancePartition;
pub use oscillator::{OscillatorModel, OscillatorReport};
pub use thermo::{CompositeModel, MeanForce, ThermoReport, ThermoScalars};
