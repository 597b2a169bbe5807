//! Two-photon polarisation entanglement from a biexciton cascade: state
//! model, detector-level simulation, coincidence counting, twelve-setting
//! tomography and entanglement tests.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod coincidence;
pub mod density;
pub mod eigen;
pub mod error;
pub mod eventio;
pub mod events;
pub mod metrics;
pub mod polarization;
pub mod tomography;

pub use density::{bell_phi, werner, DensityMatrix};
pub use eigen::{eigh4, Eigen4};
pub use error::{Error, Result};
pub use metrics::{MetricValues, TestTable};
pub use polarization::{
    hwp_rotate, make_pol, partial_transpose, projector, tensor, MeasurementSetting, Operator2,
    Operator4, PolLabel, PolVector, Subsystem, XBasis,
};
pub use tomography::{TomographyInput, TomographyResult};
