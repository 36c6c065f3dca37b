//! Multilevel simulation and calibration toolkit for a four-junction
//! capacitively shunted flux qubit (CSFQ): circuit Hamiltonians, Ising
//! mapping, anneal paths with junction-asymmetry correction, closed- and
//! open-system dynamics, persistent-current readout and the calibration
//! experiments built on top of them.

pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod ising;
pub mod linalg;
pub mod path;
pub mod readout;
pub mod units;

pub use circuit::{CircuitModel, CircuitParams, FluxPoint, Model};
pub use error::{Error, Result};
pub use linalg::{Basis, OperatorMatrix, Spectrum};
pub use units::PhysicalConstants;
