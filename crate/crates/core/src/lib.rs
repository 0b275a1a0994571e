//! Phasor-domain model of N parallel strings of M series inverter modules
//! sharing one AC bus, driven by a decentralized droop law that mixes
//! active-power droop with power-factor-angle droop.
//!
//! * [`phasor`]: polar/rectangular complex values.
//! * [`network`]: bus voltage and per-module power, with a brute-force
//!   nodal oracle and the equal-line reduced form.
//! * [`droop`]: the per-module frequency law.
//! * [`dynamics`]: RK4 integration of the phase dynamics and synchronization
//!   detection.
//! * [`stability`]: linearized system matrix, closed-form spectrum and the
//!   stability predicate, cross-checked numerically.

pub mod droop;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod phasor;
pub mod stability;

pub use droop::{droop_frequency, frequency_deviation, voltage_reference, DroopParams};
pub use dynamics::{initial_state, integrate, rhs, synchronization_metric, Frame, SimConfig, Trajectory};
pub use error::{Error, Result};
pub use network::{
    bus_voltage, distribution_factors, equal_line_power, module_power, module_powers, oracle_solve,
    DistributionFactors, EqualLineModel, GridTopology, ModuleMatrix, OracleSolution, PowerReading,
    SystemState,
};
pub use phasor::{Admittance, Phasor};
pub use stability::{
    analyze, build_system_matrix, closed_form_spectrum, eta_coefficients, numerical_linearization,
    numerical_spectrum, stability_verdict, EtaCoefficients, LaplacianPair, StabilityReport,
    StabilityVerdict, SystemMatrix,
};
