//! Brute-force nodal solution of the single-bus circuit.
//!
//! Deliberately written against raw `Complex64` and the topology accessors
//! only, so that it shares no arithmetic with the distribution-factor path.

use num_complex::Complex64;

use super::{GridTopology, ModuleMatrix, PowerReading, SystemState, SINGULAR_THRESHOLD};
use crate::error::{Error, Result};
use crate::phasor::Phasor;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub bus: Phasor,
    pub powers: ModuleMatrix<PowerReading>,
    /// Current flowing from string `i` into the bus.
    pub string_currents: Vec<Phasor>,
    /// Complex power of every module, unreduced.
    pub module_complex_power: ModuleMatrix<Phasor>,
    /// `|V_P|^2 Y_L^*`.
    pub load_power: Phasor,
    /// `|E_i - V_P|^2 Y_i^*` per string.
    pub line_losses: Vec<Phasor>,
}

/// Solves KCL at the bus, `sum_i (E_i - V_P) Y_i = V_P Y_L`, for `V_P` and
/// derives every current and power from it.
pub fn oracle_solve(topology: &GridTopology, state: &SystemState) -> Result<OracleSolution> {
    let (n, m) = (topology.n_strings(), topology.modules_per_string());
    if state.n_strings() != n || state.modules_per_string() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{m} state"),
            actual: format!("{}x{}", state.n_strings(), state.modules_per_string()),
        });
    }

    let voltages: Vec<Complex64> = (0..n * m)
        .map(|k| {
            let (i, j) = (k / m, k % m);
            let (v, d) = (state.amplitude[(i, j)], state.delta[(i, j)]);
            Complex64::new(v * d.cos(), v * d.sin())
        })
        .collect();
    let emf: Vec<Complex64> = voltages.chunks(m).map(|c| c.iter().sum()).collect();
    let lines: Vec<Complex64> = topology.string_admittance().iter().map(|y| y.to_complex()).collect();
    let load = topology.load_admittance().to_complex();

    let self_admittance: Complex64 = lines.iter().sum::<Complex64>() + load;
    if self_admittance.norm() < SINGULAR_THRESHOLD {
        return Err(Error::SingularNetwork {
            magnitude: self_admittance.norm(),
            threshold: SINGULAR_THRESHOLD,
        });
    }
    let injection: Complex64 = lines.iter().zip(&emf).map(|(y, e)| y * e).sum();
    let bus = injection / self_admittance;

    let currents: Vec<Complex64> = lines.iter().zip(&emf).map(|(y, e)| (e - bus) * y).collect();
    let complex_power: Vec<Complex64> = voltages
        .iter()
        .enumerate()
        .map(|(k, v)| v * currents[k / m].conj())
        .collect();
    let line_losses = lines
        .iter()
        .zip(&emf)
        .map(|(y, e)| Phasor::from_complex((e - bus).norm_sqr() * y.conj()))
        .collect();

    Ok(OracleSolution {
        bus: Phasor::from_complex(bus),
        powers: ModuleMatrix::from_vec(n, m, complex_power.iter().map(|s| PowerReading::new(s.re, s.im)).collect())?,
        string_currents: currents.into_iter().map(Phasor::from_complex).collect(),
        module_complex_power: ModuleMatrix::from_vec(n, m, complex_power.into_iter().map(Phasor::from_complex).collect())?,
        load_power: Phasor::from_complex(bus.norm_sqr() * load.conj()),
        line_losses,
    })
}
