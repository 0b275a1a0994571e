use serde::{Deserialize, Serialize};

use super::{GridTopology, ModuleMatrix, PowerReading, SINGULAR_THRESHOLD};
use crate::error::{Error, Result};
use crate::phasor::Admittance;

/// Reduced network for identical string lines: every distribution factor
/// collapses to `Y_eq = Y_line / (N Y_line + Y_L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualLineModel {
    pub y_line: Admittance,
    pub y_eq: Admittance,
}

impl EqualLineModel {
    pub fn new(y_line: Admittance, load: Admittance, n_strings: usize) -> Result<Self> {
        let total = y_line.to_complex() * n_strings as f64 + load.to_complex();
        if total.norm() < SINGULAR_THRESHOLD {
            return Err(Error::SingularNetwork {
                magnitude: total.norm(),
                threshold: SINGULAR_THRESHOLD,
            });
        }
        Ok(EqualLineModel {
            y_line,
            y_eq: Admittance::from_complex(y_line.to_complex() / total),
        })
    }

    /// Fails with [`Error::HeterogeneousLines`] unless all strings share one line.
    pub fn from_topology(topology: &GridTopology) -> Result<Self> {
        let line = topology.common_line()?;
        Self::new(line, topology.load_admittance(), topology.n_strings())
    }
}

/// Power of module `(i, j)` with equal lines and every amplitude at `v_ref`:
///
/// ```text
/// P_ij = V^2 |Y_line| ( sum_b cos(d_ij - d_ib - phi_line)
///                     - sum_a sum_b |Y_eq| cos(d_ij - d_ab - phi_eq - phi_line) )
/// ```
/// `Q_ij` likewise with `sin`, and the power factor angle is the
/// four-quadrant angle of the pair.
pub fn equal_line_power(
    model: &EqualLineModel,
    v_ref: f64,
    delta: &ModuleMatrix<f64>,
    i: usize,
    j: usize,
) -> Result<PowerReading> {
    let (n, m) = (delta.n_strings(), delta.modules_per_string());
    if i >= n || j >= m {
        return Err(Error::DimensionMismatch {
            expected: format!("module index within {n}x{m}"),
            actual: format!("({i}, {j})"),
        });
    }
    let (line_mag, line_ang) = (model.y_line.magnitude(), model.y_line.angle());
    let (eq_mag, eq_ang) = (model.y_eq.magnitude(), model.y_eq.angle());
    let d_ij = delta[(i, j)];

    let mut p_string = 0.0;
    let mut q_string = 0.0;
    for b in 0..m {
        let arg = d_ij - delta[(i, b)] - line_ang;
        p_string += arg.cos();
        q_string += arg.sin();
    }
    let mut p_bus = 0.0;
    let mut q_bus = 0.0;
    for a in 0..n {
        for b in 0..m {
            let arg = d_ij - delta[(a, b)] - eq_ang - line_ang;
            p_bus += eq_mag * arg.cos();
            q_bus += eq_mag * arg.sin();
        }
    }
    let scale = v_ref * v_ref * line_mag;
    Ok(PowerReading::new(
        scale * (p_string - p_bus),
        scale * (q_string - q_bus),
    ))
}
