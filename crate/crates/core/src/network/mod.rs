//! Electrical coupling of an N-string by M-module series-parallel network
//! feeding a single AC bus.
//!
//! Each string `i` is a series stack of M voltage sources with EMF
//! `E_i = sum_b V_ib e^{j delta_ib}` behind a line admittance `Y_i`. All
//! strings meet at the bus, which also carries the load `Y_L`. Every module
//! in a string carries the same string current `I_i = (E_i - V_P) Y_i`.
//!
//! Three independent evaluation paths are provided:
//!
//! * [`module_power`]: the trigonometric expansion of the per-module power,
//!   valid for arbitrary per-string admittances and amplitudes.
//! * [`module_powers`]: the compact complex form `V_ij e^{j delta_ij} ((E_i - V_P) Y_i)^*`
//!   for every module at once, in O(NM). This is what the dynamics use.
//! * [`oracle_solve`]: a direct nodal solution of the circuit, used only to
//!   cross-check the other two.
//!
//! [`equal_line_power`] is the reduced form for identical string lines.

mod equal_line;
mod oracle;

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{Admittance, Phasor};

pub use equal_line::{equal_line_power, EqualLineModel};
pub use oracle::{oracle_solve, OracleSolution};

/// Below this total admittance magnitude the bus voltage is undefined.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Apparent power (per-unit) below which the power factor angle is taken as
/// 0 and the reading is flagged degenerate.
pub const S_EPSILON: f64 = 1e-9;

/// Dense row-major N x M matrix indexed by `(string, module)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMatrix<T> {
    n_strings: usize,
    modules_per_string: usize,
    data: Vec<T>,
}

impl<T> ModuleMatrix<T> {
    pub fn from_vec(n_strings: usize, modules_per_string: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_strings * modules_per_string {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries ({n_strings}x{modules_per_string})", n_strings * modules_per_string),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(ModuleMatrix {
            n_strings,
            modules_per_string,
            data,
        })
    }

    pub fn from_fn(
        n_strings: usize,
        modules_per_string: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(n_strings * modules_per_string);
        for i in 0..n_strings {
            for j in 0..modules_per_string {
                data.push(f(i, j));
            }
        }
        ModuleMatrix {
            n_strings,
            modules_per_string,
            data,
        }
    }

    pub fn n_strings(&self) -> usize {
        self.n_strings
    }

    pub fn modules_per_string(&self) -> usize {
        self.modules_per_string
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Entries of string `i`.
    pub fn row(&self, i: usize) -> &[T] {
        let m = self.modules_per_string;
        &self.data[i * m..(i + 1) * m]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> ModuleMatrix<U> {
        ModuleMatrix {
            n_strings: self.n_strings,
            modules_per_string: self.modules_per_string,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for ModuleMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        assert!(j < self.modules_per_string, "module index {j} out of range");
        &self.data[i * self.modules_per_string + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ModuleMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        assert!(j < self.modules_per_string, "module index {j} out of range");
        &mut self.data[i * self.modules_per_string + j]
    }
}

/// N parallel strings of M series modules, string line admittances `Y_i`
/// and a load admittance `Y_L` at the common bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTopology {
    n_strings: usize,
    modules_per_string: usize,
    string_admittance: Vec<Admittance>,
    load_admittance: Admittance,
}

impl GridTopology {
    pub fn new(
        modules_per_string: usize,
        string_admittance: Vec<Admittance>,
        load_admittance: Admittance,
    ) -> Result<Self> {
        let n_strings = string_admittance.len();
        if n_strings < 1 {
            return Err(Error::invalid("n_strings must be >= 1"));
        }
        if modules_per_string < 1 {
            return Err(Error::invalid("modules_per_string must be >= 1"));
        }
        for (i, y) in string_admittance.iter().enumerate() {
            y.validate_passive(&format!("string {} line", i + 1))?;
        }
        load_admittance.validate_passive("load")?;

        let topology = GridTopology {
            n_strings,
            modules_per_string,
            string_admittance,
            load_admittance,
        };
        let total = topology.total_admittance().magnitude();
        if total < SINGULAR_THRESHOLD {
            return Err(Error::SingularNetwork {
                magnitude: total,
                threshold: SINGULAR_THRESHOLD,
            });
        }
        Ok(topology)
    }

    /// Topology with every string on the same line admittance.
    pub fn equal_lines(
        n_strings: usize,
        modules_per_string: usize,
        line: Admittance,
        load: Admittance,
    ) -> Result<Self> {
        if n_strings < 1 {
            return Err(Error::invalid("n_strings must be >= 1"));
        }
        Self::new(modules_per_string, vec![line; n_strings], load)
    }

    pub fn n_strings(&self) -> usize {
        self.n_strings
    }

    pub fn modules_per_string(&self) -> usize {
        self.modules_per_string
    }

    pub fn n_modules(&self) -> usize {
        self.n_strings * self.modules_per_string
    }

    pub fn string_admittance(&self) -> &[Admittance] {
        &self.string_admittance
    }

    pub fn load_admittance(&self) -> Admittance {
        self.load_admittance
    }

    /// `sum_c Y_c + Y_L`.
    pub fn total_admittance(&self) -> Admittance {
        self.string_admittance.iter().sum::<Admittance>() + self.load_admittance
    }

    /// The shared line admittance, if all strings use the same one
    /// (bitwise equal after construction).
    pub fn common_line(&self) -> Result<Admittance> {
        let first = self.string_admittance[0];
        match self.string_admittance.iter().position(|&y| y != first) {
            None => Ok(first),
            Some(index) => Err(Error::HeterogeneousLines { index: index + 1 }),
        }
    }

    /// Same topology with strings reordered: new string `k` is old string
    /// `order[k]`.
    pub fn permute_strings(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_strings {
            return Err(Error::DimensionMismatch {
                expected: format!("{} string indices", self.n_strings),
                actual: format!("{}", order.len()),
            });
        }
        let lines = order.iter().map(|&k| self.string_admittance[k]).collect();
        Self::new(self.modules_per_string, lines, self.load_admittance)
    }

    fn check_state(&self, state: &SystemState) -> Result<()> {
        if state.n_strings() != self.n_strings || state.modules_per_string() != self.modules_per_string {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} state", self.n_strings, self.modules_per_string),
                actual: format!("{}x{}", state.n_strings(), state.modules_per_string()),
            });
        }
        Ok(())
    }
}

/// Phase angles `delta_ij` and amplitudes `V_ij` of every module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub delta: ModuleMatrix<f64>,
    pub amplitude: ModuleMatrix<f64>,
}

impl SystemState {
    pub fn new(delta: ModuleMatrix<f64>, amplitude: ModuleMatrix<f64>) -> Result<Self> {
        if delta.n_strings() != amplitude.n_strings()
            || delta.modules_per_string() != amplitude.modules_per_string()
        {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} amplitudes", delta.n_strings(), delta.modules_per_string()),
                actual: format!("{}x{}", amplitude.n_strings(), amplitude.modules_per_string()),
            });
        }
        Ok(SystemState { delta, amplitude })
    }

    /// All modules at amplitude `v_ref` with the given angles (row-major).
    pub fn with_angles(
        n_strings: usize,
        modules_per_string: usize,
        delta: Vec<f64>,
        v_ref: f64,
    ) -> Result<Self> {
        let delta = ModuleMatrix::from_vec(n_strings, modules_per_string, delta)?;
        let amplitude = ModuleMatrix::from_fn(n_strings, modules_per_string, |_, _| v_ref);
        Ok(SystemState { delta, amplitude })
    }

    /// Every module at angle 0 and amplitude `v_ref`.
    pub fn synchronized(n_strings: usize, modules_per_string: usize, v_ref: f64) -> Self {
        SystemState {
            delta: ModuleMatrix::from_fn(n_strings, modules_per_string, |_, _| 0.0),
            amplitude: ModuleMatrix::from_fn(n_strings, modules_per_string, |_, _| v_ref),
        }
    }

    pub fn n_strings(&self) -> usize {
        self.delta.n_strings()
    }

    pub fn modules_per_string(&self) -> usize {
        self.delta.modules_per_string()
    }

    /// Output voltage phasor `V_ij e^{j delta_ij}`.
    pub fn voltage(&self, i: usize, j: usize) -> Phasor {
        Phasor::from_polar(self.amplitude[(i, j)], self.delta[(i, j)])
    }

    /// String EMF `E_i = sum_b V_ib e^{j delta_ib}`.
    pub fn string_emf(&self, i: usize) -> Phasor {
        (0..self.modules_per_string()).map(|b| self.voltage(i, b)).sum()
    }
}

/// Distribution factors `Y'_a = Y_a / (sum_c Y_c + Y_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFactors {
    pub y_prime: Vec<Admittance>,
}

/// Active power, reactive power and power factor angle of one module.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerReading {
    pub p: f64,
    pub q: f64,
    /// Four-quadrant angle of `p + jq`.
    pub phi: f64,
    /// Apparent power below [`S_EPSILON`]; `phi` was forced to 0.
    pub degenerate: bool,
}

impl PowerReading {
    pub fn new(p: f64, q: f64) -> Self {
        if p.hypot(q) > S_EPSILON {
            PowerReading {
                p,
                q,
                phi: q.atan2(p),
                degenerate: false,
            }
        } else {
            PowerReading {
                p,
                q,
                phi: 0.0,
                degenerate: true,
            }
        }
    }

    pub fn from_complex(s: Phasor) -> Self {
        Self::new(s.re(), s.im())
    }

    pub fn apparent(&self) -> f64 {
        self.p.hypot(self.q)
    }
}

pub fn distribution_factors(topology: &GridTopology) -> Result<DistributionFactors> {
    let total = topology.total_admittance().to_complex();
    if total.norm() < SINGULAR_THRESHOLD {
        return Err(Error::SingularNetwork {
            magnitude: total.norm(),
            threshold: SINGULAR_THRESHOLD,
        });
    }
    let y_prime = topology
        .string_admittance()
        .iter()
        .map(|y| Admittance::from_complex(y.to_complex() / total))
        .collect();
    Ok(DistributionFactors { y_prime })
}

/// Bus voltage as the double sum `sum_a sum_b Y'_a V_ab e^{j delta_ab}`.
pub fn bus_voltage(topology: &GridTopology, state: &SystemState) -> Result<Phasor> {
    topology.check_state(state)?;
    let factors = distribution_factors(topology)?;
    Ok(bus_voltage_with(&factors, state))
}

fn bus_voltage_with(factors: &DistributionFactors, state: &SystemState) -> Phasor {
    let mut bus = Phasor::ZERO;
    for (a, &y) in factors.y_prime.iter().enumerate() {
        for b in 0..state.modules_per_string() {
            bus = bus + y * state.voltage(a, b);
        }
    }
    bus
}

fn check_index(topology: &GridTopology, i: usize, j: usize) -> Result<()> {
    if i >= topology.n_strings() || j >= topology.modules_per_string() {
        return Err(Error::DimensionMismatch {
            expected: format!(
                "module index within {}x{}",
                topology.n_strings(),
                topology.modules_per_string()
            ),
            actual: format!("({i}, {j})"),
        });
    }
    Ok(())
}

/// Power of module `(i, j)` from the real/imaginary trigonometric expansion.
///
/// ```text
/// P_ij = V_ij|Y_i| sum_b V_ib cos(d_ij - d_ib - phi_i)
///      - V_ij|Y_i| sum_a sum_b |Y'_a| V_ab cos(d_ij - d_ab - phi'_a - phi_i)
/// ```
/// and the same with `sin` for `Q_ij`. O(NM) per module.
pub fn module_power(
    topology: &GridTopology,
    state: &SystemState,
    i: usize,
    j: usize,
) -> Result<PowerReading> {
    topology.check_state(state)?;
    check_index(topology, i, j)?;
    let factors = distribution_factors(topology)?;

    let line = topology.string_admittance()[i];
    let (y_mag, y_ang) = (line.magnitude(), line.angle());
    let v_ij = state.amplitude[(i, j)];
    let d_ij = state.delta[(i, j)];

    let mut p_string = 0.0;
    let mut q_string = 0.0;
    for b in 0..state.modules_per_string() {
        let arg = d_ij - state.delta[(i, b)] - y_ang;
        let v = state.amplitude[(i, b)];
        p_string += v * arg.cos();
        q_string += v * arg.sin();
    }

    let mut p_bus = 0.0;
    let mut q_bus = 0.0;
    for (a, y_prime) in factors.y_prime.iter().enumerate() {
        let (yp_mag, yp_ang) = (y_prime.magnitude(), y_prime.angle());
        for b in 0..state.modules_per_string() {
            let arg = d_ij - state.delta[(a, b)] - yp_ang - y_ang;
            let w = yp_mag * state.amplitude[(a, b)];
            p_bus += w * arg.cos();
            q_bus += w * arg.sin();
        }
    }

    let scale = v_ij * y_mag;
    Ok(PowerReading::new(
        scale * (p_string - p_bus),
        scale * (q_string - q_bus),
    ))
}

/// Complex power of every module, `V_ij e^{j delta_ij} ((E_i - V_P) Y_i)^*`.
pub fn module_powers(topology: &GridTopology, state: &SystemState) -> Result<ModuleMatrix<PowerReading>> {
    topology.check_state(state)?;
    let factors = distribution_factors(topology)?;
    let bus = bus_voltage_with(&factors, state);
    let currents: Vec<Phasor> = topology
        .string_admittance()
        .iter()
        .enumerate()
        .map(|(i, &y)| (state.string_emf(i) - bus) * y)
        .collect();
    Ok(ModuleMatrix::from_fn(
        topology.n_strings(),
        topology.modules_per_string(),
        |i, j| PowerReading::from_complex(state.voltage(i, j) * currents[i].conjugate()),
    ))
}
