//! Small-signal stability of the equal-angle equilibrium.
//!
//! Around `delta_ij = delta_s` the linearized dynamics are
//! `d(delta~)/dt = A delta~` with
//!
//! ```text
//! A   = m A_p + k_phi A_phi
//! A_p = eta_p1 L1 + eta_p2 L2,   A_phi = eta_phi1 L1 + eta_phi2 L2
//! L1  = NM I - 1                 (all-to-all Laplacian)
//! L2  = I_N (x) (M I_M - 1_M)    (one all-to-all block per string)
//! ```
//!
//! `L1` and `L2` commute, so the spectrum is available in closed form:
//! `0` once, `MN eta_1` (N-1 times) and `M (N eta_1 + eta_2)` (N(M-1) times),
//! where `eta_1 = m eta_p1 + k_phi eta_phi1` and `eta_2 = m eta_p2 + k_phi eta_phi2`.
//! The equilibrium is stable iff `lambda_p = eta_1 < 0` and
//! `lambda_c = N eta_1 + eta_2 < 0`.
//!
//! The analytic matrix is cross-checked against a dense symmetric eigensolver
//! and against a finite-difference Jacobian of the nonlinear dynamics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::droop::DroopParams;
use crate::dynamics::{rhs, Frame};
use crate::error::{Error, Result};
use crate::network::{EqualLineModel, GridTopology, SystemState};

/// Guard on the power-factor-angle sensitivity denominator.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-12;
/// Central-difference step for [`numerical_linearization`], rad.
pub const FD_STEP: f64 = 1e-7;
/// Largest rotating-frame frequency spread accepted as an equilibrium, rad/s.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
/// Closed-form and numerical eigenvalues must agree within this relative
/// tolerance...
pub const SPECTRUM_REL_TOL: f64 = 1e-9;
/// ...or this absolute one, whichever is larger (relevant near zero).
pub const SPECTRUM_ABS_TOL: f64 = 1e-12;

/// Sensitivities of module power and power factor angle to phase
/// perturbations at the equal-angle equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaCoefficients {
    pub eta_p1: f64,
    pub eta_p2: f64,
    pub eta_phi1: f64,
    pub eta_phi2: f64,
}

impl EtaCoefficients {
    /// `eta_1 = m eta_p1 + k_phi eta_phi1`.
    pub fn eta_1(&self, m: f64, k_phi: f64) -> f64 {
        m * self.eta_p1 + k_phi * self.eta_phi1
    }

    /// `eta_2 = m eta_p2 + k_phi eta_phi2`.
    pub fn eta_2(&self, m: f64, k_phi: f64) -> f64 {
        m * self.eta_p2 + k_phi * self.eta_phi2
    }
}

/// `M + N^2 M |Y_eq|^2 - 2 N M |Y_eq| cos(phi_eq)`.
pub fn phi_denominator(model: &EqualLineModel, n_strings: usize, modules: usize) -> f64 {
    let n = n_strings as f64;
    let m = modules as f64;
    let (y, phi) = (model.y_eq.magnitude(), model.y_eq.angle());
    m + n * n * m * y * y - 2.0 * n * m * y * phi.cos()
}

pub fn eta_coefficients(
    model: &EqualLineModel,
    v_ref: f64,
    n_strings: usize,
    modules: usize,
) -> Result<EtaCoefficients> {
    let denominator = phi_denominator(model, n_strings, modules);
    if !(denominator > DENOMINATOR_THRESHOLD) {
        return Err(Error::DegenerateLinearization {
            denominator,
            threshold: DENOMINATOR_THRESHOLD,
        });
    }
    let n = n_strings as f64;
    let (line_mag, line_ang) = (model.y_line.magnitude(), model.y_line.angle());
    let (eq_mag, eq_ang) = (model.y_eq.magnitude(), model.y_eq.angle());
    let v2 = v_ref * v_ref;
    Ok(EtaCoefficients {
        eta_p1: v2 * line_mag * eq_mag * (eq_ang + line_ang).sin(),
        eta_p2: -v2 * line_mag * line_ang.sin(),
        eta_phi1: (eq_ang.cos() - n * eq_mag) * eq_mag / denominator,
        eta_phi2: (n * eq_mag * eq_ang.cos() - 1.0) / denominator,
    })
}

/// The two coupling graphs of the linearized network.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    /// `NM I - 1`: every module coupled to every other through the bus.
    pub l_global: DMatrix<f64>,
    /// Block-diagonal `M I_M - 1_M`: modules coupled within their string.
    pub l_string: DMatrix<f64>,
}

impl LaplacianPair {
    pub fn new(n_strings: usize, modules: usize) -> Self {
        let size = n_strings * modules;
        let l_global = DMatrix::from_fn(size, size, |r, c| {
            if r == c {
                size as f64 - 1.0
            } else {
                -1.0
            }
        });
        let l_string = DMatrix::from_fn(size, size, |r, c| {
            if r / modules != c / modules {
                0.0
            } else if r == c {
                modules as f64 - 1.0
            } else {
                -1.0
            }
        });
        LaplacianPair { l_global, l_string }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    pub a_p: DMatrix<f64>,
    pub a_phi: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

pub fn build_system_matrix(
    eta: &EtaCoefficients,
    m: f64,
    k_phi: f64,
    n_strings: usize,
    modules: usize,
) -> SystemMatrix {
    let laplacians = LaplacianPair::new(n_strings, modules);
    let a_p = &laplacians.l_global * eta.eta_p1 + &laplacians.l_string * eta.eta_p2;
    let a_phi = &laplacians.l_global * eta.eta_phi1 + &laplacians.l_string * eta.eta_phi2;
    let a = &a_p * m + &a_phi * k_phi;
    SystemMatrix { a_p, a_phi, a }
}

/// Closed-form eigenvalues of `A`, sorted ascending.
pub fn closed_form_spectrum(
    eta: &EtaCoefficients,
    m: f64,
    k_phi: f64,
    n_strings: usize,
    modules: usize,
) -> Vec<f64> {
    let n = n_strings as f64;
    let mm = modules as f64;
    let eta_1 = eta.eta_1(m, k_phi);
    let eta_2 = eta.eta_2(m, k_phi);
    let mut spectrum = Vec::with_capacity(n_strings * modules);
    spectrum.push(0.0);
    spectrum.extend(std::iter::repeat_n(mm * n * eta_1, n_strings - 1));
    spectrum.extend(std::iter::repeat_n(mm * (n * eta_1 + eta_2), n_strings * (modules - 1)));
    spectrum.sort_by(f64::total_cmp);
    spectrum
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn numerical_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Largest elementwise gap between two sorted spectra, and whether every
/// pair is within `max(SPECTRUM_REL_TOL * |x|, SPECTRUM_ABS_TOL)`.
pub fn compare_spectra(a: &[f64], b: &[f64]) -> (f64, bool) {
    if a.len() != b.len() {
        return (f64::INFINITY, false);
    }
    let mut worst = 0.0f64;
    let mut agree = true;
    for (x, y) in a.iter().zip(b) {
        let gap = (x - y).abs();
        worst = worst.max(gap);
        if gap > (SPECTRUM_REL_TOL * x.abs().max(y.abs())).max(SPECTRUM_ABS_TOL) {
            agree = false;
        }
    }
    (worst, agree)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub stable: bool,
}

pub fn stability_verdict(eta: &EtaCoefficients, m: f64, k_phi: f64, n_strings: usize) -> StabilityVerdict {
    let n = n_strings as f64;
    let lambda_p = m * eta.eta_p1 + k_phi * eta.eta_phi1;
    let lambda_c = m * (n * eta.eta_p1 + eta.eta_p2) + k_phi * (n * eta.eta_phi1 + eta.eta_phi2);
    StabilityVerdict {
        lambda_p,
        lambda_c,
        stable: lambda_p < 0.0 && lambda_c < 0.0,
    }
}

/// Central-difference Jacobian of the rotating-frame dynamics at an
/// equal-angle equilibrium.
pub fn numerical_linearization(
    topology: &GridTopology,
    params: &DroopParams,
    equilibrium: &SystemState,
) -> Result<DMatrix<f64>> {
    let base = rhs(topology, params, equilibrium, Frame::RotatingAtOmegaStar)?;
    let (lo, hi) = base
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    if hi - lo > EQUILIBRIUM_TOL {
        return Err(Error::NotAnEquilibrium {
            spread: hi - lo,
            threshold: EQUILIBRIUM_TOL,
        });
    }

    let size = topology.n_modules();
    let mut jacobian = DMatrix::zeros(size, size);
    let mut probe = equilibrium.clone();
    for col in 0..size {
        let centre = equilibrium.delta.as_slice()[col];
        probe.delta.as_mut_slice()[col] = centre + FD_STEP;
        let plus = rhs(topology, params, &probe, Frame::RotatingAtOmegaStar)?;
        probe.delta.as_mut_slice()[col] = centre - FD_STEP;
        let minus = rhs(topology, params, &probe, Frame::RotatingAtOmegaStar)?;
        probe.delta.as_mut_slice()[col] = centre;
        for (row, (p, q)) in plus.iter().zip(minus.iter()).enumerate() {
            jacobian[(row, col)] = (p - q) / (2.0 * FD_STEP);
        }
    }
    Ok(jacobian)
}

/// `max|a - b| / max|a|`, the matrix-level relative error.
pub fn relative_matrix_error(reference: &DMatrix<f64>, other: &DMatrix<f64>) -> f64 {
    let scale = reference.amax();
    let diff = (reference - other).amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest entry of `A 1`; zero in exact arithmetic.
pub fn zero_mode_residual(a: &DMatrix<f64>) -> f64 {
    (a * DVector::from_element(a.ncols(), 1.0)).amax()
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub n_strings: usize,
    pub modules_per_string: usize,
    pub eta: EtaCoefficients,
    pub eta_1: f64,
    pub eta_2: f64,
    pub closed_form_spectrum: Vec<f64>,
    pub numerical_spectrum: Vec<f64>,
    pub max_spectrum_discrepancy: f64,
    pub spectra_agree: bool,
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub stable: bool,
    #[serde(skip)]
    pub system_matrix: SystemMatrix,
}

/// Full analysis of an equal-line topology under the given droop gains.
pub fn analyze(topology: &GridTopology, params: &DroopParams) -> Result<StabilityReport> {
    let (n, m) = (topology.n_strings(), topology.modules_per_string());
    let model = EqualLineModel::from_topology(topology)?;
    let eta = eta_coefficients(&model, params.v_ref, n, m)?;
    let system_matrix = build_system_matrix(&eta, params.m, params.k_phi, n, m);
    let closed = closed_form_spectrum(&eta, params.m, params.k_phi, n, m);
    let numerical = numerical_spectrum(&system_matrix.a);
    let (max_spectrum_discrepancy, spectra_agree) = compare_spectra(&closed, &numerical);
    let verdict = stability_verdict(&eta, params.m, params.k_phi, n);
    Ok(StabilityReport {
        n_strings: n,
        modules_per_string: m,
        eta,
        eta_1: eta.eta_1(params.m, params.k_phi),
        eta_2: eta.eta_2(params.m, params.k_phi),
        closed_form_spectrum: closed,
        numerical_spectrum: numerical,
        max_spectrum_discrepancy,
        spectra_agree,
        lambda_p: verdict.lambda_p,
        lambda_c: verdict.lambda_c,
        stable: verdict.stable,
        system_matrix,
    })
}
