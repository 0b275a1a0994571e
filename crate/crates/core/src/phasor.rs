//! Polar phasor and admittance values.
//!
//! Everything is stored in rectangular form and converted to polar only at
//! the API boundary. Products, sums and conjugates therefore never touch a
//! trigonometric function, and angle wrapping is confined to [`Phasor::angle`].

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the passive-branch angle bound `[-pi/2, pi/2]`.
const PASSIVE_ANGLE_SLACK: f64 = 1e-12;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Difference `a - b` reduced modulo 2pi into `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

fn canonical_arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// A voltage, current or power phasor `|X| e^{j angle}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "PolarRepr", into = "PolarRepr")]
pub struct Phasor(Complex64);

#[derive(Serialize, Deserialize)]
struct PolarRepr {
    magnitude: f64,
    angle: f64,
}

impl From<PolarRepr> for Phasor {
    fn from(p: PolarRepr) -> Self {
        Phasor::from_polar(p.magnitude, p.angle)
    }
}

impl From<Phasor> for PolarRepr {
    fn from(p: Phasor) -> Self {
        PolarRepr {
            magnitude: p.magnitude(),
            angle: p.angle(),
        }
    }
}

impl Phasor {
    pub const ZERO: Phasor = Phasor(Complex64::new(0.0, 0.0));
    pub const ONE: Phasor = Phasor(Complex64::new(1.0, 0.0));

    /// Builds `magnitude ∠ angle`. A negative magnitude is folded into the
    /// angle so the stored magnitude is never negative.
    pub fn from_polar(magnitude: f64, angle: f64) -> Self {
        Phasor(Complex64::from_polar(magnitude, angle))
    }

    pub fn from_rect(re: f64, im: f64) -> Self {
        Phasor(Complex64::new(re, im))
    }

    pub fn from_complex(z: Complex64) -> Self {
        Phasor(z)
    }

    pub fn to_complex(self) -> Complex64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }

    /// Angle in `(-pi, pi]`; exactly 0 for a zero phasor.
    pub fn angle(self) -> f64 {
        canonical_arg(self.0)
    }

    pub fn conjugate(self) -> Self {
        Phasor(self.0.conj())
    }

    /// Approximate equality on the complex plane. Angles are compared
    /// modulo 2pi and ignored for zero-magnitude values.
    pub fn approx_eq(self, other: Phasor, tol: f64) -> bool {
        (self.0 - other.0).norm() <= tol
    }
}

impl Mul for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 * rhs.0)
    }
}

impl Mul<Admittance> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: Admittance) -> Phasor {
        Phasor(self.0 * rhs.0)
    }
}

impl Mul<f64> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: f64) -> Phasor {
        Phasor(self.0 * rhs)
    }
}

impl Add for Phasor {
    type Output = Phasor;
    fn add(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 + rhs.0)
    }
}

impl Sub for Phasor {
    type Output = Phasor;
    fn sub(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 - rhs.0)
    }
}

impl Neg for Phasor {
    type Output = Phasor;
    fn neg(self) -> Phasor {
        Phasor(-self.0)
    }
}

impl Sum for Phasor {
    fn sum<I: Iterator<Item = Phasor>>(iter: I) -> Phasor {
        Phasor(iter.map(|p| p.0).sum())
    }
}

impl<'a> Sum<&'a Phasor> for Phasor {
    fn sum<I: Iterator<Item = &'a Phasor>>(iter: I) -> Phasor {
        iter.copied().sum()
    }
}

/// Product of two phasors: magnitudes multiply, angles add.
pub fn multiply(a: impl Into<Phasor>, b: impl Into<Phasor>) -> Phasor {
    a.into() * b.into()
}

pub fn conjugate(a: Phasor) -> Phasor {
    a.conjugate()
}

/// Rectangular sum of a list of phasors.
pub fn sum<'a>(items: impl IntoIterator<Item = &'a Phasor>) -> Phasor {
    items.into_iter().sum()
}

/// Branch or load admittance `|Y| e^{j phi}`.
///
/// Constructors accept any finite value; [`Admittance::validate_passive`] is
/// applied by the topology so that a passive RL/RC branch always has a
/// nonnegative conductance (angle within `[-pi/2, pi/2]`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "PolarRepr", into = "PolarRepr")]
pub struct Admittance(Complex64);

impl From<PolarRepr> for Admittance {
    fn from(p: PolarRepr) -> Self {
        Admittance::from_polar(p.magnitude, p.angle)
    }
}

impl From<Admittance> for PolarRepr {
    fn from(y: Admittance) -> Self {
        PolarRepr {
            magnitude: y.magnitude(),
            angle: y.angle(),
        }
    }
}

impl From<Admittance> for Phasor {
    fn from(y: Admittance) -> Self {
        Phasor(y.0)
    }
}

impl Admittance {
    pub const ZERO: Admittance = Admittance(Complex64::new(0.0, 0.0));

    pub fn from_polar(magnitude: f64, angle: f64) -> Self {
        Admittance(Complex64::from_polar(magnitude, angle))
    }

    /// Conductance `g` and susceptance `b`.
    pub fn from_rect(g: f64, b: f64) -> Self {
        Admittance(Complex64::new(g, b))
    }

    pub fn from_complex(z: Complex64) -> Self {
        Admittance(z)
    }

    pub fn to_complex(self) -> Complex64 {
        self.0
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }

    pub fn angle(self) -> f64 {
        canonical_arg(self.0)
    }

    pub fn conductance(self) -> f64 {
        self.0.re
    }

    pub fn susceptance(self) -> f64 {
        self.0.im
    }

    pub fn approx_eq(self, other: Admittance, tol: f64) -> bool {
        (self.0 - other.0).norm() <= tol
    }

    /// Rejects non-finite values and branches whose angle falls outside
    /// `[-pi/2, pi/2]`.
    pub fn validate_passive(self, what: &str) -> Result<Self> {
        if !self.0.re.is_finite() || !self.0.im.is_finite() {
            return Err(Error::invalid(format!("{what}: admittance must be finite")));
        }
        if self.magnitude() > 0.0 && self.angle().abs() > FRAC_PI_2 + PASSIVE_ANGLE_SLACK {
            return Err(Error::invalid(format!(
                "{what}: admittance angle {:.6} rad lies outside [-pi/2, pi/2] (not a passive branch)",
                self.angle()
            )));
        }
        Ok(self)
    }
}

impl Add for Admittance {
    type Output = Admittance;
    fn add(self, rhs: Admittance) -> Admittance {
        Admittance(self.0 + rhs.0)
    }
}

impl Mul<Phasor> for Admittance {
    type Output = Phasor;
    fn mul(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 * rhs.0)
    }
}

impl Mul for Admittance {
    type Output = Phasor;
    fn mul(self, rhs: Admittance) -> Phasor {
        Phasor(self.0 * rhs.0)
    }
}

impl Sum for Admittance {
    fn sum<I: Iterator<Item = Admittance>>(iter: I) -> Admittance {
        Admittance(iter.map(|y| y.0).sum())
    }
}

impl<'a> Sum<&'a Admittance> for Admittance {
    fn sum<I: Iterator<Item = &'a Admittance>>(iter: I) -> Admittance {
        iter.copied().sum()
    }
}
