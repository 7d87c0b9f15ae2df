//! Complex-amplitude and Jones-calculus primitives.
//!
//! A single photon inside one interferometer is described by two tagged
//! amplitudes: `h` on the horizontal basis state carrying the up-shifted
//! frequency `f₊`, and `v` on the vertical basis state carrying `f₋`. The
//! tag never moves between components. A polarizer projects both onto a
//! common axis but the two contributions stay separately addressable, which
//! is what the beat-note filter downstream relies on.
//!
//! Conventions:
//! - 50:50 beam splitters are symmetric with a factor `i` on reflection.
//! - Detunings are angular frequencies (rad/s), so a detuning `δf` held for
//!   a time `t` accumulates a phase `δf·t` with no `2π`.
//! - Polarizers absorb the orthogonal component; they do not rotate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Dimensionless complex field amplitude.
pub type ComplexAmp = Complex64;

const I: ComplexAmp = Complex64 { re: 0.0, im: 1.0 };

/// Amplitudes on the two polarization-frequency basis states of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JonesAmplitude {
    /// Amplitude on `|H⟩|f₊⟩`.
    pub h: ComplexAmp,
    /// Amplitude on `|V⟩|f₋⟩`.
    pub v: ComplexAmp,
}

impl JonesAmplitude {
    pub const ZERO: Self = Self {
        h: Complex64 { re: 0.0, im: 0.0 },
        v: Complex64 { re: 0.0, im: 0.0 },
    };

    pub const fn new(h: ComplexAmp, v: ComplexAmp) -> Self {
        Self { h, v }
    }

    pub fn real(h: f64, v: f64) -> Self {
        Self::new(ComplexAmp::new(h, 0.0), ComplexAmp::new(v, 0.0))
    }

    /// Pure horizontal input, as emitted by the laser.
    pub fn horizontal() -> Self {
        Self::real(1.0, 0.0)
    }

    /// Total probability `|h|² + |v|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// Multiplies both components by `e^{iα}`.
    pub fn with_global_phase(self, alpha: f64) -> Self {
        self * ComplexAmp::from_polar(1.0, alpha)
    }
}

impl Add for JonesAmplitude {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.h + rhs.h, self.v + rhs.v)
    }
}

impl Mul<ComplexAmp> for JonesAmplitude {
    type Output = Self;

    fn mul(self, rhs: ComplexAmp) -> Self {
        Self::new(self.h * rhs, self.v * rhs)
    }
}

impl Mul<f64> for JonesAmplitude {
    type Output = Self;

    fn mul(self, rhs: f64) -> Self {
        Self::new(self.h * rhs, self.v * rhs)
    }
}

/// A polarizer axis in radians, measured counter-clockwise from horizontal.
///
/// Axes are π-periodic, so the stored value is always in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct Angle(f64);

impl Angle {
    pub fn from_radians(rad: f64) -> Self {
        let r = rad.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs.
        Angle(if r >= PI { 0.0 } else { r })
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

impl From<f64> for Angle {
    fn from(rad: f64) -> Self {
        Angle::from_radians(rad)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.degrees())
    }
}

/// Half-wave plate with its fast axis at 22.5°: `(h, v) ↦ ((h+v)/√2, (h−v)/√2)`.
pub fn hwp_diag(state: JonesAmplitude) -> JonesAmplitude {
    JonesAmplitude::new(
        (state.h + state.v) * FRAC_1_SQRT_2,
        (state.h - state.v) * FRAC_1_SQRT_2,
    )
}

/// Symmetric 50:50 beam splitter, applied component-wise.
///
/// `out1 = (in1 + i·in2)/√2`, `out2 = (i·in1 + in2)/√2`.
pub fn bs_transform(in1: JonesAmplitude, in2: JonesAmplitude) -> (JonesAmplitude, JonesAmplitude) {
    let out1 = (in1 + in2 * I) * FRAC_1_SQRT_2;
    let out2 = (in1 * I + in2) * FRAC_1_SQRT_2;
    (out1, out2)
}

/// Polarizing beam splitter: H is transmitted, V is reflected into the other arm.
pub fn pbs_split(state: JonesAmplitude) -> (JonesAmplitude, JonesAmplitude) {
    (
        JonesAmplitude::new(state.h, ComplexAmp::new(0.0, 0.0)),
        JonesAmplitude::new(ComplexAmp::new(0.0, 0.0), state.v),
    )
}

/// Phase picked up by the frequency-shifted components: `h·e^{iδf·t₊}`, `v·e^{−iδf·t₋}`.
pub fn apply_detuning_phase(
    state: JonesAmplitude,
    detuning: f64,
    t_plus: f64,
    t_minus: f64,
) -> JonesAmplitude {
    JonesAmplitude::new(
        state.h * ComplexAmp::from_polar(1.0, detuning * t_plus),
        state.v * ComplexAmp::from_polar(1.0, -detuning * t_minus),
    )
}

/// The two tagged contributions that survive a polarizer at `axis`:
/// `(cos(axis)·h, sin(axis)·v)`.
///
/// After the polarizer both components share one spatial polarization but
/// keep their frequency tags, so they are returned separately.
pub fn polarizer_components(state: JonesAmplitude, axis: Angle) -> JonesAmplitude {
    let (s, c) = axis.radians().sin_cos();
    JonesAmplitude::new(state.h * c, state.v * s)
}

/// Scalar amplitude transmitted along the polarizer axis, `cos(axis)·h + sin(axis)·v`.
pub fn polarizer_project(state: JonesAmplitude, axis: Angle) -> ComplexAmp {
    let p = polarizer_components(state, axis);
    p.h + p.v
}
