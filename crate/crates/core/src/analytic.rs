//! Closed-form ensemble averages for the two-eraser setup.
//!
//! Party A owns detectors D1/D2 (polarizers ζ, η, phase `φ = 2δf·τ_B`),
//! party B owns D3/D4 (polarizers θ, ξ, phase `ψ = 2δf·τ_A`). Gated
//! coincidence rates keep only the cross-polarization products (H of one
//! party with V of the other), which beat at `2δf`; everything below is the
//! ensemble average of those products over a uniform detuning.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Angle;

/// One of the four cross-party detector pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairId {
    R14,
    R23,
    R13,
    R24,
}

impl PairId {
    pub const ALL: [PairId; 4] = [PairId::R14, PairId::R23, PairId::R13, PairId::R24];

    fn index(self) -> usize {
        match self {
            PairId::R14 => 0,
            PairId::R23 => 1,
            PairId::R13 => 2,
            PairId::R24 => 3,
        }
    }

    /// `(party-A port, party-B port)`.
    pub fn ports(self) -> (Port, Port) {
        match self {
            PairId::R14 => (Port::D1, Port::D4),
            PairId::R23 => (Port::D2, Port::D3),
            PairId::R13 => (Port::D1, Port::D3),
            PairId::R24 => (Port::D2, Port::D4),
        }
    }

    /// `+1` for R14/R23, `−1` for R13/R24 in the correlation coefficient.
    pub fn parity(self) -> f64 {
        match self {
            PairId::R14 | PairId::R23 => 1.0,
            PairId::R13 | PairId::R24 => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PairId::R14 => "14",
            PairId::R23 => "23",
            PairId::R13 => "13",
            PairId::R24 => "24",
        }
    }
}

/// Fixed-size map keyed by [`PairId`], iterated in `R14, R23, R13, R24` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairMap<T>(pub [T; 4]);

impl<T> PairMap<T> {
    pub fn from_fn(mut f: impl FnMut(PairId) -> T) -> Self {
        PairMap(PairId::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (PairId, &T)> {
        PairId::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(PairId, &T) -> U) -> PairMap<U> {
        PairMap::from_fn(|p| f(p, &self[p]))
    }
}

impl<T> Index<PairId> for PairMap<T> {
    type Output = T;

    fn index(&self, p: PairId) -> &T {
        &self.0[p.index()]
    }
}

impl<T> IndexMut<PairId> for PairMap<T> {
    fn index_mut(&mut self, p: PairId) -> &mut T {
        &mut self.0[p.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    D1,
    D2,
    D3,
    D4,
}

impl TryFrom<u8> for Port {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Port::D1),
            2 => Ok(Port::D2),
            3 => Ok(Port::D3),
            4 => Ok(Port::D4),
            other => Err(Error::InvalidPort(other)),
        }
    }
}

/// The four polarizer axes, at D1, D2, D3, D4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizerAngles {
    pub zeta: Angle,
    pub eta: Angle,
    pub theta: Angle,
    pub xi: Angle,
}

impl PolarizerAngles {
    pub fn axis(&self, port: Port) -> Angle {
        match port {
            Port::D1 => self.zeta,
            Port::D2 => self.eta,
            Port::D3 => self.theta,
            Port::D4 => self.xi,
        }
    }
}

/// Party-level CHSH settings to detector axes: `ζ = α`, `η = π/2 − α`,
/// `θ = π/2 − β`, `ξ = β`.
pub fn map_chsh_angles(alpha: Angle, beta: Angle) -> PolarizerAngles {
    PolarizerAngles {
        zeta: alpha,
        eta: Angle::from_radians(FRAC_PI_2 - alpha.radians()),
        theta: Angle::from_radians(FRAC_PI_2 - beta.radians()),
        xi: beta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EraserSettings {
    pub angles: PolarizerAngles,
    /// Internal path delay of the D3/D4 interferometer, s (`ψ = 2δf·τ_A`).
    pub tau_a: f64,
    /// Internal path delay of the D1/D2 interferometer, s (`φ = 2δf·τ_B`).
    pub tau_b: f64,
    /// AOM bandwidth Δ, rad/s.
    pub delta: f64,
    /// Intensity scale I₀ (arbitrary units).
    pub i0: f64,
}

impl EraserSettings {
    /// CHSH-mapped settings at party angles `(α, β)`.
    pub fn chsh(alpha: Angle, beta: Angle, tau_a: f64, tau_b: f64, delta: f64, i0: f64) -> Self {
        Self {
            angles: map_chsh_angles(alpha, beta),
            tau_a,
            tau_b,
            delta,
            i0,
        }
    }

    pub fn with_angles(self, angles: PolarizerAngles) -> Self {
        Self { angles, ..self }
    }

    /// `τ = τ_A − τ_B`.
    pub fn tau(&self) -> f64 {
        self.tau_a - self.tau_b
    }

    /// Per-event phases `(φ, ψ)` for detuning `δf`.
    pub fn phases(&self, detuning: f64) -> (f64, f64) {
        (2.0 * detuning * self.tau_b, 2.0 * detuning * self.tau_a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.i0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "i0 must be > 0, got {}",
                self.i0
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.tau_a.is_finite() && self.tau_b.is_finite()) {
            return Err(Error::InvalidConfig("delays must be finite".into()));
        }
        Ok(())
    }
}

/// Local fringe sign: `−` on D1/D3, `+` on D2/D4.
fn fringe_sign(port: Port) -> f64 {
    match port {
        Port::D1 | Port::D3 => -1.0,
        Port::D2 | Port::D4 => 1.0,
    }
}

/// `(I₀/4)(1 ∓ sin2a·cos(phase))` at detector `port` (1..=4).
pub fn local_intensity(port: u8, s: &EraserSettings, phase: f64) -> Result<f64> {
    let port = Port::try_from(port)?;
    Ok(local_intensity_at(port, s, phase))
}

pub(crate) fn local_intensity_at(port: Port, s: &EraserSettings, phase: f64) -> f64 {
    let a = s.angles.axis(port).radians();
    0.25 * s.i0 * (1.0 + fringe_sign(port) * (2.0 * a).sin() * phase.cos())
}

/// `sin(x)/x` with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Decoherence envelope `V(τ) = ⟨cos(2δf·τ)⟩ = sin(Δτ)/(Δτ)` for `δf`
/// uniform on `[−Δ/2, Δ/2]`.
pub fn envelope(tau: f64, delta: f64) -> f64 {
    sinc(delta * tau)
}

/// Gated (dc-cut) coincidence rate of `pair`, ensemble-averaged at delay
/// difference `tau`.
pub fn coincidence_rate(pair: PairId, s: &EraserSettings, tau: f64) -> f64 {
    coincidence_rate_with_visibility(pair, s, envelope(tau, s.delta))
}

/// Same as [`coincidence_rate`] with the envelope value supplied directly;
/// `visibility = 0` is the long-delay classical limit.
pub fn coincidence_rate_with_visibility(pair: PairId, s: &EraserSettings, visibility: f64) -> f64 {
    let PolarizerAngles {
        zeta,
        eta,
        theta,
        xi,
    } = s.angles;
    let (z, e, t, x) = (zeta.radians(), eta.radians(), theta.radians(), xi.radians());
    let loss = 1.0 - visibility;
    let bracket = match pair {
        PairId::R14 => (z - x).sin().powi(2) + 0.5 * (2.0 * z).sin() * (2.0 * x).sin() * loss,
        PairId::R13 => (z + t).sin().powi(2) - 0.5 * (2.0 * z).sin() * (2.0 * t).sin() * loss,
        PairId::R23 => (e - t).sin().powi(2) + 0.5 * (2.0 * e).sin() * (2.0 * t).sin() * loss,
        PairId::R24 => (e + x).sin().powi(2) - 0.5 * (2.0 * e).sin() * (2.0 * x).sin() * loss,
    };
    s.i0 * s.i0 / 16.0 * bracket
}

pub fn coincidence_rates(s: &EraserSettings, tau: f64) -> PairMap<f64> {
    PairMap::from_fn(|p| coincidence_rate(p, s, tau))
}

/// Ensemble of local phases `(φ, ψ)` used for ungated intensity products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhaseDistribution {
    /// Every event has the same phases.
    Fixed { phi: f64, psi: f64 },
    /// `φ = ψ` uniform on the circle.
    UniformCircle,
    /// Phases induced by a uniform detuning on `[−Δ/2, Δ/2]`:
    /// `φ = 2δf·τ_B`, `ψ = 2δf·τ_A`.
    Detuning { tau_a: f64, tau_b: f64, delta: f64 },
}

impl PhaseDistribution {
    pub fn from_settings(s: &EraserSettings) -> Self {
        PhaseDistribution::Detuning {
            tau_a: s.tau_a,
            tau_b: s.tau_b,
            delta: s.delta,
        }
    }

    /// `(⟨cos φ⟩, ⟨cos ψ⟩, ⟨cos φ · cos ψ⟩)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        match *self {
            PhaseDistribution::Fixed { phi, psi } => (phi.cos(), psi.cos(), phi.cos() * psi.cos()),
            PhaseDistribution::UniformCircle => (0.0, 0.0, 0.5),
            PhaseDistribution::Detuning {
                tau_a,
                tau_b,
                delta,
            } => {
                let cross = 0.5 * (envelope(tau_a - tau_b, delta) + envelope(tau_a + tau_b, delta));
                (envelope(tau_b, delta), envelope(tau_a, delta), cross)
            }
        }
    }
}

/// Ungated baseline `⟨I_m·I_n⟩` for the detector pair `pair`.
pub fn classical_intensity_product(
    pair: PairId,
    s: &EraserSettings,
    phase_dist: &PhaseDistribution,
) -> f64 {
    let (m, n) = pair.ports();
    let am = fringe_sign(m) * (2.0 * s.angles.axis(m).radians()).sin();
    let an = fringe_sign(n) * (2.0 * s.angles.axis(n).radians()).sin();
    let (c_phi, c_psi, c_both) = phase_dist.moments();
    s.i0 * s.i0 / 16.0 * (1.0 + am * c_phi + an * c_psi + am * an * c_both)
}

pub fn classical_intensity_products(
    s: &EraserSettings,
    phase_dist: &PhaseDistribution,
) -> PairMap<f64> {
    PairMap::from_fn(|p| classical_intensity_product(p, s, phase_dist))
}
