//! Photon-pair source: attenuated cw laser, AOM detuning pair and the first
//! beam splitter (BS0).
//!
//! Every random draw for event `j` comes from a ChaCha8 stream selected by
//! `j` under a key derived from the run seed, so any subset of events can be
//! regenerated in any order, on any number of workers, with identical results.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the AOM pair picks the detuning of each event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningMode {
    /// `δf` uniform on `[−Δ/2, Δ/2]`.
    #[default]
    UniformRandom,
    /// Sawtooth scan: `δf = −Δ/2 + Δ·(j mod M)/M`.
    LinearScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Mean photon number μ per coherence window.
    pub mean_photon_number: f64,
    /// AOM bandwidth Δ, angular frequency (rad/s).
    pub aom_bandwidth: f64,
    pub detuning_mode: DetuningMode,
    /// Number of steps `M` of one sawtooth period in [`DetuningMode::LinearScan`].
    pub scan_steps: u64,
    pub seed: u64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.02,
            aom_bandwidth: 1.0e6,
            detuning_mode: DetuningMode::UniformRandom,
            scan_steps: 1000,
            seed: 0x5eed_2023_0811,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number >= 0.0 && self.mean_photon_number.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mean_photon_number must be finite and >= 0, got {}",
                self.mean_photon_number
            )));
        }
        if !(self.aom_bandwidth > 0.0 && self.aom_bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "aom_bandwidth must be finite and > 0, got {}",
                self.aom_bandwidth
            )));
        }
        if self.scan_steps == 0 {
            return Err(Error::InvalidConfig("scan_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// What BS0 did with a doubly-bunched pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Routing {
    /// One photon into each interferometer.
    Split,
    BunchedIntoA,
    BunchedIntoB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonPairEvent {
    pub event_id: u64,
    /// `δf_j` in rad/s, `|δf_j| ≤ Δ/2`.
    pub detuning: f64,
    /// `α_j` in `[0, 2π)`.
    pub global_phase: f64,
    pub routing: Routing,
}

/// Validated source with a precomputed stream key.
#[derive(Debug, Clone)]
pub struct EventSource {
    cfg: SourceConfig,
    base: ChaCha8Rng,
}

impl EventSource {
    pub fn new(cfg: &SourceConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            base: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.cfg
    }

    /// Fresh generator positioned at the start of event `j`'s stream.
    pub fn stream(&self, j: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(j);
        rng
    }

    pub fn event(&self, j: u64) -> PhotonPairEvent {
        self.event_with_rng(j).0
    }

    /// Samples event `j` and hands back its generator so callers can keep
    /// drawing (e.g. detection outcomes) from the same per-event stream.
    pub fn event_with_rng(&self, j: u64) -> (PhotonPairEvent, ChaCha8Rng) {
        let mut rng = self.stream(j);
        let delta = self.cfg.aom_bandwidth;
        let u_detuning: f64 = rng.random();
        let detuning = match self.cfg.detuning_mode {
            DetuningMode::UniformRandom => delta * (u_detuning - 0.5),
            DetuningMode::LinearScan => {
                let m = self.cfg.scan_steps;
                -0.5 * delta + delta * (j % m) as f64 / m as f64
            }
        };
        let global_phase = TAU * rng.random::<f64>();
        let u_route: f64 = rng.random();
        let routing = if u_route < 0.5 {
            Routing::Split
        } else if u_route < 0.75 {
            Routing::BunchedIntoA
        } else {
            Routing::BunchedIntoB
        };
        let event = PhotonPairEvent {
            event_id: j,
            detuning,
            global_phase,
            routing,
        };
        (event, rng)
    }
}

/// Samples one event. Pure function of `(cfg.seed, j)`.
pub fn sample_pair_event(cfg: &SourceConfig, j: u64) -> Result<PhotonPairEvent> {
    Ok(EventSource::new(cfg)?.event(j))
}

/// Poisson photon-number probabilities per coherence window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BunchingProbabilities {
    pub vacuum: f64,
    pub single: f64,
    pub double: f64,
    pub triple_plus: f64,
}

impl BunchingProbabilities {
    pub fn total(&self) -> f64 {
        self.vacuum + self.single + self.double + self.triple_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonHistogram {
    pub mean_photon_number: f64,
    pub n_windows: u64,
    pub probabilities: BunchingProbabilities,
    /// Expected number of windows per class, `n_windows · P`.
    pub expected: BunchingProbabilities,
}

impl PoissonHistogram {
    /// `P(2)/P(1) = μ/2`; NaN at μ = 0.
    pub fn double_to_single_ratio(&self) -> f64 {
        self.probabilities.double / self.probabilities.single
    }

    /// `P(≥3)/P(2)`, the triple-bunching contamination of the pair signal.
    pub fn triple_to_double_ratio(&self) -> f64 {
        self.probabilities.triple_plus / self.probabilities.double
    }
}

fn poisson_tail_from_three(mu: f64) -> f64 {
    if mu >= 1.0 {
        let head = (-mu).exp() * (1.0 + mu + 0.5 * mu * mu);
        return (1.0 - head).max(0.0);
    }
    // direct series; 1 − P0 − P1 − P2 cancels catastrophically for small μ
    let mut term = (-mu).exp() * mu * mu * mu / 6.0;
    let mut sum = 0.0;
    let mut n = 3.0;
    while term > 0.0 && term > sum * 1e-18 {
        sum += term;
        n += 1.0;
        term *= mu / n;
    }
    sum
}

pub fn poisson_bunching_stats(mean_photon_number: f64, n_windows: u64) -> Result<PoissonHistogram> {
    let mu = mean_photon_number;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "mean_photon_number must be finite and >= 0, got {mu}"
        )));
    }
    let p0 = (-mu).exp();
    let probabilities = BunchingProbabilities {
        vacuum: p0,
        single: p0 * mu,
        double: p0 * mu * mu / 2.0,
        triple_plus: poisson_tail_from_three(mu),
    };
    let n = n_windows as f64;
    let expected = BunchingProbabilities {
        vacuum: probabilities.vacuum * n,
        single: probabilities.single * n,
        double: probabilities.double * n,
        triple_plus: probabilities.triple_plus * n,
    };
    Ok(PoissonHistogram {
        mean_photon_number: mu,
        n_windows,
        probabilities,
        expected,
    })
}
