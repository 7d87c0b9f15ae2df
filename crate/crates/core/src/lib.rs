//! Dual-engine simulator for gated coincidence detection between two
//! noninterfering Mach-Zehnder quantum erasers fed by polarization-frequency
//! correlated photon pairs.
//!
//! - [`optics`]: Jones-calculus primitives.
//! - [`source`]: Poisson photon statistics, detuning and BS0 routing per event.
//! - [`analytic`]: closed-form local intensities, gated coincidence rates and
//!   the decoherence envelope.
//! - [`montecarlo`]: event-by-event Born-rule sampling with discard accounting.
//! - [`bell`]: correlation coefficients, CHSH and figure sweeps.

pub mod analytic;
pub mod bell;
pub mod error;
pub mod montecarlo;
pub mod optics;
pub mod source;

pub use analytic::{
    classical_intensity_product, coincidence_rate, envelope, local_intensity, map_chsh_angles,
    EraserSettings, PairId, PairMap, PhaseDistribution, PolarizerAngles, Port,
};
pub use bell::{compute_e, compute_s, AngleSchedule, BellReport, Estimate, Regime};
pub use error::{Error, Result};
pub use montecarlo::{
    estimate_rates, mc_vs_analytic_check, run_mc, run_mc_with_workers, CoincidenceTally, McConfig,
    McMode,
};
pub use optics::{Angle, ComplexAmp, JonesAmplitude};
pub use source::{poisson_bunching_stats, sample_pair_event, DetuningMode, SourceConfig};
