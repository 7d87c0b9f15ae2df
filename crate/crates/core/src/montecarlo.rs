//! Event-by-event simulation of the two erasers.
//!
//! Each event runs one photon through each interferometer using the Jones
//! primitives in [`crate::optics`], then samples a single detection outcome
//! from the Born probabilities. In gated mode the four retained outcomes are
//! the cross-polarization products of each detector pair; same-polarization
//! products carry no beat note and are removed by the dc-cut filter.
//!
//! The event range is cut into fixed-size blocks that are tallied
//! independently and summed, so the result does not depend on how many
//! workers run the blocks.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    classical_intensity_product, coincidence_rate, EraserSettings, PairId, PairMap,
    PhaseDistribution,
};
use crate::error::{Error, Result};
use crate::optics::{
    apply_detuning_phase, bs_transform, hwp_diag, pbs_split, polarizer_components, ComplexAmp,
    JonesAmplitude,
};
use crate::source::{EventSource, PhotonPairEvent, Routing, SourceConfig};

/// Events per independently tallied block.
pub const BLOCK_SIZE: u64 = 1 << 14;

/// |z| above this is reported as an engine disagreement.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Beat-note gated coincidences, cross-polarization products only.
    #[default]
    QuantumGated,
    /// Independent local detections, no filter.
    ClassicalUngated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_events: u64,
    pub mode: McMode,
    pub settings: EraserSettings,
    pub source: SourceConfig,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(Error::InvalidConfig("n_events must be > 0".into()));
        }
        self.settings.validate()?;
        self.source.validate()?;
        let (a, b) = (self.settings.delta, self.source.aom_bandwidth);
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            return Err(Error::InvalidConfig(format!(
                "settings.delta ({a}) and source.aom_bandwidth ({b}) disagree"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    BunchedAtBs0,
    SamePolarizationFiltered,
    AbsorbedNoCoincidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Discards {
    pub bunched_at_bs0: u64,
    pub same_polarization_filtered: u64,
    pub absorbed_no_coincidence: u64,
}

impl Discards {
    pub fn get(&self, reason: DiscardReason) -> u64 {
        match reason {
            DiscardReason::BunchedAtBs0 => self.bunched_at_bs0,
            DiscardReason::SamePolarizationFiltered => self.same_polarization_filtered,
            DiscardReason::AbsorbedNoCoincidence => self.absorbed_no_coincidence,
        }
    }

    fn slot(&mut self, reason: DiscardReason) -> &mut u64 {
        match reason {
            DiscardReason::BunchedAtBs0 => &mut self.bunched_at_bs0,
            DiscardReason::SamePolarizationFiltered => &mut self.same_polarization_filtered,
            DiscardReason::AbsorbedNoCoincidence => &mut self.absorbed_no_coincidence,
        }
    }

    pub fn total(&self) -> u64 {
        self.bunched_at_bs0 + self.same_polarization_filtered + self.absorbed_no_coincidence
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoincidenceTally {
    pub counts: PairMap<u64>,
    pub discards: Discards,
    pub n_events: u64,
}

fn add(a: u64, b: u64) -> Result<u64> {
    a.checked_add(b).ok_or(Error::CountOverflow)
}

impl CoincidenceTally {
    pub fn n_coincidences(&self) -> u64 {
        self.counts.0.iter().sum()
    }

    /// Events that BS0 sent one photon into each interferometer.
    pub fn n_split(&self) -> u64 {
        self.n_events - self.discards.bunched_at_bs0
    }

    /// Every event is either counted or discarded for exactly one reason.
    pub fn is_balanced(&self) -> bool {
        self.n_coincidences() + self.discards.total() == self.n_events
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = *self;
        for p in PairId::ALL {
            out.counts[p] = add(self.counts[p], other.counts[p])?;
        }
        out.discards = Discards {
            bunched_at_bs0: add(self.discards.bunched_at_bs0, other.discards.bunched_at_bs0)?,
            same_polarization_filtered: add(
                self.discards.same_polarization_filtered,
                other.discards.same_polarization_filtered,
            )?,
            absorbed_no_coincidence: add(
                self.discards.absorbed_no_coincidence,
                other.discards.absorbed_no_coincidence,
            )?,
        };
        out.n_events = add(self.n_events, other.n_events)?;
        Ok(out)
    }

    fn record(&mut self, outcome: Outcome) {
        self.n_events += 1;
        match outcome {
            Outcome::Coincidence(p) => self.counts[p] += 1,
            Outcome::Discarded(r) => *self.discards.slot(r) += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Coincidence(PairId),
    Discarded(DiscardReason),
}

/// Tagged amplitudes reaching the four detectors of one split event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorAmplitudes {
    pub d1: JonesAmplitude,
    pub d2: JonesAmplitude,
    pub d3: JonesAmplitude,
    pub d4: JonesAmplitude,
}

impl DetectorAmplitudes {
    fn pair(&self, pair: PairId) -> (JonesAmplitude, JonesAmplitude) {
        match pair {
            PairId::R14 => (self.d1, self.d4),
            PairId::R23 => (self.d2, self.d3),
            PairId::R13 => (self.d1, self.d3),
            PairId::R24 => (self.d2, self.d4),
        }
    }
}

const I: ComplexAmp = ComplexAmp { re: 0.0, im: 1.0 };

/// Output ports of one interferometer for a single photon with detuning
/// `detuning` and internal delay `delay`.
fn interferometer_outputs(detuning: f64, delay: f64) -> (JonesAmplitude, JonesAmplitude) {
    let input = hwp_diag(JonesAmplitude::horizontal());
    let (h_arm, v_arm) = pbs_split(input);
    let h_arm = apply_detuning_phase(h_arm, detuning, delay, delay);
    // quarter-wave retardance in the V arm fixes the output sign pattern
    let v_arm = apply_detuning_phase(v_arm, detuning, delay, delay) * I;
    bs_transform(h_arm, v_arm)
}

pub fn detector_amplitudes(
    settings: &EraserSettings,
    event: &PhotonPairEvent,
) -> DetectorAmplitudes {
    let angles = &settings.angles;
    let (a1, a2) = interferometer_outputs(event.detuning, settings.tau_b);
    let (a1, a2) = (
        a1.with_global_phase(event.global_phase),
        a2.with_global_phase(event.global_phase),
    );
    let (b3, b4) = interferometer_outputs(event.detuning, settings.tau_a);
    DetectorAmplitudes {
        d1: polarizer_components(a1, angles.zeta),
        d2: polarizer_components(a2, angles.eta),
        d3: polarizer_components(b3, angles.theta),
        d4: polarizer_components(b4, angles.xi),
    }
}

/// Per-event outcome probabilities under the beat-note gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatedProbabilities {
    /// Retained cross-polarization mass per pair.
    pub pairs: PairMap<f64>,
    /// H·H and V·V products removed by the dc-cut.
    pub same_polarization: f64,
    /// Everything else: polarizer absorption, or both photons missing a pair.
    pub absorbed: f64,
}

impl GatedProbabilities {
    pub fn total(&self) -> f64 {
        self.pairs.0.iter().sum::<f64>() + self.same_polarization + self.absorbed
    }
}

pub fn gated_probabilities(
    settings: &EraserSettings,
    event: &PhotonPairEvent,
) -> GatedProbabilities {
    let amps = detector_amplitudes(settings, event);
    let mut same = 0.0;
    let pairs = PairMap::from_fn(|p| {
        let (a, b) = amps.pair(p);
        same += (a.h * b.h).norm_sqr() + (a.v * b.v).norm_sqr();
        (a.h * b.v + a.v * b.h).norm_sqr()
    });
    let kept: f64 = pairs.0.iter().sum();
    GatedProbabilities {
        pairs,
        same_polarization: same,
        absorbed: (1.0 - kept - same).max(0.0),
    }
}

/// Local detection probabilities `([P(D1), P(D2)], [P(D3), P(D4)])`; the
/// remainder of each party's mass is absorbed by its polarizers.
pub fn ungated_probabilities(
    settings: &EraserSettings,
    event: &PhotonPairEvent,
) -> ([f64; 2], [f64; 2]) {
    let amps = detector_amplitudes(settings, event);
    let p = |a: JonesAmplitude| (a.h + a.v).norm_sqr();
    ([p(amps.d1), p(amps.d2)], [p(amps.d3), p(amps.d4)])
}

fn sample_gated(probs: &GatedProbabilities, u: f64) -> Outcome {
    let mut cum = 0.0;
    for (pair, &p) in probs.pairs.iter() {
        cum += p;
        if u < cum {
            return Outcome::Coincidence(pair);
        }
    }
    cum += probs.same_polarization;
    if u < cum {
        Outcome::Discarded(DiscardReason::SamePolarizationFiltered)
    } else {
        Outcome::Discarded(DiscardReason::AbsorbedNoCoincidence)
    }
}

/// Index of the detector hit (0 or 1), or `None` if absorbed.
fn sample_local(probs: [f64; 2], u: f64) -> Option<usize> {
    if u < probs[0] {
        Some(0)
    } else if u < probs[0] + probs[1] {
        Some(1)
    } else {
        None
    }
}

fn simulate_event(cfg: &McConfig, source: &EventSource, j: u64) -> Outcome {
    let (event, mut rng) = source.event_with_rng(j);
    if event.routing != Routing::Split {
        return Outcome::Discarded(DiscardReason::BunchedAtBs0);
    }
    match cfg.mode {
        McMode::QuantumGated => {
            let probs = gated_probabilities(&cfg.settings, &event);
            sample_gated(&probs, rng.random())
        }
        McMode::ClassicalUngated => {
            let (pa, pb) = ungated_probabilities(&cfg.settings, &event);
            let hit_a = sample_local(pa, rng.random());
            let hit_b = sample_local(pb, rng.random());
            match (hit_a, hit_b) {
                (Some(0), Some(1)) => Outcome::Coincidence(PairId::R14),
                (Some(1), Some(0)) => Outcome::Coincidence(PairId::R23),
                (Some(0), Some(0)) => Outcome::Coincidence(PairId::R13),
                (Some(1), Some(1)) => Outcome::Coincidence(PairId::R24),
                _ => Outcome::Discarded(DiscardReason::AbsorbedNoCoincidence),
            }
        }
    }
}

/// Sequentially tallies the events with ids in `range`.
pub fn run_mc_range(cfg: &McConfig, range: Range<u64>) -> Result<CoincidenceTally> {
    cfg.validate()?;
    let source = EventSource::new(&cfg.source)?;
    Ok(tally_range(cfg, &source, range))
}

fn tally_range(cfg: &McConfig, source: &EventSource, range: Range<u64>) -> CoincidenceTally {
    let mut tally = CoincidenceTally::default();
    for j in range {
        tally.record(simulate_event(cfg, source, j));
    }
    tally
}

/// Runs `cfg.n_events` events on the current rayon pool.
pub fn run_mc(cfg: &McConfig) -> Result<CoincidenceTally> {
    cfg.validate()?;
    let source = EventSource::new(&cfg.source)?;
    let n = cfg.n_events;
    let n_blocks = n.div_ceil(BLOCK_SIZE);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_SIZE;
            Ok(tally_range(
                cfg,
                &source,
                start..(start + BLOCK_SIZE).min(n),
            ))
        })
        .try_reduce(CoincidenceTally::default, |a, b| a.merge(&b))
}

/// Same as [`run_mc`] on a dedicated pool of `workers` threads.
pub fn run_mc_with_workers(cfg: &McConfig, workers: usize) -> Result<CoincidenceTally> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_mc(cfg))
}

/// A per-split-event rate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub stderr: f64,
}

fn binomial(count: u64, n: u64) -> RateEstimate {
    let nf = n as f64;
    let p = count as f64 / nf;
    RateEstimate {
        rate: p,
        stderr: (p * (1.0 - p) / nf).sqrt(),
    }
}

/// `count / n_split` per pair with `√(p(1−p)/n_split)`.
pub fn estimate_rates(tally: &CoincidenceTally) -> Result<PairMap<RateEstimate>> {
    let n = tally.n_split();
    if n == 0 || tally.n_coincidences() == 0 {
        return Err(Error::EmptyTally);
    }
    Ok(tally.counts.map(|_, &c| binomial(c, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConsistency {
    pub empirical: f64,
    pub reference: f64,
    pub stderr: f64,
    pub z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pairs: PairMap<PairConsistency>,
}

impl ConsistencyReport {
    pub fn all_consistent(&self) -> bool {
        self.pairs.0.iter().all(|p| !p.flagged)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.pairs.0.iter().map(|p| p.z.abs()).fold(0.0, f64::max)
    }
}

/// z-scores of empirical per-split-event rates against reference
/// probabilities. The standard error uses the reference probability, so a
/// reference of exactly zero paired with zero counts gives `z = 0`.
pub fn compare_with_reference(
    tally: &CoincidenceTally,
    reference: &PairMap<f64>,
) -> Result<ConsistencyReport> {
    let n = tally.n_split();
    if n == 0 {
        return Err(Error::EmptyTally);
    }
    let nf = n as f64;
    let pairs = PairMap::from_fn(|p| {
        let empirical = tally.counts[p] as f64 / nf;
        let r = reference[p];
        let stderr = (r * (1.0 - r) / nf).max(0.0).sqrt();
        let diff = empirical - r;
        let z = if diff == 0.0 {
            0.0
        } else if stderr > 0.0 {
            diff / stderr
        } else {
            f64::INFINITY.copysign(diff)
        };
        PairConsistency {
            empirical,
            reference: r,
            stderr,
            z,
            flagged: z.abs() > Z_THRESHOLD,
        }
    });
    Ok(ConsistencyReport { pairs })
}

/// Gated-mode reference: `coincidence_rate / I₀²` per split event.
pub fn analytic_reference(settings: &EraserSettings, tau: f64) -> PairMap<f64> {
    let norm = settings.i0 * settings.i0;
    PairMap::from_fn(|p| coincidence_rate(p, settings, tau) / norm)
}

/// Ungated-mode reference: `⟨I_m I_n⟩ / I₀²` over the detuning-induced phases.
pub fn classical_reference(settings: &EraserSettings) -> PairMap<f64> {
    let norm = settings.i0 * settings.i0;
    let dist = PhaseDistribution::from_settings(settings);
    PairMap::from_fn(|p| classical_intensity_product(p, settings, &dist) / norm)
}

pub fn mc_vs_analytic_check(
    tally: &CoincidenceTally,
    settings: &EraserSettings,
    tau: f64,
) -> Result<ConsistencyReport> {
    compare_with_reference(tally, &analytic_reference(settings, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{coincidence_rates, local_intensity, PolarizerAngles};
    use crate::optics::Angle;
    use proptest::prelude::*;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d)
    }

    fn source() -> SourceConfig {
        SourceConfig {
            seed: 99,
            aom_bandwidth: 1.0e6,
            ..SourceConfig::default()
        }
    }

    fn chsh_cfg(alpha: f64, beta: f64, tau_a: f64, tau_b: f64, n: u64, mode: McMode) -> McConfig {
        let src = source();
        McConfig {
            n_events: n,
            mode,
            settings: EraserSettings::chsh(
                deg(alpha),
                deg(beta),
                tau_a,
                tau_b,
                src.aom_bandwidth,
                1.0,
            ),
            source: src,
        }
    }

    fn event(detuning: f64, global_phase: f64) -> PhotonPairEvent {
        PhotonPairEvent {
            event_id: 0,
            detuning,
            global_phase,
            routing: Routing::Split,
        }
    }

    #[test]
    fn detector_amplitudes_match_local_intensities() {
        let s = EraserSettings {
            angles: PolarizerAngles {
                zeta: deg(12.0),
                eta: deg(99.0),
                theta: deg(47.0),
                xi: deg(160.0),
            },
            tau_a: 2.1e-6,
            tau_b: 0.8e-6,
            delta: 1.0e6,
            i0: 1.0,
        };
        for df in [-4.0e5, -1.0e3, 0.0, 2.2e5] {
            let ev = event(df, 1.234);
            let (phi, psi) = s.phases(df);
            let ([p1, p2], [p3, p4]) = ungated_probabilities(&s, &ev);
            for (port, p, phase) in [(1u8, p1, phi), (2, p2, phi), (3, p3, psi), (4, p4, psi)] {
                let closed = local_intensity(port, &s, phase).unwrap();
                assert!((p - closed).abs() < 1e-12, "port {port}: {p} vs {closed}");
            }
        }
    }

    #[test]
    fn gated_probabilities_average_to_closed_forms() {
        let s = EraserSettings {
            angles: PolarizerAngles {
                zeta: deg(30.0),
                eta: deg(75.0),
                theta: deg(10.0),
                xi: deg(120.0),
            },
            tau_a: 1.5e-6,
            tau_b: 0.2e-6,
            delta: 1.0e6,
            i0: 1.0,
        };
        let samples = 100_000;
        let mut acc = PairMap([0.0; 4]);
        for k in 0..samples {
            let df = s.delta * ((k as f64 + 0.5) / samples as f64 - 0.5);
            let g = gated_probabilities(&s, &event(df, 0.0));
            for p in PairId::ALL {
                acc[p] += g.pairs[p] / samples as f64;
            }
        }
        let closed = coincidence_rates(&s, s.tau());
        for p in PairId::ALL {
            assert!((acc[p] - closed[p]).abs() < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn chsh_mapping_filters_exactly_half() {
        let s = EraserSettings::chsh(deg(17.0), deg(58.0), 0.3e-6, 1.1e-6, 1.0e6, 1.0);
        for df in [-3.0e5, 0.0, 1.7e5] {
            let g = gated_probabilities(&s, &event(df, 0.4));
            let kept: f64 = g.pairs.0.iter().sum();
            assert!((kept - 0.125).abs() < 1e-12);
            assert!((g.same_polarization - 0.125).abs() < 1e-12);
            assert!((g.absorbed - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn bunched_events_are_dropped() {
        let cfg = chsh_cfg(0.0, 22.5, 0.0, 0.0, 200_000, McMode::QuantumGated);
        let t = run_mc(&cfg).unwrap();
        assert!(t.is_balanced());
        let f = t.discards.bunched_at_bs0 as f64 / t.n_events as f64;
        assert!((f - 0.5).abs() < 4.0 * (0.25 / t.n_events as f64).sqrt());
    }

    #[test]
    fn joint_parameter_zero_gives_no_r14_counts() {
        let cfg = chsh_cfg(30.0, 30.0, 1e-6, 1e-6, 100_000, McMode::QuantumGated);
        let t = run_mc(&cfg).unwrap();
        assert_eq!(t.counts[PairId::R14], 0);
        assert_eq!(t.counts[PairId::R23], 0);
        assert!(t.counts[PairId::R13] > 0);
    }

    #[test]
    fn worker_count_does_not_change_tally() {
        let cfg = chsh_cfg(
            10.0,
            40.0,
            2e-6,
            1e-6,
            3 * BLOCK_SIZE + 123,
            McMode::QuantumGated,
        );
        let one = run_mc_with_workers(&cfg, 1).unwrap();
        let eight = run_mc_with_workers(&cfg, 8).unwrap();
        assert_eq!(one, eight);
        let mut classical = cfg.clone();
        classical.mode = McMode::ClassicalUngated;
        assert_eq!(
            run_mc_with_workers(&classical, 1).unwrap(),
            run_mc_with_workers(&classical, 3).unwrap()
        );
    }

    #[test]
    fn partitions_merge_to_the_whole() {
        let cfg = chsh_cfg(5.0, 70.0, 0.0, 0.0, 10_000, McMode::QuantumGated);
        let whole = run_mc(&cfg).unwrap();
        let a = run_mc_range(&cfg, 0..3_333).unwrap();
        let b = run_mc_range(&cfg, 3_333..10_000).unwrap();
        assert_eq!(a.merge(&b).unwrap(), whole);
        assert_eq!(b.merge(&a).unwrap(), whole);
    }

    #[test]
    fn merge_detects_overflow() {
        let mut a = CoincidenceTally::default();
        a.counts[PairId::R14] = u64::MAX;
        let mut b = CoincidenceTally::default();
        b.counts[PairId::R14] = 1;
        assert_eq!(a.merge(&b), Err(Error::CountOverflow));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = chsh_cfg(0.0, 0.0, 0.0, 0.0, 0, McMode::QuantumGated);
        assert!(run_mc(&cfg).is_err());
        cfg.n_events = 10;
        cfg.settings.delta = 2.0e6;
        assert!(run_mc(&cfg).is_err());
        cfg.settings.delta = 1.0e6;
        cfg.settings.i0 = 0.0;
        assert!(run_mc(&cfg).is_err());
    }

    fn tally_with(counts: [u64; 4], n_split: u64) -> CoincidenceTally {
        let kept: u64 = counts.iter().sum();
        CoincidenceTally {
            counts: PairMap(counts),
            discards: Discards {
                bunched_at_bs0: n_split,
                same_polarization_filtered: 0,
                absorbed_no_coincidence: n_split - kept,
            },
            n_events: 2 * n_split,
        }
    }

    #[test]
    fn estimate_rates_binomial() {
        let t = tally_with([500, 500, 0, 0], 2000);
        assert!(t.is_balanced());
        let r = estimate_rates(&t).unwrap();
        assert!((r[PairId::R14].rate - 0.25).abs() < 1e-15);
        assert!((r[PairId::R14].stderr - 0.0097).abs() < 5e-5);
        assert_eq!(r[PairId::R13].rate, 0.0);
        assert_eq!(
            estimate_rates(&tally_with([0; 4], 100)),
            Err(Error::EmptyTally)
        );
        assert_eq!(
            estimate_rates(&CoincidenceTally::default()),
            Err(Error::EmptyTally)
        );
    }

    #[test]
    fn half_tallies_merge_to_same_counts() {
        let a = tally_with([10, 3, 7, 0], 50);
        let b = tally_with([1, 2, 3, 4], 60);
        let m = a.merge(&b).unwrap();
        assert_eq!(m.counts, PairMap([11, 5, 10, 4]));
        assert_eq!(m.n_split(), 110);
        assert!(m.is_balanced());
    }

    #[test]
    fn consistency_zero_reference_and_zero_counts() {
        let t = tally_with([0, 0, 40, 60], 800);
        let reference = PairMap([0.0, 0.0, 0.05, 0.075]);
        let r = compare_with_reference(&t, &reference).unwrap();
        assert_eq!(r.pairs[PairId::R14].z, 0.0);
        assert!(r.all_consistent());
    }

    #[test]
    fn consistency_flags_corrupted_reference() {
        let cfg = chsh_cfg(0.0, 22.5, 0.0, 0.0, 400_000, McMode::QuantumGated);
        let t = run_mc(&cfg).unwrap();
        let good = mc_vs_analytic_check(&t, &cfg.settings, 0.0).unwrap();
        assert!(good.all_consistent(), "{good:?}");
        let mut bad = analytic_reference(&cfg.settings, 0.0);
        let sigma = good.pairs[PairId::R13].stderr;
        bad[PairId::R13] += 10.0 * sigma;
        let r = compare_with_reference(&t, &bad).unwrap();
        assert!(r.pairs[PairId::R13].flagged);
        assert!(!r.all_consistent());
    }

    #[test]
    fn classical_mode_matches_intensity_products() {
        let cfg = chsh_cfg(45.0, 22.5, 3e-4, 3e-4, 400_000, McMode::ClassicalUngated);
        let t = run_mc(&cfg).unwrap();
        assert!(t.is_balanced());
        assert_eq!(t.discards.same_polarization_filtered, 0);
        let r = compare_with_reference(&t, &classical_reference(&cfg.settings)).unwrap();
        assert!(r.all_consistent(), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn gated_probabilities_normalized(
            z in 0.0..180.0f64, e in 0.0..180.0f64, t in 0.0..180.0f64, x in 0.0..180.0f64,
            ta in -1e-5..1e-5f64, tb in -1e-5..1e-5f64, df in -5e5..5e5f64, alpha in 0.0..std::f64::consts::TAU,
        ) {
            let s = EraserSettings {
                angles: PolarizerAngles { zeta: deg(z), eta: deg(e), theta: deg(t), xi: deg(x) },
                tau_a: ta, tau_b: tb, delta: 1e6, i0: 1.0,
            };
            let g = gated_probabilities(&s, &event(df, alpha));
            prop_assert!((g.total() - 1.0).abs() < 1e-12);
            prop_assert!(g.pairs.0.iter().all(|&p| p >= 0.0));
            let kept: f64 = g.pairs.0.iter().sum();
            prop_assert!(kept + g.same_polarization <= 1.0);
        }

        #[test]
        fn global_phase_does_not_change_probabilities(df in -5e5..5e5f64, alpha in 0.0..std::f64::consts::TAU) {
            let s = EraserSettings::chsh(deg(20.0), deg(65.0), 1e-6, 0.5e-6, 1e6, 1.0);
            let a = gated_probabilities(&s, &event(df, 0.0));
            let b = gated_probabilities(&s, &event(df, alpha));
            for p in PairId::ALL {
                prop_assert!((a.pairs[p] - b.pairs[p]).abs() < 1e-12);
            }
        }
    }
}
