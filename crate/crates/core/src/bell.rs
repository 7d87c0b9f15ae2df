//! Correlation coefficients, the CHSH parameter and the figure sweeps.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    classical_intensity_product, coincidence_rate, coincidence_rate_with_visibility, envelope,
    map_chsh_angles, EraserSettings, PairId, PairMap, PhaseDistribution,
};
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_rates, run_mc, McConfig, McMode, RateEstimate};
use crate::optics::Angle;

pub const TSIRELSON_BOUND: f64 = 2.0 * SQRT_2;
pub const CLASSICAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSchedule {
    pub alpha: Angle,
    pub alpha_prime: Angle,
    pub beta: Angle,
    pub beta_prime: Angle,
}

impl AngleSchedule {
    /// `(α, α′, β, β′) = (0°, 45°, 22.5°, 67.5°)`.
    pub fn canonical() -> Self {
        Self::from_degrees(0.0, 45.0, 22.5, 67.5)
    }

    pub fn from_degrees(alpha: f64, alpha_prime: f64, beta: f64, beta_prime: f64) -> Self {
        Self {
            alpha: Angle::from_degrees(alpha),
            alpha_prime: Angle::from_degrees(alpha_prime),
            beta: Angle::from_degrees(beta),
            beta_prime: Angle::from_degrees(beta_prime),
        }
    }

    /// Setting pairs in the order `(α,β), (α′,β), (α,β′), (α′,β′)`.
    pub fn pairs(&self) -> [(Angle, Angle); 4] {
        [
            (self.alpha, self.beta),
            (self.alpha_prime, self.beta),
            (self.alpha, self.beta_prime),
            (self.alpha_prime, self.beta_prime),
        ]
    }
}

/// Sign of each term of S, matching [`AngleSchedule::pairs`].
const S_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub schedule: AngleSchedule,
    /// `E(α,β), E(α′,β), E(α,β′), E(α′,β′)`.
    pub e_values: [Estimate; 4],
    pub s_value: Estimate,
    pub mode: Regime,
    pub tau: f64,
}

impl BellReport {
    pub fn violates_classical_bound(&self) -> bool {
        self.s_value.value > CLASSICAL_BOUND
    }

    pub fn within_classical_bound(&self) -> bool {
        self.s_value.value <= CLASSICAL_BOUND
    }

    pub fn within_tsirelson_bound(&self, tol: f64) -> bool {
        self.s_value.value <= TSIRELSON_BOUND + tol
    }
}

/// Normalized correlation `(r14 + r23 − r13 − r24)/(r14 + r23 + r13 + r24)`.
pub fn compute_e(r14: f64, r23: f64, r13: f64, r24: f64) -> Result<f64> {
    let total = r14 + r23 + r13 + r24;
    if total <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((r14 + r23 - r13 - r24) / total)
}

/// `E` with its first-order standard error from independent rate errors.
pub fn compute_e_with_errors(rates: &PairMap<RateEstimate>) -> Result<Estimate> {
    let r = |p: PairId| rates[p].rate;
    let value = compute_e(
        r(PairId::R14),
        r(PairId::R23),
        r(PairId::R13),
        r(PairId::R24),
    )?;
    let total: f64 = rates.0.iter().map(|e| e.rate).sum();
    let var: f64 = rates
        .iter()
        .map(|(p, e)| ((p.parity() - value) / total * e.stderr).powi(2))
        .sum();
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
    })
}

/// `|E(α,β) + E(α′,β) − E(α,β′) + E(α′,β′)|` with errors in quadrature.
pub fn combine_s(e_values: &[Estimate; 4]) -> Estimate {
    let sum: f64 = e_values.iter().zip(S_SIGNS).map(|(e, s)| s * e.value).sum();
    let var: f64 = e_values.iter().map(|e| e.stderr * e.stderr).sum();
    Estimate {
        value: sum.abs(),
        stderr: var.sqrt(),
    }
}

/// Anything that can produce the four pair rates at party angles `(α, β)`.
///
/// `slot` is the position of the setting pair in the schedule (0..4), so
/// stochastic sources can give each pair an independent stream.
pub trait RateSource: Sync {
    fn regime(&self) -> Regime;
    fn tau(&self) -> f64;
    fn rates(&self, slot: usize, alpha: Angle, beta: Angle) -> Result<PairMap<RateEstimate>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    /// Gated rates at the settings' `τ`.
    Gated,
    /// Gated rates with the envelope set to zero (`τ ≫ Δ⁻¹`).
    GatedLongDelay,
    /// Ungated intensity products over the detuning-induced phases.
    Ungated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRates {
    pub base: EraserSettings,
    pub model: AnalyticModel,
}

impl RateSource for AnalyticRates {
    fn regime(&self) -> Regime {
        match self.model {
            AnalyticModel::Gated => Regime::Quantum,
            AnalyticModel::GatedLongDelay | AnalyticModel::Ungated => Regime::Classical,
        }
    }

    fn tau(&self) -> f64 {
        match self.model {
            AnalyticModel::GatedLongDelay => f64::INFINITY,
            _ => self.base.tau(),
        }
    }

    fn rates(&self, _slot: usize, alpha: Angle, beta: Angle) -> Result<PairMap<RateEstimate>> {
        let s = self.base.with_angles(map_chsh_angles(alpha, beta));
        let tau = s.tau();
        let dist = PhaseDistribution::from_settings(&s);
        Ok(PairMap::from_fn(|p| {
            let rate = match self.model {
                AnalyticModel::Gated => coincidence_rate(p, &s, tau),
                AnalyticModel::GatedLongDelay => coincidence_rate_with_visibility(p, &s, 0.0),
                AnalyticModel::Ungated => classical_intensity_product(p, &s, &dist),
            };
            RateEstimate { rate, stderr: 0.0 }
        }))
    }
}

/// Monte-Carlo rates: one independent run per setting pair. The run for
/// slot `k` uses seed `base.source.seed + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct McRates {
    pub base: McConfig,
}

impl McRates {
    pub fn config_for(&self, slot: usize, alpha: Angle, beta: Angle) -> McConfig {
        let mut cfg = self.base.clone();
        cfg.settings = cfg.settings.with_angles(map_chsh_angles(alpha, beta));
        cfg.source.seed = cfg.source.seed.wrapping_add(slot as u64);
        cfg
    }
}

impl RateSource for McRates {
    fn regime(&self) -> Regime {
        match self.base.mode {
            McMode::QuantumGated => Regime::Quantum,
            McMode::ClassicalUngated => Regime::Classical,
        }
    }

    fn tau(&self) -> f64 {
        self.base.settings.tau()
    }

    fn rates(&self, slot: usize, alpha: Angle, beta: Angle) -> Result<PairMap<RateEstimate>> {
        let tally = run_mc(&self.config_for(slot, alpha, beta))?;
        estimate_rates(&tally)
    }
}

pub fn compute_s(schedule: &AngleSchedule, source: &dyn RateSource) -> Result<BellReport> {
    let pairs = schedule.pairs();
    let mut e_values = [Estimate::default(); 4];
    for (slot, (alpha, beta)) in pairs.into_iter().enumerate() {
        e_values[slot] = compute_e_with_errors(&source.rates(slot, alpha, beta)?)?;
    }
    Ok(BellReport {
        schedule: *schedule,
        e_values,
        s_value: combine_s(&e_values),
        mode: source.regime(),
        tau: source.tau(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub zeta: Angle,
    pub r14: f64,
    pub r13: f64,
    pub i1i4: f64,
    pub i1i3: f64,
}

/// Scans ζ (with `η = π/2 − ζ`) at the fixed party-B axes of `base`.
pub fn sweep_fringe(
    base: &EraserSettings,
    zeta_grid: &[Angle],
    tau: f64,
    phase_dist: &PhaseDistribution,
) -> Result<Vec<FringeRow>> {
    if zeta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(zeta_grid
        .par_iter()
        .map(|&zeta| {
            let mut s = *base;
            s.angles.zeta = zeta;
            s.angles.eta = map_chsh_angles(zeta, s.angles.xi).eta;
            FringeRow {
                zeta,
                r14: coincidence_rate(PairId::R14, &s, tau),
                r13: coincidence_rate(PairId::R13, &s, tau),
                i1i4: classical_intensity_product(PairId::R14, &s, phase_dist),
                i1i3: classical_intensity_product(PairId::R13, &s, phase_dist),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRow {
    /// Dimensionless `Δτ`.
    pub delta_tau: f64,
    pub r14: f64,
    pub r13: f64,
    /// Long-delay value `(I₀²/16)(sin²ζ cos²ξ + cos²ζ sin²ξ)`.
    pub plateau: f64,
    pub envelope: f64,
}

/// R14 and R13 versus `Δτ`; requires `θ = ξ`.
pub fn sweep_decoherence(
    base: &EraserSettings,
    delta_tau_grid: &[f64],
) -> Result<Vec<DecoherenceRow>> {
    if delta_tau_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    base.validate()?;
    if (base.angles.theta.radians() - base.angles.xi.radians()).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "decoherence sweep needs theta == xi, got {} and {}",
            base.angles.theta, base.angles.xi
        )));
    }
    let (z, x) = (base.angles.zeta.radians(), base.angles.xi.radians());
    let plateau = base.i0 * base.i0 / 16.0
        * (z.sin().powi(2) * x.cos().powi(2) + z.cos().powi(2) * x.sin().powi(2));
    Ok(delta_tau_grid
        .par_iter()
        .map(|&delta_tau| {
            let tau = delta_tau / base.delta;
            DecoherenceRow {
                delta_tau,
                r14: coincidence_rate(PairId::R14, base, tau),
                r13: coincidence_rate(PairId::R13, base, tau),
                plateau,
                envelope: envelope(tau, base.delta),
            }
        })
        .collect())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SDelayRow {
    pub delta_tau: f64,
    pub s: f64,
    pub envelope: f64,
}

/// Gated analytic S versus `Δτ` for `schedule`.
pub fn sweep_s_versus_delay(
    schedule: &AngleSchedule,
    base: &EraserSettings,
    delta_tau_grid: &[f64],
) -> Result<Vec<SDelayRow>> {
    if delta_tau_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    delta_tau_grid
        .par_iter()
        .map(|&delta_tau| {
            let tau = delta_tau / base.delta;
            let mut s = *base;
            s.tau_a = s.tau_b + tau;
            let report = compute_s(
                schedule,
                &AnalyticRates {
                    base: s,
                    model: AnalyticModel::Gated,
                },
            )?;
            Ok(SDelayRow {
                delta_tau,
                s: report.s_value.value,
                envelope: envelope(tau, base.delta),
            })
        })
        .collect()
}
