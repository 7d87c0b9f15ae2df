//! Run configuration: a TOML file with one table per subsystem.
//!
//! Angles are given in degrees here and converted to radians on the way
//! into the engines. Unknown keys are rejected, and range checks run inside
//! deserialization so the TOML error carries the offending line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eraser_core::{
    bell::AngleSchedule, Angle, DetuningMode, EraserSettings, McConfig, McMode, PolarizerAngles,
    SourceConfig,
};
use serde::{Deserialize, Deserializer, Serialize};

fn finite<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if !x.is_finite() {
        return Err(serde::de::Error::custom(format!(
            "expected a finite number, got {x}"
        )));
    }
    Ok(x)
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(serde::de::Error::custom(format!(
            "expected a finite value > 0, got {x}"
        )));
    }
    Ok(x)
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(serde::de::Error::custom(format!(
            "expected a finite value >= 0, got {x}"
        )));
    }
    Ok(x)
}

fn positive_count<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    let n = u64::deserialize(d)?;
    if n == 0 {
        return Err(serde::de::Error::custom("expected a count >= 1, got 0"));
    }
    Ok(n)
}

fn grid_points<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<usize, D::Error> {
    let n = usize::deserialize(d)?;
    if n < 2 {
        return Err(serde::de::Error::custom(format!(
            "expected at least 2 grid points, got {n}"
        )));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    #[serde(deserialize_with = "non_negative")]
    pub mean_photon_number: f64,
    /// Δ in rad/s.
    #[serde(deserialize_with = "positive")]
    pub aom_bandwidth: f64,
    pub detuning_mode: DetuningMode,
    #[serde(deserialize_with = "positive_count")]
    pub scan_steps: u64,
    pub seed: u64,
}

impl Default for SourceSection {
    fn default() -> Self {
        let s = SourceConfig::default();
        Self {
            mean_photon_number: s.mean_photon_number,
            aom_bandwidth: s.aom_bandwidth,
            detuning_mode: s.detuning_mode,
            scan_steps: s.scan_steps,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsSection {
    #[serde(deserialize_with = "finite")]
    pub zeta_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub eta_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub theta_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub xi_deg: f64,
    /// s
    #[serde(deserialize_with = "finite")]
    pub tau_a: f64,
    /// s
    #[serde(deserialize_with = "finite")]
    pub tau_b: f64,
    #[serde(deserialize_with = "positive")]
    pub i0: f64,
}

impl Default for SettingsSection {
    fn default() -> Self {
        // CHSH-mapped (α, β) = (0°, 22.5°); Δτ_B = 1000 spreads the local
        // phases over many turns.
        Self {
            zeta_deg: 0.0,
            eta_deg: 90.0,
            theta_deg: 67.5,
            xi_deg: 22.5,
            tau_a: 1.0e-3,
            tau_b: 1.0e-3,
            i0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    #[serde(deserialize_with = "positive_count")]
    pub n_events: u64,
    pub mode: McMode,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_events: 2_000_000,
            mode: McMode::QuantumGated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChshSection {
    #[serde(deserialize_with = "finite")]
    pub alpha_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub alpha_prime_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub beta_deg: f64,
    #[serde(deserialize_with = "finite")]
    pub beta_prime_deg: f64,
}

impl Default for ChshSection {
    fn default() -> Self {
        Self {
            alpha_deg: 0.0,
            alpha_prime_deg: 45.0,
            beta_deg: 22.5,
            beta_prime_deg: 67.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Section {
    #[serde(deserialize_with = "positive")]
    pub zeta_step_deg: f64,
}

impl Default for Fig2Section {
    fn default() -> Self {
        Self { zeta_step_deg: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Section {
    #[serde(deserialize_with = "finite")]
    pub zeta_deg: f64,
    /// Used for both ξ and θ.
    #[serde(deserialize_with = "finite")]
    pub xi_deg: f64,
    #[serde(deserialize_with = "grid_points")]
    pub points: usize,
    #[serde(deserialize_with = "positive")]
    pub delta_tau_min: f64,
    #[serde(deserialize_with = "positive")]
    pub delta_tau_max: f64,
}

impl Default for Fig3Section {
    fn default() -> Self {
        Self {
            zeta_deg: 45.0,
            xi_deg: 22.5,
            points: 60,
            delta_tau_min: 1.0e-2,
            delta_tau_max: 1.0e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceSection,
    pub settings: SettingsSection,
    pub mc: McSection,
    pub chsh: ChshSection,
    pub fig2: Fig2Section,
    pub fig3: Fig3Section,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks that span more than one key.
    pub fn check(&self) -> Result<()> {
        if self.fig3.delta_tau_min >= self.fig3.delta_tau_max {
            bail!(
                "fig3.delta_tau_min ({}) must be below fig3.delta_tau_max ({})",
                self.fig3.delta_tau_min,
                self.fig3.delta_tau_max
            );
        }
        Ok(())
    }

    pub fn source(&self) -> SourceConfig {
        SourceConfig {
            mean_photon_number: self.source.mean_photon_number,
            aom_bandwidth: self.source.aom_bandwidth,
            detuning_mode: self.source.detuning_mode,
            scan_steps: self.source.scan_steps,
            seed: self.source.seed,
        }
    }

    pub fn settings(&self) -> EraserSettings {
        let s = &self.settings;
        EraserSettings {
            angles: PolarizerAngles {
                zeta: Angle::from_degrees(s.zeta_deg),
                eta: Angle::from_degrees(s.eta_deg),
                theta: Angle::from_degrees(s.theta_deg),
                xi: Angle::from_degrees(s.xi_deg),
            },
            tau_a: s.tau_a,
            tau_b: s.tau_b,
            delta: self.source.aom_bandwidth,
            i0: s.i0,
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            n_events: self.mc.n_events,
            mode: self.mc.mode,
            settings: self.settings(),
            source: self.source(),
        }
    }

    pub fn schedule(&self) -> AngleSchedule {
        let c = &self.chsh;
        AngleSchedule::from_degrees(c.alpha_deg, c.alpha_prime_deg, c.beta_deg, c.beta_prime_deg)
    }
}
