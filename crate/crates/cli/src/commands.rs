//! Subcommand bodies. Each writes its files under `output.dir` and returns
//! an [`Outcome`] whose `ok` flag drives the process exit code.

use std::path::PathBuf;

use anyhow::{Context, Result};
use eraser_core::analytic::PhaseDistribution;
use eraser_core::bell::{
    log_grid, sweep_decoherence, sweep_fringe, sweep_s_versus_delay, AnalyticModel, AnalyticRates,
    McRates, RateSource, CLASSICAL_BOUND, TSIRELSON_BOUND,
};
use eraser_core::montecarlo::{
    analytic_reference, classical_reference, compare_with_reference, Discards,
};
use eraser_core::{
    compute_s, estimate_rates, run_mc, Angle, BellReport, McMode, PairId, PolarizerAngles,
};
use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::output::{
    format_number, record_csv, write_atomic, write_csv, write_json, write_svg, PlotSpec, Table,
};

/// Statistical allowance, in standard errors, on bound checks of MC estimates.
const BOUND_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Engine {
    #[default]
    Analytic,
    Mc,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Mc => "mc",
        }
    }
}

pub fn mode_name(mode: McMode) -> &'static str {
    match mode {
        McMode::QuantumGated => "quantum",
        McMode::ClassicalUngated => "classical",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub ok: bool,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleDeg {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEntry {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshDocument {
    pub mode: &'static str,
    pub engine: &'static str,
    /// s; infinite when the long-delay limit is taken.
    pub tau: f64,
    pub schedule_deg: ScheduleDeg,
    pub correlations: Vec<CorrelationEntry>,
    pub s: f64,
    pub s_stderr: f64,
    pub seed: Option<u64>,
    pub n_events: Option<u64>,
    pub bound: &'static str,
    pub bound_value: f64,
    pub within_bound: bool,
    pub violates_classical_bound: bool,
}

fn rate_source(cfg: &RunConfig, engine: Engine) -> Box<dyn RateSource> {
    match engine {
        Engine::Analytic => Box::new(AnalyticRates {
            base: cfg.settings(),
            model: match cfg.mc.mode {
                McMode::QuantumGated => AnalyticModel::Gated,
                McMode::ClassicalUngated => AnalyticModel::Ungated,
            },
        }),
        Engine::Mc => Box::new(McRates { base: cfg.mc() }),
    }
}

/// Bound appropriate to the regime, with a statistical allowance for MC.
pub fn check_bound(report: &BellReport, mode: McMode) -> (&'static str, f64, bool) {
    let (name, bound) = match mode {
        McMode::QuantumGated => ("tsirelson", TSIRELSON_BOUND),
        McMode::ClassicalUngated => ("classical", CLASSICAL_BOUND),
    };
    let slack = BOUND_SIGMAS * report.s_value.stderr + 1e-9;
    (name, bound, report.s_value.value.abs() <= bound + slack)
}

pub fn chsh_report(cfg: &RunConfig, engine: Engine) -> Result<(BellReport, ChshDocument)> {
    let schedule = cfg.schedule();
    let report = compute_s(&schedule, rate_source(cfg, engine).as_ref())?;
    let (bound, bound_value, within_bound) = check_bound(&report, cfg.mc.mode);
    let mc = engine == Engine::Mc;
    let doc = ChshDocument {
        mode: mode_name(cfg.mc.mode),
        engine: engine.name(),
        tau: report.tau,
        schedule_deg: ScheduleDeg {
            alpha: schedule.alpha.degrees(),
            alpha_prime: schedule.alpha_prime.degrees(),
            beta: schedule.beta.degrees(),
            beta_prime: schedule.beta_prime.degrees(),
        },
        correlations: schedule
            .pairs()
            .iter()
            .zip(&report.e_values)
            .map(|(&(a, b), e)| CorrelationEntry {
                alpha_deg: a.degrees(),
                beta_deg: b.degrees(),
                value: e.value,
                stderr: e.stderr,
            })
            .collect(),
        s: report.s_value.value,
        s_stderr: report.s_value.stderr,
        seed: mc.then_some(cfg.source.seed),
        n_events: mc.then_some(cfg.mc.n_events),
        bound,
        bound_value,
        within_bound,
        violates_classical_bound: report.violates_classical_bound(),
    };
    Ok((report, doc))
}

const CHSH_CSV_HEADERS: [&str; 23] = [
    "mode",
    "engine",
    "tau",
    "alpha_deg",
    "alpha_prime_deg",
    "beta_deg",
    "beta_prime_deg",
    "e_ab",
    "e_ab_stderr",
    "e_apb",
    "e_apb_stderr",
    "e_abp",
    "e_abp_stderr",
    "e_apbp",
    "e_apbp_stderr",
    "s",
    "s_stderr",
    "seed",
    "n_events",
    "bound",
    "bound_value",
    "within_bound",
    "violates_classical_bound",
];

fn chsh_csv(doc: &ChshDocument) -> Result<Vec<u8>> {
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut cells = vec![
        doc.mode.to_string(),
        doc.engine.to_string(),
        format_number(doc.tau),
        format_number(doc.schedule_deg.alpha),
        format_number(doc.schedule_deg.alpha_prime),
        format_number(doc.schedule_deg.beta),
        format_number(doc.schedule_deg.beta_prime),
    ];
    for c in &doc.correlations {
        cells.push(format_number(c.value));
        cells.push(format_number(c.stderr));
    }
    cells.extend([
        format_number(doc.s),
        format_number(doc.s_stderr),
        opt(doc.seed),
        opt(doc.n_events),
        doc.bound.to_string(),
        format_number(doc.bound_value),
        doc.within_bound.to_string(),
        doc.violates_classical_bound.to_string(),
    ]);
    record_csv(&CHSH_CSV_HEADERS, &cells)
}

pub fn cmd_chsh(cfg: &RunConfig, engine: Engine) -> Result<Outcome> {
    let (_, doc) = chsh_report(cfg, engine)?;
    let path = cfg
        .output
        .dir
        .join(format!("chsh_report.{}", cfg.output.format.extension()));
    match cfg.output.format {
        OutputFormat::Json => write_json(&path, &doc)?,
        OutputFormat::Csv => write_atomic(&path, &chsh_csv(&doc)?)?,
    }
    Ok(Outcome {
        summary: format!(
            "S = {:.6} ± {:.6} ({} bound {:.6}: {})",
            doc.s,
            doc.s_stderr,
            doc.bound,
            doc.bound_value,
            if doc.within_bound {
                "respected"
            } else {
                "EXCEEDED"
            }
        ),
        ok: doc.within_bound,
        files: vec![path],
    })
}

/// `0, step, 2·step, …` up to 180° inclusive.
pub fn zeta_grid_deg(step: f64) -> Vec<f64> {
    let n = (180.0 / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn normalise_pair(table: &mut Table, a: usize, b: usize) {
    let max = table
        .rows
        .iter()
        .map(|r| r[a].max(r[b]))
        .fold(0.0, f64::max);
    if max > 0.0 {
        for r in &mut table.rows {
            r[a] /= max;
            r[b] /= max;
        }
    }
}

pub fn fig2_tables(cfg: &RunConfig) -> Result<(Table, Table)> {
    let base = cfg.settings();
    let grid_deg = zeta_grid_deg(cfg.fig2.zeta_step_deg);
    let grid: Vec<Angle> = grid_deg.iter().map(|&d| Angle::from_degrees(d)).collect();
    let dist = PhaseDistribution::from_settings(&base);
    let rows = sweep_fringe(&base, &grid, 0.0, &dist)?;

    let mut upper = Table::new(&["zeta_deg", "r14_norm", "r13_norm"]);
    let mut lower = Table::new(&["zeta_deg", "i1i4_norm", "i1i3_norm"]);
    for (&deg, row) in grid_deg.iter().zip(&rows) {
        upper.push(vec![deg, row.r14, row.r13]);
        lower.push(vec![deg, row.i1i4, row.i1i3]);
    }
    normalise_pair(&mut upper, 1, 2);
    normalise_pair(&mut lower, 1, 2);
    Ok((upper, lower))
}

pub fn cmd_fig2(cfg: &RunConfig) -> Result<Outcome> {
    let (upper, lower) = fig2_tables(cfg)?;
    let dir = &cfg.output.dir;
    let mut files = vec![dir.join("fig2_upper.csv"), dir.join("fig2_lower.csv")];
    write_csv(&files[0], &upper)?;
    write_csv(&files[1], &lower)?;
    if cfg.output.svg {
        let plots = [
            (
                &upper,
                "fig2_upper.svg",
                "Gated coincidences",
                ["r14_norm", "r13_norm"],
                "R (normalised)",
            ),
            (
                &lower,
                "fig2_lower.svg",
                "Ungated intensity products",
                ["i1i4_norm", "i1i3_norm"],
                "<I I> (normalised)",
            ),
        ];
        for (table, name, title, series, y_label) in plots {
            let path = dir.join(name);
            write_svg(
                &path,
                table,
                &PlotSpec {
                    title,
                    x: "zeta_deg",
                    series: &series,
                    x_label: "zeta (deg)",
                    y_label,
                    log_x: false,
                },
            )?;
            files.push(path);
        }
    }
    Ok(Outcome {
        summary: format!("{} zeta points", upper.rows.len()),
        ok: true,
        files,
    })
}

pub fn fig3_table(cfg: &RunConfig) -> Result<Table> {
    let f = &cfg.fig3;
    let mut base = cfg.settings();
    let zeta = Angle::from_degrees(f.zeta_deg);
    let xi = Angle::from_degrees(f.xi_deg);
    base.angles = PolarizerAngles {
        zeta,
        eta: Angle::from_degrees(90.0 - f.zeta_deg),
        theta: xi,
        xi,
    };
    let grid = log_grid(f.delta_tau_min, f.delta_tau_max, f.points);
    let mut table = Table::new(&["delta_tau", "r14", "r13", "plateau_ref", "envelope"]);
    for r in sweep_decoherence(&base, &grid)? {
        table.push(vec![r.delta_tau, r.r14, r.r13, r.plateau, r.envelope]);
    }
    Ok(table)
}

pub fn cmd_fig3(cfg: &RunConfig) -> Result<Outcome> {
    let table = fig3_table(cfg)?;
    let dir = &cfg.output.dir;
    let mut files = vec![dir.join("fig3.csv")];
    write_csv(&files[0], &table)?;
    if cfg.output.svg {
        let path = dir.join("fig3.svg");
        write_svg(
            &path,
            &table,
            &PlotSpec {
                title: "Coincidence rates versus delay",
                x: "delta_tau",
                series: &["r14", "r13"],
                x_label: "Delta tau",
                y_label: "R",
                log_x: true,
            },
        )?;
        files.push(path);
    }
    Ok(Outcome {
        summary: format!("{} delay points", table.rows.len()),
        ok: true,
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TallyDocument {
    pub mode: &'static str,
    pub seed: u64,
    pub n_events: u64,
    pub n_split: u64,
    pub counts: std::collections::BTreeMap<&'static str, u64>,
    pub discards: Discards,
    pub balanced: bool,
}

pub fn cmd_mc(cfg: &RunConfig) -> Result<Outcome> {
    let mc = cfg.mc();
    let tally = run_mc(&mc)?;
    let reference = match mc.mode {
        McMode::QuantumGated => analytic_reference(&mc.settings, mc.settings.tau()),
        McMode::ClassicalUngated => classical_reference(&mc.settings),
    };
    let rates = estimate_rates(&tally)?;
    let consistency = compare_with_reference(&tally, &reference)?;

    let dir = &cfg.output.dir;
    let tally_path = dir.join("tally.json");
    let rates_path = dir.join("rates.csv");
    write_json(
        &tally_path,
        &TallyDocument {
            mode: mode_name(mc.mode),
            seed: mc.source.seed,
            n_events: tally.n_events,
            n_split: tally.n_split(),
            counts: PairId::ALL
                .iter()
                .map(|&p| (p.label(), tally.counts[p]))
                .collect(),
            discards: tally.discards,
            balanced: tally.is_balanced(),
        },
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair", "estimate", "stderr", "analytic_value", "z_score"])?;
    for p in PairId::ALL {
        let c = &consistency.pairs[p];
        w.write_record([
            p.label().to_string(),
            format_number(rates[p].rate),
            format_number(rates[p].stderr),
            format_number(c.reference),
            format_number(c.z),
        ])?;
    }
    write_atomic(
        &rates_path,
        &w.into_inner().context("flushing rates table")?,
    )?;

    let ok = consistency.all_consistent();
    Ok(Outcome {
        summary: format!(
            "{} coincidences from {} split events, max |z| = {:.3}{}",
            tally.n_coincidences(),
            tally.n_split(),
            consistency.max_abs_z(),
            if ok { "" } else { " (FLAGGED)" }
        ),
        ok,
        files: vec![tally_path, rates_path],
    })
}

pub fn sweep_table(cfg: &RunConfig) -> Result<Table> {
    let f = &cfg.fig3;
    let grid = log_grid(f.delta_tau_min, f.delta_tau_max, f.points);
    let mut table = Table::new(&["delta_tau", "s", "envelope"]);
    for r in sweep_s_versus_delay(&cfg.schedule(), &cfg.settings(), &grid)? {
        table.push(vec![r.delta_tau, r.s, r.envelope]);
    }
    Ok(table)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let table = sweep_table(cfg)?;
    let dir = &cfg.output.dir;
    let mut files = vec![dir.join("s_vs_tau.csv")];
    write_csv(&files[0], &table)?;
    if cfg.output.svg {
        let path = dir.join("s_vs_tau.svg");
        write_svg(
            &path,
            &table,
            &PlotSpec {
                title: "CHSH S versus delay",
                x: "delta_tau",
                series: &["s"],
                x_label: "Delta tau",
                y_label: "S",
                log_x: true,
            },
        )?;
        files.push(path);
    }
    let first = table.rows.first().map_or(f64::NAN, |r| r[1]);
    let last = table.rows.last().map_or(f64::NAN, |r| r[1]);
    Ok(Outcome {
        summary: format!(
            "S from {first:.6} to {last:.6} over {} points",
            table.rows.len()
        ),
        ok: true,
        files,
    })
}
