use std::path::Path;
use std::process::Command;

use eraser_cli::commands::{cmd_fig2, cmd_fig3, cmd_sweep, fig2_tables, zeta_grid_deg};
use eraser_cli::config::RunConfig;
use eraser_cli::output::{render_svg, PlotSpec, Table};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eraser-corr"))
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (headers, rows)
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.source.seed = 7;
    cfg.fig3.points = 11;
    cfg.chsh.beta_prime_deg = 70.25;
    let path = dir.path().join("run.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
}

#[test]
fn bad_config_exits_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[mc]\nn_events = 10\n\n[settings]\nzeta = 3.0\n").unwrap();
    let out = bin()
        .arg("chsh")
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("zeta"), "{err}");
}

#[test]
fn fig2_fringes_at_quarter_turn_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.output.dir = dir.path().to_path_buf();
    cmd_fig2(&cfg).unwrap();
    let (headers, rows) = read_rows(&dir.path().join("fig2_upper.csv"));
    assert_eq!(headers, ["zeta_deg", "r14_norm", "r13_norm"]);
    assert_eq!(rows.len(), 361);
    let at = |z: f64| {
        rows.iter()
            .find(|r| (r[0] - z).abs() < 1e-9)
            .unwrap()
            .clone()
    };
    let r = at(22.5);
    assert!(r[1].abs() < 1e-12 && (r[2] - 1.0).abs() < 1e-12, "{r:?}");
    let r = at(112.5);
    assert!((r[1] - 1.0).abs() < 1e-12 && r[2].abs() < 1e-12, "{r:?}");

    let (headers, lower) = read_rows(&dir.path().join("fig2_lower.csv"));
    assert_eq!(headers, ["zeta_deg", "i1i4_norm", "i1i3_norm"]);
    // ungated curves never reach zero: no erasure without the gate
    let min = lower
        .iter()
        .flat_map(|r| [r[1], r[2]])
        .fold(f64::INFINITY, f64::min);
    assert!(min > 0.3, "{min}");
}

#[test]
fn fig2_grid_includes_both_ends() {
    let g = zeta_grid_deg(0.5);
    assert_eq!((g[0], *g.last().unwrap(), g.len()), (0.0, 180.0, 361));
    assert_eq!(zeta_grid_deg(7.0).last(), Some(&175.0));
}

#[test]
fn fig2_tables_are_normalised() {
    let (upper, lower) = fig2_tables(&RunConfig::default()).unwrap();
    for t in [upper, lower] {
        let max = t.rows.iter().flat_map(|r| [r[1], r[2]]).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }
}

#[test]
fn fig3_and_sweep_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.output.dir = dir.path().to_path_buf();
    cfg.output.svg = true;
    cmd_fig3(&cfg).unwrap();
    cmd_sweep(&cfg).unwrap();

    let (headers, rows) = read_rows(&dir.path().join("fig3.csv"));
    assert_eq!(
        headers,
        ["delta_tau", "r14", "r13", "plateau_ref", "envelope"]
    );
    assert_eq!(rows.len(), cfg.fig3.points);
    // above the plateau at short delay, below it for R14 at ζ = 45°, ξ = 22.5°
    let first = &rows[0];
    assert!(first[2] > first[3] && first[1] < first[3], "{first:?}");

    let (_, s_rows) = read_rows(&dir.path().join("s_vs_tau.csv"));
    assert!((s_rows[0][1] - 2.0 * 2f64.sqrt()).abs() < 1e-3);
    assert!((s_rows.last().unwrap()[1] - 2f64.sqrt()).abs() < 1e-2);

    for name in ["fig3.svg", "s_vs_tau.svg"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        roxmltree::Document::parse(&text).unwrap();
    }
}

#[test]
fn svg_is_well_formed_with_legend_and_ticks() {
    let mut t = Table::new(&["x", "a", "b"]);
    for k in 0..20 {
        let x = k as f64;
        t.push(vec![x, x.sin(), -x.cos()]);
    }
    let svg = render_svg(
        &t,
        &PlotSpec {
            title: "a & b < c",
            x: "x",
            series: &["a", "b"],
            x_label: "x",
            y_label: "y",
            log_x: false,
        },
    )
    .unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let class = |c: &str| {
        doc.descendants()
            .filter(|n| n.attribute("class") == Some(c))
            .count()
    };
    assert_eq!(class("series"), 2);
    assert_eq!(class("legend"), 2);
    assert_eq!(class("tick"), 10);
    assert!(doc.descendants().any(|n| n.text() == Some("a & b < c")));
}

#[test]
fn binary_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(format!("{sub}-{threads}"));
        let status = bin()
            .args([
                "mc",
                "--events",
                "50000",
                "--seed",
                "11",
                "--mode",
                "classical",
            ])
            .arg("--out")
            .arg(&out)
            .env("ERASER_CORR_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        (
            std::fs::read(out.join("tally.json")).unwrap(),
            std::fs::read(out.join("rates.csv")).unwrap(),
        )
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "3"));
    assert_eq!(a, run("c", "1"));
}

#[test]
fn chsh_json_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["chsh", "--format", "json", "--mode", "classical"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    let text = std::fs::read_to_string(dir.path().join("chsh_report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["mode"], "classical");
    assert_eq!(v["engine"], "analytic");
    assert_eq!(v["bound"], "classical");
    assert_eq!(v["within_bound"], true);
    assert_eq!(v["correlations"].as_array().unwrap().len(), 4);
    assert!(v["seed"].is_null());
    assert!(v["s"].as_f64().unwrap() < 2.0);
}
