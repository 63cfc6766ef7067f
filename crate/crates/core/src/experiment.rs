//! Runs an experiment family and writes its CSV table.
//!
//! Each file starts with `#` comment lines: the tool version, a SHA-256 of
//! the resolved configuration, and the configuration itself in input
//! format. Feeding those lines back through [`recover_config`] reproduces
//! the file byte for byte.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analytic::{
    bt_window, expected_handovers, handover_probability, predictive_window, reactive_window,
    signalling_overhead, HandoverKind, MobilityParams, SchemeKind,
};
use crate::config::{AnalyticTable, ExperimentConfig, ExperimentKind};
use crate::engine::sweep;
use crate::error::{Error, Result};
use crate::mobility::{
    count_handovers, measure_residence_time, simulate_prediction_outcomes, CellGrid, CellId,
    PredictionSetup,
};
use crate::stochastic::SeedSequence;

pub const TOOL_NAME: &str = "mcast-ho";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const HANDOVER_COLUMNS: [&str; 8] = [
    "distance_ms",
    "scheme",
    "mean_loss_packets",
    "mean_loss_window_ms",
    "mean_delay_ms",
    "completion_prob",
    "ci_halfwidth",
    "trials",
];

pub const MOBILITY_COLUMNS: [&str; 7] = [
    "rho",
    "k",
    "correct_rate",
    "wrong_cell_rate",
    "terminated_rate",
    "empirical_E_HO",
    "analytic_E_HO",
];

pub const ANALYTIC_HANDOVER_COLUMNS: [&str; 5] = ["rho", "k", "p_ho", "p_ho_map", "analytic_E_HO"];

pub const ANALYTIC_WINDOW_COLUMNS: [&str; 10] = [
    "distance_ms",
    "bt_loss_ms",
    "bt_delay_ms",
    "reactive_loss_ms",
    "reactive_delay_ms",
    "predictive_loss_ms",
    "predictive_erroneous_loss_ms",
    "predictive_delay_ms",
    "delta_plus_ms",
    "delta_minus_ms",
];

pub const ANALYTIC_OVERHEAD_COLUMNS: [&str; 3] = ["scheme", "handover_kind", "messages"];

fn num(x: f64) -> String {
    x.to_string()
}

/// Resolved configuration for `kind`, with the experiment key filled in.
fn resolved(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentConfig> {
    if let Some(declared) = cfg.experiment {
        if declared != kind {
            return Err(Error::Unsupported(format!(
                "configuration is for the `{declared}` experiment, not `{kind}`"
            )));
        }
    }
    cfg.validate()?;
    Ok(ExperimentConfig {
        experiment: Some(kind),
        ..cfg.clone()
    })
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut h = Sha256::new();
    for line in cfg.canonical_lines() {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn header(cfg: &ExperimentConfig) -> String {
    let mut out = format!(
        "# {TOOL_NAME} {TOOL_VERSION}\n# config_sha256: {}\n",
        config_hash(cfg)
    );
    for line in cfg.canonical_lines() {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Configuration recorded in the header of a CSV produced by this tool.
pub fn recover_config(csv_text: &str) -> Result<ExperimentConfig> {
    let lines: Vec<&str> = csv_text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| l.contains(" = "))
        .collect();
    ExperimentConfig::parse(&lines.join("\n"))
}

fn table(columns: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

fn handover_rows(cfg: &ExperimentConfig) -> Result<Vec<Vec<String>>> {
    let seeds = SeedSequence::new(cfg.master_seed);
    let rows = sweep(
        &cfg.timers,
        &cfg.stream,
        &cfg.schemes,
        &cfg.sweep.values(),
        cfg.trials,
        &seeds,
    )?;
    Ok(rows
        .into_iter()
        .map(|r| {
            vec![
                num(r.distance),
                r.scheme.to_string(),
                num(r.mean_loss_packets),
                num(r.mean_loss_window),
                num(r.mean_added_delay),
                r.completion.map(|c| num(c.p)).unwrap_or_default(),
                r.completion.map(|c| num(c.half_width)).unwrap_or_default(),
                r.trials.to_string(),
            ]
        })
        .collect())
}

fn mobility_rows(cfg: &ExperimentConfig) -> Result<Vec<Vec<String>>> {
    let seeds = SeedSequence::new(cfg.master_seed);
    let m = &cfg.mobility;
    let grid = CellGrid::new(m.radius)?;
    let residence = measure_residence_time(&grid, m.speed, m.residence_trials, &seeds)?;
    let setup = PredictionSetup {
        grid,
        speed: m.speed,
        mean_residence: residence.mean,
        spawn_cell: CellId::ORIGIN,
    };
    let eta = 1.0 / residence.mean;
    let mut rows = Vec::new();
    for &rho in &m.rho {
        let rates = simulate_prediction_outcomes(rho, &setup, cfg.trials, &seeds)?;
        for &k in &m.k {
            let params = MobilityParams::from_rho(rho, eta, k)?;
            let counts = count_handovers(&params, cfg.trials, &seeds)?;
            rows.push(vec![
                num(rho),
                num(k),
                num(rates.correct.p),
                num(rates.wrong_cell.p),
                num(rates.call_terminated.p),
                num(counts.series_estimate),
                num(expected_handovers(&params)?),
            ]);
        }
    }
    Ok(rows)
}

fn analytic_table(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    match cfg.analytic_table {
        AnalyticTable::Handovers => {
            let mut rows = Vec::new();
            for &rho in &cfg.mobility.rho {
                for &k in &cfg.mobility.k {
                    // Probabilities and expectations depend on rho only, not on the rates.
                    let p = MobilityParams::from_rho(rho, 1.0, k)?;
                    rows.push(vec![
                        num(rho),
                        num(k),
                        num(handover_probability(&p, false)),
                        num(handover_probability(&p, true)),
                        num(expected_handovers(&p)?),
                    ]);
                }
            }
            table(&ANALYTIC_HANDOVER_COLUMNS, rows)
        }
        AnalyticTable::Windows => {
            let base = cfg.timers.means();
            let rows = cfg
                .sweep
                .values()
                .into_iter()
                .map(|d| {
                    let g = crate::analytic::NetworkGeometry { t_l3: d, ..base };
                    let (bt, re) = (bt_window(&g), reactive_window(&g));
                    let (ok, wrong) = (predictive_window(&g, true), predictive_window(&g, false));
                    vec![
                        num(d),
                        num(bt.loss_window),
                        num(bt.added_delay),
                        num(re.loss_window),
                        num(re.added_delay),
                        num(ok.loss_window),
                        num(wrong.loss_window),
                        num(ok.added_delay),
                        num(ok.delta_plus),
                        num(ok.delta_minus),
                    ]
                })
                .collect();
            table(&ANALYTIC_WINDOW_COLUMNS, rows)
        }
        AnalyticTable::Overhead => {
            let combos = [
                (SchemeKind::Reactive, HandoverKind::IntraMap),
                (SchemeKind::Reactive, HandoverKind::InterMap),
                (SchemeKind::Predictive, HandoverKind::Any),
            ];
            let rows = combos
                .into_iter()
                .map(|(s, k)| {
                    Ok(vec![
                        s.to_string(),
                        k.as_str().to_string(),
                        signalling_overhead(s, k)?.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            table(&ANALYTIC_OVERHEAD_COLUMNS, rows)
        }
    }
}

/// Full CSV document (header comments and table) for an experiment.
pub fn render_experiment(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Vec<u8>> {
    let cfg = resolved(cfg, kind)?;
    let body = match kind {
        ExperimentKind::Handover => table(&HANDOVER_COLUMNS, handover_rows(&cfg)?)?,
        ExperimentKind::Mobility => table(&MOBILITY_COLUMNS, mobility_rows(&cfg)?)?,
        ExperimentKind::Analytic => analytic_table(&cfg)?,
    };
    let mut out = header(&cfg).into_bytes();
    out.extend_from_slice(&body);
    Ok(out)
}

/// Runs the experiment and writes it to `out` (`-` for standard output).
/// The file only appears once it is complete; failures leave no partial
/// output behind.
pub fn run_experiment(cfg: &ExperimentConfig, kind: ExperimentKind, out: &str) -> Result<()> {
    let bytes = render_experiment(cfg, kind)?;
    if out == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        return lock
            .write_all(&bytes)
            .and_then(|_| lock.flush())
            .map_err(|source| Error::Io {
                path: PathBuf::from("-"),
                source,
            });
    }
    write_atomically(Path::new(out), &bytes)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path.file_name().ok_or_else(|| {
        io_err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "not a file path",
        ))
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(e));
    }
    Ok(())
}
