//! Experiment configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! trials = 10000
//! timers.anticipation.mean = 50
//! timers.anticipation.perturbation = 30
//! sweep.variable = router_distance
//! sweep.start = 0
//! sweep.stop = 40
//! sweep.step = 5
//! mobility.rho = 0.1, 0.5, 1, 2, 5
//! ```
//!
//! Durations are milliseconds. Every key has a default, so an empty file is
//! a valid configuration; a custom sweep must name all of its bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analytic::SchemeKind;
use crate::engine::{StreamConfig, TimerSet, DEFAULT_TRIALS};
use crate::error::{Error, Result};
use crate::stochastic::PerturbedTimer;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Analytic,
    Handover,
    Mobility,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Analytic => "analytic",
            ExperimentKind::Handover => "handover",
            ExperimentKind::Mobility => "mobility",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "analytic" => Ok(ExperimentKind::Analytic),
            "handover" => Ok(ExperimentKind::Handover),
            "mobility" => Ok(ExperimentKind::Mobility),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticTable {
    /// Handover probabilities and expected counts over the rho x k grid.
    Handovers,
    /// Loss and delay windows over the router-distance sweep.
    Windows,
    /// Signalling message counts.
    Overhead,
}

impl AnalyticTable {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalyticTable::Handovers => "handovers",
            AnalyticTable::Windows => "windows",
            AnalyticTable::Overhead => "overhead",
        }
    }
}

impl FromStr for AnalyticTable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "handovers" => Ok(AnalyticTable::Handovers),
            "windows" => Ok(AnalyticTable::Windows),
            "overhead" => Ok(AnalyticTable::Overhead),
            other => Err(format!("unknown analytic table `{other}`")),
        }
    }
}

/// Inclusive arithmetic sweep over the mean router distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            variable: "router_distance".into(),
            start: 0.0,
            stop: 40.0,
            step: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySpec {
    pub rho: Vec<f64>,
    pub k: Vec<f64>,
    pub radius: f64,
    pub speed: f64,
    /// Trajectories used to calibrate the mean cell residence time.
    pub residence_trials: usize,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        Self {
            rho: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            k: vec![1.0, 4.0, 9.0],
            radius: 1.0,
            speed: 1.0,
            residence_trials: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// When set, the experiment this file is meant for.
    pub experiment: Option<ExperimentKind>,
    pub master_seed: u64,
    pub trials: usize,
    pub sweep: SweepSpec,
    pub timers: TimerSet,
    pub stream: StreamConfig,
    pub schemes: Vec<SchemeKind>,
    pub mobility: MobilitySpec,
    pub analytic_table: AnalyticTable,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            master_seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            sweep: SweepSpec::default(),
            timers: TimerSet::reference(10.0).expect("reference timers are valid"),
            stream: StreamConfig::default(),
            schemes: SchemeKind::ALL.to_vec(),
            mobility: MobilitySpec::default(),
            analytic_table: AnalyticTable::Handovers,
            output: None,
        }
    }
}

const TIMER_NAMES: [&str; 8] = [
    "anticipation",
    "l2_handoff",
    "local_ip",
    "m1",
    "m2",
    "l1",
    "l2",
    "router_distance",
];

fn timer_mut<'a>(timers: &'a mut TimerSet, name: &str) -> Option<&'a mut PerturbedTimer> {
    Some(match name {
        "anticipation" => &mut timers.anticipation,
        "l2_handoff" => &mut timers.l2_handoff,
        "local_ip" => &mut timers.local_ip,
        "m1" => &mut timers.m1,
        "m2" => &mut timers.m2,
        "l1" => &mut timers.l1,
        "l2" => &mut timers.l2,
        "router_distance" => &mut timers.router_distance,
        _ => return None,
    })
}

fn timer_ref<'a>(timers: &'a TimerSet, name: &str) -> &'a PerturbedTimer {
    match name {
        "anticipation" => &timers.anticipation,
        "l2_handoff" => &timers.l2_handoff,
        "local_ip" => &timers.local_ip,
        "m1" => &timers.m1,
        "m2" => &timers.m2,
        "l1" => &timers.l1,
        "l2" => &timers.l2,
        _ => &timers.router_distance,
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn number(e: &Entry, key: &str) -> Result<f64> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| err(e.line, key, format!("expected a number, got `{}`", e.value)))?;
    if !v.is_finite() {
        return Err(err(e.line, key, "must be finite"));
    }
    Ok(v)
}

fn non_negative(e: &Entry, key: &str) -> Result<f64> {
    let v = number(e, key)?;
    if v < 0.0 {
        return Err(err(e.line, key, format!("must be >= 0, got {v}")));
    }
    Ok(v)
}

fn positive(e: &Entry, key: &str) -> Result<f64> {
    let v = number(e, key)?;
    if v <= 0.0 {
        return Err(err(e.line, key, format!("must be > 0, got {v}")));
    }
    Ok(v)
}

fn count(e: &Entry, key: &str) -> Result<usize> {
    let v: usize = e.value.parse().map_err(|_| {
        err(
            e.line,
            key,
            format!("expected a non-negative integer, got `{}`", e.value),
        )
    })?;
    if v == 0 {
        return Err(err(e.line, key, "must be >= 1"));
    }
    Ok(v)
}

fn number_list(e: &Entry, key: &str, min: f64, inclusive: bool) -> Result<Vec<f64>> {
    let values = e
        .value
        .split(',')
        .map(|item| {
            let item = item.trim();
            let v: f64 = item
                .parse()
                .map_err(|_| err(e.line, key, format!("expected a number, got `{item}`")))?;
            let ok = v.is_finite() && if inclusive { v >= min } else { v > min };
            if !ok {
                let op = if inclusive { ">=" } else { ">" };
                return Err(err(
                    e.line,
                    key,
                    format!("values must be {op} {min}, got {v}"),
                ));
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(line, content, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(err(line, key, "empty key"));
            }
            if let Some(prev) = entries.get(key) {
                return Err(err(
                    line,
                    key,
                    format!("duplicate key, first set on line {}", prev.line),
                ));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }

        let mut cfg = ExperimentConfig::default();
        let mut sweep_keys = Vec::new();
        for (key, e) in &entries {
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["experiment"] => {
                    cfg.experiment =
                        Some(e.value.parse().map_err(|m: String| err(e.line, key, m))?);
                }
                ["seed"] => {
                    cfg.master_seed = e.value.parse().map_err(|_| {
                        err(
                            e.line,
                            key,
                            format!("expected a 64-bit unsigned integer, got `{}`", e.value),
                        )
                    })?;
                }
                ["trials"] => cfg.trials = count(e, key)?,
                ["output"] => cfg.output = Some(e.value.clone()),
                ["stream", "period"] => {
                    cfg.stream = StreamConfig::new(positive(e, key)?)?;
                }
                ["timers", name, field @ ("mean" | "perturbation")] => {
                    let Some(timer) = timer_mut(&mut cfg.timers, name) else {
                        return Err(err(e.line, key, format!("unknown timer `{name}`")));
                    };
                    let v = non_negative(e, key)?;
                    *timer = if *field == "mean" {
                        PerturbedTimer::new(v, timer.perturbation())?
                    } else {
                        PerturbedTimer::new(timer.mean(), v)?
                    };
                }
                ["sweep", field] => {
                    match *field {
                        "variable" => {
                            if !matches!(e.value.as_str(), "router_distance" | "t_l3") {
                                return Err(err(
                                    e.line,
                                    key,
                                    format!(
                                        "only `router_distance` can be swept, got `{}`",
                                        e.value
                                    ),
                                ));
                            }
                            cfg.sweep.variable = "router_distance".into();
                        }
                        "start" => cfg.sweep.start = non_negative(e, key)?,
                        "stop" => cfg.sweep.stop = non_negative(e, key)?,
                        "step" => cfg.sweep.step = positive(e, key)?,
                        _ => return Err(err(e.line, key, "unknown key")),
                    }
                    sweep_keys.push(*field);
                }
                ["handover", "schemes"] => {
                    let schemes = e
                        .value
                        .split(',')
                        .map(|s| {
                            s.parse::<SchemeKind>()
                                .map_err(|x| err(e.line, key, x.to_string()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let mut seen = schemes.clone();
                    seen.sort();
                    seen.dedup();
                    if seen.len() != schemes.len() {
                        return Err(err(e.line, key, "schemes must not repeat"));
                    }
                    cfg.schemes = schemes;
                }
                ["mobility", "rho"] => cfg.mobility.rho = number_list(e, key, 0.0, false)?,
                ["mobility", "k"] => cfg.mobility.k = number_list(e, key, 1.0, true)?,
                ["mobility", "radius"] => cfg.mobility.radius = positive(e, key)?,
                ["mobility", "speed"] => cfg.mobility.speed = positive(e, key)?,
                ["mobility", "residence_trials"] => cfg.mobility.residence_trials = count(e, key)?,
                ["analytic", "table"] => {
                    cfg.analytic_table =
                        e.value.parse().map_err(|m: String| err(e.line, key, m))?;
                }
                _ => return Err(err(e.line, key, "unknown key")),
            }
        }

        if !sweep_keys.is_empty() {
            let anchor = entries
                .iter()
                .filter(|(k, _)| k.starts_with("sweep."))
                .map(|(_, e)| e.line)
                .min()
                .unwrap_or(0);
            for required in ["start", "stop", "step"] {
                if !sweep_keys.contains(&required) {
                    return Err(err(
                        anchor,
                        &format!("sweep.{required}"),
                        "missing required key",
                    ));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.stop < self.sweep.start {
            return Err(Error::Validation(format!(
                "sweep range is empty: stop {} < start {}",
                self.sweep.stop, self.sweep.start
            )));
        }
        if self.sweep.step.is_nan() || self.sweep.step <= 0.0 {
            return Err(Error::Validation("sweep.step must be > 0".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Validation(
                "handover.schemes must not be empty".into(),
            ));
        }
        if self.mobility.rho.is_empty() || self.mobility.k.is_empty() {
            return Err(Error::Validation(
                "mobility.rho and mobility.k must not be empty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolved configuration in the input format, one key per line in a
    /// fixed order. Parsing it back yields the same configuration. The
    /// output path is not part of it.
    pub fn canonical_lines(&self) -> Vec<String> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut lines = Vec::new();
        if let Some(kind) = self.experiment {
            lines.push(format!("experiment = {kind}"));
        }
        lines.push(format!("seed = {}", self.master_seed));
        lines.push(format!("trials = {}", self.trials));
        lines.push(format!("stream.period = {}", self.stream.packet_period()));
        for name in TIMER_NAMES {
            let t = timer_ref(&self.timers, name);
            lines.push(format!("timers.{name}.mean = {}", t.mean()));
            lines.push(format!("timers.{name}.perturbation = {}", t.perturbation()));
        }
        lines.push(format!("sweep.variable = {}", self.sweep.variable));
        lines.push(format!("sweep.start = {}", self.sweep.start));
        lines.push(format!("sweep.stop = {}", self.sweep.stop));
        lines.push(format!("sweep.step = {}", self.sweep.step));
        let schemes: Vec<&str> = self.schemes.iter().map(|s| s.as_str()).collect();
        lines.push(format!("handover.schemes = {}", schemes.join(", ")));
        lines.push(format!("mobility.rho = {}", join(&self.mobility.rho)));
        lines.push(format!("mobility.k = {}", join(&self.mobility.k)));
        lines.push(format!("mobility.radius = {}", self.mobility.radius));
        lines.push(format!("mobility.speed = {}", self.mobility.speed));
        lines.push(format!(
            "mobility.residence_trials = {}",
            self.mobility.residence_trials
        ));
        lines.push(format!("analytic.table = {}", self.analytic_table.as_str()));
        lines
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    // A CSV written by this tool carries its configuration in the header.
    if text.starts_with(&format!("# {} ", crate::experiment::TOOL_NAME)) {
        return crate::experiment::recover_config(&text);
    }
    ExperimentConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        let t = &cfg.timers;
        assert_eq!(
            (t.anticipation.mean(), t.anticipation.perturbation()),
            (50.0, 30.0)
        );
        assert_eq!(
            (t.l2_handoff.mean(), t.l2_handoff.perturbation()),
            (50.0, 10.0)
        );
        assert_eq!((t.m1.mean(), t.m1.perturbation()), (2.0, 1.0));
        assert_eq!((t.m2.mean(), t.m2.perturbation()), (2.0, 1.0));
        assert_eq!(t.router_distance.perturbation(), 2.5);
        assert_eq!(t.local_ip.mean(), 0.0);
        assert_eq!(t.l1.mean(), 20.0);
        assert_eq!(cfg.stream.packet_period(), 10.0);
        assert_eq!(cfg.trials, 10_000);
        assert_eq!(
            cfg.sweep.values(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
        );
    }

    #[test]
    fn overrides_apply() {
        let cfg = ExperimentConfig::parse(
            "# comment\ntrials = 1\n\ntimers.anticipation.mean = 40\nhandover.schemes = predictive, reactive\n",
        )
        .unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.timers.anticipation.mean(), 40.0);
        assert_eq!(cfg.timers.anticipation.perturbation(), 30.0);
        assert_eq!(
            cfg.schemes,
            vec![SchemeKind::Predictive, SchemeKind::Reactive]
        );
        assert!(cfg.canonical_lines().contains(&"trials = 1".to_string()));
    }

    #[test]
    fn negative_mean_names_key_and_line() {
        let e = ExperimentConfig::parse("seed = 3\ntimers.l2_handoff.mean = -5\n").unwrap_err();
        match e {
            Error::Config { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "timers.l2_handoff.mean");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let cases = [
            ("bogus = 1", "bogus"),
            ("timers.warp.mean = 1", "timers.warp.mean"),
            ("trials = many", "trials"),
            ("stream.period = 0", "stream.period"),
            (
                "sweep.variable = anticipation\nsweep.start = 0\nsweep.stop = 1\nsweep.step = 1",
                "sweep.variable",
            ),
            ("mobility.k = 0.5", "mobility.k"),
            ("handover.schemes = bt, teleport", "handover.schemes"),
        ];
        for (text, want) in cases {
            match ExperimentConfig::parse(text) {
                Err(Error::Config { key, .. }) => assert_eq!(key, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(
            ExperimentConfig::parse("seed = 1\nseed = 2"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("just words"),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn partial_sweep_is_missing_keys() {
        match ExperimentConfig::parse("\nsweep.start = 0\nsweep.stop = 10\n") {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "sweep.step");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("sweep.start = 10\nsweep.stop = 5\nsweep.step = 1"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ExperimentConfig::parse(
            "experiment = mobility\nseed = 99\nmobility.rho = 0.25, 3\ntimers.router_distance.mean = 12.5\n",
        )
        .unwrap();
        let again = ExperimentConfig::parse(&cfg.canonical_lines().join("\n")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn sweep_values_do_not_accumulate_error() {
        let s = SweepSpec {
            variable: "router_distance".into(),
            start: 0.0,
            stop: 1.0,
            step: 0.1,
        };
        let v = s.values();
        assert_eq!(v.len(), 11);
        assert_eq!(v[10], 1.0);
    }
}
