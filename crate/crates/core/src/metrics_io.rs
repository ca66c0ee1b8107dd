//! Per-slot metrics, parameter sweeps and result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::AlgorithmId;
use crate::ciim::{run_simulation, Simulation};
use crate::error::{Error, Result};
use crate::scenario::{ConstellationConfig, Scenario};

/// Schema version stamped on every emitted file.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub t: usize,
    pub algo: AlgorithmId,
    pub sum_rate_bps: f64,
    pub backhaul_capacity_total_bps: f64,
    /// Per TBS.
    pub backhaul_capacity_bps: Vec<f64>,
    /// Per GEO ground station.
    pub geo_gs_cinr_db: Vec<f64>,
    pub interference_w: Vec<f64>,
    pub handover_count: usize,
    pub unserved_gu_count: usize,
    pub dual_value: f64,
    pub converged: bool,
    /// Failed constraint ids joined by `;`, empty when feasible.
    pub violations: String,
    pub iterations: usize,
    pub imish_rounds: usize,
    pub uara_rounds: usize,
}

impl SlotMetrics {
    pub fn min_cinr_db(&self) -> f64 {
        self.geo_gs_cinr_db.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

const SLOT_HEADER: [&str; 11] = [
    "t",
    "algo",
    "sum_rate_bps",
    "backhaul_capacity_bps",
    "geo_gs_cinr_db_min",
    "handover_count",
    "unserved_gu_count",
    "dual_value",
    "converged",
    "iterations",
    "violations",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse { what: "csv".into(), message: e.to_string() }
}

fn stamp(kind: &str) -> String {
    format!("# istn-sim {kind} v{FORMAT_VERSION}\n")
}

/// One row per slot.
pub fn slots_to_csv(metrics: &[SlotMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(stamp("slots").into_bytes());
    w.write_record(SLOT_HEADER).map_err(csv_err)?;
    for m in metrics {
        w.write_record([
            m.t.to_string(),
            m.algo.to_string(),
            m.sum_rate_bps.to_string(),
            m.backhaul_capacity_total_bps.to_string(),
            m.min_cinr_db().to_string(),
            m.handover_count.to_string(),
            m.unserved_gu_count.to_string(),
            m.dual_value.to_string(),
            m.converged.to_string(),
            m.iterations.to_string(),
            m.violations.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse { what: "csv".into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `slots.csv`, `slots.json` and `handovers.csv` for one run.
pub fn write_run(sim: &Simulation, dir: &Path) -> Result<Vec<PathBuf>> {
    if sim.metrics.is_empty() {
        return Err(Error::EmptyResults);
    }
    ensure_dir(dir)?;
    let slots = dir.join("slots.csv");
    write_file(&slots, &slots_to_csv(&sim.metrics)?)?;
    let json = dir.join("slots.json");
    let body = serde_json::json!({ "version": FORMAT_VERSION, "slots": sim.metrics });
    write_file(&json, &(serde_json::to_string_pretty(&body).expect("metrics serialize") + "\n"))?;
    let ho = dir.join("handovers.csv");
    write_file(&ho, &sim.handovers.to_csv())?;
    Ok(vec![slots, json, ho])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Ground users per square kilometre.
    #[serde(rename = "D_GU")]
    GuDensity,
    /// Handover threshold in dB.
    #[serde(rename = "H")]
    HandoverThreshold,
    #[serde(rename = "CINR_th")]
    CinrThreshold,
    #[serde(rename = "N_r")]
    MaxLinks,
    /// Total number of Walker satellites, spread evenly over the configured planes.
    #[serde(rename = "constellation_size")]
    ConstellationSize,
    #[serde(rename = "U_back")]
    BackhaulRate,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::GuDensity,
        SweepVariable::HandoverThreshold,
        SweepVariable::CinrThreshold,
        SweepVariable::MaxLinks,
        SweepVariable::ConstellationSize,
        SweepVariable::BackhaulRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::GuDensity => "D_GU",
            SweepVariable::HandoverThreshold => "H",
            SweepVariable::CinrThreshold => "CINR_th",
            SweepVariable::MaxLinks => "N_r",
            SweepVariable::ConstellationSize => "constellation_size",
            SweepVariable::BackhaulRate => "U_back",
        }
    }

    /// Copy of `base` with this variable set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        let count = |field: &'static str| -> Result<usize> {
            if value.is_finite() && value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::invalid(field, format!("{value} is not a positive integer")))
            }
        };
        match self {
            SweepVariable::GuDensity => {
                let area_km2 = s.area_side_m * s.area_side_m / 1e6;
                let n = (value * area_km2).round();
                if !(n >= 1.0) {
                    return Err(Error::invalid("D_GU", format!("{value} per km² leaves no users")));
                }
                s.n_gu = n as usize;
            }
            SweepVariable::HandoverThreshold => s.handover_threshold_db = value,
            SweepVariable::CinrThreshold => s.cinr_threshold_db = value,
            SweepVariable::MaxLinks => s.n_connect = count("N_r")?,
            SweepVariable::ConstellationSize => {
                let total = count("constellation_size")?;
                match &mut s.constellation {
                    ConstellationConfig::Walker { planes, sats_per_plane, .. } => {
                        if total % *planes != 0 {
                            return Err(Error::invalid(
                                "constellation_size",
                                format!("{total} satellites do not divide over {planes} planes"),
                            ));
                        }
                        *sats_per_plane = total / *planes;
                    }
                    ConstellationConfig::Trace { .. } => {
                        return Err(Error::invalid("constellation_size", "cannot resize a trace constellation"))
                    }
                }
            }
            SweepVariable::BackhaulRate => {
                if !(value >= 0.0) {
                    return Err(Error::invalid("U_back", "must be non-negative"));
                }
                s.caching.u_back_bps = value;
            }
        }
        Ok(s)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepVariable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("variable", format!("unknown sweep variable `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algos: Vec<AlgorithmId>,
    /// Base scenario file, relative to the spec file.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    /// Overrides the base scenario's slot count.
    #[serde(default)]
    pub n_timeslots: Option<usize>,
    /// Upper bound on concurrently running cells; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Parse { what: "sweep spec".into(), message: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = SweepSpec::from_toml_str(&text)?;
        if let (Some(p), Some(dir)) = (&mut spec.scenario, path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        if self.algos.is_empty() {
            return Err(Error::invalid("algos", "must not be empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        if self.n_timeslots == Some(0) {
            return Err(Error::invalid("n_timeslots", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        Ok(())
    }

    /// Base scenario named by the spec, or the defaults.
    pub fn base_scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => Scenario::from_file(p),
            None => Ok(Scenario::default()),
        }
    }
}

/// Whole-run aggregates of one (value, seed, algo) simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Mean over slots.
    pub sum_rate_bps: f64,
    /// Mean over slots of the total backhaul capacity.
    pub backhaul_capacity_bps: f64,
    /// Worst GS CINR over all slots.
    pub geo_gs_cinr_db_min: f64,
    pub handovers: usize,
    /// Mean over slots.
    pub unserved_gu: f64,
    pub violating_slots: usize,
}

impl RunSummary {
    pub fn from_metrics(metrics: &[SlotMetrics]) -> Self {
        let n = metrics.len().max(1) as f64;
        RunSummary {
            sum_rate_bps: metrics.iter().map(|m| m.sum_rate_bps).sum::<f64>() / n,
            backhaul_capacity_bps: metrics.iter().map(|m| m.backhaul_capacity_total_bps).sum::<f64>() / n,
            geo_gs_cinr_db_min: metrics.iter().map(SlotMetrics::min_cinr_db).fold(f64::INFINITY, f64::min),
            handovers: metrics.iter().map(|m| m.handover_count).sum(),
            unserved_gu: metrics.iter().map(|m| m.unserved_gu_count as f64).sum::<f64>() / n,
            violating_slots: metrics.iter().filter(|m| !m.violations.is_empty()).count(),
        }
    }

    fn field(&self, metric: Metric) -> f64 {
        match metric {
            Metric::SumRate => self.sum_rate_bps,
            Metric::BackhaulCapacity => self.backhaul_capacity_bps,
            Metric::GeoGsCinrMin => self.geo_gs_cinr_db_min,
            Metric::Handovers => self.handovers as f64,
            Metric::Unserved => self.unserved_gu,
            Metric::ViolatingSlots => self.violating_slots as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub value: f64,
    pub seed: u64,
    pub algo: AlgorithmId,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    SumRate,
    BackhaulCapacity,
    GeoGsCinrMin,
    Handovers,
    Unserved,
    ViolatingSlots,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::SumRate,
        Metric::BackhaulCapacity,
        Metric::GeoGsCinrMin,
        Metric::Handovers,
        Metric::Unserved,
        Metric::ViolatingSlots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SumRate => "sum_rate_bps",
            Metric::BackhaulCapacity => "backhaul_capacity_bps",
            Metric::GeoGsCinrMin => "geo_gs_cinr_db_min",
            Metric::Handovers => "handovers",
            Metric::Unserved => "unserved_gu",
            Metric::ViolatingSlots => "violating_slots",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    /// Mean and standard error of the mean; NaN when empty, zero spread for one sample.
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Stat { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Stat { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Stat { mean, stderr: (var / n).sqrt() }
    }
}

/// Seed-aggregated result of one (value, algo) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub value: f64,
    pub algo: AlgorithmId,
    pub runs: usize,
    pub failed: usize,
    /// In [`Metric::ALL`] order.
    pub stats: Vec<Stat>,
    /// Failure messages joined by ` | `.
    pub errors: String,
}

impl CellSummary {
    pub fn stat(&self, metric: Metric) -> Stat {
        self.stats[Metric::ALL.iter().position(|&m| m == metric).expect("known metric")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    /// Values × seeds × algos, in spec order.
    pub runs: Vec<RunRecord>,
    /// Values × algos, in spec order.
    pub cells: Vec<CellSummary>,
}

fn run_one(spec: &SweepSpec, base: &Scenario, value: f64, seed: u64, algo: AlgorithmId) -> RunRecord {
    let outcome = spec
        .variable
        .apply(base, value)
        .and_then(|mut s| {
            s.rng_seed = seed;
            if let Some(t) = spec.n_timeslots {
                s.n_timeslots = t;
            }
            run_simulation(&s, algo)
        })
        .map(|sim| RunSummary::from_metrics(&sim.metrics))
        .map_err(|e| e.to_string());
    RunRecord { value, seed, algo, outcome }
}

/// Aggregates per-run records into cells, keeping first-seen (value, algo) order.
pub fn summarize(runs: &[RunRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, AlgorithmId)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|k| k.0.to_bits() == r.value.to_bits() && k.1 == r.algo) {
            keys.push((r.value, r.algo));
        }
    }
    keys.into_iter()
        .map(|(value, algo)| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.value.to_bits() == value.to_bits() && r.algo == algo).collect();
            let ok: Vec<&RunSummary> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let errors: Vec<String> = mine
                .iter()
                .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("seed {}: {e}", r.seed)))
                .collect();
            CellSummary {
                value,
                algo,
                runs: mine.len(),
                failed: errors.len(),
                stats: Metric::ALL.iter().map(|&m| Stat::of(&ok.iter().map(|r| r.field(m)).collect::<Vec<_>>())).collect(),
                errors: errors.join(" | "),
            }
        })
        .collect()
}

/// Runs every (value, seed, algo) combination; failed runs are recorded, not fatal.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(f64, u64, AlgorithmId)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().flat_map(move |&s| spec.algos.iter().map(move |&a| (v, s, a))))
        .collect();
    let work = || jobs.par_iter().map(|&(v, s, a)| run_one(spec, base, v, s, a)).collect::<Vec<_>>();
    let runs = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(work),
        None => work(),
    };
    let cells = summarize(&runs);
    Ok(SweepResult { variable: spec.variable, runs, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(Error::invalid("format", format!("unknown format `{other}`"))),
        }
    }
}

fn cell_header() -> Vec<String> {
    let mut h: Vec<String> = ["variable", "value", "algo", "runs", "failed"].map(String::from).to_vec();
    for m in Metric::ALL {
        h.push(format!("{}_mean", m.name()));
        h.push(format!("{}_stderr", m.name()));
    }
    h.push("errors".into());
    h
}

/// One row per cell.
pub fn cells_to_csv(variable: SweepVariable, cells: &[CellSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(stamp("sweep").into_bytes());
    w.write_record(cell_header()).map_err(csv_err)?;
    for c in cells {
        let mut row = vec![variable.name().to_string(), c.value.to_string(), c.algo.to_string(), c.runs.to_string(), c.failed.to_string()];
        for s in &c.stats {
            row.push(s.mean.to_string());
            row.push(s.stderr.to_string());
        }
        row.push(c.errors.clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse { what: "csv".into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inverse of [`cells_to_csv`].
pub fn cells_from_csv(text: &str) -> Result<(SweepVariable, Vec<CellSummary>)> {
    let bad = |m: String| Error::Parse { what: "sweep csv".into(), message: m };
    let first = text.lines().next().unwrap_or_default();
    if first.trim_end() != stamp("sweep").trim_end() {
        return Err(bad(format!("unsupported version line `{first}`")));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != cell_header() {
        return Err(bad("unexpected column set".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
    let mut variable = None;
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let v: SweepVariable = rec[0].parse()?;
        if variable.is_some_and(|w| w != v) {
            return Err(bad("mixed sweep variables".into()));
        }
        variable = Some(v);
        let stats = (0..Metric::ALL.len())
            .map(|i| Ok(Stat { mean: num(&rec[5 + 2 * i])?, stderr: num(&rec[6 + 2 * i])? }))
            .collect::<Result<Vec<_>>>()?;
        cells.push(CellSummary {
            value: num(&rec[1])?,
            algo: rec[2].parse()?,
            runs: int(&rec[3])?,
            failed: int(&rec[4])?,
            stats,
            errors: rec[rec.len() - 1].to_string(),
        });
    }
    Ok((variable.ok_or_else(|| bad("no rows".into()))?, cells))
}

/// Per-run CSV, one row per (value, seed, algo).
pub fn runs_to_csv(variable: SweepVariable, runs: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(stamp("sweep-runs").into_bytes());
    let mut header: Vec<String> = ["variable", "value", "seed", "algo"].map(String::from).to_vec();
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    header.push("error".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in runs {
        let mut row = vec![variable.name().to_string(), r.value.to_string(), r.seed.to_string(), r.algo.to_string()];
        match &r.outcome {
            Ok(s) => {
                row.extend(Metric::ALL.iter().map(|&m| s.field(m).to_string()));
                row.push(String::new());
            }
            Err(e) => {
                row.extend(Metric::ALL.iter().map(|_| String::new()));
                row.push(e.clone());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse { what: "csv".into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Nested as variable → algo → list of cells in value order.
pub fn cells_to_json(variable: SweepVariable, cells: &[CellSummary]) -> String {
    let mut by_algo: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
    for c in cells {
        let mut metrics = serde_json::Map::new();
        for (m, s) in Metric::ALL.iter().zip(&c.stats) {
            metrics.insert(m.name().into(), serde_json::json!({ "mean": json_num(s.mean), "stderr": json_num(s.stderr) }));
        }
        by_algo.entry(c.algo.to_string()).or_default().push(serde_json::json!({
            "value": json_num(c.value),
            "runs": c.runs,
            "failed": c.failed,
            "metrics": metrics,
            "errors": c.errors,
        }));
    }
    let body = serde_json::json!({ "version": FORMAT_VERSION, variable.name(): by_algo });
    serde_json::to_string_pretty(&body).expect("json values serialize") + "\n"
}

/// Whitespace-separated `x y err` series, one block per algo.
pub fn cells_to_plotdata(variable: SweepVariable, cells: &[CellSummary], metric: Metric) -> String {
    let mut out = stamp("plotdata");
    let _ = writeln!(out, "# x = {}, y = {}", variable.name(), metric.name());
    let mut algos: Vec<AlgorithmId> = Vec::new();
    for c in cells {
        if !algos.contains(&c.algo) {
            algos.push(c.algo);
        }
    }
    for (i, algo) in algos.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# algo {algo}");
        for c in cells.iter().filter(|c| c.algo == *algo) {
            let s = c.stat(metric);
            let _ = writeln!(out, "{} {} {}", c.value, s.mean, s.stderr);
        }
    }
    out
}

/// Writes `result` under `dir` in `format`; returns the written paths.
pub fn emit(result: &SweepResult, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.cells.is_empty() {
        return Err(Error::EmptyResults);
    }
    ensure_dir(dir)?;
    let v = result.variable;
    let mut written = Vec::new();
    match format {
        Format::Csv => {
            let cells = dir.join("sweep.csv");
            write_file(&cells, &cells_to_csv(v, &result.cells)?)?;
            let runs = dir.join("runs.csv");
            write_file(&runs, &runs_to_csv(v, &result.runs)?)?;
            written.extend([cells, runs]);
        }
        Format::Json => {
            let p = dir.join("sweep.json");
            write_file(&p, &cells_to_json(v, &result.cells))?;
            written.push(p);
        }
        Format::Plotdata => {
            for m in Metric::ALL {
                let p = dir.join(format!("{}.dat", m.name()));
                write_file(&p, &cells_to_plotdata(v, &result.cells, m))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(value: f64, algo: AlgorithmId) -> CellSummary {
        CellSummary {
            value,
            algo,
            runs: 2,
            failed: 0,
            stats: Metric::ALL.iter().enumerate().map(|(i, _)| Stat { mean: 1.5 * i as f64 + value, stderr: 0.1 / 3.0 }).collect(),
            errors: String::new(),
        }
    }

    #[test]
    fn stat_basics() {
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.stderr - 1.0).abs() < 1e-12);
        assert_eq!(Stat::of(&[4.0]).stderr, 0.0);
        assert!(Stat::of(&[]).mean.is_nan());
    }

    #[test]
    fn spec_parses_and_validates() {
        let spec = SweepSpec::from_toml_str("variable = \"H\"\nvalues = [1.0, 3.0]\nseeds = [1]\nalgos = [\"ciim\", \"mdh\"]").unwrap();
        assert_eq!(spec.variable, SweepVariable::HandoverThreshold);
        assert_eq!(spec.algos, vec![AlgorithmId::Ciim, AlgorithmId::Mdh]);
        assert!(SweepSpec::from_toml_str("variable = \"H\"\nvalues = []\nseeds = [1]\nalgos = [\"ciim\"]").is_err());
        assert!(SweepSpec::from_toml_str("variable = \"Q\"\nvalues = [1.0]\nseeds = [1]\nalgos = [\"ciim\"]").is_err());
    }

    #[test]
    fn variables_apply() {
        let base = Scenario::default();
        let s = SweepVariable::GuDensity.apply(&base, 10.0).unwrap();
        assert_eq!(s.n_gu, (10.0 * base.area_side_m * base.area_side_m / 1e6).round() as usize);
        assert_eq!(SweepVariable::MaxLinks.apply(&base, 4.0).unwrap().n_connect, 4);
        assert!(SweepVariable::MaxLinks.apply(&base, 2.5).is_err());
        assert_eq!(SweepVariable::BackhaulRate.apply(&base, 5e6).unwrap().caching.u_back_bps, 5e6);
        let c = SweepVariable::ConstellationSize.apply(&base, 720.0).unwrap();
        match c.constellation {
            ConstellationConfig::Walker { planes, sats_per_plane, .. } => assert_eq!(planes * sats_per_plane, 720),
            _ => unreachable!(),
        }
        assert!(SweepVariable::ConstellationSize.apply(&base, 721.0).is_err());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let mut cells = vec![cell(1.0, AlgorithmId::Ciim), cell(3.0, AlgorithmId::Mdh)];
        cells[1].failed = 1;
        cells[1].errors = "seed 4: bad, \"quoted\"".into();
        cells[1].stats[2].mean = f64::NAN;
        let text = cells_to_csv(SweepVariable::HandoverThreshold, &cells).unwrap();
        let (v, parsed) = cells_from_csv(&text).unwrap();
        assert_eq!(v, SweepVariable::HandoverThreshold);
        assert_eq!(cells_to_csv(v, &parsed).unwrap(), text);
    }

    #[test]
    fn one_cell_gives_header_plus_one_line() {
        let text = cells_to_csv(SweepVariable::MaxLinks, &[cell(3.0, AlgorithmId::Ciim)]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("# istn-sim sweep v1\n"));
    }

    #[test]
    fn empty_results_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let r = SweepResult { variable: SweepVariable::MaxLinks, runs: vec![], cells: vec![] };
        assert!(matches!(emit(&r, Format::Csv, &out), Err(Error::EmptyResults)));
        assert!(!out.exists());
    }

    #[test]
    fn summarize_records_failures() {
        let ok = RunSummary {
            sum_rate_bps: 2.0,
            backhaul_capacity_bps: 1.0,
            geo_gs_cinr_db_min: 3.0,
            handovers: 4,
            unserved_gu: 0.0,
            violating_slots: 0,
        };
        let runs = vec![
            RunRecord { value: 1.0, seed: 1, algo: AlgorithmId::Ciim, outcome: Ok(ok) },
            RunRecord { value: 1.0, seed: 2, algo: AlgorithmId::Ciim, outcome: Err("boom".into()) },
        ];
        let cells = summarize(&runs);
        assert_eq!(cells.len(), 1);
        assert_eq!((cells[0].runs, cells[0].failed), (2, 1));
        assert_eq!(cells[0].stat(Metric::Handovers).mean, 4.0);
        assert_eq!(cells[0].errors, "seed 2: boom");
    }

    #[test]
    fn plotdata_blocks_per_algo() {
        let cells = vec![cell(1.0, AlgorithmId::Ciim), cell(1.0, AlgorithmId::Mdh), cell(2.0, AlgorithmId::Ciim)];
        let text = cells_to_plotdata(SweepVariable::HandoverThreshold, &cells, Metric::SumRate);
        assert_eq!(text.matches("# algo").count(), 2);
        assert!(text.contains("# algo ciim\n1 1 0.03333333333333333\n2 2 0.03333333333333333\n"));
    }
}
