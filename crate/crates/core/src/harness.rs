//! Monte Carlo experiments over `(n, h)` ladders.
//!
//! Each replicate is a pure function of `(base_seed, stream, index)`; see
//! [`crate::rng`]. When an output directory is configured every finished
//! replicate is appended to a manifest (`replicate,seed,status,...`) and a
//! re-run skips replicates already marked `done`. Reports are computed from
//! replicate statistics sorted by index, so they do not depend on thread
//! count or on how often a run was resumed.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose_centered, DecompositionConfig, DEFAULT_EPSILON};
use crate::error::{DeconvError, Result};
use crate::estimator::{centered_estimate, uniform_grid, EstimatorConfig, SampleSet};
use crate::io::{to_json_string, write_replicates_csv};
use crate::limit_law::{
    cosine_process_sup, ks_one_sample, rayleigh_cdf, rayleigh_quantile, sup_w_cdf, KsSummary,
    RAYLEIGH_MEAN,
};
use crate::models::{ErrorKind, ErrorModel, ModelSet, SignalModel};
use crate::quadrature::QuadratureSpec;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sup_stat::{limit_constant, normalizer_a_n, sup_distance, GRID_POINTS_PER_BANDWIDTH};

pub const SCHEMA_VERSION: u32 = 1;

pub const FINAL_RUNG_KS_THRESHOLD: f64 = 0.10;
pub const COSINE_PROCESS_KS_THRESHOLD: f64 = 0.06;
pub const COVERAGE_RANGE: (f64, f64) = (0.90, 0.99);
pub const DEFAULT_BAND_LEVEL: f64 = 0.95;
/// Allowed range of `mean(a_n M_n / c_limit) / sqrt(pi/2)`.
pub const MEAN_CORRIDOR: (f64, f64) = (0.5, 2.5);
pub const R3_ZERO_TOLERANCE: f64 = 1e-10;

const SUP_STREAM: u64 = 0;
const REMAINDER_STREAM: u64 = 100;
const COSINE_STREAM: u64 = 200;
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub n: usize,
    pub h: f64,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub models: ModelSet,
    pub ladder: Vec<Rung>,
    pub replicates: usize,
    pub base_seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    pub grid_points: usize,
    /// Evaluation interval; the supremum is taken over `[a, b]`.
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| DeconvError::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn signal(&self) -> Result<&SignalModel> {
        self.models.signal()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DeconvError::InvalidInput(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.models.validate()?;
        self.signal()?;
        if self.replicates == 0 {
            return Err(DeconvError::InvalidInput("replicates must be >= 1".into()));
        }
        if self.ladder.is_empty() {
            return Err(DeconvError::InvalidInput("ladder is empty".into()));
        }
        self.models.error.require_theorem()?;
        for rung in &self.ladder {
            if rung.n == 0 {
                return Err(DeconvError::InvalidInput(
                    "rung sample size must be >= 1".into(),
                ));
            }
            self.estimator_config(rung.h)
                .validate_for(&self.models.error)?;
        }
        DecompositionConfig {
            epsilon: self.epsilon,
            quadrature: self.quadrature,
        }
        .validate()?;
        let [a, b] = self.interval;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(DeconvError::InvalidInput(format!(
                "bad interval [{a}, {b}]"
            )));
        }
        if self.grid_points < 2 {
            return Err(DeconvError::InvalidInput("grid_points must be >= 2".into()));
        }
        let spacing = (b - a) / (self.grid_points - 1) as f64;
        let h_min = self
            .ladder
            .iter()
            .map(|r| r.h)
            .fold(f64::INFINITY, f64::min);
        let limit = h_min / GRID_POINTS_PER_BANDWIDTH;
        if spacing > limit * (1.0 + 1e-12) {
            return Err(DeconvError::GridTooCoarse { spacing, limit });
        }
        Ok(())
    }

    pub fn estimator_config(&self, h: f64) -> EstimatorConfig {
        EstimatorConfig {
            h,
            quadrature: self.quadrature,
        }
    }

    pub fn decomposition_config(&self) -> DecompositionConfig {
        DecompositionConfig {
            epsilon: self.epsilon,
            quadrature: self.quadrature,
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.interval[0], self.interval[1], self.grid_points)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Cap on worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(f()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| DeconvError::InvalidInput(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// `n` draws of `Y + Z`, reproducible from `seed`.
pub fn generate_data(
    signal: &SignalModel,
    error: &ErrorModel,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    let mut rng = rng_from_seed(seed);
    let values: Vec<f64> = (0..n)
        .map(|_| signal.sample(&mut rng) + error.sample(&mut rng))
        .collect();
    let second_moment = values.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    if !second_moment.is_finite() {
        return Err(DeconvError::InvalidInput(
            "sample second moment is not finite".into(),
        ));
    }
    SampleSet::new(values)
}

// ---------------------------------------------------------------------------
// replicate manifest

/// `(index, seed, statistics or error message)`.
type ReplicateOutcome = (usize, u64, std::result::Result<Vec<f64>, String>);

#[derive(Debug, Clone, PartialEq)]
struct Record {
    seed: u64,
    stats: Vec<f64>,
}

struct ReplicateStore {
    path: Option<PathBuf>,
    columns: Vec<&'static str>,
    done: BTreeMap<usize, Record>,
}

impl ReplicateStore {
    fn header(columns: &[&str]) -> String {
        let mut h = vec!["replicate", "seed", "status"];
        h.extend_from_slice(columns);
        h.join(",")
    }

    fn open(path: Option<PathBuf>, columns: Vec<&'static str>) -> Result<Self> {
        let mut done = BTreeMap::new();
        if let Some(p) = &path {
            if p.exists() {
                let text = fs::read_to_string(p)?;
                let mut lines = text.lines();
                let header = lines.next().unwrap_or_default();
                if header != Self::header(&columns) {
                    return Err(DeconvError::InvalidInput(format!(
                        "manifest {} has unexpected header {header:?}",
                        p.display()
                    )));
                }
                for line in lines {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != 3 + columns.len() || fields[2] != "done" {
                        continue;
                    }
                    let (Ok(index), Ok(seed)) =
                        (fields[0].parse::<usize>(), fields[1].parse::<u64>())
                    else {
                        continue;
                    };
                    let stats: std::result::Result<Vec<f64>, _> =
                        fields[3..].iter().map(|f| f.parse::<f64>()).collect();
                    if let Ok(stats) = stats {
                        done.insert(index, Record { seed, stats });
                    }
                }
            } else {
                if let Some(dir) = p.parent() {
                    fs::create_dir_all(dir)?;
                }
                fs::write(p, format!("{}\n", Self::header(&columns)))?;
            }
        }
        Ok(ReplicateStore {
            path,
            columns,
            done,
        })
    }

    fn append(&mut self, rows: &[ReplicateOutcome]) -> Result<()> {
        if let Some(p) = &self.path {
            let mut f = OpenOptions::new().append(true).open(p)?;
            let mut buf = String::new();
            for (i, seed, r) in rows {
                match r {
                    Ok(stats) => {
                        let s: Vec<String> = stats.iter().map(|v| v.to_string()).collect();
                        buf.push_str(&format!("{i},{seed},done,{}\n", s.join(",")));
                    }
                    Err(msg) => {
                        let empty = vec![""; self.columns.len()].join(",");
                        let status = format!("failed: {}", msg.replace([',', '\n'], ";"));
                        buf.push_str(&format!("{i},{seed},{status},{empty}\n"));
                    }
                }
            }
            f.write_all(buf.as_bytes())?;
            f.flush()?;
        }
        for (i, seed, r) in rows {
            if let Ok(stats) = r {
                self.done.insert(
                    *i,
                    Record {
                        seed: *seed,
                        stats: stats.clone(),
                    },
                );
            }
        }
        Ok(())
    }
}

/// Runs `job` for every replicate not yet recorded and returns the
/// statistics of all replicates in index order.
fn collect_replicates<F>(
    path: Option<PathBuf>,
    columns: Vec<&'static str>,
    replicates: usize,
    seed_of: impl Fn(usize) -> u64 + Sync,
    job: F,
    opts: &RunOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let mut store = ReplicateStore::open(path, columns)?;
    let pending: Vec<usize> = (0..replicates)
        .filter(|i| store.done.get(i).is_none_or(|r| r.seed != seed_of(*i)))
        .collect();
    let mut failures = Vec::new();
    for batch in pending.chunks(BATCH) {
        let rows: Vec<ReplicateOutcome> = opts.install(|| {
            batch
                .par_iter()
                .map(|&i| {
                    let seed = seed_of(i);
                    (i, seed, job(seed).map_err(|e| e.to_string()))
                })
                .collect()
        })?;
        for (i, _, r) in &rows {
            if let Err(e) = r {
                failures.push(format!("replicate {i}: {e}"));
            }
        }
        store.append(&rows)?;
    }
    if !failures.is_empty() {
        return Err(DeconvError::InvalidInput(format!(
            "{} replicate(s) failed; first: {}",
            failures.len(),
            failures[0]
        )));
    }
    Ok((0..replicates)
        .map(|i| store.done[&i].stats.clone())
        .collect())
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Informational checks do not affect the overall verdict.
    pub gating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Verdict {
    fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().filter(|c| c.gating).all(|c| c.pass);
        Verdict { checks, pass }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: impl Into<String>, pass: bool) -> Check {
    Check {
        name: name.into(),
        pass,
        gating: true,
    }
}

fn info(name: impl Into<String>, pass: bool) -> Check {
    Check {
        name: name.into(),
        pass,
        gating: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungReport {
    pub n: usize,
    pub h: f64,
    pub replicates: usize,
    pub a_n: f64,
    pub c_limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_to_rayleigh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_scaled_mn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_coverage: Option<f64>,
    /// Median of `a_n sup |R^(l) - E R^(l)|`, `l = 1, 2, 3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_medians: Option<[f64; 3]>,
    /// Median of `a_n M_n` over the same replicates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_an_mn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_ratios: Option<[f64; 3]>,
    /// Largest `sup |R^(3)|` seen over replicates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_r3: Option<f64>,
}

impl RungReport {
    fn base(rung: &Rung, replicates: usize, a_n: f64, c_limit: f64) -> Self {
        RungReport {
            n: rung.n,
            h: rung.h,
            replicates,
            a_n,
            c_limit,
            ks_to_rayleigh: None,
            mean_scaled_mn: None,
            band_coverage: None,
            remainder_medians: None,
            median_an_mn: None,
            remainder_ratios: None,
            max_abs_r3: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub schema_version: u32,
    pub experiment: String,
    pub base_seed: u64,
    pub models: ModelSet,
    pub rungs: Vec<RungReport>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct SupLadder {
    pub report: LadderReport,
    /// Per rung, per replicate `a_n M_n / c_limit`.
    pub scaled: Vec<Vec<f64>>,
    /// Per rung, per replicate `a_n max_grid |f_nh - E f_nh| / c_limit`.
    pub scaled_grid_max: Vec<Vec<f64>>,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn manifest_path(cfg: &ExperimentConfig, name: &str) -> Option<PathBuf> {
    cfg.output_dir.as_ref().map(|d| d.join(name))
}

/// Computes (or loads) the per-replicate `M_n` records of every rung.
pub fn sup_ladder(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SupLadder> {
    cfg.validate()?;
    let signal = cfg.signal()?.clone();
    let error = cfg.models.error;
    let kernel = cfg.models.kernel;
    let grid = cfg.grid()?;
    let c_limit = limit_constant(&error, &kernel)?;
    let mut rungs = Vec::new();
    let mut scaled_all = Vec::new();
    let mut grid_all = Vec::new();
    for (k, rung) in cfg.ladder.iter().enumerate() {
        let est_cfg = cfg.estimator_config(rung.h);
        let a_n = normalizer_a_n(rung.n, rung.h, &error, &kernel)?;
        let stats = collect_replicates(
            manifest_path(cfg, &format!("sup_rung{k}_manifest.csv")),
            vec!["m_n", "grid_max", "argmax_x"],
            cfg.replicates,
            |i| derive_seed(cfg.base_seed, SUP_STREAM + k as u64, i as u64),
            |seed| {
                let data = generate_data(&signal, &error, rung.n, seed)?;
                let c = centered_estimate(&data, &signal, &error, &kernel, &est_cfg, &grid)?;
                let s = sup_distance(&c, rung.h)?;
                Ok(vec![s.m_n, s.grid_max, s.argmax_x])
            },
            opts,
        )?;
        let scaled: Vec<f64> = stats.iter().map(|s| a_n * s[0] / c_limit).collect();
        let scaled_grid: Vec<f64> = stats.iter().map(|s| a_n * s[1] / c_limit).collect();
        let mut report = RungReport::base(rung, cfg.replicates, a_n, c_limit);
        report.mean_scaled_mn = Some(scaled.iter().sum::<f64>() / scaled.len() as f64);
        if cfg.replicates > 1 {
            report.ks_to_rayleigh = Some(ks_one_sample(&scaled, rayleigh_cdf)?);
            report.band_coverage = Some(coverage_of(&scaled_grid, DEFAULT_BAND_LEVEL, false)?);
        }
        rungs.push(report);
        scaled_all.push(scaled);
        grid_all.push(scaled_grid);
    }

    let mut checks = Vec::new();
    let ks: Vec<f64> = rungs.iter().filter_map(|r| r.ks_to_rayleigh).collect();
    if ks.len() == rungs.len() {
        if ks.len() > 1 {
            checks.push(check("ks_strictly_decreasing", strictly_decreasing(&ks)));
        }
        checks.push(check(
            format!("final_rung_ks <= {FINAL_RUNG_KS_THRESHOLD}"),
            ks[ks.len() - 1] <= FINAL_RUNG_KS_THRESHOLD,
        ));
        let cov = rungs
            .last()
            .and_then(|r| r.band_coverage)
            .unwrap_or(f64::NAN);
        checks.push(check(
            format!(
                "final_rung_coverage in [{}, {}]",
                COVERAGE_RANGE.0, COVERAGE_RANGE.1
            ),
            cov >= COVERAGE_RANGE.0 && cov <= COVERAGE_RANGE.1,
        ));
    }
    let corridor = rungs.iter().all(|r| {
        let ratio = r.mean_scaled_mn.unwrap_or(f64::NAN) / RAYLEIGH_MEAN;
        ratio >= MEAN_CORRIDOR.0 && ratio <= MEAN_CORRIDOR.1
    });
    checks.push(check("mean_scaled_mn_corridor", corridor));

    Ok(SupLadder {
        report: LadderReport {
            schema_version: SCHEMA_VERSION,
            experiment: "sup_convergence".into(),
            base_seed: cfg.base_seed,
            models: cfg.models.clone(),
            rungs,
            verdict: Verdict::new(checks),
        },
        scaled: scaled_all,
        scaled_grid_max: grid_all,
    })
}

fn coverage_of(scaled_grid_max: &[f64], level: f64, unbounded: bool) -> Result<f64> {
    if unbounded {
        return Ok(1.0);
    }
    let q = rayleigh_quantile(level)?;
    // E f_nh inside f_nh +- c q / a_n at every grid point  <=>  a_n max|f_nh - E f_nh| / c <= q
    let inside = scaled_grid_max.iter().filter(|&&s| s <= q).count();
    Ok(inside as f64 / scaled_grid_max.len() as f64)
}

/// Convergence check: per rung KS distance of `a_n M_n / c_limit` to the
/// standard Rayleigh law, its trend, and band coverage at level 0.95.
pub fn run_sup_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<LadderReport> {
    let ladder = sup_ladder(cfg, opts)?;
    if let Some(dir) = &cfg.output_dir {
        for (k, scaled) in ladder.scaled.iter().enumerate() {
            write_replicates_csv(
                fs::File::create(dir.join(format!("sup_rung{k}_replicates.csv")))?,
                scaled,
            )?;
        }
        fs::write(dir.join("sup_report.json"), to_json_string(&ladder.report)?)?;
    }
    Ok(ladder.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRung {
    pub n: usize,
    pub h: f64,
    pub half_width: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub experiment: String,
    pub base_seed: u64,
    pub level: f64,
    pub unbounded: bool,
    pub rungs: Vec<CoverageRung>,
    pub verdict: Verdict,
}

/// Fraction of replicates whose band `f_nh +- c_limit q_level / a_n` contains
/// `E[f_nh]` at every grid point. Shares replicates with
/// [`run_sup_convergence`]. `unbounded` replaces the half-width by infinity.
pub fn run_band_coverage(
    cfg: &ExperimentConfig,
    level: f64,
    unbounded: bool,
    opts: &RunOptions,
) -> Result<CoverageReport> {
    rayleigh_quantile(level)?;
    if level <= 0.0 {
        return Err(DeconvError::Domain("band level must be in (0, 1)".into()));
    }
    let ladder = sup_ladder(cfg, opts)?;
    let q = rayleigh_quantile(level)?;
    let rungs: Vec<CoverageRung> = cfg
        .ladder
        .iter()
        .zip(&ladder.report.rungs)
        .zip(&ladder.scaled_grid_max)
        .map(|((rung, r), s)| {
            Ok(CoverageRung {
                n: rung.n,
                h: rung.h,
                half_width: if unbounded {
                    f64::INFINITY
                } else {
                    r.c_limit * q / r.a_n
                },
                coverage: coverage_of(s, level, unbounded)?,
            })
        })
        .collect::<Result<_>>()?;
    let last = rungs.last().map(|r| r.coverage).unwrap_or(f64::NAN);
    let verdict = Verdict::new(vec![check(
        format!(
            "final_rung_coverage in [{}, {}]",
            COVERAGE_RANGE.0, COVERAGE_RANGE.1
        ),
        last >= COVERAGE_RANGE.0 && last <= COVERAGE_RANGE.1,
    )]);
    let report = CoverageReport {
        schema_version: SCHEMA_VERSION,
        experiment: "band_coverage".into(),
        base_seed: cfg.base_seed,
        level,
        unbounded,
        rungs: rungs
            .into_iter()
            .map(|mut r| {
                if r.half_width.is_infinite() {
                    r.half_width = f64::MAX;
                }
                r
            })
            .collect(),
        verdict,
    };
    if let Some(dir) = &cfg.output_dir {
        fs::write(
            dir.join(format!("band_report_{level}.json")),
            to_json_string(&report)?,
        )?;
    }
    Ok(report)
}

/// Remainder negligibility: per rung, median of `a_n sup |R^(l) - E R^(l)|`
/// and its ratio to the median of `a_n M_n`.
pub fn run_remainder_diagnostics(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<LadderReport> {
    cfg.validate()?;
    let signal = cfg.signal()?.clone();
    let error = cfg.models.error;
    let kernel = cfg.models.kernel;
    let grid = cfg.grid()?;
    let dcfg = cfg.decomposition_config();
    let c_limit = limit_constant(&error, &kernel)?;
    let mut rungs = Vec::new();
    for (k, rung) in cfg.ladder.iter().enumerate() {
        let est_cfg = cfg.estimator_config(rung.h);
        let a_n = normalizer_a_n(rung.n, rung.h, &error, &kernel)?;
        let stats = collect_replicates(
            manifest_path(cfg, &format!("remainder_rung{k}_manifest.csv")),
            vec!["sup_r1", "sup_r2", "sup_r3", "m_n"],
            cfg.replicates,
            |i| derive_seed(cfg.base_seed, REMAINDER_STREAM + k as u64, i as u64),
            |seed| {
                let data = generate_data(&signal, &error, rung.n, seed)?;
                let parts =
                    decompose_centered(&data, &signal, &error, &kernel, &est_cfg, &dcfg, &grid)?;
                let c = centered_estimate(&data, &signal, &error, &kernel, &est_cfg, &grid)?;
                let s = sup_distance(&c, rung.h)?;
                Ok(vec![parts.sups[0], parts.sups[1], parts.sups[2], s.m_n])
            },
            opts,
        )?;
        let col = |j: usize| -> Vec<f64> { stats.iter().map(|s| a_n * s[j]).collect() };
        let medians = [median(&col(0)), median(&col(1)), median(&col(2))];
        let med_mn = median(&col(3));
        let mut report = RungReport::base(rung, cfg.replicates, a_n, c_limit);
        report.remainder_medians = Some(medians);
        report.median_an_mn = Some(med_mn);
        report.remainder_ratios = Some([
            medians[0] / med_mn,
            medians[1] / med_mn,
            medians[2] / med_mn,
        ]);
        report.max_abs_r3 = Some(stats.iter().map(|s| s[2]).fold(0.0, f64::max));
        rungs.push(report);
    }

    let ratios = |l: usize| -> Vec<f64> {
        rungs
            .iter()
            .map(|r| r.remainder_ratios.unwrap()[l])
            .collect()
    };
    let r3_zero = rungs
        .iter()
        .all(|r| r.max_abs_r3.unwrap() <= R3_ZERO_TOLERANCE);
    let mut checks = Vec::new();
    match error.kind() {
        ErrorKind::Gaussian => {
            checks.push(check(
                "r1_ratio_decreasing",
                strictly_decreasing(&ratios(0)),
            ));
            checks.push(check(
                "r2_ratio_decreasing",
                strictly_decreasing(&ratios(1)),
            ));
            checks.push(check(format!("r3_sup <= {R3_ZERO_TOLERANCE}"), r3_zero));
        }
        ErrorKind::GaussianLaplaceMix => {
            checks.push(info("r1_ratio_decreasing", strictly_decreasing(&ratios(0))));
            checks.push(info("r2_ratio_decreasing", strictly_decreasing(&ratios(1))));
            checks.push(check(
                "r3_ratio_decreasing",
                strictly_decreasing(&ratios(2)),
            ));
        }
    }
    let report = LadderReport {
        schema_version: SCHEMA_VERSION,
        experiment: "remainder_diagnostics".into(),
        base_seed: cfg.base_seed,
        models: cfg.models.clone(),
        rungs,
        verdict: Verdict::new(checks),
    };
    if let Some(dir) = &cfg.output_dir {
        fs::write(dir.join("remainder_report.json"), to_json_string(&report)?)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineRung {
    pub n: usize,
    pub h: f64,
    pub mean: f64,
    pub ks: KsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineReport {
    pub schema_version: u32,
    pub experiment: String,
    pub base_seed: u64,
    pub rungs: Vec<CosineRung>,
    pub verdict: Verdict,
}

/// Replicates of the periodized cosine supremum `S_n`, compared with the law
/// of `(sqrt(2)/2) V`.
pub fn run_cosine_process(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<CosineReport> {
    cfg.validate()?;
    let signal = cfg.signal()?.clone();
    let error = cfg.models.error;
    let mut rungs = Vec::new();
    for (k, rung) in cfg.ladder.iter().enumerate() {
        let stats = collect_replicates(
            manifest_path(cfg, &format!("cosine_rung{k}_manifest.csv")),
            vec!["s_n"],
            cfg.replicates,
            |i| derive_seed(cfg.base_seed, COSINE_STREAM + k as u64, i as u64),
            |seed| {
                let data = generate_data(&signal, &error, rung.n, seed)?;
                Ok(vec![cosine_process_sup(&data, rung.h, &signal, &error)?])
            },
            opts,
        )?;
        let s: Vec<f64> = stats.iter().map(|r| r[0]).collect();
        let ks = ks_one_sample(&s, sup_w_cdf)?;
        if let Some(dir) = &cfg.output_dir {
            write_replicates_csv(
                fs::File::create(dir.join(format!("cosine_rung{k}_replicates.csv")))?,
                &s,
            )?;
        }
        rungs.push(CosineRung {
            n: rung.n,
            h: rung.h,
            mean: s.iter().sum::<f64>() / s.len() as f64,
            ks: KsSummary::new(s.len(), ks, COSINE_PROCESS_KS_THRESHOLD),
        });
    }
    let last_pass = rungs.last().map(|r| r.ks.pass).unwrap_or(false);
    let report = CosineReport {
        schema_version: SCHEMA_VERSION,
        experiment: "cosine_process".into(),
        base_seed: cfg.base_seed,
        rungs,
        verdict: Verdict::new(vec![check(
            format!("final_rung_ks <= {COSINE_PROCESS_KS_THRESHOLD}"),
            last_pass,
        )]),
    };
    if let Some(dir) = &cfg.output_dir {
        fs::write(dir.join("cosine_report.json"), to_json_string(&report)?)?;
    }
    Ok(report)
}
