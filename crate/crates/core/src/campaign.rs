//! Campaigns: many shared paths run under several controllers, with all
//! artifacts written to an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::complexity::{complexity_ratio, ComplexityError, ComplexityReport, DEFAULT_SPACING};
use crate::controllers::{ControllerKind, MAX_CURVATURE};
use crate::environments::EnvironmentPair;
use crate::metrics::{self, CurvatureHistogram, HeatMap, MetricsError, TrialMetrics};
use crate::simulation::{self, FramePhase, PathSpec, SimConfig, SimulationError};
use crate::stats::{self, Contrast, Sample, StatsError};

pub const DESK_PATHS: usize = 20;
pub const DESK_WAYPOINTS: usize = 50;
pub const FULL_PATHS: usize = 100;
pub const FULL_WAYPOINTS: usize = 100;

/// Saturation test tolerance for curvature magnitudes.
const SATURATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub pair: EnvironmentPair,
    /// Name used in the summary table.
    pub label: String,
    pub controllers: Vec<ControllerKind>,
    pub n_paths: usize,
    pub n_waypoints: usize,
    pub seed: u64,
    /// Start the physical user on the virtual start.
    pub fixed_start: bool,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub sim: SimConfig,
}

impl CampaignConfig {
    pub fn desk(pair: EnvironmentPair, label: impl Into<String>, seed: u64) -> Self {
        Self {
            pair,
            label: label.into(),
            controllers: ControllerKind::ALL.to_vec(),
            n_paths: DESK_PATHS,
            n_waypoints: DESK_WAYPOINTS,
            seed,
            fixed_start: false,
            workers: 0,
            sim: SimConfig::default(),
        }
    }

    fn validate(&self) -> Result<(), CampaignError> {
        if self.n_paths == 0 || self.n_waypoints == 0 {
            return Err(CampaignError::InvalidConfig(
                "paths and waypoints must be at least 1".into(),
            ));
        }
        if self.controllers.is_empty() {
            return Err(CampaignError::InvalidConfig(
                "no controllers selected".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign: {0}")]
    InvalidConfig(String),
    #[error("path {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: SimulationError,
    },
    #[error("path {path} under {controller}: {source}")]
    Trial {
        path: usize,
        controller: ControllerKind,
        #[source]
        source: SimulationError,
    },
    #[error("path {path} under {controller}: {source}")]
    Metrics {
        path: usize,
        controller: ControllerKind,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Complexity(#[from] ComplexityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// What a campaign keeps from one trial once its frames are written out.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub metrics: TrialMetrics,
    pub heatmap: HeatMap,
    pub max_alignment: f64,
    pub walking_frames: usize,
    /// Walking frames whose |curvature| equals the maximum.
    pub saturated_frames: usize,
    pub csv_sha256: String,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerResults {
    pub kind: ControllerKind,
    /// Indexed by path.
    pub trials: Vec<TrialSummary>,
    pub heatmap: HeatMap,
    pub histogram: CurvatureHistogram,
}

impl ControllerResults {
    pub fn metric(&self, metric: Metric) -> Vec<f64> {
        self.trials.iter().map(|t| metric.of(&t.metrics)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Resets,
    DistanceBetweenResets,
    Alignment,
    Curvature,
    RedirectedFraction,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Resets,
        Metric::DistanceBetweenResets,
        Metric::Alignment,
        Metric::Curvature,
        Metric::RedirectedFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Resets => "resets",
            Metric::DistanceBetweenResets => "mean_distance_between_resets_m",
            Metric::Alignment => "mean_alignment_m",
            Metric::Curvature => "mean_abs_curvature_deg_s",
            Metric::RedirectedFraction => "redirected_frame_fraction",
        }
    }

    pub fn of(self, m: &TrialMetrics) -> f64 {
        match self {
            Metric::Resets => m.resets as f64,
            Metric::DistanceBetweenResets => m.mean_distance_between_resets,
            Metric::Alignment => m.mean_alignment,
            Metric::Curvature => m.mean_abs_curvature_deg_s,
            Metric::RedirectedFraction => m.redirected_frame_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: Metric,
    /// First controller of the contrast (the one whose trimmed mean is
    /// subtracted from).
    pub a: ControllerKind,
    pub b: ControllerKind,
    pub contrast: Contrast,
    pub trimmed_a: f64,
    pub trimmed_b: f64,
}

impl SummaryRow {
    pub fn label(&self) -> String {
        format!("{}_vs_{}", self.a.label(), self.b.label())
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub label: String,
    pub paths: Vec<PathSpec>,
    pub controllers: Vec<ControllerResults>,
    pub complexity: ComplexityReport,
    pub summary: Vec<SummaryRow>,
}

impl CampaignOutcome {
    pub fn controller(&self, kind: ControllerKind) -> Option<&ControllerResults> {
        self.controllers.iter().find(|c| c.kind == kind)
    }

    pub fn contrast(
        &self,
        metric: Metric,
        a: ControllerKind,
        b: ControllerKind,
    ) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.metric == metric && r.a == a && r.b == b)
    }

    /// Outlier-replaced, 20% trimmed mean of one metric for one controller.
    pub fn trimmed(&self, metric: Metric, kind: ControllerKind) -> Option<f64> {
        let c = self.controller(kind)?;
        let sample = Sample::new(metric.name(), c.metric(metric)).ok()?;
        Some(stats::trimmed_mean(
            &stats::replace_outliers(&sample).sample.values,
            stats::TRIM,
        ))
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(stats::SUMMARY_CSV_HEADER);
        out.push('\n');
        for row in &self.summary {
            out.push_str(&stats::summary_csv_row(
                &self.label,
                row.metric.name(),
                &row.label(),
                &row.contrast,
            ));
            out.push('\n');
        }
        out
    }
}

/// Seed of path `i`.
pub fn path_seed(seed: u64, i: usize) -> u64 {
    seed ^ i as u64
}

pub fn generate_paths(
    config: &CampaignConfig,
    pair: &EnvironmentPair,
) -> Result<Vec<PathSpec>, CampaignError> {
    (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            simulation::generate_path(pair, config.n_waypoints, path_seed(config.seed, i))
                .map_err(|source| CampaignError::Path { index: i, source })
        })
        .collect()
}

fn run_one(
    pair: &EnvironmentPair,
    path: &PathSpec,
    index: usize,
    kind: ControllerKind,
    config: &CampaignConfig,
    keep_csv: bool,
) -> Result<TrialSummary, CampaignError> {
    let record = simulation::run_trial(pair, path, kind, &config.sim).map_err(|source| {
        CampaignError::Trial {
            path: index,
            controller: kind,
            source,
        }
    })?;
    let metrics =
        metrics::compute_trial_metrics(&record, config.sim.walk_speed).map_err(|source| {
            CampaignError::Metrics {
                path: index,
                controller: kind,
                source,
            }
        })?;
    let mut heatmap = HeatMap::for_environment(&pair.physical);
    heatmap.accumulate(&record.frames);
    let walking: Vec<f64> = record
        .frames
        .iter()
        .filter(|f| f.phase == FramePhase::Translating)
        .map(|f| f.gains.curvature.abs())
        .collect();
    let saturated_frames = walking
        .iter()
        .filter(|c| (*c - MAX_CURVATURE).abs() <= SATURATION_TOL)
        .count();
    let max_alignment = record
        .frames
        .iter()
        .map(|f| f.alignment)
        .fold(0.0, f64::max);
    let csv = record.to_csv();
    Ok(TrialSummary {
        metrics,
        heatmap,
        max_alignment,
        walking_frames: walking.len(),
        saturated_frames,
        csv_sha256: sha256_hex(csv.as_bytes()),
        csv: keep_csv.then_some(csv),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn summarize(
    label: &str,
    seed: u64,
    controllers: &[ControllerResults],
) -> Result<Vec<SummaryRow>, CampaignError> {
    let mut rows = Vec::new();
    if controllers.len() < 2 {
        return Ok(rows);
    }
    for (m_idx, metric) in Metric::ALL.into_iter().enumerate() {
        let samples: Vec<Sample> = controllers
            .iter()
            .map(|c| {
                let s = Sample::new(
                    format!("{}:{}", metric.name(), c.kind.label()),
                    c.metric(metric),
                )?;
                Ok(stats::replace_outliers(&s).sample)
            })
            .collect::<Result<_, StatsError>>()?;
        for j in 0..controllers.len() {
            for i in 0..j {
                let boot_seed = seed
                    .wrapping_mul(0x2545_F491_4F6C_DD1D)
                    .wrapping_add((m_idx * 64 + i * 8 + j) as u64);
                let contrast = stats::bootstrap_contrast(&samples[j], &samples[i], boot_seed)?;
                rows.push(SummaryRow {
                    metric,
                    a: controllers[j].kind,
                    b: controllers[i].kind,
                    contrast,
                    trimmed_a: stats::trimmed_mean(&samples[j].values, stats::TRIM),
                    trimmed_b: stats::trimmed_mean(&samples[i].values, stats::TRIM),
                });
            }
        }
    }
    log::debug!("{label}: {} summary rows", rows.len());
    Ok(rows)
}

/// Run every (path, controller) trial and reduce the results in path
/// order. Trial CSVs are kept in memory only when `keep_csv` is set.
pub fn run_campaign(
    config: &CampaignConfig,
    keep_csv: bool,
) -> Result<CampaignOutcome, CampaignError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    pool.install(|| run_in_pool(config, keep_csv))
}

fn run_in_pool(config: &CampaignConfig, keep_csv: bool) -> Result<CampaignOutcome, CampaignError> {
    let pair = if config.fixed_start {
        config.pair.clone().with_fixed_start_at_virtual()
    } else {
        config.pair.clone()
    };
    let paths = generate_paths(config, &pair)?;
    let jobs: Vec<(usize, usize)> = (0..config.controllers.len())
        .flat_map(|c| (0..paths.len()).map(move |p| (c, p)))
        .collect();
    let results: Vec<TrialSummary> = jobs
        .par_iter()
        .map(|&(c, p)| run_one(&pair, &paths[p], p, config.controllers[c], config, keep_csv))
        .collect::<Result<_, _>>()?;
    let mut results = results.into_iter();
    let mut controllers = Vec::new();
    for &kind in &config.controllers {
        let trials: Vec<TrialSummary> = results.by_ref().take(paths.len()).collect();
        let mut heatmap = HeatMap::for_environment(&pair.physical);
        let mut histogram = CurvatureHistogram::default();
        for t in &trials {
            merge_heatmap(&mut heatmap, &t.heatmap);
            histogram.add(t.metrics.mean_abs_curvature_deg_s);
        }
        controllers.push(ControllerResults {
            kind,
            trials,
            heatmap,
            histogram,
        });
    }
    let complexity = complexity_ratio(&pair, DEFAULT_SPACING)?;
    let summary = summarize(&config.label, config.seed, &controllers)?;
    Ok(CampaignOutcome {
        label: config.label.clone(),
        paths,
        controllers,
        complexity,
        summary,
    })
}

fn merge_heatmap(into: &mut HeatMap, from: &HeatMap) {
    if into.origin == from.origin && into.cols == from.cols && into.rows == from.rows {
        for (a, b) in into.counts.iter_mut().zip(&from.counts) {
            *a += b;
        }
    } else {
        for r in 0..from.rows {
            for c in 0..from.cols {
                let p = from.cell_center(c, r);
                for _ in 0..from.get(c, r) {
                    into.add(p);
                }
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    environment: &'a str,
    complete: bool,
    files: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize)]
struct ConfigDoc<'a> {
    environment: &'a str,
    controllers: Vec<&'static str>,
    n_paths: usize,
    n_waypoints: usize,
    seed: u64,
    fixed_start: bool,
    sim: &'a SimConfig,
}

struct Writer {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Writer {
    fn write(&mut self, rel: &str, content: &[u8]) -> Result<(), CampaignError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CampaignError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&path, content).map_err(|source| CampaignError::Io { path, source })?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(content),
            bytes: content.len(),
        });
        Ok(())
    }
}

/// Run a campaign and write its artifacts under `dir`. Returns the
/// outcome with trial CSVs dropped. If a trial fails, a `FAILED` file
/// naming it is left in `dir`.
pub fn run_campaign_to_dir(
    config: &CampaignConfig,
    dir: &Path,
) -> Result<CampaignOutcome, CampaignError> {
    fs::create_dir_all(dir).map_err(|source| CampaignError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let outcome = match run_campaign(config, true) {
        Ok(o) => o,
        Err(e) => {
            let marker = dir.join("FAILED");
            let _ = fs::write(&marker, format!("{e}\n"));
            return Err(e);
        }
    };
    let mut outcome = outcome;
    write_outputs(config, &mut outcome, dir)?;
    Ok(outcome)
}

fn write_outputs(
    config: &CampaignConfig,
    outcome: &mut CampaignOutcome,
    dir: &Path,
) -> Result<(), CampaignError> {
    let mut w = Writer {
        root: dir.to_path_buf(),
        entries: Vec::new(),
    };
    let doc = ConfigDoc {
        environment: &config.label,
        controllers: config.controllers.iter().map(|c| c.slug()).collect(),
        n_paths: config.n_paths,
        n_waypoints: config.n_waypoints,
        seed: config.seed,
        fixed_start: config.fixed_start,
        sim: &config.sim,
    };
    w.write("config.json", json_pretty(&doc).as_bytes())?;
    for (i, p) in outcome.paths.iter().enumerate() {
        w.write(
            &format!("paths/path_{i:03}.csv"),
            simulation::path_to_csv(p).as_bytes(),
        )?;
    }
    for c in &mut outcome.controllers {
        let slug = c.kind.slug();
        for (i, t) in c.trials.iter_mut().enumerate() {
            let csv = t.csv.take().unwrap_or_default();
            w.write(&format!("trials/{slug}/path_{i:03}.csv"), csv.as_bytes())?;
        }
        let rows: Vec<TrialMetrics> = c.trials.iter().map(|t| t.metrics).collect();
        w.write(
            &format!("metrics/{slug}.csv"),
            metrics::metrics_table_csv(&rows).as_bytes(),
        )?;
        w.write(
            &format!("heatmaps/{slug}.pgm"),
            c.heatmap.to_pgm().as_bytes(),
        )?;
        w.write(
            &format!("heatmaps/{slug}.csv"),
            c.heatmap.to_csv().as_bytes(),
        )?;
        w.write(
            &format!("histograms/{slug}.csv"),
            c.histogram.to_csv().as_bytes(),
        )?;
    }
    w.write(
        "complexity.json",
        complexity_json(&outcome.complexity).as_bytes(),
    )?;
    w.write("summary.csv", outcome.summary_csv().as_bytes())?;
    let mut files = std::mem::take(&mut w.entries);
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        environment: &config.label,
        complete: true,
        files,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, json_pretty(&manifest))
        .map_err(|source| CampaignError::Io { path, source })?;
    Ok(())
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Complexity report as JSON with six-decimal numbers.
pub fn complexity_json(r: &ComplexityReport) -> String {
    format!(
        "{{\n  \"c_physical\": {:.6},\n  \"c_virtual\": {:.6},\n  \"ratio\": {:.6},\n  \"grid_spacing\": {:.6},\n  \"sample_counts\": [{}, {}],\n  \"ratio_occupied_as_zero\": {:.6}\n}}\n",
        r.c_physical,
        r.c_virtual,
        r.ratio,
        r.grid_spacing,
        r.sample_counts[0],
        r.sample_counts[1],
        r.ratio_occupied_as_zero
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{builtin_pair, BuiltinPair};

    fn small(workers: usize) -> CampaignConfig {
        CampaignConfig {
            n_paths: 3,
            n_waypoints: 4,
            workers,
            ..CampaignConfig::desk(builtin_pair(BuiltinPair::B), "B", 5)
        }
    }

    #[test]
    fn path_seeds_xor_index() {
        assert_eq!(path_seed(7, 0), 7);
        assert_eq!(path_seed(7, 3), 4);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_campaign(&small(1), true).unwrap();
        let b = run_campaign(&small(3), true).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.controllers, b.controllers);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn summary_rows_cover_every_pair_and_metric() {
        let o = run_campaign(&small(0), false).unwrap();
        assert_eq!(o.summary.len(), Metric::ALL.len() * 3);
        assert!(o
            .contrast(Metric::Resets, ControllerKind::S2c, ControllerKind::Arc)
            .is_some());
        assert!(o
            .summary_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("B,resets,S2C_vs_ARC,"));
        for c in &o.controllers {
            assert_eq!(c.histogram.total(), 3);
            let frames: usize = c.trials.iter().map(|t| t.metrics.frames).sum();
            assert_eq!(c.heatmap.total(), frames as u64);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = small(1);
        c.n_paths = 0;
        assert!(matches!(
            run_campaign(&c, false),
            Err(CampaignError::InvalidConfig(_))
        ));
    }
}
