//! Per-trial performance metrics, frame-occupancy heat maps and
//! curvature histograms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::Environment;
use crate::geometry::Point;
use crate::simulation::{Frame, FramePhase, TrialRecord};

pub const HEATMAP_CELL: f64 = 0.5;
/// Histogram bin width in deg/s.
pub const HISTOGRAM_BIN: f64 = 0.5;
pub const HISTOGRAM_MAX: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trial record has no frames")]
    EmptyRecord,
    #[error("no {0} frames to average over")]
    NoFrames(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub resets: usize,
    pub total_distance: f64,
    /// Mean physical length of the segments separated by resets, the
    /// final partial segment included.
    pub mean_distance_between_resets: f64,
    /// Mean alignment over frames outside resets.
    pub mean_alignment: f64,
    /// rad/m, averaged over walking frames.
    pub mean_abs_curvature: f64,
    pub mean_abs_curvature_deg_s: f64,
    /// Share of non-reset frames with any gain away from identity.
    pub redirected_frame_fraction: f64,
    pub frames: usize,
}

/// Curvature in rad/m expressed as deg/s at `walk_speed` m/s.
pub fn curvature_deg_per_s(curvature: f64, walk_speed: f64) -> f64 {
    (curvature * walk_speed).to_degrees()
}

pub fn compute_trial_metrics(
    record: &TrialRecord,
    walk_speed: f64,
) -> Result<TrialMetrics, MetricsError> {
    metrics_from_frames(&record.frames, record.resets.len(), walk_speed)
}

/// Metrics from a frame log and its reset count.
pub fn metrics_from_frames(
    frames: &[Frame],
    resets: usize,
    walk_speed: f64,
) -> Result<TrialMetrics, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::EmptyRecord);
    }
    let total_distance: f64 = frames.iter().map(|f| f.physical_step).sum();
    let active: Vec<&Frame> = frames.iter().filter(|f| !f.resetting()).collect();
    if active.is_empty() {
        return Err(MetricsError::NoFrames("non-reset"));
    }
    let mean_alignment = active.iter().map(|f| f.alignment).sum::<f64>() / active.len() as f64;
    let redirected = active.iter().filter(|f| f.gains.is_redirecting()).count();
    let walking: Vec<f64> = frames
        .iter()
        .filter(|f| f.phase == FramePhase::Translating)
        .map(|f| f.gains.curvature.abs())
        .collect();
    let mean_abs_curvature = if walking.is_empty() {
        0.0
    } else {
        walking.iter().sum::<f64>() / walking.len() as f64
    };
    Ok(TrialMetrics {
        resets,
        total_distance,
        mean_distance_between_resets: total_distance / (resets + 1) as f64,
        mean_alignment,
        mean_abs_curvature,
        mean_abs_curvature_deg_s: curvature_deg_per_s(mean_abs_curvature, walk_speed),
        redirected_frame_fraction: redirected as f64 / active.len() as f64,
        frames: frames.len(),
    })
}

/// Mean of inter-reset segment lengths given the cumulative distances at
/// which resets happened and the total distance.
pub fn mean_segment_length(reset_at: &[f64], total: f64) -> f64 {
    let mut last = 0.0;
    let mut segments = Vec::with_capacity(reset_at.len() + 1);
    for &d in reset_at {
        segments.push(d - last);
        last = d;
    }
    segments.push(total - last);
    segments.iter().sum::<f64>() / segments.len() as f64
}

pub const METRICS_CSV_HEADER: &str = "path,resets,total_distance_m,mean_distance_between_resets_m,mean_alignment_m,mean_abs_curvature_rad_per_m,mean_abs_curvature_deg_s,redirected_frame_fraction,frames";

pub fn metrics_csv_row(path: usize, m: &TrialMetrics) -> String {
    format!(
        "{path},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        m.resets,
        m.total_distance,
        m.mean_distance_between_resets,
        m.mean_alignment,
        m.mean_abs_curvature,
        m.mean_abs_curvature_deg_s,
        m.redirected_frame_fraction,
        m.frames
    )
}

pub fn metrics_table_csv(rows: &[TrialMetrics]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for (i, m) in rows.iter().enumerate() {
        out.push_str(&metrics_csv_row(i, m));
        out.push('\n');
    }
    out
}

/// Frame counts over a regular grid covering the physical environment.
/// Row 0 is the southernmost row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub origin: Point,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
    pub counts: Vec<u64>,
}

impl HeatMap {
    pub fn new(origin: Point, cell_size: f64, cols: usize, rows: usize) -> Self {
        Self {
            origin,
            cell_size,
            cols,
            rows,
            counts: vec![0; cols * rows],
        }
    }

    /// Grid of 0.5 m cells over the bounding box of `env`.
    pub fn for_environment(env: &Environment) -> Self {
        let (lo, hi) = env.bounding_box();
        let n = |span: f64| ((span / HEATMAP_CELL - 1e-9).ceil().max(1.0)) as usize;
        Self::new(lo, HEATMAP_CELL, n(hi.x - lo.x), n(hi.y - lo.y))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, col: usize, row: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + (col as f64 + 0.5) * self.cell_size,
            self.origin.y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell holding the largest count; ties go to the first in row order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        (best % self.cols, best / self.cols)
    }

    /// Count one frame at `p`, growing the grid if `p` falls outside it.
    pub fn add(&mut self, p: Point) {
        let mut col = ((p.x - self.origin.x) / self.cell_size).floor();
        let mut row = ((p.y - self.origin.y) / self.cell_size).floor();
        if col < 0.0 || row < 0.0 || col >= self.cols as f64 || row >= self.rows as f64 {
            log::warn!(
                "heat map position ({:.3}, {:.3}) outside grid; extending",
                p.x,
                p.y
            );
            self.extend_to(col, row);
            col = ((p.x - self.origin.x) / self.cell_size).floor();
            row = ((p.y - self.origin.y) / self.cell_size).floor();
        }
        let idx = row as usize * self.cols + col as usize;
        self.counts[idx] += 1;
    }

    fn extend_to(&mut self, col: f64, row: f64) {
        let left = (-col).max(0.0) as usize;
        let bottom = (-row).max(0.0) as usize;
        let right = (col + 1.0 - self.cols as f64).max(0.0) as usize;
        let top = (row + 1.0 - self.rows as f64).max(0.0) as usize;
        let cols = self.cols + left + right;
        let rows = self.rows + bottom + top;
        let mut counts = vec![0; cols * rows];
        for r in 0..self.rows {
            for c in 0..self.cols {
                counts[(r + bottom) * cols + c + left] = self.counts[r * self.cols + c];
            }
        }
        self.origin = Point::new(
            self.origin.x - left as f64 * self.cell_size,
            self.origin.y - bottom as f64 * self.cell_size,
        );
        self.cols = cols;
        self.rows = rows;
        self.counts = counts;
    }

    /// Add every frame of a record at its physical position.
    pub fn accumulate(&mut self, frames: &[Frame]) {
        for f in frames {
            self.add(f.physical.position);
        }
    }

    /// Plain PGM with counts scaled to 0..=255, north row first.
    pub fn to_pgm(&self) -> String {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let mut out = format!("P2\n{} {}\n255\n", self.cols, self.rows);
        for r in (0..self.rows).rev() {
            let line: Vec<String> = (0..self.cols)
                .map(|c| ((self.get(c, r) as f64 * 255.0 / max as f64).round() as u64).to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One row per cell: center coordinates and raw count.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_center,y_center,count\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.cell_center(c, r);
                let _ = writeln!(out, "{:.6},{:.6},{}", p.x, p.y, self.get(c, r));
            }
        }
        out
    }
}

/// Histogram of per-path mean |curvature| in deg/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Default for CurvatureHistogram {
    fn default() -> Self {
        let n = (HISTOGRAM_MAX / HISTOGRAM_BIN).round() as usize;
        Self {
            bin_edges: (0..=n).map(|i| i as f64 * HISTOGRAM_BIN).collect(),
            counts: vec![0; n],
        }
    }
}

impl CurvatureHistogram {
    /// Values past the last edge land in the last bin.
    pub fn add(&mut self, deg_s: f64) {
        let n = self.counts.len();
        let mut bin = n - 1;
        for i in 0..n {
            if deg_s < self.bin_edges[i + 1] {
                bin = i;
                break;
            }
        }
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low_deg_s,bin_high_deg_s,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{}",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                c
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::UserState;
    use crate::controllers::GainCommand;

    fn frame(x: f64, phase: FramePhase, step: f64, gains: GainCommand, alignment: f64) -> Frame {
        let s = UserState::new(Point::new(x, 0.0), 0.0);
        Frame {
            time: 0.0,
            physical: s,
            virtual_state: s,
            gains,
            phase,
            alignment,
            physical_step: step,
        }
    }

    #[test]
    fn segment_mean_hand_example() {
        let m = mean_segment_length(&[10.0, 30.0], 40.0);
        assert!((m - 40.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn resets_split_distance_evenly_in_the_mean() {
        let g = GainCommand::IDENTITY;
        let frames = vec![
            frame(0.0, FramePhase::Translating, 10.0, g, 1.0),
            frame(0.0, FramePhase::Resetting, 0.0, g, 50.0),
            frame(0.0, FramePhase::Translating, 20.0, g, 3.0),
            frame(0.0, FramePhase::Resetting, 0.0, g, 50.0),
            frame(0.0, FramePhase::Translating, 10.0, g, 2.0),
        ];
        let m = metrics_from_frames(&frames, 2, 1.0).unwrap();
        assert!((m.mean_distance_between_resets - 40.0 / 3.0).abs() < 1e-12);
        assert!((m.mean_alignment - 2.0).abs() < 1e-12);
        assert_eq!(m.redirected_frame_fraction, 0.0);
    }

    #[test]
    fn redirected_fraction_counts_any_gain() {
        let curved = GainCommand {
            curvature: 0.1,
            ..GainCommand::IDENTITY
        };
        let frames = vec![
            frame(0.0, FramePhase::Translating, 1.0, curved, 0.0),
            frame(
                0.0,
                FramePhase::Translating,
                1.0,
                GainCommand::IDENTITY,
                0.0,
            ),
            frame(0.0, FramePhase::Rotating, 0.0, GainCommand::IDENTITY, 0.0),
            frame(0.0, FramePhase::Resetting, 0.0, curved, 0.0),
        ];
        let m = metrics_from_frames(&frames, 0, 1.0).unwrap();
        assert!((m.redirected_frame_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.mean_abs_curvature - 0.05).abs() < 1e-12);
        assert!((m.mean_abs_curvature_deg_s - 0.05f64.to_degrees()).abs() < 1e-12);
    }

    #[test]
    fn empty_record_is_an_error() {
        assert_eq!(
            metrics_from_frames(&[], 0, 1.0),
            Err(MetricsError::EmptyRecord)
        );
    }

    #[test]
    fn stationary_frames_fill_one_cell() {
        let mut h = HeatMap::new(Point::new(-5.0, -5.0), 0.5, 20, 20);
        let frames: Vec<Frame> = (0..37)
            .map(|_| frame(0.1, FramePhase::Resetting, 0.0, GainCommand::IDENTITY, 0.0))
            .collect();
        h.accumulate(&frames);
        assert_eq!(h.total(), 37);
        let (c, r) = h.argmax();
        assert_eq!(h.get(c, r), 37);
        assert_eq!(h.cell_center(c, r), Point::new(0.25, 0.25));
    }

    #[test]
    fn heat_map_is_additive() {
        let a: Vec<Frame> = (0..10)
            .map(|i| {
                frame(
                    i as f64 * 0.3 - 2.0,
                    FramePhase::Translating,
                    0.3,
                    GainCommand::IDENTITY,
                    0.0,
                )
            })
            .collect();
        let b: Vec<Frame> = (0..7)
            .map(|i| {
                frame(
                    i as f64 * -0.4,
                    FramePhase::Translating,
                    0.4,
                    GainCommand::IDENTITY,
                    0.0,
                )
            })
            .collect();
        let mut split = HeatMap::new(Point::new(-5.0, -5.0), 0.5, 20, 20);
        split.accumulate(&a);
        split.accumulate(&b);
        let mut joined = HeatMap::new(Point::new(-5.0, -5.0), 0.5, 20, 20);
        joined.accumulate(&[a, b].concat());
        assert_eq!(split, joined);
    }

    #[test]
    fn out_of_grid_extends() {
        let mut h = HeatMap::new(Point::new(0.0, 0.0), 0.5, 2, 2);
        h.add(Point::new(-0.2, 1.2));
        assert_eq!(h.total(), 1);
        assert_eq!((h.cols, h.rows), (3, 3));
        assert_eq!(h.origin, Point::new(-0.5, 0.0));
    }

    #[test]
    fn pgm_scales_to_255() {
        let mut h = HeatMap::new(Point::new(0.0, 0.0), 0.5, 2, 1);
        h.add(Point::new(0.1, 0.1));
        h.add(Point::new(0.1, 0.1));
        h.add(Point::new(0.6, 0.1));
        assert_eq!(h.to_pgm(), "P2\n2 1\n255\n255 128\n");
    }

    #[test]
    fn histogram_bins() {
        let mut h = CurvatureHistogram::default();
        h.add(0.0);
        h.add(3.2);
        h.add(7.64);
        h.add(100.0);
        assert_eq!(h.total(), 4);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[6], 1);
        assert_eq!(h.counts[15], 2);
        assert!(h
            .to_csv()
            .starts_with("bin_low_deg_s,bin_high_deg_s,count\n0.000000,0.500000,1\n"));
    }
}
