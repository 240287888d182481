//! Environment complexity (mean clearance over a sample grid) and the
//! complexity ratio between a physical and a virtual environment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::{Environment, EnvironmentPair};
use crate::geometry::{self, Point};

pub const DEFAULT_SPACING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexityError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("no free grid points in {0}")]
    NoFreePoints(String),
}

/// Which grid points enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccupiedPoints {
    /// Only free-space points are averaged.
    #[default]
    Exclude,
    /// Points inside obstacles (or on an edge) count with clearance 0.
    AsZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub c_physical: f64,
    pub c_virtual: f64,
    pub ratio: f64,
    pub grid_spacing: f64,
    pub sample_counts: [usize; 2],
    /// The same ratio when occupied grid points are averaged in as zero.
    pub ratio_occupied_as_zero: f64,
}

/// Grid statistics for one environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMean {
    pub mean: f64,
    pub samples: usize,
}

/// Sample positions: centers of the square cells of pitch `spacing` that
/// tile the boundary's bounding box from its minimum corner.
fn grid_axes(env: &Environment, spacing: f64) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = env.bounding_box();
    let axis = |a: f64, b: f64| {
        let n = ((b - a) / spacing - 1e-9).ceil().max(1.0) as usize;
        (0..n)
            .map(|i| a + (i as f64 + 0.5) * spacing)
            .collect::<Vec<_>>()
    };
    (axis(lo.x, hi.x), axis(lo.y, hi.y))
}

pub fn grid_complexity(
    env: &Environment,
    spacing: f64,
    occupied: OccupiedPoints,
) -> Result<GridMean, ComplexityError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(ComplexityError::BadSpacing(spacing));
    }
    let (xs, ys) = grid_axes(env, spacing);
    let boundary = env.boundary();
    // Rows are summed independently, then reduced in row order so the
    // result does not depend on the thread count.
    let rows: Vec<(f64, usize)> = ys
        .par_iter()
        .map(|&y| {
            let mut sum = 0.0;
            let mut count = 0;
            for &x in &xs {
                let p = Point::new(x, y);
                if geometry::point_in_free_space(env, p) {
                    sum += geometry::clearance_unchecked(env, p);
                    count += 1;
                } else if occupied == OccupiedPoints::AsZero && boundary.contains_closed(p) {
                    count += 1;
                }
            }
            (sum, count)
        })
        .collect();
    let (sum, samples) = rows
        .iter()
        .fold((0.0, 0), |(s, n), &(rs, rn)| (s + rs, n + rn));
    if samples == 0 {
        return Err(ComplexityError::NoFreePoints(env.name().to_string()));
    }
    Ok(GridMean {
        mean: sum / samples as f64,
        samples,
    })
}

/// Mean clearance over the free-space grid points of `env`.
pub fn environment_complexity(env: &Environment, spacing: f64) -> Result<f64, ComplexityError> {
    Ok(grid_complexity(env, spacing, OccupiedPoints::Exclude)?.mean)
}

pub fn complexity_ratio(
    pair: &EnvironmentPair,
    spacing: f64,
) -> Result<ComplexityReport, ComplexityError> {
    let phys = grid_complexity(&pair.physical, spacing, OccupiedPoints::Exclude)?;
    let virt = grid_complexity(&pair.virtual_env, spacing, OccupiedPoints::Exclude)?;
    let phys0 = grid_complexity(&pair.physical, spacing, OccupiedPoints::AsZero)?;
    let virt0 = grid_complexity(&pair.virtual_env, spacing, OccupiedPoints::AsZero)?;
    Ok(ComplexityReport {
        c_physical: phys.mean,
        c_virtual: virt.mean,
        ratio: phys.mean / virt.mean,
        grid_spacing: spacing,
        sample_counts: [phys.samples, virt.samples],
        ratio_occupied_as_zero: phys0.mean / virt0.mean,
    })
}
