//! Outlier replacement, trimmed means and paired bootstrap contrasts.
//!
//! Quartiles use linear interpolation between order statistics at
//! position `(n - 1) * q` (the inclusive method).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRIM: f64 = 0.2;
pub const N_BOOT: usize = 2000;
pub const CONFIDENCE: f64 = 0.95;
pub const FENCE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("paired samples differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
}

/// One value per path for a metric under one controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: String,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Inclusive linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replaced {
    pub sample: Sample,
    pub replaced: usize,
    /// Set when the sample was too small to fence and came back unchanged.
    pub too_small: bool,
}

/// Replace values outside the Tukey fences `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`
/// with the median. Fences and median come from the input, before any
/// replacement.
pub fn replace_outliers(s: &Sample) -> Replaced {
    if s.len() < 4 {
        log::warn!(
            "{}: {} values, outlier replacement skipped",
            s.label,
            s.len()
        );
        return Replaced {
            sample: s.clone(),
            replaced: 0,
            too_small: true,
        };
    }
    let v = sorted(&s.values);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let med = quantile_sorted(&v, 0.5);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - FENCE * iqr, q3 + FENCE * iqr);
    let mut replaced = 0;
    let values = s
        .values
        .iter()
        .map(|&x| {
            if x < lo || x > hi {
                replaced += 1;
                med
            } else {
                x
            }
        })
        .collect();
    Replaced {
        sample: Sample {
            values,
            label: s.label.clone(),
        },
        replaced,
        too_small: false,
    }
}

/// Mean after dropping `floor(proportion * n)` values from each tail.
/// Samples smaller than five fall back to the plain mean.
pub fn trimmed_mean(values: &[f64], proportion: f64) -> f64 {
    let n = values.len();
    if n < 5 {
        if proportion > 0.0 {
            log::warn!("trimmed mean of {n} values falls back to the plain mean");
        }
        return values.iter().sum::<f64>() / n as f64;
    }
    let g = (proportion * n as f64).floor() as usize;
    let v = sorted(values);
    let kept = &v[g..n - g];
    kept.iter().sum::<f64>() / kept.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub psi_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_boot: usize,
    pub confidence: f64,
    pub n: usize,
}

impl Contrast {
    pub fn excludes_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// `tm(a) - tm(b)` with a percentile interval from `N_BOOT` resamples of
/// path indices shared by both samples.
pub fn bootstrap_contrast(a: &Sample, b: &Sample, seed: u64) -> Result<Contrast, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = a.len();
    let psi_hat = trimmed_mean(&a.values, TRIM) - trimmed_mean(&b.values, TRIM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let mut reps = Vec::with_capacity(N_BOOT);
    for _ in 0..N_BOOT {
        for k in 0..n {
            let i = rng.gen_range(0..n);
            ra[k] = a.values[i];
            rb[k] = b.values[i];
        }
        reps.push(trimmed_mean(&ra, TRIM) - trimmed_mean(&rb, TRIM));
    }
    reps.sort_by(f64::total_cmp);
    let alpha = 1.0 - CONFIDENCE;
    let ci_low = quantile_sorted(&reps, alpha / 2.0).min(psi_hat);
    let ci_high = quantile_sorted(&reps, 1.0 - alpha / 2.0).max(psi_hat);
    Ok(Contrast {
        psi_hat,
        ci_low,
        ci_high,
        n_boot: N_BOOT,
        confidence: CONFIDENCE,
        n,
    })
}

pub const SUMMARY_CSV_HEADER: &str = "environment,metric,contrast,psi_hat,ci_low,ci_high,n";

pub fn summary_csv_row(
    environment: &str,
    metric: &str,
    contrast_label: &str,
    c: &Contrast,
) -> String {
    format!(
        "{environment},{metric},{contrast_label},{:.6},{:.6},{:.6},{}",
        c.psi_hat, c.ci_low, c.ci_high, c.n
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new("t", v.to_vec()).unwrap()
    }

    #[test]
    fn outlier_hand_example() {
        let r = replace_outliers(&sample(&[1.0, 2.0, 3.0, 4.0, 100.0]));
        assert_eq!(r.sample.values, vec![1.0, 2.0, 3.0, 4.0, 3.0]);
        assert_eq!(r.replaced, 1);
    }

    #[test]
    fn constant_and_clean_samples_unchanged() {
        let c = sample(&[2.0; 7]);
        assert_eq!(replace_outliers(&c).sample, c);
        let s = sample(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(replace_outliers(&s).sample, s);
    }

    #[test]
    fn small_sample_flagged() {
        let s = sample(&[1.0, 2.0, 300.0]);
        let r = replace_outliers(&s);
        assert!(r.too_small);
        assert_eq!(r.sample, s);
    }

    #[test]
    fn low_outliers_replaced_too() {
        let r = replace_outliers(&sample(&[-100.0, 1.0, 2.0, 3.0, 4.0]));
        assert_eq!(r.sample.values, vec![2.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn trimmed_mean_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(trimmed_mean(&v, 0.2), 5.5);
        assert_eq!(trimmed_mean(&[4.0; 9], 0.2), 4.0);
        assert_eq!(
            trimmed_mean(&[1.0, 2.0, 3.0, 10.0, 4.0, 5.0], 0.0),
            25.0 / 6.0
        );
        assert_eq!(trimmed_mean(&[1.0, 2.0, 9.0], 0.2), 4.0);
    }

    #[test]
    fn quartiles_inclusive() {
        let v = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_eq!(quantile_sorted(&v, 0.75), 4.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    }

    #[test]
    fn identical_samples_give_zero_contrast() {
        let a = sample(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let c = bootstrap_contrast(&a, &a, 11).unwrap();
        assert_eq!(c.psi_hat, 0.0);
        assert!(c.ci_low <= 0.0 && c.ci_high >= 0.0);
    }

    #[test]
    fn shifted_sample_contrast() {
        let a = sample(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let b = sample(&a.values.iter().map(|x| x + 5.0).collect::<Vec<_>>());
        let c = bootstrap_contrast(&a, &b, 3).unwrap();
        assert!((c.psi_hat + 5.0).abs() < 1e-12);
        assert!((c.ci_low + 5.0).abs() < 1e-12);
        assert!((c.ci_high + 5.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let a = sample(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let b = sample(&[2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0]);
        assert_eq!(
            bootstrap_contrast(&a, &b, 42).unwrap(),
            bootstrap_contrast(&a, &b, 42).unwrap()
        );
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = sample(&[1.0, 2.0]);
        let b = sample(&[1.0]);
        assert_eq!(
            bootstrap_contrast(&a, &b, 0),
            Err(StatsError::SizeMismatch(2, 1))
        );
    }

    #[test]
    fn sample_validation() {
        assert_eq!(Sample::new("x", vec![]), Err(StatsError::Empty));
        assert_eq!(Sample::new("x", vec![f64::NAN]), Err(StatsError::NonFinite));
    }
}
