//! Agreement between two runs on the same sample grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{Estimate, TimeSeries};

pub const OBSERVABLES: [&str; 4] = ["N1", "N2", "N3", "xi13"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Largest tolerated discrepancy in units of the combined stderr.
    pub sigma: f64,
    /// Half-width, in samples, of a centred moving average applied to both
    /// value curves before differencing. Zero compares raw values; a positive
    /// width suppresses oscillations faster than the window.
    pub smoothing: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            smoothing: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableAgreement {
    pub name: String,
    /// max_t |a − b| / sqrt(σ_a² + σ_b²).
    pub max_sigma: f64,
    pub time_of_max: f64,
    pub max_abs_diff: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub options: CompareOptions,
    pub observables: Vec<ObservableAgreement>,
    pub passed: bool,
}

impl Agreement {
    pub fn get(&self, name: &str) -> Option<&ObservableAgreement> {
        self.observables.iter().find(|o| o.name == name)
    }
}

fn smooth(xs: &[Estimate], half: usize) -> Vec<f64> {
    if half == 0 {
        return xs.iter().map(|e| e.value).collect();
    }
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(xs.len() - 1);
            let w = &xs[lo..=hi];
            w.iter().map(|e| e.value).sum::<f64>() / w.len() as f64
        })
        .collect()
}

fn curve<'a>(ts: &'a TimeSeries, k: usize) -> &'a [Estimate] {
    if k < 3 {
        &ts.populations[k]
    } else {
        &ts.xi13
    }
}

/// Largest discrepancy of each observable in units of the combined standard
/// error. Points where both errors vanish count as zero if the values are
/// identical and infinite otherwise.
pub fn compare_runs(a: &TimeSeries, b: &TimeSeries, options: &CompareOptions) -> Result<Agreement> {
    if a.len() != b.len()
        || a
            .times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(Error::Mismatch(format!(
            "sample grids differ ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    let mut observables = Vec::new();
    for (k, name) in OBSERVABLES.iter().enumerate() {
        let (ca, cb) = (curve(a, k), curve(b, k));
        let (va, vb) = (smooth(ca, options.smoothing), smooth(cb, options.smoothing));
        let mut worst = ObservableAgreement {
            name: name.to_string(),
            max_sigma: 0.0,
            time_of_max: a.times.first().copied().unwrap_or(0.0),
            max_abs_diff: 0.0,
            passed: true,
        };
        for i in 0..a.len() {
            let d = (va[i] - vb[i]).abs();
            let se = (ca[i].stderr.powi(2) + cb[i].stderr.powi(2)).sqrt();
            let z = if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            // NaN (undefined stderr) counts as a failure
            if z > worst.max_sigma || z.is_nan() {
                worst.max_sigma = z;
                worst.time_of_max = a.times[i];
            }
            worst.max_abs_diff = worst.max_abs_diff.max(d);
        }
        worst.passed = worst.max_sigma <= options.sigma;
        observables.push(worst);
    }
    let passed = observables.iter().all(|o| o.passed);
    Ok(Agreement {
        options: options.clone(),
        observables,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Representation;

    fn series(offset: f64, se: f64) -> TimeSeries {
        let n = 5;
        let est = |i: usize| Estimate {
            value: i as f64 + offset,
            stderr: se,
        };
        TimeSeries {
            representation: Representation::Wigner,
            times: (0..n).map(|i| i as f64).collect(),
            populations: [
                (0..n).map(est).collect(),
                (0..n).map(est).collect(),
                (0..n).map(est).collect(),
            ],
            xi13: (0..n).map(est).collect(),
            divergence_fraction: vec![0.0; n],
        }
    }

    #[test]
    fn self_comparison_is_exact() {
        let a = series(0.0, 0.1);
        let r = compare_runs(&a, &a, &CompareOptions::default()).unwrap();
        assert!(r.passed);
        assert!(r.observables.iter().all(|o| o.max_sigma == 0.0));
    }

    #[test]
    fn offset_measured_in_combined_sigma() {
        let a = series(0.0, 0.3);
        let b = series(1.0, 0.4);
        let r = compare_runs(&a, &b, &CompareOptions { sigma: 1.5, smoothing: 0 }).unwrap();
        assert!((r.get("N1").unwrap().max_sigma - 2.0).abs() < 1e-12);
        assert!(!r.passed);
        let r = compare_runs(&a, &b, &CompareOptions { sigma: 2.5, smoothing: 0 }).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn exact_curves_disagree_infinitely() {
        let r = compare_runs(&series(0.0, 0.0), &series(1e-9, 0.0), &CompareOptions::default())
            .unwrap();
        assert!(r.get("xi13").unwrap().max_sigma.is_infinite());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = series(0.0, 0.1);
        let mut b = a.clone();
        b.times[2] += 0.5;
        assert!(compare_runs(&a, &b, &CompareOptions::default()).is_err());
        b.times.pop();
        assert!(compare_runs(&a, &b, &CompareOptions::default()).is_err());
    }
}
