//! Weighted least-squares fit of decay exponents with residual bootstrap.

use super::DecayCurve;
use crate::error::{Error, Result};
use crate::rng::auxiliary;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bootstrap resamples for the exponent interval.
pub const BOOTSTRAP_RESAMPLES: usize = 199;
/// Minimum usable points in the fit window.
pub const MIN_FIT_POINTS: usize = 5;
/// A point is usable while its distance exceeds this multiple of its error.
pub const SIGNAL_TO_NOISE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DecayModel {
    /// `d ≈ C (1+t)^a`.
    PurePower,
    /// `d ≈ C ln(1+t)^p (1+t)^a`; requires `t > e − 1` in the window.
    PowerWithLog { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: DecayModel,
    pub exponent: f64,
    pub intercept: f64,
    /// Percentile interval from the residual bootstrap, widened to contain the estimate.
    pub exponent_ci: [f64; 2],
    pub log_correction_used: bool,
    pub requested_window: [f64; 2],
    /// First and last time actually fitted.
    pub fit_window: [f64; 2],
    /// The noise floor cut the window short.
    pub window_shrunk: bool,
    pub n_points: usize,
}

fn wls(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `ln d` against `ln(1+t)` over `window`, keeping the leading run of
/// points with `d > 3·err`. Weights are `(d/err)²` when every error is
/// positive, uniform otherwise.
pub fn fit_decay(curve: &DecayCurve, window: [f64; 2], model: DecayModel) -> Result<FitResult> {
    if !(window[0] < window[1]) {
        return Err(Error::param("fit.window", "need t_start < t_end"));
    }
    if let DecayModel::PowerWithLog { p } = model {
        if !p.is_finite() {
            return Err(Error::param("fit.log_power", "must be finite"));
        }
        if window[0] <= std::f64::consts::E - 1.0 {
            return Err(Error::param("fit.window", "log-corrected model needs t_start > e - 1"));
        }
    }
    let in_window: Vec<usize> = (0..curve.times.len())
        .filter(|&k| curve.times[k] >= window[0] && curve.times[k] <= window[1])
        .collect();
    let usable: Vec<usize> = in_window
        .iter()
        .copied()
        .take_while(|&k| curve.l1_distance[k] > SIGNAL_TO_NOISE * curve.l1_err[k] && curve.l1_distance[k] > 0.0)
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::FitRefused(format!(
            "{} of {} window points exceed {SIGNAL_TO_NOISE} times their error; need {MIN_FIT_POINTS}",
            usable.len(),
            in_window.len()
        )));
    }
    let x: Vec<f64> = usable.iter().map(|&k| curve.times[k].ln_1p()).collect();
    let offset = |t: f64| match model {
        DecayModel::PurePower => 0.0,
        DecayModel::PowerWithLog { p } => p * t.ln_1p().ln(),
    };
    let y: Vec<f64> = usable
        .iter()
        .map(|&k| curve.l1_distance[k].ln() - offset(curve.times[k]))
        .collect();
    let all_errors = usable.iter().all(|&k| curve.l1_err[k] > 0.0);
    let w: Vec<f64> = usable
        .iter()
        .map(|&k| {
            if all_errors {
                (curve.l1_distance[k] / curve.l1_err[k]).powi(2)
            } else {
                1.0
            }
        })
        .collect();
    let (slope, intercept) = wls(&x, &y, &w);
    let fitted: Vec<f64> = x.iter().map(|xi| intercept + slope * xi).collect();
    let scaled: Vec<f64> = (0..x.len()).map(|j| (y[j] - fitted[j]) * w[j].sqrt()).collect();
    let mut rng = auxiliary(0xf17, usable.len() as u64);
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let yb: Vec<f64> = (0..x.len())
                .map(|j| fitted[j] + scaled[rng.random_range(0..x.len())] / w[j].sqrt())
                .collect();
            wls(&x, &yb, &w).0
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let lo = boot[(0.025 * (BOOTSTRAP_RESAMPLES + 1) as f64) as usize - 1];
    let hi = boot[(0.975 * (BOOTSTRAP_RESAMPLES + 1) as f64) as usize - 1];
    let first = curve.times[usable[0]];
    let last = curve.times[*usable.last().expect("nonempty")];
    Ok(FitResult {
        model,
        exponent: slope,
        intercept,
        exponent_ci: [lo.min(slope), hi.max(slope)],
        log_correction_used: matches!(model, DecayModel::PowerWithLog { .. }),
        requested_window: window,
        fit_window: [first, last],
        window_shrunk: usable.len() < in_window.len(),
        n_points: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(mut f: impl FnMut(f64) -> f64, rel_err: f64) -> DecayCurve {
        let mut c = DecayCurve::new(Vec::new());
        for k in 0..40 {
            let t = 10f64.powf(1.0 + 2.0 * k as f64 / 39.0);
            let d = f(t);
            c.push(t, 1.0, d, rel_err * d, Vec::new()).unwrap();
        }
        c
    }

    #[test]
    fn pure_power_is_exact() {
        let c = synthetic(|t| (1.0 + t).powi(-2), 0.01);
        let r = fit_decay(&c, [10.0, 1000.0], DecayModel::PurePower).unwrap();
        assert!((r.exponent + 2.0).abs() < 1e-9, "{r:?}");
        assert!(r.exponent_ci[0] <= r.exponent && r.exponent <= r.exponent_ci[1]);
        assert!(!r.window_shrunk);
    }

    #[test]
    fn log_corrected_power_is_recovered() {
        let c = synthetic(|t| t.ln_1p().powi(3) / (1.0 + t).powi(3), 0.01);
        let r = fit_decay(&c, [10.0, 1000.0], DecayModel::PowerWithLog { p: 3.0 }).unwrap();
        assert!((r.exponent + 3.0).abs() < 1e-9);
        assert!(r.exponent_ci[0] <= -3.0 + 1e-9 && -3.0 - 1e-9 <= r.exponent_ci[1]);
    }

    #[test]
    fn noise_floor_shrinks_window() {
        let mut c = synthetic(|t| (1.0 + t).powi(-2), 0.01);
        for k in 0..c.times.len() {
            c.l1_err[k] = 1e-5;
        }
        let r = fit_decay(&c, [10.0, 1000.0], DecayModel::PurePower).unwrap();
        assert!(r.window_shrunk);
        assert!(r.fit_window[1] < 200.0);
        assert!((r.exponent + 2.0).abs() < 1e-9);
    }

    #[test]
    fn pure_noise_is_refused() {
        let c = synthetic(|_| 1e-3, 0.5);
        let e = fit_decay(&c, [10.0, 1000.0], DecayModel::PurePower).unwrap_err();
        assert!(matches!(e, Error::FitRefused(_)));
    }

    #[test]
    fn noisy_fit_interval_covers_truth() {
        let mut rng = auxiliary(9, 9);
        let c = synthetic(
            |t| {
                let z: f64 = rng.random_range(-1.0..1.0);
                (1.0 + t).powf(-2.0) * (1.0 + 0.05 * z)
            },
            0.03,
        );
        let r = fit_decay(&c, [10.0, 1000.0], DecayModel::PurePower).unwrap();
        assert!(r.exponent_ci[0] < -2.0 && -2.0 < r.exponent_ci[1], "{r:?}");
    }
}
