//! Residual diagnostics for one-step prediction errors: sample
//! autocorrelation with white-noise bands, the cumulated periodogram with
//! Kolmogorov-Smirnov bands, and RMSE.

use serde::{Deserialize, Serialize};

use crate::ekf::{FilterPass, BURN_IN};
use crate::{Error, Result};

/// Asymptotic two-sided 95% Kolmogorov-Smirnov constant.
pub const KS_95: f64 = 1.358;

/// Residual diagnostics summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Innovations standardized by their predicted standard deviation,
    /// burn-in excluded.
    pub standardized_residuals: Vec<f64>,
    /// Sample ACF at lags `0..=max_lag`.
    pub acf: Vec<f64>,
    /// White-noise band half-width `1.96 / sqrt(N)`.
    pub acf_band: f64,
    /// Fourier frequencies (cycles per sample) of the cumulated periodogram.
    pub cp_freqs: Vec<f64>,
    /// Cumulated periodogram values, nondecreasing from ~0 to 1.
    pub cp_values: Vec<f64>,
    /// KS band offset around the diagonal.
    pub cp_band: f64,
    /// Root mean squared one-step prediction error, degC.
    pub rmse: f64,
    /// Fraction of ACF lags `1..=max_lag` inside the white-noise band.
    pub whiteness_summary: f64,
}

/// Biased sample autocorrelation at lags `0..=max_lag`:
/// `rho(h) = sum (x_t - xbar)(x_{t+h} - xbar) / sum (x_t - xbar)^2`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag < 1 || x.len() <= max_lag {
        return Err(Error::Diagnostics(format!(
            "need length > max_lag >= 1, got length {} and max_lag {max_lag}",
            x.len()
        )));
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 0.0 {
        return Err(Error::Diagnostics(
            "ACF undefined for a constant sequence".into(),
        ));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let num: f64 = (0..n - h).map(|t| (x[t] - mean) * (x[t + h] - mean)).sum();
        out.push(num / denom);
    }
    Ok(out)
}

/// Cumulated periodogram at the Fourier frequencies `j/n` for
/// `j = 1..=floor((n-1)/2)`, normalized to end at 1, with the 95% KS band
/// offset `KS_95 / sqrt(n_freq)`.
pub fn cumulated_periodogram(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = x.len();
    if n < 16 {
        return Err(Error::Diagnostics(format!(
            "need at least 16 samples for the cumulated periodogram, got {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() <= 0.0 {
        return Err(Error::Diagnostics(
            "cumulated periodogram undefined for zero-variance input".into(),
        ));
    }
    let n_freq = (n - 1) / 2;
    let mut power = Vec::with_capacity(n_freq);
    let mut freqs = Vec::with_capacity(n_freq);
    for j in 1..=n_freq {
        // DFT at angular frequency 2*pi*j/n via a complex phase recurrence.
        let angle = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let (step_sin, step_cos) = angle.sin_cos();
        let (mut re, mut im) = (0.0f64, 0.0f64);
        let (mut cur_cos, mut cur_sin) = (1.0f64, 0.0f64);
        for &v in x {
            let c = v - mean;
            re += c * cur_cos;
            im -= c * cur_sin;
            let next_cos = cur_cos * step_cos - cur_sin * step_sin;
            cur_sin = cur_cos * step_sin + cur_sin * step_cos;
            cur_cos = next_cos;
        }
        power.push(re * re + im * im);
        freqs.push(j as f64 / n as f64);
    }
    let total: f64 = power.iter().sum();
    let mut cumulative = Vec::with_capacity(n_freq);
    let mut acc = 0.0;
    for p in &power {
        acc += p / total;
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok((freqs, cumulative, KS_95 / (n_freq as f64).sqrt()))
}

/// Root mean squared difference between two equal-length sequences.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() || pred.is_empty() {
        return Err(Error::Diagnostics(format!(
            "rmse needs equal nonempty lengths, got {} and {}",
            pred.len(),
            obs.len()
        )));
    }
    let ss: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Maximum deviation of the cumulated periodogram from the uniform diagonal
/// through the Fourier frequencies.
pub fn cp_max_deviation(freqs: &[f64], values: &[f64]) -> f64 {
    let n_freq = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let _ = freqs;
            (v - (k + 1) as f64 / n_freq).abs()
        })
        .fold(0.0, f64::max)
}

/// Builds the full report from a filter pass: standardizes the innovations,
/// excludes the burn-in, and assembles ACF, cumulated periodogram, RMSE, and
/// the whiteness summary.
pub fn diagnostics_report(pass: &FilterPass, max_lag: usize) -> Result<DiagnosticsReport> {
    let residuals = pass.standardized_residuals(BURN_IN);
    let acf_values = acf(&residuals, max_lag)?;
    let n = residuals.len() as f64;
    let band = 1.96 / n.sqrt();
    let inside = acf_values[1..].iter().filter(|v| v.abs() <= band).count();
    let whiteness = inside as f64 / max_lag as f64;
    let (cp_freqs, cp_values, cp_band) = cumulated_periodogram(&residuals)?;
    let raw: Vec<f64> = pass.innovations.iter().skip(BURN_IN).cloned().collect();
    let zeros = vec![0.0; raw.len()];
    let rmse_value = rmse(&raw, &zeros)?;
    Ok(DiagnosticsReport {
        standardized_residuals: residuals,
        acf: acf_values,
        acf_band: band,
        cp_freqs,
        cp_values,
        cp_band,
        rmse: rmse_value,
        whiteness_summary: whiteness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn acf_lag_zero_is_one() {
        let x = [1.0, 2.0, -0.5, 3.0, 0.2, -1.0];
        let rho = acf(&x, 2).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!(rho.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn acf_alternating_sequence() {
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rho = acf(&x, 1).unwrap();
        assert!(
            (rho[1] + 1.0).abs() < 2.0 / n as f64,
            "acf[1] = {} for alternating signs",
            rho[1]
        );
    }

    #[test]
    fn acf_white_noise_stays_in_band() {
        let n = 5000;
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let rho = acf(&x, 40).unwrap();
        let band = 1.96 / (n as f64).sqrt();
        let inside = rho[1..].iter().filter(|v| v.abs() <= band).count();
        assert!(inside >= 36, "only {inside}/40 lags inside the band");
    }

    #[test]
    fn acf_rejects_constant_and_short_input() {
        assert!(acf(&[2.0; 50], 5).is_err());
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn cp_is_nondecreasing_and_ends_at_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..257).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (freqs, values, _) = cumulated_periodogram(&x).unwrap();
        assert_eq!(freqs.len(), 128);
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert_abs_diff_eq!(*values.last().unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cp_concentrates_on_a_sinusoid() {
        let n = 512;
        let f = 0.125; // cycles per sample, an exact Fourier frequency
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * f * t as f64).sin())
            .collect();
        let (freqs, values, _) = cumulated_periodogram(&x).unwrap();
        // Essentially all mass lands at f: the CP jumps from ~0 to ~1 there.
        let at = freqs.iter().position(|&fr| fr >= f).unwrap();
        assert!(values[at] > 0.999);
        if at > 0 {
            assert!(values[at - 1] < 0.001);
        }
    }

    #[test]
    fn cp_scale_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let x: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| 37.5 * v).collect();
        let (_, v1, _) = cumulated_periodogram(&x).unwrap();
        let (_, v2, _) = cumulated_periodogram(&scaled).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn white_noise_cp_inside_ks_band() {
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let x: Vec<f64> = (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (freqs, values, band) = cumulated_periodogram(&x).unwrap();
        assert!(cp_max_deviation(&freqs, &values) < band);
    }

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // Constant offset c gives |c|.
        let pred = [5.0, 6.0, 7.0];
        let obs = [4.0, 5.0, 6.0];
        assert_abs_diff_eq!(rmse(&pred, &obs).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            (25.0f64 / 2.0).sqrt(),
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5355, epsilon = 1e-4);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn report_on_well_specified_filter_is_nearly_white() {
        use crate::ekf::{filter_pass, FilterState, DEFAULT_SUBSTEPS};
        use crate::simulate::{default_truth_params, simulate_sde, SimConfig};
        let p = default_truth_params();
        let cfg = SimConfig {
            duration_min: 2880.0,
            seed: 77,
            ..SimConfig::default()
        };
        let data = simulate_sde(&p, &cfg).unwrap().dataset();
        let init = FilterState::diffuse_init(&data, &p);
        let pass = filter_pass(&p, &data, init, DEFAULT_SUBSTEPS).unwrap();
        let report = diagnostics_report(&pass, 40).unwrap();
        assert!(
            report.whiteness_summary >= 0.9,
            "whiteness {} below 0.9",
            report.whiteness_summary
        );
        assert_eq!(report.acf[0], 1.0);
        assert!(report.rmse > 0.0 && report.rmse < 0.5);
    }
}
