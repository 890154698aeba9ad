//! Operator decoherence renormalization from calibration runs, and
//! percentile-bootstrap confidence intervals for reported estimates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pauli::PauliString;
use crate::sim::ShotTable;
use crate::{Error, Result};

/// Calibration factors at or below this are refused: dividing by them
/// amplifies variance beyond usefulness.
pub const REFUSAL_THRESHOLD: f64 = 0.05;
/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Default confidence level.
pub const DEFAULT_LEVEL: f64 = 0.70;
/// Minimum accepted resample count.
pub const MIN_RESAMPLES: usize = 100;

/// A point estimate with a percentile-bootstrap confidence interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub n_used: usize,
}

impl Estimate {
    /// Half the CI width: a rough standard-error proxy.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// One calibration measurement: the ideal expectation of the calibration
/// circuit, the measured noisy value, and the derived damping factor.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRecord {
    pub observable: String,
    pub ideal: f64,
    pub measured: f64,
    /// measured / ideal, clamped into (0, 1].
    pub factor: f64,
    /// True when |measured| exceeded |ideal| and the factor was clamped.
    pub clamped: bool,
}

impl CalibrationRecord {
    pub fn new(observable: impl Into<String>, ideal: f64, measured: f64) -> Self {
        let raw = measured / ideal;
        let clamped = raw > 1.0;
        CalibrationRecord {
            observable: observable.into(),
            ideal,
            measured,
            factor: if clamped { 1.0 } else { raw },
            clamped,
        }
    }

    /// A noiseless (identity) calibration.
    pub fn ideal(observable: impl Into<String>) -> Self {
        CalibrationRecord::new(observable, 1.0, 1.0)
    }
}

/// Decoherence renormalization: divide the noisy expectation by the
/// calibration damping factor. Refuses when the factor is at or below
/// the threshold.
pub fn odr_mitigate(noisy: f64, calib: &CalibrationRecord, threshold: f64) -> Result<f64> {
    if !(calib.factor > threshold) {
        return Err(Error::MitigationRefused {
            factor: calib.factor,
            threshold,
        });
    }
    Ok(noisy / calib.factor)
}

/// Percentile bootstrap of the sample mean: B resamples of size N with
/// replacement, CI between the (1-level)/2 and (1+level)/2 quantiles of
/// the resampled means. Deterministic for a given seed.
pub fn bootstrap(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::TooFewResamples(resamples));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} not in (0, 1)")));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += samples[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_unstable_by(|a, b| a.total_cmp(b));
    let alpha = 0.5 * (1.0 - level);
    let (ci_low, ci_high) = (quantile(&means, alpha), quantile(&means, 1.0 - alpha));
    Ok(Estimate {
        mean,
        ci_low: ci_low.min(mean),
        ci_high: ci_high.max(mean),
        level,
        n_used: n,
    })
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Per-shot parities (+1/-1) of a diagonal Z observable.
pub fn shot_parities(table: &ShotTable, obs: &PauliString) -> Result<Vec<f64>> {
    table
        .shots
        .iter()
        .map(|s| ShotTable::parity(s.bits, obs))
        .collect()
}

/// Mean of per-shot parities with a bootstrap CI.
pub fn estimate_pauli_expectation(
    table: &ShotTable,
    obs: &PauliString,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Estimate> {
    bootstrap(&shot_parities(table, obs)?, resamples, level, seed)
}

/// Diagonal Pauli expansion of a product of occupation factors
/// prod_i (1 - Z_i)/2: one term per site subset S, with coefficient
/// (-1)^|S| / 2^n on the Pauli Z_S.
pub fn occupation_product_terms(sites: &[usize]) -> Vec<(PauliString, f64)> {
    let n = sites.len();
    let scale = 1.0 / (1u64 << n) as f64;
    (0u64..1 << n)
        .map(|subset| {
            let mut p = PauliString::identity();
            for (i, &q) in sites.iter().enumerate() {
                if subset >> i & 1 == 1 {
                    p.set_letter(q, Some(crate::pauli::Pauli::Z));
                }
            }
            let sign = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign * scale)
        })
        .collect()
}

/// Per-shot values of a mitigated linear combination of diagonal Paulis:
/// each term's parity is divided by its own calibration factor (the
/// renormalization holds per Pauli term, not for products). Calibration
/// records must be aligned with the terms.
pub fn mitigated_shot_values(
    table: &ShotTable,
    terms: &[(PauliString, f64)],
    calibs: &[CalibrationRecord],
    threshold: f64,
) -> Result<Vec<f64>> {
    if terms.len() != calibs.len() {
        return Err(Error::Config(format!(
            "{} terms but {} calibration records",
            terms.len(),
            calibs.len()
        )));
    }
    for calib in calibs {
        if !(calib.factor > threshold) {
            return Err(Error::MitigationRefused {
                factor: calib.factor,
                threshold,
            });
        }
    }
    let mut values = vec![0.0; table.shots.len()];
    for ((obs, coeff), calib) in terms.iter().zip(calibs) {
        let scale = coeff / calib.factor;
        for (v, shot) in values.iter_mut().zip(&table.shots) {
            *v += scale * ShotTable::parity(shot.bits, obs)?;
        }
    }
    Ok(values)
}

/// Mitigated estimate with the calibration uncertainty propagated: both
/// the numerator (noisy per-shot parities) and the denominator
/// (calibration per-shot parities) are resampled independently and the
/// ratio recomputed per resample.
pub fn odr_mitigate_estimate(
    noisy_samples: &[f64],
    calib_samples: &[f64],
    calib_ideal: f64,
    resamples: usize,
    level: f64,
    threshold: f64,
    seed: u64,
) -> Result<(Estimate, CalibrationRecord)> {
    if noisy_samples.is_empty() || calib_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::TooFewResamples(resamples));
    }
    let calib_mean = calib_samples.iter().sum::<f64>() / calib_samples.len() as f64;
    let record = CalibrationRecord::new("odr", calib_ideal, calib_mean);
    if !(record.factor > threshold) {
        return Err(Error::MitigationRefused {
            factor: record.factor,
            threshold,
        });
    }
    let noisy_mean = noisy_samples.iter().sum::<f64>() / noisy_samples.len() as f64;
    let mean = noisy_mean / record.factor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut num = 0.0;
        for _ in 0..noisy_samples.len() {
            num += noisy_samples[rng.gen_range(0..noisy_samples.len())];
        }
        num /= noisy_samples.len() as f64;
        let mut den = 0.0;
        for _ in 0..calib_samples.len() {
            den += calib_samples[rng.gen_range(0..calib_samples.len())];
        }
        den /= calib_samples.len() as f64;
        // Clamp the resampled factor away from zero so a rare tiny
        // denominator cannot blow up the interval.
        let factor = (den / calib_ideal).min(1.0).max(threshold);
        ratios.push(num / factor);
    }
    ratios.sort_unstable_by(|a, b| a.total_cmp(b));
    let alpha = 0.5 * (1.0 - level);
    let (ci_low, ci_high) = (quantile(&ratios, alpha), quantile(&ratios, 1.0 - alpha));
    Ok((
        Estimate {
            mean,
            ci_low: ci_low.min(mean),
            ci_high: ci_high.max(mean),
            level,
            n_used: noisy_samples.len(),
        },
        record,
    ))
}
