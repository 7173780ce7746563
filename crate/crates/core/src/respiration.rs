//! Breath-cycle detection, instantaneous respiratory rate (IRR) and the
//! spectral signal-quality index (SQI).

use crate::error::{Error, Result};
use crate::signal::{butter_bandpass, butter_lowpass, linear_detrend, power_spectrum, TimeSeries};

/// IRR output sampling rate.
pub const IRR_RATE_HZ: f64 = 4.0;
/// Respiratory band used by the SQI.
pub const RESP_BAND_HZ: (f64, f64) = (0.1, 0.75);
pub const SQI_BANDPASS_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BreathConfig {
    pub lowpass_hz: f64,
    pub lowpass_order: usize,
    /// Minimum spacing between accepted cycle boundaries.
    pub min_cycle_s: f64,
    /// Positive excursion preceding a boundary must exceed this fraction of
    /// the (filtered) signal RMS.
    pub amp_frac: f64,
    pub min_onsets: usize,
    pub min_duration_s: f64,
}

impl Default for BreathConfig {
    fn default() -> Self {
        Self {
            lowpass_hz: 2.0,
            lowpass_order: 5,
            min_cycle_s: 1.0,
            amp_frac: 0.1,
            min_onsets: 3,
            min_duration_s: 10.0,
        }
    }
}

/// Strictly increasing breath-cycle boundary times, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct BreathCycles {
    onsets_s: Vec<f64>,
}

impl BreathCycles {
    pub fn new(onsets_s: Vec<f64>) -> Result<Self> {
        if onsets_s.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("breath onsets must be finite"));
        }
        if let Some(w) = onsets_s.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "breath onsets must be strictly increasing (index {})",
                w + 1
            )));
        }
        Ok(Self { onsets_s })
    }

    pub fn onsets_s(&self) -> &[f64] {
        &self.onsets_s
    }

    pub fn len(&self) -> usize {
        self.onsets_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets_s.is_empty()
    }

    /// Durations between consecutive boundaries.
    pub fn intervals_s(&self) -> Vec<f64> {
        self.onsets_s.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Detects cycle boundaries as gated downward zero-crossings of the
/// detrended, low-passed airflow (inspiration positive).
pub fn detect_breath_cycles(airflow: &TimeSeries, cfg: &BreathConfig) -> Result<BreathCycles> {
    if airflow.duration_s() < cfg.min_duration_s {
        return Err(Error::invalid(format!(
            "breath detection needs at least {} s of signal, got {:.3} s",
            cfg.min_duration_s,
            airflow.duration_s()
        )));
    }
    let detrended = linear_detrend(airflow)?;
    let filtered = butter_lowpass(&detrended, cfg.lowpass_hz, cfg.lowpass_order)?;
    let x = filtered.samples();
    let rate = airflow.rate_hz();

    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let threshold = cfg.amp_frac * rms;
    let mut onsets: Vec<f64> = Vec::new();
    if rms > 0.0 {
        let mut excursion = f64::NEG_INFINITY;
        for n in 1..x.len() {
            excursion = excursion.max(x[n - 1]);
            if !(x[n - 1] > 0.0 && x[n] <= 0.0) {
                continue;
            }
            let frac = x[n - 1] / (x[n - 1] - x[n]);
            let t = airflow.start_time_s() + ((n - 1) as f64 + frac) / rate;
            let spaced = onsets.last().is_none_or(|&last| t - last >= cfg.min_cycle_s);
            if excursion > threshold && spaced {
                onsets.push(t);
                excursion = f64::NEG_INFINITY;
            }
        }
    }
    if onsets.len() < cfg.min_onsets {
        return Err(Error::InsufficientBreaths {
            found: onsets.len(),
            needed: cfg.min_onsets,
        });
    }
    BreathCycles::new(onsets)
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::invalid("monotone cubic needs at least two knots"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("knot abscissae must be strictly increasing"));
        }
        let secants: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            m[k] = if a * b > 0.0 { (a + b) / 2.0 } else { 0.0 };
        }
        for k in 0..n - 1 {
            let d = secants[k];
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let alpha = m[k] / d;
            let beta = m[k + 1] / d;
            if alpha < 0.0 {
                m[k] = 0.0;
            }
            if beta < 0.0 {
                m[k + 1] = 0.0;
            }
            let norm = alpha * alpha + beta * beta;
            if norm > 9.0 {
                let tau = 3.0 / norm.sqrt();
                m[k] = tau * alpha * d;
                m[k + 1] = tau * beta * d;
            }
        }
        Ok(Self { x, y, slopes: m })
    }

    /// Evaluates the interpolant; constant hold outside the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&xk| xk <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

/// Instantaneous respiratory rate in cycles per minute, sampled at 4 Hz over
/// `[0, duration_s)`.
pub fn build_irr(cycles: &BreathCycles, duration_s: f64) -> Result<TimeSeries> {
    let onsets = cycles.onsets_s();
    if onsets.len() < 3 {
        return Err(Error::InsufficientBreaths {
            found: onsets.len(),
            needed: 3,
        });
    }
    if !(duration_s > 0.0) {
        return Err(Error::invalid("IRR duration must be positive"));
    }
    let knots_t = onsets[1..].to_vec();
    let knots_v = onsets.windows(2).map(|w| 60.0 / (w[1] - w[0])).collect();
    let spline = MonotoneCubic::new(knots_t, knots_v)?;
    let n = (duration_s * IRR_RATE_HZ).round().max(1.0) as usize;
    let samples = (0..n).map(|k| spline.eval(k as f64 / IRR_RATE_HZ)).collect();
    TimeSeries::new(samples, IRR_RATE_HZ)
}

/// Fraction of in-band spectral power concentrated in the five DFT bins
/// around the respiratory peak. DC is excluded from the denominator.
pub fn sqi(airflow_window: &TimeSeries) -> Result<f64> {
    let (lo, hi) = RESP_BAND_HZ;
    let band = butter_bandpass(airflow_window, lo, hi, SQI_BANDPASS_ORDER)?;
    let spec = power_spectrum(&band)?;
    let last = spec.power.len() - 1;
    let total: f64 = spec.power[1..].iter().sum();
    let band_bins = spec.bins_in(lo, hi);
    if total <= 0.0 || band_bins.is_empty() {
        return Ok(0.0);
    }
    let mut peak = *band_bins.start();
    for l in band_bins {
        if spec.power[l] > spec.power[peak] {
            peak = l;
        }
    }
    let from = peak.saturating_sub(2).max(1);
    let to = (peak + 2).min(last);
    let num: f64 = spec.power[from..=to].iter().sum();
    Ok((num / total).clamp(0.0, 1.0))
}

/// SQI for every epoch index `i > 5` (one-based), each computed on the six
/// epochs ending at `i`. Returns `(epoch_index, sqi)` pairs.
pub fn sqi_series(airflow: &TimeSeries, epoch_s: f64) -> Result<Vec<(usize, f64)>> {
    let per_epoch = (epoch_s * airflow.rate_hz()).round() as usize;
    let n_epochs = airflow.len() / per_epoch;
    (6..=n_epochs)
        .map(|i| {
            let w = airflow.slice((i - 6) * per_epoch, 6 * per_epoch)?;
            Ok((i, sqi(&w)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_series(freq: f64, rate: f64, secs: f64) -> TimeSeries {
        let n = (rate * secs) as usize;
        TimeSeries::new(
            (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn sinusoid_boundaries() {
        let x = sine_series(0.25, 100.0, 60.0);
        let cycles = detect_breath_cycles(&x, &BreathConfig::default()).unwrap();
        assert!((14..=15).contains(&cycles.len()), "{}", cycles.len());
        // Downward crossings of sin(2*pi*t/4) fall at t = 2 + 4k.
        for &t in cycles.onsets_s() {
            let k = ((t - 2.0) / 4.0).round();
            assert!((t - (2.0 + 4.0 * k)).abs() < 0.05, "{t}");
        }
        for gap in cycles.intervals_s() {
            assert!((gap - 4.0).abs() < 0.05);
        }
    }

    #[test]
    fn constant_signal_has_no_breaths() {
        let x = TimeSeries::new(vec![1.0; 3000], 100.0).unwrap();
        assert!(matches!(
            detect_breath_cycles(&x, &BreathConfig::default()),
            Err(Error::InsufficientBreaths { .. })
        ));
    }

    #[test]
    fn short_signal_rejected() {
        let x = sine_series(0.25, 100.0, 5.0);
        assert!(matches!(
            detect_breath_cycles(&x, &BreathConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ripple_is_filtered_out() {
        let clean = sine_series(0.25, 100.0, 60.0);
        let noisy: Vec<f64> = clean
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.3 * (2.0 * PI * 10.0 * i as f64 / 100.0).sin())
            .collect();
        let noisy = TimeSeries::new(noisy, 100.0).unwrap();
        let cfg = BreathConfig::default();
        let a = detect_breath_cycles(&clean, &cfg).unwrap();
        let b = detect_breath_cycles(&noisy, &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.onsets_s().iter().zip(b.onsets_s()) {
            assert!((x - y).abs() < 0.1);
        }
    }

    #[test]
    fn duplicate_onsets_rejected() {
        assert!(BreathCycles::new(vec![1.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_breathing_gives_constant_rate() {
        let onsets: Vec<f64> = (0..20).map(|k| 1.0 + 4.0 * k as f64).collect();
        let irr = build_irr(&BreathCycles::new(onsets).unwrap(), 80.0).unwrap();
        assert_eq!(irr.len(), 320);
        assert!(irr.samples().iter().all(|v| (v - 15.0).abs() < 1e-9));
    }

    #[test]
    fn interpolant_hits_knots() {
        let onsets = vec![0.0, 4.0, 7.5, 10.0, 14.0, 16.0];
        let spline = MonotoneCubic::new(
            onsets[1..].to_vec(),
            onsets.windows(2).map(|w| 60.0 / (w[1] - w[0])).collect(),
        )
        .unwrap();
        for w in onsets.windows(2) {
            let v = 60.0 / (w[1] - w[0]);
            assert!((spline.eval(w[1]) - v).abs() < 1e-9);
        }
        // Samples at exact knot times on the 4 Hz grid.
        let irr = build_irr(&BreathCycles::new(onsets).unwrap(), 20.0).unwrap();
        assert!((irr.samples()[30] - 60.0 / 3.5).abs() < 1e-9);
        assert!((irr.samples()[40] - 60.0 / 2.5).abs() < 1e-9);
    }

    #[test]
    fn interpolant_monotone_on_monotone_knots() {
        let spline =
            MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![10.0, 12.0, 20.0, 21.0]).unwrap();
        let mut prev = spline.eval(0.0);
        for i in 1..=3000 {
            let v = spline.eval(i as f64 * 0.001);
            assert!(v >= prev - 1e-12);
            assert!((10.0..=21.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn sqi_of_pure_tone_is_high() {
        let x = sine_series(0.3, 100.0, 180.0);
        let q = sqi(&x).unwrap();
        assert!(q >= 0.9, "{q}");
    }

    #[test]
    fn sqi_of_zero_is_zero() {
        let x = TimeSeries::new(vec![0.0; 18_000], 100.0).unwrap();
        assert_eq!(sqi(&x).unwrap(), 0.0);
    }

    #[test]
    fn sqi_series_starts_at_epoch_six() {
        let x = sine_series(0.3, 10.0, 300.0);
        let s = sqi_series(&x, 30.0).unwrap();
        assert_eq!(s.first().unwrap().0, 6);
        assert_eq!(s.len(), 5);
    }
}
