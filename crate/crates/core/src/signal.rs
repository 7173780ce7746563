//! One-dimensional signal primitives used by the preprocessing chain:
//! linear detrending, zero-phase Butterworth filtering (second-order
//! sections designed by bilinear transform) and DFT power spectra.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    rate_hz: f64,
    start_time_s: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Result<Self> {
        Self::with_start(samples, rate_hz, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, rate_hz: f64, start_time_s: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("sampling rate must be positive, got {rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("time series must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        if !start_time_s.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        Ok(Self {
            samples,
            rate_hz,
            start_time_s,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    /// Same timing, new sample values. The caller guarantees the length matches.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            rate_hz: self.rate_hz,
            start_time_s: self.start_time_s,
        }
    }

    /// Samples `[start, start + len)` as a new series with shifted start time.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.samples.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {}) outside series of length {}",
                start + len,
                self.samples.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..start + len].to_vec(),
            rate_hz: self.rate_hz,
            start_time_s: self.start_time_s + start as f64 / self.rate_hz,
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_start(
            self.samples.iter().map(|v| v * factor).collect(),
            self.rate_hz,
            self.start_time_s,
        )
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One-sided DFT power, bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub power: Vec<f64>,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Bins whose centre frequency lies in `[low_hz, high_hz]`.
    pub fn bins_in(&self, low_hz: f64, high_hz: f64) -> std::ops::RangeInclusive<usize> {
        let lo = (low_hz / self.bin_hz).ceil().max(0.0) as usize;
        let hi = ((high_hz / self.bin_hz).floor() as usize).min(self.power.len() - 1);
        lo..=hi
    }
}

/// Removes the least-squares affine fit.
pub fn linear_detrend(x: &TimeSeries) -> Result<TimeSeries> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("linear detrend needs at least two samples"));
    }
    let t_mean = (n - 1) as f64 / 2.0;
    let x_mean = x.samples.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in x.samples.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let out = x
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect();
    Ok(x.with_samples(out))
}

/// A cascade of second-order sections in transposed direct form II.
/// Each section is `[b0, b1, b2, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<[f64; 5]>,
    order: usize,
}

impl SosFilter {
    pub fn sections(&self) -> &[[f64; 5]] {
        &self.sections
    }

    /// Digital filter order (number of poles).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Complex frequency response at `freq_hz` for sampling rate `rate_hz`.
    pub fn response(&self, freq_hz: f64, rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / rate_hz;
        let q = Complex64::from_polar(1.0, -w);
        self.response_at(q)
    }

    fn response_at(&self, q: Complex64) -> Complex64 {
        let q2 = q * q;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s[0] + q * s[1] + q2 * s[2];
            let den = 1.0 + q * s[3] + q2 * s[4];
            acc * num / den
        })
    }

    /// Steady-state section states for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [b0, b1, b2, a1, a2] = *s;
                let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let z2 = b2 - a2 * gain;
                let z1 = b1 - a1 * gain + z2;
                let state = [z1 * scale, z2 * scale];
                scale *= gain;
                state
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], initial: Option<f64>) {
        let zi = initial.map(|x0| {
            self.step_state()
                .into_iter()
                .map(|[a, b]| [a * x0, b * x0])
                .collect::<Vec<_>>()
        });
        for (k, s) in self.sections.iter().enumerate() {
            let [b0, b1, b2, a1, a2] = *s;
            let [mut z1, mut z2] = zi.as_ref().map_or([0.0, 0.0], |z| z[k]);
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z1;
                z1 = b1 * input - a1 * y + z2;
                z2 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Causal single-pass filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.run(&mut out, None);
        out
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding of
    /// `3 * order` samples and step-steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * self.order).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let x0 = ext[0];
        self.run(&mut ext, Some(x0));
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, Some(y0));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn butter_prototype(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn prewarp(freq_hz: f64, rate_hz: f64) -> f64 {
    2.0 * rate_hz * (PI * freq_hz / rate_hz).tan()
}

fn bilinear(s: Complex64, rate_hz: f64) -> Complex64 {
    let fs2 = 2.0 * rate_hz;
    (fs2 + s) / (fs2 - s)
}

/// Groups digital poles and (real) zeros into second-order sections and
/// normalizes unit gain at `ref_q` (a point `e^{-jw}` on the unit circle).
fn assemble_sos(poles: Vec<Complex64>, mut zeros: Vec<f64>, ref_q: Complex64) -> SosFilter {
    const IMAG_TOL: f64 = 1e-10;
    let order = poles.len();
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > IMAG_TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= IMAG_TOL)
        .map(|p| p.re)
        .collect();
    // Poles closest to the unit circle go last for numerical robustness.
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut sections = Vec::new();
    let take_zeros = |count: usize, zeros: &mut Vec<f64>| -> [f64; 3] {
        match count {
            2 => {
                let z1 = zeros.pop().unwrap_or(0.0);
                let z2 = zeros.pop().unwrap_or(0.0);
                [1.0, -(z1 + z2), z1 * z2]
            }
            _ => {
                let z1 = zeros.pop().unwrap_or(0.0);
                [1.0, -z1, 0.0]
            }
        }
    };
    for chunk in real.chunks(2) {
        if chunk.len() == 2 {
            let b = take_zeros(2, &mut zeros);
            let (p1, p2) = (chunk[0], chunk[1]);
            sections.push([b[0], b[1], b[2], -(p1 + p2), p1 * p2]);
        } else {
            let b = take_zeros(1, &mut zeros);
            sections.push([b[0], b[1], b[2], -chunk[0], 0.0]);
        }
    }
    for p in complex {
        let b = take_zeros(2, &mut zeros);
        sections.push([b[0], b[1], b[2], -2.0 * p.re, p.norm_sqr()]);
    }

    let mut filter = SosFilter { sections, order };
    let gain = 1.0 / filter.response_at(ref_q).norm();
    for k in 0..3 {
        filter.sections[0][k] *= gain;
    }
    filter
}

/// Digital Butterworth low-pass design.
pub fn design_butter_lowpass(cutoff_hz: f64, order: usize, rate_hz: f64) -> Result<SosFilter> {
    let nyquist = rate_hz / 2.0;
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "low-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    let wc = prewarp(cutoff_hz, rate_hz);
    let poles = butter_prototype(order)
        .into_iter()
        .map(|p| bilinear(p * wc, rate_hz))
        .collect();
    let zeros = vec![-1.0; order];
    Ok(assemble_sos(poles, zeros, Complex64::new(1.0, 0.0)))
}

/// Digital Butterworth band-pass design; digital order is `2 * order`.
pub fn design_butter_bandpass(
    low_hz: f64,
    high_hz: f64,
    order: usize,
    rate_hz: f64,
) -> Result<SosFilter> {
    let nyquist = rate_hz / 2.0;
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::invalid(format!(
            "band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {nyquist} Hz"
        )));
    }
    let w1 = prewarp(low_hz, rate_hz);
    let w2 = prewarp(high_hz, rate_hz);
    let bw = w2 - w1;
    let w0_sq = w1 * w2;
    let mut poles = Vec::with_capacity(2 * order);
    for p in butter_prototype(order) {
        let half = p * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        poles.push(bilinear(half + root, rate_hz));
        poles.push(bilinear(half - root, rate_hz));
    }
    let zeros = (0..2 * order)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let centre = 2.0 * (w0_sq.sqrt() / (2.0 * rate_hz)).atan();
    Ok(assemble_sos(poles, zeros, Complex64::from_polar(1.0, -centre)))
}

/// Zero-phase Butterworth low-pass.
pub fn butter_lowpass(x: &TimeSeries, cutoff_hz: f64, order: usize) -> Result<TimeSeries> {
    let filter = design_butter_lowpass(cutoff_hz, order, x.rate_hz)?;
    Ok(x.with_samples(filter.filtfilt(&x.samples)))
}

/// Zero-phase Butterworth band-pass.
pub fn butter_bandpass(
    x: &TimeSeries,
    low_hz: f64,
    high_hz: f64,
    order: usize,
) -> Result<TimeSeries> {
    let filter = design_butter_bandpass(low_hz, high_hz, order, x.rate_hz)?;
    Ok(x.with_samples(filter.filtfilt(&x.samples)))
}

/// `|DFT(x)[l]|^2` for `l = 0..=N/2`, rectangular window.
pub fn power_spectrum(x: &TimeSeries) -> Result<Spectrum> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("power spectrum needs at least two samples"));
    }
    let mut buf: Vec<Complex64> = x.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power = buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    Ok(Spectrum {
        power,
        bin_hz: x.rate_hz / n as f64,
    })
}
