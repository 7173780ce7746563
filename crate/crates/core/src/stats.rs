//! Small descriptive-statistics helpers shared by the feature extractors.

/// Population moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    /// `m3 / m2^1.5`, zero when the variance vanishes.
    pub skew: f64,
    /// Non-excess `m4 / m2^2`, zero when the variance vanishes.
    pub kurt: f64,
}

impl Moments {
    pub fn of(v: &[f64]) -> Moments {
        if v.is_empty() {
            return Moments {
                mean: 0.0,
                std: 0.0,
                skew: 0.0,
                kurt: 0.0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in v {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        // Rounding leaves m2 tiny but non-zero for constant data.
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (skew, kurt) = if m2 <= 1e-24 * scale * scale {
            (0.0, 0.0)
        } else {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        };
        Moments {
            mean,
            std: m2.sqrt(),
            skew,
            kurt,
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = Moments::of(v);
    (m.mean, m.std)
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Sample entropy with template length `m` and tolerance `r` (Chebyshev
/// distance, self-matches excluded). When no template pairs match, returns
/// the largest attainable value `ln(number of template pairs)`.
pub fn sample_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let n = x.len();
    if n <= m + 1 {
        return 0.0;
    }
    let templates = n - m;
    let (mut b, mut a) = (0u64, 0u64);
    for i in 0..templates {
        for j in i + 1..templates {
            if (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= r) {
                b += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    let pairs = (templates * (templates - 1) / 2) as f64;
    if a == 0 || b == 0 {
        return pairs.ln();
    }
    -(a as f64 / b as f64).ln()
}
