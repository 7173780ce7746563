//! Fixed-length summaries of persistence diagrams: persistence statistics
//! (11 values), the lifespan entropy curve and its Hermite-function
//! expansion (15 coefficients).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PersistencePair};
use crate::stats::Moments;

pub const PS_LEN: usize = 11;
pub const HEPC_LEN: usize = 15;

pub const PS_NAMES: [&str; PS_LEN] = [
    "mean_mid", "std_mid", "skew_mid", "kurt_mid", "entropy_mid", "mean_life", "std_life",
    "skew_life", "kurt_life", "entropy_life", "gauss_norm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizeConfig {
    /// Evaluate the midlife entropy exactly as printed, with the lifespan
    /// inside the logarithm, instead of the symmetric entropy form.
    pub epy_m_literal: bool,
    /// Bandwidth of the Gaussian persistence curve.
    pub sigma: f64,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        Self {
            epy_m_literal: false,
            sigma: 1.0,
        }
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Replaces infinite deaths by `cap` and drops points left with zero
/// persistence.
pub fn finitize(pd: &PersistenceDiagram, cap: f64) -> Result<PersistenceDiagram> {
    if !cap.is_finite() {
        return Err(Error::invalid("finitize cap must be finite"));
    }
    if let Some(p) = pd.points.iter().find(|p| p.birth > cap) {
        return Err(Error::invalid(format!("cap {cap} below birth {}", p.birth)));
    }
    let points = pd
        .points
        .iter()
        .map(|p| PersistencePair::new(p.birth, if p.death.is_finite() { p.death } else { cap }))
        .filter(|p| p.death > p.birth)
        .collect();
    Ok(PersistenceDiagram {
        points,
        ..pd.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsVector {
    pub values: [f64; PS_LEN],
    /// Set for empty diagrams, which summarize to all zeros.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HepcVector {
    pub values: [f64; HEPC_LEN],
    pub degenerate: bool,
}

/// `-sum p log p` over positive weights normalized to sum one.
fn shannon(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

fn midlife_entropy(pd: &PersistenceDiagram, literal: bool) -> f64 {
    // Midlife sums may be signed (airflow sublevel diagrams), so weights use
    // |d + b|; this coincides with the plain formula when all midlives are
    // non-negative.
    let weights: Vec<f64> = pd.points.iter().map(|p| (p.death + p.birth).abs()).collect();
    if !literal {
        return shannon(&weights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    pd.points
        .iter()
        .zip(&weights)
        .map(|(p, &w)| -(w / total) * (p.lifespan() / total).ln())
        .sum()
}

/// 1-norm of the Gaussian persistence curve.
pub fn gaussian_curve_norm(pd: &PersistenceDiagram, sigma: f64) -> f64 {
    let s = SQRT_2 * sigma;
    pd.points
        .iter()
        .map(|p| {
            let l = p.lifespan();
            l * normal_cdf(l / s) + s * normal_pdf(l / s)
        })
        .sum()
}

fn require_finite(pd: &PersistenceDiagram) -> Result<()> {
    if pd.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("diagram has infinite deaths; finitize it first"))
    }
}

/// Moments and entropies of the midlife and lifespan multisets, plus the
/// Gaussian persistence-curve norm.
pub fn persistence_stats(pd: &PersistenceDiagram, cfg: &VectorizeConfig) -> Result<PsVector> {
    require_finite(pd)?;
    if pd.is_empty() {
        return Ok(PsVector {
            values: [0.0; PS_LEN],
            degenerate: true,
        });
    }
    let mids: Vec<f64> = pd.points.iter().map(PersistencePair::midlife).collect();
    let lifes = pd.lifespans();
    let m = Moments::of(&mids);
    let l = Moments::of(&lifes);
    let values = [
        m.mean,
        m.std,
        m.skew,
        m.kurt,
        midlife_entropy(pd, cfg.epy_m_literal),
        l.mean,
        l.std,
        l.skew,
        l.kurt,
        shannon(&lifes),
        gaussian_curve_norm(pd, cfg.sigma),
    ];
    Ok(PsVector {
        values,
        degenerate: false,
    })
}

/// Lifespan entropy weights `-(l/L) log(l/L)` per point; `None` when `L = 0`.
fn entropy_weights(pd: &PersistenceDiagram) -> Option<Vec<f64>> {
    let total: f64 = pd.points.iter().map(PersistencePair::lifespan).sum();
    if !(total > 0.0) {
        return None;
    }
    Some(
        pd.points
            .iter()
            .map(|p| {
                let q = p.lifespan() / total;
                if q > 0.0 {
                    -q * q.ln()
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Lifespan entropy curve evaluated at `x`.
pub fn entropy_curve(pd: &PersistenceDiagram, x: f64) -> Result<f64> {
    require_finite(pd)?;
    let Some(w) = entropy_weights(pd) else {
        return Ok(0.0);
    };
    Ok(pd
        .points
        .iter()
        .zip(&w)
        .filter(|(p, _)| p.birth <= x && x < p.death)
        .map(|(_, w)| w)
        .sum())
}

/// Orthonormal Hermite functions `h_0(x) ..= h_{count-1}(x)`.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(count);
    if count == 0 {
        return h;
    }
    h.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if count > 1 {
        h.push(SQRT_2 * x * h[0]);
    }
    for n in 1..count.saturating_sub(1) {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Coefficients `alpha_0..alpha_14` of the lifespan entropy curve in the
/// Hermite-function basis, by closed-form recursion.
pub fn hepc(pd: &PersistenceDiagram) -> Result<HepcVector> {
    require_finite(pd)?;
    let Some(psi) = entropy_weights(pd) else {
        return Ok(HepcVector {
            values: [0.0; HEPC_LEN],
            degenerate: true,
        });
    };
    let hb: Vec<Vec<f64>> = pd.points.iter().map(|p| hermite_functions(p.birth, HEPC_LEN)).collect();
    let hd: Vec<Vec<f64>> = pd.points.iter().map(|p| hermite_functions(p.death, HEPC_LEN)).collect();

    let quarter = PI.powf(0.25);
    let mut alpha = [0.0; HEPC_LEN];
    for (k, p) in pd.points.iter().enumerate() {
        alpha[0] += SQRT_2 * quarter * psi[k] * (normal_cdf(p.death) - normal_cdf(p.birth));
        alpha[1] += 2.0 * quarter * psi[k] * (normal_pdf(p.birth) - normal_pdf(p.death));
    }
    for n in 1..HEPC_LEN - 1 {
        let nf = n as f64;
        let boundary: f64 = (0..psi.len()).map(|k| psi[k] * (hb[k][n] - hd[k][n])).sum();
        alpha[n + 1] = SQRT_2 / (nf + 1.0).sqrt() * boundary
            + nf / (nf * (nf + 1.0)).sqrt() * alpha[n - 1];
    }
    Ok(HepcVector {
        values: alpha,
        degenerate: false,
    })
}
