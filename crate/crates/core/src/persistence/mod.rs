//! Persistence diagrams: sublevel-set persistence of sampled signals and
//! Vietoris–Rips persistence (dimensions 0 and 1) of delay embeddings.

mod rips;
mod sublevel;
mod takens;

use std::fmt::Write as _;

pub use rips::{cone_radius, diameter, rips_pd, rips_pd_with_cap, DEFAULT_RIPS_CAP};
pub use sublevel::{sublevel_pd0, sublevel_pd0_values};
pub use takens::{maxmin_indices, maxmin_subsample, takens_embed, PointCloud};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FiltrationKind {
    Sublevel,
    Rips,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
}

impl PersistencePair {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn lifespan(&self) -> f64 {
        self.death - self.birth
    }

    pub fn midlife(&self) -> f64 {
        (self.death + self.birth) / 2.0
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub kind: FiltrationKind,
    pub points: Vec<PersistencePair>,
    /// Set when a class was still alive at the truncation radius and was
    /// given that radius as its death.
    pub truncated: bool,
}

impl PersistenceDiagram {
    pub fn new(dim: usize, kind: FiltrationKind, points: Vec<PersistencePair>) -> Self {
        Self {
            dim,
            kind,
            points,
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(PersistencePair::is_finite)
    }

    pub fn lifespans(&self) -> Vec<f64> {
        self.points.iter().map(PersistencePair::lifespan).collect()
    }

    /// Points sorted by (birth, death) for order-insensitive comparison.
    pub fn sorted_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.birth, p.death)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts
    }
}

pub const DIAGRAM_HEADER: &str = "dim,birth,death";

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Plain-text export: header then one `dim,birth,death` row per point.
pub fn diagrams_to_csv(diagrams: &[PersistenceDiagram]) -> String {
    let mut out = String::from(DIAGRAM_HEADER);
    out.push('\n');
    for d in diagrams {
        for p in &d.points {
            let _ = writeln!(out, "{},{},{}", d.dim, format_value(p.birth), format_value(p.death));
        }
    }
    out
}

/// Parses the export format back into `(dim, birth, death)` rows.
pub fn parse_diagram_csv(text: &str, source: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DIAGRAM_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                msg: format!("expected header `{DIAGRAM_HEADER}`"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |msg: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let dim = fields[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| err(format!("bad dim: {e}")))?;
            let parse = |s: &str| -> Result<f64> {
                match s.trim() {
                    "inf" => Ok(f64::INFINITY),
                    t => t
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(format!("bad value `{t}`"))),
                }
            };
            Ok((dim, parse(fields[1])?, parse(fields[2])?))
        })
        .collect()
}
