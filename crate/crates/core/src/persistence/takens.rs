use crate::error::{Error, Result};

/// Points of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not divide into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("all points must share one dimension"));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Euclidean distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.squared_distance(i, j).sqrt()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let coords = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self {
            dim: self.dim,
            coords,
        }
    }
}

/// Delay embedding `x_n = [f_n, f_{n+tau}, ..., f_{n+(d-1)tau}]`.
pub fn takens_embed(x: &[f64], dim: usize, tau: usize) -> Result<PointCloud> {
    if dim == 0 || tau == 0 {
        return Err(Error::invalid("embedding dimension and delay must be positive"));
    }
    let span = (dim - 1) * tau;
    if x.len() <= span {
        return Err(Error::invalid(format!(
            "series of length {} too short for dimension {dim} and delay {tau}",
            x.len()
        )));
    }
    let count = x.len() - span;
    let mut coords = Vec::with_capacity(count * dim);
    for n in 0..count {
        coords.extend((0..dim).map(|k| x[n + k * tau]));
    }
    PointCloud::new(dim, coords)
}

/// Greedy farthest-point ordering of up to `k` points starting at `seed`.
/// Ties go to the lowest index.
pub fn maxmin_indices(pc: &PointCloud, k: usize, seed: usize) -> Result<Vec<usize>> {
    let n = pc.len();
    if k == 0 {
        return Err(Error::invalid("maxmin subsample size must be at least 1"));
    }
    if seed >= n {
        return Err(Error::invalid(format!("seed index {seed} outside cloud of {n} points")));
    }
    let target = k.min(n);
    let mut chosen = Vec::with_capacity(target);
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut next = seed;
    loop {
        chosen.push(next);
        taken[next] = true;
        if chosen.len() == target {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = pc.squared_distance(i, next);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if best.is_none_or(|(_, bd)| nearest[i] > bd) {
                best = Some((i, nearest[i]));
            }
        }
        next = best.expect("untaken point remains").0;
    }
    Ok(chosen)
}

pub fn maxmin_subsample(pc: &PointCloud, k: usize, seed: usize) -> Result<PointCloud> {
    Ok(pc.select(&maxmin_indices(pc, k, seed)?))
}
