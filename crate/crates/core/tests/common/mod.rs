//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Sublevel dimension-0 pairs of a sampled signal on the path graph by
/// sweeping every threshold and recomputing the components from scratch.
/// Zero-persistence pairs are omitted; the essential class has death `inf`.
pub fn sublevel_sweep(x: &[f64]) -> Vec<(f64, f64)> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut levels: Vec<f64> = x.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    // A component is remembered by its elder vertex: smallest (value, index).
    let mut prev: Vec<(usize, usize, usize)> = Vec::new(); // (start, end, elder)
    let mut pairs = Vec::new();
    for &t in &levels {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < x.len() {
            if x[i] <= t {
                let start = i;
                while i < x.len() && x[i] <= t {
                    i += 1;
                }
                runs.push((start, i - 1));
            } else {
                i += 1;
            }
        }
        let mut next = Vec::new();
        for &(s, e) in &runs {
            let mut inside: Vec<usize> = prev
                .iter()
                .filter(|&&(ps, pe, _)| ps >= s && pe <= e)
                .map(|&(_, _, elder)| elder)
                .collect();
            inside.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
            let elder = match inside.first() {
                Some(&v) => v,
                None => (s..=e)
                    .min_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)))
                    .expect("non-empty run"),
            };
            for &young in inside.iter().skip(1) {
                if x[young] < t {
                    pairs.push((x[young], t));
                }
            }
            next.push((s, e, elder));
        }
        prev = next;
    }
    assert_eq!(prev.len(), 1);
    pairs.push((x[prev[0].2], f64::INFINITY));
    sort_pairs(&mut pairs);
    pairs
}

pub fn sort_pairs(p: &mut [(f64, f64)]) {
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rips persistence in dimensions 0 and 1 by reducing the full boundary
/// matrix of the 2-skeleton (every triangle included).
pub fn rips_full_reduction(points: &[Vec<f64>]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let n = points.len();
    let d = |i: usize, j: usize| euclid(&points[i], &points[j]);
    // (value, dim, vertices)
    let mut simplices: Vec<(f64, usize, Vec<usize>)> = (0..n).map(|i| (0.0, 0, vec![i])).collect();
    for i in 0..n {
        for j in i + 1..n {
            simplices.push((d(i, j), 1, vec![i, j]));
            for k in j + 1..n {
                let v = d(i, j).max(d(i, k)).max(d(j, k));
                simplices.push((v, 2, vec![i, j, k]));
            }
        }
    }
    simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let position: std::collections::HashMap<Vec<usize>, usize> =
        simplices.iter().enumerate().map(|(i, s)| (s.2.clone(), i)).collect();

    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|(_, dim, v)| {
            if *dim == 0 {
                return Vec::new();
            }
            let mut col: Vec<usize> = (0..v.len())
                .map(|skip| {
                    let face: Vec<usize> =
                        v.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect();
                    position[&face]
                })
                .collect();
            col.sort_unstable();
            col
        })
        .collect();

    let mut low_owner: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut paired = vec![false; simplices.len()];
    let (mut h0, mut h1) = (Vec::new(), Vec::new());
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match low_owner.get(&low) {
                Some(&k) => {
                    let other = columns[k].clone();
                    let mut merged: Vec<usize> = Vec::new();
                    let (a, b) = (&columns[j], &other);
                    let (mut x, mut y) = (0, 0);
                    while x < a.len() || y < b.len() {
                        if y == b.len() || (x < a.len() && a[x] < b[y]) {
                            merged.push(a[x]);
                            x += 1;
                        } else if x == a.len() || b[y] < a[x] {
                            merged.push(b[y]);
                            y += 1;
                        } else {
                            x += 1;
                            y += 1;
                        }
                    }
                    columns[j] = merged;
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            low_owner.insert(low, j);
            paired[low] = true;
            paired[j] = true;
            let (birth, death) = (simplices[low].0, simplices[j].0);
            if death > birth {
                match simplices[low].1 {
                    0 => h0.push((birth, death)),
                    _ => h1.push((birth, death)),
                }
            }
        }
    }
    for (i, s) in simplices.iter().enumerate() {
        if !paired[i] && s.1 == 0 {
            h0.push((s.0, f64::INFINITY));
        }
        assert!(paired[i] || s.1 != 1, "full 2-skeleton leaves no essential 1-cycles");
    }
    sort_pairs(&mut h0);
    sort_pairs(&mut h1);
    (h0, h1)
}

/// Prim's algorithm on the complete graph; returns the sorted edge weights.
pub fn mst_weights(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut weights = Vec::new();
    for step in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("vertex left");
        in_tree[u] = true;
        if step > 0 {
            weights.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(euclid(&points[u], &points[v]));
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    weights
}

/// Orthonormal Hermite function from the physicists' polynomial
/// `H_{k+1} = 2x H_k - 2k H_{k-1}`, normalized by `sqrt(2^n n! sqrt(pi))`.
pub fn hermite_function_poly(n: usize, x: f64) -> f64 {
    let (mut h_prev, mut h) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * x * h - 2.0 * k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    let mut norm = PI.sqrt();
    for k in 1..=n {
        norm *= 2.0 * k as f64;
    }
    h * (-0.5 * x * x).exp() / norm.sqrt()
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Lifespan entropy curve written directly from its definition.
pub fn entropy_curve_direct(points: &[(f64, f64)], x: f64) -> f64 {
    let total: f64 = points.iter().map(|(b, d)| d - b).sum();
    points
        .iter()
        .filter(|(b, d)| *b <= x && x < *d)
        .map(|(b, d)| {
            let q = (d - b) / total;
            -q * q.ln()
        })
        .sum()
}

/// `∫ le(x) h_n(x) dx` piece by piece between the curve's breakpoints.
pub fn hepc_quadrature(points: &[(f64, f64)], n: usize) -> f64 {
    let mut cuts: Vec<f64> = points.iter().flat_map(|&(b, d)| [b, d]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let level = entropy_curve_direct(points, 0.5 * (a + b));
        if level == 0.0 {
            continue;
        }
        total += level * adaptive_simpson(&|x| hermite_function_poly(n, x), a, b, 1e-13);
    }
    total
}

/// Standard normal CDF by Simpson quadrature of the density from 0.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    0.5 + adaptive_simpson(&pdf, 0.0, x, 1e-14)
}

/// One-sided Wilcoxon p-value, `P(W+ >= observed)`, by enumerating all sign
/// patterns of the non-zero differences.
pub fn wilcoxon_enumerate(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    // Midranks by counting: rank = #smaller + (#equal + 1) / 2.
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&v| {
            let less = abs.iter().filter(|&&u| u < v).count() as f64;
            let equal = abs.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let mut count = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            count += 1;
        }
    }
    count as f64 / (1u64 << n) as f64
}

/// Splitmix64, a small generator for reproducible test data independent of
/// the library's RNG stack.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal by Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}
