use super::{FiltrationKind, PersistenceDiagram, PersistencePair};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;
use crate::union_find::UnionFind;

/// 0-dimensional sublevel-set persistence of the piecewise-linear
/// interpolation of `x`.
pub fn sublevel_pd0(x: &TimeSeries) -> Result<PersistenceDiagram> {
    sublevel_pd0_values(x.samples())
}

/// Lower-star filtration of the path graph. Vertices enter in
/// `(value, index)` order; at a merge the component whose minimum entered
/// first survives.
pub fn sublevel_pd0_values(x: &[f64]) -> Result<PersistenceDiagram> {
    if x.is_empty() {
        return Err(Error::invalid("sublevel persistence of an empty signal"));
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut uf = UnionFind::new(n);
    // Birth vertex of the component rooted at each root.
    let mut birth = (0..n).collect::<Vec<_>>();
    let mut active = vec![false; n];
    let mut points = Vec::new();
    for &v in &order {
        active[v] = true;
        let neighbours = [v.checked_sub(1), (v + 1 < n).then_some(v + 1)];
        for u in neighbours.into_iter().flatten().filter(|&u| active[u]) {
            let (ru, rv) = (uf.find(u), uf.find(v));
            if ru == rv {
                continue;
            }
            let (bu, bv) = (birth[ru], birth[rv]);
            let (elder, younger) = if rank[bu] < rank[bv] { (bu, bv) } else { (bv, bu) };
            if x[v] > x[younger] {
                points.push(PersistencePair::new(x[younger], x[v]));
            }
            let root = uf.union(ru, rv).expect("distinct roots");
            birth[root] = elder;
        }
    }
    points.push(PersistencePair::new(x[order[0]], f64::INFINITY));
    Ok(PersistenceDiagram::new(0, FiltrationKind::Sublevel, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_example() {
        let d = sublevel_pd0_values(&[0.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(d.sorted_points(), vec![(0.0, f64::INFINITY), (1.0, 2.0)]);
    }

    #[test]
    fn monotone_has_single_class() {
        let d = sublevel_pd0_values(&[3.0, 2.0, 1.0, -4.0]).unwrap();
        assert_eq!(d.sorted_points(), vec![(-4.0, f64::INFINITY)]);
        let d = sublevel_pd0_values(&[1.0, 2.0, 5.0]).unwrap();
        assert_eq!(d.sorted_points(), vec![(1.0, f64::INFINITY)]);
    }

    #[test]
    fn ties_keep_earlier_minimum() {
        let d = sublevel_pd0_values(&[1.0, 3.0, 1.0]).unwrap();
        assert_eq!(d.sorted_points(), vec![(1.0, 3.0), (1.0, f64::INFINITY)]);
        let d = sublevel_pd0_values(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(d.sorted_points(), vec![(2.0, f64::INFINITY)]);
    }

    #[test]
    fn empty_rejected() {
        assert!(sublevel_pd0_values(&[]).is_err());
    }
}
