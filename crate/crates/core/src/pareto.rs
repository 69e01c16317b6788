//! Pareto dominance and front machinery in the all-minimize frame.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in objective space; every coordinate is minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub values: Vec<f64>,
}

impl ObjectivePoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("objective space needs at least two dimensions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("objective values must be finite"));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl From<&[f64]> for ObjectivePoint {
    fn from(v: &[f64]) -> Self {
        Self { values: v.to_vec() }
    }
}

/// `a` dominates `b` when it is no worse in every objective and strictly
/// better in at least one.
pub fn dominates(a: &ObjectivePoint, b: &ObjectivePoint) -> Result<bool> {
    Error::check_len("objective dimension", a.dim(), b.dim())?;
    Ok(dominates_unchecked(&a.values, &b.values))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

fn check_points(points: &[ObjectivePoint]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::domain("empty point set"))?;
    for p in points {
        Error::check_len("objective dimension", first.dim(), p.dim())?;
    }
    Ok(first.dim())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices of the non-dominated points, ascending.
///
/// Points are visited in lexicographic order. A dominator always precedes
/// the point it dominates, and by transitivity some non-dominated point
/// dominates every dominated one, so each point only needs checking
/// against the front accepted so far. Duplicates of a front point are kept.
pub fn pareto_front(points: &[ObjectivePoint]) -> Result<Vec<usize>> {
    check_points(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i].values, &points[j].values).then(i.cmp(&j)));
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front
            .iter()
            .any(|&f| dominates_unchecked(&points[f].values, &points[i].values))
        {
            front.push(i);
        }
    }
    front.sort_unstable();
    Ok(front)
}

/// Points annotated with non-domination rank and crowding distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPopulation {
    pub points: Vec<ObjectivePoint>,
    /// 0 for the Pareto front, 1 for the front after removing it, and so on.
    pub rank: Vec<usize>,
    /// Crowding distance within the point's own front; boundary points are
    /// infinite.
    pub crowding: Vec<f64>,
    /// Members of each front, ascending index order.
    pub fronts: Vec<Vec<usize>>,
}

impl RankedPopulation {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total preference order: lower rank, then larger crowding, then lower index.
    pub fn prefer(&self, a: usize, b: usize) -> Ordering {
        self.rank[a]
            .cmp(&self.rank[b])
            .then_with(|| self.crowding[b].total_cmp(&self.crowding[a]))
            .then(a.cmp(&b))
    }
}

/// Fast non-dominated sort followed by per-front crowding distances.
pub fn non_dominated_sort(points: &[ObjectivePoint]) -> Result<RankedPopulation> {
    check_points(points)?;
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&points[i].values, &points[j].values);
            if dominates_unchecked(a, b) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }

    let mut rank = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = fronts.len();
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }

    let mut crowding = vec![0.0; n];
    for front in &fronts {
        for (&i, d) in front.iter().zip(crowding_distance(points, front)) {
            crowding[i] = d;
        }
    }
    Ok(RankedPopulation {
        points: points.to_vec(),
        rank,
        crowding,
        fronts,
    })
}

/// Crowding distance of each member of `front` (same order as `front`).
pub fn crowding_distance(points: &[ObjectivePoint], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let dim = points[front[0]].dim();
    for k in 0..dim {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            points[front[a]].values[k]
                .total_cmp(&points[front[b]].values[k])
                .then(front[a].cmp(&front[b]))
        });
        let lo = points[front[order[0]]].values[k];
        let hi = points[front[order[m - 1]]].values[k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let next = points[front[order[w + 1]]].values[k];
            let prev = points[front[order[w - 1]]].values[k];
            dist[order[w]] += (next - prev) / range;
        }
    }
    dist
}

/// Measure of the region dominated by `front` and bounded by `reference`.
/// Supports two and three objectives; every point must dominate the
/// reference.
pub fn hypervolume(front: &[ObjectivePoint], reference: &ObjectivePoint) -> Result<f64> {
    for p in front {
        if !dominates(p, reference)? {
            return Err(Error::domain("front point does not dominate the reference point"));
        }
    }
    let pts: Vec<&[f64]> = front.iter().map(|p| p.values.as_slice()).collect();
    match reference.dim() {
        2 => Ok(hv2(pts, [reference.values[0], reference.values[1]])),
        3 => Ok(hv3(pts, &reference.values)),
        d => Err(Error::domain(format!("hypervolume supports 2 or 3 objectives, got {d}"))),
    }
}

fn hv2(mut pts: Vec<&[f64]>, reference: [f64; 2]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut floor = reference[1];
    for p in pts {
        if p[1] < floor {
            area += (reference[0] - p[0]) * (floor - p[1]);
            floor = p[1];
        }
    }
    area
}

fn hv3(mut pts: Vec<&[f64]>, reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    for k in 0..pts.len() {
        let z = pts[k][2];
        let next = pts.get(k + 1).map_or(reference[2], |p| p[2]);
        if next > z {
            volume += hv2(pts[..=k].to_vec(), [reference[0], reference[1]]) * (next - z);
        }
    }
    volume
}

/// Knee of a front: after per-objective min-max normalization, the member
/// farthest from the line through the two members farthest apart. `None`
/// when every member lies on that line (up to rounding), which includes
/// fronts of two or fewer distinct points. Ties go to the lower index.
pub fn knee_point(front: &[ObjectivePoint]) -> Result<Option<usize>> {
    let dim = check_points(front)?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in front {
        for k in 0..dim {
            lo[k] = lo[k].min(p.values[k]);
            hi[k] = hi[k].max(p.values[k]);
        }
    }
    let norm: Vec<Vec<f64>> = front
        .iter()
        .map(|p| {
            (0..dim)
                .map(|k| {
                    let r = hi[k] - lo[k];
                    if r > 0.0 {
                        (p.values[k] - lo[k]) / r
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();

    let (mut ia, mut ib, mut far) = (0, 0, 0.0);
    for i in 0..norm.len() {
        for j in i + 1..norm.len() {
            let d = dist2(&norm[i], &norm[j]);
            if d > far {
                (ia, ib, far) = (i, j, d);
            }
        }
    }
    if far == 0.0 {
        return Ok(None);
    }
    let len = far.sqrt();
    let u: Vec<f64> = norm[ib].iter().zip(&norm[ia]).map(|(b, a)| (b - a) / len).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in norm.iter().enumerate() {
        let rel: Vec<f64> = p.iter().zip(&norm[ia]).map(|(x, a)| x - a).collect();
        let along: f64 = rel.iter().zip(&u).map(|(r, u)| r * u).sum();
        let perp = rel
            .iter()
            .zip(&u)
            .map(|(r, u)| (r - along * u).powi(2))
            .sum::<f64>();
        if best.is_none_or(|(_, d)| perp > d) {
            best = Some((i, perp));
        }
    }
    Ok(best.filter(|&(_, d)| d > 1e-24).map(|(i, _)| i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> ObjectivePoint {
        ObjectivePoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&p(&[1.0, 1.0, 1.0]), &p(&[2.0, 2.0, 2.0])).unwrap());
        let a = p(&[1.0, 2.0, 3.0]);
        assert!(!dominates(&a, &a).unwrap());
        assert!(!dominates(&p(&[1.0, 3.0]), &p(&[2.0, 2.0])).unwrap());
        assert!(!dominates(&p(&[2.0, 2.0]), &p(&[1.0, 3.0])).unwrap());
        assert!(dominates(&p(&[1.0, 2.0]), &p(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn objective_point_validation() {
        assert!(ObjectivePoint::new(vec![1.0]).is_err());
        assert!(ObjectivePoint::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn front_examples() {
        assert_eq!(pareto_front(&[p(&[3.0, 4.0])]).unwrap(), vec![0]);
        let line: Vec<_> = (0..=10).map(|i| p(&[i as f64 / 10.0, 1.0 - i as f64 / 10.0])).collect();
        assert_eq!(pareto_front(&line).unwrap(), (0..=10).collect::<Vec<_>>());
        assert!(pareto_front(&[]).is_err());
        let dup = [p(&[1.0, 1.0]), p(&[2.0, 2.0]), p(&[1.0, 1.0])];
        assert_eq!(pareto_front(&dup).unwrap(), vec![0, 2]);
    }

    #[test]
    fn chain_ranks() {
        let chain: Vec<_> = (0..5).rev().map(|i| p(&[i as f64, i as f64])).collect();
        let r = non_dominated_sort(&chain).unwrap();
        assert_eq!(r.rank, vec![4, 3, 2, 1, 0]);
        let same = vec![p(&[1.0, 1.0]); 4];
        let r = non_dominated_sort(&same).unwrap();
        assert_eq!(r.rank, vec![0; 4]);
    }

    #[test]
    fn crowding_boundaries_are_infinite() {
        let pts: Vec<_> = [[0.0, 4.0], [1.0, 2.0], [2.0, 1.0], [4.0, 0.0]]
            .iter()
            .map(|v| p(v))
            .collect();
        let d = crowding_distance(&pts, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        // (2-0)/4 + (4-1)/4 and (4-1)/4 + (2-0)/4
        assert!((d[1] - 1.25).abs() < 1e-12);
        assert!((d[2] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn knee_of_an_elbow() {
        let pts: Vec<_> = [[0.0, 10.0], [1.0, 1.0], [10.0, 0.0], [5.0, 0.5]]
            .iter()
            .map(|v| p(v))
            .collect();
        assert_eq!(knee_point(&pts).unwrap(), Some(1));
        assert_eq!(knee_point(&pts[..2]).unwrap(), None);
        let line: Vec<_> = (0..4).map(|i| p(&[i as f64, 3.0 - i as f64])).collect();
        assert_eq!(knee_point(&line).unwrap(), None);
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[p(&[0.0, 0.0])], &p(&[1.0, 1.0])).unwrap(), 1.0);
        let front = vec![p(&[0.0, 2.0]), p(&[2.0, 0.0]), p(&[1.0, 1.0])];
        let hv = hypervolume(&front, &p(&[3.0, 3.0])).unwrap();
        let mut with_dominated = front.clone();
        with_dominated.push(p(&[2.0, 2.5]));
        assert_eq!(hypervolume(&with_dominated, &p(&[3.0, 3.0])).unwrap(), hv);
        assert!(hypervolume(&[p(&[4.0, 0.0])], &p(&[3.0, 3.0])).is_err());
        assert_eq!(hypervolume(&[p(&[0.0, 0.0, 0.0])], &p(&[1.0, 2.0, 3.0])).unwrap(), 6.0);
    }
}
