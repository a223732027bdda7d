//! Signed distance functions to polygonal decision boundaries.
//!
//! A boundary is a set of closed loops. Region membership comes from the
//! nesting depth of a point (how many loops contain it, by even-odd ray
//! crossing); a [`RegionLabeler`] maps depths to classes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{LabeledDataset, Labels};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Model;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p: Point,
    pub q: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        libm::hypot(self.q[0] - self.p[0], self.q[1] - self.p[1])
    }

    /// Closest point of the segment to `x`.
    pub fn closest_point(&self, x: Point) -> Point {
        let d = [self.q[0] - self.p[0], self.q[1] - self.p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = (((x[0] - self.p[0]) * d[0] + (x[1] - self.p[1]) * d[1]) / len2).clamp(0.0, 1.0);
        [self.p[0] + t * d[0], self.p[1] + t * d[1]]
    }

    /// Distance to `x` and the closest point. Interior projections use the
    /// cross product so points lying on the segment get exactly zero.
    pub fn nearest(&self, x: Point) -> (f64, Point) {
        let d = [self.q[0] - self.p[0], self.q[1] - self.p[1]];
        let r = [x[0] - self.p[0], x[1] - self.p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = (r[0] * d[0] + r[1] * d[1]) / len2;
        if t <= 0.0 {
            (libm::hypot(r[0], r[1]), self.p)
        } else if t >= 1.0 {
            (libm::hypot(x[0] - self.q[0], x[1] - self.q[1]), self.q)
        } else {
            let cross = d[0] * r[1] - d[1] * r[0];
            (libm::fabs(cross) / libm::sqrt(len2), [self.p[0] + t * d[0], self.p[1] + t * d[1]])
        }
    }

    pub fn distance(&self, x: Point) -> f64 {
        self.nearest(x).0
    }
}

/// Closed polygonal loops, stored as segments tagged with their loop index.
#[derive(Debug, Clone, PartialEq)]
pub struct PolylineBoundary {
    segments: Vec<Segment>,
    loop_of: Vec<usize>,
    loops: Vec<Vec<Point>>,
}

impl PolylineBoundary {
    /// Builds a boundary from vertex loops. A loop may repeat its first vertex
    /// at the end; it is closed either way.
    pub fn from_loops(loops: Vec<Vec<Point>>) -> Result<Self> {
        if loops.is_empty() {
            return Err(Error::InvalidArgument("boundary needs at least one loop".into()));
        }
        let mut segments = Vec::new();
        let mut loop_of = Vec::new();
        let mut clean = Vec::with_capacity(loops.len());
        for (li, mut lp) in loops.into_iter().enumerate() {
            if lp.len() > 1 && lp.first() == lp.last() {
                lp.pop();
            }
            if lp.len() < 3 {
                return Err(Error::InvalidArgument(format!("loop {li} has fewer than 3 vertices")));
            }
            if lp.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("loop {li} has a non-finite vertex")));
            }
            for i in 0..lp.len() {
                let s = Segment {
                    p: lp[i],
                    q: lp[(i + 1) % lp.len()],
                };
                if s.length() == 0.0 {
                    return Err(Error::InvalidArgument(format!("loop {li} has a zero-length segment at vertex {i}")));
                }
                segments.push(s);
                loop_of.push(li);
            }
            clean.push(lp);
        }
        Ok(Self {
            segments,
            loop_of,
            loops: clean,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Loop index of every segment.
    pub fn loop_indices(&self) -> &[usize] {
        &self.loop_of
    }

    /// Vertex lists, without the repeated closing vertex.
    pub fn loops(&self) -> &[Vec<Point>] {
        &self.loops
    }

    pub fn perimeter(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Distance to the nearest segment and the nearest boundary point.
    pub fn nearest(&self, x: Point) -> (f64, Point) {
        self.nearest_where(x, |_| true).expect("boundary has segments")
    }

    fn nearest_where(&self, x: Point, keep: impl Fn(usize) -> bool) -> Option<(f64, Point)> {
        let mut best: Option<(f64, Point)> = None;
        for (s, &li) in self.segments.iter().zip(&self.loop_of) {
            if !keep(li) {
                continue;
            }
            let (d, c) = s.nearest(x);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        best
    }

    pub fn distance(&self, x: Point) -> f64 {
        self.nearest(x).0
    }

    /// Even-odd ray-crossing test against one loop.
    pub fn loop_contains(&self, li: usize, x: Point) -> bool {
        let lp = &self.loops[li];
        let mut inside = false;
        let mut j = lp.len() - 1;
        for i in 0..lp.len() {
            let (a, b) = (lp[i], lp[j]);
            if (a[1] > x[1]) != (b[1] > x[1]) {
                let t = (x[1] - a[1]) / (b[1] - a[1]);
                if x[0] < a[0] + t * (b[0] - a[0]) {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Number of loops containing `x`.
    pub fn depth(&self, x: Point) -> usize {
        (0..self.loops.len()).filter(|&li| self.loop_contains(li, x)).count()
    }

    /// Depth of every loop: how many other loops contain it. Assumes loops do
    /// not cross, so testing one vertex suffices.
    pub fn loop_depths(&self) -> Vec<usize> {
        (0..self.loops.len())
            .map(|li| {
                let v = self.loops[li][0];
                (0..self.loops.len()).filter(|&o| o != li && self.loop_contains(o, v)).count()
            })
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_loops(self.loops.iter().map(|lp| lp.iter().map(|v| [v[0] * s, v[1] * s]).collect()).collect())
    }

    /// Union of the loops of both boundaries.
    pub fn with_loops_of(&self, other: &PolylineBoundary) -> Result<Self> {
        let mut loops = self.loops.clone();
        loops.extend(other.loops.iter().cloned());
        Self::from_loops(loops)
    }

    /// Neighbours `(previous, next)` of the loop vertex equal to `v`, if any.
    pub fn vertex_neighbors(&self, v: Point) -> Option<(Point, Point)> {
        self.loops.iter().find_map(|lp| {
            let i = lp.iter().position(|w| *w == v)?;
            let n = lp.len();
            Some((lp[(i + n - 1) % n], lp[(i + 1) % n]))
        })
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in self.loops.iter().flatten() {
            for a in 0..2 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Rule {
    EvenOdd,
    Depth(Vec<usize>),
}

/// Assigns classes to points from their nesting depth. Class `0` is the
/// positive class in binary use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabeler {
    rule: Rule,
}

impl RegionLabeler {
    /// Positive iff the point is inside an odd number of loops.
    pub fn even_odd() -> Self {
        Self { rule: Rule::EvenOdd }
    }

    /// `classes[d]` is the class of depth `d`; deeper points take the last entry.
    pub fn by_depth(classes: Vec<usize>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidArgument("depth table is empty".into()));
        }
        Ok(Self {
            rule: Rule::Depth(classes),
        })
    }

    pub fn num_classes(&self) -> usize {
        match &self.rule {
            Rule::EvenOdd => 2,
            Rule::Depth(c) => c.iter().max().map_or(1, |m| m + 1).max(2),
        }
    }

    pub fn class_of_depth(&self, depth: usize) -> usize {
        match &self.rule {
            Rule::EvenOdd => {
                if depth % 2 == 1 {
                    0
                } else {
                    1
                }
            }
            Rule::Depth(c) => c[depth.min(c.len() - 1)],
        }
    }

    pub fn class(&self, boundary: &PolylineBoundary, x: Point) -> usize {
        self.class_of_depth(boundary.depth(x))
    }

    pub fn is_positive(&self, boundary: &PolylineBoundary, x: Point) -> bool {
        self.class(boundary, x) == 0
    }
}

/// Distance to the boundary, signed `+` in the positive region; `0` on it.
pub fn signed_distance(boundary: &PolylineBoundary, labeler: &RegionLabeler, x: Point) -> f64 {
    sdf_with_gradient(boundary, labeler, x).0
}

/// Signed distance and its gradient `±(x − nearest)/d`. The gradient is zero
/// on the boundary.
pub fn sdf_with_gradient(boundary: &PolylineBoundary, labeler: &RegionLabeler, x: Point) -> (f64, Point) {
    let (d, c) = boundary.nearest(x);
    if d == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let s = if labeler.is_positive(boundary, x) { 1.0 } else { -1.0 };
    let r = libm::hypot(x[0] - c[0], x[1] - c[1]);
    (s * d, [s * (x[0] - c[0]) / r, s * (x[1] - c[1]) / r])
}

/// Unit step that moves `x` straight towards its nearest boundary point.
pub fn descent_direction(boundary: &PolylineBoundary, x: Point) -> Point {
    let (d, c) = boundary.nearest(x);
    let r = libm::hypot(x[0] - c[0], x[1] - c[1]);
    if d == 0.0 || r == 0.0 {
        return [0.0, 0.0];
    }
    [(c[0] - x[0]) / r, (c[1] - x[1]) / r]
}

/// Unit direction along which a step of length `|f(x)|·(1 + slack)` ends
/// strictly inside another region.
///
/// Away from vertices this is [`descent_direction`]. When the nearest point
/// is a vertex whose corner on the far side is convex, the straight line
/// only grazes that region, so the step is aimed at the corner's bisector at
/// depth `slack·|f| / cos θ` instead, `θ` being the angle between the
/// straight direction and the bisector. The step length then matches to
/// second order in `slack`.
pub fn crossing_direction(boundary: &PolylineBoundary, labeler: &RegionLabeler, x: Point, slack: f64) -> Point {
    let d = descent_direction(boundary, x);
    let (f, c) = boundary.nearest(x);
    if f == 0.0 {
        return d;
    }
    let here = labeler.class(boundary, x);
    let end = [x[0] + f * (1.0 + slack) * d[0], x[1] + f * (1.0 + slack) * d[1]];
    if labeler.class(boundary, end) != here {
        return d;
    }
    let Some((prev, next)) = boundary.vertex_neighbors(c) else {
        return d;
    };
    let unit = |v: Point| {
        let n = libm::hypot(v[0] - c[0], v[1] - c[1]);
        [(v[0] - c[0]) / n, (v[1] - c[1]) / n]
    };
    let (e1, e2) = (unit(prev), unit(next));
    let (bx, by) = (e1[0] + e2[0], e1[1] + e2[1]);
    let bn = libm::hypot(bx, by);
    if bn == 0.0 {
        return d;
    }
    let b = [bx / bn, by / bn];
    let cos = d[0] * b[0] + d[1] * b[1];
    if cos <= 0.0 {
        return d;
    }
    let depth = slack * f / cos;
    let target = [c[0] + depth * b[0], c[1] + depth * b[1]];
    if labeler.class(boundary, target) == here {
        return d;
    }
    let (tx, ty) = (target[0] - x[0], target[1] - x[1]);
    let tn = libm::hypot(tx, ty);
    [tx / tn, ty / tn]
}

/// Region partition for the multiclass signed distance: the regions are the
/// nesting-depth components of `boundary`, classed by `labeler`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    boundary: PolylineBoundary,
    labeler: RegionLabeler,
    /// Classes on either side of each loop: (outside, inside).
    loop_sides: Vec<(usize, usize)>,
}

impl RegionPartition {
    pub fn new(boundary: PolylineBoundary, labeler: RegionLabeler) -> Self {
        let loop_sides = boundary
            .loop_depths()
            .into_iter()
            .map(|d| (labeler.class_of_depth(d), labeler.class_of_depth(d + 1)))
            .collect();
        Self {
            boundary,
            labeler,
            loop_sides,
        }
    }

    pub fn boundary(&self) -> &PolylineBoundary {
        &self.boundary
    }

    pub fn labeler(&self) -> &RegionLabeler {
        &self.labeler
    }

    pub fn num_classes(&self) -> usize {
        self.labeler.num_classes()
    }

    /// Distance to the closure of class `k` and the nearest point in it.
    /// Every loop touching a class-`k` region lies in that closure, and its
    /// boundary is made of such loops.
    fn region_distance(&self, x: Point, own: usize, k: usize) -> (f64, Point) {
        if own == k {
            return (0.0, x);
        }
        self.boundary
            .nearest_where(x, |li| self.loop_sides[li].0 == k || self.loop_sides[li].1 == k)
            .unwrap_or((f64::INFINITY, x))
    }

    /// `f_k(x) = d(x, ∂)` when `x` is strictly nearest to class `k`, otherwise 0,
    /// together with the gradient of the nonzero component.
    pub fn evaluate_with_gradient(&self, x: Point) -> (Vec<f64>, Option<(usize, Point)>) {
        let k_n = self.num_classes();
        let own = self.labeler.class(&self.boundary, x);
        let dists: Vec<(f64, Point)> = (0..k_n).map(|k| self.region_distance(x, own, k)).collect();
        let mut out = vec![0.0; k_n];
        let mut order: Vec<usize> = (0..k_n).collect();
        order.sort_by(|&a, &b| dists[a].0.total_cmp(&dists[b].0));
        let (first, second) = (order[0], order[1]);
        let (d1, d2) = (dists[first].0, dists[second].0);
        if !(d1 < d2) || !d2.is_finite() {
            return (out, None);
        }
        let value = d2 - d1;
        out[first] = value;
        // d1 = 0 away from ties, so the gradient is the unit vector away from
        // the nearest competing region.
        let c = dists[second].1;
        let r = libm::hypot(x[0] - c[0], x[1] - c[1]);
        let g = [(x[0] - c[0]) / r, (x[1] - c[1]) / r];
        (out, Some((first, g)))
    }
}

/// Multiclass signed distance: at most one nonzero component.
pub fn multiclass_sdf(partition: &RegionPartition, x: Point) -> Vec<f64> {
    partition.evaluate_with_gradient(x).0
}

/// Von Koch snowflake: an equilateral triangle inscribed in the unit circle
/// with every segment replaced `iterations` times by four thirds, the middle
/// two bent outward.
pub fn koch_snowflake(iterations: usize) -> Result<PolylineBoundary> {
    if iterations > 8 {
        return Err(Error::InvalidArgument(format!("iterations must be at most 8, got {iterations}")));
    }
    let angle = |deg: f64| {
        let r = deg.to_radians();
        [libm::cos(r), libm::sin(r)]
    };
    // Counter-clockwise, so the outward normal of direction d is (d_y, -d_x).
    let mut pts: Vec<Point> = vec![angle(90.0), angle(210.0), angle(330.0)];
    let h = libm::sqrt(3.0) / 6.0;
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for i in 0..pts.len() {
            let p = pts[i];
            let q = pts[(i + 1) % pts.len()];
            let d = [q[0] - p[0], q[1] - p[1]];
            let a = [p[0] + d[0] / 3.0, p[1] + d[1] / 3.0];
            let b = [p[0] + 2.0 * d[0] / 3.0, p[1] + 2.0 * d[1] / 3.0];
            let peak = [p[0] + d[0] / 2.0 + h * d[1], p[1] + d[1] / 2.0 - h * d[0]];
            next.extend_from_slice(&[p, a, peak, b]);
        }
        pts = next;
    }
    PolylineBoundary::from_loops(vec![pts])
}

/// Scale of the inner snowflake of the ring task.
pub const INNER_SNOWFLAKE_SCALE: f64 = 0.4;

/// Default bounding box of the snowflake task, `[−1.2, 1.2]²`.
pub const SNOWFLAKE_BBOX: (Point, Point) = ([-1.2, -1.2], [1.2, 1.2]);

/// Ring between a snowflake and a copy scaled by [`INNER_SNOWFLAKE_SCALE`]:
/// the ring is positive, the center and the exterior negative.
pub fn snowflake_ring(iterations: usize) -> Result<(PolylineBoundary, RegionLabeler)> {
    let outer = koch_snowflake(iterations)?;
    let inner = outer.scaled(INNER_SNOWFLAKE_SCALE)?;
    Ok((outer.with_loops_of(&inner)?, RegionLabeler::even_odd()))
}

/// `resolution²` grid points over `bbox` (y outer, x inner, endpoints
/// included) labeled with the sign of the signed distance and carrying it as
/// regression target.
pub fn sdf_grid_dataset(
    boundary: &PolylineBoundary,
    labeler: &RegionLabeler,
    resolution: usize,
    bbox: (Point, Point),
) -> Result<LabeledDataset> {
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let (lo, hi) = bbox;
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(Error::InvalidArgument("empty bounding box".into()));
    }
    let step = |a: usize, i: usize| lo[a] + (hi[a] - lo[a]) * i as f64 / (resolution - 1) as f64;
    let n = resolution * resolution;
    let mut pts = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for iy in 0..resolution {
        for ix in 0..resolution {
            let x = [step(0, ix), step(1, iy)];
            let t = signed_distance(boundary, labeler, x);
            pts.extend_from_slice(&x);
            labels.push(if labeler.is_positive(boundary, x) { 1.0 } else { -1.0 });
            targets.push(t);
        }
    }
    LabeledDataset::new(Matrix::new(n, 2, pts)?, Labels::Binary(labels), Some(targets))
}

/// The exact binary signed distance as a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdfModel {
    pub boundary: PolylineBoundary,
    pub labeler: RegionLabeler,
}

impl Model for SdfModel {
    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn is_one_lipschitz(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        vec![signed_distance(&self.boundary, &self.labeler, [x[0], x[1]])]
    }

    fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Vec<f64> {
        let (_, g) = sdf_with_gradient(&self.boundary, &self.labeler, [x[0], x[1]]);
        vec![upstream[0] * g[0], upstream[0] * g[1]]
    }
}

impl Model for RegionPartition {
    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        self.num_classes()
    }

    fn is_one_lipschitz(&self) -> bool {
        true
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        multiclass_sdf(self, [x[0], x[1]])
    }

    fn input_gradient(&self, x: &[f64], upstream: &[f64]) -> Vec<f64> {
        match self.evaluate_with_gradient([x[0], x[1]]).1 {
            Some((k, g)) => vec![upstream[k] * g[0], upstream[k] * g[1]],
            None => vec![0.0, 0.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PolylineBoundary {
        PolylineBoundary::from_loops(vec![vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]]).unwrap()
    }

    #[test]
    fn snowflake_segment_counts() {
        assert_eq!(koch_snowflake(0).unwrap().segments().len(), 3);
        assert_eq!(koch_snowflake(4).unwrap().segments().len(), 768);
        assert!(koch_snowflake(9).is_err());
    }

    #[test]
    fn snowflake_perimeter_closed_form() {
        let base = 3.0 * libm::sqrt(3.0);
        for k in 0..6 {
            let p = koch_snowflake(k).unwrap().perimeter();
            assert!((p - base * libm::pow(4.0 / 3.0, k as f64)).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn snowflake_grows_outward() {
        // The first bump of the top-left edge points away from the origin.
        let s = koch_snowflake(1).unwrap();
        let r = |v: Point| libm::hypot(v[0], v[1]);
        assert!(s.loops()[0].iter().skip(2).step_by(4).all(|&v| r(v) > 0.5 + 1e-9));
    }

    #[test]
    fn square_examples() {
        let b = square();
        let lab = RegionLabeler::even_odd();
        assert_eq!(signed_distance(&b, &lab, [0.0, 0.0]), 1.0);
        assert_eq!(signed_distance(&b, &lab, [1.0, 0.3]), 0.0);
        assert_eq!(signed_distance(&b, &lab, [3.0, 0.0]), -2.0);
    }

    #[test]
    fn rejects_degenerate_loops() {
        assert!(PolylineBoundary::from_loops(vec![vec![[0.0, 0.0], [1.0, 0.0]]]).is_err());
        assert!(PolylineBoundary::from_loops(vec![vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]]).is_err());
        let closed = PolylineBoundary::from_loops(vec![vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]]).unwrap();
        assert_eq!(closed.segments().len(), 3);
    }

    #[test]
    fn ring_labels() {
        let (b, lab) = snowflake_ring(2).unwrap();
        assert!(!lab.is_positive(&b, [0.0, 0.0]));
        assert!(lab.is_positive(&b, [0.0, 0.7]));
        assert!(!lab.is_positive(&b, [1.5, 1.5]));
    }

    #[test]
    fn grid_corners() {
        let d = sdf_grid_dataset(&square(), &RegionLabeler::even_odd(), 2, ([-2.0, -2.0], [2.0, 2.0])).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.point(0), &[-2.0, -2.0]);
        assert_eq!(d.point(1), &[2.0, -2.0]);
        assert_eq!(d.point(3), &[2.0, 2.0]);
        let t = d.targets.as_ref().unwrap();
        assert!(t.iter().all(|&v| (v + core::f64::consts::SQRT_2).abs() < 1e-15));
    }

    #[test]
    fn multiclass_two_class_reduction() {
        let part = RegionPartition::new(square(), RegionLabeler::even_odd());
        let lab = RegionLabeler::even_odd();
        for x in [[0.2, 0.1], [1.7, -0.4], [-0.9, 0.95], [0.0, 3.0]] {
            let v = multiclass_sdf(&part, x);
            let s = signed_distance(part.boundary(), &lab, x);
            let k = if s > 0.0 { 0 } else { 1 };
            assert!((v[k] - s.abs()).abs() < 1e-15);
            assert_eq!(v[1 - k], 0.0);
        }
        assert_eq!(multiclass_sdf(&part, [1.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn three_classes_by_depth() {
        let outer = square();
        let inner = outer.scaled(0.5).unwrap();
        let b = outer.with_loops_of(&inner).unwrap();
        let part = RegionPartition::new(b, RegionLabeler::by_depth(vec![2, 1, 0]).unwrap());
        assert_eq!(multiclass_sdf(&part, [0.0, 0.0]), vec![0.5, 0.0, 0.0]);
        let v = multiclass_sdf(&part, [0.0, 0.8]);
        assert!((v[1] - 0.2).abs() < 1e-12 && v[0] == 0.0 && v[2] == 0.0);
        assert_eq!(multiclass_sdf(&part, [0.0, 3.0]), vec![0.0, 0.0, 2.0]);
    }
}
