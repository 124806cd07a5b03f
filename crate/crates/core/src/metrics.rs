//! Area between two curves.
//!
//! Both curves are resampled uniformly in normalized arc length and the strip
//! between them is covered by triangles. Each quadrilateral
//! `(p_j, p_j+1, q_j+1, q_j)` is split along both diagonals and the two
//! triangulations are averaged, which makes the measure exactly symmetric in
//! its arguments; for planar convex quads both splits agree.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const DEFAULT_RESOLUTION: usize = 1000;

/// `resolution` points spaced uniformly in arc length along the polyline.
pub fn resample(points: &[DVector<f64>], resolution: usize) -> Result<Vec<DVector<f64>>> {
    if points.len() < 2 || resolution < 2 {
        return Err(Error::DegenerateCurve("need at least two points".into()));
    }
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for w in points.windows(2) {
        let last = *cumulative.last().expect("non-empty");
        cumulative.push(last + (&w[1] - &w[0]).norm());
    }
    let total = *cumulative.last().expect("non-empty");
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateCurve("curve has zero length".into()));
    }
    let mut out = Vec::with_capacity(resolution);
    let mut seg = 0;
    for i in 0..resolution {
        let s = total * i as f64 / (resolution - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(&points[seg] * (1.0 - t) + &points[seg + 1] * t);
    }
    Ok(out)
}

/// Unsigned area of the triangle `(a, b, c)` in any dimension, from the Gram
/// determinant of its edge vectors.
pub fn triangle_area(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let u = b - a;
    let v = c - a;
    let uu = u.dot(&u);
    let vv = v.dot(&v);
    let uv = u.dot(&v);
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}

/// Strip area between two curves already sampled at matching parameters.
fn strip_area(p: &[DVector<f64>], q: &[DVector<f64>]) -> f64 {
    (0..p.len() - 1)
        .map(|j| {
            let first = triangle_area(&p[j], &p[j + 1], &q[j]) + triangle_area(&q[j], &q[j + 1], &p[j + 1]);
            let second = triangle_area(&q[j], &q[j + 1], &p[j]) + triangle_area(&p[j], &p[j + 1], &q[j + 1]);
            0.5 * (first + second)
        })
        .sum()
}

fn check_pair(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<()> {
    let (Some(x), Some(y)) = (a.first(), b.first()) else {
        return Err(Error::DegenerateCurve("empty curve".into()));
    };
    Error::check_dim(x.len(), y.len())
}

/// Area between two polylines resampled to `resolution` points each.
pub fn curve_area(a: &[DVector<f64>], b: &[DVector<f64>], resolution: usize) -> Result<f64> {
    check_pair(a, b)?;
    let p = resample(a, resolution)?;
    let q = resample(b, resolution)?;
    Ok(strip_area(&p, &q))
}

/// Area between a reference trajectory and a simulated one, both resampled
/// to `resolution` points.
pub fn reproduction_error(reference: &Trajectory, simulated: &Trajectory, resolution: usize) -> Result<f64> {
    curve_area(reference.states(), simulated.states(), resolution)
}

/// Area between a reference and a rollout that may have stopped early.
///
/// The rollout endpoint is matched to the closest point of the reference;
/// the reference up to that point is compared with the whole rollout, and the
/// remaining reference tail is compared with the straight segment from the
/// rollout endpoint to the origin. Either piece is skipped when it has zero
/// length.
pub fn truncated_reproduction_error(
    reference: &Trajectory,
    simulated: &Trajectory,
    resolution: usize,
) -> Result<f64> {
    let r = reference.states();
    let s = simulated.states();
    check_pair(r, s)?;
    let end = simulated.last();
    let (seg, t) = closest_point(r, end);
    let matched = &r[seg] * (1.0 - t) + &r[seg + 1] * t;

    let mut head: Vec<DVector<f64>> = r[..=seg].to_vec();
    head.push(matched.clone());
    let mut tail = vec![matched];
    tail.extend_from_slice(&r[seg + 1..]);

    let mut area = 0.0;
    if polyline_length(&head) > 0.0 && polyline_length(s) > 0.0 {
        area += curve_area(&head, s, resolution)?;
    } else if polyline_length(&head) > 0.0 || polyline_length(s) > 0.0 {
        // one side is a single point: the strip degenerates to a fan
        let (line, point) = if polyline_length(&head) > 0.0 { (&head[..], &s[0]) } else { (s, &head[0]) };
        area += fan_area(line, point);
    }
    let origin = DVector::zeros(end.len());
    let closing = vec![end.clone(), origin];
    let tail_len = polyline_length(&tail);
    let closing_len = polyline_length(&closing);
    if tail_len > 0.0 && closing_len > 0.0 {
        area += curve_area(&tail, &closing, resolution)?;
    } else if tail_len > 0.0 {
        area += fan_area(&tail, end);
    } else if closing_len > 0.0 {
        area += fan_area(&closing, &tail[0]);
    }
    Ok(area)
}

fn polyline_length(points: &[DVector<f64>]) -> f64 {
    points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

fn fan_area(line: &[DVector<f64>], apex: &DVector<f64>) -> f64 {
    line.windows(2).map(|w| triangle_area(&w[0], &w[1], apex)).sum()
}

/// Segment index and interpolation weight of the point of the polyline
/// closest to `x`; ties go to the later segment so repeated visits resolve
/// toward the end of the curve.
fn closest_point(points: &[DVector<f64>], x: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, 0.0, f64::INFINITY);
    for (i, w) in points.windows(2).enumerate() {
        let d = &w[1] - &w[0];
        let dd = d.dot(&d);
        let t = if dd > 0.0 { ((x - &w[0]).dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (&w[0] + &d * t - x).norm();
        if dist <= best.2 {
            best = (i, t, dist);
        }
    }
    (best.0, best.1)
}
