//! Handwriting-like demonstration generator.
//!
//! Produces planar demonstrations in tablet-like units that end exactly at the
//! origin, with a bell-shaped speed profile and per-demonstration variation
//! (start offset, scale, small rotation) drawn from a seeded generator. Used
//! for tests, the benchmark fixtures and the example dataset.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::trajectory::{save_trajectory, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Two opposite arcs; the lower one curls around so the path moves away
    /// from the origin for a while before returning to it.
    SShape,
    /// Two straight strokes joined by a rounded corner.
    Angle,
    /// A single wide arc.
    CShape,
    /// A straight stroke, i.e. samples of a linear contraction.
    Line,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::SShape, Shape::Angle, Shape::CShape, Shape::Line];

    pub fn name(self) -> &'static str {
        match self {
            Shape::SShape => "Sshape",
            Shape::Angle => "Angle",
            Shape::CShape => "CShape",
            Shape::Line => "Line",
        }
    }

    /// Nominal path point for a path fraction `s` in `[0, 1]`; `s = 1` is the origin.
    pub fn point(self, s: f64) -> [f64; 2] {
        match self {
            Shape::SShape => {
                let r = 20.0;
                // upper bowl 20..270 deg around (0, 2r), then a curled lower bowl
                // running clockwise from 90 deg through 300 deg of arc around (0, 0)
                let (upper_len, lower_len) = (250.0, 300.0);
                let deg = s * (upper_len + lower_len);
                let (cy, theta) = if deg <= upper_len { (2.0 * r, 20.0 + deg) } else { (0.0, 90.0 - (deg - upper_len)) };
                let end = (90.0 - lower_len).to_radians();
                let t = theta.to_radians();
                [r * t.cos() - r * end.cos(), cy + r * t.sin() - r * end.sin()]
            }
            Shape::Angle => {
                let a = [-45.0, 12.0];
                let b = [-18.0, 42.0];
                // quadratic Bezier with the corner as control point keeps the stroke smooth
                let u = s;
                let w0 = (1.0 - u) * (1.0 - u);
                let w1 = 2.0 * u * (1.0 - u);
                let lin = [a[0] * (1.0 - u), a[1] * (1.0 - u)];
                let bez = [w0 * a[0] + w1 * b[0], w0 * a[1] + w1 * b[1]];
                [0.3 * lin[0] + 0.7 * bez[0], 0.3 * lin[1] + 0.7 * bez[1]]
            }
            Shape::CShape => {
                let r = 22.0;
                let theta = (30.0 + s * 240.0).to_radians();
                [r * theta.cos(), r + r * theta.sin()]
            }
            Shape::Line => [40.0 * (1.0 - s), 25.0 * (1.0 - s)],
        }
    }
}

/// Path fraction at normalized time `tau`: a minimum-jerk profile blended
/// with a constant-speed one so both ends move slowly but not at zero speed.
fn progress(tau: f64) -> f64 {
    let mj = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    0.7 * mj + 0.3 * tau
}

/// `count` demonstrations of `points` states each.
pub fn demonstrations(shape: Shape, count: usize, points: usize, seed: u64) -> Result<Vec<Trajectory>> {
    if points < 2 {
        return Err(Error::TooShort { id: shape.name().into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (shape as u64).wrapping_mul(0x9e37_79b9));
    let offset = Normal::new(0.0, 3.0).expect("valid normal");
    let scale = Normal::new(1.0, 0.04).expect("valid normal");
    let angle = Normal::new(0.0, 2.0 * PI / 180.0).expect("valid normal");
    (0..count)
        .map(|j| {
            let (dx, dy) = if j == 0 { (0.0, 0.0) } else { (offset.sample(&mut rng), offset.sample(&mut rng)) };
            let sc = if j == 0 { 1.0 } else { scale.sample(&mut rng) };
            let rot = if j == 0 { 0.0 } else { angle.sample(&mut rng) };
            let (c, s_) = (rot.cos(), rot.sin());
            let states = (0..points)
                .map(|k| {
                    let tau = k as f64 / (points - 1) as f64;
                    let s = progress(tau);
                    let [px, py] = shape.point(s);
                    let w = (1.0 - s) * (1.0 - s);
                    let (x, y) = (sc * px + w * dx, sc * py + w * dy);
                    DVector::from_vec(vec![c * x - s_ * y, s_ * x + c * y])
                })
                .collect();
            Trajectory::new(format!("{}_{j}", shape.name()), states)
        })
        .collect()
}

/// Writes `<dir>/<shape name>/demo_<j>.csv` for each shape.
pub fn write_dataset(dir: &Path, shapes: &[Shape], count: usize, points: usize, seed: u64) -> Result<()> {
    for &shape in shapes {
        let sub = dir.join(shape.name());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (j, t) in demonstrations(shape, count, points, seed)?.iter().enumerate() {
            save_trajectory(t, &sub.join(format!("demo_{j}.csv")))?;
        }
    }
    Ok(())
}
