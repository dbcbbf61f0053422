//! Small geometry helpers shared across modules.

use nalgebra::Vector3;

/// A position `(x, y, z)` in physical units (z already multiplied by the
/// volume's z scale).
pub type Point = Vector3<f64>;

/// Mean of a non-empty set of points; `None` when the set is empty.
pub fn mean<'a, I>(points: I) -> Option<Point>
where
    I: IntoIterator<Item = &'a Point>,
{
    let mut sum = Point::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Converts a physical position to the nearest voxel index `(x, y, z)`.
/// The result may lie outside the volume.
pub fn to_voxel(p: &Point, z_scale: f64) -> [i64; 3] {
    [
        p.x.round() as i64,
        p.y.round() as i64,
        (p.z / z_scale).round() as i64,
    ]
}

/// Physical position of a voxel index `(x, y, z)`.
pub fn from_voxel(x: f64, y: f64, z: f64, z_scale: f64) -> Point {
    Point::new(x, y, z * z_scale)
}
