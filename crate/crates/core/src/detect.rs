//! Initial cell detection: local intensity peaks clustered by DP-means.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{from_voxel, Point};
use crate::imagecore::{AnyFrame, Dtype, Frame, Sample};

/// Voxels that are local maxima within their peak window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeakSet {
    /// Physical positions, in lexicographic (z, y, x) voxel order.
    pub points: Vec<Point>,
    pub intensities: Vec<u16>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Collects voxels that are `>=` every neighbor in a `(px, py, pz)` window
/// and at least `min_intensity`.
///
/// Within a tied plateau only the voxel with the smallest (z, y, x)
/// coordinate in each window survives.
pub fn collect_peaks(frame: &AnyFrame<'_>, peak_window: [usize; 3], min_intensity: u16, z_scale: f64) -> PeakSet {
    crate::with_frame!(*frame, f => peaks_typed(&f, peak_window, min_intensity, z_scale))
}

fn peaks_typed<S: Sample>(f: &Frame<'_, S>, peak_window: [usize; 3], min_intensity: u16, z_scale: f64) -> PeakSet {
    let s = f.shape;
    let [hx, hy, hz] = peak_window.map(|w| w / 2);
    let per_slice: Vec<Vec<(Point, u16)>> = (0..s.z)
        .into_par_iter()
        .map(|z| {
            let mut found = Vec::new();
            for y in 0..s.y {
                for x in 0..s.x {
                    let v = f.get(z, y, x).to_u32();
                    if v < min_intensity as u32 {
                        continue;
                    }
                    let here = s.index(z, y, x);
                    let mut is_peak = true;
                    'window: for zz in z.saturating_sub(hz)..=(z + hz).min(s.z - 1) {
                        for yy in y.saturating_sub(hy)..=(y + hy).min(s.y - 1) {
                            for xx in x.saturating_sub(hx)..=(x + hx).min(s.x - 1) {
                                let there = s.index(zz, yy, xx);
                                let n = f.data[there].to_u32();
                                if n > v || (n == v && there < here) {
                                    is_peak = false;
                                    break 'window;
                                }
                            }
                        }
                    }
                    if is_peak {
                        found.push((from_voxel(x as f64, y as f64, z as f64, z_scale), v as u16));
                    }
                }
            }
            found
        })
        .collect();
    let (points, intensities) = per_slice.into_iter().flatten().unzip();
    PeakSet { points, intensities }
}

/// Cluster centers and the point-to-cluster assignment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CentroidSet {
    pub centroids: Vec<Point>,
    /// Cluster index per input point; `None` for points whose cluster was dropped.
    pub assignment: Vec<Option<usize>>,
    /// Number of points assigned to each cluster.
    pub sizes: Vec<usize>,
}

impl CentroidSet {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Centroids only, with no assignment information.
    pub fn from_centroids(centroids: Vec<Point>) -> Self {
        let k = centroids.len();
        CentroidSet {
            centroids,
            assignment: Vec::new(),
            sizes: vec![1; k],
        }
    }
}

/// DP-means objective: within-cluster squared distances plus `lambda²` per cluster.
pub fn dp_means_objective(points: &[Point], set: &CentroidSet, lambda: f64) -> f64 {
    let fit: f64 = points
        .iter()
        .zip(&set.assignment)
        .filter_map(|(p, a)| a.map(|c| (p - set.centroids[c]).norm_squared()))
        .sum();
    fit + lambda * lambda * set.k() as f64
}

pub fn dp_means(points: &[Point], lambda: f64) -> Result<CentroidSet> {
    dp_means_traced(points, lambda).map(|(set, _)| set)
}

const MAX_DP_ITERATIONS: usize = 1000;

/// DP-means returning the objective after initialization and after every pass.
///
/// One cluster starts at the global mean. Each pass scans the points in
/// input order, opening a new cluster at any point whose squared distance to
/// every centroid exceeds `lambda²` and otherwise assigning it to the nearest
/// centroid; centroids are then recomputed as member means and empty clusters
/// dropped. Stops when a pass leaves every assignment unchanged.
pub fn dp_means_traced(points: &[Point], lambda: f64) -> Result<(CentroidSet, Vec<f64>)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let Some(global) = crate::geom::mean(points) else {
        return Ok((CentroidSet::default(), Vec::new()));
    };
    let lambda2 = lambda * lambda;
    let mut centroids = vec![global];
    let mut assignment = vec![0usize; points.len()];
    let mut trace = vec![points.iter().map(|p| (p - global).norm_squared()).sum::<f64>() + lambda2];

    for _ in 0..MAX_DP_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (mut best, mut best_d2) = (0usize, f64::INFINITY);
            for (c, m) in centroids.iter().enumerate() {
                let d2 = (p - m).norm_squared();
                if d2 < best_d2 {
                    best = c;
                    best_d2 = d2;
                }
            }
            if best_d2 > lambda2 {
                centroids.push(*p);
                best = centroids.len() - 1;
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        let mut sums = vec![Point::zeros(); centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a] += p;
            counts[a] += 1;
        }
        let mut remap = vec![usize::MAX; centroids.len()];
        centroids.clear();
        for (c, (s, &n)) in sums.iter().zip(&counts).enumerate() {
            if n > 0 {
                remap[c] = centroids.len();
                centroids.push(s / n as f64);
            }
        }
        for a in assignment.iter_mut() {
            *a = remap[*a];
        }
        let fit: f64 = points
            .iter()
            .zip(&assignment)
            .map(|(p, &a)| (p - centroids[a]).norm_squared())
            .sum();
        trace.push(fit + lambda2 * centroids.len() as f64);
        if !changed {
            break;
        }
    }

    let mut sizes = vec![0usize; centroids.len()];
    for &a in &assignment {
        sizes[a] += 1;
    }
    let set = CentroidSet {
        centroids,
        assignment: assignment.into_iter().map(Some).collect(),
        sizes,
    };
    Ok((set, trace))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectConfig {
    pub lambda: f64,
    pub peak_window: [usize; 3],
    /// Defaults to 10% of the dtype maximum.
    pub min_intensity: Option<u16>,
    pub min_cluster_size: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            lambda: 8.0,
            peak_window: [3, 3, 1],
            min_intensity: None,
            min_cluster_size: 3,
        }
    }
}

impl DetectConfig {
    pub fn min_intensity_for(&self, dtype: Dtype) -> u16 {
        self.min_intensity
            .unwrap_or_else(|| (dtype.max_value() as f64 * 0.1).ceil() as u16)
    }
}

/// Peaks followed by DP-means; clusters with fewer than `min_cluster_size`
/// points are removed.
pub fn detect_cells(frame: &AnyFrame<'_>, z_scale: f64, cfg: &DetectConfig) -> Result<CentroidSet> {
    if cfg.peak_window.contains(&0) {
        return Err(Error::Config("peak window entries must be >= 1".into()));
    }
    let peaks = collect_peaks(frame, cfg.peak_window, cfg.min_intensity_for(frame.dtype()), z_scale);
    let set = dp_means(&peaks.points, cfg.lambda)?;
    Ok(drop_small_clusters(set, cfg.min_cluster_size))
}

pub fn drop_small_clusters(set: CentroidSet, min_size: usize) -> CentroidSet {
    let mut remap = vec![None; set.k()];
    let mut centroids = Vec::new();
    let mut sizes = Vec::new();
    for (c, (&m, &n)) in set.centroids.iter().zip(&set.sizes).enumerate() {
        if n >= min_size {
            remap[c] = Some(centroids.len());
            centroids.push(m);
            sizes.push(n);
        }
    }
    CentroidSet {
        centroids,
        assignment: set.assignment.iter().map(|a| a.and_then(|c| remap[c])).collect(),
        sizes,
    }
}

/// Writes one `k x y z` line per centroid (physical units).
pub fn write_centroids(points: &[Point], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (k, p) in points.iter().enumerate() {
        out.push_str(&format!("{k} {} {} {}\n", p.x, p.y, p.z));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a centroid file; ids must be `0..K` in order.
pub fn read_centroids(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let src = path.display();
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::parse(&src, i + 1, "expected `k x y z`"));
        }
        let k: usize = f[0].parse().map_err(|_| Error::parse(&src, i + 1, "bad id"))?;
        if k != pts.len() {
            return Err(Error::parse(&src, i + 1, format!("expected id {}, got {k}", pts.len())));
        }
        let c = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(&src, i + 1, format!("bad number {s:?}")));
        pts.push(Point::new(c(f[1])?, c(f[2])?, c(f[3])?));
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{Dims, Volume4D, Voxels};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame_from(dims: Dims, data: Vec<u8>) -> Volume4D {
        Volume4D::new(dims, Voxels::U8(data)).unwrap()
    }

    #[test]
    fn zero_frame_has_no_peaks() {
        let v = Volume4D::zeros(Dims::new(1, 3, 8, 8), Dtype::U8).unwrap();
        let p = collect_peaks(&v.frame(0).unwrap(), [3, 3, 1], 1, 3.0);
        assert!(p.is_empty());
        let c = detect_cells(&v.frame(0).unwrap(), 3.0, &DetectConfig::default()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn single_blob_single_peak() {
        let dims = Dims::new(1, 3, 11, 11);
        let mut data = vec![0u8; dims.len()];
        for z in 0..3 {
            for y in 0..11 {
                for x in 0..11 {
                    let d2 = ((x as f64 - 6.0).powi(2) + (y as f64 - 4.0).powi(2)) / 4.0 + (z as f64 - 1.0).powi(2);
                    data[(z * 11 + y) * 11 + x] = (200.0 * (-0.5 * d2).exp()).round() as u8;
                }
            }
        }
        let v = frame_from(dims, data);
        let p = collect_peaks(&v.frame(0).unwrap(), [3, 3, 3], 20, 3.0);
        assert_eq!(p.points, vec![Point::new(6.0, 4.0, 3.0)]);
        assert_eq!(p.intensities, vec![200]);
    }

    #[test]
    fn plateau_keeps_smallest_coordinate() {
        let mut data = vec![0u8; 25];
        for i in [11, 12, 13] {
            data[i] = 50;
        }
        let v = frame_from(Dims::new(1, 1, 5, 5), data);
        let p = collect_peaks(&v.frame(0).unwrap(), [3, 3, 1], 10, 1.0);
        assert_eq!(p.points, vec![Point::new(1.0, 2.0, 0.0)]);
    }

    #[test]
    fn one_point_one_centroid() {
        let p = [Point::new(1.0, 2.0, 3.0)];
        let c = dp_means(&p, 8.0).unwrap();
        assert_eq!(c.centroids, vec![p[0]]);
        assert_eq!(c.assignment, vec![Some(0)]);
    }

    #[test]
    fn empty_input_is_empty_set() {
        assert!(dp_means(&[], 8.0).unwrap().is_empty());
        assert!(dp_means(&[Point::zeros()], 0.0).is_err());
    }

    /// Minimum DP-means objective over every 2-partition of the points
    /// (and the single cluster), with clusters placed at their means.
    fn brute_best_partition(points: &[Point], lambda: f64) -> (f64, Vec<Vec<usize>>) {
        let n = points.len();
        let cost = |idx: &[usize]| {
            let m = idx.iter().map(|&i| points[i]).sum::<Point>() / idx.len() as f64;
            idx.iter().map(|&i| (points[i] - m).norm_squared()).sum::<f64>()
        };
        let all: Vec<usize> = (0..n).collect();
        let mut best = (cost(&all) + lambda * lambda, vec![all.clone()]);
        for mask in 1u32..(1 << (n - 1)) {
            let a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
            let c = cost(&a) + cost(&b) + 2.0 * lambda * lambda;
            if c < best.0 {
                best = (c, vec![a, b]);
            }
        }
        best
    }

    #[test]
    fn two_separated_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        for center in [Point::new(10.0, 10.0, 10.0), Point::new(50.0, 10.0, 10.0)] {
            for _ in 0..5 {
                let j = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                pts.push(center + j);
            }
        }
        let (best_obj, best_parts) = brute_best_partition(&pts, 8.0);
        assert_eq!(best_parts.len(), 2);
        let c = dp_means(&pts, 8.0).unwrap();
        assert_eq!(c.k(), 2);
        assert!((dp_means_objective(&pts, &c, 8.0) - best_obj).abs() < 1e-9);
        for part in best_parts {
            let m = part.iter().map(|&i| pts[i]).sum::<Point>() / part.len() as f64;
            assert!(c.centroids.iter().any(|cc| (cc - m).norm() < 1e-9));
        }
    }

    #[test]
    fn min_cluster_size_drops_small() {
        let pts = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(100.0, 0.0, 0.0),
            Point::new(101.0, 0.0, 0.0),
        ];
        let set = dp_means(&pts, 8.0).unwrap();
        assert_eq!(set.k(), 2);
        let kept = drop_small_clusters(set, 3);
        assert_eq!(kept.k(), 1);
        assert_eq!(kept.sizes, vec![3]);
        assert_eq!(&kept.assignment[3..], &[None, None]);
    }

    #[test]
    fn centroid_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        let pts = vec![Point::new(1.5, 2.0, 9.0), Point::new(-3.0, 0.25, 0.0)];
        write_centroids(&pts, &path).unwrap();
        assert_eq!(read_centroids(&path).unwrap(), pts);
        std::fs::write(&path, "0 1 2 3\n2 1 2 3\n").unwrap();
        assert!(read_centroids(&path).is_err());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..60.0f64, 0.0..60.0f64, 0.0..30.0f64), 1..40)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn objective_never_increases(pts in arb_points(), lambda in 2.0..30.0f64) {
            let (set, trace) = dp_means_traced(&pts, lambda).unwrap();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "trace {:?}", trace);
            }
            prop_assert!((trace.last().unwrap() - dp_means_objective(&pts, &set, lambda)).abs() < 1e-6);
        }

        #[test]
        fn centroids_are_member_means(pts in arb_points(), lambda in 2.0..30.0f64) {
            let set = dp_means(&pts, lambda).unwrap();
            for c in 0..set.k() {
                let members: Vec<&Point> = pts.iter().zip(&set.assignment).filter(|(_, a)| **a == Some(c)).map(|(p, _)| p).collect();
                prop_assert!(!members.is_empty());
                let m = crate::geom::mean(members).unwrap();
                prop_assert!((m - set.centroids[c]).norm() < 1e-9);
            }
        }

        #[test]
        fn huge_lambda_gives_global_mean(pts in arb_points()) {
            let set = dp_means(&pts, 1000.0).unwrap();
            prop_assert_eq!(set.k(), 1);
            let m = crate::geom::mean(&pts).unwrap();
            prop_assert!((m - set.centroids[0]).norm() < 1e-9);
        }

        #[test]
        fn converged_points_sit_within_lambda_of_nearest_centroid(pts in arb_points(), l in 3.0..20.0f64) {
            // k is not monotone in lambda (the scan is order dependent), but a
            // converged assignment always picks the nearest centroid within lambda.
            let set = dp_means(&pts, l).unwrap();
            for (p, a) in pts.iter().zip(&set.assignment) {
                let c = a.expect("every point is assigned");
                let d = (p - set.centroids[c]).norm();
                prop_assert!(d <= l + 1e-9, "distance {} > lambda {}", d, l);
                for other in &set.centroids {
                    prop_assert!(d <= (p - other).norm() + 1e-9);
                }
            }
        }
    }
}
