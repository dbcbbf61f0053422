//! Tracking and detection metrics.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::simulate::GroundTruth;
use crate::track::result::TrackResult;

/// Coordinate convention of the positions being compared.
///
/// `Physical` positions already carry z in physical units; `Index` positions
/// hold slice indices in z, which are scaled by `z_scale` before measuring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoordSpace {
    #[default]
    Physical,
    Index,
}

impl FromStr for CoordSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(CoordSpace::Physical),
            "index" => Ok(CoordSpace::Index),
            _ => Err(Error::Config(format!("coordinate space must be physical or index, got {s:?}"))),
        }
    }
}

/// Euclidean distance in physical units.
pub fn distance(a: &Point, b: &Point, space: CoordSpace, z_scale: f64) -> f64 {
    let mut d = a - b;
    if space == CoordSpace::Index {
        d.z *= z_scale;
    }
    d.norm()
}

fn check_shapes(estimates: &[Vec<Point>], truth: &GroundTruth) -> Result<()> {
    if estimates.len() != truth.frames() {
        return Err(Error::ShapeMismatch(format!(
            "result has {} frames, truth has {}",
            estimates.len(),
            truth.frames()
        )));
    }
    if let Some(bad) = estimates.iter().find(|f| f.len() != truth.cells()) {
        return Err(Error::ShapeMismatch(format!(
            "result has {} cells, truth has {}",
            bad.len(),
            truth.cells()
        )));
    }
    Ok(())
}

/// `errors[t][k]`: distance to truth, `None` where the nucleus is hidden.
pub fn position_errors(
    estimates: &[Vec<Point>],
    truth: &GroundTruth,
    space: CoordSpace,
    z_scale: f64,
) -> Result<Vec<Vec<Option<f64>>>> {
    check_shapes(estimates, truth)?;
    Ok(estimates
        .iter()
        .zip(truth.positions.iter().zip(&truth.visible))
        .map(|(est, (pos, vis))| {
            est.iter()
                .zip(pos.iter().zip(vis))
                .map(|(e, (p, v))| v.then(|| distance(e, p, space, z_scale)))
                .collect()
        })
        .collect())
}

/// Per-frame root-mean-square error over visible nuclei; NaN for frames
/// with none visible.
pub fn rmse(estimates: &[Vec<Point>], truth: &GroundTruth, space: CoordSpace, z_scale: f64) -> Result<Vec<f64>> {
    Ok(position_errors(estimates, truth, space, z_scale)?
        .iter()
        .map(|frame| {
            let (sum, n) = frame
                .iter()
                .flatten()
                .fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                (sum / n as f64).sqrt()
            }
        })
        .collect())
}

/// Counts transitions from tracked (error ≤ threshold) to failed
/// (error > threshold). Hidden frames carry the previous state; a series
/// that starts out failed counts once.
pub fn count_failure_events(errors: impl IntoIterator<Item = Option<f64>>, threshold: f64) -> usize {
    let mut failed = false;
    let mut count = 0;
    for e in errors.into_iter().flatten() {
        let now = e > threshold;
        if now && !failed {
            count += 1;
        }
        failed = now;
    }
    count
}

/// Failure events per nucleus.
pub fn count_failures(
    estimates: &[Vec<Point>],
    truth: &GroundTruth,
    threshold: f64,
    space: CoordSpace,
    z_scale: f64,
) -> Result<Vec<usize>> {
    let errors = position_errors(estimates, truth, space, z_scale)?;
    Ok((0..truth.cells())
        .map(|k| count_failure_events(errors.iter().map(|f| f[k]), threshold))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `tp / (tp + fn)`; NaN without annotations.
    pub tpr: f64,
    /// `fp / (tp + fp)`; NaN without detections.
    pub fdr: f64,
}

impl DetectionMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
        DetectionMetrics {
            tp,
            fp,
            fn_,
            tpr: ratio(tp, tp + fn_),
            fdr: ratio(fp, tp + fp),
        }
    }
}

/// One-to-one matching of detections to annotations within `radius`,
/// maximizing the number of matched pairs. Returns `(detection, annotation)`
/// pairs sorted by detection index.
///
/// Augmenting paths try closer annotations first, so when nothing competes
/// each detection takes its nearest annotation.
pub fn match_detections(detected: &[Point], annotated: &[Point], radius: f64) -> Vec<(usize, usize)> {
    let r2 = radius * radius;
    let adj: Vec<Vec<usize>> = detected
        .iter()
        .map(|d| {
            let mut near: Vec<(f64, usize)> = annotated
                .iter()
                .enumerate()
                .map(|(j, a)| ((d - a).norm_squared(), j))
                .filter(|(d2, _)| *d2 <= r2)
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; annotated.len()];
    let mut order: Vec<usize> = (0..detected.len()).filter(|&i| !adj[i].is_empty()).collect();
    let nearest = |i: usize| (detected[i] - annotated[adj[i][0]]).norm_squared();
    order.sort_by(|&a, &b| nearest(a).total_cmp(&nearest(b)).then(a.cmp(&b)));
    for i in order {
        let mut seen = vec![false; annotated.len()];
        augment(i, &adj, &mut seen, &mut owner);
    }
    let mut pairs: Vec<(usize, usize)> = owner
        .iter()
        .enumerate()
        .filter_map(|(j, o)| o.map(|i| (i, j)))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Detection counts with matching radius `radius`; both sets must use the
/// same coordinates.
pub fn detection_metrics(detected: &[Point], annotated: &[Point], radius: f64) -> DetectionMetrics {
    let tp = match_detections(detected, annotated, radius).len();
    DetectionMetrics::from_counts(tp, detected.len() - tp, annotated.len() - tp)
}

/// Everything `evaluate` reports.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rmse: Vec<f64>,
    pub failures: Vec<usize>,
    pub threshold: f64,
    pub detection: Option<DetectionMetrics>,
}

impl EvalReport {
    pub fn compute(
        result: &TrackResult,
        truth: &GroundTruth,
        threshold: f64,
        space: CoordSpace,
        z_scale: f64,
    ) -> Result<Self> {
        Ok(EvalReport {
            rmse: rmse(&result.estimates, truth, space, z_scale)?,
            failures: count_failures(&result.estimates, truth, threshold, space, z_scale)?,
            threshold,
            detection: None,
        })
    }

    pub fn mean_failures(&self) -> f64 {
        if self.failures.is_empty() {
            return 0.0;
        }
        self.failures.iter().sum::<usize>() as f64 / self.failures.len() as f64
    }

    /// Mean over frames that have a defined RMSE.
    pub fn mean_rmse(&self) -> f64 {
        let defined: Vec<f64> = self.rmse.iter().copied().filter(|r| !r.is_nan()).collect();
        if defined.is_empty() {
            f64::NAN
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "frames: {}", self.rmse.len()).unwrap();
        writeln!(s, "cells: {}", self.failures.len()).unwrap();
        writeln!(s, "mean_rmse: {:.4}", self.mean_rmse()).unwrap();
        writeln!(s, "failure_threshold: {}", self.threshold).unwrap();
        writeln!(s, "failures_total: {}", self.failures.iter().sum::<usize>()).unwrap();
        writeln!(s, "failures_per_cell: {:.4}", self.mean_failures()).unwrap();
        if let Some(d) = &self.detection {
            writeln!(s, "detection_tp: {}", d.tp).unwrap();
            writeln!(s, "detection_fp: {}", d.fp).unwrap();
            writeln!(s, "detection_fn: {}", d.fn_).unwrap();
            writeln!(s, "detection_tpr: {:.4}", d.tpr).unwrap();
            writeln!(s, "detection_fdr: {:.4}", d.fdr).unwrap();
        }
        s
    }

    /// `metric\tvalue` lines: the summary, then `rmse_<t>` and
    /// `failures_<k>` series.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        writeln!(s, "mean_rmse\t{}", self.mean_rmse()).unwrap();
        writeln!(s, "failures_total\t{}", self.failures.iter().sum::<usize>()).unwrap();
        writeln!(s, "failures_per_cell\t{}", self.mean_failures()).unwrap();
        if let Some(d) = &self.detection {
            writeln!(s, "detection_tp\t{}", d.tp).unwrap();
            writeln!(s, "detection_fp\t{}", d.fp).unwrap();
            writeln!(s, "detection_fn\t{}", d.fn_).unwrap();
            writeln!(s, "detection_tpr\t{}", d.tpr).unwrap();
            writeln!(s, "detection_fdr\t{}", d.fdr).unwrap();
        }
        for (t, r) in self.rmse.iter().enumerate() {
            writeln!(s, "rmse_{t}\t{r}").unwrap();
        }
        for (k, f) in self.failures.iter().enumerate() {
            writeln!(s, "failures_{k}\t{f}").unwrap();
        }
        s
    }

    /// Writes `path` and a `.tsv` sibling.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))?;
        let tsv = path.with_extension("tsv");
        std::fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))
    }
}
