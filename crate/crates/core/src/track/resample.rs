//! Weighting and resampling of proposed particles.

use rand::Rng;

use crate::geom::Point;

/// Systematic resampling: `m` indices drawn with one uniform offset.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(m);
    if m == 0 || weights.is_empty() {
        return out;
    }
    let step = 1.0 / m as f64;
    let u0 = rng.gen::<f64>() * step;
    let mut cum = weights[0];
    let mut i = 0;
    for j in 0..m {
        let u = u0 + j as f64 * step;
        while u > cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

/// Normalizes log-weights with the max-shift trick. Non-finite entries count
/// as zero weight; if nothing survives, the weights fall back to uniform.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        w.iter_mut().for_each(|x| *x /= sum);
    } else if !w.is_empty() {
        log::warn!("all {} in-view particle weights vanished; using uniform weights", w.len());
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|x| *x = u);
    }
    w
}

/// Per-cell tracking status at a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Tracked,
    OutOfView,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Tracked => "tracked",
            Status::OutOfView => "out_of_view",
        }
    }
}

impl std::str::FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tracked" => Ok(Status::Tracked),
            "out_of_view" => Ok(Status::OutOfView),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

/// A filter ensemble after weighting and resampling.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub particles: Vec<Point>,
    /// Ensemble weights: uniform over resampled slots, 0 for out-of-view pass-throughs.
    pub weights: Vec<f64>,
    pub out_of_view: Vec<bool>,
    /// Normalized weights of the in-view proposed particles before resampling.
    pub proposal_weights: Vec<f64>,
    /// Unweighted mean of the whole ensemble.
    pub estimate: Point,
    pub status: Status,
}

/// Builds the filter ensemble from proposed particles.
///
/// `log_weights[n]` is `None` for particles outside the volume: those keep
/// their slot unweighted. The remaining slots are filled, in index order, by
/// systematic resampling of the in-view particles.
pub fn weigh_and_resample<R: Rng + ?Sized>(proposed: &[Point], log_weights: &[Option<f64>], rng: &mut R) -> Filtered {
    assert_eq!(proposed.len(), log_weights.len());
    let n = proposed.len();
    let in_view: Vec<usize> = (0..n).filter(|&i| log_weights[i].is_some()).collect();
    let oov_count = n - in_view.len();
    let out_of_view: Vec<bool> = log_weights.iter().map(Option::is_none).collect();

    let lw: Vec<f64> = in_view.iter().map(|&i| log_weights[i].unwrap()).collect();
    let proposal_weights = normalize_log_weights(&lw);

    let mut particles = proposed.to_vec();
    let mut weights = vec![0.0; n];
    if !in_view.is_empty() {
        let picks = systematic_indices(&proposal_weights, in_view.len(), rng);
        let u = 1.0 / in_view.len() as f64;
        for (&slot, &pick) in in_view.iter().zip(&picks) {
            particles[slot] = proposed[in_view[pick]];
            weights[slot] = u;
        }
    }
    let estimate = crate::geom::mean(&particles).unwrap_or_else(Point::zeros);
    let status = if 2 * oov_count > n {
        Status::OutOfView
    } else {
        Status::Tracked
    };
    Filtered {
        particles,
        weights,
        out_of_view,
        proposal_weights,
        estimate,
        status,
    }
}
