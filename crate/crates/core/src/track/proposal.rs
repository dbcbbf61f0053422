//! Prediction step: random-walk dynamics for the root and the spatial
//! proposal (with collision rejection) for every other cell.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::Point;

/// Zero-mean Gaussian noise with independent per-axis standard deviations.
#[derive(Clone, Copy, Debug)]
pub struct AxisNoise {
    axes: [Normal<f64>; 3],
}

impl AxisNoise {
    /// Panics if a standard deviation is negative or not finite; configs are validated first.
    pub fn new(std: [f64; 3]) -> Self {
        AxisNoise {
            axes: std.map(|s| Normal::new(0.0, s).expect("validated standard deviation")),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            self.axes[0].sample(rng),
            self.axes[1].sample(rng),
            self.axes[2].sample(rng),
        )
    }
}

/// Random-walk prediction: every particle plus independent noise.
pub fn propose_root<R: Rng + ?Sized>(ensemble: &[Point], noise: &AxisNoise, rng: &mut R) -> Vec<Point> {
    ensemble.iter().map(|p| p + noise.sample(rng)).collect()
}

/// Probability that a candidate at offset `d` from its parent particle is rejected.
#[inline]
pub fn rejection_probability(d: &Point, lambda_rej: f64) -> f64 {
    if lambda_rej == 0.0 {
        return 0.0;
    }
    (-d.norm_squared() / (lambda_rej * lambda_rej)).exp()
}

/// One accept/reject decision for a candidate at offset `d` from its parent particle.
#[inline]
pub fn accept_candidate<R: Rng + ?Sized>(d: &Point, lambda_rej: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() >= rejection_probability(d, lambda_rej)
}

/// Inputs of the spatial proposal for one child cell.
#[derive(Clone, Copy, Debug)]
pub struct SpatialProposal {
    /// Weight of the previous-frame relative position.
    pub alpha: f64,
    /// Child mean minus parent mean at the previous frame.
    pub eta_prev: Point,
    /// Child mean minus parent mean at the reference frame.
    pub eta_ref: Point,
    pub lambda_rej: f64,
    pub max_reject: usize,
}

impl SpatialProposal {
    /// Deterministic part of the child-minus-parent offset.
    pub fn drift(&self) -> Point {
        self.alpha * self.eta_prev + (1.0 - self.alpha) * self.eta_ref
    }

    /// Draws one child particle from parent particle `parent`: parent plus
    /// drift plus noise, redrawn while the rejection step fires, and
    /// accepting the last candidate after `max_reject` attempts.
    pub fn draw<R: Rng + ?Sized>(&self, parent: &Point, noise: &AxisNoise, rng: &mut R) -> Point {
        let drift = self.drift();
        let mut attempt = 1;
        loop {
            let d = drift + noise.sample(rng);
            if attempt >= self.max_reject || accept_candidate(&d, self.lambda_rej, rng) {
                return parent + d;
            }
            attempt += 1;
        }
    }
}

/// Child particle `n` is drawn from parent particle `n` of the parent's
/// current-frame filter ensemble.
pub fn propose_spf<R: Rng + ?Sized>(
    parent_ensemble: &[Point],
    proposal: &SpatialProposal,
    noise: &AxisNoise,
    rng: &mut R,
) -> Vec<Point> {
    parent_ensemble.iter().map(|p| proposal.draw(p, noise, rng)).collect()
}
