//! Particle filters over a 4D volume.
//!
//! The root of the cell tree is tracked by a standard particle filter with
//! random-walk dynamics. Every other cell is then filtered in parent-first
//! sweep order: its particles are drawn from the parent's current-frame
//! filter ensemble shifted by a blend of the previous and reference
//! child-parent offsets ([`proposal::SpatialProposal`]), weighted by the
//! subimage likelihood, and resampled. [`Method::Pf`] runs the random-walk
//! filter independently for every cell instead.

mod config;
pub mod likelihood;
pub mod proposal;
pub mod resample;
pub mod result;
pub mod rng;

pub use config::{Method, TrackConfig};
pub use likelihood::Template;
pub use proposal::{AxisNoise, SpatialProposal};
pub use resample::{weigh_and_resample, Filtered, Status};
pub use result::TrackResult;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{to_voxel, Point};
use crate::imagecore::{AnyFrame, Volume4D};
use crate::mrftree::CellTree;

/// Filter state of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    /// Filter ensemble (post-resampling), physical coordinates.
    pub particles: Vec<Point>,
    pub weights: Vec<f64>,
    pub out_of_view: Vec<bool>,
    pub template: Template,
    /// Ensemble mean at the previous frame.
    pub mean_prev: Point,
    /// Ensemble mean at the reference frame.
    pub mean_ref: Point,
}

/// One tracker per centroid with every particle on the centroid and
/// templates captured from frame 0.
pub fn init_trackers(centroids: &[Point], volume: &Volume4D, config: &TrackConfig) -> Result<Vec<TrackerState>> {
    if centroids.is_empty() {
        return Err(Error::Empty("no centroids to track"));
    }
    config.validate()?;
    let n = config.particles;
    centroids
        .iter()
        .map(|c| {
            Ok(TrackerState {
                particles: vec![*c; n],
                weights: vec![1.0 / n as f64; n],
                out_of_view: vec![false; n],
                template: Template::capture(volume, 0, c, config.window)?,
                mean_prev: *c,
                mean_ref: *c,
            })
        })
        .collect()
}

/// Log-weights of proposed particles; `None` marks particles outside the volume.
pub fn weigh_particles(
    frame: &AnyFrame<'_>,
    z_scale: f64,
    proposed: &[Point],
    template: &Template,
    sigma_lik2: f64,
) -> Vec<Option<f64>> {
    let shape = frame.shape();
    proposed
        .par_iter()
        .with_min_len(64)
        .map(|p| {
            let v = to_voxel(p, z_scale);
            shape.contains(v).then(|| {
                let (ssd, w) = likelihood::frame_mismatch(frame, v, template);
                likelihood::log_weight(ssd, w, sigma_lik2)
            })
        })
        .collect()
}

/// Drives the per-frame filter recursion for all cells.
pub struct Tracker<'a> {
    volume: &'a Volume4D,
    config: TrackConfig,
    method: Method,
    parent: Vec<Option<usize>>,
    order: Vec<usize>,
    states: Vec<TrackerState>,
    sigma_lik2: f64,
    root_noise: AxisNoise,
    step_noise: AxisNoise,
}

impl<'a> Tracker<'a> {
    pub fn new_spf(volume: &'a Volume4D, tree: &CellTree, config: &TrackConfig) -> Result<Self> {
        let states = init_trackers(&tree.nodes, volume, config)?;
        Ok(Self::with_structure(
            volume,
            config,
            Method::Spf,
            tree.parent.clone(),
            tree.order.clone(),
            states,
        ))
    }

    pub fn new_pf(volume: &'a Volume4D, centroids: &[Point], config: &TrackConfig) -> Result<Self> {
        let states = init_trackers(centroids, volume, config)?;
        let k = centroids.len();
        Ok(Self::with_structure(
            volume,
            config,
            Method::Pf,
            vec![None; k],
            (0..k).collect(),
            states,
        ))
    }

    fn with_structure(
        volume: &'a Volume4D,
        config: &TrackConfig,
        method: Method,
        parent: Vec<Option<usize>>,
        order: Vec<usize>,
        states: Vec<TrackerState>,
    ) -> Self {
        Tracker {
            volume,
            sigma_lik2: config.sigma_lik2_for(volume.dtype()),
            root_noise: AxisNoise::new(config.sigma_root),
            step_noise: AxisNoise::new(config.sigma_step),
            config: config.clone(),
            method,
            parent,
            order,
            states,
        }
    }

    pub fn states(&self) -> &[TrackerState] {
        &self.states
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Filters frame `t` (t >= 1) for every cell and returns the per-cell
    /// estimates and statuses.
    pub fn step_frame(&mut self, t: usize) -> Result<Vec<(Point, Status)>> {
        if t == 0 {
            return Err(Error::Config("frame 0 is the initialization frame".into()));
        }
        let frame = self.volume.frame(t)?;
        let z_scale = self.volume.z_scale();
        let mut out = vec![(Point::zeros(), Status::Tracked); self.states.len()];

        for i in 0..self.order.len() {
            let k = self.order[i];
            let mut rng = rng::stream(self.config.seed, k, t);
            let proposed = match self.parent[k] {
                None => proposal::propose_root(&self.states[k].particles, &self.root_noise, &mut rng),
                Some(u) => {
                    let (child, parent) = (&self.states[k], &self.states[u]);
                    let spatial = SpatialProposal {
                        alpha: self.config.alpha,
                        eta_prev: child.mean_prev - parent.mean_prev,
                        eta_ref: child.mean_ref - parent.mean_ref,
                        lambda_rej: self.config.lambda_rej,
                        max_reject: self.config.max_reject,
                    };
                    proposal::propose_spf(&parent.particles, &spatial, &self.step_noise, &mut rng)
                }
            };
            let log_w = weigh_particles(&frame, z_scale, &proposed, &self.states[k].template, self.sigma_lik2);
            let filtered = weigh_and_resample(&proposed, &log_w, &mut rng);
            out[k] = (filtered.estimate, filtered.status);
            let state = &mut self.states[k];
            state.particles = filtered.particles;
            state.weights = filtered.weights;
            state.out_of_view = filtered.out_of_view;
        }

        for (state, (est, _)) in self.states.iter_mut().zip(&out) {
            state.mean_prev = *est;
            if t == self.config.ref_frame {
                state.mean_ref = *est;
            }
        }
        Ok(out)
    }

    /// Runs frames `1..T` and collects the full result.
    pub fn run(mut self, root: Option<usize>) -> Result<TrackResult> {
        let mut result = TrackResult::new(
            self.method,
            self.config.clone(),
            root,
            self.states.iter().map(|s| s.mean_prev).collect(),
        );
        for t in 1..self.volume.dims().t {
            let frame = self.step_frame(t)?;
            result.push_frame(frame);
        }
        Ok(result)
    }
}

/// Spatial particle filter over every frame of `volume`, seeded from the
/// tree's nodes at frame 0.
pub fn track_all(volume: &Volume4D, tree: &CellTree, config: &TrackConfig) -> Result<TrackResult> {
    Tracker::new_spf(volume, tree, config)?.run(Some(tree.root))
}

/// Independent random-walk particle filter per cell.
pub fn track_all_pf(volume: &Volume4D, centroids: &[Point], config: &TrackConfig) -> Result<TrackResult> {
    Tracker::new_pf(volume, centroids, config)?.run(None)
}
