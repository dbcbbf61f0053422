//! Synthetic 4D datasets with known trajectories.
//!
//! Positions follow the spatial proposal as a generative model: the root
//! stays put and every other cell, visited parent-first, is placed at its
//! parent plus a blend of the previous and initial offsets plus Gaussian
//! noise. Nuclei are rendered with a truncated anisotropic Gaussian and
//! hidden independently per frame.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::imagecore::{Dims, Dtype, Sample, Shape3, Volume4D, Voxels};
use crate::keyvalue::{format_triple, KeyValues};
use crate::mrftree::CellTree;
use crate::track::proposal::AxisNoise;
use crate::track::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Frame extent `(Z, Y, X)` in voxels.
    pub shape: Shape3,
    pub frames: usize,
    pub alpha: f64,
    /// Per-axis motion noise std (physical units).
    pub sigma_step: [f64; 3],
    /// Diagonal PSF covariance along x, y, z in index-space voxels².
    pub psf_shape: [f64; 3],
    /// Peak intensity at a nucleus center.
    pub intensity: f64,
    pub p_drop: f64,
    pub seed: u64,
    pub z_scale: f64,
    pub dtype: Dtype,
    pub root_fixed: bool,
    /// Minimum pairwise distance of scattered initial positions (physical).
    pub scatter_min_dist: f64,
    /// Fraction of each axis, centered, that scattered positions occupy.
    pub scatter_extent: [f64; 3],
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            shape: Shape3::new(20, 256, 512),
            frames: 500,
            alpha: 0.6,
            sigma_step: [0.6, 0.6, 0.03],
            psf_shape: [9.0, 6.0, 3.0],
            intensity: 200.0,
            p_drop: 0.03,
            seed: 0,
            z_scale: 3.0,
            dtype: Dtype::U8,
            root_fixed: true,
            scatter_min_dist: 10.0,
            scatter_extent: [0.6, 0.6, 0.7],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.shape.is_empty() || self.frames == 0 {
            return bad("simulation dimensions must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.psf_shape.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("PSF shape must be positive definite".into());
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return bad(format!("p_drop must lie in [0, 1], got {}", self.p_drop));
        }
        if self.sigma_step.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("sigma_step entries must be >= 0".into());
        }
        if !(self.z_scale.is_finite() && self.z_scale > 0.0) {
            return bad("z_scale must be positive".into());
        }
        if self.scatter_extent.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return bad("scatter_extent entries must lie in (0, 1]".into());
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.frames, self.shape.z, self.shape.y, self.shape.x)
    }

    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        if let Some([z, y, x]) = kv.take_triple::<usize>("shape")? {
            self.shape = Shape3::new(z, y, x);
        }
        if let Some(v) = kv.take("frames")? {
            self.frames = v;
        }
        if let Some(v) = kv.take("alpha")? {
            self.alpha = v;
        }
        if let Some(v) = kv.take_triple("sigma_step")? {
            self.sigma_step = v;
        }
        if let Some(v) = kv.take_triple("psf_shape")? {
            self.psf_shape = v;
        }
        if let Some(v) = kv.take("intensity")? {
            self.intensity = v;
        }
        if let Some(v) = kv.take("p_drop")? {
            self.p_drop = v;
        }
        if let Some(v) = kv.take("seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.take("z_scale")? {
            self.z_scale = v;
        }
        if let Some(v) = kv.take::<String>("dtype")? {
            self.dtype = match v.as_str() {
                "u8" => Dtype::U8,
                "u16" => Dtype::U16,
                other => return Err(Error::Config(format!("dtype must be u8 or u16, got {other:?}"))),
            };
        }
        if let Some(v) = kv.take("root_fixed")? {
            self.root_fixed = v;
        }
        if let Some(v) = kv.take("scatter_min_dist")? {
            self.scatter_min_dist = v;
        }
        if let Some(v) = kv.take_triple("scatter_extent")? {
            self.scatter_extent = v;
        }
        Ok(())
    }

    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let mut cfg = SimConfig::default();
        cfg.apply(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let s = self.shape;
        vec![
            ("shape".into(), format_triple(&[s.z, s.y, s.x])),
            ("frames".into(), self.frames.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("sigma_step".into(), format_triple(&self.sigma_step)),
            ("psf_shape".into(), format_triple(&self.psf_shape)),
            ("intensity".into(), self.intensity.to_string()),
            ("p_drop".into(), self.p_drop.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("z_scale".into(), self.z_scale.to_string()),
            (
                "dtype".into(),
                match self.dtype {
                    Dtype::U8 => "u8",
                    Dtype::U16 => "u16",
                }
                .into(),
            ),
            ("root_fixed".into(), self.root_fixed.to_string()),
            ("scatter_min_dist".into(), self.scatter_min_dist.to_string()),
            ("scatter_extent".into(), format_triple(&self.scatter_extent)),
        ]
    }
}

/// Simulated trajectories and visibility.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// `positions[t][k]`, physical coordinates.
    pub positions: Vec<Vec<Point>>,
    pub visible: Vec<Vec<bool>>,
    pub tree: CellTree,
    pub params: SimConfig,
}

impl GroundTruth {
    pub fn frames(&self) -> usize {
        self.positions.len()
    }

    pub fn cells(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// `# sim key = value` header, then `t k x y z visible` rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.params.to_key_values() {
            writeln!(s, "# sim {k} = {v}").unwrap();
        }
        for (t, (pos, vis)) in self.positions.iter().zip(&self.visible).enumerate() {
            for (k, (p, v)) in pos.iter().zip(vis).enumerate() {
                writeln!(s, "{t} {k} {} {} {} {}", p.x, p.y, p.z, *v as u8).unwrap();
            }
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Parses a truth file; the generation tree is rebuilt from frame 0.
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut header = String::new();
        let mut positions: Vec<Vec<Point>> = Vec::new();
        let mut visible: Vec<Vec<bool>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |m: String| Error::parse(source, i + 1, m);
            let line = line.trim();
            if let Some(h) = line.strip_prefix('#') {
                if let Some(kv) = h.trim().strip_prefix("sim ") {
                    header.push_str(kv);
                    header.push('\n');
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad("expected `t k x y z visible`".into()));
            }
            let t: usize = f[0].parse().map_err(|_| bad("bad frame".into()))?;
            let k: usize = f[1].parse().map_err(|_| bad("bad cell".into()))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            let p = Point::new(num(f[2])?, num(f[3])?, num(f[4])?);
            let v = match f[5] {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("visible must be 0 or 1, got {other:?}"))),
            };
            if t == positions.len() && k == 0 {
                positions.push(Vec::new());
                visible.push(Vec::new());
            }
            if t + 1 != positions.len() || k != positions[t].len() {
                return Err(bad(format!("rows must be ordered by t then k; unexpected ({t}, {k})")));
            }
            positions[t].push(p);
            visible[t].push(v);
        }
        let first = positions.first().ok_or_else(|| Error::parse(source, 0, "no rows"))?.clone();
        if positions.iter().any(|p| p.len() != first.len()) {
            return Err(Error::parse(source, 0, "frames have differing cell counts"));
        }
        let params = SimConfig::from_key_values(KeyValues::parse(source, &header)?)?;
        Ok(GroundTruth {
            tree: CellTree::build(first)?,
            positions,
            visible,
            params,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }
}

/// One generative step of the tree-correlated motion model.
///
/// Non-root cells are visited in sweep order:
/// `x_k = x_u + α (prev_k − prev_u) + (1 − α)(init_k − init_u) + v`.
/// The root is kept (or random-walked when `root_fixed` is off).
pub fn advance_positions<R: Rng + ?Sized>(
    prev: &[Point],
    init: &[Point],
    tree: &CellTree,
    alpha: f64,
    root_fixed: bool,
    noise: &AxisNoise,
    rng: &mut R,
) -> Vec<Point> {
    let mut next = prev.to_vec();
    for &k in &tree.order {
        match tree.parent[k] {
            None => {
                if !root_fixed {
                    next[k] = prev[k] + noise.sample(rng);
                }
            }
            Some(u) => {
                next[k] = next[u] + alpha * (prev[k] - prev[u]) + (1.0 - alpha) * (init[k] - init[u]) + noise.sample(rng);
            }
        }
    }
    next
}

/// Trajectories for `cfg.frames` frames starting at the tree's nodes.
pub fn simulate_positions(tree: &CellTree, cfg: &SimConfig) -> Vec<Vec<Point>> {
    let init = &tree.nodes;
    let noise = AxisNoise::new(cfg.sigma_step);
    let mut rng = rng::stream(cfg.seed, usize::MAX, 0);
    let mut out = Vec::with_capacity(cfg.frames);
    out.push(init.clone());
    for t in 1..cfg.frames {
        let next = advance_positions(&out[t - 1], init, tree, cfg.alpha, cfg.root_fixed, &noise, &mut rng);
        out.push(next);
    }
    out
}

/// Per-frame visibility: frame 0 fully visible, later frames hide each
/// nucleus independently with probability `p_drop`.
pub fn sample_visibility(frames: usize, cells: usize, p_drop: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = rng::stream(seed, usize::MAX - 1, 0);
    (0..frames)
        .map(|t| {
            (0..cells)
                .map(|_| t == 0 || rng.gen::<f64>() >= p_drop)
                .collect()
        })
        .collect()
}

/// PSF value at squared Mahalanobis distance `d2` (0 outside the unit ellipsoid).
#[inline]
pub fn psf(d2: f64, intensity: f64) -> f64 {
    if d2 < 1.0 {
        intensity * (-0.5 * d2).exp()
    } else {
        0.0
    }
}

/// Renders visible nuclei into a frame buffer; overlaps combine by maximum.
pub fn render_frame_into<S: Sample>(out: &mut [S], positions: &[Point], visible: &[bool], cfg: &SimConfig) {
    let s = cfg.shape;
    out.fill(S::default());
    let [lx, ly, lz] = cfg.psf_shape;
    let reach = [lx.sqrt(), ly.sqrt(), lz.sqrt()];
    for (p, _) in positions.iter().zip(visible).filter(|(_, v)| **v) {
        let mu = [p.x, p.y, p.z / cfg.z_scale];
        let lo = |a: usize| (mu[a] - reach[a]).floor().max(0.0) as i64;
        let hi = |a: usize, n: usize| (mu[a] + reach[a]).ceil().min(n as f64 - 1.0) as i64;
        for z in lo(2)..=hi(2, s.z) {
            let dz = (z as f64 - mu[2]).powi(2) / lz;
            for y in lo(1)..=hi(1, s.y) {
                let dy = (y as f64 - mu[1]).powi(2) / ly;
                for x in lo(0)..=hi(0, s.x) {
                    let d2 = (x as f64 - mu[0]).powi(2) / lx + dy + dz;
                    if d2 < 1.0 {
                        let v = S::from_f64(psf(d2, cfg.intensity));
                        let slot = &mut out[s.index(z as usize, y as usize, x as usize)];
                        if v > *slot {
                            *slot = v;
                        }
                    }
                }
            }
        }
    }
}

/// Renders one frame as a single-frame volume.
pub fn render_frame(positions: &[Point], visible: &[bool], cfg: &SimConfig) -> Result<Volume4D> {
    let dims = Dims::new(1, cfg.shape.z, cfg.shape.y, cfg.shape.x);
    let mut v = Volume4D::zeros(dims, cfg.dtype)?.with_z_scale(cfg.z_scale)?;
    match v.voxels_mut() {
        Voxels::U8(d) => render_frame_into(d, positions, visible, cfg),
        Voxels::U16(d) => render_frame_into(d, positions, visible, cfg),
    }
    Ok(v)
}

/// `count` positions uniform in the centered scatter box with a minimum
/// pairwise distance, by rejection.
pub fn scatter(count: usize, cfg: &SimConfig) -> Result<Vec<Point>> {
    let mut rng = rng::stream(cfg.seed, usize::MAX - 2, 0);
    let s = cfg.shape;
    let ext = [s.x as f64 - 1.0, s.y as f64 - 1.0, (s.z as f64 - 1.0) * cfg.z_scale];
    let lo: Vec<f64> = (0..3).map(|a| ext[a] * (1.0 - cfg.scatter_extent[a]) / 2.0).collect();
    let hi: Vec<f64> = (0..3).map(|a| ext[a] - lo[a]).collect();
    let min2 = cfg.scatter_min_dist * cfg.scatter_min_dist;
    let mut pts: Vec<Point> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while pts.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) + 10_000 {
            return Err(Error::Config(format!(
                "could not place {count} points {} apart in the scatter box",
                cfg.scatter_min_dist
            )));
        }
        let p = Point::new(
            rng.gen_range(lo[0]..=hi[0]),
            rng.gen_range(lo[1]..=hi[1]),
            rng.gen_range(lo[2]..=hi[2]),
        );
        if pts.iter().all(|q| (q - p).norm_squared() >= min2) {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Where the initial positions come from.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSource {
    Centroids(Vec<Point>),
    Scatter(usize),
}

/// Full synthetic dataset: positions, visibility, rendered volume.
pub fn generate_dataset(cfg: &SimConfig, init: InitSource) -> Result<(Volume4D, GroundTruth)> {
    cfg.validate()?;
    let nodes = match init {
        InitSource::Centroids(c) => c,
        InitSource::Scatter(k) => scatter(k, cfg)?,
    };
    let tree = CellTree::build(nodes)?;
    let positions = simulate_positions(&tree, cfg);
    let visible = sample_visibility(cfg.frames, tree.len(), cfg.p_drop, cfg.seed);

    let dims = cfg.dims();
    let mut volume = Volume4D::zeros(dims, cfg.dtype)?.with_z_scale(cfg.z_scale)?;
    let n = dims.frame_len();
    match volume.voxels_mut() {
        Voxels::U8(d) => d
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(t, f)| render_frame_into(f, &positions[t], &visible[t], cfg)),
        Voxels::U16(d) => d
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(t, f)| render_frame_into(f, &positions[t], &visible[t], cfg)),
    }
    let truth = GroundTruth {
        positions,
        visible,
        tree,
        params: cfg.clone(),
    };
    Ok((volume, truth))
}
