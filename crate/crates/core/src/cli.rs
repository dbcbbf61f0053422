//! The `spf` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detect::{self, DetectConfig};
use crate::error::Error;
use crate::evaluate::{self, CoordSpace, EvalReport};
use crate::geom::Point;
use crate::imagecore::{self, Dims, SlicePattern, Volume4D};
use crate::keyvalue::{parse_triple, KeyValues};
use crate::mrftree::CellTree;
use crate::simulate::{self, GroundTruth, InitSource, SimConfig};
use crate::track::{self, Method, TrackConfig, TrackResult};
use crate::viewbundle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "spf",
    version,
    long_version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ")"),
    about = "Detect and track globular cells in 4D fluorescence volumes"
)]
pub struct Cli {
    /// Worker threads [default: available cores]. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble 2D slice images into a volume file.
    Convert(ConvertArgs),
    /// Detect cells in one frame and write their centroids.
    Detect(DetectArgs),
    /// Track every detected cell through all frames.
    Track(TrackArgs),
    /// Generate a synthetic dataset with ground truth.
    Simulate(SimulateArgs),
    /// Score a tracking result against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a bundle of per-frame point lists and trajectories for review.
    ExportView(ExportViewArgs),
}

fn triple<T: std::str::FromStr + Copy>(s: &str) -> Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    parse_triple(s)
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    /// File name template with `{t}` and `{z}` fields, e.g. `t{t:03}_z{z:02}.png`.
    #[arg(long)]
    pub pattern: String,
    /// Volume extent `T,Z,Y,X`.
    #[arg(long)]
    pub dims: Dims,
    /// Subtract each slice's mean intensity.
    #[arg(long)]
    pub subtract_bg: bool,
    /// Median filter window `X,Y,Z` (odd sizes), e.g. `3,3,1`.
    #[arg(long, value_parser = triple::<usize>)]
    pub median: Option<[usize; 3]>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    /// DP-means cluster penalty (physical units).
    #[arg(long, default_value_t = 8.0)]
    pub lambda: f64,
    /// Peak threshold [default: 10% of the dtype maximum].
    #[arg(long)]
    pub min_intensity: Option<u16>,
    /// Peak neighbourhood `X,Y,Z`.
    #[arg(long, value_parser = triple::<usize>, default_value = "3,3,1")]
    pub peak_window: [usize; 3],
    /// Clusters with fewer peaks are discarded.
    #[arg(long, default_value_t = 3)]
    pub min_cluster_size: usize,
    /// Physical spacing of z slices relative to x/y pixels.
    #[arg(long, default_value_t = imagecore::DEFAULT_Z_SCALE)]
    pub z_scale: f64,
    /// Also write the spanning tree over the centroids.
    #[arg(long)]
    pub tree_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// Frame-0 positions, one `k x y z` line per cell.
    #[arg(long)]
    pub centroids: PathBuf,
    /// Tree over the centroids [default: built from them].
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// `key = value` tracking parameters. Defaults: particles = 1000,
    /// alpha = 0.6, sigma_step = 0.6,0.6,0.03, sigma_root = 3,3,0.3,
    /// lambda_rej = 4.5, window = 4,3,2, sigma_lik2 = auto (0.1 * max²),
    /// max_reject = 10, seed = 0, ref_frame = 0.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "spf")]
    pub method: Method,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame whose estimates become the reference relative positions.
    #[arg(long)]
    pub ref_frame: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long, default_value_t = imagecore::DEFAULT_Z_SCALE)]
    pub z_scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("init_source").required(true).args(["init", "scatter"])))]
pub struct SimulateArgs {
    /// `key = value` simulation parameters. Defaults: shape = 20,256,512,
    /// frames = 500, alpha = 0.6, sigma_step = 0.6,0.6,0.03,
    /// psf_shape = 9,6,3, intensity = 200, p_drop = 0.03, seed = 0,
    /// z_scale = 3, dtype = u8, root_fixed = true, scatter_min_dist = 10,
    /// scatter_extent = 0.6,0.6,0.7.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial positions from a centroid file.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Scatter this many initial positions.
    #[arg(long)]
    pub scatter: Option<usize>,
    /// Number of frames.
    #[arg(long = "T")]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p_drop: Option<f64>,
    /// Frame extent `Z,Y,X`.
    #[arg(long, value_parser = triple::<usize>)]
    pub shape: Option<[usize; 3]>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write the frame-0 positions as a centroid file.
    #[arg(long)]
    pub centroids_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Error above which a frame counts as a tracking failure.
    #[arg(long, default_value_t = 4.5)]
    pub threshold: f64,
    /// Slice spacing; scales z differences in index space and converts
    /// positions to voxel indices for detection matching.
    #[arg(long, default_value_t = imagecore::DEFAULT_Z_SCALE)]
    pub z_scale: f64,
    /// Coordinate convention of the result and truth files.
    #[arg(long, default_value = "physical")]
    pub space: CoordSpace,
    /// Detected centroids to score against the frame-0 truth.
    #[arg(long)]
    pub detected: Option<PathBuf>,
    /// Detection match radius in voxels.
    #[arg(long, default_value_t = 5.0)]
    pub match_radius: f64,
    /// Text report; a `.tsv` with the same stem is written next to it.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportViewArgs {
    #[arg(long)]
    pub volume: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Only voxels brighter than this are exported.
    #[arg(long, default_value_t = 0)]
    pub floor: u16,
    /// Keep every n-th voxel along each axis.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = imagecore::DEFAULT_Z_SCALE)]
    pub z_scale: f64,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Convert(a) => convert(a),
        Command::Detect(a) => detect(a),
        Command::Track(a) => track(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ExportView(a) => export_view(a),
    }
}

fn require_inputs(paths: &[&Path]) -> Outcome {
    for p in paths {
        if !p.exists() {
            return Err(Failure::Usage(format!("input {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn require_outputs(paths: &[&Path]) -> Outcome {
    for p in paths {
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty());
        if let Some(d) = dir {
            if !d.is_dir() {
                return Err(Failure::Usage(format!("output directory {} does not exist", d.display())));
            }
        }
    }
    Ok(())
}

fn load_volume(path: &Path, z_scale: f64) -> Result<Volume4D, Failure> {
    Ok(imagecore::read_volume(path)?.with_z_scale(z_scale)?)
}

fn convert(a: ConvertArgs) -> Outcome {
    require_inputs(&[&a.input_dir])?;
    require_outputs(&[&a.out])?;
    let pattern = SlicePattern::parse(&a.pattern)?;
    let mut v = imagecore::load_slices(&a.input_dir, &pattern, a.dims)?;
    if a.subtract_bg {
        v = imagecore::subtract_background(&v);
    }
    if let Some(w) = a.median {
        v = imagecore::median_filter(&v, w)?;
    }
    imagecore::write_volume(&v, &a.out)?;
    log::info!("wrote {} ({:?})", a.out.display(), v.dims());
    Ok(())
}

fn detect(a: DetectArgs) -> Outcome {
    require_inputs(&[&a.volume])?;
    let outs: Vec<&Path> = std::iter::once(a.out.as_path()).chain(a.tree_out.as_deref()).collect();
    require_outputs(&outs)?;
    let v = load_volume(&a.volume, a.z_scale)?;
    let cfg = DetectConfig {
        lambda: a.lambda,
        peak_window: a.peak_window,
        min_intensity: a.min_intensity,
        min_cluster_size: a.min_cluster_size,
    };
    let set = detect::detect_cells(&v.frame(a.frame)?, v.z_scale(), &cfg)?;
    detect::write_centroids(&set.centroids, &a.out)?;
    log::info!("detected {} cells", set.k());
    if let Some(p) = &a.tree_out {
        CellTree::build(set.centroids)?.write(p)?;
    }
    Ok(())
}

fn track(a: TrackArgs) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.volume, &a.centroids];
    inputs.extend(a.tree.as_deref());
    inputs.extend(a.config.as_deref());
    require_inputs(&inputs)?;
    require_outputs(&[&a.out])?;

    let mut kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    if let Some(r) = a.ref_frame {
        kv.set("ref_frame", r);
    }
    if let Some(n) = a.particles {
        kv.set("particles", n);
    }
    let cfg = TrackConfig::from_key_values(kv)?;
    let centroids = detect::read_centroids(&a.centroids)?;
    let v = load_volume(&a.volume, a.z_scale)?;
    let result = match a.method {
        Method::Spf => {
            let tree = match &a.tree {
                Some(p) => CellTree::read(p, centroids)?,
                None => CellTree::build(centroids)?,
            };
            track::track_all(&v, &tree, &cfg)?
        }
        Method::Pf => track::track_all_pf(&v, &centroids, &cfg)?,
    };
    result.write(&a.out)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut inputs: Vec<&Path> = a.config.iter().map(PathBuf::as_path).collect();
    inputs.extend(a.init.as_deref());
    require_inputs(&inputs)?;
    let mut outs: Vec<&Path> = vec![&a.out, &a.truth];
    outs.extend(a.centroids_out.as_deref());
    require_outputs(&outs)?;

    let mut kv = match &a.config {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    if let Some(t) = a.frames {
        kv.set("frames", t);
    }
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    if let Some(p) = a.p_drop {
        kv.set("p_drop", p);
    }
    if let Some([z, y, x]) = a.shape {
        kv.set("shape", format!("{z},{y},{x}"));
    }
    let cfg = SimConfig::from_key_values(kv)?;
    let init = match (&a.init, a.scatter) {
        (Some(p), _) => InitSource::Centroids(detect::read_centroids(p)?),
        (None, Some(k)) => InitSource::Scatter(k),
        (None, None) => unreachable!("clap enforces one init source"),
    };
    let (volume, truth) = simulate::generate_dataset(&cfg, init)?;
    imagecore::write_volume(&volume, &a.out)?;
    truth.write(&a.truth)?;
    if let Some(p) = &a.centroids_out {
        detect::write_centroids(&truth.positions[0], p)?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.result, &a.truth];
    inputs.extend(a.detected.as_deref());
    require_inputs(&inputs)?;
    require_outputs(&[&a.report])?;
    if !(a.z_scale.is_finite() && a.z_scale > 0.0) {
        return Err(Failure::Usage("--z-scale must be positive".into()));
    }
    let result = TrackResult::read(&a.result)?;
    let truth = GroundTruth::read(&a.truth)?;
    let mut report = EvalReport::compute(&result, &truth, a.threshold, a.space, a.z_scale)?;
    if let Some(p) = &a.detected {
        let to_index = |pts: &[Point]| -> Vec<Point> {
            match a.space {
                CoordSpace::Index => pts.to_vec(),
                CoordSpace::Physical => pts.iter().map(|p| Point::new(p.x, p.y, p.z / a.z_scale)).collect(),
            }
        };
        let detected = to_index(&detect::read_centroids(p)?);
        let annotated = to_index(&truth.positions[0]);
        report.detection = Some(evaluate::detection_metrics(&detected, &annotated, a.match_radius));
    }
    report.write(&a.report)?;
    print!("{}", report.to_text());
    Ok(())
}

fn export_view(a: ExportViewArgs) -> Outcome {
    let mut inputs: Vec<&Path> = vec![&a.volume, &a.result];
    inputs.extend(a.tree.as_deref());
    require_inputs(&inputs)?;
    let v = load_volume(&a.volume, a.z_scale)?;
    let result = TrackResult::read(&a.result)?;
    let tree = match &a.tree {
        Some(p) => Some(CellTree::read(p, result.estimates[0].clone())?),
        None => None,
    };
    viewbundle::export_view(&v, &result, tree.as_ref(), &a.out_dir, a.floor, a.stride)?;
    Ok(())
}
