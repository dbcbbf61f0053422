//! Export of volumes and trajectories for interactive review, and the
//! verdict files such review produces.
//!
//! Bundle layout:
//! - `meta.json`: `{"dims": [T, Z, Y, X], "z_scale": .., "floor": .., "stride": .., "frames": n}`
//! - `frame_%04d.txt`: `x y z v` per voxel brighter than the floor (voxel indices)
//! - `tracks.txt`: `t k x y z status` in voxel index coordinates
//! - `tree.txt`: tree edges, when a tree is given

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagecore::Volume4D;
use crate::mrftree::CellTree;
use crate::track::result::TrackResult;

/// Writes the bundle into `out_dir` (created if missing). Every `stride`-th
/// voxel along each axis is considered.
pub fn export_view(
    volume: &Volume4D,
    result: &TrackResult,
    tree: Option<&CellTree>,
    out_dir: impl AsRef<Path>,
    floor: u16,
    stride: usize,
) -> Result<()> {
    let out = out_dir.as_ref();
    let dims = volume.dims();
    if result.frames() != dims.t {
        return Err(Error::ShapeMismatch(format!(
            "result has {} frames, volume has {}",
            result.frames(),
            dims.t
        )));
    }
    if let Some(tree) = tree {
        if tree.len() != result.cells() {
            return Err(Error::ShapeMismatch(format!(
                "tree has {} nodes, result has {} cells",
                tree.len(),
                result.cells()
            )));
        }
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: String| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };

    let meta = serde_json::json!({
        "dims": [dims.t, dims.z, dims.y, dims.x],
        "z_scale": volume.z_scale(),
        "floor": floor,
        "stride": stride,
        "frames": dims.t,
    });
    write("meta.json", format!("{meta:#}\n"))?;

    for t in 0..dims.t {
        let frame = volume.frame(t)?;
        let s = frame.shape();
        let mut text = String::new();
        for z in (0..s.z).step_by(stride) {
            for y in (0..s.y).step_by(stride) {
                for x in (0..s.x).step_by(stride) {
                    let v = frame.get(z, y, x);
                    if v > floor {
                        writeln!(text, "{x} {y} {z} {v}").unwrap();
                    }
                }
            }
        }
        write(&format!("frame_{t:04}.txt"), text)?;
    }

    let zs = volume.z_scale();
    let mut tracks = String::new();
    for (t, (est, st)) in result.estimates.iter().zip(&result.status).enumerate() {
        for (k, (p, status)) in est.iter().zip(st).enumerate() {
            writeln!(tracks, "{t} {k} {} {} {} {}", p.x, p.y, p.z / zs, status.as_str()).unwrap();
        }
    }
    write("tracks.txt", tracks)?;

    if let Some(tree) = tree {
        write("tree.txt", tree.to_text())?;
    }
    Ok(())
}

/// Reviewer judgement for one nucleus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Success,
    Failure,
    Excluded,
}

impl std::str::FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "success" => Ok(Verdict::Success),
            "failure" => Ok(Verdict::Failure),
            "excluded" => Ok(Verdict::Excluded),
            _ => Err(format!("unknown verdict {s:?}")),
        }
    }
}

/// Parses `k verdict` lines; the trailing `rate ...` line, comments and
/// blank lines are ignored. A repeated `k` keeps the last verdict.
pub fn parse_verdicts(source: &str, text: &str) -> Result<BTreeMap<usize, Verdict>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("rate") {
            continue;
        }
        let bad = |m: String| Error::parse(source, i + 1, m);
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad("expected `k verdict`".into()))?;
        let k: usize = k.parse().map_err(|_| bad(format!("bad cell id {k:?}")))?;
        out.insert(k, v.trim().parse().map_err(bad)?);
    }
    Ok(out)
}

/// Successes over non-excluded nuclei; `None` when every nucleus is excluded.
pub fn success_rate(verdicts: &BTreeMap<usize, Verdict>) -> Option<f64> {
    let judged = verdicts.values().filter(|v| **v != Verdict::Excluded).count();
    let ok = verdicts.values().filter(|v| **v == Verdict::Success).count();
    (judged > 0).then(|| ok as f64 / judged as f64)
}
