use super::{Frame, Sample, Volume4D};
use crate::error::Result;

/// A cuboid window of `(2w1+1)(2w2+1)(2w3+1)` intensities around a voxel,
/// stored z, then y, then x. Positions outside the volume read as 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubImage {
    /// Voxel index `(x, y, z)` of the window center.
    pub center: [i64; 3],
    /// Half widths `(w1, w2, w3)` along x, y, z.
    pub half_widths: [usize; 3],
    pub values: Vec<u16>,
}

impl SubImage {
    pub fn edge_lengths(half_widths: [usize; 3]) -> [usize; 3] {
        half_widths.map(|w| 2 * w + 1)
    }

    pub fn window_len(half_widths: [usize; 3]) -> usize {
        Self::edge_lengths(half_widths).iter().product()
    }
}

pub fn extract_subimage(v: &Volume4D, t: usize, center: [i64; 3], w: [usize; 3]) -> Result<SubImage> {
    let frame = v.frame(t)?;
    Ok(SubImage {
        center,
        half_widths: w,
        values: crate::with_frame!(frame, f => gather(&f, center, w)),
    })
}

fn gather<S: Sample>(f: &Frame<'_, S>, center: [i64; 3], w: [usize; 3]) -> Vec<u16> {
    let mut out = Vec::with_capacity(SubImage::window_len(w));
    let [w1, w2, w3] = w.map(|x| x as i64);
    let s = f.shape;
    for dz in -w3..=w3 {
        let z = center[2] + dz;
        for dy in -w2..=w2 {
            let y = center[1] + dy;
            let row_ok = z >= 0 && y >= 0 && (z as usize) < s.z && (y as usize) < s.y;
            for dx in -w1..=w1 {
                let x = center[0] + dx;
                if row_ok && x >= 0 && (x as usize) < s.x {
                    out.push(f.get(z as usize, y as usize, x as usize).to_u32() as u16);
                } else {
                    out.push(0);
                }
            }
        }
    }
    out
}
