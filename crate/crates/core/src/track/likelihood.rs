//! Subimage similarity likelihood.
//!
//! A particle's weight is `exp(-‖y_t(x) − y_1(x̂)‖² / (2σ²W))` where `y_t(x)`
//! is the window around the particle in frame t, `y_1(x̂)` the template
//! captured around the detected centroid in the first frame, and `W` the
//! number of window positions where template plus current is non-zero.

use crate::error::Result;
use crate::geom::{to_voxel, Point};
use crate::imagecore::{extract_subimage, AnyFrame, Frame, Sample, SubImage, Volume4D};

/// First-frame appearance of a cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub half_widths: [usize; 3],
    pub values: Vec<u16>,
}

impl Template {
    pub fn capture(volume: &Volume4D, t: usize, center: &Point, half_widths: [usize; 3]) -> Result<Self> {
        let s = extract_subimage(volume, t, to_voxel(center, volume.z_scale()), half_widths)?;
        Ok(Self::from(s))
    }
}

impl From<SubImage> for Template {
    fn from(s: SubImage) -> Self {
        Template {
            half_widths: s.half_widths,
            values: s.values,
        }
    }
}

/// Squared intensity difference and `W` between two equally sized windows.
pub fn mismatch(current: &[u16], template: &[u16]) -> (u64, u32) {
    debug_assert_eq!(current.len(), template.len());
    let mut ssd = 0u64;
    let mut nonzero = 0u32;
    for (&a, &b) in current.iter().zip(template) {
        let d = a as i64 - b as i64;
        ssd += (d * d) as u64;
        nonzero += ((a as u32 + b as u32) != 0) as u32;
    }
    (ssd, nonzero)
}

/// `-ssd / (2σ²W)`, or 0 when `W = 0`.
#[inline]
pub fn log_weight(ssd: u64, nonzero: u32, sigma_lik2: f64) -> f64 {
    if nonzero == 0 {
        0.0
    } else {
        -(ssd as f64) / (2.0 * sigma_lik2 * nonzero as f64)
    }
}

/// Likelihood of `current` against `template` as plain windows.
pub fn window_likelihood(current: &[u16], template: &[u16], sigma_lik2: f64) -> f64 {
    let (ssd, w) = mismatch(current, template);
    log_weight(ssd, w, sigma_lik2).exp()
}

/// Mismatch of the frame window centered on voxel `center` against the
/// template, with out-of-volume positions read as 0.
pub fn frame_mismatch(frame: &AnyFrame<'_>, center: [i64; 3], template: &Template) -> (u64, u32) {
    crate::with_frame!(*frame, f => frame_mismatch_typed(&f, center, template))
}

fn frame_mismatch_typed<S: Sample>(f: &Frame<'_, S>, center: [i64; 3], template: &Template) -> (u64, u32) {
    let [w1, w2, w3] = template.half_widths.map(|w| w as i64);
    let s = f.shape;
    let width = (2 * w1 + 1) as usize;
    let x0 = center[0] - w1;
    let inside = x0 >= 0
        && center[1] - w2 >= 0
        && center[2] - w3 >= 0
        && center[0] + w1 < s.x as i64
        && center[1] + w2 < s.y as i64
        && center[2] + w3 < s.z as i64;

    let mut ssd = 0u64;
    let mut nonzero = 0u32;
    let mut rows = template.values.chunks_exact(width);
    for dz in -w3..=w3 {
        let z = center[2] + dz;
        for dy in -w2..=w2 {
            let y = center[1] + dy;
            let trow = rows.next().expect("template matches window");
            if inside {
                let start = s.index(z as usize, y as usize, x0 as usize);
                for (&a, &b) in f.data[start..start + width].iter().zip(trow) {
                    let a = a.to_u32() as i64;
                    let d = a - b as i64;
                    ssd += (d * d) as u64;
                    nonzero += ((a as u32 + b as u32) != 0) as u32;
                }
            } else {
                let row_ok = z >= 0 && y >= 0 && (z as usize) < s.z && (y as usize) < s.y;
                for (i, &b) in trow.iter().enumerate() {
                    let x = x0 + i as i64;
                    let a = if row_ok && x >= 0 && (x as usize) < s.x {
                        f.get(z as usize, y as usize, x as usize).to_u32() as i64
                    } else {
                        0
                    };
                    let d = a - b as i64;
                    ssd += (d * d) as u64;
                    nonzero += ((a as u32 + b as u32) != 0) as u32;
                }
            }
        }
    }
    (ssd, nonzero)
}

/// Log-likelihood of a particle at physical position `particle`.
pub fn log_likelihood(frame: &AnyFrame<'_>, z_scale: f64, particle: &Point, template: &Template, sigma_lik2: f64) -> f64 {
    let (ssd, w) = frame_mismatch(frame, to_voxel(particle, z_scale), template);
    log_weight(ssd, w, sigma_lik2)
}

/// Unnormalized particle weight at frame `t`.
pub fn likelihood(volume: &Volume4D, t: usize, particle: &Point, template: &Template, sigma_lik2: f64) -> Result<f64> {
    let frame = volume.frame(t)?;
    Ok(log_likelihood(&frame, volume.z_scale(), particle, template, sigma_lik2).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{Dims, Voxels};
    use proptest::prelude::*;

    #[test]
    fn identical_windows_weigh_one() {
        let t = [3u16, 0, 7, 9];
        assert_eq!(window_likelihood(&t, &t, 10.0), 1.0);
    }

    #[test]
    fn single_voxel_difference_of_sigma_root_two() {
        // W = 1 and difference σ√2 gives exp(-2σ² / 2σ²) = e^-1. σ² = 8 keeps it integral.
        let sigma2 = 8.0;
        let w = window_likelihood(&[4, 0], &[0, 0], sigma2);
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn all_zero_windows_are_uniform() {
        assert_eq!(window_likelihood(&[0; 5], &[0; 5], 1.0), 1.0);
    }

    #[test]
    fn frame_mismatch_matches_gathered_window() {
        let dims = Dims::new(1, 4, 6, 7);
        let data: Vec<u16> = (0..dims.len() as u16).map(|i| (i * 37) % 251).collect();
        let v = Volume4D::new(dims, Voxels::U16(data)).unwrap();
        let tmpl = Template::from(extract_subimage(&v, 0, [3, 3, 2], [2, 1, 1]).unwrap());
        let frame = v.frame(0).unwrap();
        for c in [[3i64, 3, 2], [0, 0, 0], [6, 5, 3], [-2, 1, 1], [9, 9, 9]] {
            let cur = extract_subimage(&v, 0, c, [2, 1, 1]).unwrap();
            assert_eq!(frame_mismatch(&frame, c, &tmpl), mismatch(&cur.values, &tmpl.values), "center {c:?}");
        }
    }

    proptest! {
        #[test]
        fn likelihood_is_symmetric(a in prop::collection::vec(0u16..300, 27), b in prop::collection::vec(0u16..300, 27), s in 1.0..1e5f64) {
            prop_assert_eq!(window_likelihood(&a, &b, s), window_likelihood(&b, &a, s));
        }
    }
}
