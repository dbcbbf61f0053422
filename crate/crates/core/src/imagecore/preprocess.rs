//! Background subtraction and median filtering.

use rayon::prelude::*;

use super::{Sample, Shape3, Volume4D, Voxels};
use crate::error::{Error, Result};

/// Subtracts each `(t, z)` slice's mean intensity from that slice, clamping at 0.
pub fn subtract_background(v: &Volume4D) -> Volume4D {
    let slice_len = v.dims().y * v.dims().x;
    let mut out = v.clone();
    match out.voxels_mut() {
        Voxels::U8(d) => subtract_slices(d, slice_len),
        Voxels::U16(d) => subtract_slices(d, slice_len),
    }
    out
}

fn subtract_slices<S: Sample>(data: &mut [S], slice_len: usize) {
    data.par_chunks_mut(slice_len).for_each(|slice| {
        let sum: u64 = slice.iter().map(|s| s.to_u32() as u64).sum();
        let mean = sum as f64 / slice.len() as f64;
        for s in slice.iter_mut() {
            *s = S::from_f64((s.to_u32() as f64 - mean).max(0.0));
        }
    });
}

/// Median filter over a `(wx, wy, wz)` window within each frame.
///
/// Border voxels take the median of the in-bounds part of the window only.
/// With an even number of in-bounds values the lower median is used, so the
/// output is always one of the input values.
pub fn median_filter(v: &Volume4D, window: [usize; 3]) -> Result<Volume4D> {
    if window.iter().any(|&w| w == 0 || w % 2 == 0) {
        return Err(Error::EvenWindow(window));
    }
    let shape = v.dims().frame_shape();
    let frame_len = shape.len();
    let mut out = v.clone();
    match (v.voxels(), out.voxels_mut()) {
        (Voxels::U8(src), Voxels::U8(dst)) => median_frames(src, dst, frame_len, shape, window),
        (Voxels::U16(src), Voxels::U16(dst)) => median_frames(src, dst, frame_len, shape, window),
        _ => unreachable!("clone preserves dtype"),
    }
    Ok(out)
}

fn median_frames<S: Sample>(src: &[S], dst: &mut [S], frame_len: usize, shape: Shape3, window: [usize; 3]) {
    dst.par_chunks_mut(frame_len)
        .zip(src.par_chunks(frame_len))
        .for_each(|(d, s)| median_frame(s, d, shape, window));
}

fn median_frame<S: Sample>(src: &[S], dst: &mut [S], shape: Shape3, window: [usize; 3]) {
    let [hx, hy, hz] = window.map(|w| w / 2);
    let mut buf: Vec<S> = Vec::with_capacity(window.iter().product());
    for z in 0..shape.z {
        let (z0, z1) = (z.saturating_sub(hz), (z + hz).min(shape.z - 1));
        for y in 0..shape.y {
            let (y0, y1) = (y.saturating_sub(hy), (y + hy).min(shape.y - 1));
            for x in 0..shape.x {
                let (x0, x1) = (x.saturating_sub(hx), (x + hx).min(shape.x - 1));
                buf.clear();
                for zz in z0..=z1 {
                    for yy in y0..=y1 {
                        let row = shape.index(zz, yy, 0);
                        buf.extend_from_slice(&src[row + x0..=row + x1]);
                    }
                }
                let mid = (buf.len() - 1) / 2;
                let (_, m, _) = buf.select_nth_unstable(mid);
                dst[shape.index(z, y, x)] = *m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{Dims, Dtype};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vol_u8(dims: Dims, data: Vec<u8>) -> Volume4D {
        Volume4D::new(dims, Voxels::U8(data)).unwrap()
    }

    fn data_u8(v: &Volume4D) -> &[u8] {
        match v.voxels() {
            Voxels::U8(d) => d,
            _ => panic!("u8 expected"),
        }
    }

    #[test]
    fn constant_slice_goes_to_zero() {
        let v = vol_u8(Dims::new(1, 1, 2, 2), vec![7; 4]);
        assert_eq!(data_u8(&subtract_background(&v)), &[0, 0, 0, 0]);
    }

    #[test]
    fn subtracts_slice_mean_with_clamp() {
        let v = vol_u8(Dims::new(1, 1, 1, 4), vec![0, 0, 0, 8]);
        assert_eq!(data_u8(&subtract_background(&v)), &[0, 0, 0, 6]);
        let z = vol_u8(Dims::new(1, 1, 1, 4), vec![0; 4]);
        assert_eq!(data_u8(&subtract_background(&z)), &[0; 4]);
    }

    #[test]
    fn background_is_per_slice() {
        // Two z-slices with different backgrounds.
        let v = vol_u8(Dims::new(1, 2, 1, 2), vec![10, 20, 100, 100]);
        assert_eq!(data_u8(&subtract_background(&v)), &[0, 5, 0, 0]);
    }

    #[test]
    fn impulse_is_removed() {
        let mut d = vec![0u8; 25];
        d[12] = 255;
        let v = vol_u8(Dims::new(1, 1, 5, 5), d);
        let m = median_filter(&v, [3, 3, 1]).unwrap();
        assert!(data_u8(&m).iter().all(|&x| x == 0));
    }

    #[test]
    fn constant_volume_unchanged() {
        let v = Volume4D::new(Dims::new(2, 3, 4, 5), Voxels::U16(vec![321; 120])).unwrap();
        assert_eq!(median_filter(&v, [3, 3, 3]).unwrap(), v);
    }

    #[test]
    fn even_window_rejected() {
        let v = Volume4D::zeros(Dims::new(1, 1, 3, 3), Dtype::U8).unwrap();
        assert!(matches!(median_filter(&v, [3, 2, 1]), Err(Error::EvenWindow([3, 2, 1]))));
        assert!(median_filter(&v, [0, 1, 1]).is_err());
    }

    /// Sort-and-middle at every voxel, written independently of the filter.
    fn brute_median(v: &Volume4D, window: [usize; 3]) -> Vec<u16> {
        let d = v.dims();
        let h = window.map(|w| (w / 2) as i64);
        let mut out = Vec::with_capacity(d.len());
        for t in 0..d.t {
            for z in 0..d.z as i64 {
                for y in 0..d.y as i64 {
                    for x in 0..d.x as i64 {
                        let mut vals = Vec::new();
                        for zz in z - h[2]..=z + h[2] {
                            for yy in y - h[1]..=y + h[1] {
                                for xx in x - h[0]..=x + h[0] {
                                    if zz >= 0 && yy >= 0 && xx >= 0 && zz < d.z as i64 && yy < d.y as i64 && xx < d.x as i64 {
                                        vals.push(v.get(t, zz as usize, yy as usize, xx as usize));
                                    }
                                }
                            }
                        }
                        vals.sort();
                        out.push(vals[(vals.len() - 1) / 2]);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_on_random_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let data: Vec<u8> = (0..25).map(|_| rng.gen()).collect();
            let v = vol_u8(Dims::new(1, 1, 5, 5), data);
            let m = median_filter(&v, [3, 3, 1]).unwrap();
            let got: Vec<u16> = data_u8(&m).iter().map(|&x| x as u16).collect();
            assert_eq!(got, brute_median(&v, [3, 3, 1]));
        }
    }

    proptest! {
        #[test]
        fn background_output_bounded(data in prop::collection::vec(any::<u8>(), 12)) {
            let v = vol_u8(Dims::new(1, 2, 2, 3), data.clone());
            let out = subtract_background(&v);
            let o = data_u8(&out);
            for (a, b) in o.iter().zip(&data) {
                prop_assert!(a <= b);
            }
            for slice in o.chunks(6) {
                prop_assert_eq!(*slice.iter().min().unwrap(), 0);
            }
        }

        #[test]
        fn median_values_come_from_window(data in prop::collection::vec(any::<u8>(), 36)) {
            let v = vol_u8(Dims::new(1, 1, 6, 6), data);
            let m = median_filter(&v, [3, 3, 1]).unwrap();
            let o = data_u8(&m);
            for y in 0..6usize {
                for x in 0..6usize {
                    let mut lo = u16::MAX;
                    let mut hi = 0;
                    for yy in y.saturating_sub(1)..=(y + 1).min(5) {
                        for xx in x.saturating_sub(1)..=(x + 1).min(5) {
                            let s = v.get(0, 0, yy, xx);
                            lo = lo.min(s);
                            hi = hi.max(s);
                        }
                    }
                    let got = o[y * 6 + x] as u16;
                    prop_assert!(lo <= got && got <= hi);
                }
            }
        }
    }
}
