//! Ingestion of a directory of 2D grayscale slices.

use std::fmt::Write as _;
use std::path::Path;

use image::DynamicImage;

use super::{Dims, Dtype, Volume4D, Voxels};
use crate::error::{Error, Result};

/// Filename template with `{t}` and `{z}` index fields, optionally
/// zero-padded: `frame{t:03}_z{z:02}.png`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicePattern {
    parts: Vec<Part>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Part {
    Lit(String),
    T(usize),
    Z(usize),
}

impl SlicePattern {
    pub fn parse(template: &str) -> Result<Self> {
        let mut parts = Vec::new();
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                parts.push(Part::Lit(rest[..open].to_string()));
            }
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| Error::Config(format!("unclosed '{{' in pattern {template:?}")))?
                + open;
            let field = &rest[open + 1..close];
            let (name, width) = match field.split_once(':') {
                Some((n, w)) => {
                    let w = w
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad width in field {{{field}}}")))?;
                    (n, w)
                }
                None => (field, 0),
            };
            parts.push(match name {
                "t" => Part::T(width),
                "z" => Part::Z(width),
                _ => return Err(Error::Config(format!("unknown field {{{field}}} in pattern"))),
            });
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            parts.push(Part::Lit(rest.to_string()));
        }
        Ok(SlicePattern { parts })
    }

    pub fn render(&self, t: usize, z: usize) -> String {
        let mut s = String::new();
        for p in &self.parts {
            match p {
                Part::Lit(l) => s.push_str(l),
                Part::T(w) => write!(s, "{t:0w$}", w = *w).unwrap(),
                Part::Z(w) => write!(s, "{z:0w$}", w = *w).unwrap(),
            }
        }
        s
    }
}

/// Loads `T·Z` slices named by `pattern` from `dir` into a volume.
/// Slices are read t-major, then z; the volume dtype follows the first slice.
pub fn load_slices(dir: impl AsRef<Path>, pattern: &SlicePattern, dims: Dims) -> Result<Volume4D> {
    let dir = dir.as_ref();
    let frame_len = dims.frame_len();
    let slice_len = dims.y * dims.x;
    let mut voxels: Option<Voxels> = None;

    for t in 0..dims.t {
        for z in 0..dims.z {
            let path = dir.join(pattern.render(t, z));
            if !path.is_file() {
                return Err(Error::MissingSlice(path));
            }
            let img = image::open(&path).map_err(|e| Error::UnsupportedImage {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            if img.width() as usize != dims.x || img.height() as usize != dims.y {
                return Err(Error::SliceDimensions {
                    path,
                    found_w: img.width(),
                    found_h: img.height(),
                    expected_w: dims.x as u32,
                    expected_h: dims.y as u32,
                });
            }
            let store = voxels.get_or_insert_with(|| Voxels::zeros(slice_dtype(&img), dims.len()));
            let off = t * frame_len + z * slice_len;
            copy_slice(&img, &path, store, off..off + slice_len)?;
        }
    }
    Volume4D::new(dims, voxels.expect("dims validated non-empty"))
}

fn slice_dtype(img: &DynamicImage) -> Dtype {
    match img {
        DynamicImage::ImageLuma16(_) => Dtype::U16,
        _ => Dtype::U8,
    }
}

fn copy_slice(img: &DynamicImage, path: &Path, store: &mut Voxels, range: std::ops::Range<usize>) -> Result<()> {
    let bits = img.color().bits_per_pixel() / img.color().channel_count() as u16;
    if bits > 16 {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!("unsupported bit depth {bits}"),
        });
    }
    match (img, store) {
        (DynamicImage::ImageLuma8(g), Voxels::U8(v)) => v[range].copy_from_slice(g.as_raw()),
        (DynamicImage::ImageLuma8(g), Voxels::U16(v)) => {
            for (d, s) in v[range].iter_mut().zip(g.as_raw()) {
                *d = *s as u16;
            }
        }
        (DynamicImage::ImageLuma16(g), Voxels::U16(v)) => v[range].copy_from_slice(g.as_raw()),
        (DynamicImage::ImageLuma16(_), Voxels::U8(_)) => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: "16-bit slice in an 8-bit series".into(),
            })
        }
        (other, _) => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                reason: format!("not a grayscale image ({:?})", other.color()),
            })
        }
    }
    Ok(())
}
