//! 4D fluorescence volumes: container type, binary format, slice ingestion,
//! preprocessing filters, and subimage windows.

mod format;
mod preprocess;
mod slices;
mod subimage;

pub use format::{read_volume, read_volume_from, write_volume, write_volume_to, FORMAT_VERSION, MAGIC};
pub use preprocess::{median_filter, subtract_background};
pub use slices::{load_slices, SlicePattern};
pub use subimage::{extract_subimage, SubImage};

use crate::error::{Error, Result};

/// Physical z step relative to the xy pixel edge, used when nothing else is known.
pub const DEFAULT_Z_SCALE: f64 = 3.0;

/// Voxel storage type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dtype {
    U8,
    U16,
}

impl Dtype {
    pub fn code(self) -> u32 {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            1 => Ok(Dtype::U8),
            2 => Ok(Dtype::U16),
            other => Err(Error::UnknownDtype(other)),
        }
    }

    pub fn max_value(self) -> u16 {
        match self {
            Dtype::U8 => u8::MAX as u16,
            Dtype::U16 => u16::MAX,
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
        }
    }
}

/// Unsigned voxel sample; implemented for `u8` and `u16`.
pub trait Sample: Copy + Default + Ord + Send + Sync + 'static {
    const DTYPE: Dtype;
    fn to_u32(self) -> u32;
    /// Rounds and clamps into the representable range.
    fn from_f64(v: f64) -> Self;
}

impl Sample for u8 {
    const DTYPE: Dtype = Dtype::U8;
    #[inline]
    fn to_u32(self) -> u32 {
        self as u32
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, u8::MAX as f64) as u8
    }
}

impl Sample for u16 {
    const DTYPE: Dtype = Dtype::U16;
    #[inline]
    fn to_u32(self) -> u32 {
        self as u32
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, u16::MAX as f64) as u16
    }
}

/// Extent of a single 3D frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub z: usize,
    pub y: usize,
    pub x: usize,
}

impl Shape3 {
    pub fn new(z: usize, y: usize, x: usize) -> Self {
        Shape3 { z, y, x }
    }

    pub fn len(&self) -> usize {
        self.z * self.y * self.x
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.y + y) * self.x + x
    }

    /// Whether the voxel index `(x, y, z)` lies inside the frame.
    #[inline]
    pub fn contains(&self, v: [i64; 3]) -> bool {
        v[0] >= 0
            && v[1] >= 0
            && v[2] >= 0
            && (v[0] as usize) < self.x
            && (v[1] as usize) < self.y
            && (v[2] as usize) < self.z
    }
}

/// Dimensions `(T, Z, Y, X)` of a 4D volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub t: usize,
    pub z: usize,
    pub y: usize,
    pub x: usize,
}

impl Dims {
    pub fn new(t: usize, z: usize, y: usize, x: usize) -> Self {
        Dims { t, z, y, x }
    }

    pub fn frame_shape(&self) -> Shape3 {
        Shape3::new(self.z, self.y, self.x)
    }

    pub fn frame_len(&self) -> usize {
        self.z * self.y * self.x
    }

    pub fn len(&self) -> usize {
        self.t * self.frame_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.z == 0 || self.y == 0 || self.x == 0 {
            return Err(Error::InvalidDims(format!(
                "all of T,Z,Y,X must be positive, got {},{},{},{}",
                self.t, self.z, self.y, self.x
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for Dims {
    type Err = Error;

    /// Parses `T,Z,Y,X`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidDims(format!("{s:?}: {e}")))?;
        match parts.as_slice() {
            &[t, z, y, x] => Ok(Dims::new(t, z, y, x)),
            _ => Err(Error::InvalidDims(format!("{s:?}: expected T,Z,Y,X"))),
        }
    }
}

/// Dense voxel storage in t-major, then z, y, x order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Voxels {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

impl Voxels {
    pub fn len(&self) -> usize {
        match self {
            Voxels::U8(v) => v.len(),
            Voxels::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Voxels::U8(_) => Dtype::U8,
            Voxels::U16(_) => Dtype::U16,
        }
    }

    pub fn zeros(dtype: Dtype, len: usize) -> Self {
        match dtype {
            Dtype::U8 => Voxels::U8(vec![0; len]),
            Dtype::U16 => Voxels::U16(vec![0; len]),
        }
    }
}

/// A read-only view of one 3D frame.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a, S> {
    pub data: &'a [S],
    pub shape: Shape3,
}

impl<S: Sample> Frame<'_, S> {
    #[inline]
    pub fn get(&self, z: usize, y: usize, x: usize) -> S {
        self.data[self.shape.index(z, y, x)]
    }
}

/// A frame view whose sample type is only known at runtime.
#[derive(Clone, Copy, Debug)]
pub enum AnyFrame<'a> {
    U8(Frame<'a, u8>),
    U16(Frame<'a, u16>),
}

impl AnyFrame<'_> {
    pub fn shape(&self) -> Shape3 {
        match self {
            AnyFrame::U8(f) => f.shape,
            AnyFrame::U16(f) => f.shape,
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            AnyFrame::U8(_) => Dtype::U8,
            AnyFrame::U16(_) => Dtype::U16,
        }
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> u16 {
        match self {
            AnyFrame::U8(f) => f.get(z, y, x) as u16,
            AnyFrame::U16(f) => f.get(z, y, x),
        }
    }
}

/// Runs `$body` with `$f` bound to the typed [`Frame`] inside an [`AnyFrame`].
#[macro_export]
macro_rules! with_frame {
    ($any:expr, $f:ident => $body:expr) => {
        match $any {
            $crate::imagecore::AnyFrame::U8($f) => $body,
            $crate::imagecore::AnyFrame::U16($f) => $body,
        }
    };
}

/// Dense 4D intensity grid `(T, Z, Y, X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume4D {
    dims: Dims,
    voxels: Voxels,
    z_scale: f64,
}

impl Volume4D {
    pub fn new(dims: Dims, voxels: Voxels) -> Result<Self> {
        dims.validate()?;
        if voxels.len() != dims.len() {
            return Err(Error::InvalidDims(format!(
                "voxel count {} does not match {}x{}x{}x{} = {}",
                voxels.len(),
                dims.t,
                dims.z,
                dims.y,
                dims.x,
                dims.len()
            )));
        }
        Ok(Volume4D {
            dims,
            voxels,
            z_scale: DEFAULT_Z_SCALE,
        })
    }

    pub fn zeros(dims: Dims, dtype: Dtype) -> Result<Self> {
        dims.validate()?;
        Self::new(dims, Voxels::zeros(dtype, dims.len()))
    }

    pub fn with_z_scale(mut self, z_scale: f64) -> Result<Self> {
        self.set_z_scale(z_scale)?;
        Ok(self)
    }

    pub fn set_z_scale(&mut self, z_scale: f64) -> Result<()> {
        if !(z_scale > 0.0 && z_scale.is_finite()) {
            return Err(Error::Config(format!("z_scale must be positive, got {z_scale}")));
        }
        self.z_scale = z_scale;
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dtype(&self) -> Dtype {
        self.voxels.dtype()
    }

    pub fn z_scale(&self) -> f64 {
        self.z_scale
    }

    pub fn voxels(&self) -> &Voxels {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut Voxels {
        &mut self.voxels
    }

    pub fn into_voxels(self) -> Voxels {
        self.voxels
    }

    pub fn get(&self, t: usize, z: usize, y: usize, x: usize) -> u16 {
        let i = t * self.dims.frame_len() + self.dims.frame_shape().index(z, y, x);
        match &self.voxels {
            Voxels::U8(v) => v[i] as u16,
            Voxels::U16(v) => v[i],
        }
    }

    pub fn frame(&self, t: usize) -> Result<AnyFrame<'_>> {
        if t >= self.dims.t {
            return Err(Error::FrameOutOfRange {
                t,
                frames: self.dims.t,
            });
        }
        let n = self.dims.frame_len();
        let shape = self.dims.frame_shape();
        Ok(match &self.voxels {
            Voxels::U8(v) => AnyFrame::U8(Frame {
                data: &v[t * n..(t + 1) * n],
                shape,
            }),
            Voxels::U16(v) => AnyFrame::U16(Frame {
                data: &v[t * n..(t + 1) * n],
                shape,
            }),
        })
    }

    /// Keeps only the first `frames` frames.
    pub fn truncate_frames(&mut self, frames: usize) {
        let frames = frames.clamp(1, self.dims.t);
        let n = frames * self.dims.frame_len();
        match &mut self.voxels {
            Voxels::U8(v) => v.truncate(n),
            Voxels::U16(v) => v.truncate(n),
        }
        self.dims.t = frames;
    }
}
