//! Detection and tracking of many visually identical globular cells in 4D
//! (time × z × y × x) fluorescence volumes.
//!
//! The pipeline is:
//!
//! 1. [`imagecore`]: load slices, remove background, median filter, store as a
//!    single binary container.
//! 2. [`detect`]: local-peak collection on the first frame followed by DP-means
//!    clustering.
//! 3. [`mrftree`]: Euclidean minimum spanning tree over the detected centroids,
//!    rooted at its hop-count center.
//! 4. [`track`]: a standard particle filter for the root cell and a spatial
//!    particle filter sweep along the tree for every other cell.
//! 5. [`simulate`] and [`evaluate`]: synthetic datasets with ground truth and
//!    the error/failure/detection metrics used to score them.
//!
//! All positions handled outside of [`imagecore`] are *physical*: x and y are
//! in pixel units and z is the slice index multiplied by the volume's
//! `z_scale`, so Euclidean distances are isotropic.

pub mod cli;
pub mod detect;
pub mod error;
pub mod evaluate;
pub mod geom;
pub mod imagecore;
pub mod keyvalue;
pub mod mrftree;
pub mod simulate;
pub mod track;
pub mod viewbundle;

pub use error::{Error, Result};
pub use geom::Point;
