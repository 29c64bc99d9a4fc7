//! Block scrambling image encryption, a JPEG transmission channel and the
//! extended jigsaw puzzle solver used to attack the cipher, with the
//! direct / neighbor / largest-component scores and an experiment harness.

pub mod channel;
pub mod cipher;
pub mod error;
pub mod harness;
pub mod keystream;
pub mod metrics;
pub mod ppm;
pub mod raster;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use raster::{partition, reassemble, BlockGrid, RasterImage};
pub use transform::{apply_transform, invert_transform, BlockTransform, ColorPerm, Inversion, Rotation};
