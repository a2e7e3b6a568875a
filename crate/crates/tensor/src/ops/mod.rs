mod conv;
mod elementwise;
mod linear;
mod pool;
mod sample;
mod shapeops;

pub use conv::conv2d;
pub use linear::matmul;
pub use pool::maxpool2d;
pub use sample::bilinear_sample;
pub use shapeops::concat_channels;
