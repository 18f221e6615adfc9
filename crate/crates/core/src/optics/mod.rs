//! PSF synthesis and the forward blur model.

mod convolve;
mod fft;
mod kernel;

pub use convolve::{convolve_field, convolve_plane, Boundary, Convolver, Engine};
pub use kernel::{gaussian_kernel, mirror, Kernel, KernelDims, DEFAULT_PSF_SIGMA_PX};
