//! Frequency-domain FLIM image restoration.
//!
//! Amplitude-weighted phasor planes (`A·G`, `A·S`) are blurred linearly by the
//! optical PSF, but the lifetime recovered from them is not: mixing two
//! emitters under the PSF both smears and *shifts* the apparent lifetime
//! interface. This crate models that forward process and undoes it with
//! Richardson-Lucy deconvolution (optionally total-variation regularized)
//! applied independently to each plane.
//!
//! Module map:
//!
//! * [`phasor`]: single-exponential phasors, mixtures, lifetime estimators.
//! * [`field`]: rasters ([`Plane`], [`ComplexField`], [`LifetimeMap`]).
//! * [`optics`]: Gaussian PSFs and direct / FFT convolution.
//! * [`deconv`]: RL and RL-TV iterations.
//! * [`phantom`]: two-fluorophore phantoms, noise injection, averaging.
//! * [`metrics`]: threshold boundary localization, lifetime RMSE, profiles.
//! * [`io`]: the `FLIMCF1` field file format and lifetime exports.

pub mod deconv;
pub mod error;
pub mod field;
pub mod io;
pub mod metrics;
pub mod optics;
pub mod phantom;
pub mod phasor;

pub use deconv::{deconvolve_field, ConvergenceTrace, DeconvConfig};
pub use error::{Error, Result};
pub use field::{ComplexField, LifetimeMap, Plane};
pub use optics::{convolve_field, gaussian_kernel, Boundary, Engine, Kernel};
pub use phasor::{ComplexSample, Fluorophore, ModulationSpec, PhasorPoint};
