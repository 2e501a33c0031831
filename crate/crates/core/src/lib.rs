//! Coherent optical link simulation, fractional-Fourier time-frequency
//! imaging, and multi-task neural regression of link impairments.
//!
//! The crate is organized as a processing chain:
//!
//! * [`frame`] — PDM-QPSK payload generation, chirp training sequence,
//!   RRC pulse shaping, frame assembly/extraction.
//! * [`frft`] — discrete fractional Fourier transform engine with an
//!   independent quadrature oracle and multi-order scanning.
//! * [`channel`] — WDM multiplexing, split-step propagation, chromatic
//!   dispersion, cascaded-waveplate PMD, and end-of-link ASE loading.
//! * [`rxdsp`] — receiver DSP (CD compensation, CMA, carrier phase) and
//!   the GSNR/OSNR/SNR_NL label algebra.
//! * [`tfimage`] — sinogram construction and filtered back-projection
//!   into the 100x100x2 time-frequency feature image.
//! * [`nn`] — minimal reverse-mode tensor engine, the multi-task vision
//!   transformer, the dense baseline, and Adam.
//! * [`dataset`], [`train`], [`eval`], [`config`] — dataset generation,
//!   training orchestration, evaluation reports, configuration.
//!
//! All numerics are generic over the scalar type via [`num::Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fft;
pub mod frame;
pub mod frft;
pub mod nn;
pub mod num;
pub mod rxdsp;
pub mod signal;
pub mod testkit;
pub mod tfimage;
pub mod train;

pub use error::{Error, Result};
pub use num::{Real, C};

/// Default scalar used by the pipeline.
pub type Scalar = f64;
/// Complex sample at the default precision.
pub type C64 = num_complex::Complex<f64>;
/// Single-polarization signal at the default precision.
pub type Signal = signal::ComplexSignal<f64>;
/// Dual-polarization signal at the default precision.
pub type DualPol = signal::DualPolSignal<f64>;
/// Time-frequency feature image at the default precision.
pub type Image = tfimage::TfImage<f64>;
