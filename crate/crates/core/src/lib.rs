//! Thermoacoustic tomography with spherical acquisition.
//!
//! The measured data is the spherical Radon transform
//! `Rf(p, r) = ∫_{|x-p|=r} f dσ` of an absorption map `f` supported in the
//! unit ball, sampled at transducers `p` on the unit sphere. This crate
//! simulates that data exactly for sums of ellipsoid indicators and inverts
//! it with the two exact backprojection formulas
//!
//! ```text
//! f(x) = -1/(8π²) Δ_x ∫_{|p|=1} Rf(p, |x-p|) / |x-p| dp          (ρ-filtered)
//! f(x) = -1/(8π²)     ∫_{|p|=1} ∂²_r Rf(p, |x-p|) / |x-p| dp     (filtered)
//! ```
//!
//! as well as the older approximate formula which drops the `1/|x-p|`
//! weight.

// `!(x > 0.0)` is how NaN is rejected along with non-positive values, and the
// dense-matrix kernels read better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod recon;
pub mod sinogram;
pub mod vec3;
pub mod volume;

pub use error::{Error, Result};
pub use forward::{simulate, ForwardConfig};
pub use geometry::{gauss_legendre, QuadratureRule, RadialGrid, TransducerGrid};
pub use phantom::{Ellipsoid, Phantom};
pub use recon::{Method, ReconConfig};
pub use sinogram::{MaskRegion, ScanMask, Sinogram};
pub use volume::Volume;
