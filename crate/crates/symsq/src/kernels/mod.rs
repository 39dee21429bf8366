//! Special functions and the vertical-line integral transforms built on them.

pub mod bessel;
pub mod bump;
pub mod contour;
pub mod gamma;
pub mod quad;

pub use bessel::bessel_j;
pub use bump::{mellin, mellin_transform, BumpProfile, CompactWeight, FnWeight, SmoothBump, SupportEnd};
pub use contour::{
    kernel_h_ratio, kernel_phi, kernel_v, kernel_w_dual, ContourKernel, KernelCheck, KernelKind, LogGridKernel,
    QuadratureRule,
};
pub use gamma::{complex_gamma, ln_gamma};
