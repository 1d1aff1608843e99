//! Numerical building blocks: compensated sums, divided differences,
//! quadrature, the Gauss hypergeometric series and Matsubara sums.

pub mod contour;
pub mod hyp2f1;
pub mod matsubara;
pub mod phi;
pub mod quad;
pub mod sum;

pub use hyp2f1::{hyp2f1, Hyp2F1Args, Hyp2F1Value};
pub use matsubara::{
    noise_kernel_direct, noise_kernel_modes, noise_kernel_modes_for_tolerance, xi_q0, xi_q0_closed,
    xi_q0_sum, ModeExpansion, SeriesValue,
};
