//! Special functions, Gauss–Legendre quadrature and bracketing root finding.
//!
//! Everything here is a pure function of its arguments. Quadrature rules are
//! cached per node count behind a lock, so repeated integrals in sweeps do not
//! recompute Legendre roots.

mod quadrature;
mod roots;
mod special;

pub use quadrature::{integrate, GaussLegendre, GridSpec, QuadratureSpec, DEFAULT_NODES};
pub use roots::{bisect, DEFAULT_TOL};
pub(crate) use special::log_sum_exp;
pub use special::{
    beta_cdf, beta_sf, binomial_ln_pmf, binomial_pmf, binomial_tail, ln_beta, ln_choose, ln_gamma,
    std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf,
};
