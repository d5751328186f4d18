//! Independent checks of the closed forms: quadrature, sampling, discrete
//! optimal transport and the entropy-production identity.

pub mod checks;
pub mod quadrature;
pub mod sampling;
pub mod transport;
