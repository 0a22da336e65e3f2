pub mod quat;
pub mod quadrature;
pub mod coeffs;
pub mod ode;
pub mod riccati;
pub mod linear_system;
pub mod scenario;
