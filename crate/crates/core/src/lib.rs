//! Newton-polygon analysis of bivariate phases at the origin: superadapted
//! coordinates, growth indices, a two-dimensional resolution into monomial
//! charts, and numerical checks of sublevel and oscillatory asymptotics.

pub mod adapt;
pub mod error;
pub mod exact_poly;
pub mod measure_lab;
pub mod newton;
pub mod resolve;
pub mod rational;
pub mod registry;
pub mod roots;
pub mod stability;

pub use error::{Error, Result};
pub use exact_poly::PuiseuxPoly;
pub use rational::Rational;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
