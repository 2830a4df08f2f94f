pub mod constructions;
pub mod integrand;
pub mod interval;
pub mod laminate;
pub mod obstacle;
pub mod scalar;
pub mod sym2;
pub mod synth;
pub mod verifier;
pub mod wavecone;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
