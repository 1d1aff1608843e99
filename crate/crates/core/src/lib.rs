pub mod coefficients;
pub mod error;
pub mod fpe;
pub mod io;
pub mod model;
pub mod propagator;
pub mod response;
pub mod sde;
pub mod source;
pub mod special;
pub mod stats;
pub mod suite;
pub mod validation;

pub use error::{Error, Result};
pub use model::{PhysicalParams, RawParams, Regime, UnitSystem};
