pub mod error;
pub mod specfun;

pub use error::{Error, Result};
pub mod distributions;
pub mod outage;
pub mod mode_graph;
pub mod effective_capacity;
pub mod monte_carlo;
pub mod validation;
