pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod norms;
pub mod numeric;
pub mod simbench;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
