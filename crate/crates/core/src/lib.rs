pub mod distributions;
pub mod error;
pub mod market;
pub mod numerics;
pub mod wages;

pub use error::{Error, Result};
pub mod group_epsw;
pub mod no_epsw;
pub mod nongroup;
pub mod extensions;
pub mod oracle;
pub mod scenario;
pub mod cli;
