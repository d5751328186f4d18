pub mod barenblatt;
pub mod cutoff;
pub mod divergences;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod linalg;
pub mod oracles;
pub mod pde;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
