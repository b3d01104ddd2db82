pub mod analysis;
pub mod cell;
pub mod config;
pub mod covers;
pub mod error;
pub mod floquet;
pub mod groups;
pub mod linalg;
pub mod verify;

pub use error::{Error, Result};
