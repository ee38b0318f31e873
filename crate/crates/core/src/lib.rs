pub mod error;
pub mod exp;
pub mod hand;
pub mod planner;
pub mod resets;
pub mod rl;
pub mod rng;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
