pub mod bv;
pub mod cli;
pub mod copula;
pub mod empirical;
pub mod error;
pub mod index;
pub mod resampling;
pub mod seeding;
pub mod stieltjes;

pub use error::{Error, Result};
