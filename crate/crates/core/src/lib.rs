pub mod barrier;
pub mod closed_form;
pub mod error;
pub mod experiment;
pub mod gradients;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod two_user;

pub use error::{Error, Result};
