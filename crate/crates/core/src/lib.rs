pub mod circle;
pub mod config;
pub mod corpus;
pub mod dyadic;
pub mod error;
pub mod kernels;
pub mod lab;
pub mod operators;
pub mod sequences;
pub mod suites;

pub use error::{Error, Result};
