#![no_std]
extern crate alloc;

pub mod efts;
pub mod error;
pub mod geometry;
pub mod grassmann;
pub mod manifolds;
pub mod morse;
pub mod quadrature;
pub mod sigma;
pub mod scalar;

pub use error::{Error, Result};
