//! Poisson point processes on concrete σ-finite spaces, measure-preserving
//! actions on them, and the finite constructions that go with them:
//! mollification on the circle, random linear orders, dyadic measure
//! algebras, and a σ-finite measure without a locally finite model.

pub mod actions;
pub mod bits;
pub mod convolution;
pub mod counterexample;
pub mod error;
pub mod fixed;
pub mod measure;
pub mod orders;
pub mod perm;
pub mod point;
pub mod ppp;
pub mod rng;
pub mod special;
pub mod stats;
pub mod whirly;
pub mod window;

pub use error::{Error, Result};
