//! Simulation and verification toolkit for the block mean-field Ising model
//! with cyclic nearest-neighbour block coupling.
//!
//! ```
//! use blockspin::{landscape::classify_minimizers, ModelParams};
//!
//! let params = ModelParams::new(0.8, 0.25, 600, 6)?;
//! let landscape = classify_minimizers(&params)?;
//! assert!((landscape.m_star - 0.752).abs() < 1e-3);
//! # Ok::<(), blockspin::Error>(())
//! ```

pub mod chain;
pub mod error;
pub mod exact;
pub mod harness;
pub mod landscape;
pub mod model;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{BlockCounts, MagnetizationVector, ModelParams, ParamMode};
pub use spectral::CirculantSpec;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/landscape.md")]
    mod landscape {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/chain.md")]
    mod chain {}
    #[doc = include_str!("../../../book/src/sampler.md")]
    mod sampler {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
