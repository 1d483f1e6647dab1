pub mod channel;
mod error;
pub mod matrix;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub mod montecarlo;
pub mod stats;
pub mod energy;
pub mod receiver;
pub mod bler;
pub mod comm;
pub mod feedback;
pub mod policy;
pub mod baselines;
pub mod analysis;
pub mod config;
pub mod persist;
pub mod csv;
pub mod experiments;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/autoencoder.md")]
    mod autoencoder {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/variance.md")]
    mod variance {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
