//! Sphere-packing error exponents for discrete memoryless channels, with
//! the refined pre-factor machinery around them.
//!
//! All logarithms are natural; rates and exponents are in nats.

pub mod bound;
pub mod channel;
pub mod dist;
pub mod error;
pub mod info;
pub mod model;
pub mod np;
pub mod oracle;
pub mod saddle;
pub mod sharp;
pub mod shifted;
pub mod simplex;
pub mod study;

pub use channel::{Channel, ConditionalChannel};
pub use dist::Distribution;
pub use error::{Error, Result};
pub use model::ChannelModel;
