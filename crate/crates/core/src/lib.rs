pub mod altopt;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod noma;
pub mod power_alloc;
pub mod report;
pub mod sdp;

pub use error::{Error, Result};
