//! A channel bundled with the quantities that fix its rate domain.

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::info::{capacity, r_infinity, Capacity};

/// A channel together with its capacity and zero-rate threshold `R_inf`.
///
/// Every exponent computation takes one of these so that the rate domain
/// `(R_inf, C)` is computed once.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    channel: Channel,
    capacity: Capacity,
    r_inf: f64,
}

impl ChannelModel {
    /// Fails when the channel has zero capacity (all rows identical), since
    /// the exponent is then undefined at every rate.
    pub fn new(channel: Channel) -> Result<Self> {
        let capacity = capacity(&channel)?;
        if capacity.upper <= 1e-12 {
            return Err(Error::domain("channel has zero capacity"));
        }
        let r_inf = r_infinity(&channel)?;
        Ok(Self { channel, capacity, r_inf })
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn capacity(&self) -> f64 {
        self.capacity.value
    }

    pub fn capacity_input(&self) -> &crate::Distribution {
        &self.capacity.input
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    /// Rejects rates outside the open interval `(R_inf, C)`.
    pub fn check_rate(&self, rate: f64) -> Result<()> {
        if !(rate.is_finite() && rate > self.r_inf && rate < self.capacity.value) {
            return Err(Error::domain(format!(
                "rate {rate} outside ({}, {})",
                self.r_inf, self.capacity.value
            )));
        }
        Ok(())
    }
}
