//! Size caps for the dense code paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable overriding [`Limits::max_oracle_sites`].
pub const MAX_SITES_ENV: &str = "COMB_QMC_MAX_SITES";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest support any materialized dense operator may have
    /// (`2^12 x 2^12` complex entries is 256 MiB).
    pub max_dense_sites: usize,
    /// Largest volume `Λ_{n+1}` the brute-force oracle accepts.
    pub max_oracle_sites: usize,
    /// Deepest level the localized iterative evaluation accepts.
    pub max_level: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_dense_sites: 12, max_oracle_sites: 15, max_level: 6 }
    }
}

impl Limits {
    /// Defaults, with the oracle cap taken from the environment when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        if let Ok(raw) = std::env::var(MAX_SITES_ENV) {
            limits.max_oracle_sites = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{MAX_SITES_ENV}={raw:?} is not a site count")))?;
        }
        Ok(limits)
    }

    pub(crate) fn check_dense(&self, sites: usize) -> Result<()> {
        if sites > self.max_dense_sites {
            return Err(Error::VolumeTooLarge { sites, cap: self.max_dense_sites });
        }
        Ok(())
    }

    pub(crate) fn check_level(&self, n: usize) -> Result<()> {
        if n > self.max_level {
            return Err(Error::VolumeTooLarge { sites: crate::graph::volume_size(n), cap: crate::graph::volume_size(self.max_level) });
        }
        Ok(())
    }
}
