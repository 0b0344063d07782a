//! Array geometry and run configuration shared by the validator, the
//! interconnect planner, and the simulator.

use thiserror::Error;

use crate::model::ADDRESS_SPACE;

/// Nodes on one die in the reference configuration.
pub const NODES_PER_CHIP: u32 = 3200;

/// Chiplets that can be chained under the default policy.
pub const MAX_CHIPS: u32 = 21;

/// Reference clock for the bandwidth and power figures.
pub const DEFAULT_CLOCK_HZ: u64 = 50_000_000;

/// Broadcast slot scheduling mode.
///
/// Dense runs one slot per node per epoch; sparse emits slots only for
/// nodes whose previous output was nonzero (firing nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlotMode {
    #[default]
    Dense,
    Sparse,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{requested} nodes exceed the 16-bit address space ({ADDRESS_SPACE})")]
    AddressSpaceExceeded { requested: u64 },
    #[error("{chips} chips exceed the {max}-chiplet chaining limit")]
    ChipLimitExceeded { chips: u32, max: u32 },
    #[error("nodes_per_chip must be at least 1")]
    EmptyChip,
    #[error("clock frequency must be positive")]
    ZeroClock,
}

/// Array geometry plus run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub total_nodes: u32,
    pub nodes_per_chip: u32,
    pub clock_hz: u64,
    pub mode: SlotMode,
    pub max_epochs: u32,
    /// Stop early once an epoch leaves every node output unchanged.
    pub halt_on_fixed_point: bool,
    /// Enforce the 21-chiplet chaining limit (default policy).
    pub enforce_chip_limit: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            total_nodes: NODES_PER_CHIP,
            nodes_per_chip: NODES_PER_CHIP,
            clock_hz: DEFAULT_CLOCK_HZ,
            mode: SlotMode::Dense,
            max_epochs: 1,
            halt_on_fixed_point: false,
            enforce_chip_limit: true,
        }
    }
}

impl SystemConfig {
    /// One full 3200-node die at 50 MHz.
    pub fn single_chip() -> Self {
        Self::default()
    }

    /// Geometry sized to `total_nodes` on dies of `nodes_per_chip`.
    pub fn with_geometry(total_nodes: u32, nodes_per_chip: u32) -> Self {
        Self {
            total_nodes,
            nodes_per_chip,
            ..Self::default()
        }
    }

    /// Chip count implied by the geometry (last die may be partially used).
    pub fn chips(&self) -> u32 {
        self.total_nodes.div_ceil(self.nodes_per_chip)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if u64::from(self.total_nodes) > u64::from(ADDRESS_SPACE) {
            return Err(ConfigError::AddressSpaceExceeded {
                requested: u64::from(self.total_nodes),
            });
        }
        if self.nodes_per_chip == 0 {
            return Err(ConfigError::EmptyChip);
        }
        if self.clock_hz == 0 {
            return Err(ConfigError::ZeroClock);
        }
        if self.enforce_chip_limit && self.chips() > MAX_CHIPS {
            return Err(ConfigError::ChipLimitExceeded {
                chips: self.chips(),
                max: MAX_CHIPS,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_one_reference_die() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.total_nodes, 3200);
        assert_eq!(cfg.chips(), 1);
        assert_eq!(cfg.clock_hz, 50_000_000);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn full_address_space_needs_21_chips() {
        let cfg = SystemConfig::with_geometry(65_536, 3200);
        assert_eq!(cfg.chips(), 21);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn zero_clock_rejected() {
        let cfg = SystemConfig {
            clock_hz: 0,
            ..SystemConfig::default()
        };
        assert_eq!(cfg.validate(), Err(ConfigError::ZeroClock));
    }

    #[test]
    fn chip_limit_enforced_under_default_policy() {
        let mut cfg = SystemConfig::with_geometry(2200, 100);
        assert_eq!(cfg.chips(), 22);
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::ChipLimitExceeded { chips: 22, max: 21 })
        );
        cfg.enforce_chip_limit = false;
        assert!(cfg.validate().is_ok());
    }
}
