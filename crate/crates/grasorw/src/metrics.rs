//! Run metrics: I/O counters, per-sweep load accounting, utilization
//! samples, and stage timers. Serialized as a single JSON object.

use serde::{Deserialize, Serialize};

use crate::store::IoSnapshot;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepMetrics {
    pub index: u64,
    pub current_loads: u64,
    pub ancillary_loads: u64,
    /// Minimum hop over all pooled walks when the sweep closed.
    pub min_pooled_hop: Option<u32>,
    pub pooled_walks: u64,
}

impl SweepMetrics {
    pub fn block_loads(&self) -> u64 {
        self.current_loads + self.ancillary_loads
    }
}

/// One ancillary load's utilization, in neighbor bytes (offset-entry
/// overhead excluded from both sides).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub slot: u64,
    pub loaded_neighbor_bytes: u64,
    pub touched_neighbor_bytes: u64,
}

impl UtilizationSample {
    pub fn ratio(&self) -> Option<f64> {
        if self.loaded_neighbor_bytes == 0 {
            None
        } else {
            Some(self.touched_neighbor_bytes as f64 / self.loaded_neighbor_bytes as f64)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub block_io_count: u64,
    pub block_io_bytes: u64,
    pub on_demand_io_count: u64,
    pub on_demand_io_bytes: u64,
    pub vertex_io_count: u64,
    pub vertex_io_bytes: u64,
    pub walk_io_bytes: u64,
    pub steps_sampled: u64,
    pub walks_started: u64,
    pub walks_finished: u64,
    pub slots_executed: u64,
    pub sweeps_executed: u64,
    pub sweeps: Vec<SweepMetrics>,
    pub io_utilization: Vec<UtilizationSample>,
    pub wall_seconds: f64,
    pub load_seconds: f64,
    pub execute_seconds: f64,
}

impl Metrics {
    pub fn absorb_io(&mut self, io: &IoSnapshot) {
        self.block_io_count = io.block_io_count;
        self.block_io_bytes = io.block_io_bytes;
        self.on_demand_io_count = io.on_demand_io_count;
        self.on_demand_io_bytes = io.on_demand_io_bytes;
        self.vertex_io_count = io.vertex_io_count;
        self.vertex_io_bytes = io.vertex_io_bytes;
    }

    /// Full and on-demand block loads together: the block-I/O events the
    /// sweep bounds count.
    pub fn block_loads(&self) -> u64 {
        self.block_io_count + self.on_demand_io_count
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
