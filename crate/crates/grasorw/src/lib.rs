//! Out-of-core random-walk engine over block-partitioned CSR graphs.
//!
//! The store keeps the graph on disk in CSR blocks; walks live in per-block
//! pools (also on disk once they grow) and are advanced block pair by block
//! pair: a current block plus one ancillary block per bucket, scheduled
//! triangularly so each unordered block pair is resident once per sweep. A
//! learned linear cost model decides per ancillary load whether to read the
//! whole block or only the activated vertices.

pub mod cli;
pub mod engine;
pub mod error;
pub mod loader;
pub mod metrics;
pub mod oracle;
pub mod pools;
pub mod sink;
pub mod store;
pub mod synth;
pub mod tasks;

pub use error::{Error, Result};
