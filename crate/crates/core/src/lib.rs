//! Algorithmic core of the grasorw random-walk engine.
//!
//! Everything in this crate is pure computation: the 128-bit walk-state
//! codec, first- and second-order transition sampling with a counter-based
//! RNG, the skewed-storage and bucket routing laws, and the linear cost
//! models behind the block-loading selector. All disk formats, the
//! block store, and the execution engine live in the companion `grasorw`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod regress;
pub mod rng;
pub mod route;
pub mod transition;
pub mod walk;

pub use regress::{BlockCostModel, LoadMode, Threshold};
pub use rng::{DrawStream, RngKey};
pub use transition::{Node2vecParams, Termination};
pub use walk::{Walk128, WalkFields};
