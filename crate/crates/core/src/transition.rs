//! First- and second-order transition sampling and termination policies.
//!
//! The graph is unweighted, so the first-order distribution is uniform over
//! the current vertex's neighbors. The second-order distribution biases each
//! candidate `z` by where it sits relative to the previous vertex `u`:
//! weight `1/p` for returning to `u`, `1` for a common neighbor of `u` and
//! the current vertex, and `1/q` otherwise.

use alloc::vec::Vec;
use core::fmt;

use crate::rng::{DrawStream, RngKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node2vecParams {
    /// Return parameter; weight 1/p for stepping back to the previous vertex.
    pub p: f64,
    /// In-out parameter; weight 1/q for leaving the previous vertex's neighborhood.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidParam(pub &'static str);

impl fmt::Display for InvalidParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameter: {}", self.0)
    }
}

impl core::error::Error for InvalidParam {}

impl Node2vecParams {
    pub fn new(p: f64, q: f64) -> Result<Self, InvalidParam> {
        // The comparisons also reject NaN.
        if p.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) || !p.is_finite() {
            return Err(InvalidParam("p must be a positive real"));
        }
        if q.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) || !q.is_finite() {
            return Err(InvalidParam("q must be a positive real"));
        }
        Ok(Node2vecParams { p, q })
    }
}

/// When a walk stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Exactly `length` vertices (fewer only at a dead end).
    FixedLength { length: u32 },
    /// Continue with probability `continue_prob` at each hop, hard cap at
    /// `max_length` vertices.
    GeometricCapped { continue_prob: f64, max_length: u32 },
}

impl Termination {
    /// The walk encoding caps hops at 10 bits, so at most 1024 vertices.
    pub const MAX_WALK_LENGTH: u32 = 1024;

    pub fn validate(&self) -> Result<(), InvalidParam> {
        match *self {
            Termination::FixedLength { length } => {
                if length == 0 || length > Self::MAX_WALK_LENGTH {
                    return Err(InvalidParam("length must be in 1..=1024"));
                }
            }
            Termination::GeometricCapped {
                continue_prob,
                max_length,
            } => {
                // continue_prob == 0 is the degenerate stop-immediately limit;
                // it is accepted so a zero decay factor runs instead of erroring.
                if !(0.0..1.0).contains(&continue_prob) {
                    return Err(InvalidParam("continue_prob must be in [0, 1)"));
                }
                if max_length == 0 || max_length > Self::MAX_WALK_LENGTH {
                    return Err(InvalidParam("max_length must be in 1..=1024"));
                }
            }
        }
        Ok(())
    }

    pub fn max_vertices(&self) -> u32 {
        match *self {
            Termination::FixedLength { length } => length,
            Termination::GeometricCapped { max_length, .. } => max_length,
        }
    }
}

/// Shortest-hop class of `z` as seen from the previous vertex `u`:
/// 0 if `z == u`, 1 if `z` is a neighbor of `u`, 2 otherwise.
///
/// `u_adj` must be sorted ascending.
#[inline]
pub fn hop_distance(u: u64, z: u64, u_adj: &[u64]) -> u8 {
    if z == u {
        0
    } else if u_adj.binary_search(&z).is_ok() {
        1
    } else {
        2
    }
}

#[inline]
fn biased_weight(u: u64, z: u64, u_adj: &[u64], params: &Node2vecParams) -> f64 {
    match hop_distance(u, z, u_adj) {
        0 => 1.0 / params.p,
        1 => 1.0,
        _ => 1.0 / params.q,
    }
}

/// Unnormalized second-order weights aligned with `v_adj`.
pub fn node2vec_weights(u: u64, v_adj: &[u64], u_adj: &[u64], params: &Node2vecParams) -> Vec<f64> {
    v_adj
        .iter()
        .map(|&z| biased_weight(u, z, u_adj, params))
        .collect()
}

/// Inverse-CDF sample from the second-order distribution using one uniform
/// draw. Two passes over `v_adj`, no allocation. Returns `None` at a dead
/// end (`v_adj` empty).
pub fn node2vec_next_with(
    u: u64,
    v_adj: &[u64],
    u_adj: &[u64],
    params: &Node2vecParams,
    unit: f64,
) -> Option<u64> {
    if v_adj.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &z in v_adj {
        total += biased_weight(u, z, u_adj, params);
    }
    let target = unit * total;
    let mut cum = 0.0;
    for &z in v_adj {
        cum += biased_weight(u, z, u_adj, params);
        if target < cum {
            return Some(z);
        }
    }
    Some(*v_adj.last().unwrap())
}

pub fn node2vec_next(
    u: u64,
    v_adj: &[u64],
    u_adj: &[u64],
    params: &Node2vecParams,
    key: RngKey,
) -> Option<u64> {
    node2vec_next_with(u, v_adj, u_adj, params, key.draw_unit(DrawStream::Step))
}

/// Uniform first-order sample over `v_adj`.
pub fn deepwalk_next_with(v_adj: &[u64], unit: f64) -> Option<u64> {
    if v_adj.is_empty() {
        return None;
    }
    let idx = ((unit * v_adj.len() as f64) as usize).min(v_adj.len() - 1);
    Some(v_adj[idx])
}

pub fn deepwalk_next(v_adj: &[u64], key: RngKey) -> Option<u64> {
    deepwalk_next_with(v_adj, key.draw_unit(DrawStream::Step))
}

/// Decides whether a walk at the given hop stops before taking another step.
/// `unit` is consumed only by the geometric policy.
#[inline]
pub fn should_terminate_with(t: &Termination, hop: u32, unit: f64) -> bool {
    match *t {
        Termination::FixedLength { length } => hop >= length - 1,
        Termination::GeometricCapped {
            continue_prob,
            max_length,
        } => hop >= max_length - 1 || unit >= continue_prob,
    }
}

pub fn should_terminate(t: &Termination, hop: u32, key: RngKey) -> bool {
    match t {
        Termination::FixedLength { .. } => should_terminate_with(t, hop, 0.0),
        Termination::GeometricCapped { .. } => {
            should_terminate_with(t, hop, key.draw_unit(DrawStream::Terminate))
        }
    }
}

/// Whether a termination policy draws a coin at each hop. Callers using a
/// sequential RNG consult this to keep draw order well-defined.
#[inline]
pub fn termination_draws_coin(t: &Termination) -> bool {
    matches!(t, Termination::GeometricCapped { .. })
}
