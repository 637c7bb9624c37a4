//! Placement laws for persisted walks and in-memory buckets.
//!
//! Triangular engine: a walk whose endpoints sit in blocks `pre` and `cur`
//! is stored in the pool of block `min(pre, cur)` (skewed storage), and in
//! a time slot for current block `b` it lands in the bucket of its other
//! endpoint's block, which is always greater than `b`. The plain-bucket
//! engine keeps the traditional law: pool of the current vertex's block,
//! buckets keyed by the previous vertex's block.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteError {
    /// A persisted walk may never have both endpoints in one block.
    SameBlock { block: u32 },
    /// The walk does not belong to the pool it was drained from.
    WrongPool { pool: u32, pre: u32, cur: u32 },
    /// The walk's block set does not contain the resident pair.
    NotResident {
        pre: u32,
        cur: u32,
        current: u32,
        ancillary: u32,
    },
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RouteError::SameBlock { block } => {
                write!(f, "walk has both endpoints in block {block}")
            }
            RouteError::WrongPool { pool, pre, cur } => {
                write!(f, "walk ({pre}, {cur}) does not belong to pool {pool}")
            }
            RouteError::NotResident {
                pre,
                cur,
                current,
                ancillary,
            } => write!(
                f,
                "walk ({pre}, {cur}) outside resident blocks ({current}, {ancillary})"
            ),
        }
    }
}

impl core::error::Error for RouteError {}

/// Skewed storage law: pool of `min(pre, cur)`.
#[inline]
pub fn skewed_pool(pre_block: u32, cur_block: u32) -> Result<u32, RouteError> {
    if pre_block == cur_block {
        return Err(RouteError::SameBlock { block: pre_block });
    }
    Ok(pre_block.min(cur_block))
}

/// Plain-bucket storage law: pool of the current vertex's block.
#[inline]
pub fn plain_pool(pre_block: u32, cur_block: u32) -> Result<u32, RouteError> {
    if pre_block == cur_block {
        return Err(RouteError::SameBlock { block: pre_block });
    }
    Ok(cur_block)
}

/// Bucket for a drained walk in the triangular engine: the endpoint block
/// that is not the current block. Always greater than `current`.
#[inline]
pub fn bucket_for(pre_block: u32, cur_block: u32, current: u32) -> Result<u32, RouteError> {
    if pre_block == cur_block {
        return Err(RouteError::SameBlock { block: pre_block });
    }
    let partner = if pre_block == current {
        cur_block
    } else if cur_block == current {
        pre_block
    } else {
        return Err(RouteError::WrongPool {
            pool: current,
            pre: pre_block,
            cur: cur_block,
        });
    };
    debug_assert!(partner > current, "skewed storage violated");
    Ok(partner)
}

/// Bucket for a drained walk in the plain-bucket engine: keyed by the
/// previous vertex's block; the current vertex must be in `current`.
#[inline]
pub fn plain_bucket_for(pre_block: u32, cur_block: u32, current: u32) -> Result<u32, RouteError> {
    if pre_block == cur_block {
        return Err(RouteError::SameBlock { block: pre_block });
    }
    if cur_block != current {
        return Err(RouteError::WrongPool {
            pool: current,
            pre: pre_block,
            cur: cur_block,
        });
    }
    Ok(pre_block)
}

/// Where an updated walk goes after it leaves the resident block pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkRoute {
    /// Persist into the pool of this block.
    Pool(u32),
    /// Append to this slot's not-yet-executed bucket (bucket-extending).
    Bucket(u32),
}

/// Routing for the triangular engine, for a walk that stopped updating with
/// previous block `pre`, current block `cur`, while current block `b` and
/// ancillary block `i` were resident. Exactly one of four cases applies:
///
/// * `cur < b`: pool `cur`.
/// * `b < cur < i`: pool `b` if `pre == b`, else pool `cur`.
/// * `cur > i`, `pre == b`: bucket `cur` (executed later in this slot).
/// * `cur > i`, `pre == i`: pool `i`.
pub fn route_after_update(pre: u32, cur: u32, b: u32, i: u32) -> Result<WalkRoute, RouteError> {
    if pre != b && pre != i {
        return Err(RouteError::NotResident {
            pre,
            cur,
            current: b,
            ancillary: i,
        });
    }
    if cur == b || cur == i {
        // Still resident: the update loop should not have stopped.
        return Err(RouteError::NotResident {
            pre,
            cur,
            current: b,
            ancillary: i,
        });
    }
    if cur < b {
        Ok(WalkRoute::Pool(cur))
    } else if cur < i {
        if pre == b {
            Ok(WalkRoute::Pool(b))
        } else {
            Ok(WalkRoute::Pool(cur))
        }
    } else if pre == b {
        Ok(WalkRoute::Bucket(cur))
    } else {
        Ok(WalkRoute::Pool(i))
    }
}

/// Closed-form sweep bounds: total block loads in one pass over all
/// current blocks, for the triangular and plain schedules.
pub fn triangular_sweep_bound(block_count: u64) -> u64 {
    if block_count == 0 {
        return 0;
    }
    (block_count + 2) * (block_count - 1) / 2
}

pub fn plain_sweep_bound(block_count: u64) -> u64 {
    block_count * block_count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn skewed_pool_is_the_min_block() {
        assert_eq!(skewed_pool(2, 0).unwrap(), 0);
        assert_eq!(skewed_pool(0, 2).unwrap(), 0);
        assert!(matches!(
            skewed_pool(3, 3),
            Err(RouteError::SameBlock { block: 3 })
        ));
    }

    #[test]
    fn bucket_assignment_uses_the_other_endpoint() {
        assert_eq!(bucket_for(1, 3, 1).unwrap(), 3);
        assert_eq!(bucket_for(5, 1, 1).unwrap(), 5);
        assert!(bucket_for(1, 1, 1).is_err());
        assert!(bucket_for(2, 3, 1).is_err());
    }

    #[test]
    fn plain_bucket_assignment_keys_on_previous_block() {
        assert_eq!(plain_bucket_for(4, 1, 1).unwrap(), 4);
        assert!(plain_bucket_for(4, 2, 1).is_err());
        assert!(plain_bucket_for(1, 1, 1).is_err());
    }

    #[test]
    fn routing_covers_the_four_cases() {
        // cur < b
        assert_eq!(route_after_update(1, 0, 1, 3).unwrap(), WalkRoute::Pool(0));
        // b < cur < i, pre == b
        assert_eq!(route_after_update(1, 2, 1, 3).unwrap(), WalkRoute::Pool(1));
        // b < cur < i, pre == i
        assert_eq!(route_after_update(3, 2, 1, 3).unwrap(), WalkRoute::Pool(2));
        // cur > i, pre == b: bucket-extending
        assert_eq!(
            route_after_update(1, 6, 1, 4).unwrap(),
            WalkRoute::Bucket(6)
        );
        // cur > i, pre == i
        assert_eq!(route_after_update(4, 6, 1, 4).unwrap(), WalkRoute::Pool(4));
        // still resident is an error
        assert!(route_after_update(1, 1, 1, 4).is_err());
        assert!(route_after_update(1, 4, 1, 4).is_err());
        assert!(route_after_update(7, 9, 1, 4).is_err());
    }

    #[test]
    fn sweep_bounds_match_the_closed_forms() {
        assert_eq!(triangular_sweep_bound(17), 152);
        assert_eq!(plain_sweep_bound(17), 289);
        assert_eq!(triangular_sweep_bound(1), 0);
        assert_eq!(plain_sweep_bound(1), 1);
    }

    proptest! {
        /// Every pool produced by routing equals the skewed law, and every
        /// valid input hits exactly one case.
        #[test]
        fn routing_pools_agree_with_skewed_storage(
            b in 0u32..20,
            i_off in 1u32..20,
            cur in 0u32..64,
            pre_is_b in proptest::bool::ANY,
        ) {
            let i = b + i_off;
            let pre = if pre_is_b { b } else { i };
            prop_assume!(cur != b && cur != i);
            match route_after_update(pre, cur, b, i).unwrap() {
                WalkRoute::Pool(p) => prop_assert_eq!(p, skewed_pool(pre, cur).unwrap()),
                WalkRoute::Bucket(target) => {
                    prop_assert_eq!(target, cur);
                    prop_assert!(pre == b && cur > i);
                }
            }
        }

        #[test]
        fn bucket_indices_exceed_the_current_block(
            b in 0u32..20,
            other in 0u32..40,
        ) {
            prop_assume!(other != b);
            let lo = b.min(other);
            // Drained from pool lo == min: both orientations.
            if lo == b {
                prop_assert!(bucket_for(b, other, b).unwrap() > b);
                prop_assert!(bucket_for(other, b, b).unwrap() > b);
            }
        }
    }
}
