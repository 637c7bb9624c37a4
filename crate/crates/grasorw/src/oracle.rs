//! In-memory reference execution.
//!
//! The oracle holds the whole graph in RAM and advances each walk start to
//! finish in one loop, with the same transition code and the same keyed
//! draws as the disk engine. In deterministic mode the two must produce
//! byte-identical trajectory streams; the oracle never touches blocks,
//! pools, or schedulers, so any divergence is an engine bug.
//!
//! Also here: the exact second-order PageRank vector by power iteration on
//! the edge-edge chain, the ground truth for walk-based estimates.

use rand::rngs::SmallRng;
use rand::SeedableRng;

use grasorw_core::rng::mix64;
use grasorw_core::transition::{Node2vecParams, Termination};

use crate::engine::{check_terminate, sample_next, Draws, WalkModel};
use crate::error::Result;
use crate::sink::TrajectorySink;
use crate::store::GraphStore;

/// A CSR graph resident in memory.
pub struct MemGraph {
    offsets: Vec<u64>,
    neighbors: Vec<u64>,
}

impl MemGraph {
    pub fn from_store(store: &GraphStore) -> Result<MemGraph> {
        let mut offsets = Vec::with_capacity(store.vertex_count() as usize + 1);
        let mut neighbors = Vec::with_capacity(store.meta().edge_count as usize);
        offsets.push(0);
        for b in 0..store.block_count() {
            let data = store.load_block_full(b)?;
            let (lo, hi) = store.block_range(b)?;
            for v in lo..hi {
                let adj = data.adjacency(v).expect("full block");
                neighbors.extend_from_slice(&adj);
                offsets.push(neighbors.len() as u64);
            }
        }
        Ok(MemGraph { offsets, neighbors })
    }

    pub fn from_adjacency(adj: Vec<Vec<u64>>) -> MemGraph {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len() as u64);
        }
        MemGraph { offsets, neighbors }
    }

    pub fn vertex_count(&self) -> u64 {
        self.offsets.len() as u64 - 1
    }

    pub fn degree(&self, v: u64) -> u64 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn neighbors(&self, v: u64) -> &[u64] {
        let lo = self.offsets[v as usize] as usize;
        let hi = self.offsets[v as usize + 1] as usize;
        &self.neighbors[lo..hi]
    }

    pub fn edge_count(&self) -> u64 {
        self.neighbors.len() as u64
    }
}

/// Straight-line execution of the same task the engine runs.
pub fn oracle_run(
    g: &MemGraph,
    starts: &[(u64, u64)],
    model: WalkModel,
    termination: Termination,
    seed: u64,
    deterministic: bool,
    sink: &mut dyn TrajectorySink,
) -> Result<()> {
    termination.validate()?;
    let wants_traj = sink.wants_trajectories();
    let mut rng = SmallRng::seed_from_u64(mix64(seed ^ 0x4f52_4143_4c45));
    for &(source, count) in starts {
        for k in 0..count {
            let mut draws = if deterministic {
                Draws::Keyed {
                    seed,
                    source,
                    walk_index: k,
                }
            } else {
                Draws::Sequential(&mut rng)
            };
            let mut pre = source;
            let mut cur = source;
            let mut hop = 0u32;
            let mut traj = vec![source];
            // Identical per-hop draw protocol to the engine: the hop-0
            // termination coin at creation, each later hop's coin right
            // after the step that reached it.
            if !check_terminate(&termination, 0, &mut draws) {
                loop {
                    let cur_adj = g.neighbors(cur);
                    let pre_adj = if matches!(model, WalkModel::Node2vec(_)) && hop > 0 {
                        Some(g.neighbors(pre))
                    } else {
                        None
                    };
                    let Some(z) = sample_next(&model, pre, hop, cur_adj, pre_adj, &mut draws)
                    else {
                        break; // dead end
                    };
                    pre = cur;
                    cur = z;
                    hop += 1;
                    if wants_traj {
                        traj.push(z);
                    }
                    if check_terminate(&termination, hop, &mut draws) {
                        break;
                    }
                }
            }
            sink.walk_finished(
                source,
                cur,
                hop,
                if wants_traj { Some(&traj) } else { None },
            );
        }
    }
    Ok(())
}

/// Exact endpoint distribution of a second-order walk with restart from
/// `query`: continue with probability `continue_prob` at each hop, hard cap
/// at `max_length` vertices, first step uniform, later steps biased by
/// `params`. Power iteration over the directed-edge state space.
pub fn ppr_edge_chain_exact(
    g: &MemGraph,
    query: u64,
    continue_prob: f64,
    max_length: u32,
    params: &Node2vecParams,
) -> Vec<f64> {
    let n = g.vertex_count() as usize;
    let cap = max_length;
    let mut result = vec![0.0f64; n];
    // P(stop at hop 0).
    let stop0 = if cap == 1 { 1.0 } else { 1.0 - continue_prob };
    result[query as usize] += stop0;
    if cap == 1 || g.degree(query) == 0 {
        if g.degree(query) == 0 {
            // All residual mass dies at the query.
            result[query as usize] = 1.0;
        }
        return result;
    }

    // mu[e] = P(walk alive occupies directed edge e = (u -> v)).
    let mut mu = vec![0.0f64; g.edge_count() as usize];
    let dq = g.degree(query) as f64;
    let off_q = g.offsets[query as usize] as usize;
    for j in 0..g.degree(query) as usize {
        mu[off_q + j] = 1.0 / dq;
    }

    for k in 1..cap {
        // P(K = k): survive k coins, then stop (or hit the cap).
        let p_stop = if k == cap - 1 {
            continue_prob.powi(k as i32)
        } else {
            continue_prob.powi(k as i32) * (1.0 - continue_prob)
        };
        for u in 0..n {
            let lo = g.offsets[u] as usize;
            for (j, &v) in g.neighbors(u as u64).iter().enumerate() {
                result[v as usize] += p_stop * mu[lo + j];
            }
        }
        if k == cap - 1 {
            break;
        }
        // Advance the edge distribution one second-order step.
        let mut next = vec![0.0f64; mu.len()];
        for u in 0..n {
            let lo = g.offsets[u] as usize;
            for (j, &v) in g.neighbors(u as u64).iter().enumerate() {
                let mass = mu[lo + j];
                if mass == 0.0 {
                    continue;
                }
                let v_adj = g.neighbors(v);
                if v_adj.is_empty() {
                    // Dead end: every later stop time ends here, so the
                    // walk's whole remaining stop weight lands on v.
                    result[v as usize] += mass * continue_prob.powi(k as i32 + 1);
                    continue;
                }
                let u_adj = g.neighbors(u as u64);
                let weights =
                    grasorw_core::transition::node2vec_weights(u as u64, v_adj, u_adj, params);
                let total: f64 = weights.iter().sum();
                let lo_v = g.offsets[v as usize] as usize;
                for (jz, wz) in weights.iter().enumerate() {
                    next[lo_v + jz] += mass * wz / total;
                }
            }
        }
        mu = next;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sink::CollectSink;

    fn ring(n: u64) -> MemGraph {
        let adj: Vec<Vec<u64>> = (0..n).map(|v| vec![(v + n - 1) % n, (v + 1) % n]).collect();
        MemGraph::from_adjacency(adj)
    }

    #[test]
    fn unit_parameters_reduce_to_first_order_draw_for_draw() {
        // With p = q = 1 the biased weights are uniform, so under the same
        // keys the second-order walks equal the first-order walks exactly.
        let g = ring(30);
        let starts: Vec<(u64, u64)> = (0..30u64).map(|v| (v, 1)).collect();
        let term = Termination::FixedLength { length: 40 };
        let mut a = CollectSink::new(8);
        oracle_run(
            &g,
            &starts,
            WalkModel::Node2vec(Node2vecParams::new(1.0, 1.0).unwrap()),
            term,
            44,
            true,
            &mut a,
        )
        .unwrap();
        let mut b = CollectSink::new(8);
        oracle_run(&g, &starts, WalkModel::DeepWalk, term, 44, true, &mut b).unwrap();
        assert_eq!(a.into_bytes(), b.into_bytes());
    }

    #[test]
    fn empty_start_set_produces_empty_output() {
        let g = ring(5);
        let mut sink = CollectSink::new(4);
        oracle_run(
            &g,
            &[],
            WalkModel::DeepWalk,
            Termination::FixedLength { length: 10 },
            0,
            true,
            &mut sink,
        )
        .unwrap();
        assert!(sink.is_empty());
        assert!(sink.into_bytes().is_empty());
    }

    #[test]
    fn exact_ppr_sums_to_one() {
        let g = ring(12);
        let params = Node2vecParams::new(2.0, 0.5).unwrap();
        let dist = ppr_edge_chain_exact(&g, 3, 0.85, 20, &params);
        let total: f64 = dist.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");
        assert!(dist[3] > dist[9], "mass should concentrate near the query");
    }

    #[test]
    fn zero_decay_puts_all_mass_on_the_query() {
        let g = ring(6);
        let params = Node2vecParams::new(1.0, 1.0).unwrap();
        let dist = ppr_edge_chain_exact(&g, 2, 0.0, 20, &params);
        assert_eq!(dist[2], 1.0);
        assert!(dist.iter().enumerate().all(|(v, &m)| v == 2 || m == 0.0));
    }

    #[test]
    fn cap_one_stops_at_the_query() {
        let g = ring(6);
        let params = Node2vecParams::new(1.0, 1.0).unwrap();
        let dist = ppr_edge_chain_exact(&g, 4, 0.85, 1, &params);
        assert_eq!(dist[4], 1.0);
    }
}
