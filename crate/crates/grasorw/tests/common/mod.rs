//! Shared fixtures for integration tests.

// Each test binary pulls in the subset it needs.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use grasorw::store::{partition_sequential, GraphStore, PartitionOptions};
use grasorw::synth::{self, SyntheticKind};

pub fn write_edge_list(path: &Path, edges: &[(u64, u64)]) {
    let mut text = String::new();
    for (u, v) in edges {
        writeln!(text, "{u} {v}").unwrap();
    }
    std::fs::write(path, text).unwrap();
}

/// The nine-vertex, three-block graph behind the on-demand byte-accounting
/// example: blocks {0,1,2}, {3,4,5}, {6,7,8}; each block's CSR slice is
/// exactly 32 bytes with 4-byte entries, and vertex 6 has degree 3.
pub fn worked_example_edges() -> Vec<(u64, u64)> {
    // The trailing self-loop declares the isolated vertex 8.
    vec![(0, 3), (0, 6), (1, 2), (3, 6), (4, 5), (6, 7), (8, 8)]
}

pub fn build_worked_example(dir: &Path) -> GraphStore {
    let edges_path = dir.join("edges.txt");
    write_edge_list(&edges_path, &worked_example_edges());
    partition_sequential(
        &edges_path,
        &dir.join("store"),
        &PartitionOptions {
            block_size: 32,
            id_width: 4,
        },
    )
    .unwrap()
}

/// Degrees of a symmetrized, deduplicated, self-loop-free edge list.
pub fn degrees_of(edges_path: &Path, n_hint: Option<u64>) -> Vec<u64> {
    let text = std::fs::read_to_string(edges_path).unwrap();
    let mut pairs: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut max_id = n_hint.map(|n| n - 1).unwrap_or(0);
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let u: u64 = it.next().unwrap().parse().unwrap();
        let v: u64 = it.next().unwrap().parse().unwrap();
        max_id = max_id.max(u).max(v);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    let mut deg = vec![0u64; max_id as usize + 1];
    for (u, v) in pairs {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    deg
}

/// Block count the sequential greedy cut produces for a block size, given
/// degrees. Mirrors the partitioner's accounting: a block spanning
/// vertices `[a, b)` costs `(b - a + 1 + units) * w` bytes.
fn greedy_block_count(degrees: &[u64], id_width: u64, block_size: u64) -> u64 {
    let mut blocks = 0u64;
    let mut span = 0u64;
    let mut units = 0u64;
    for &d in degrees {
        let next_bytes = (span + 2 + units + d) * id_width;
        if span > 0 && next_bytes > block_size {
            blocks += 1;
            span = 1;
            units = d;
        } else {
            span += 1;
            units += d;
        }
    }
    if span > 0 {
        blocks += 1;
    }
    blocks
}

/// Smallest block size for which the greedy cut yields exactly
/// `target` blocks.
pub fn block_size_for(degrees: &[u64], id_width: u64, target: u64) -> u64 {
    let total: u64 = (degrees.len() as u64 + 1 + degrees.iter().sum::<u64>()) * id_width;
    let mut lo = 1u64;
    let mut hi = total + id_width;
    // count is nonincreasing in block size.
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if greedy_block_count(degrees, id_width, mid) <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    assert_eq!(
        greedy_block_count(degrees, id_width, lo),
        target,
        "no block size yields exactly {target} blocks"
    );
    lo
}

/// Generates an ER graph and partitions it into exactly `blocks` blocks.
pub fn build_er_store(
    dir: &Path,
    n: u64,
    avg_degree: f64,
    seed: u64,
    blocks: u64,
) -> (GraphStore, PathBuf) {
    let edges_path = dir.join("edges.txt");
    synth::generate(
        SyntheticKind::ErdosRenyi { n, avg_degree },
        seed,
        &edges_path,
    )
    .unwrap();
    let degrees = degrees_of(&edges_path, Some(n));
    let block_size = block_size_for(&degrees, 4, blocks);
    let store = partition_sequential(
        &edges_path,
        &dir.join("store"),
        &PartitionOptions {
            block_size,
            id_width: 4,
        },
    )
    .unwrap();
    assert_eq!(store.block_count() as u64, blocks);
    (store, edges_path)
}
