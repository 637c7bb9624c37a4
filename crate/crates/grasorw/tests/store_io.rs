//! Store-level behavior: the worked byte-accounting example, loading
//! equivalence between full and partial images, and partition geometry.

mod common;

use std::collections::BTreeSet;

use grasorw::store::{block_of_in, GraphStore};

use common::{build_er_store, build_worked_example, degrees_of};

fn adjacency_full(store: &GraphStore, v: u64) -> Vec<u64> {
    let b = store.block_of(v).unwrap();
    let data = store.load_block_full(b).unwrap();
    data.adjacency(v).unwrap().to_vec()
}

#[test]
fn worked_example_byte_accounting() {
    let tmp = tempfile::tempdir().unwrap();
    let store = build_worked_example(tmp.path());
    assert_eq!(store.block_count(), 3);
    assert_eq!(store.vertex_count(), 9);
    for b in 0..3 {
        assert_eq!(
            store.block_range(b).unwrap(),
            (b as u64 * 3, b as u64 * 3 + 3)
        );
    }

    // Full load of block 1: 4 offset entries + 4 neighbor entries, 4 bytes each.
    let block1 = store.load_block_full(1).unwrap();
    assert_eq!(block1.loaded_bytes(), 32);

    // On-demand load of block 2 for vertex 6 alone: 2 offset entries +
    // 3 neighbors.
    let partial = store.load_block_on_demand(2, &[6]).unwrap();
    assert_eq!(partial.loaded_bytes(), 20);

    // Against loading both blocks fully (64 bytes), 52 bytes saves 18.75%.
    let block2 = store.load_block_full(2).unwrap();
    assert_eq!(block2.loaded_bytes(), 32);
    let saving = 1.0
        - (block1.loaded_bytes() + partial.loaded_bytes()) as f64
            / (block1.loaded_bytes() + block2.loaded_bytes()) as f64;
    assert!((saving - 0.1875).abs() < 1e-12);

    // The partial image resolves vertex 6 exactly as the full image does.
    assert_eq!(
        partial.adjacency(6).unwrap().to_vec(),
        block2.adjacency(6).unwrap().to_vec()
    );
    assert_eq!(partial.adjacency(6).unwrap().to_vec(), vec![0, 3, 7]);
    assert!(partial.adjacency(7).is_none(), "vertex 7 was not activated");
}

#[test]
fn empty_and_full_activation_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let store = build_worked_example(tmp.path());

    let empty = store.load_block_on_demand(2, &[]).unwrap();
    assert_eq!(empty.loaded_bytes(), 0);

    // Activating every vertex costs at least the full load's neighbor bytes
    // and resolves identically.
    for b in 0..store.block_count() {
        let (lo, hi) = store.block_range(b).unwrap();
        let all: Vec<u64> = (lo..hi).collect();
        let partial = store.load_block_on_demand(b, &all).unwrap();
        let full = store.load_block_full(b).unwrap();
        assert!(partial.loaded_neighbor_bytes() == full.loaded_neighbor_bytes());
        assert!(partial.loaded_bytes() >= full.loaded_neighbor_bytes());
        for v in lo..hi {
            assert_eq!(
                partial.adjacency(v).unwrap().to_vec(),
                full.adjacency(v).unwrap().to_vec(),
                "vertex {v} differs between partial and full images"
            );
        }
    }

    // Activated vertices outside the block are rejected.
    assert!(store.load_block_on_demand(1, &[6]).is_err());
}

#[test]
fn fetch_vertex_matches_block_images() {
    let tmp = tempfile::tempdir().unwrap();
    let store = build_worked_example(tmp.path());
    for v in 0..store.vertex_count() {
        assert_eq!(store.fetch_vertex(v).unwrap(), adjacency_full(&store, v));
    }
    // Vertex 8 is isolated.
    assert_eq!(store.fetch_vertex(8).unwrap(), Vec::<u64>::new());
    assert!(store.fetch_vertex(9).is_err());
    // fetch_vertex counts as vertex I/O with its offset entries.
    let before = store.counters().snapshot();
    store.fetch_vertex(6).unwrap();
    let diff = store.counters().snapshot().since(&before);
    assert_eq!(diff.vertex_io_count, 1);
    assert_eq!(diff.vertex_io_bytes, 20);
}

#[test]
fn block_of_matches_a_linear_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let (store, _) = build_er_store(tmp.path(), 1000, 8.0, 11, 10);
    let starts = store.starts();
    assert_eq!(starts.first(), Some(&0));
    assert_eq!(*starts.last().unwrap(), store.vertex_count());
    assert!(starts.windows(2).all(|w| w[0] < w[1]));

    let linear = |v: u64| {
        (0..store.block_count())
            .find(|&b| starts[b as usize] <= v && v < starts[b as usize + 1])
            .unwrap()
    };
    assert_eq!(store.block_of(0).unwrap(), 0);
    for b in 0..store.block_count() {
        let s = starts[b as usize];
        assert_eq!(store.block_of(s).unwrap(), b, "block start {s}");
    }
    let mut v = 7u64;
    for _ in 0..200 {
        v = (v * 2654435761) % store.vertex_count();
        assert_eq!(store.block_of(v).unwrap(), linear(v));
        assert_eq!(block_of_in(starts, v), linear(v));
    }
    assert!(store.block_of(store.vertex_count()).is_err());
}

#[test]
fn partitioned_blocks_fit_the_size_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let (store, edges_path) = build_er_store(tmp.path(), 1000, 8.0, 17, 10);
    let degrees = degrees_of(&edges_path, Some(1000));
    let w = store.id_width() as u64;
    let block_size = store.meta().block_size;
    // Recompute each block's byte footprint from first principles and check
    // both the limit and maximality (the next vertex would not fit).
    for b in 0..store.block_count() {
        let (lo, hi) = store.block_range(b).unwrap();
        let units: u64 = (lo..hi).map(|v| degrees[v as usize]).sum();
        let bytes = (hi - lo + 1 + units) * w;
        assert!(bytes <= block_size, "block {b}: {bytes} > {block_size}");
        if hi < store.vertex_count() {
            let grown = bytes + (1 + degrees[hi as usize]) * w;
            assert!(grown > block_size, "block {b} is not maximal");
        }
        // Full-load accounting agrees with the recomputation.
        assert_eq!(store.load_block_full(b).unwrap().loaded_bytes(), bytes);
    }
}

#[test]
fn wide_neighbor_ids_roundtrip() {
    // The 8-byte neighbor-ID path: same graph, same adjacency, double the
    // accounted bytes.
    let tmp = tempfile::tempdir().unwrap();
    let edges_path = tmp.path().join("edges.txt");
    common::write_edge_list(&edges_path, &common::worked_example_edges());
    let narrow = grasorw::store::partition_sequential(
        &edges_path,
        &tmp.path().join("narrow"),
        &grasorw::store::PartitionOptions {
            block_size: 32,
            id_width: 4,
        },
    )
    .unwrap();
    let wide = grasorw::store::partition_sequential(
        &edges_path,
        &tmp.path().join("wide"),
        &grasorw::store::PartitionOptions {
            block_size: 64,
            id_width: 8,
        },
    )
    .unwrap();
    assert_eq!(wide.id_width(), 8);
    assert_eq!(wide.starts(), narrow.starts());
    for v in 0..narrow.vertex_count() {
        assert_eq!(
            wide.fetch_vertex(v).unwrap(),
            narrow.fetch_vertex(v).unwrap()
        );
    }
    assert_eq!(wide.load_block_full(1).unwrap().loaded_bytes(), 64);
    assert_eq!(
        wide.load_block_on_demand(2, &[6]).unwrap().loaded_bytes(),
        40
    );
}

#[test]
fn stored_graph_is_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    let (store, _) = build_er_store(tmp.path(), 500, 6.0, 23, 4);
    let mut edges: BTreeSet<(u64, u64)> = BTreeSet::new();
    for v in 0..store.vertex_count() {
        for z in adjacency_full(&store, v) {
            edges.insert((v, z));
        }
    }
    for &(u, v) in &edges {
        assert!(edges.contains(&(v, u)), "missing reverse edge ({v}, {u})");
        assert_ne!(u, v, "self loop survived conversion");
    }
}

#[test]
fn a_block_of_isolated_vertices_loads_offsets_only() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("edges.txt");
    // Vertices 0..4 form a cycle; 4..8 are isolated (declared by self-loops).
    let mut edges: Vec<(u64, u64)> = (0..4u64).map(|v| (v, (v + 1) % 4)).collect();
    edges.extend((4..8u64).map(|v| (v, v)));
    common::write_edge_list(&path, &edges);
    let store = grasorw::store::partition_sequential(
        &path,
        &tmp.path().join("store"),
        &grasorw::store::PartitionOptions {
            block_size: 52,
            id_width: 4,
        },
    )
    .unwrap();
    // The cycle fills block 0 ((5 + 8) * 4 = 52 bytes); the isolated tail
    // forms its own block of offsets alone.
    assert_eq!(store.block_range(0).unwrap(), (0, 4));
    let last = store.block_count() - 1;
    let (lo, hi) = store.block_range(last).unwrap();
    assert!(lo >= 4);
    let data = store.load_block_full(last).unwrap();
    assert_eq!(data.loaded_neighbor_bytes(), 0);
    assert_eq!(data.loaded_bytes(), (hi - lo + 1) * 4);
    for v in lo..hi {
        assert!(data.adjacency(v).unwrap().is_empty());
    }
}

#[test]
fn touch_accounting_stays_within_loaded_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let store = build_worked_example(tmp.path());
    let data = store.load_block_full(0).unwrap();
    assert_eq!(data.touched_bytes(), 0);
    data.adjacency(0).unwrap();
    data.adjacency(0).unwrap(); // second touch does not double count
    let after_one = data.touched_bytes();
    assert!(after_one > 0);
    data.adjacency(0).unwrap();
    assert_eq!(data.touched_bytes(), after_one);
    data.adjacency(1).unwrap();
    data.adjacency(2).unwrap();
    assert!(data.touched_bytes() <= data.loaded_bytes());
    assert_eq!(data.touched_neighbor_bytes(), data.loaded_neighbor_bytes());
}
