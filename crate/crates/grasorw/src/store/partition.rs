//! Edge-list import and graph partitioning.
//!
//! Input is whitespace-separated `src dst` lines; `#` starts a comment
//! line. The graph is symmetrized (each edge stored in both directions),
//! self-loops are dropped, and parallel edges are deduplicated. Sequential
//! partitioning cuts the ID axis greedily into maximal ranges whose CSR
//! bytes fit the block size; a single vertex whose adjacency alone exceeds
//! the block size gets its own oversized block. Custom partitioning takes a
//! per-vertex block assignment, renumbers vertices so each block is an
//! ID-contiguous range, and emits the old-ID table alongside the store.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use grasorw_core::walk;

use crate::error::{Error, Result};
use crate::store::{
    GraphMeta, GraphStore, CSR_FILE, INDEX_FILE, MAX_BLOCKS, META_FILE, META_MAGIC, META_VERSION,
    REMAP_FILE, START_VERTEX_FILE,
};

#[derive(Debug, Clone, Copy)]
pub struct PartitionOptions {
    pub block_size: u64,
    /// Neighbor-ID width in bytes, 4 or 8.
    pub id_width: u8,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            block_size: 16 << 20,
            id_width: 4,
        }
    }
}

/// Sequential partition: vertices in ID order, blocks cut at the size limit.
pub fn partition_sequential(
    edge_list: &Path,
    out_dir: &Path,
    opts: &PartitionOptions,
) -> Result<GraphStore> {
    check_id_width(opts.id_width)?;
    let adj = build_adjacency(edge_list, None)?;
    let starts = cut_blocks(&adj.offsets, opts.id_width as u64, opts.block_size)?;
    write_store(out_dir, &adj, &starts, opts.id_width, opts.block_size, None)?;
    GraphStore::open(out_dir)
}

/// Custom partition from a per-vertex block assignment. The assignment file
/// holds either one block ID per line (line i assigns vertex i) or explicit
/// `vertex block` pairs. Vertices are renumbered so every block is an
/// ID-contiguous range; `vertex_remap.bin` records new -> old IDs.
pub fn import_partition(
    edge_list: &Path,
    block_file: &Path,
    out_dir: &Path,
    id_width: u8,
) -> Result<GraphStore> {
    check_id_width(id_width)?;
    let assignment = read_assignment(block_file)?;
    let n = assignment.len() as u64;
    if n == 0 {
        return Err(Error::Parse {
            path: block_file.to_path_buf(),
            line: 0,
            msg: "assignment declares no vertices".into(),
        });
    }

    // Dense block relabeling in ascending original block-ID order.
    let mut block_ids: Vec<u32> = assignment.to_vec();
    block_ids.sort_unstable();
    block_ids.dedup();
    if block_ids.len() as u64 > MAX_BLOCKS {
        return Err(Error::TooManyBlocks(block_ids.len() as u64));
    }
    let dense = |b: u32| block_ids.binary_search(&b).unwrap() as u32;

    // Stable renumbering: sort old vertex IDs by (block, old id).
    let mut order: Vec<u64> = (0..n).collect();
    order.sort_by_key(|&v| (dense(assignment[v as usize]), v));
    let old_of_new = order;
    let mut new_of_old = vec![0u64; n as usize];
    for (new, &old) in old_of_new.iter().enumerate() {
        new_of_old[old as usize] = new as u64;
    }

    let remap = move |v: u64| -> Result<u64> {
        if v >= n {
            return Err(Error::MissingAssignment(v));
        }
        Ok(new_of_old[v as usize])
    };
    let adj = build_adjacency_sized(edge_list, n, Some(&remap))?;

    // Block boundaries follow the assignment exactly.
    let mut starts = vec![0u64; block_ids.len() + 1];
    for &b in &assignment {
        starts[dense(b) as usize + 1] += 1;
    }
    for i in 1..starts.len() {
        starts[i] += starts[i - 1];
    }
    for w in starts.windows(2) {
        if w[1] - w[0] > walk::MAX_OFFSET + 1 {
            return Err(Error::InvalidStore(
                "a block's span exceeds the 28-bit offset limit".into(),
            ));
        }
    }

    // Informational block size: the largest block's CSR footprint.
    let wbytes = id_width as u64;
    let block_size = starts
        .windows(2)
        .map(|w| {
            (w[1] - w[0] + 1 + adj.offsets[w[1] as usize] - adj.offsets[w[0] as usize]) * wbytes
        })
        .max()
        .unwrap_or(0);

    write_store(
        out_dir,
        &adj,
        &starts,
        id_width,
        block_size,
        Some(&old_of_new),
    )?;
    GraphStore::open(out_dir)
}

fn check_id_width(w: u8) -> Result<()> {
    if w == 4 || w == 8 {
        Ok(())
    } else {
        Err(Error::Config(format!("id width must be 4 or 8, got {w}")))
    }
}

struct Adjacency {
    /// CSR offsets in neighbor units, length vertex_count + 1.
    offsets: Vec<u64>,
    neighbors: Vec<u64>,
}

impl Adjacency {
    fn vertex_count(&self) -> u64 {
        self.offsets.len() as u64 - 1
    }
}

fn parse_edges<F: FnMut(u64, u64) -> Result<()>>(path: &Path, mut emit: F) -> Result<()> {
    let file = File::open(path)?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let mut line = String::new();
    let mut lineno = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse_one = |tok: Option<&str>| -> std::result::Result<u64, String> {
            let tok = tok.ok_or("expected `src dst`")?;
            tok.parse::<u64>()
                .map_err(|_| format!("bad vertex id `{tok}`"))
        };
        let src = parse_one(parts.next());
        let dst = parse_one(parts.next());
        let (src, dst) = match (src, dst, parts.next()) {
            (Ok(s), Ok(d), None) => (s, d),
            (Err(msg), _, _) | (_, Err(msg), _) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg,
                })
            }
            (_, _, Some(extra)) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("trailing token `{extra}`"),
                })
            }
        };
        if src > walk::MAX_SOURCE || dst > walk::MAX_SOURCE {
            return Err(Error::VertexIdTooLarge(src.max(dst)));
        }
        // Self-loops are dropped from the adjacency but still declare
        // their vertex, so callers see every id.
        emit(src, dst)?;
    }
    Ok(())
}

fn build_adjacency(path: &Path, remap: Option<&dyn Fn(u64) -> Result<u64>>) -> Result<Adjacency> {
    // First pass just to size the vertex universe.
    let mut max_id = None::<u64>;
    parse_edges(path, |u, v| {
        let m = u.max(v);
        max_id = Some(max_id.map_or(m, |prev: u64| prev.max(m)));
        Ok(())
    })?;
    let Some(max_id) = max_id else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "edge list declares no vertices".into(),
        });
    };
    build_adjacency_sized(path, max_id + 1, remap)
}

fn build_adjacency_sized(
    path: &Path,
    vertex_count: u64,
    remap: Option<&dyn Fn(u64) -> Result<u64>>,
) -> Result<Adjacency> {
    let n = vertex_count as usize;
    let map = |v: u64| -> Result<u64> {
        match remap {
            Some(f) => f(v),
            None => Ok(v),
        }
    };

    // Degree pass (symmetrized, duplicates still in, self-loops dropped).
    let mut degrees = vec![0u64; n];
    parse_edges(path, |u, v| {
        let (u, v) = (map(u)?, map(v)?);
        if u >= vertex_count || v >= vertex_count {
            return Err(Error::MissingAssignment(u.max(v)));
        }
        if u != v {
            degrees[u as usize] += 1;
            degrees[v as usize] += 1;
        }
        Ok(())
    })?;

    let mut offsets = vec![0u64; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + degrees[i];
    }
    let total = offsets[n] as usize;
    let mut neighbors = vec![0u64; total];
    let mut cursor = offsets.clone();
    parse_edges(path, |u, v| {
        let (u, v) = (map(u)?, map(v)?);
        if u != v {
            neighbors[cursor[u as usize] as usize] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize] as usize] = u;
            cursor[v as usize] += 1;
        }
        Ok(())
    })?;

    // Sort each list and drop parallel edges, compacting in place.
    let mut write = 0usize;
    let mut new_offsets = vec![0u64; n + 1];
    for v in 0..n {
        let (lo, hi) = (offsets[v] as usize, offsets[v + 1] as usize);
        neighbors[lo..hi].sort_unstable();
        let mut prev = None;
        for i in lo..hi {
            let x = neighbors[i];
            if prev != Some(x) {
                neighbors[write] = x;
                write += 1;
                prev = Some(x);
            }
        }
        new_offsets[v + 1] = write as u64;
    }
    neighbors.truncate(write);
    Ok(Adjacency {
        offsets: new_offsets,
        neighbors,
    })
}

/// Greedy sequential cut. Block bytes for vertices `[a, b)` are
/// `(span + 1 + neighbor_units) * id_width`, exactly what a full load reads.
fn cut_blocks(offsets: &[u64], id_width: u64, block_size: u64) -> Result<Vec<u64>> {
    let n = offsets.len() as u64 - 1;
    let mut starts = vec![0u64];
    if n == 0 {
        starts.push(0);
        return Ok(starts);
    }
    let bytes = |a: u64, b: u64| (b - a + 1 + offsets[b as usize] - offsets[a as usize]) * id_width;
    let mut a = 0u64;
    let mut v = 0u64;
    while v < n {
        let next = v + 1;
        let fits = bytes(a, next) <= block_size && next - a <= walk::MAX_OFFSET + 1;
        if fits {
            v = next;
        } else if v == a {
            // Oversized single vertex: its own block.
            v = next;
            starts.push(v);
            a = v;
        } else {
            starts.push(v);
            a = v;
        }
        if starts.len() as u64 > MAX_BLOCKS + 1 {
            return Err(Error::TooManyBlocks(starts.len() as u64));
        }
    }
    if *starts.last().unwrap() != n {
        starts.push(n);
    }
    if starts.len() as u64 - 1 > MAX_BLOCKS {
        return Err(Error::TooManyBlocks(starts.len() as u64 - 1));
    }
    Ok(starts)
}

fn write_store(
    dir: &Path,
    adj: &Adjacency,
    starts: &[u64],
    id_width: u8,
    block_size: u64,
    remap_old_of_new: Option<&[u64]>,
) -> Result<()> {
    let n = adj.vertex_count();
    if n > 0 && id_width < 8 {
        let max_representable = 1u64 << (8 * id_width as u32);
        if n >= max_representable {
            return Err(Error::Config(format!(
                "{n} vertices do not fit {id_width}-byte neighbor ids"
            )));
        }
    }
    std::fs::create_dir_all(dir)?;

    let meta = GraphMeta {
        vertex_count: n,
        edge_count: adj.neighbors.len() as u64,
        block_count: (starts.len() - 1) as u32,
        id_width,
        block_size,
    };
    let mut f = BufWriter::new(File::create(dir.join(META_FILE))?);
    f.write_all(META_MAGIC)?;
    f.write_all(&META_VERSION.to_le_bytes())?;
    f.write_all(&meta.vertex_count.to_le_bytes())?;
    f.write_all(&meta.edge_count.to_le_bytes())?;
    f.write_all(&meta.block_count.to_le_bytes())?;
    f.write_all(&[meta.id_width])?;
    f.write_all(&meta.block_size.to_le_bytes())?;
    f.flush()?;

    let mut f = BufWriter::new(File::create(dir.join(START_VERTEX_FILE))?);
    for &s in starts {
        f.write_all(&s.to_le_bytes())?;
    }
    f.flush()?;

    let mut f = BufWriter::with_capacity(1 << 20, File::create(dir.join(INDEX_FILE))?);
    for &o in &adj.offsets {
        f.write_all(&o.to_le_bytes())?;
    }
    f.flush()?;

    let mut f = BufWriter::with_capacity(1 << 20, File::create(dir.join(CSR_FILE))?);
    match id_width {
        4 => {
            for &x in &adj.neighbors {
                f.write_all(&(x as u32).to_le_bytes())?;
            }
        }
        _ => {
            for &x in &adj.neighbors {
                f.write_all(&x.to_le_bytes())?;
            }
        }
    }
    f.flush()?;

    if let Some(old_of_new) = remap_old_of_new {
        let mut f = BufWriter::new(File::create(dir.join(REMAP_FILE))?);
        for &old in old_of_new {
            f.write_all(&old.to_le_bytes())?;
        }
        f.flush()?;
    }
    Ok(())
}

fn read_assignment(path: &Path) -> Result<Vec<u32>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut single: Vec<u32> = Vec::new();
    let mut pairs: Vec<(u64, u32)> = Vec::new();
    let mut saw_pair = false;
    let mut saw_single = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        match toks.len() {
            1 => {
                saw_single = true;
                let b = toks[0]
                    .parse::<u32>()
                    .map_err(|_| bad(format!("bad block id `{}`", toks[0])))?;
                single.push(b);
            }
            2 => {
                saw_pair = true;
                let v = toks[0]
                    .parse::<u64>()
                    .map_err(|_| bad(format!("bad vertex id `{}`", toks[0])))?;
                let b = toks[1]
                    .parse::<u32>()
                    .map_err(|_| bad(format!("bad block id `{}`", toks[1])))?;
                pairs.push((v, b));
            }
            _ => return Err(bad("expected `block` or `vertex block`".into())),
        }
        if saw_pair && saw_single {
            return Err(bad("mixed single-column and pair assignment lines".into()));
        }
    }
    if saw_single {
        return Ok(single);
    }
    let n = pairs.iter().map(|&(v, _)| v + 1).max().unwrap_or(0);
    let mut out = vec![u32::MAX; n as usize];
    for (v, b) in pairs {
        out[v as usize] = b;
    }
    if let Some(missing) = out.iter().position(|&b| b == u32::MAX) {
        return Err(Error::MissingAssignment(missing as u64));
    }
    Ok(out)
}
