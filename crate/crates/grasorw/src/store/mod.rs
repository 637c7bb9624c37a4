//! On-disk block-partitioned CSR graph store.
//!
//! A store directory holds five little-endian files:
//!
//! * `meta.bin` — magic `GSRW`, version u32, vertex_count u64, edge_count
//!   u64, block_count u32, id_width u8, block_size u64.
//! * `start_vertex.bin` — `(block_count + 1) * u64`; `starts[b]` is the
//!   first vertex of block `b`, final sentinel is the vertex count.
//! * `index.bin` — `(vertex_count + 1) * u64` CSR offsets in neighbor-ID
//!   units.
//! * `csr.bin` — `edge_count * id_width` neighbor IDs, each vertex's list
//!   sorted ascending.
//! * `vertex_remap.bin` — custom partitions only; `vertex_count * u64`
//!   mapping new ID -> old ID.
//!
//! Byte accounting treats every entry (offset or neighbor) as `id_width`
//! bytes, matching the uniform-entry cost model the loader is trained on.
//! A full block load reads `span + 1` offset entries plus the neighbor
//! slice; an on-demand load reads two offset entries plus the neighbor
//! segment per activated vertex.

mod partition;

pub use partition::{import_partition, partition_sequential, PartitionOptions};

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::ops::Deref;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use grasorw_core::regress::LoadMode;
use grasorw_core::walk;

use crate::error::{Error, Result};

pub type VertexId = u64;
pub type BlockId = u32;

pub const META_MAGIC: &[u8; 4] = b"GSRW";
pub const META_VERSION: u32 = 1;
pub const MAX_BLOCKS: u64 = 1024;

pub const META_FILE: &str = "meta.bin";
pub const START_VERTEX_FILE: &str = "start_vertex.bin";
pub const INDEX_FILE: &str = "index.bin";
pub const CSR_FILE: &str = "csr.bin";
pub const REMAP_FILE: &str = "vertex_remap.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphMeta {
    pub vertex_count: u64,
    /// Stored neighbor entries; each undirected edge appears twice.
    pub edge_count: u64,
    pub block_count: u32,
    pub id_width: u8,
    pub block_size: u64,
}

/// I/O counters, shared with the engine. Monotone; engines diff snapshots.
#[derive(Debug, Default)]
pub struct IoCounters {
    pub block_io_count: AtomicU64,
    pub block_io_bytes: AtomicU64,
    pub on_demand_io_count: AtomicU64,
    pub on_demand_io_bytes: AtomicU64,
    pub vertex_io_count: AtomicU64,
    pub vertex_io_bytes: AtomicU64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct IoSnapshot {
    pub block_io_count: u64,
    pub block_io_bytes: u64,
    pub on_demand_io_count: u64,
    pub on_demand_io_bytes: u64,
    pub vertex_io_count: u64,
    pub vertex_io_bytes: u64,
}

impl IoCounters {
    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            block_io_count: self.block_io_count.load(Ordering::Relaxed),
            block_io_bytes: self.block_io_bytes.load(Ordering::Relaxed),
            on_demand_io_count: self.on_demand_io_count.load(Ordering::Relaxed),
            on_demand_io_bytes: self.on_demand_io_bytes.load(Ordering::Relaxed),
            vertex_io_count: self.vertex_io_count.load(Ordering::Relaxed),
            vertex_io_bytes: self.vertex_io_bytes.load(Ordering::Relaxed),
        }
    }
}

impl IoSnapshot {
    pub fn since(&self, earlier: &IoSnapshot) -> IoSnapshot {
        IoSnapshot {
            block_io_count: self.block_io_count - earlier.block_io_count,
            block_io_bytes: self.block_io_bytes - earlier.block_io_bytes,
            on_demand_io_count: self.on_demand_io_count - earlier.on_demand_io_count,
            on_demand_io_bytes: self.on_demand_io_bytes - earlier.on_demand_io_bytes,
            vertex_io_count: self.vertex_io_count - earlier.vertex_io_count,
            vertex_io_bytes: self.vertex_io_bytes - earlier.vertex_io_bytes,
        }
    }
}

#[derive(Debug)]
pub struct GraphStore {
    dir: PathBuf,
    meta: GraphMeta,
    starts: Vec<u64>,
    index: File,
    csr: File,
    counters: IoCounters,
}

impl GraphStore {
    pub fn open(dir: &Path) -> Result<GraphStore> {
        let meta = read_meta(&dir.join(META_FILE))?;
        let starts = read_u64_file(&dir.join(START_VERTEX_FILE))?;
        if starts.len() != meta.block_count as usize + 1 {
            return Err(Error::InvalidStore(format!(
                "start-vertex table has {} entries, expected {}",
                starts.len(),
                meta.block_count + 1
            )));
        }
        if starts.first() != Some(&0) || starts.last() != Some(&meta.vertex_count) {
            return Err(Error::InvalidStore(
                "start-vertex table must begin at 0 and end at the vertex count".into(),
            ));
        }
        for w in starts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidStore(
                    "start-vertex table must be strictly increasing".into(),
                ));
            }
            if w[1] - w[0] > walk::MAX_OFFSET + 1 {
                return Err(Error::InvalidStore(
                    "block span exceeds the 28-bit offset limit".into(),
                ));
            }
        }
        if meta.id_width != 4 && meta.id_width != 8 {
            return Err(Error::InvalidStore(format!(
                "unsupported id width {}",
                meta.id_width
            )));
        }
        let index = File::open(dir.join(INDEX_FILE))?;
        let csr = File::open(dir.join(CSR_FILE))?;
        let index_len = index.metadata()?.len();
        if index_len != (meta.vertex_count + 1) * 8 {
            return Err(Error::InvalidStore(format!(
                "index file is {index_len} bytes, expected {}",
                (meta.vertex_count + 1) * 8
            )));
        }
        let csr_len = csr.metadata()?.len();
        if csr_len != meta.edge_count * meta.id_width as u64 {
            return Err(Error::InvalidStore(format!(
                "csr file is {csr_len} bytes, expected {}",
                meta.edge_count * meta.id_width as u64
            )));
        }
        Ok(GraphStore {
            dir: dir.to_path_buf(),
            meta,
            starts,
            index,
            csr,
            counters: IoCounters::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn vertex_count(&self) -> u64 {
        self.meta.vertex_count
    }

    pub fn block_count(&self) -> u32 {
        self.meta.block_count
    }

    pub fn id_width(&self) -> u8 {
        self.meta.id_width
    }

    pub fn starts(&self) -> &[u64] {
        &self.starts
    }

    pub fn counters(&self) -> &IoCounters {
        &self.counters
    }

    pub fn walks_dir(&self) -> PathBuf {
        self.dir.join("walks")
    }

    /// Block containing `v`, by binary search over the start-vertex table.
    pub fn block_of(&self, v: VertexId) -> Result<BlockId> {
        if v >= self.meta.vertex_count {
            return Err(Error::VertexOutOfRange(v, self.meta.vertex_count));
        }
        Ok(block_of_in(&self.starts, v))
    }

    pub fn block_range(&self, b: BlockId) -> Result<(u64, u64)> {
        if b >= self.meta.block_count {
            return Err(Error::BlockOutOfRange(b, self.meta.block_count));
        }
        Ok((self.starts[b as usize], self.starts[b as usize + 1]))
    }

    pub fn block_span(&self, b: BlockId) -> Result<u64> {
        let (lo, hi) = self.block_range(b)?;
        Ok(hi - lo)
    }

    fn read_offsets(&self, first_vertex: u64, entries: u64) -> Result<Vec<u64>> {
        let mut buf = vec![0u8; entries as usize * 8];
        self.index.read_exact_at(&mut buf, first_vertex * 8)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn read_neighbors(&self, unit_start: u64, unit_count: u64) -> Result<Vec<u64>> {
        let w = self.meta.id_width as u64;
        let mut buf = vec![0u8; (unit_count * w) as usize];
        self.csr.read_exact_at(&mut buf, unit_start * w)?;
        Ok(match self.meta.id_width {
            4 => buf
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as u64)
                .collect(),
            _ => buf
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        })
    }

    /// Loads the whole block: its index slice and its CSR slice.
    pub fn load_block_full(&self, b: BlockId) -> Result<BlockData> {
        let (lo, hi) = self.block_range(b)?;
        let span = hi - lo;
        let offsets = self.read_offsets(lo, span + 1)?;
        let nbr_units = offsets[span as usize] - offsets[0];
        let neighbors = self.read_neighbors(offsets[0], nbr_units)?;
        let w = self.meta.id_width as u64;
        let loaded_bytes = (span + 1 + nbr_units) * w;
        let loaded_neighbor_bytes = nbr_units * w;
        self.counters.block_io_count.fetch_add(1, Ordering::Relaxed);
        self.counters
            .block_io_bytes
            .fetch_add(loaded_bytes, Ordering::Relaxed);
        Ok(BlockData {
            block: b,
            mode: LoadMode::Full,
            start_vertex: lo,
            span,
            id_width: self.meta.id_width,
            offsets,
            neighbors,
            segments: HashMap::new(),
            extension: RwLock::new(HashMap::new()),
            loaded_bytes,
            loaded_neighbor_bytes,
            touched_bits: make_bitmap(span),
            touched_bytes: AtomicU64::new(0),
            touched_neighbor_bytes: AtomicU64::new(0),
        })
    }

    /// Loads only the CSR segments of the activated vertices, which must all
    /// belong to block `b`. Runs of consecutive vertices are read with one
    /// ranged read each; the accounting stays per vertex (two offset
    /// entries plus the segment).
    pub fn load_block_on_demand(&self, b: BlockId, activated: &[VertexId]) -> Result<BlockData> {
        let (lo, hi) = self.block_range(b)?;
        let span = hi - lo;
        let w = self.meta.id_width as u64;
        let mut sorted: Vec<u64> = activated.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let (Some(&first), Some(&last)) = (sorted.first(), sorted.last()) {
            if first < lo || last >= hi {
                return Err(Error::Invariant(format!(
                    "activated set [{first}, {last}] outside block {b} [{lo}, {hi})"
                )));
            }
        }
        let mut segments = HashMap::with_capacity(sorted.len());
        let mut loaded_bytes = 0u64;
        let mut loaded_neighbor_bytes = 0u64;
        if !sorted.is_empty() {
            let first = sorted[0];
            let offsets = self.read_offsets(first, sorted.last().unwrap() - first + 2)?;
            let off = |v: u64| offsets[(v - first) as usize];
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i;
                while j + 1 < sorted.len() && sorted[j + 1] == sorted[j] + 1 {
                    j += 1;
                }
                let (run_lo, run_hi) = (sorted[i], sorted[j]);
                let base = off(run_lo);
                let nbrs = self.read_neighbors(base, off(run_hi + 1) - base)?;
                for &v in &sorted[i..=j] {
                    let s = (off(v) - base) as usize;
                    let e = (off(v + 1) - base) as usize;
                    let deg = (e - s) as u64;
                    loaded_bytes += (2 + deg) * w;
                    loaded_neighbor_bytes += deg * w;
                    segments.insert(v, Arc::<[u64]>::from(&nbrs[s..e]));
                }
                i = j + 1;
            }
        }
        self.counters
            .on_demand_io_count
            .fetch_add(1, Ordering::Relaxed);
        self.counters
            .on_demand_io_bytes
            .fetch_add(loaded_bytes, Ordering::Relaxed);
        Ok(BlockData {
            block: b,
            mode: LoadMode::OnDemand,
            start_vertex: lo,
            span,
            id_width: self.meta.id_width,
            offsets: Vec::new(),
            neighbors: Vec::new(),
            segments,
            extension: RwLock::new(HashMap::new()),
            loaded_bytes,
            loaded_neighbor_bytes,
            touched_bits: make_bitmap(span),
            touched_bytes: AtomicU64::new(0),
            touched_neighbor_bytes: AtomicU64::new(0),
        })
    }

    /// Reads one vertex's adjacency straight from disk (a random vertex I/O).
    pub fn fetch_vertex(&self, v: VertexId) -> Result<Vec<u64>> {
        if v >= self.meta.vertex_count {
            return Err(Error::VertexOutOfRange(v, self.meta.vertex_count));
        }
        let off = self.read_offsets(v, 2)?;
        let deg = off[1] - off[0];
        let seg = self.read_neighbors(off[0], deg)?;
        let w = self.meta.id_width as u64;
        self.counters
            .vertex_io_count
            .fetch_add(1, Ordering::Relaxed);
        self.counters
            .vertex_io_bytes
            .fetch_add((2 + deg) * w, Ordering::Relaxed);
        Ok(seg)
    }

    /// Reads the whole index file; setup helper, not counted as engine I/O.
    pub fn read_all_degrees(&self) -> Result<Vec<u64>> {
        let offsets = self.read_offsets(0, self.meta.vertex_count + 1)?;
        Ok(offsets.windows(2).map(|w| w[1] - w[0]).collect())
    }
}

/// Binary search over a start-vertex table; `v` must be in range.
pub fn block_of_in(starts: &[u64], v: VertexId) -> BlockId {
    debug_assert!(v < *starts.last().unwrap());
    (starts.partition_point(|&s| s <= v) - 1) as BlockId
}

fn make_bitmap(span: u64) -> Vec<AtomicU64> {
    (0..(span as usize).div_ceil(64))
        .map(|_| AtomicU64::new(0))
        .collect()
}

/// An in-memory block image, either full or partial. Immutable except for
/// the touch accounting and the partial-mode vertex cache, both safe under
/// concurrent use.
pub struct BlockData {
    block: BlockId,
    mode: LoadMode,
    start_vertex: u64,
    span: u64,
    id_width: u8,
    offsets: Vec<u64>,
    neighbors: Vec<u64>,
    segments: HashMap<u64, Arc<[u64]>>,
    extension: RwLock<HashMap<u64, Arc<[u64]>>>,
    loaded_bytes: u64,
    loaded_neighbor_bytes: u64,
    touched_bits: Vec<AtomicU64>,
    touched_bytes: AtomicU64,
    touched_neighbor_bytes: AtomicU64,
}

/// Adjacency of one vertex; borrows full-block storage, shares cached
/// partial segments.
pub enum AdjRef<'a> {
    Borrowed(&'a [u64]),
    Shared(Arc<[u64]>),
}

impl Deref for AdjRef<'_> {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        match self {
            AdjRef::Borrowed(s) => s,
            AdjRef::Shared(a) => a,
        }
    }
}

impl BlockData {
    pub fn block(&self) -> BlockId {
        self.block
    }

    pub fn mode(&self) -> LoadMode {
        self.mode
    }

    pub fn start_vertex(&self) -> u64 {
        self.start_vertex
    }

    pub fn vertex_span(&self) -> u64 {
        self.span
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        v >= self.start_vertex && v < self.start_vertex + self.span
    }

    pub fn loaded_bytes(&self) -> u64 {
        self.loaded_bytes
    }

    pub fn loaded_neighbor_bytes(&self) -> u64 {
        self.loaded_neighbor_bytes
    }

    pub fn touched_bytes(&self) -> u64 {
        self.touched_bytes.load(Ordering::Relaxed)
    }

    pub fn touched_neighbor_bytes(&self) -> u64 {
        self.touched_neighbor_bytes.load(Ordering::Relaxed)
    }

    /// Adjacency of `v` if resolvable from this image. Marks the segment
    /// touched the first time it is read. Returns `None` for a vertex a
    /// partial image has neither loaded nor cached.
    pub fn adjacency(&self, v: VertexId) -> Option<AdjRef<'_>> {
        debug_assert!(self.contains_vertex(v));
        match self.mode {
            LoadMode::Full => {
                let i = (v - self.start_vertex) as usize;
                let base = self.offsets[0];
                let lo = (self.offsets[i] - base) as usize;
                let hi = (self.offsets[i + 1] - base) as usize;
                self.mark_touched(v, (hi - lo) as u64);
                Some(AdjRef::Borrowed(&self.neighbors[lo..hi]))
            }
            LoadMode::OnDemand => {
                // The initial segments are immutable after construction,
                // so hits borrow; only the extension cache hands out Arcs.
                if let Some(seg) = self.segments.get(&v) {
                    self.mark_touched(v, seg.len() as u64);
                    return Some(AdjRef::Borrowed(seg));
                }
                let ext = self.extension.read().unwrap();
                ext.get(&v).map(|seg| AdjRef::Shared(Arc::clone(seg)))
            }
        }
    }

    /// Caches a segment fetched mid-execution. Idempotent; concurrent
    /// duplicate fetches keep the first inserted copy.
    pub fn insert_fetched(&self, v: VertexId, seg: Vec<u64>) -> Arc<[u64]> {
        let mut ext = self.extension.write().unwrap();
        Arc::clone(ext.entry(v).or_insert_with(|| Arc::<[u64]>::from(seg)))
    }

    fn mark_touched(&self, v: VertexId, degree: u64) {
        let i = (v - self.start_vertex) as usize;
        let mask = 1u64 << (i % 64);
        // Read-mostly fast path; repeated touches of hot vertices skip the
        // contended RMW.
        if self.touched_bits[i / 64].load(Ordering::Relaxed) & mask != 0 {
            return;
        }
        let prev = self.touched_bits[i / 64].fetch_or(mask, Ordering::Relaxed);
        if prev & mask == 0 {
            let w = self.id_width as u64;
            // One offset entry plus the neighbor segment; stays below the
            // loaded footprint in both modes.
            self.touched_bytes
                .fetch_add((1 + degree) * w, Ordering::Relaxed);
            self.touched_neighbor_bytes
                .fetch_add(degree * w, Ordering::Relaxed);
        }
    }
}

fn read_meta(path: &Path) -> Result<GraphMeta> {
    let mut f = File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() != 37 || &buf[0..4] != META_MAGIC {
        return Err(Error::InvalidStore(format!(
            "bad meta file {}",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != META_VERSION {
        return Err(Error::InvalidStore(format!(
            "unsupported store version {version}"
        )));
    }
    Ok(GraphMeta {
        vertex_count: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
        edge_count: u64::from_le_bytes(buf[16..24].try_into().unwrap()),
        block_count: u32::from_le_bytes(buf[24..28].try_into().unwrap()),
        id_width: buf[28],
        block_size: u64::from_le_bytes(buf[29..37].try_into().unwrap()),
    })
}

fn read_u64_file(path: &Path) -> Result<Vec<u64>> {
    let mut f = File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() % 8 != 0 {
        return Err(Error::InvalidStore(format!(
            "{} is not a multiple of 8 bytes",
            path.display()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
