//! 128-bit packed walk state.
//!
//! A walk record packs, from the low bits upward:
//!
//! ```text
//! source(42) | pre_offset(28) | cur_offset(28) | pre_block(10) | cur_block(10) | hop(10)
//! ```
//!
//! The source vertex is a global ID; the previous and current vertices are
//! stored as block-local offsets together with their block IDs, which keeps
//! both representable for graphs far larger than a 28-bit global ID would
//! allow. The widths bound the system at 2^42 vertices, 1024 blocks, and
//! 1024 distinct hop values (0..=1023).

use core::fmt;

pub const SOURCE_BITS: u32 = 42;
pub const OFFSET_BITS: u32 = 28;
pub const BLOCK_BITS: u32 = 10;
pub const HOP_BITS: u32 = 10;

pub const MAX_SOURCE: u64 = (1 << SOURCE_BITS) - 1;
pub const MAX_OFFSET: u64 = (1 << OFFSET_BITS) - 1;
pub const MAX_BLOCK: u32 = (1 << BLOCK_BITS) - 1;
pub const MAX_HOP: u32 = (1 << HOP_BITS) - 1;

/// On-disk walk record size. Pool files are raw concatenations of these.
pub const WALK_RECORD_BYTES: usize = 16;

const SOURCE_SHIFT: u32 = 0;
const PRE_OFFSET_SHIFT: u32 = SOURCE_SHIFT + SOURCE_BITS;
const CUR_OFFSET_SHIFT: u32 = PRE_OFFSET_SHIFT + OFFSET_BITS;
const PRE_BLOCK_SHIFT: u32 = CUR_OFFSET_SHIFT + OFFSET_BITS;
const CUR_BLOCK_SHIFT: u32 = PRE_BLOCK_SHIFT + BLOCK_BITS;
const HOP_SHIFT: u32 = CUR_BLOCK_SHIFT + BLOCK_BITS;

/// Unpacked walk state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WalkFields {
    /// Global ID of the start vertex.
    pub source: u64,
    /// Block-local offset of the previous vertex.
    pub pre_offset: u64,
    /// Block-local offset of the current vertex.
    pub cur_offset: u64,
    /// Block holding the previous vertex.
    pub pre_block: u32,
    /// Block holding the current vertex.
    pub cur_block: u32,
    /// Steps moved so far (0 at the source).
    pub hop: u32,
}

/// A packed walk record. Any 128-bit value decodes; encoding validates
/// field ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Walk128(u128);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldOutOfRange {
    pub field: &'static str,
    pub value: u64,
    pub max: u64,
}

impl fmt::Display for FieldOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "walk field `{}` out of range: {} > {}",
            self.field, self.value, self.max
        )
    }
}

impl core::error::Error for FieldOutOfRange {}

impl WalkFields {
    pub fn encode(&self) -> Result<Walk128, FieldOutOfRange> {
        check("source", self.source, MAX_SOURCE)?;
        check("pre_offset", self.pre_offset, MAX_OFFSET)?;
        check("cur_offset", self.cur_offset, MAX_OFFSET)?;
        check("pre_block", self.pre_block as u64, MAX_BLOCK as u64)?;
        check("cur_block", self.cur_block as u64, MAX_BLOCK as u64)?;
        check("hop", self.hop as u64, MAX_HOP as u64)?;
        let raw = (self.source as u128) << SOURCE_SHIFT
            | (self.pre_offset as u128) << PRE_OFFSET_SHIFT
            | (self.cur_offset as u128) << CUR_OFFSET_SHIFT
            | (self.pre_block as u128) << PRE_BLOCK_SHIFT
            | (self.cur_block as u128) << CUR_BLOCK_SHIFT
            | (self.hop as u128) << HOP_SHIFT;
        Ok(Walk128(raw))
    }
}

fn check(field: &'static str, value: u64, max: u64) -> Result<(), FieldOutOfRange> {
    if value > max {
        Err(FieldOutOfRange { field, value, max })
    } else {
        Ok(())
    }
}

impl Walk128 {
    pub fn from_raw(raw: u128) -> Self {
        Walk128(raw)
    }

    pub fn raw(self) -> u128 {
        self.0
    }

    pub fn decode(self) -> WalkFields {
        let r = self.0;
        WalkFields {
            source: (r >> SOURCE_SHIFT) as u64 & MAX_SOURCE,
            pre_offset: (r >> PRE_OFFSET_SHIFT) as u64 & MAX_OFFSET,
            cur_offset: (r >> CUR_OFFSET_SHIFT) as u64 & MAX_OFFSET,
            pre_block: (r >> PRE_BLOCK_SHIFT) as u32 & MAX_BLOCK,
            cur_block: (r >> CUR_BLOCK_SHIFT) as u32 & MAX_BLOCK,
            hop: (r >> HOP_SHIFT) as u32 & MAX_HOP,
        }
    }

    pub fn to_le_bytes(self) -> [u8; WALK_RECORD_BYTES] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; WALK_RECORD_BYTES]) -> Self {
        Walk128(u128::from_le_bytes(bytes))
    }
}

/// Recovers a global vertex ID from a block-local offset.
///
/// `starts` is the start-vertex table: `starts[b]` is the first vertex of
/// block `b`, with a final sentinel equal to the vertex count.
pub fn global_vertex(offset: u64, block: u32, starts: &[u64]) -> Result<u64, FieldOutOfRange> {
    let b = block as usize;
    debug_assert!(b + 1 < starts.len() + 1);
    let span = starts[b + 1] - starts[b];
    if offset >= span {
        return Err(FieldOutOfRange {
            field: "offset",
            value: offset,
            max: span.saturating_sub(1),
        });
    }
    Ok(starts[b] + offset)
}
