//! Trajectory sinks.
//!
//! The engine notifies the sink once per finished walk, from the
//! orchestrator thread only. Full trajectories are assembled only when the
//! sink asks for them; benchmark runs use the null sink and skip trajectory
//! bookkeeping entirely.

use std::io::Write;

use crate::error::Result;

pub trait TrajectorySink {
    /// Whether finished walks should carry their full vertex sequence.
    fn wants_trajectories(&self) -> bool;

    /// Called once per finished walk. `trajectory` is present iff
    /// `wants_trajectories` returned true; it always starts at the source
    /// and ends at `last_vertex`.
    fn walk_finished(
        &mut self,
        source: u64,
        last_vertex: u64,
        hop: u32,
        trajectory: Option<&[u64]>,
    );
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TrajectorySink for NullSink {
    fn wants_trajectories(&self) -> bool {
        false
    }

    fn walk_finished(&mut self, _: u64, _: u64, _: u32, _: Option<&[u64]>) {}
}

/// Collects trajectories in memory and serializes them as a binary stream
/// of `(source u64, length u32, vertices id_width[])` records, sorted by
/// source (ties by content) so the byte stream does not depend on
/// scheduling.
#[derive(Debug)]
pub struct CollectSink {
    id_width: u8,
    records: Vec<(u64, Vec<u64>)>,
}

impl CollectSink {
    pub fn new(id_width: u8) -> Self {
        CollectSink {
            id_width,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn trajectories(&mut self) -> &[(u64, Vec<u64>)] {
        self.sort();
        &self.records
    }

    fn sort(&mut self) {
        self.records.sort();
    }

    pub fn write_to<W: Write>(&mut self, out: &mut W) -> Result<()> {
        self.sort();
        for (source, traj) in &self.records {
            out.write_all(&source.to_le_bytes())?;
            out.write_all(&(traj.len() as u32).to_le_bytes())?;
            match self.id_width {
                4 => {
                    for &v in traj {
                        out.write_all(&(v as u32).to_le_bytes())?;
                    }
                }
                _ => {
                    for &v in traj {
                        out.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }
}

impl TrajectorySink for CollectSink {
    fn wants_trajectories(&self) -> bool {
        true
    }

    fn walk_finished(&mut self, source: u64, _: u64, _: u32, trajectory: Option<&[u64]>) {
        let traj = trajectory.expect("CollectSink requires trajectories");
        self.records.push((source, traj.to_vec()));
    }
}

/// Parses a binary trajectory stream back into records.
pub fn parse_trajectories(bytes: &[u8], id_width: u8) -> Result<Vec<(u64, Vec<u64>)>> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    let w = id_width as usize;
    while pos < bytes.len() {
        if pos + 12 > bytes.len() {
            return Err(crate::error::Error::InvalidStore(
                "truncated trajectory record".into(),
            ));
        }
        let source = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        let len = u32::from_le_bytes(bytes[pos + 8..pos + 12].try_into().unwrap()) as usize;
        pos += 12;
        if pos + len * w > bytes.len() {
            return Err(crate::error::Error::InvalidStore(
                "truncated trajectory record".into(),
            ));
        }
        let mut traj = Vec::with_capacity(len);
        for i in 0..len {
            let chunk = &bytes[pos + i * w..pos + (i + 1) * w];
            traj.push(match id_width {
                4 => u32::from_le_bytes(chunk.try_into().unwrap()) as u64,
                _ => u64::from_le_bytes(chunk.try_into().unwrap()),
            });
        }
        pos += len * w;
        out.push((source, traj));
    }
    Ok(out)
}
