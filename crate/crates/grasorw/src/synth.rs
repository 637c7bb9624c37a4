//! Synthetic edge-list generators for tests and benchmarks.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use grasorw_core::rng::mix64;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    ErdosRenyi { n: u64, avg_degree: f64 },
    Star { leaves: u64 },
    TwoCommunity { n: u64, p_in: f64, p_out: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenStats {
    pub vertices: u64,
    pub edges: u64,
}

struct EdgeWriter {
    out: std::io::BufWriter<std::fs::File>,
    buf: String,
    edges: u64,
}

impl EdgeWriter {
    fn new(path: &Path) -> Result<EdgeWriter> {
        Ok(EdgeWriter {
            out: std::io::BufWriter::with_capacity(1 << 20, std::fs::File::create(path)?),
            buf: String::with_capacity(1 << 16),
            edges: 0,
        })
    }

    fn emit(&mut self, u: u64, v: u64) -> Result<()> {
        writeln!(self.buf, "{u} {v}").unwrap();
        self.edges += 1;
        if self.buf.len() > (1 << 16) - 32 {
            self.out.write_all(self.buf.as_bytes())?;
            self.buf.clear();
        }
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.out.write_all(self.buf.as_bytes())?;
        self.out.flush()?;
        Ok(self.edges)
    }
}

/// Writes a reproducible edge list for the given seed.
pub fn generate(kind: SyntheticKind, seed: u64, out: &Path) -> Result<GenStats> {
    let mut w = EdgeWriter::new(out)?;
    let vertices = match kind {
        SyntheticKind::Star { leaves } => {
            for v in 1..=leaves {
                w.emit(0, v)?;
            }
            leaves + 1
        }
        SyntheticKind::ErdosRenyi { n, avg_degree } => {
            let mut rng = SmallRng::seed_from_u64(mix64(seed ^ 0x4552));
            let p = (avg_degree / (n.max(2) - 1) as f64).min(1.0);
            sample_triangle(n, p, &mut rng, |u, v| w.emit(u, v))?;
            n
        }
        SyntheticKind::TwoCommunity { n, p_in, p_out } => {
            let mut rng = SmallRng::seed_from_u64(mix64(seed ^ 0x5342_4d32));
            let half = n / 2;
            sample_triangle(half, p_in, &mut rng, |u, v| w.emit(u, v))?;
            sample_triangle(n - half, p_in, &mut rng, |u, v| w.emit(half + u, half + v))?;
            sample_grid(half, n - half, p_out, &mut rng, |u, v| w.emit(u, half + v))?;
            n
        }
    };
    let edges = w.finish()?;
    Ok(GenStats { vertices, edges })
}

/// Visits each ordered pair `u < v < n` with probability `p`, by geometric
/// skipping over the linearized pair index.
fn sample_triangle<F: FnMut(u64, u64) -> Result<()>>(
    n: u64,
    p: f64,
    rng: &mut SmallRng,
    mut emit: F,
) -> Result<()> {
    let total = n.saturating_mul(n.saturating_sub(1)) / 2;
    let row_start = |u: u64| u * n - u * (u + 1) / 2;
    let unrank = |idx: u64| {
        let mut lo = 0u64;
        let mut hi = n - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if row_start(mid) <= idx {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        (lo, lo + 1 + (idx - row_start(lo)))
    };
    skip_sample(total, p, rng, |idx| {
        let (u, v) = unrank(idx);
        emit(u, v)
    })
}

/// Visits each cell of an `a x b` grid with probability `p`.
fn sample_grid<F: FnMut(u64, u64) -> Result<()>>(
    a: u64,
    b: u64,
    p: f64,
    rng: &mut SmallRng,
    mut emit: F,
) -> Result<()> {
    skip_sample(a.saturating_mul(b), p, rng, |idx| emit(idx / b, idx % b))
}

fn skip_sample<F: FnMut(u64) -> Result<()>>(
    total: u64,
    p: f64,
    rng: &mut SmallRng,
    mut visit: F,
) -> Result<()> {
    if p <= 0.0 || total == 0 {
        return Ok(());
    }
    let mut idx = 0u64;
    if p >= 1.0 {
        while idx < total {
            visit(idx)?;
            idx += 1;
        }
        return Ok(());
    }
    let log_keep = (1.0 - p).ln();
    loop {
        let u: f64 = rng.gen::<f64>();
        let skip = (u.max(f64::MIN_POSITIVE).ln() / log_keep).floor() as u64;
        idx = idx.saturating_add(skip);
        if idx >= total {
            return Ok(());
        }
        visit(idx)?;
        idx += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_has_one_edge_per_leaf() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("star.txt");
        let stats = generate(SyntheticKind::Star { leaves: 5 }, 1, &path).unwrap();
        assert_eq!(
            stats,
            GenStats {
                vertices: 6,
                edges: 5
            }
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn erdos_renyi_edge_count_tracks_the_expectation() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("er.txt");
        let stats = generate(
            SyntheticKind::ErdosRenyi {
                n: 1000,
                avg_degree: 40.0,
            },
            7,
            &path,
        )
        .unwrap();
        let expected = 1000.0 * 40.0 / 2.0;
        let rel = (stats.edges as f64 - expected).abs() / expected;
        assert!(rel < 0.05, "edges {} vs expected {expected}", stats.edges);
    }

    #[test]
    fn same_seed_reproduces_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a.txt");
        let b = tmp.path().join("b.txt");
        let kind = SyntheticKind::TwoCommunity {
            n: 200,
            p_in: 0.1,
            p_out: 0.01,
        };
        generate(kind, 99, &a).unwrap();
        generate(kind, 99, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let c = tmp.path().join("c.txt");
        generate(kind, 100, &c).unwrap();
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    }

    #[test]
    fn two_community_respects_the_halves() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("sbm.txt");
        generate(
            SyntheticKind::TwoCommunity {
                n: 100,
                p_in: 0.3,
                p_out: 0.0,
            },
            3,
            &path,
        )
        .unwrap();
        for line in std::fs::read_to_string(&path).unwrap().lines() {
            let mut it = line.split_whitespace();
            let u: u64 = it.next().unwrap().parse().unwrap();
            let v: u64 = it.next().unwrap().parse().unwrap();
            assert_eq!(u < 50, v < 50, "cross edge {u} {v} with p_out = 0");
        }
    }
}
