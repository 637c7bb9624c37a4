//! Learning-based block-loading selector.
//!
//! Calibration runs log one sample per ancillary load: the walk density
//! `eta = |W| / N_v` and the combined load-plus-execute time for the mode
//! used. Fitting gives, per block, `t_f = alpha_f * eta + b_f` (least
//! squares with intercept) and `t_o = alpha_o * eta` (through the origin),
//! and the switching threshold `eta0 = b_f / (alpha_o - alpha_f)`. A pooled
//! global model backs blocks with too few samples; with no usable model at
//! all the selector stays on full load.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use grasorw_core::regress::{self, BlockCostModel, LoadMode, Threshold};

use crate::engine::{self, EngineConfig, LoadingMode, RunHooks};
use crate::error::{Error, Result};
use crate::sink::NullSink;
use crate::store::GraphStore;

pub const MODEL_FILE: &str = "loader_model.json";
pub const SAMPLES_FILE: &str = "loader_samples.csv";

/// Samples below this per-block count fall back to the pooled model.
pub const PER_BLOCK_MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSample {
    pub block: u32,
    pub mode: LoadMode,
    pub eta: f64,
    pub total_time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LoaderModelSet {
    per_block: HashMap<u32, BlockCostModel>,
    block_samples: HashMap<u32, usize>,
    global: Option<BlockCostModel>,
    global_samples: usize,
}

impl LoaderModelSet {
    /// Fits per-block models where enough samples exist, plus the pooled
    /// global model.
    pub fn fit(samples: &[LoadSample]) -> LoaderModelSet {
        let mut by_block: HashMap<u32, Vec<&LoadSample>> = HashMap::new();
        for s in samples {
            by_block.entry(s.block).or_default().push(s);
        }
        let mut per_block = HashMap::new();
        let mut block_samples = HashMap::new();
        for (&b, group) in &by_block {
            block_samples.insert(b, group.len());
            if group.len() >= PER_BLOCK_MIN_SAMPLES {
                if let Some(model) = fit_group(group.iter().copied()) {
                    per_block.insert(b, model);
                }
            }
        }
        let global = fit_group(samples.iter());
        LoaderModelSet {
            per_block,
            block_samples,
            global,
            global_samples: samples.len(),
        }
    }

    pub fn block_model(&self, block: u32) -> Option<&BlockCostModel> {
        self.per_block.get(&block)
    }

    pub fn global_model(&self) -> Option<&BlockCostModel> {
        self.global.as_ref()
    }

    pub fn insert_block_model(&mut self, block: u32, model: BlockCostModel, samples: usize) {
        self.per_block.insert(block, model);
        self.block_samples.insert(block, samples);
    }

    pub fn set_global_model(&mut self, model: BlockCostModel, samples: usize) {
        self.global = Some(model);
        self.global_samples = samples;
    }

    /// Picks the loading mode for an ancillary block given the pending walk
    /// count. Prefers the block's own model, then the pooled model; with
    /// neither, full load.
    pub fn choose_mode(&self, block: u32, walk_count: u64, n_v: u64) -> Result<LoadMode> {
        if n_v == 0 {
            return Err(Error::Config(format!("block {block} has no vertices")));
        }
        let eta = walk_count as f64 / n_v as f64;
        let model = self.per_block.get(&block).or(self.global.as_ref());
        Ok(match model {
            Some(m) => m.choose(eta),
            None => LoadMode::Full,
        })
    }
}

fn fit_group<'a, I: Iterator<Item = &'a LoadSample>>(samples: I) -> Option<BlockCostModel> {
    let mut full: Vec<(f64, f64)> = Vec::new();
    let mut on_demand: Vec<(f64, f64)> = Vec::new();
    for s in samples {
        match s.mode {
            LoadMode::Full => full.push((s.eta, s.total_time)),
            LoadMode::OnDemand => on_demand.push((s.eta, s.total_time)),
        }
    }
    let line = regress::fit_line(&full)?;
    let alpha_o = regress::fit_through_origin(&on_demand)?;
    Some(BlockCostModel::derive(line.slope, line.intercept, alpha_o))
}

// Serialized form: one record per block plus a "global" record; degenerate
// thresholds are spelled out rather than guessed.
#[derive(Serialize, Deserialize)]
struct ModelRecord {
    block: serde_json::Value,
    alpha_f: f64,
    b_f: f64,
    alpha_o: f64,
    eta0: serde_json::Value,
    sample_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    models: Vec<ModelRecord>,
}

fn to_record(block: serde_json::Value, m: &BlockCostModel, samples: usize) -> ModelRecord {
    ModelRecord {
        block,
        alpha_f: m.alpha_f,
        b_f: m.b_f,
        alpha_o: m.alpha_o,
        eta0: match m.eta0 {
            Threshold::Crossover(x) => serde_json::json!(x),
            Threshold::Degenerate => serde_json::json!("degenerate"),
        },
        sample_count: samples,
    }
}

fn from_record(r: &ModelRecord) -> BlockCostModel {
    // eta0 is re-derivable from the coefficients; trust them.
    BlockCostModel::derive(r.alpha_f, r.b_f, r.alpha_o)
}

impl LoaderModelSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut models: Vec<ModelRecord> = Vec::new();
        let mut blocks: Vec<u32> = self.per_block.keys().copied().collect();
        blocks.sort_unstable();
        for b in blocks {
            let m = &self.per_block[&b];
            models.push(to_record(
                serde_json::json!(b),
                m,
                self.block_samples.get(&b).copied().unwrap_or(0),
            ));
        }
        if let Some(g) = &self.global {
            models.push(to_record(
                serde_json::json!("global"),
                g,
                self.global_samples,
            ));
        }
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &ModelFile { models })?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LoaderModelSet> {
        let f = std::fs::File::open(path)?;
        let parsed: ModelFile = serde_json::from_reader(BufReader::new(f))?;
        let mut set = LoaderModelSet::default();
        for r in &parsed.models {
            if r.block == serde_json::json!("global") {
                set.global = Some(from_record(r));
                set.global_samples = r.sample_count;
            } else if let Some(b) = r.block.as_u64() {
                set.per_block.insert(b as u32, from_record(r));
                set.block_samples.insert(b as u32, r.sample_count);
            } else {
                return Err(Error::InvalidStore(format!(
                    "bad model record key {}",
                    r.block
                )));
            }
        }
        Ok(set)
    }
}

/// Calibration protocol: run the task once with full loads and once with
/// on-demand loads, sampling (eta, total time) per ancillary load, then fit.
/// The hooks' timer, when set, replaces the measured times.
pub fn train(
    store: &GraphStore,
    starts: &[(u64, u64)],
    base: &EngineConfig,
    hooks: RunHooks<'_>,
) -> Result<(LoaderModelSet, Vec<LoadSample>)> {
    let mut samples = Vec::new();
    for mode in [LoadingMode::AlwaysFull, LoadingMode::AlwaysOnDemand] {
        let cfg = EngineConfig {
            loading_mode: mode,
            collect_load_samples: true,
            ..base.clone()
        };
        let mut sink = NullSink;
        let report = engine::run(store, starts, &cfg, None, &mut sink, hooks)?;
        samples.extend(report.load_samples);
    }
    Ok((LoaderModelSet::fit(&samples), samples))
}

pub fn write_samples_csv(path: &Path, samples: &[LoadSample]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "block,mode,eta,total_time_seconds")?;
    for s in samples {
        writeln!(f, "{},{},{},{}", s.block, s.mode, s.eta, s.total_time)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<LoadSample>> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let lineno = i as u64 + 1;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        let parts: Vec<&str> = line.trim().split(',').collect();
        if parts.len() != 4 {
            return Err(bad("expected block,mode,eta,total_time_seconds".into()));
        }
        let block = parts[0].parse::<u32>().map_err(|e| bad(e.to_string()))?;
        let mode = match parts[1] {
            "full" => LoadMode::Full,
            "ondemand" => LoadMode::OnDemand,
            other => return Err(bad(format!("bad mode `{other}`"))),
        };
        let eta = parts[2].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let total_time = parts[3].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        out.push(LoadSample {
            block,
            mode,
            eta,
            total_time,
        });
    }
    Ok(out)
}
