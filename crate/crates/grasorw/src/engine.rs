//! The bi-block execution engine.
//!
//! Walks advance in time slots. A slot drains one block's walk pool,
//! collects the walks into buckets by partner block, loads the current
//! block, then executes the buckets in ascending partner order with the
//! partner resident as the ancillary block. While a walk's current vertex
//! stays inside the resident pair it keeps stepping; when it leaves, it is
//! either persisted under the skewed-storage law or, if it exited the
//! current block into a partner not yet executed this slot, appended to
//! that partner's bucket (bucket-extending) and processed later in the
//! same slot.
//!
//! With skewed storage every pooled walk has its smaller endpoint block as
//! its pool, so a slot for current block `b` only ever needs ancillary
//! blocks above `b`: the triangular schedule. One sweep over all current
//! blocks costs at most `(N_B + 2)(N_B - 1) / 2` block loads against the
//! plain-bucket engine's `N_B^2`.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use grasorw_core::regress::LoadMode;
use grasorw_core::rng::{mix64, DrawStream, RngKey};
use grasorw_core::route::{self, WalkRoute};
use grasorw_core::transition::{self, Node2vecParams, Termination};
use grasorw_core::walk::{Walk128, WalkFields, MAX_HOP};

use crate::error::{Error, Result};
use crate::loader::{LoadSample, LoaderModelSet};
use crate::metrics::{Metrics, SweepMetrics, UtilizationSample};
use crate::pools::{
    collect_buckets, merge_buffers_into_bucket, PoolSet, StorageLaw, Target, ThreadBuffer,
};
use crate::sink::TrajectorySink;
use crate::store::{block_of_in, AdjRef, BlockData, GraphStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkModel {
    DeepWalk,
    Node2vec(Node2vecParams),
}

impl WalkModel {
    fn second_order(&self) -> bool {
        matches!(self, WalkModel::Node2vec(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheduler {
    /// Cyclic over blocks, skipping empty pools. The default.
    Iteration,
    /// Strict cyclic order, no skipping.
    Alphabet,
    /// The block holding the walk with the fewest steps.
    MinHeight,
    /// The block holding the most walks.
    MaxSum,
    /// Max-Sum with probability `max_sum_prob`, otherwise Min-Height.
    GraphWalkerMix { max_sum_prob: f64 },
}

impl Scheduler {
    pub const DEFAULT_MIX_PROB: f64 = 0.8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    Triangular,
    PlainBucket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadingMode {
    AlwaysFull,
    AlwaysOnDemand,
    Learned,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub model: WalkModel,
    pub termination: Termination,
    pub scheduler: Scheduler,
    pub engine_mode: EngineMode,
    pub loading_mode: LoadingMode,
    pub threads: usize,
    pub seed: u64,
    /// Counter-based draws keyed by (seed, source, walk index, hop);
    /// trajectories become independent of scheduling, loading mode, and
    /// thread count. Requires one walk per source, since the pooled walk
    /// record cannot carry a walk index.
    pub deterministic: bool,
    /// Walks per pool memory segment before it is flushed to disk.
    pub flush_threshold: usize,
    /// Runtime invariant checks: storage-law pool scans and walk
    /// conservation at every slot boundary.
    pub validate: bool,
    /// Record (eta, time) samples per ancillary load, for loader training.
    pub collect_load_samples: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            model: WalkModel::DeepWalk,
            termination: Termination::FixedLength { length: 80 },
            scheduler: Scheduler::Iteration,
            engine_mode: EngineMode::Triangular,
            loading_mode: LoadingMode::AlwaysFull,
            threads: 1,
            seed: 0,
            deterministic: false,
            flush_threshold: 64 * 1024,
            validate: false,
            collect_load_samples: false,
        }
    }
}

/// Optional instrumentation, injected by callers.
#[derive(Clone, Copy, Default)]
pub struct RunHooks<'a> {
    /// Overrides the measured per-load time for loader samples; takes
    /// (block, mode, eta) and returns seconds. Makes model-fit tests
    /// deterministic.
    pub load_timer: Option<&'a (dyn Fn(u32, LoadMode, f64) -> f64 + Sync)>,
}

#[derive(Debug)]
pub struct RunReport {
    pub metrics: Metrics,
    pub load_samples: Vec<LoadSample>,
}

/// Per-walk uniform draw source: keyed in deterministic mode, a worker's
/// sequential generator otherwise.
pub(crate) enum Draws<'r> {
    Keyed {
        seed: u64,
        source: u64,
        walk_index: u64,
    },
    Sequential(&'r mut SmallRng),
}

impl Draws<'_> {
    #[inline]
    pub(crate) fn unit(&mut self, hop: u32, stream: DrawStream) -> f64 {
        match self {
            Draws::Keyed {
                seed,
                source,
                walk_index,
            } => RngKey {
                seed: *seed,
                source: *source,
                walk_index: *walk_index,
                hop,
            }
            .draw_unit(stream),
            Draws::Sequential(rng) => rng.gen::<f64>(),
        }
    }
}

#[inline]
pub(crate) fn check_terminate(term: &Termination, hop: u32, draws: &mut Draws) -> bool {
    match term {
        Termination::FixedLength { length } => hop >= length - 1,
        Termination::GeometricCapped { .. } => {
            transition::should_terminate_with(term, hop, draws.unit(hop, DrawStream::Terminate))
        }
    }
}

/// One transition. The first hop of any walk is first-order; second-order
/// steps take the previous vertex's adjacency.
#[inline]
pub(crate) fn sample_next(
    model: &WalkModel,
    pre: u64,
    hop: u32,
    cur_adj: &[u64],
    pre_adj: Option<&[u64]>,
    draws: &mut Draws,
) -> Option<u64> {
    if cur_adj.is_empty() {
        return None;
    }
    let u = draws.unit(hop, DrawStream::Step);
    match model {
        WalkModel::DeepWalk => transition::deepwalk_next_with(cur_adj, u),
        WalkModel::Node2vec(_) if hop == 0 => transition::deepwalk_next_with(cur_adj, u),
        WalkModel::Node2vec(params) => {
            let pre_adj = pre_adj.expect("second-order step needs the previous adjacency");
            transition::node2vec_next_with(pre, cur_adj, pre_adj, params, u)
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory assembly
// ---------------------------------------------------------------------------

type StateKey = (u64, u64, u64, u32); // (source, pre, cur, hop)

struct TrajEvent {
    source: u64,
    before: StateKey,
    appended: Vec<u64>,
    finished: bool,
    after: StateKey,
}

/// Partial trajectories of in-flight walks, keyed by the walk's observable
/// state. Walks whose state coincides are exchangeable: any partial with
/// the matching key is a valid prefix.
#[derive(Default)]
struct TrajTable {
    map: std::collections::HashMap<StateKey, Vec<Vec<u64>>>,
}

impl TrajTable {
    fn start(&mut self, source: u64) {
        self.map
            .entry((source, source, source, 0))
            .or_default()
            .push(vec![source]);
    }

    fn apply(&mut self, ev: TrajEvent, sink: &mut dyn TrajectorySink) -> Result<()> {
        let stack = self.map.get_mut(&ev.before).ok_or_else(|| {
            Error::Invariant(format!(
                "no partial trajectory for walk state {:?}",
                ev.before
            ))
        })?;
        let mut traj = stack.pop().expect("stacks are pruned when empty");
        if stack.is_empty() {
            self.map.remove(&ev.before);
        }
        traj.extend_from_slice(&ev.appended);
        if ev.finished {
            let last = *traj.last().unwrap();
            sink.walk_finished(ev.source, last, ev.after.3, Some(&traj));
        } else {
            self.map.entry(ev.after).or_default().push(traj);
        }
        Ok(())
    }

    fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Workers
// ---------------------------------------------------------------------------

struct SlotCtx<'a> {
    store: &'a GraphStore,
    starts: &'a [u64],
    model: WalkModel,
    termination: Termination,
    seed: u64,
    deterministic: bool,
    law: StorageLaw,
    cur_data: &'a BlockData,
    anc_data: Option<&'a BlockData>,
    current_block: u32,
    ancillary_block: Option<u32>,
    assembling: bool,
}

impl SlotCtx<'_> {
    fn resident(&self, v: u64) -> bool {
        self.cur_data.contains_vertex(v) || self.anc_data.is_some_and(|a| a.contains_vertex(v))
    }

    /// Adjacency of a resident vertex, fetching and caching on a partial
    /// ancillary miss.
    fn resolve(&self, v: u64) -> Result<AdjRef<'_>> {
        if self.cur_data.contains_vertex(v) {
            return Ok(self
                .cur_data
                .adjacency(v)
                .expect("current block is fully loaded"));
        }
        let anc = self
            .anc_data
            .expect("vertex resident implies a loaded block");
        debug_assert!(anc.contains_vertex(v));
        if let Some(adj) = anc.adjacency(v) {
            return Ok(adj);
        }
        let seg = self.store.fetch_vertex(v)?;
        Ok(AdjRef::Shared(anc.insert_fetched(v, seg)))
    }
}

struct FinishedWalk {
    source: u64,
    last: u64,
    hop: u32,
}

#[derive(Default)]
struct WorkerOut {
    finished: Vec<FinishedWalk>,
    events: Vec<TrajEvent>,
    steps: u64,
}

struct LiveWalk {
    source: u64,
    pre: u64,
    cur: u64,
    hop: u32,
}

enum WalkOutcome {
    Finished,
    Exited,
}

/// Advances one walk while its current vertex stays resident, recording
/// visited vertices when trajectories are being assembled.
///
/// Each hop's termination coin is drawn exactly once across the walk's
/// whole life: at creation for hop 0, otherwise right after the step that
/// reached the hop. A persisted walk has therefore already passed its
/// current hop's check and is never re-tested on reload, which keeps
/// sequential-RNG walk lengths unbiased.
fn update_walk(
    ctx: &SlotCtx<'_>,
    w: &mut LiveWalk,
    draws: &mut Draws,
    appended: &mut Vec<u64>,
    out: &mut WorkerOut,
) -> Result<WalkOutcome> {
    if w.hop == 0 && check_terminate(&ctx.termination, 0, draws) {
        return Ok(WalkOutcome::Finished);
    }
    loop {
        if !ctx.resident(w.cur) {
            return Ok(WalkOutcome::Exited);
        }
        let cur_adj = ctx.resolve(w.cur)?;
        let pre_adj = if ctx.model.second_order() && w.hop > 0 {
            Some(ctx.resolve(w.pre)?)
        } else {
            None
        };
        let next = sample_next(
            &ctx.model,
            w.pre,
            w.hop,
            &cur_adj,
            pre_adj.as_deref(),
            draws,
        );
        let Some(z) = next else {
            // Dead end: only possible at an isolated source.
            return Ok(WalkOutcome::Finished);
        };
        w.pre = w.cur;
        w.cur = z;
        w.hop += 1;
        out.steps += 1;
        if ctx.assembling {
            appended.push(z);
        }
        if w.hop > MAX_HOP {
            return Err(Error::Invariant(format!(
                "walk from {} exceeded the {} hop limit",
                w.source, MAX_HOP
            )));
        }
        if check_terminate(&ctx.termination, w.hop, draws) {
            return Ok(WalkOutcome::Finished);
        }
    }
}

fn encode_live(ctx: &SlotCtx<'_>, w: &LiveWalk) -> Result<(Walk128, u32, u32)> {
    let pre_block = block_of_in(ctx.starts, w.pre);
    let cur_block = block_of_in(ctx.starts, w.cur);
    let record = WalkFields {
        source: w.source,
        pre_offset: w.pre - ctx.starts[pre_block as usize],
        cur_offset: w.cur - ctx.starts[cur_block as usize],
        pre_block,
        cur_block,
        hop: w.hop,
    }
    .encode()?;
    Ok((record, pre_block, cur_block))
}

/// Routes a walk that left the resident pair: a pool target under the
/// storage law, or a later bucket of this slot (bucket-extending, triangular
/// engine only).
fn route_exited(ctx: &SlotCtx<'_>, pre_block: u32, cur_block: u32) -> Result<Target> {
    match ctx.law {
        StorageLaw::Skewed => match ctx.ancillary_block {
            Some(i) => {
                match route::route_after_update(pre_block, cur_block, ctx.current_block, i)? {
                    WalkRoute::Pool(p) => Ok(Target::Pool(p)),
                    WalkRoute::Bucket(t) => Ok(Target::Bucket(t)),
                }
            }
            // Initialization: no ancillary block, always persist.
            None => Ok(Target::Pool(route::skewed_pool(pre_block, cur_block)?)),
        },
        StorageLaw::CurrentBlock => Ok(Target::Pool(route::plain_pool(pre_block, cur_block)?)),
    }
}

/// Processes one chunk of walks against the resident block pair.
fn process_chunk(
    ctx: &SlotCtx<'_>,
    chunk: &[(Walk128, u64)],
    rng_seed: u64,
    buffer: &mut ThreadBuffer,
) -> Result<WorkerOut> {
    let mut out = WorkerOut::default();
    let mut rng = SmallRng::seed_from_u64(rng_seed);
    for &(record, walk_index) in chunk {
        let f = record.decode();
        let pre = ctx.starts[f.pre_block as usize] + f.pre_offset;
        let cur = ctx.starts[f.cur_block as usize] + f.cur_offset;
        let mut w = LiveWalk {
            source: f.source,
            pre,
            cur,
            hop: f.hop,
        };
        let before: StateKey = (w.source, w.pre, w.cur, w.hop);
        let mut draws = if ctx.deterministic {
            Draws::Keyed {
                seed: ctx.seed,
                source: w.source,
                walk_index,
            }
        } else {
            Draws::Sequential(&mut rng)
        };
        let mut appended = Vec::new();
        let outcome = update_walk(ctx, &mut w, &mut draws, &mut appended, &mut out)?;
        let after: StateKey = (w.source, w.pre, w.cur, w.hop);
        match outcome {
            WalkOutcome::Finished => {
                out.finished.push(FinishedWalk {
                    source: w.source,
                    last: w.cur,
                    hop: w.hop,
                });
                if ctx.assembling {
                    out.events.push(TrajEvent {
                        source: w.source,
                        before,
                        appended,
                        finished: true,
                        after,
                    });
                }
            }
            WalkOutcome::Exited => {
                let (record, pre_block, cur_block) = encode_live(ctx, &w)?;
                let target = route_exited(ctx, pre_block, cur_block)?;
                buffer.append(target, record);
                if ctx.assembling {
                    out.events.push(TrajEvent {
                        source: w.source,
                        before,
                        appended,
                        finished: false,
                        after,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Splits walks across the worker pool, joins in thread order, and returns
/// the per-worker outputs.
fn run_workers(
    ctx: &SlotCtx<'_>,
    walks: &[(Walk128, u64)],
    threads: usize,
    rng_salt: u64,
    buffers: &mut [ThreadBuffer],
) -> Result<Vec<WorkerOut>> {
    let chunk_size = walks.len().div_ceil(threads).max(1);
    let chunks: Vec<&[(Walk128, u64)]> = walks.chunks(chunk_size).collect();
    if chunks.len() == 1 {
        // Run the single chunk inline.
        let seed = mix64(ctx.seed ^ mix64(rng_salt));
        return Ok(vec![process_chunk(ctx, chunks[0], seed, &mut buffers[0])?]);
    }
    let results: Vec<Result<WorkerOut>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(chunks.len());
        for ((worker, chunk), buffer) in chunks.iter().enumerate().zip(buffers.iter_mut()) {
            let seed = mix64(ctx.seed ^ mix64(rng_salt.wrapping_mul(1024) + worker as u64 + 1));
            handles.push(scope.spawn(move || process_chunk(ctx, chunk, seed, buffer)));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Current-block scheduling
// ---------------------------------------------------------------------------

struct SchedulerState {
    kind: Scheduler,
    domain: u32,
    pos: u64,
    last_sweep: Option<u64>,
}

impl SchedulerState {
    fn new(kind: Scheduler, block_count: u32, mode: EngineMode) -> SchedulerState {
        // Under skewed storage the pool of the last block is structurally
        // empty (it would need both endpoints in one block), so the
        // triangular engine's current blocks stop one short.
        let domain = match mode {
            EngineMode::Triangular => block_count.saturating_sub(1),
            EngineMode::PlainBucket => block_count,
        };
        SchedulerState {
            kind,
            domain,
            pos: 0,
            last_sweep: None,
        }
    }

    /// Picks the next current block. The boolean reports that a full cyclic
    /// sweep closed before this slot (cyclic schedulers only).
    fn next(&mut self, pools: &PoolSet, rng: &mut SmallRng) -> Option<(u32, bool)> {
        if self.domain == 0 {
            return None;
        }
        let d = self.domain as u64;
        match self.kind {
            Scheduler::Iteration => {
                for k in 0..d {
                    let vp = self.pos + k;
                    let b = (vp % d) as u32;
                    if pools.walk_count(b) > 0 {
                        let sweep = vp / d;
                        let closed = self.last_sweep.is_some_and(|s| sweep > s);
                        self.last_sweep = Some(sweep);
                        self.pos = vp + 1;
                        return Some((b, closed));
                    }
                }
                None
            }
            Scheduler::Alphabet => {
                let vp = self.pos;
                let b = (vp % d) as u32;
                let sweep = vp / d;
                let closed = self.last_sweep.is_some_and(|s| sweep > s);
                self.last_sweep = Some(sweep);
                self.pos = vp + 1;
                Some((b, closed))
            }
            Scheduler::MinHeight => self.pick_nonempty(pools, |pools, b| {
                pools.min_hop(b).unwrap_or(u32::MAX) as u64
            }),
            Scheduler::MaxSum => {
                self.pick_nonempty(pools, |pools, b| u64::MAX - pools.walk_count(b))
            }
            Scheduler::GraphWalkerMix { max_sum_prob } => {
                if rng.gen::<f64>() < max_sum_prob {
                    self.pick_nonempty(pools, |pools, b| u64::MAX - pools.walk_count(b))
                } else {
                    self.pick_nonempty(pools, |pools, b| {
                        pools.min_hop(b).unwrap_or(u32::MAX) as u64
                    })
                }
            }
        }
    }

    fn pick_nonempty<F: Fn(&PoolSet, u32) -> u64>(
        &self,
        pools: &PoolSet,
        score: F,
    ) -> Option<(u32, bool)> {
        (0..self.domain)
            .filter(|&b| pools.walk_count(b) > 0)
            .min_by_key(|&b| (score(pools, b), b))
            .map(|b| (b, false))
    }
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

pub fn run(
    store: &GraphStore,
    starts: &[(u64, u64)],
    cfg: &EngineConfig,
    model_set: Option<&LoaderModelSet>,
    sink: &mut dyn TrajectorySink,
    hooks: RunHooks<'_>,
) -> Result<RunReport> {
    validate_config(store, starts, cfg, model_set)?;
    let mut engine = Engine::new(store, cfg, model_set, sink, hooks)?;
    engine.initialize_walks(starts)?;
    engine.drive()?;
    engine.finish()
}

fn validate_config(
    store: &GraphStore,
    starts: &[(u64, u64)],
    cfg: &EngineConfig,
    model_set: Option<&LoaderModelSet>,
) -> Result<()> {
    if cfg.threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    if cfg.flush_threshold == 0 {
        return Err(Error::Config("flush threshold must be at least 1".into()));
    }
    cfg.termination.validate()?;
    if let WalkModel::Node2vec(p) = cfg.model {
        Node2vecParams::new(p.p, p.q)?;
    }
    if let Scheduler::GraphWalkerMix { max_sum_prob } = cfg.scheduler {
        if !(0.0 < max_sum_prob && max_sum_prob < 1.0) {
            return Err(Error::Config("mix probability must be in (0, 1)".into()));
        }
    }
    if cfg.loading_mode == LoadingMode::Learned && model_set.is_none() {
        return Err(Error::Config(
            "learned loading needs a fitted loader model".into(),
        ));
    }
    if starts.iter().map(|&(_, c)| c).sum::<u64>() == 0 {
        return Err(Error::Config("no walks to start".into()));
    }
    for &(source, count) in starts {
        if source >= store.vertex_count() {
            return Err(Error::VertexOutOfRange(source, store.vertex_count()));
        }
        if cfg.deterministic && count != 1 {
            return Err(Error::Config(
                "deterministic mode runs exactly one walk per source; the pooled \
                 walk record cannot carry a walk index"
                    .into(),
            ));
        }
    }
    Ok(())
}

struct Engine<'a> {
    store: &'a GraphStore,
    cfg: &'a EngineConfig,
    model_set: Option<&'a LoaderModelSet>,
    sink: &'a mut dyn TrajectorySink,
    hooks: RunHooks<'a>,
    law: StorageLaw,
    pools: PoolSet,
    table: TrajTable,
    assembling: bool,
    metrics: Metrics,
    samples: Vec<LoadSample>,
    started: u64,
    finished: u64,
    rng: SmallRng,
    rng_salt: u64,
    io_start: crate::store::IoSnapshot,
    wall_start: Instant,
    sweep_current_loads: u64,
    sweep_ancillary_loads: u64,
}

impl<'a> Engine<'a> {
    fn new(
        store: &'a GraphStore,
        cfg: &'a EngineConfig,
        model_set: Option<&'a LoaderModelSet>,
        sink: &'a mut dyn TrajectorySink,
        hooks: RunHooks<'a>,
    ) -> Result<Engine<'a>> {
        let law = match cfg.engine_mode {
            EngineMode::Triangular => StorageLaw::Skewed,
            EngineMode::PlainBucket => StorageLaw::CurrentBlock,
        };
        let pools = PoolSet::create(
            &store.walks_dir(),
            store.block_count(),
            cfg.flush_threshold,
            law,
        )?;
        let assembling = sink.wants_trajectories();
        Ok(Engine {
            store,
            cfg,
            model_set,
            sink,
            hooks,
            law,
            pools,
            table: TrajTable::default(),
            assembling,
            metrics: Metrics::default(),
            samples: Vec::new(),
            started: 0,
            finished: 0,
            rng: SmallRng::seed_from_u64(mix64(cfg.seed ^ 0x5343_4845_4455_4c45)),
            rng_salt: 0,
            io_start: store.counters().snapshot(),
            wall_start: Instant::now(),
            sweep_current_loads: 0,
            sweep_ancillary_loads: 0,
        })
    }

    fn slot_ctx<'c>(
        &'c self,
        cur_data: &'c BlockData,
        anc_data: Option<&'c BlockData>,
        ancillary_block: Option<u32>,
    ) -> SlotCtx<'c> {
        SlotCtx {
            store: self.store,
            starts: self.store.starts(),
            model: self.cfg.model,
            termination: self.cfg.termination,
            seed: self.cfg.seed,
            deterministic: self.cfg.deterministic,
            law: self.law,
            cur_data,
            anc_data,
            current_block: cur_data.block(),
            ancillary_block,
            assembling: self.assembling,
        }
    }

    /// Runs every start inside its source block until it terminates or
    /// crosses a block boundary; survivors are persisted under the storage
    /// law. Afterwards no pooled walk has both endpoints in one block.
    fn initialize_walks(&mut self, starts: &[(u64, u64)]) -> Result<()> {
        let mut by_block: BTreeMap<u32, Vec<(u64, u64)>> = BTreeMap::new();
        for &(source, count) in starts {
            self.started += count;
            by_block
                .entry(self.store.block_of(source)?)
                .or_default()
                .push((source, count));
        }
        self.metrics.walks_started = self.started;
        for (block, group) in by_block {
            let t_load = Instant::now();
            let cur_data = self.store.load_block_full(block)?;
            self.metrics.load_seconds += t_load.elapsed().as_secs_f64();

            let mut seeds: Vec<(Walk128, u64)> = Vec::new();
            for &(source, count) in &group {
                for k in 0..count {
                    // hop 0: previous == current == source.
                    let offset = source - self.store.starts()[block as usize];
                    let record = WalkFields {
                        source,
                        pre_offset: offset,
                        cur_offset: offset,
                        pre_block: block,
                        cur_block: block,
                        hop: 0,
                    }
                    .encode()?;
                    seeds.push((record, k));
                    if self.assembling {
                        self.table.start(source);
                    }
                }
            }

            let t_exec = Instant::now();
            let mut buffers: Vec<ThreadBuffer> =
                (0..self.cfg.threads).map(|_| ThreadBuffer::new()).collect();
            self.rng_salt += 1;
            let ctx = self.slot_ctx(&cur_data, None, None);
            let outs = run_workers(&ctx, &seeds, self.cfg.threads, self.rng_salt, &mut buffers)?;
            self.metrics.execute_seconds += t_exec.elapsed().as_secs_f64();
            self.absorb_worker_outs(outs)?;
            self.drain_pool_targets(&mut buffers)?;
            debug_assert!(buffers.iter().all(|b| b.is_empty()));
        }
        if self.cfg.validate {
            self.check_invariants("initialization")?;
        }
        Ok(())
    }

    fn drive(&mut self) -> Result<()> {
        let mut sched = SchedulerState::new(
            self.cfg.scheduler,
            self.store.block_count(),
            self.cfg.engine_mode,
        );
        while self.finished < self.started {
            let Some((b, sweep_closed)) = sched.next(&self.pools, &mut self.rng) else {
                return Err(Error::Invariant(format!(
                    "{} walks unfinished but every pool is empty",
                    self.started - self.finished
                )));
            };
            if sweep_closed {
                self.close_sweep();
            }
            self.run_time_slot(b)?;
        }
        if sched.last_sweep.is_some() {
            self.close_sweep();
        }
        Ok(())
    }

    fn close_sweep(&mut self) {
        let index = self.metrics.sweeps_executed;
        self.metrics.sweeps.push(SweepMetrics {
            index,
            current_loads: self.sweep_current_loads,
            ancillary_loads: self.sweep_ancillary_loads,
            min_pooled_hop: self.pools.min_hop_overall(),
            pooled_walks: self.pools.total_walks(),
        });
        self.metrics.sweeps_executed += 1;
        self.sweep_current_loads = 0;
        self.sweep_ancillary_loads = 0;
    }

    /// One time slot: drain the pool of `b`, collect buckets, load `b`
    /// fully, then execute each nonempty bucket in ascending partner order
    /// with its ancillary block resident.
    fn run_time_slot(&mut self, b: u32) -> Result<()> {
        let slot = self.metrics.slots_executed;
        let nb = self.store.block_count();

        let t_load = Instant::now();
        let current_walks = self.pools.load_walks(b)?;
        let mut buckets = collect_buckets(current_walks, b, nb, self.law)?;
        let cur_data = self.store.load_block_full(b)?;
        self.sweep_current_loads += 1;
        self.metrics.load_seconds += t_load.elapsed().as_secs_f64();

        let mut buffers: Vec<ThreadBuffer> =
            (0..self.cfg.threads).map(|_| ThreadBuffer::new()).collect();

        let partners: Vec<u32> = match self.cfg.engine_mode {
            EngineMode::Triangular => (b + 1..nb).collect(),
            EngineMode::PlainBucket => (0..nb).filter(|&i| i != b).collect(),
        };
        for i in partners {
            merge_buffers_into_bucket(&mut buffers, &mut buckets[i as usize]);
            let walks = std::mem::take(&mut buckets[i as usize].walks);
            if walks.is_empty() {
                continue;
            }
            self.execute_bucket(slot, &cur_data, i, walks, &mut buffers)?;
        }

        self.drain_pool_targets(&mut buffers)?;
        debug_assert!(
            buffers.iter().all(|bf| bf.is_empty()),
            "every bucket target must have been merged within the slot"
        );
        debug_assert!(buckets.iter().all(|bk| bk.walks.is_empty()));
        drop(cur_data);
        self.metrics.slots_executed += 1;
        if self.cfg.validate {
            self.check_invariants(&format!("slot {slot}"))?;
        }
        Ok(())
    }

    fn execute_bucket(
        &mut self,
        slot: u64,
        cur_data: &BlockData,
        i: u32,
        walks: Vec<Walk128>,
        buffers: &mut [ThreadBuffer],
    ) -> Result<()> {
        let span = self.store.block_span(i)?;
        let eta = walks.len() as f64 / span as f64;
        let mode = match self.cfg.loading_mode {
            LoadingMode::AlwaysFull => LoadMode::Full,
            LoadingMode::AlwaysOnDemand => LoadMode::OnDemand,
            LoadingMode::Learned => {
                self.model_set
                    .expect("validated")
                    .choose_mode(i, walks.len() as u64, span)?
            }
        };

        let t_load = Instant::now();
        let anc_data = match mode {
            LoadMode::Full => self.store.load_block_full(i)?,
            LoadMode::OnDemand => {
                let activated = self.activated_vertices(&walks, i);
                self.store.load_block_on_demand(i, &activated)?
            }
        };
        self.sweep_ancillary_loads += 1;
        let load_elapsed = t_load.elapsed().as_secs_f64();
        self.metrics.load_seconds += load_elapsed;

        let t_exec = Instant::now();
        let records: Vec<(Walk128, u64)> = walks.into_iter().map(|w| (w, 0)).collect();
        self.rng_salt += 1;
        let ctx = self.slot_ctx(cur_data, Some(&anc_data), Some(i));
        let outs = run_workers(&ctx, &records, self.cfg.threads, self.rng_salt, buffers)?;
        let exec_elapsed = t_exec.elapsed().as_secs_f64();
        self.metrics.execute_seconds += exec_elapsed;
        self.absorb_worker_outs(outs)?;

        self.metrics.io_utilization.push(UtilizationSample {
            slot,
            loaded_neighbor_bytes: anc_data.loaded_neighbor_bytes(),
            touched_neighbor_bytes: anc_data.touched_neighbor_bytes(),
        });
        if self.cfg.collect_load_samples {
            let total_time = match self.hooks.load_timer {
                Some(f) => f(i, mode, eta),
                None => load_elapsed + exec_elapsed,
            };
            self.samples.push(LoadSample {
                block: i,
                mode,
                eta,
                total_time,
            });
        }
        Ok(())
    }

    /// The activated set of an on-demand ancillary load: every bucket
    /// walk's endpoints that fall in the block. First-order walks never
    /// read the previous vertex, so only current endpoints activate.
    fn activated_vertices(&self, walks: &[Walk128], block: u32) -> Vec<u64> {
        let starts = self.store.starts();
        let (lo, hi) = (starts[block as usize], starts[block as usize + 1]);
        let second_order = self.cfg.model.second_order();
        let mut activated = Vec::new();
        for w in walks {
            let f = w.decode();
            let cur = starts[f.cur_block as usize] + f.cur_offset;
            if cur >= lo && cur < hi {
                activated.push(cur);
            }
            if second_order {
                let pre = starts[f.pre_block as usize] + f.pre_offset;
                if pre >= lo && pre < hi {
                    activated.push(pre);
                }
            }
        }
        activated.sort_unstable();
        activated.dedup();
        activated
    }

    fn absorb_worker_outs(&mut self, outs: Vec<WorkerOut>) -> Result<()> {
        for out in outs {
            self.metrics.steps_sampled += out.steps;
            self.finished += out.finished.len() as u64;
            if self.assembling {
                for ev in out.events {
                    self.table.apply(ev, self.sink)?;
                }
            } else {
                for fw in out.finished {
                    self.sink.walk_finished(fw.source, fw.last, fw.hop, None);
                }
            }
        }
        self.metrics.walks_finished = self.finished;
        Ok(())
    }

    fn drain_pool_targets(&mut self, buffers: &mut [ThreadBuffer]) -> Result<()> {
        for buf in buffers.iter_mut() {
            for (pool, walks) in buf.drain_pool_targets() {
                for w in walks {
                    self.pools.associate_with_block(w, pool)?;
                }
            }
        }
        Ok(())
    }

    /// Storage-law scan and walk conservation, at a drain point.
    fn check_invariants(&self, at: &str) -> Result<()> {
        let pooled = self.pools.total_walks();
        if self.finished + pooled != self.started {
            return Err(Error::Invariant(format!(
                "walk conservation broken at {at}: {} finished + {pooled} pooled != {} started",
                self.finished, self.started
            )));
        }
        for b in 0..self.store.block_count() {
            for w in self.pools.scan(b)? {
                let f = w.decode();
                if f.pre_block == f.cur_block {
                    return Err(Error::Invariant(format!(
                        "walk with both endpoints in block {} found at {at}",
                        f.pre_block
                    )));
                }
                let expected = self.law.pool_for(f.pre_block, f.cur_block)?;
                if expected != b {
                    return Err(Error::Invariant(format!(
                        "walk ({}, {}) pooled under {b}, law says {expected}, at {at}",
                        f.pre_block, f.cur_block
                    )));
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RunReport> {
        if self.pools.total_walks() != 0 {
            return Err(Error::Invariant("walk pools not empty at exit".into()));
        }
        if self.assembling && !self.table.is_empty() {
            return Err(Error::Invariant("unfinished trajectories at exit".into()));
        }
        self.metrics.walk_io_bytes = self.pools.walk_io_bytes();
        let io = self.store.counters().snapshot().since(&self.io_start);
        self.metrics.absorb_io(&io);
        self.metrics.wall_seconds = self.wall_start.elapsed().as_secs_f64();
        self.pools.cleanup();
        Ok(RunReport {
            metrics: self.metrics,
            load_samples: self.samples,
        })
    }
}
