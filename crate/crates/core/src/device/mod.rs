//! Emulated SIMT device: grids of thread blocks, warps of 32 threads, banked
//! shared memory, and counters for shared-memory serialization and
//! global/texture transactions.
//!
//! Shared memory is addressed in 32-bit words for capacity and banking
//! purposes, while each word holds an `f64` value. Global buffers are `f64`
//! arrays; integer records are stored as exactly representable `f64`s.
//!
//! A kernel is a sequence of phases separated by barriers. All threads of a
//! block run phase `p` before any runs phase `p + 1`; within a phase threads
//! run one after another, so correct kernels must not communicate through
//! shared memory inside a phase. Blocks run one at a time in a configurable
//! order and may not communicate at all.

pub mod cost;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{global_transaction_count, shared_conflict_cost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub warp_size: usize,
    pub banks: usize,
    pub shared_bytes: usize,
    pub max_threads: usize,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec { warp_size: 32, banks: 16, shared_bytes: 16384, max_threads: 512 }
    }
}

impl DeviceSpec {
    pub fn half_warp(&self) -> usize {
        self.warp_size / 2
    }

    pub fn shared_words(&self) -> usize {
        self.shared_bytes / 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dim3 {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Dim3 {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Dim3 { x, y, z }
    }

    pub fn size(&self) -> usize {
        self.x * self.y * self.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BlockOrder {
    #[default]
    Forward,
    /// Blocks and the threads inside each phase in reverse.
    Reverse,
    /// Blocks and threads permuted by a seeded RNG.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LaunchOptions {
    pub order: BlockOrder,
    /// Record per-thread accesses and fill the shared/global counters.
    pub trace: bool,
}

impl LaunchOptions {
    pub fn traced() -> Self {
        LaunchOptions { order: BlockOrder::Forward, trace: true }
    }
}

/// Counters accumulated over launches. Request counts are per half-warp.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemStats {
    pub launches: u64,
    pub blocks: u64,
    pub threads: u64,
    pub shared_requests: u64,
    /// Sum over half-warp requests of the larger serialization degree of the
    /// two half-warps of the same warp: a conflict in one half stalls both.
    pub shared_cycles: u64,
    /// Half-warp requests whose own degree exceeds 1.
    pub shared_conflicted_requests: u64,
    pub shared_max_degree: u64,
    pub global_requests: u64,
    pub global_transactions: u64,
    pub global_bytes: u64,
    pub texture_requests: u64,
    pub texture_transactions: u64,
    pub texture_bytes: u64,
}

impl MemStats {
    pub fn merge(&mut self, o: &MemStats) {
        self.launches += o.launches;
        self.blocks += o.blocks;
        self.threads += o.threads;
        self.shared_requests += o.shared_requests;
        self.shared_cycles += o.shared_cycles;
        self.shared_conflicted_requests += o.shared_conflicted_requests;
        self.shared_max_degree = self.shared_max_degree.max(o.shared_max_degree);
        self.global_requests += o.global_requests;
        self.global_transactions += o.global_transactions;
        self.global_bytes += o.global_bytes;
        self.texture_requests += o.texture_requests;
        self.texture_transactions += o.texture_transactions;
        self.texture_bytes += o.texture_bytes;
    }

    /// Shared cycles per shared request; 1.0 means conflict-free.
    pub fn serialization_factor(&self) -> f64 {
        if self.shared_requests == 0 {
            1.0
        } else {
            self.shared_cycles as f64 / self.shared_requests as f64
        }
    }

    /// `alpha * shared cycles + beta * (global + texture transactions)`.
    pub fn weighted_cost(&self, w: CostWeights) -> f64 {
        w.alpha * self.shared_cycles as f64 + w.beta * (self.global_transactions + self.texture_transactions) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { alpha: 1.0, beta: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BufId(pub usize);

/// Device global memory: named `f64` buffers.
#[derive(Debug, Default, Clone)]
pub struct Memory {
    bufs: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, name: &str, data: Vec<f64>) -> BufId {
        self.bufs.push(data);
        self.names.push(name.to_string());
        BufId(self.bufs.len() - 1)
    }

    pub fn zeros(&mut self, name: &str, len: usize) -> BufId {
        self.alloc(name, vec![0.0; len])
    }

    pub fn get(&self, id: BufId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: BufId) -> &mut Vec<f64> {
        &mut self.bufs[id.0]
    }

    pub fn name(&self, id: BufId) -> &str {
        &self.names[id.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Wait at the barrier ending this phase.
    Sync,
    /// Finish the kernel.
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    SharedLoad,
    SharedStore,
    GlobalLoad,
    GlobalStore,
    Texture,
}

const CLASSES: [Class; 5] = [Class::SharedLoad, Class::SharedStore, Class::GlobalLoad, Class::GlobalStore, Class::Texture];

#[derive(Debug, Clone, Copy)]
struct Access {
    class: Class,
    buf: usize,
    idx: usize,
}

/// Per-thread view of the machine during one phase.
pub struct ThreadCtx<'a> {
    pub thread: Dim3,
    pub block: Dim3,
    pub block_dim: Dim3,
    pub grid_dim: Dim3,
    mem: &'a mut Memory,
    shared: &'a mut [f64],
    trace: Option<&'a mut Vec<Access>>,
}

impl ThreadCtx<'_> {
    /// Linear thread index, x fastest.
    pub fn tid(&self) -> usize {
        self.thread.x + self.block_dim.x * (self.thread.y + self.block_dim.y * self.thread.z)
    }

    /// Linear block index, x fastest.
    pub fn bid(&self) -> usize {
        self.block.x + self.grid_dim.x * (self.block.y + self.grid_dim.y * self.block.z)
    }

    fn record(&mut self, class: Class, buf: usize, idx: usize) {
        if let Some(t) = self.trace.as_deref_mut() {
            t.push(Access { class, buf, idx });
        }
    }

    pub fn load(&mut self, buf: BufId, idx: usize) -> f64 {
        self.record(Class::GlobalLoad, buf.0, idx);
        self.mem.bufs[buf.0][idx]
    }

    pub fn store(&mut self, buf: BufId, idx: usize, v: f64) {
        self.record(Class::GlobalStore, buf.0, idx);
        self.mem.bufs[buf.0][idx] = v;
    }

    /// Read through the texture path (read-only, counted separately).
    pub fn tex(&mut self, buf: BufId, idx: usize) -> f64 {
        self.record(Class::Texture, buf.0, idx);
        self.mem.bufs[buf.0][idx]
    }

    pub fn sload(&mut self, addr: usize) -> f64 {
        self.record(Class::SharedLoad, 0, addr);
        self.shared[addr]
    }

    pub fn sstore(&mut self, addr: usize, v: f64) {
        self.record(Class::SharedStore, 0, addr);
        self.shared[addr] = v;
    }
}

/// One shared-memory request of one half-warp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SharedRequest {
    /// Linear block index.
    pub block: usize,
    pub phase: usize,
    pub warp: usize,
    /// 0 or 1 within the warp.
    pub half: usize,
    /// Per-thread access index within the phase.
    pub access: usize,
    pub store: bool,
    /// Linear thread indices taking part.
    pub threads: Vec<usize>,
    pub addresses: Vec<usize>,
    /// Serialization degree of this half-warp alone.
    pub degree: usize,
}

pub trait Kernel {
    type Regs: Default + Clone;
    fn phase(&self, phase: usize, ctx: &mut ThreadCtx<'_>, regs: &mut Self::Regs) -> Step;
}

#[derive(Debug, Clone, Default)]
pub struct Device {
    pub spec: DeviceSpec,
}

impl Device {
    pub fn new(spec: DeviceSpec) -> Self {
        Device { spec }
    }

    pub fn launch<K: Kernel>(
        &self,
        mem: &mut Memory,
        grid: Dim3,
        block: Dim3,
        shared_words: usize,
        kernel: &K,
        opts: LaunchOptions,
    ) -> Result<MemStats> {
        self.run(mem, grid, block, shared_words, kernel, opts, None)
    }

    /// Traced launch that also returns every shared-memory half-warp request.
    pub fn launch_logged<K: Kernel>(
        &self,
        mem: &mut Memory,
        grid: Dim3,
        block: Dim3,
        shared_words: usize,
        kernel: &K,
        order: BlockOrder,
    ) -> Result<(MemStats, Vec<SharedRequest>)> {
        let mut log = Vec::new();
        let stats = self.run(mem, grid, block, shared_words, kernel, LaunchOptions { order, trace: true }, Some(&mut log))?;
        Ok((stats, log))
    }

    #[allow(clippy::too_many_arguments)]
    fn run<K: Kernel>(
        &self,
        mem: &mut Memory,
        grid: Dim3,
        block: Dim3,
        shared_words: usize,
        kernel: &K,
        opts: LaunchOptions,
        mut log: Option<&mut Vec<SharedRequest>>,
    ) -> Result<MemStats> {
        let threads = block.size();
        if threads == 0 || threads > self.spec.max_threads {
            return Err(Error::TooManyThreads { threads, limit: self.spec.max_threads });
        }
        if shared_words * 4 > self.spec.shared_bytes {
            return Err(Error::SharedOverflow { requested: shared_words * 4, capacity: self.spec.shared_bytes });
        }
        let mut stats = MemStats { launches: 1, ..Default::default() };
        let n_blocks = grid.size();
        let mut block_order: Vec<usize> = (0..n_blocks).collect();
        let mut thread_order: Vec<usize> = (0..threads).collect();
        let mut rng = match opts.order {
            BlockOrder::Shuffled(seed) => Some(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        match opts.order {
            BlockOrder::Forward => {}
            BlockOrder::Reverse => {
                block_order.reverse();
                thread_order.reverse();
            }
            BlockOrder::Shuffled(_) => block_order.shuffle(rng.as_mut().unwrap()),
        }

        let mut shared = vec![0.0; shared_words];
        let mut regs = vec![K::Regs::default(); threads];
        let mut traces: Vec<Vec<Access>> = vec![Vec::new(); if opts.trace { threads } else { 0 }];
        let coords: Vec<Dim3> = (0..threads)
            .map(|t| Dim3::new(t % block.x, (t / block.x) % block.y, t / (block.x * block.y)))
            .collect();

        for &b in &block_order {
            let bcoord = Dim3::new(b % grid.x, (b / grid.x) % grid.y, b / (grid.x * grid.y));
            shared.iter_mut().for_each(|s| *s = 0.0);
            regs.iter_mut().for_each(|r| *r = K::Regs::default());
            let mut phase = 0;
            loop {
                if let Some(r) = rng.as_mut() {
                    thread_order.shuffle(r);
                }
                let mut n_sync = 0;
                for &t in &thread_order {
                    let mut ctx = ThreadCtx {
                        thread: coords[t],
                        block: bcoord,
                        block_dim: block,
                        grid_dim: grid,
                        mem,
                        shared: &mut shared,
                        trace: traces.get_mut(t),
                    };
                    if kernel.phase(phase, &mut ctx, &mut regs[t]) == Step::Sync {
                        n_sync += 1;
                    }
                }
                if opts.trace {
                    self.account(&mut traces, &mut stats, (b, phase), log.as_deref_mut());
                }
                if n_sync == 0 {
                    break;
                }
                if n_sync != threads {
                    return Err(Error::BarrierDivergence { block: b, barrier: phase, arrived: n_sync, threads });
                }
                phase += 1;
            }
        }
        stats.blocks = n_blocks as u64;
        stats.threads = (n_blocks * threads) as u64;
        Ok(stats)
    }

    /// Folds one phase's per-thread traces into the counters and clears them.
    fn account(&self, traces: &mut [Vec<Access>], stats: &mut MemStats, at: (usize, usize), mut log: Option<&mut Vec<SharedRequest>>) {
        let half = self.spec.half_warp();
        let threads = traces.len();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); self.spec.warp_size];
        for class in CLASSES {
            for w0 in (0..threads).step_by(self.spec.warp_size) {
                let w1 = (w0 + self.spec.warp_size).min(threads);
                let mut max_len = 0;
                for t in w0..w1 {
                    let l = &mut lists[t - w0];
                    l.clear();
                    l.extend(traces[t].iter().enumerate().filter(|(_, a)| a.class == class).map(|(i, _)| i));
                    max_len = max_len.max(l.len());
                }
                for k in 0..max_len {
                    let mut degrees = [0usize; 2];
                    for (h, d) in degrees.iter_mut().enumerate() {
                        let lo = w0 + h * half;
                        let hi = (lo + half).min(w1);
                        let accesses: Vec<Access> = (lo..hi)
                            .filter_map(|t| lists[t - w0].get(k).map(|&i| traces[t][i]))
                            .collect();
                        if accesses.is_empty() {
                            continue;
                        }
                        match class {
                            Class::SharedLoad | Class::SharedStore => {
                                let addrs: Vec<usize> = accesses.iter().map(|a| a.idx).collect();
                                *d = shared_conflict_cost(&addrs, self.spec.banks);
                                if let Some(l) = log.as_deref_mut() {
                                    l.push(SharedRequest {
                                        block: at.0,
                                        phase: at.1,
                                        warp: w0 / self.spec.warp_size,
                                        half: h,
                                        access: k,
                                        store: class == Class::SharedStore,
                                        threads: (lo..hi).filter(|&t| lists[t - w0].get(k).is_some()).collect(),
                                        addresses: addrs.clone(),
                                        degree: *d,
                                    });
                                }
                                stats.shared_requests += 1;
                                if *d > 1 {
                                    stats.shared_conflicted_requests += 1;
                                }
                                stats.shared_max_degree = stats.shared_max_degree.max(*d as u64);
                            }
                            _ => {
                                let pairs: Vec<(usize, usize)> = accesses.iter().map(|a| (a.buf, a.idx)).collect();
                                let tx = global_transaction_count(&pairs, half) as u64;
                                let bytes = 4 * pairs.len() as u64;
                                if class == Class::Texture {
                                    stats.texture_requests += 1;
                                    stats.texture_transactions += tx;
                                    stats.texture_bytes += bytes;
                                } else {
                                    stats.global_requests += 1;
                                    stats.global_transactions += tx;
                                    stats.global_bytes += bytes;
                                }
                            }
                        }
                    }
                    let active = degrees.iter().filter(|&&d| d > 0).count() as u64;
                    stats.shared_cycles += active * degrees[0].max(degrees[1]) as u64;
                }
            }
        }
        traces.iter_mut().for_each(|t| t.clear());
    }
}
