//! DG operator stages as device kernels, the host-side pipeline that
//! launches them, the low-storage Runge-Kutta integrator, and dense oracles.

mod assemble;
mod diff;
mod gather;
mod lift;
pub mod oracle;
pub mod rk;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{BufId, Device, Dim3, Kernel, LaunchOptions, MemStats, Memory, SharedRequest};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::layout::{DESCRIPTOR_WORDS, HEADER_WORDS};
use crate::refelem::reference_face_area;

pub use diff::MatrixStorage;

/// Upper bound on `w_i` (register arrays are fixed-size).
pub const MAX_INLINE: usize = 8;
/// Upper bound on the number of fields a conservation law may carry.
pub const MAX_FIELDS: usize = 8;
/// Highest order at which the matrix-in-shared differentiation fits.
pub const MAX_MATRIX_IN_SHARED_ORDER: usize = 6;
const POINTWISE_THREADS: usize = 256;

/// A linear conservation law `Q du/dt + div F(u) = 0` with `F_nu(u) = A_nu u`.
pub trait ConservationLaw {
    fn num_fields(&self) -> usize;
    /// `A_nu`, row-major `n x n`.
    fn flux_matrix(&self, nu: usize) -> Vec<f64>;
    /// Diagonal of `Q^-1`.
    fn inv_q(&self) -> Vec<f64>;
    /// `n . (F - F*)` at one face node; `normal` points out of the minus side.
    fn numerical_flux(&self, um: &[f64], up: &[f64], normal: [f64; 3], out: &mut [f64]);
    /// Exterior state for a boundary face.
    fn boundary_state(&self, um: &[f64], normal: [f64; 3], tag: u32, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    MatrixInShared,
    FieldInShared,
}

/// Thread-to-DOF assignment of the field-in-shared kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreadOrder {
    /// Block `N_pM x w_p`: consecutive threads walk one microblock.
    Conventional,
    /// Block `16 x w_p x N_pM/16`: half-warps of equal DOF range from
    /// different microblocks are grouped into the same warp.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub w_p: usize,
    pub w_i: usize,
    pub w_s: usize,
    pub m_b: usize,
    pub strategy: Strategy,
    pub n_r: usize,
    pub storage: MatrixStorage,
    pub thread_order: ThreadOrder,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            w_p: 1,
            w_i: 1,
            w_s: 1,
            m_b: 1,
            strategy: Strategy::FieldInShared,
            n_r: 16,
            storage: MatrixStorage::Segmented,
            thread_order: ThreadOrder::Interleaved,
        }
    }
}

impl KernelConfig {
    pub fn field(w_p: usize, w_i: usize) -> Self {
        KernelConfig { w_p, w_i, ..Default::default() }
    }

    pub fn matrix(w_p: usize, w_i: usize, w_s: usize, n_r: usize) -> Self {
        KernelConfig { w_p, w_i, w_s, n_r, strategy: Strategy::MatrixInShared, ..Default::default() }
    }
}

/// One row of the shipped table of hardware-tuned parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedParams {
    pub order: usize,
    pub k_m: usize,
    pub diff_shared: SharedChoice,
    pub diff_wp: usize,
    pub diff_wi: usize,
    pub diff_ws: usize,
    pub gather_mb: usize,
    pub gather_wp: usize,
    pub lift_shared: SharedChoice,
    pub lift_wp: usize,
    pub lift_wi: usize,
    pub lift_ws: usize,
}

/// `"matrix"` or `"field"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharedChoice {
    Matrix,
    Field,
}

impl From<SharedChoice> for Strategy {
    fn from(s: SharedChoice) -> Self {
        match s {
            SharedChoice::Matrix => Strategy::MatrixInShared,
            SharedChoice::Field => Strategy::FieldInShared,
        }
    }
}

pub const PUBLISHED_TABLE_CSV: &str = include_str!("../../data/published_params.csv");

pub fn published_params() -> Vec<PublishedParams> {
    let mut rdr = csv::Reader::from_reader(PUBLISHED_TABLE_CSV.as_bytes());
    rdr.deserialize().map(|r| r.expect("shipped parameter table parses")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub diff: KernelConfig,
    pub gather: KernelConfig,
    pub lift: KernelConfig,
}

impl OperatorConfig {
    /// Published parameters for this order, reduced until every kernel fits
    /// the device for the discretization's layout.
    pub fn published_default(disc: &Discretization) -> OperatorConfig {
        let p = published_params().into_iter().find(|p| p.order == disc.order()).expect("orders 1..=9 are tabulated");
        let mut diff = KernelConfig { w_p: p.diff_wp, w_i: p.diff_wi, w_s: p.diff_ws, strategy: p.diff_shared.into(), ..Default::default() };
        if diff.strategy == Strategy::MatrixInShared && disc.order() > MAX_MATRIX_IN_SHARED_ORDER {
            diff.strategy = Strategy::FieldInShared;
        }
        let gather = KernelConfig { w_p: p.gather_wp, m_b: disc.gather.m_b, ..Default::default() };
        let lift = KernelConfig { w_p: p.lift_wp, w_i: p.lift_wi, w_s: p.lift_ws, ..Default::default() };
        let dev = Device::default();
        OperatorConfig {
            diff: shrink(diff, |c| diff_shape(disc, c, &dev).is_ok()),
            gather: shrink(gather, |c| gather_shape(disc, c, &dev, 6).is_ok()),
            lift: shrink(lift, |c| lift_shape(disc, c, &dev).is_ok()),
        }
    }
}

fn shrink(mut c: KernelConfig, ok: impl Fn(&KernelConfig) -> bool) -> KernelConfig {
    while !ok(&c) {
        if c.w_p > 1 {
            c.w_p -= 1;
        } else if c.w_i > 1 {
            c.w_i -= 1;
        } else {
            break;
        }
    }
    c
}

/// Launch geometry of one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchShape {
    pub grid: Dim3,
    pub block: Dim3,
    pub shared_words: usize,
}

fn check_common(c: &KernelConfig) -> Result<()> {
    if c.w_p == 0 || c.w_i == 0 || c.w_s == 0 {
        return Err(Error::InvalidConfig("w_p, w_i and w_s must be at least 1".into()));
    }
    if c.w_i > MAX_INLINE {
        return Err(Error::InvalidConfig(format!("w_i = {} exceeds {MAX_INLINE}", c.w_i)));
    }
    Ok(())
}

fn check_device(shape: LaunchShape, dev: &Device) -> Result<LaunchShape> {
    let threads = shape.block.size();
    if threads > dev.spec.max_threads {
        return Err(Error::TooManyThreads { threads, limit: dev.spec.max_threads });
    }
    if shape.shared_words > dev.spec.shared_words() {
        return Err(Error::SharedOverflow { requested: shape.shared_words * 4, capacity: dev.spec.shared_bytes });
    }
    Ok(shape)
}

pub fn lift_shape(disc: &Discretization, c: &KernelConfig, dev: &Device) -> Result<LaunchShape> {
    check_common(c)?;
    if c.strategy != Strategy::FieldInShared {
        return Err(Error::StrategyUnavailable("lifting is implemented with the field in shared memory only".into()));
    }
    let l = &disc.layout;
    let block = match c.thread_order {
        ThreadOrder::Interleaved => Dim3::new(16, c.w_p, l.n_pm / 16),
        ThreadOrder::Conventional => Dim3::new(l.n_pm, c.w_p, 1),
    };
    check_device(
        LaunchShape { grid: Dim3::new(l.n_m.div_ceil(c.w_p * c.w_i), 1, 1), block, shared_words: c.w_p * c.w_i * l.n_fm },
        dev,
    )
}

/// Odd row stride of at least `3 N_p` for the shared differentiation matrix.
pub fn matrix_stride(np: usize) -> usize {
    let s = 3 * np;
    if s % 2 == 0 {
        s + 1
    } else {
        s
    }
}

pub fn diff_shape(disc: &Discretization, c: &KernelConfig, dev: &Device) -> Result<LaunchShape> {
    check_common(c)?;
    let l = &disc.layout;
    match c.strategy {
        Strategy::FieldInShared => check_device(
            LaunchShape {
                grid: Dim3::new(l.n_m.div_ceil(c.w_p * c.w_i), 1, 1),
                block: Dim3::new(16, c.w_p, l.n_pm / 16),
                shared_words: c.w_p * c.w_i * l.n_pm,
            },
            dev,
        ),
        Strategy::MatrixInShared => {
            if disc.order() > MAX_MATRIX_IN_SHARED_ORDER {
                return Err(Error::StrategyUnavailable(format!(
                    "matrix-in-shared differentiation needs order <= {MAX_MATRIX_IN_SHARED_ORDER}, got {}",
                    disc.order()
                )));
            }
            let half = dev.spec.half_warp();
            let stride = matrix_stride(l.num_nodes);
            let (n_r, rows) = match c.storage {
                MatrixStorage::Segmented => {
                    if c.n_r == 0 || c.n_r % half != 0 {
                        return Err(Error::InvalidConfig(format!("N_R = {} is not a multiple of {half}", c.n_r)));
                    }
                    (c.n_r, c.n_r)
                }
                MatrixStorage::Full => (l.n_pm, l.num_nodes),
            };
            check_device(
                LaunchShape {
                    grid: Dim3::new(l.n_pm.div_ceil(n_r), l.n_m.div_ceil(c.w_p * c.w_i * c.w_s), 1),
                    block: Dim3::new(n_r, c.w_p, 1),
                    shared_words: rows * stride,
                },
                dev,
            )
        }
    }
}

pub fn gather_shape(disc: &Discretization, c: &KernelConfig, dev: &Device, n_fields: usize) -> Result<LaunchShape> {
    check_common(c)?;
    if c.m_b != disc.gather.m_b {
        return Err(Error::InvalidConfig(format!("gather plan was built for M_B = {}, config asks {}", disc.gather.m_b, c.m_b)));
    }
    let desc = disc.gather.blocks.iter().map(|b| b.descriptors.len()).max().unwrap_or(0);
    check_device(
        LaunchShape {
            grid: Dim3::new(disc.gather.blocks.len(), 1, 1),
            block: Dim3::new(disc.layout.num_face_nodes, c.w_p, 1),
            shared_words: HEADER_WORDS + desc * DESCRIPTOR_WORDS + n_fields * c.m_b * disc.layout.n_fm,
        },
        dev,
    )
}

/// Constant device data shared by all launches for one discretization.
struct Constants {
    lift: BufId,
    inv_jac: BufId,
    rx: BufId,
    dmat_rows: BufId,
    dmat_cols: BufId,
    fetch_idx: BufId,
    store_idx: BufId,
    ref_face_area: BufId,
    headers: BufId,
    descriptors: BufId,
}

/// Device memory plus launch helpers for one discretization.
pub struct Pipeline {
    pub disc: Arc<Discretization>,
    pub device: Device,
    pub mem: Memory,
    pub config: OperatorConfig,
    pub options: LaunchOptions,
    /// Counters accumulated over every launch of this pipeline.
    pub stats: MemStats,
    /// When set, every launch is traced and its shared requests appended.
    pub shared_log: Option<Vec<SharedRequest>>,
    consts: Constants,
    scratch: Option<Scratch>,
}

struct Scratch {
    flux: Vec<BufId>,
    lifted: Vec<BufId>,
    derivs: Vec<BufId>,
}

impl Pipeline {
    pub fn new(disc: Arc<Discretization>, config: OperatorConfig, device: Device) -> Result<Self> {
        let mut mem = Memory::new();
        let l = &disc.layout;
        let e = &disc.elem;
        let geom = &disc.geom;
        let inv_jac = l.per_slot(|k| 1.0 / geom.jacobian[k]);
        let mut rx = Vec::with_capacity(l.slot_element.len() * 9);
        for s in &l.slot_element {
            match s {
                Some(k) => {
                    for mu in 0..3 {
                        rx.extend_from_slice(&geom.rx[*k][mu]);
                    }
                }
                None => rx.extend([0.0; 9]),
            }
        }
        let np = e.num_nodes;
        let mut dmat_cols = Vec::with_capacity(3 * np * np);
        for d in &e.diff {
            dmat_cols.extend_from_slice(d.as_slice());
        }
        let (headers, descriptors) = disc.gather.device_words();
        let consts = Constants {
            lift: mem.alloc("lift", e.lift_column_major()),
            inv_jac: mem.alloc("inv_jacobian", inv_jac),
            rx: mem.alloc("rx", rx),
            dmat_rows: mem.alloc("diff_rows", e.diff_concat_row_major()),
            dmat_cols: mem.alloc("diff_cols", dmat_cols),
            fetch_idx: mem.alloc("fetch_index_lists", e.fetch_lists.iter().flatten().map(|&i| i as f64).collect()),
            store_idx: mem.alloc("store_index_lists", e.store_lists.iter().flatten().map(|&i| i as f64).collect()),
            ref_face_area: mem.alloc("reference_face_areas", (0..4).map(reference_face_area).collect()),
            headers: mem.alloc("gather_headers", headers),
            descriptors: mem.alloc("gather_descriptors", descriptors),
        };
        let p = Pipeline { disc, device, mem, config, options: LaunchOptions::default(), stats: MemStats::default(), shared_log: None, consts, scratch: None };
        lift_shape(&p.disc, &config.lift, &p.device)?;
        diff_shape(&p.disc, &config.diff, &p.device)?;
        Ok(p)
    }

    pub fn field_len(&self) -> usize {
        self.disc.layout.field_len()
    }

    pub fn flux_len(&self) -> usize {
        self.disc.layout.flux_len()
    }

    pub fn upload(&mut self, name: &str, data: Vec<f64>) -> BufId {
        self.mem.alloc(name, data)
    }

    pub fn zeros(&mut self, name: &str, len: usize) -> BufId {
        self.mem.zeros(name, len)
    }

    pub fn download(&self, id: BufId) -> Vec<f64> {
        self.mem.get(id).to_vec()
    }

    fn exec<K: Kernel>(&mut self, grid: Dim3, block: Dim3, shared_words: usize, kernel: &K) -> Result<MemStats> {
        let s = match self.shared_log.as_mut() {
            Some(log) => {
                let (s, mut l) = self.device.launch_logged(&mut self.mem, grid, block, shared_words, kernel, self.options.order)?;
                log.append(&mut l);
                s
            }
            None => self.device.launch(&mut self.mem, grid, block, shared_words, kernel, self.options)?,
        };
        self.stats.merge(&s);
        Ok(s)
    }

    pub fn lift(&mut self, flux: BufId, out: BufId) -> Result<MemStats> {
        let c = self.config.lift;
        let shape = lift_shape(&self.disc, &c, &self.device)?;
        let l = &self.disc.layout;
        let k = lift::LiftKernel {
            flux,
            out,
            lift: self.consts.lift,
            inv_jac: self.consts.inv_jac,
            np: l.num_nodes,
            nfaces_dofs: 4 * l.num_face_nodes,
            k_m: l.k_m,
            n_pm: l.n_pm,
            n_fm: l.n_fm,
            n_m: l.n_m,
            w_p: c.w_p,
            w_i: c.w_i,
            order: c.thread_order,
        };
        self.exec(shape.grid, shape.block, shape.shared_words, &k)
    }

    pub fn diff(&mut self, u: BufId, out: [BufId; 3]) -> Result<MemStats> {
        let c = self.config.diff;
        let shape = diff_shape(&self.disc, &c, &self.device)?;
        let l = &self.disc.layout;
        let s = match c.strategy {
            Strategy::FieldInShared => {
                let k = diff::DiffFieldKernel {
                    u,
                    out,
                    dmat: self.consts.dmat_cols,
                    rx: self.consts.rx,
                    np: l.num_nodes,
                    k_m: l.k_m,
                    n_pm: l.n_pm,
                    n_m: l.n_m,
                    w_p: c.w_p,
                    w_i: c.w_i,
                };
                self.exec(shape.grid, shape.block, shape.shared_words, &k)?
            }
            Strategy::MatrixInShared => {
                let k = diff::DiffMatrixKernel {
                    u,
                    out,
                    dmat: self.consts.dmat_rows,
                    rx: self.consts.rx,
                    np: l.num_nodes,
                    k_m: l.k_m,
                    n_pm: l.n_pm,
                    n_m: l.n_m,
                    n_r: shape.block.x,
                    stride: matrix_stride(l.num_nodes),
                    rows: shape.shared_words / matrix_stride(l.num_nodes),
                    w_p: c.w_p,
                    w_i: c.w_i,
                    w_s: c.w_s,
                    storage: c.storage,
                };
                self.exec(shape.grid, shape.block, shape.shared_words, &k)?
            }
        };
        Ok(s)
    }

    pub fn gather<L: ConservationLaw>(&mut self, law: &L, fields: &[BufId], out: &[BufId]) -> Result<MemStats> {
        let n = law.num_fields();
        if fields.len() != n || out.len() != n || n > MAX_FIELDS {
            return Err(Error::InvalidArgument(format!("gather expects {n} input and output fields")));
        }
        let c = self.config.gather;
        let shape = gather_shape(&self.disc, &c, &self.device, n)?;
        let l = &self.disc.layout;
        let desc_capacity = (shape.shared_words - HEADER_WORDS - n * c.m_b * l.n_fm) / DESCRIPTOR_WORDS;
        let k = gather::GatherKernel {
            law,
            fields: fields.to_vec(),
            out: out.to_vec(),
            headers: self.consts.headers,
            descriptors: self.consts.descriptors,
            fetch_idx: self.consts.fetch_idx,
            store_idx: self.consts.store_idx,
            ref_face_area: self.consts.ref_face_area,
            nfp: l.num_face_nodes,
            n_fm: l.n_fm,
            m_b: c.m_b,
            flux_len: l.flux_len(),
            desc_capacity,
            w_p: c.w_p,
        };
        self.exec(shape.grid, shape.block, shape.shared_words, &k)
    }

    fn pointwise_shape(&self) -> (Dim3, Dim3) {
        let len = self.field_len();
        (Dim3::new(len.div_ceil(POINTWISE_THREADS), 1, 1), Dim3::new(POINTWISE_THREADS, 1, 1))
    }

    pub fn assemble<L: ConservationLaw>(&mut self, law: &L, derivs: &[BufId], lifted: &[BufId], out: &[BufId]) -> Result<MemStats> {
        let n = law.num_fields();
        let mut coeffs = Vec::new();
        for nu in 0..3 {
            let a = law.flux_matrix(nu);
            for c in 0..n {
                for d in 0..n {
                    if a[c * n + d] != 0.0 {
                        coeffs.push((c, d, nu, a[c * n + d]));
                    }
                }
            }
        }
        let k = assemble::AssembleKernel {
            derivs: derivs.to_vec(),
            lifted: lifted.to_vec(),
            out: out.to_vec(),
            coeffs,
            inv_q: law.inv_q(),
            len: self.field_len(),
        };
        let (grid, block) = self.pointwise_shape();
        self.exec(grid, block, 0, &k)
    }

    /// Full right-hand side `du/dt` of the semi-discrete system.
    pub fn rhs<L: ConservationLaw>(&mut self, law: &L, state: &[BufId], out: &[BufId]) -> Result<()> {
        let n = law.num_fields();
        if self.scratch.as_ref().map_or(true, |s| s.flux.len() != n) {
            let (fl, pl) = (self.flux_len(), self.field_len());
            let flux = (0..n).map(|c| self.mem.zeros(&format!("flux{c}"), fl)).collect();
            let lifted = (0..n).map(|c| self.mem.zeros(&format!("lifted{c}"), pl)).collect();
            let derivs = (0..3 * n).map(|c| self.mem.zeros(&format!("deriv{c}"), pl)).collect();
            self.scratch = Some(Scratch { flux, lifted, derivs });
        }
        let s = self.scratch.as_ref().expect("scratch allocated above");
        let (flux, lifted, derivs) = (s.flux.clone(), s.lifted.clone(), s.derivs.clone());
        self.gather(law, state, &flux)?;
        for c in 0..n {
            self.lift(flux[c], lifted[c])?;
            self.diff(state[c], [derivs[3 * c], derivs[3 * c + 1], derivs[3 * c + 2]])?;
        }
        self.assemble(law, &derivs, &lifted, out)?;
        Ok(())
    }

    /// `res = a res + dt rhs; u += b res` over all fields.
    pub fn rk_update(&mut self, u: &[BufId], res: &[BufId], rhs: &[BufId], a: f64, b: f64, dt: f64) -> Result<MemStats> {
        let k = assemble::RkUpdateKernel { u: u.to_vec(), res: res.to_vec(), rhs: rhs.to_vec(), a, b, dt, len: self.field_len() };
        let (grid, block) = self.pointwise_shape();
        self.exec(grid, block, 0, &k)
    }
}

/// Lifts one face-flux vector; returns the result and the launch counters.
pub fn flux_lift(disc: &Arc<Discretization>, flux: &[f64], config: KernelConfig, options: LaunchOptions) -> Result<(Vec<f64>, MemStats)> {
    let mut p = single_stage_pipeline(disc, OperatorConfig { lift: config, ..quiet_config(disc) })?;
    p.options = options;
    let f = p.upload("flux", flux.to_vec());
    let out = p.zeros("out", p.field_len());
    let s = p.lift(f, out)?;
    Ok((p.download(out), s))
}

/// Global x, y, z derivatives of one field.
pub fn local_diff(disc: &Arc<Discretization>, u: &[f64], config: KernelConfig, options: LaunchOptions) -> Result<([Vec<f64>; 3], MemStats)> {
    let mut p = single_stage_pipeline(disc, OperatorConfig { diff: config, ..quiet_config(disc) })?;
    p.options = options;
    let ub = p.upload("u", u.to_vec());
    let out = [0, 1, 2].map(|i| p.zeros(&format!("d{i}"), p.field_len()));
    let s = p.diff(ub, out)?;
    Ok((out.map(|b| p.download(b)), s))
}

/// Gathered, face-Jacobian-scaled numerical fluxes of all fields.
pub fn flux_gather<L: ConservationLaw>(
    disc: &Arc<Discretization>,
    law: &L,
    fields: &[Vec<f64>],
    config: KernelConfig,
    options: LaunchOptions,
) -> Result<(Vec<Vec<f64>>, MemStats)> {
    let mut p = single_stage_pipeline(disc, OperatorConfig { gather: config, ..quiet_config(disc) })?;
    p.options = options;
    let ins: Vec<BufId> = fields.iter().enumerate().map(|(c, f)| p.upload(&format!("u{c}"), f.clone())).collect();
    let outs: Vec<BufId> = (0..fields.len()).map(|c| p.zeros(&format!("f{c}"), p.flux_len())).collect();
    let s = p.gather(law, &ins, &outs)?;
    Ok((outs.iter().map(|&b| p.download(b)).collect(), s))
}

/// Smallest feasible configuration for every stage.
fn quiet_config(disc: &Discretization) -> OperatorConfig {
    OperatorConfig {
        diff: KernelConfig::default(),
        gather: KernelConfig { m_b: disc.gather.m_b, ..Default::default() },
        lift: KernelConfig::default(),
    }
}

fn single_stage_pipeline(disc: &Arc<Discretization>, config: OperatorConfig) -> Result<Pipeline> {
    Pipeline::new(disc.clone(), config, Device::default())
}
