//! Flux gather over face-pair descriptors.

use super::{ConservationLaw, MAX_FIELDS};
use crate::device::{BufId, Kernel, Step, ThreadCtx};
use crate::layout::{DESCRIPTOR_WORDS, HEADER_WORDS};
use crate::refelem::NUM_PERMUTATIONS;

pub(crate) struct GatherKernel<'a, L: ConservationLaw> {
    pub law: &'a L,
    pub fields: Vec<BufId>,
    pub out: Vec<BufId>,
    pub headers: BufId,
    pub descriptors: BufId,
    pub fetch_idx: BufId,
    pub store_idx: BufId,
    /// Areas of the four reference faces.
    pub ref_face_area: BufId,
    pub nfp: usize,
    pub n_fm: usize,
    pub m_b: usize,
    pub flux_len: usize,
    /// Shared words reserved for descriptors.
    pub desc_capacity: usize,
    pub w_p: usize,
}

impl<L: ConservationLaw> GatherKernel<'_, L> {
    fn span(&self) -> usize {
        self.m_b * self.n_fm
    }

    fn flux_base(&self) -> usize {
        HEADER_WORDS + self.desc_capacity * DESCRIPTOR_WORDS
    }
}

// Descriptor word offsets.
const FETCH_BASE: usize = 0;
const FETCH_LIST: usize = 2;
const STORE_BASE: usize = 4;
const STORE_LIST: usize = 6;
const FACE_JAC: usize = 7;
const NORMAL: usize = 8;
const BC_TAG: usize = 11;

impl<L: ConservationLaw> Kernel for GatherKernel<'_, L> {
    type Regs = ();

    fn phase(&self, phase: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let threads = ctx.block_dim.size();
        let tid = ctx.tid();
        let nf = self.fields.len();
        let span = self.span();
        let block_base = ctx.block.x * span;
        match phase {
            0 => {
                let mut idx = tid;
                while idx < HEADER_WORDS {
                    let v = ctx.load(self.headers, ctx.block.x * HEADER_WORDS + idx);
                    ctx.sstore(idx, v);
                    idx += threads;
                }
                Step::Sync
            }
            1 => {
                let offset = ctx.sload(0) as usize;
                let count = (ctx.sload(1) + ctx.sload(2) + ctx.sload(3)) as usize;
                let mut idx = tid;
                while idx < count * DESCRIPTOR_WORDS {
                    let v = ctx.load(self.descriptors, offset * DESCRIPTOR_WORDS + idx);
                    ctx.sstore(HEADER_WORDS + idx, v);
                    idx += threads;
                }
                let mut idx = tid;
                while idx < nf * span {
                    ctx.sstore(self.flux_base() + idx, 0.0);
                    idx += threads;
                }
                Step::Sync
            }
            2 => {
                let (tx, ty) = (ctx.thread.x, ctx.thread.y);
                let n_intra = ctx.sload(1) as usize;
                let n_inter = ctx.sload(2) as usize;
                let n_bdry = ctx.sload(3) as usize;
                let mut um = [0.0; MAX_FIELDS];
                let mut up = [0.0; MAX_FIELDS];
                let mut flux = [0.0; MAX_FIELDS];
                let mut e = ty;
                while e < n_intra + n_inter + n_bdry {
                    let d = HEADER_WORDS + e * DESCRIPTOR_WORDS;
                    let list_m = ctx.sload(d + FETCH_LIST) as usize;
                    let im = ctx.sload(d + FETCH_BASE) as usize + ctx.tex(self.fetch_idx, list_m * self.nfp + tx) as usize;
                    for c in 0..nf {
                        um[c] = ctx.tex(self.fields[c], im);
                    }
                    let normal = [ctx.sload(d + NORMAL), ctx.sload(d + NORMAL + 1), ctx.sload(d + NORMAL + 2)];
                    if e < n_intra + n_inter {
                        let list_p = ctx.sload(d + FETCH_LIST + 1) as usize;
                        let ip = ctx.sload(d + FETCH_BASE + 1) as usize + ctx.tex(self.fetch_idx, list_p * self.nfp + tx) as usize;
                        for c in 0..nf {
                            up[c] = ctx.tex(self.fields[c], ip);
                        }
                    } else {
                        let tag = ctx.sload(d + BC_TAG) as u32;
                        self.law.boundary_state(&um[..nf], normal, tag, &mut up[..nf]);
                    }
                    let sj = ctx.sload(d + FACE_JAC);
                    let sm = ctx.sload(d + STORE_BASE) as usize - block_base;
                    self.law.numerical_flux(&um[..nf], &up[..nf], normal, &mut flux[..nf]);
                    for c in 0..nf {
                        ctx.sstore(self.flux_base() + c * span + sm + tx, sj * flux[c]);
                    }
                    if e < n_intra {
                        let sp = ctx.sload(d + STORE_BASE + 1) as usize - block_base;
                        let list = ctx.sload(d + STORE_LIST) as usize;
                        let pos = ctx.tex(self.store_idx, list * self.nfp + tx) as usize;
                        // The two sides share a physical area but not a reference face.
                        let face_m = ctx.sload(d + FETCH_LIST) as usize / NUM_PERMUTATIONS;
                        let face_p = ctx.sload(d + FETCH_LIST + 1) as usize / NUM_PERMUTATIONS;
                        let sj_p = sj * ctx.tex(self.ref_face_area, face_m) / ctx.tex(self.ref_face_area, face_p);
                        let neg = [-normal[0], -normal[1], -normal[2]];
                        self.law.numerical_flux(&up[..nf], &um[..nf], neg, &mut flux[..nf]);
                        for c in 0..nf {
                            ctx.sstore(self.flux_base() + c * span + sp + pos, sj_p * flux[c]);
                        }
                    }
                    e += self.w_p;
                }
                Step::Sync
            }
            _ => {
                let mut idx = tid;
                while idx < nf * span {
                    let (c, k) = (idx / span, idx % span);
                    if block_base + k < self.flux_len {
                        let v = ctx.sload(self.flux_base() + idx);
                        ctx.store(self.out[c], block_base + k, v);
                    }
                    idx += threads;
                }
                Step::Exit
            }
        }
    }
}
