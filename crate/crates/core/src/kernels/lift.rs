//! Flux lifting with the field in shared memory.

use super::ThreadOrder;
use crate::device::{BufId, Kernel, Step, ThreadCtx};

pub(crate) struct LiftKernel {
    pub flux: BufId,
    pub out: BufId,
    /// Lifting matrix, column-major.
    pub lift: BufId,
    /// Per-slot inverse Jacobians.
    pub inv_jac: BufId,
    pub np: usize,
    pub nfaces_dofs: usize,
    pub k_m: usize,
    pub n_pm: usize,
    pub n_fm: usize,
    pub n_m: usize,
    pub w_p: usize,
    pub w_i: usize,
    pub order: ThreadOrder,
}

impl LiftKernel {
    /// `(t_y, i)`: the microblock lane and this thread's DOF in it.
    fn lane(&self, ctx: &ThreadCtx<'_>) -> (usize, usize) {
        match self.order {
            ThreadOrder::Interleaved => (ctx.thread.y, 16 * ctx.thread.z + ctx.thread.x),
            ThreadOrder::Conventional => (ctx.thread.y, ctx.thread.x),
        }
    }
}

impl Kernel for LiftKernel {
    type Regs = ();

    fn phase(&self, phase: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let (ty, i) = self.lane(ctx);
        let m = (ctx.block.x * self.w_p + ty) * self.w_i;
        let n_inline = self.w_i.min(self.n_m.saturating_sub(m));
        let smem = |j: usize| (ty * self.w_i + j) * self.n_fm;
        match phase {
            0 => {
                for b in 0..self.n_fm.div_ceil(self.n_pm) {
                    let idx = b * self.n_pm + i;
                    if idx < self.n_fm {
                        for j in 0..n_inline {
                            let v = ctx.load(self.flux, (m + j) * self.n_fm + idx);
                            ctx.sstore(smem(j) + idx, v);
                        }
                    }
                }
                Step::Sync
            }
            _ => {
                if i < self.k_m * self.np {
                    let (slot, row) = (i / self.np, i % self.np);
                    let off = slot * self.nfaces_dofs;
                    let mut r = [0.0f64; super::MAX_INLINE];
                    for n in 0..self.nfaces_dofs {
                        let l = ctx.tex(self.lift, n * self.np + row);
                        for (j, rj) in r.iter_mut().enumerate().take(n_inline) {
                            *rj += l * ctx.sload(smem(j) + off + n);
                        }
                    }
                    for (j, rj) in r.iter().enumerate().take(n_inline) {
                        let s = ctx.tex(self.inv_jac, (m + j) * self.k_m + slot);
                        ctx.store(self.out, (m + j) * self.n_pm + i, s * rj);
                    }
                }
                Step::Exit
            }
        }
    }
}
