//! Element-local differentiation kernels. Both produce global derivatives
//! `d/dx_nu u = sum_mu (dr_mu/dx_nu) D^mu u` per element.

use crate::device::{BufId, Kernel, Step, ThreadCtx};

/// How the matrix-in-shared kernel stores `[D^1 | D^2 | D^3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MatrixStorage {
    /// A segment of `N_R` rows of the microblock-repeated matrix per block.
    Segmented,
    /// The whole matrix once; threads index row `i mod N_p`.
    Full,
}

/// Matrix in shared memory, field streamed through the texture path.
pub(crate) struct DiffMatrixKernel {
    pub u: BufId,
    pub out: [BufId; 3],
    /// `[D^1 | D^2 | D^3]` row-major, `N_p x 3 N_p`.
    pub dmat: BufId,
    /// Per-slot `dr_mu/dx_nu`, 9 values at `slot * 9 + 3 mu + nu`.
    pub rx: BufId,
    pub np: usize,
    pub k_m: usize,
    pub n_pm: usize,
    pub n_m: usize,
    pub n_r: usize,
    /// Odd row stride of the shared matrix.
    pub stride: usize,
    pub rows: usize,
    pub w_p: usize,
    pub w_i: usize,
    pub w_s: usize,
    pub storage: MatrixStorage,
}

impl Kernel for DiffMatrixKernel {
    type Regs = ();

    fn phase(&self, phase: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let cols = 3 * self.np;
        match phase {
            0 => {
                let threads = ctx.block_dim.size();
                let mut idx = ctx.tid();
                // Walk the padded rows so consecutive threads hit consecutive words.
                while idx < self.rows * self.stride {
                    let (r, c) = (idx / self.stride, idx % self.stride);
                    let v = if c < cols {
                        let src_row = match self.storage {
                            MatrixStorage::Segmented => (ctx.block.x * self.n_r + r) % self.np,
                            MatrixStorage::Full => r,
                        };
                        ctx.tex(self.dmat, src_row * cols + c)
                    } else {
                        0.0
                    };
                    ctx.sstore(r * self.stride + c, v);
                    idx += threads;
                }
                Step::Sync
            }
            _ => {
                let tx = ctx.thread.x;
                let i = ctx.block.x * self.n_r + tx;
                if i < self.k_m * self.np {
                    let (slot, row) = (i / self.np, i % self.np);
                    let srow = match self.storage {
                        MatrixStorage::Segmented => tx,
                        MatrixStorage::Full => row,
                    };
                    for s in 0..self.w_s {
                        let m = ((ctx.block.y * self.w_s + s) * self.w_p + ctx.thread.y) * self.w_i;
                        let n_inline = self.w_i.min(self.n_m.saturating_sub(m));
                        let mut d = [[0.0f64; 3]; super::MAX_INLINE];
                        for n in 0..self.np {
                            let mut u = [0.0f64; super::MAX_INLINE];
                            for (j, uj) in u.iter_mut().enumerate().take(n_inline) {
                                *uj = ctx.tex(self.u, (m + j) * self.n_pm + slot * self.np + n);
                            }
                            for mu in 0..3 {
                                let a = ctx.sload(srow * self.stride + mu * self.np + n);
                                for j in 0..n_inline {
                                    d[j][mu] += a * u[j];
                                }
                            }
                        }
                        for j in 0..n_inline {
                            let base = ((m + j) * self.k_m + slot) * 9;
                            let mut rx = [0.0; 9];
                            for (q, r) in rx.iter_mut().enumerate() {
                                *r = ctx.tex(self.rx, base + q);
                            }
                            for nu in 0..3 {
                                let v = (0..3).map(|mu| rx[3 * mu + nu] * d[j][mu]).sum();
                                ctx.store(self.out[nu], (m + j) * self.n_pm + i, v);
                            }
                        }
                    }
                }
                Step::Exit
            }
        }
    }
}

/// Field in shared memory, matrices through the texture path; the lifting
/// kernel's structure with three matrices applied inline.
pub(crate) struct DiffFieldKernel {
    pub u: BufId,
    pub out: [BufId; 3],
    /// `D^mu` column-major, matrix `mu` at offset `mu * N_p^2`.
    pub dmat: BufId,
    pub rx: BufId,
    pub np: usize,
    pub k_m: usize,
    pub n_pm: usize,
    pub n_m: usize,
    pub w_p: usize,
    pub w_i: usize,
}

impl Kernel for DiffFieldKernel {
    type Regs = ();

    fn phase(&self, phase: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let (ty, i) = (ctx.thread.y, 16 * ctx.thread.z + ctx.thread.x);
        let m = (ctx.block.x * self.w_p + ty) * self.w_i;
        let n_inline = self.w_i.min(self.n_m.saturating_sub(m));
        let smem = |j: usize| (ty * self.w_i + j) * self.n_pm;
        match phase {
            0 => {
                for j in 0..n_inline {
                    let v = ctx.load(self.u, (m + j) * self.n_pm + i);
                    ctx.sstore(smem(j) + i, v);
                }
                Step::Sync
            }
            _ => {
                if i < self.k_m * self.np {
                    let (slot, row) = (i / self.np, i % self.np);
                    let off = slot * self.np;
                    let mut d = [[0.0f64; 3]; super::MAX_INLINE];
                    for n in 0..self.np {
                        let mut a = [0.0; 3];
                        for (mu, am) in a.iter_mut().enumerate() {
                            *am = ctx.tex(self.dmat, (mu * self.np + n) * self.np + row);
                        }
                        for j in 0..n_inline {
                            let u = ctx.sload(smem(j) + off + n);
                            for mu in 0..3 {
                                d[j][mu] += a[mu] * u;
                            }
                        }
                    }
                    for j in 0..n_inline {
                        let base = ((m + j) * self.k_m + slot) * 9;
                        let mut rx = [0.0; 9];
                        for (q, r) in rx.iter_mut().enumerate() {
                            *r = ctx.tex(self.rx, base + q);
                        }
                        for nu in 0..3 {
                            let v = (0..3).map(|mu| rx[3 * mu + nu] * d[j][mu]).sum();
                            ctx.store(self.out[nu], (m + j) * self.n_pm + i, v);
                        }
                    }
                }
                Step::Exit
            }
        }
    }
}
