//! Pointwise kernels: right-hand-side assembly and the Runge-Kutta update.

use crate::device::{BufId, Kernel, Step, ThreadCtx};

/// `rhs_c = Q_c^-1 (lift_c - sum_nu sum_d A_nu[c][d] d/dx_nu u_d)`.
pub(crate) struct AssembleKernel {
    /// `derivs[d * 3 + nu]`.
    pub derivs: Vec<BufId>,
    pub lifted: Vec<BufId>,
    pub out: Vec<BufId>,
    /// Nonzero `(c, d, nu, A_nu[c][d])` entries.
    pub coeffs: Vec<(usize, usize, usize, f64)>,
    pub inv_q: Vec<f64>,
    pub len: usize,
}

impl Kernel for AssembleKernel {
    type Regs = ();

    fn phase(&self, _: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let i = ctx.bid() * ctx.block_dim.size() + ctx.tid();
        if i < self.len {
            let nf = self.out.len();
            let mut acc = [0.0f64; super::MAX_FIELDS];
            for c in 0..nf {
                acc[c] = ctx.load(self.lifted[c], i);
            }
            for &(c, d, nu, a) in &self.coeffs {
                acc[c] -= a * ctx.load(self.derivs[d * 3 + nu], i);
            }
            for c in 0..nf {
                ctx.store(self.out[c], i, self.inv_q[c] * acc[c]);
            }
        }
        Step::Exit
    }
}

/// One low-storage stage: `res = a res + dt rhs; u = u + b res`.
pub(crate) struct RkUpdateKernel {
    pub u: Vec<BufId>,
    pub res: Vec<BufId>,
    pub rhs: Vec<BufId>,
    pub a: f64,
    pub b: f64,
    pub dt: f64,
    pub len: usize,
}

impl Kernel for RkUpdateKernel {
    type Regs = ();

    fn phase(&self, _: usize, ctx: &mut ThreadCtx<'_>, _: &mut ()) -> Step {
        let i = ctx.bid() * ctx.block_dim.size() + ctx.tid();
        if i < self.len {
            for c in 0..self.u.len() {
                let r = self.a * ctx.load(self.res[c], i) + self.dt * ctx.load(self.rhs[c], i);
                ctx.store(self.res[c], i, r);
                let u = ctx.load(self.u[c], i) + self.b * r;
                ctx.store(self.u[c], i, u);
            }
        }
        Step::Exit
    }
}
