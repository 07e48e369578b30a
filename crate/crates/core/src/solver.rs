//! Time integration of a conservation law through the device pipeline.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{BufId, Device, LaunchOptions, MemStats};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::kernels::rk::{RK4A, RK4B, STAGES};
use crate::kernels::{ConservationLaw, OperatorConfig, Pipeline};
use crate::maxwell::{energy, l2_error, stable_dt, CavityMode, MaxwellLaw};

/// Energy growth factor beyond which a run is declared unstable.
pub const BLOWUP_FACTOR: f64 = 1e3;

pub struct Solver<L: ConservationLaw> {
    pub pipeline: Pipeline,
    pub law: L,
    pub time: f64,
    pub steps: usize,
    state: Vec<BufId>,
    res: Vec<BufId>,
    rhs: Vec<BufId>,
}

impl<L: ConservationLaw> Solver<L> {
    pub fn new(disc: Arc<Discretization>, law: L, config: OperatorConfig, device: Device) -> Result<Self> {
        let mut pipeline = Pipeline::new(disc, config, device)?;
        let n = law.num_fields();
        let len = pipeline.field_len();
        let state = (0..n).map(|c| pipeline.zeros(&format!("u{c}"), len)).collect();
        let res = (0..n).map(|c| pipeline.zeros(&format!("res{c}"), len)).collect();
        let rhs = (0..n).map(|c| pipeline.zeros(&format!("rhs{c}"), len)).collect();
        Ok(Solver { pipeline, law, time: 0.0, steps: 0, state, res, rhs })
    }

    pub fn with_options(mut self, options: LaunchOptions) -> Self {
        self.pipeline.options = options;
        self
    }

    /// Sets the padded state fields and resets the residual register.
    pub fn set_state(&mut self, fields: &[Vec<f64>], time: f64) -> Result<()> {
        let len = self.pipeline.field_len();
        if fields.len() != self.state.len() || fields.iter().any(|f| f.len() != len) {
            return Err(Error::InvalidArgument(format!("state must be {} fields of length {len}", self.state.len())));
        }
        for (c, f) in fields.iter().enumerate() {
            self.pipeline.mem.get_mut(self.state[c]).copy_from_slice(f);
            self.pipeline.mem.get_mut(self.res[c]).iter_mut().for_each(|v| *v = 0.0);
        }
        self.time = time;
        Ok(())
    }

    pub fn state(&self) -> Vec<Vec<f64>> {
        self.state.iter().map(|&b| self.pipeline.download(b)).collect()
    }

    /// One low-storage RK4 step. The law is autonomous, so stage times are not needed.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        for s in 0..STAGES {
            self.pipeline.rhs(&self.law, &self.state, &self.rhs)?;
            let (state, res, rhs) = (self.state.clone(), self.res.clone(), self.rhs.clone());
            self.pipeline.rk_update(&state, &res, &rhs, RK4A[s], RK4B[s], dt)?;
        }
        self.time += dt;
        self.steps += 1;
        Ok(())
    }

    pub fn stats(&self) -> &MemStats {
        &self.pipeline.stats
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub order: usize,
    pub elements: usize,
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub l2_error: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest per-step energy increase relative to the energy before the step.
    pub max_energy_increase: f64,
}

/// Integrates a cavity mode from `t = 0` to `final_time` with the largest
/// step not exceeding the CFL limit that lands exactly on `final_time`.
/// `energy_every` evaluates the energy after that many steps (0 disables
/// per-step tracking).
pub fn run_cavity(
    disc: Arc<Discretization>,
    mode: &CavityMode,
    final_time: f64,
    cfl: f64,
    config: OperatorConfig,
    energy_every: usize,
) -> Result<RunReport> {
    if !(final_time >= 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {final_time}")));
    }
    let dt_max = stable_dt(&disc, &mode.material, cfl)?;
    let steps = (final_time / dt_max).ceil() as usize;
    let dt = if steps == 0 { dt_max } else { final_time / steps as f64 };
    run_cavity_steps(disc, mode, dt, steps, config, energy_every)
}

/// Integrates a fixed number of steps of size `dt`.
pub fn run_cavity_steps(
    disc: Arc<Discretization>,
    mode: &CavityMode,
    dt: f64,
    steps: usize,
    config: OperatorConfig,
    energy_every: usize,
) -> Result<RunReport> {
    let law = MaxwellLaw::new(mode.material);
    let mut solver = Solver::new(disc.clone(), law, config, Device::default())?;
    solver.set_state(&mode.sample(&disc, 0.0), 0.0)?;
    let initial = energy(&disc, &solver.state(), &mode.material);
    let mut last = initial;
    let mut max_increase: f64 = 0.0;
    for n in 0..steps {
        solver.step(dt)?;
        let tracked = energy_every > 0 && (n + 1) % energy_every == 0;
        if tracked || n + 1 == steps {
            let e = energy(&disc, &solver.state(), &mode.material);
            if !e.is_finite() || e > BLOWUP_FACTOR * initial.max(f64::MIN_POSITIVE) {
                return Err(Error::Unstable { step: n + 1, growth: e / initial });
            }
            if last > 0.0 {
                max_increase = max_increase.max((e - last) / last);
            }
            last = e;
        }
    }
    let t = steps as f64 * dt;
    Ok(RunReport {
        order: disc.order(),
        elements: disc.num_elements(),
        steps,
        dt,
        final_time: t,
        l2_error: l2_error(&disc, &solver.state(), mode, t),
        initial_energy: initial,
        final_energy: last,
        max_energy_increase: max_increase,
    })
}

/// Least-squares slope of `ln err` against `ln h`.
pub fn fit_order(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 || h.iter().chain(err).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("order fit needs at least two positive (h, error) pairs".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("order fit needs distinct mesh sizes".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(3)).collect();
        assert!((fit_order(&h, &e).unwrap() - 3.0).abs() < 1e-12);
        assert!((fit_order(&h[..2], &e[..2]).unwrap() - 3.0).abs() < 1e-12);
        assert!(fit_order(&[0.5], &[1.0]).is_err());
        assert!(fit_order(&[0.5, 0.5], &[1.0, 2.0]).is_err());
        assert!(fit_order(&[0.5, 0.25], &[0.0, 2.0]).is_err());
    }
}
