//! Five-stage, fourth-order low-storage Runge-Kutta (2N storage).

pub const STAGES: usize = 5;

pub const RK4A: [f64; STAGES] = [
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
];

pub const RK4B: [f64; STAGES] = [
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
];

pub const RK4C: [f64; STAGES] = [
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
];

/// One host step of `du/dt = f(t, u)`; `res` is the second storage register.
pub fn lsrk4_step(u: &mut [f64], res: &mut [f64], t: f64, dt: f64, mut f: impl FnMut(f64, &[f64], &mut [f64])) {
    let mut k = vec![0.0; u.len()];
    for s in 0..STAGES {
        f(t + RK4C[s] * dt, u, &mut k);
        for i in 0..u.len() {
            res[i] = RK4A[s] * res[i] + dt * k[i];
            u[i] += RK4B[s] * res[i];
        }
    }
}
