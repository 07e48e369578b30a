//! Maxwell's equations in a linear, isotropic, source-free medium.

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::kernels::ConservationLaw;
use crate::mesh::cross;

pub const NUM_FIELDS: usize = 6;
pub const FIELD_NAMES: [&str; NUM_FIELDS] = ["Ex", "Ey", "Ez", "Hx", "Hy", "Hz"];
/// CFL factor used when none is given.
pub const DEFAULT_CFL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub epsilon: f64,
    pub mu: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { epsilon: 1.0, mu: 1.0 }
    }
}

impl Material {
    pub fn new(epsilon: f64, mu: f64) -> Result<Self> {
        if !(epsilon > 0.0 && mu > 0.0 && epsilon.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("material needs positive epsilon and mu, got {epsilon}, {mu}")));
        }
        Ok(Material { epsilon, mu })
    }

    pub fn impedance(&self) -> f64 {
        (self.mu / self.epsilon).sqrt()
    }

    pub fn admittance(&self) -> f64 {
        (self.epsilon / self.mu).sqrt()
    }

    pub fn speed(&self) -> f64 {
        1.0 / (self.epsilon * self.mu).sqrt()
    }
}

fn split(u: &[f64]) -> ([f64; 3], [f64; 3]) {
    ([u[0], u[1], u[2]], [u[3], u[4], u[5]])
}

fn unit(nu: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[nu] = 1.0;
    e
}

/// `F(u)` as three 6-vectors `F_x, F_y, F_z`, so that `div F = (-curl H, curl E)`.
pub fn maxwell_flux(u: &[f64; NUM_FIELDS]) -> [[f64; NUM_FIELDS]; 3] {
    let (e, h) = split(u);
    std::array::from_fn(|nu| {
        let fe = cross(unit(nu), h);
        let fh = cross(unit(nu), e);
        [-fe[0], -fe[1], -fe[2], fh[0], fh[1], fh[2]]
    })
}

/// `n . (F - F*)` for the upwind flux; jumps are `plus - minus`.
pub fn upwind_flux(um: &[f64], up: &[f64], n: [f64; 3], mat_m: &Material, mat_p: &Material) -> [f64; NUM_FIELDS] {
    let (em, hm) = split(um);
    let (ep, hp) = split(up);
    let je = [ep[0] - em[0], ep[1] - em[1], ep[2] - em[2]];
    let jh = [hp[0] - hm[0], hp[1] - hm[1], hp[2] - hm[2]];
    let (zm, zp) = (mat_m.impedance(), mat_p.impedance());
    let (ym, yp) = (mat_m.admittance(), mat_p.admittance());
    let z_avg = 0.5 * (zm + zp);
    let y_avg = 0.5 * (ym + yp);
    let nje = cross(n, je);
    let njh = cross(n, jh);
    let a: [f64; 3] = std::array::from_fn(|i| zp * jh[i] - nje[i]);
    let b: [f64; 3] = std::array::from_fn(|i| -yp * je[i] - njh[i]);
    let fe = cross(n, a);
    let fh = cross(n, b);
    [
        0.5 * fe[0] / z_avg,
        0.5 * fe[1] / z_avg,
        0.5 * fe[2] / z_avg,
        0.5 * fh[0] / y_avg,
        0.5 * fh[1] / y_avg,
        0.5 * fh[2] / y_avg,
    ]
}

/// Mirror state for a perfect electric conductor: tangential E and normal H
/// are reversed.
pub fn pec_boundary(um: &[f64], n: [f64; 3]) -> [f64; NUM_FIELDS] {
    let (e, h) = split(um);
    let en = e[0] * n[0] + e[1] * n[1] + e[2] * n[2];
    let hn = h[0] * n[0] + h[1] * n[1] + h[2] * n[2];
    [
        -e[0] + 2.0 * en * n[0],
        -e[1] + 2.0 * en * n[1],
        -e[2] + 2.0 * en * n[2],
        h[0] - 2.0 * hn * n[0],
        h[1] - 2.0 * hn * n[1],
        h[2] - 2.0 * hn * n[2],
    ]
}

/// Maxwell's equations in a uniform material with PEC walls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaxwellLaw {
    pub material: Material,
}

impl MaxwellLaw {
    pub fn new(material: Material) -> Self {
        MaxwellLaw { material }
    }
}

impl ConservationLaw for MaxwellLaw {
    fn num_fields(&self) -> usize {
        NUM_FIELDS
    }

    fn flux_matrix(&self, nu: usize) -> Vec<f64> {
        let mut a = vec![0.0; NUM_FIELDS * NUM_FIELDS];
        for d in 0..NUM_FIELDS {
            let mut u = [0.0; NUM_FIELDS];
            u[d] = 1.0;
            let f = maxwell_flux(&u)[nu];
            for c in 0..NUM_FIELDS {
                a[c * NUM_FIELDS + d] = f[c];
            }
        }
        a
    }

    fn inv_q(&self) -> Vec<f64> {
        let (ie, im) = (1.0 / self.material.epsilon, 1.0 / self.material.mu);
        vec![ie, ie, ie, im, im, im]
    }

    fn numerical_flux(&self, um: &[f64], up: &[f64], normal: [f64; 3], out: &mut [f64]) {
        out.copy_from_slice(&upwind_flux(um, up, normal, &self.material, &self.material));
    }

    fn boundary_state(&self, um: &[f64], normal: [f64; 3], _tag: u32, out: &mut [f64]) {
        // PEC is the only boundary kind.
        out.copy_from_slice(&pec_boundary(um, normal));
    }
}

/// A TM_mnp eigenmode of the PEC box `[0,a] x [0,b] x [0,d]`:
///
/// ```text
/// Ex = -(kx kz / kc^2) E0 cos(kx x) sin(ky y) sin(kz z) cos(w t)
/// Ey = -(ky kz / kc^2) E0 sin(kx x) cos(ky y) sin(kz z) cos(w t)
/// Ez =                 E0 sin(kx x) sin(ky y) cos(kz z) cos(w t)
/// Hx = -(w eps ky / kc^2) E0 sin(kx x) cos(ky y) cos(kz z) sin(w t)
/// Hy =  (w eps kx / kc^2) E0 cos(kx x) sin(ky y) cos(kz z) sin(w t)
/// Hz = 0
/// ```
///
/// with `kx = m pi / a`, `ky = n pi / b`, `kz = p pi / d`, `kc^2 = kx^2 + ky^2`
/// and `w = c sqrt(kc^2 + kz^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub m: u32,
    pub n: u32,
    pub p: u32,
    pub extent: [f64; 3],
    pub amplitude: f64,
    pub material: Material,
}

impl CavityMode {
    pub fn new(m: u32, n: u32, p: u32, extent: [f64; 3], material: Material) -> Result<Self> {
        // With m or n zero every TM component vanishes identically.
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("TM mode ({m},{n},{p}) is identically zero; m and n must be positive")));
        }
        if extent.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidArgument(format!("cavity extents must be positive, got {extent:?}")));
        }
        Ok(CavityMode { m, n, p, extent, amplitude: 1.0, material })
    }

    fn wavenumbers(&self) -> [f64; 3] {
        let pi = std::f64::consts::PI;
        [self.m as f64 * pi / self.extent[0], self.n as f64 * pi / self.extent[1], self.p as f64 * pi / self.extent[2]]
    }

    pub fn omega(&self) -> f64 {
        let k = self.wavenumbers();
        self.material.speed() * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
    }

    pub fn eval(&self, x: [f64; 3], t: f64) -> [f64; NUM_FIELDS] {
        let [kx, ky, kz] = self.wavenumbers();
        let kc2 = kx * kx + ky * ky;
        let w = self.omega();
        let e0 = self.amplitude;
        let (sx, cx) = (kx * x[0]).sin_cos();
        let (sy, cy) = (ky * x[1]).sin_cos();
        let (sz, cz) = (kz * x[2]).sin_cos();
        let (st, ct) = (w * t).sin_cos();
        let eps = self.material.epsilon;
        [
            -(kx * kz / kc2) * e0 * cx * sy * sz * ct,
            -(ky * kz / kc2) * e0 * sx * cy * sz * ct,
            e0 * sx * sy * cz * ct,
            -(w * eps * ky / kc2) * e0 * sx * cy * cz * st,
            (w * eps * kx / kc2) * e0 * cx * sy * cz * st,
            0.0,
        ]
    }

    /// The mode at time `t` sampled at every node, one padded field per component.
    pub fn sample(&self, disc: &Discretization, t: f64) -> Vec<Vec<f64>> {
        let nodes = disc.nodes();
        let vals: Vec<[f64; NUM_FIELDS]> = nodes.iter().map(|&x| self.eval(x, t)).collect();
        (0..NUM_FIELDS).map(|c| disc.layout.scatter(&vals.iter().map(|v| v[c]).collect::<Vec<_>>())).collect()
    }
}

/// `sum_k J_k a_k^T M b_k` over element-major vectors.
fn mass_inner(disc: &Discretization, a: &[f64], b: &[f64]) -> f64 {
    let np = disc.elem.num_nodes;
    let m = &disc.elem.mass;
    let mut total = 0.0;
    for k in 0..disc.num_elements() {
        let (ak, bk) = (&a[k * np..(k + 1) * np], &b[k * np..(k + 1) * np]);
        let mut s = 0.0;
        for r in 0..np {
            let mut row = 0.0;
            for c in 0..np {
                row += m[(r, c)] * bk[c];
            }
            s += ak[r] * row;
        }
        total += disc.geom.jacobian[k] * s;
    }
    total
}

/// L2 norm of `state - mode(t)`; `state` holds padded fields.
pub fn l2_error(disc: &Discretization, state: &[Vec<f64>], mode: &CavityMode, t: f64) -> f64 {
    let exact = mode.sample(disc, t);
    let mut sum = 0.0;
    for c in 0..NUM_FIELDS {
        let e: Vec<f64> = disc.layout.gather(&state[c]).iter().zip(disc.layout.gather(&exact[c])).map(|(u, x)| u - x).collect();
        sum += mass_inner(disc, &e, &e);
    }
    sum.sqrt()
}

/// Discrete energy `1/2 (eps |E|^2 + mu |H|^2)` integrated with the mass matrix.
pub fn energy(disc: &Discretization, state: &[Vec<f64>], material: &Material) -> f64 {
    let mut sum = 0.0;
    for (c, field) in state.iter().enumerate() {
        let w = if c < 3 { material.epsilon } else { material.mu };
        let u = disc.layout.gather(field);
        sum += w * mass_inner(disc, &u, &u);
    }
    0.5 * sum
}

/// `cfl * min inradius / (c (N+1)^2)`.
pub fn stable_dt(disc: &Discretization, material: &Material, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    let r = disc.geom.inradius.iter().cloned().fold(f64::INFINITY, f64::min);
    let n1 = (disc.order() + 1) as f64;
    Ok(cfl * r / (material.speed() * n1 * n1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, Mesh};
    use crate::DiscretizationOptions;

    fn vac() -> Material {
        Material::default()
    }

    #[test]
    fn material_impedance_and_admittance_are_reciprocal() {
        let m = Material::new(2.5, 0.7).unwrap();
        assert!((m.impedance() * m.admittance() - 1.0).abs() < 1e-15);
        assert!(Material::new(0.0, 1.0).is_err());
        assert!(Material::new(1.0, -1.0).is_err());
    }

    #[test]
    fn flux_of_constant_magnetic_field() {
        assert_eq!(maxwell_flux(&[0.0; 6]), [[0.0; 6]; 3]);
        let f = maxwell_flux(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f[0], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f[1], [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f[2], [0.0; 6]);
    }

    #[test]
    fn divergence_of_flux_is_the_curl_pair() {
        // u(x) = G x with G[c][nu] = d u_c / d x_nu.
        let g: [[f64; 3]; 6] = std::array::from_fn(|c| std::array::from_fn(|nu| (1 + c * 3 + nu) as f64 * if (c + nu) % 2 == 0 { 1.0 } else { -0.5 }));
        let mut div = [0.0; 6];
        for nu in 0..3 {
            let col: [f64; 6] = std::array::from_fn(|c| g[c][nu]);
            let f = maxwell_flux(&col)[nu];
            for c in 0..6 {
                div[c] += f[c];
            }
        }
        let curl = |o: usize| [g[o + 2][1] - g[o + 1][2], g[o][2] - g[o + 2][0], g[o + 1][0] - g[o][1]];
        let (ce, ch) = (curl(0), curl(3));
        for i in 0..3 {
            assert_eq!(div[i], -ch[i]);
            assert_eq!(div[3 + i], ce[i]);
        }
    }

    #[test]
    fn upwind_flux_vanishes_without_jumps() {
        let u = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7];
        assert_eq!(upwind_flux(&u, &u, [0.0, 0.6, 0.8], &vac(), &vac()), [0.0; 6]);
    }

    #[test]
    fn upwind_flux_of_magnetic_jump() {
        let um = [0.0; 6];
        let up = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let f = upwind_flux(&um, &up, [1.0, 0.0, 0.0], &vac(), &vac());
        assert_eq!(f, [0.0, -0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn upwind_flux_is_conservative_across_a_face() {
        let law = MaxwellLaw::default();
        let n = [0.48, -0.6, 0.64];
        let um = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7];
        let up = [-0.2, 0.4, 1.1, -0.9, 0.3, 0.6];
        let fm = upwind_flux(&um, &up, n, &vac(), &vac());
        let fp = upwind_flux(&up, &um, [-n[0], -n[1], -n[2]], &vac(), &vac());
        // fm + fp = n . (F(u-) - F(u+))
        let a: Vec<Vec<f64>> = (0..3).map(|nu| law.flux_matrix(nu)).collect();
        for c in 0..6 {
            let want: f64 = (0..3).map(|nu| n[nu] * (0..6).map(|d| a[nu][c * 6 + d] * (um[d] - up[d])).sum::<f64>()).sum();
            assert!((fm[c] + fp[c] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pec_mirror() {
        let n = [0.0, 0.6, 0.8];
        let compliant = [0.0, 1.2, 1.6, 1.0, 0.8, -0.6];
        let m = pec_boundary(&compliant, n);
        for i in 0..6 {
            assert!((m[i] - compliant[i]).abs() < 1e-15);
        }
        let u = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7];
        let twice = pec_boundary(&pec_boundary(&u, n), n);
        for i in 0..6 {
            assert!((twice[i] - u[i]).abs() < 1e-15);
        }
        // Purely tangential E: the jump is -2E and the flux penalizes it.
        let tang = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let up = pec_boundary(&tang, n);
        assert_eq!(&up[..3], &[-1.0, 0.0, 0.0]);
        let f = upwind_flux(&tang, &up, n, &vac(), &vac());
        // 1/2 n x (-n x [E]) = [E]_t / 2 = -E_t
        assert!((f[0] + 1.0).abs() < 1e-15);
        assert!(f[1].abs() < 1e-15 && f[2].abs() < 1e-15);
    }

    fn mode() -> CavityMode {
        CavityMode::new(1, 2, 1, [1.0, 1.5, 0.8], Material::new(1.3, 0.9).unwrap()).unwrap()
    }

    #[test]
    fn cavity_mode_rejects_null_modes_and_has_the_right_frequency() {
        assert!(CavityMode::new(0, 0, 1, [1.0; 3], vac()).is_err());
        assert!(CavityMode::new(1, 0, 1, [1.0; 3], vac()).is_err());
        let m = mode();
        let pi = std::f64::consts::PI;
        let w = m.material.speed() * pi * ((1.0f64 / 1.0).powi(2) + (2.0f64 / 1.5).powi(2) + (1.0f64 / 0.8).powi(2)).sqrt();
        assert!((m.omega() - w).abs() < 1e-12);
    }

    #[test]
    fn cavity_mode_has_no_tangential_e_on_walls() {
        let m = mode();
        let ext = m.extent;
        for s in 0..7 {
            let (a, b) = (0.13 * s as f64 + 0.05, 0.11 * s as f64 + 0.02);
            for axis in 0..3 {
                for wall in [0.0, ext[axis]] {
                    let mut x = [a * ext[0], b * ext[1], 0.37 * ext[2]];
                    x[(axis + 1) % 3] = [a, b, 0.37][(axis + 1) % 3] * ext[(axis + 1) % 3];
                    x[axis] = wall;
                    let u = m.eval(x, 0.3);
                    for c in 0..3 {
                        if c != axis {
                            assert!(u[c].abs() < 1e-12, "axis {axis} wall {wall} comp {c}: {}", u[c]);
                        }
                    }
                }
            }
        }
    }

    fn residual(m: &CavityMode, x: [f64; 3], t: f64, h: f64) -> f64 {
        let d = |c: usize, nu: Option<usize>| {
            let (mut xp, mut xm, mut tp, mut tm) = (x, x, t, t);
            match nu {
                Some(nu) => {
                    xp[nu] += h;
                    xm[nu] -= h;
                }
                None => {
                    tp += h;
                    tm -= h;
                }
            }
            (m.eval(xp, tp)[c] - m.eval(xm, tm)[c]) / (2.0 * h)
        };
        let curl = |o: usize| [d(o + 2, Some(1)) - d(o + 1, Some(2)), d(o, Some(2)) - d(o + 2, Some(0)), d(o + 1, Some(0)) - d(o, Some(1))];
        let (ce, ch) = (curl(0), curl(3));
        let mut r: f64 = 0.0;
        for i in 0..3 {
            r = r.max((m.material.epsilon * d(i, None) - ch[i]).abs());
            r = r.max((m.material.mu * d(3 + i, None) + ce[i]).abs());
        }
        r
    }

    #[test]
    fn cavity_mode_satisfies_maxwell_under_finite_differences() {
        let m = mode();
        let x = [0.31, 0.77, 0.29];
        let (r1, r2) = (residual(&m, x, 0.4, 1e-2), residual(&m, x, 0.4, 5e-3));
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
        assert!(r2 < 1e-3);
    }

    #[test]
    fn l2_error_and_energy() {
        let d = Discretization::new(generate_box_mesh([1.0, 1.5, 0.8], [1, 1, 1]).unwrap(), 3, DiscretizationOptions::default()).unwrap();
        let m = mode();
        let exact = m.sample(&d, 0.2);
        assert_eq!(l2_error(&d, &exact, &m, 0.2), 0.0);
        let mut shifted = exact.clone();
        let mut shifted2 = exact.clone();
        for (c, f) in shifted.iter_mut().enumerate() {
            let g = d.layout.gather(f).iter().enumerate().map(|(i, v)| v + 0.01 * ((i + c) % 5) as f64).collect::<Vec<_>>();
            *f = d.layout.scatter(&g);
        }
        for (c, f) in shifted2.iter_mut().enumerate() {
            let g = d.layout.gather(f).iter().enumerate().map(|(i, v)| v + 0.02 * ((i + c) % 5) as f64).collect::<Vec<_>>();
            *f = d.layout.scatter(&g);
        }
        let (e1, e2) = (l2_error(&d, &shifted, &m, 0.2), l2_error(&d, &shifted2, &m, 0.2));
        assert!((e2 / e1 - 2.0).abs() < 1e-12);

        // One element, constant error c in every field: |c| sqrt(6 V).
        let one = Discretization::new(Mesh::reference_tet(), 2, DiscretizationOptions::default()).unwrap();
        let mut zero = CavityMode::new(1, 1, 1, [1.0; 3], vac()).unwrap();
        zero.amplitude = 0.0;
        let c = 0.7;
        let state: Vec<Vec<f64>> = (0..6).map(|_| one.layout.scatter(&vec![c; one.elem.num_nodes])).collect();
        let v = one.mesh.element_volume(0);
        assert!((l2_error(&one, &state, &zero, 0.0) - c * (6.0 * v).sqrt()).abs() < 1e-12);
        let e = energy(&one, &state, &Material::new(2.0, 3.0).unwrap());
        assert!((e - 0.5 * (2.0 * 3.0 + 3.0 * 3.0) * c * c * v).abs() < 1e-12);
    }

    #[test]
    fn stable_dt_scaling() {
        let mk = |s: f64, n: usize| {
            let d = Discretization::new(generate_box_mesh([s; 3], [2, 2, 2]).unwrap(), n, DiscretizationOptions::default()).unwrap();
            stable_dt(&d, &vac(), 0.5).unwrap()
        };
        assert!((mk(2.0, 2) / mk(1.0, 2) - 2.0).abs() < 1e-12);
        assert!((mk(1.0, 2) / mk(1.0, 5) - 4.0).abs() < 1e-12);
        let d = Discretization::new(Mesh::reference_tet(), 1, DiscretizationOptions::default()).unwrap();
        assert!(stable_dt(&d, &vac(), 0.0).is_err());
        assert!(stable_dt(&d, &vac(), 1.5).is_err());
    }
}
