//! Host reference implementations of every operator stage, element-major
//! and unpadded. Neighbor face nodes are matched by physical coordinates,
//! so these do not depend on the permutation tables the kernels use.

use nalgebra::DMatrix;

use super::ConservationLaw;
use crate::discretization::Discretization;
use crate::mesh::FaceRef;

/// For every `(elem, face, j)` the element-major index of the coincident
/// node on the neighbor, or `None` on boundary faces.
pub fn neighbor_nodes(disc: &Discretization) -> Vec<NeighborNodes> {
    let nodes = disc.nodes();
    let np = disc.elem.num_nodes;
    let fnodes = &disc.elem.face_nodes;
    let mut out = Vec::with_capacity(disc.num_elements());
    for k in 0..disc.num_elements() {
        let per_face = std::array::from_fn(|f| match disc.conn.neighbor(k, f) {
            None => vec![None; fnodes[f].len()],
            Some((kp, fp)) => fnodes[f]
                .iter()
                .map(|&i| {
                    let x = nodes[k * np + i];
                    let best = fnodes[fp]
                        .iter()
                        .map(|&ip| (ip, dist2(x, nodes[kp * np + ip])))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("faces have nodes");
                    Some(kp * np + best.0)
                })
                .collect(),
        });
        out.push(per_face);
    }
    out
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// `(1/J) L f` per element; `flux` has `4 N_fp` values per element.
pub fn reference_lift(disc: &Discretization, flux: &[f64]) -> Vec<f64> {
    let e = &disc.elem;
    let (np, nf) = (e.num_nodes, e.num_face_dofs());
    let mut out = vec![0.0; disc.num_elements() * np];
    for k in 0..disc.num_elements() {
        let inv_j = 1.0 / disc.geom.jacobian[k];
        for r in 0..np {
            let s: f64 = (0..nf).map(|c| e.lift[(r, c)] * flux[k * nf + c]).sum();
            out[k * np + r] = inv_j * s;
        }
    }
    out
}

/// Physical gradient components of one field.
pub fn reference_diff(disc: &Discretization, u: &[f64]) -> [Vec<f64>; 3] {
    let e = &disc.elem;
    let np = e.num_nodes;
    let mut out = [0, 1, 2].map(|_| vec![0.0; u.len()]);
    for k in 0..disc.num_elements() {
        let uk = &u[k * np..(k + 1) * np];
        let dr: [Vec<f64>; 3] = std::array::from_fn(|mu| (0..np).map(|r| (0..np).map(|c| e.diff[mu][(r, c)] * uk[c]).sum()).collect());
        for nu in 0..3 {
            for r in 0..np {
                out[nu][k * np + r] = (0..3).map(|mu| disc.geom.rx[k][mu][nu] * dr[mu][r]).sum();
            }
        }
    }
    out
}

/// Face-Jacobian-scaled numerical flux on every element face, element-major
/// with `4 N_fp` values per element.
pub fn reference_gather<L: ConservationLaw>(disc: &Discretization, law: &L, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    gather_with(disc, &neighbor_nodes(disc), law, fields)
}

type NeighborNodes = [Vec<Option<usize>>; 4];

fn gather_with<L: ConservationLaw>(disc: &Discretization, nbr: &[NeighborNodes], law: &L, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let e = &disc.elem;
    let (np, nfp) = (e.num_nodes, e.num_face_nodes);
    let n = law.num_fields();
    let mut out = vec![vec![0.0; disc.num_elements() * 4 * nfp]; n];
    let (mut um, mut up, mut fl) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..disc.num_elements() {
        for f in 0..4 {
            let normal = disc.geom.normals[k][f];
            let sj = disc.geom.face_jacobian[k][f];
            let tag = match disc.conn.face_ref[k][f] {
                FaceRef::Boundary(b) => disc.conn.boundary[b].tag.code(),
                FaceRef::Interior(_) => 0,
            };
            for (j, &i) in e.face_nodes[f].iter().enumerate() {
                for c in 0..n {
                    um[c] = fields[c][k * np + i];
                }
                match nbr[k][f][j] {
                    Some(g) => {
                        for c in 0..n {
                            up[c] = fields[c][g];
                        }
                    }
                    None => law.boundary_state(&um, normal, tag, &mut up),
                }
                law.numerical_flux(&um, &up, normal, &mut fl);
                for c in 0..n {
                    out[c][(k * 4 + f) * nfp + j] = sj * fl[c];
                }
            }
        }
    }
    out
}

/// The full semi-discrete right-hand side, element-major per field.
pub fn reference_rhs<L: ConservationLaw>(disc: &Discretization, law: &L, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rhs_with(disc, &neighbor_nodes(disc), law, fields)
}

fn rhs_with<L: ConservationLaw>(disc: &Discretization, nbr: &[NeighborNodes], law: &L, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = law.num_fields();
    let flux = gather_with(disc, nbr, law, fields);
    let lifted: Vec<Vec<f64>> = flux.iter().map(|f| reference_lift(disc, f)).collect();
    let derivs: Vec<[Vec<f64>; 3]> = fields.iter().map(|u| reference_diff(disc, u)).collect();
    let a: Vec<Vec<f64>> = (0..3).map(|nu| law.flux_matrix(nu)).collect();
    let q = law.inv_q();
    (0..n)
        .map(|c| {
            (0..fields[c].len())
                .map(|i| {
                    let mut v = lifted[c][i];
                    for nu in 0..3 {
                        for d in 0..n {
                            v -= a[nu][c * n + d] * derivs[d][nu][i];
                        }
                    }
                    q[c] * v
                })
                .collect()
        })
        .collect()
}

/// The right-hand side as a dense matrix acting on the stacked state
/// `[field 0 | field 1 | ...]`, each element-major. Built column by column
/// from the reference operator, so only practical for small meshes.
pub fn dense_operator<L: ConservationLaw>(disc: &Discretization, law: &L) -> DMatrix<f64> {
    let n = law.num_fields();
    let len = disc.num_elements() * disc.elem.num_nodes;
    let mut m = DMatrix::zeros(n * len, n * len);
    let mut fields = vec![vec![0.0; len]; n];
    let nbr = neighbor_nodes(disc);
    for col in 0..n * len {
        fields[col / len][col % len] = 1.0;
        let r = rhs_with(disc, &nbr, law, &fields);
        fields[col / len][col % len] = 0.0;
        for (c, rc) in r.iter().enumerate() {
            for (i, v) in rc.iter().enumerate() {
                m[(c * len + i, col)] = *v;
            }
        }
    }
    m
}
