//! Reference tetrahedron: interpolation nodes and the local matrices of the
//! nodal DG operator.
//!
//! The reference element is the unit tetrahedron with vertices
//! `(0,0,0), (1,0,0), (0,1,0), (0,0,1)` (volume 1/6). Matrices are assembled
//! through an orthonormal modal basis: with `V[i][j] = psi_j(x_i)` the nodal
//! mass matrix is `M = (V V^T)^-1`, the differentiation matrices are
//! `D^r = V_r V^-1`, and stiffness matrices follow as `S^r = M D^r`.
//!
//! Face `f` is spanned by the local vertices [`FACE_VERTICES`]`[f]`. Face
//! nodes are listed in a canonical order: lexicographic in the face-local
//! reference coordinates `(s, r) = (lambda_2, lambda_1)` taken w.r.t. the
//! face's vertex triple, so the ordering is the same on every face.

pub mod basis;
pub mod nodes;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const NUM_FACES: usize = 4;

/// Local vertex triples of the four faces.
pub const FACE_VERTICES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]];

/// Local vertex opposite each face.
pub const OPPOSITE_VERTEX: [usize; 4] = [3, 2, 0, 1];

/// The six orderings of a face's vertex triple. Index 0 is the identity.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

pub const NUM_PERMUTATIONS: usize = 6;

/// Areas of the reference faces.
pub fn reference_face_area(face: usize) -> f64 {
    if face == 2 {
        3f64.sqrt() / 2.0
    } else {
        0.5
    }
}

pub const REFERENCE_VOLUME: f64 = 1.0 / 6.0;

pub const MAX_ORDER: usize = 9;

/// `(N_p, N_fp)` for polynomial degree `order`.
pub fn simplex_node_count(order: usize) -> Result<(usize, usize)> {
    if order < 1 {
        return Err(Error::InvalidOrder(order));
    }
    Ok(((order + 1) * (order + 2) * (order + 3) / 6, (order + 1) * (order + 2) / 2))
}

/// Barycentric coordinates `[l0, l1, l2, l3]` of a unit-tet point.
pub fn barycentric(p: [f64; 3]) -> [f64; 4] {
    [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

fn face_barycentric(p: [f64; 3], face: usize) -> [f64; 3] {
    let l = barycentric(p);
    let v = FACE_VERTICES[face];
    [l[v[0]], l[v[1]], l[v[2]]]
}

fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub order: usize,
    pub num_nodes: usize,
    pub num_face_nodes: usize,
    pub nodes: Vec<[f64; 3]>,
    pub vandermonde: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub inv_mass: DMatrix<f64>,
    pub stiffness: [DMatrix<f64>; 3],
    pub diff: [DMatrix<f64>; 3],
    /// Face mass matrices in canonical face-node order, one per face.
    pub face_mass: [DMatrix<f64>; 4],
    /// `N_p x (4 N_fp)`; column block `f` acts on face `f`'s canonical nodes.
    pub lift: DMatrix<f64>,
    /// Volume node indices of each face, canonical order.
    pub face_nodes: [Vec<usize>; 4],
    /// Fetch index lists, entry `face * 6 + perm`: volume node indices on
    /// `face` that match the opposite side's canonical nodes when the two
    /// vertex triples are related by `PERMUTATIONS[perm]`.
    pub fetch_lists: Vec<Vec<usize>>,
    /// Store index lists, entry `perm`: canonical face positions of the
    /// nodes named by the corresponding fetch list.
    pub store_lists: Vec<Vec<usize>>,
    pub vandermonde_condition: f64,
}

impl ReferenceElement {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        let (np, nfp) = simplex_node_count(order)?;
        let nodes = nodes::warp_blend_nodes(order);
        debug_assert_eq!(nodes.len(), np);

        let modes = basis::modes_3d(order);
        let scale = 8f64.sqrt();
        let mut v = DMatrix::zeros(np, np);
        let mut vgrad = [DMatrix::zeros(np, np), DMatrix::zeros(np, np), DMatrix::zeros(np, np)];
        for (i, p) in nodes.iter().enumerate() {
            let (r, s, t) = (2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0, 2.0 * p[2] - 1.0);
            for (j, &m) in modes.iter().enumerate() {
                v[(i, j)] = scale * basis::simplex3d_p(r, s, t, m);
                let g = basis::grad_simplex3d_p(r, s, t, m);
                for d in 0..3 {
                    vgrad[d][(i, j)] = 2.0 * scale * g[d];
                }
            }
        }
        let svd = v.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if cond > 1e12 {
            return Err(Error::SingularVandermonde { order, condition: cond });
        }
        let v_inv = v.clone().try_inverse().ok_or(Error::SingularVandermonde { order, condition: cond })?;
        let inv_mass = &v * v.transpose();
        let mass = v_inv.transpose() * &v_inv;
        let mut diff = [&vgrad[0] * &v_inv, &vgrad[1] * &v_inv, &vgrad[2] * &v_inv];
        // Rows of D must sum to zero; rebuilding the diagonal from the
        // off-diagonal entries removes the roundoff accumulated at high order.
        for d in diff.iter_mut() {
            for i in 0..np {
                let off: f64 = (0..np).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
                d[(i, i)] = -off;
            }
        }
        let stiffness = [&mass * &diff[0], &mass * &diff[1], &mass * &diff[2]];

        let face_nodes = build_face_nodes(&nodes, nfp)?;
        let face_mass = build_face_mass(order, &nodes, &face_nodes)?;
        let (fetch_lists, store_lists) = build_permutation_lists(&nodes, &face_nodes)?;

        let mut elem = ReferenceElement {
            order,
            num_nodes: np,
            num_face_nodes: nfp,
            nodes,
            vandermonde: v,
            mass,
            inv_mass,
            stiffness,
            diff,
            face_mass,
            lift: DMatrix::zeros(np, NUM_FACES * nfp),
            face_nodes,
            fetch_lists,
            store_lists,
            vandermonde_condition: cond,
        };
        elem.lift = build_lifting_matrix(&elem);
        Ok(elem)
    }

    /// `N_f * N_fp`.
    pub fn num_face_dofs(&self) -> usize {
        NUM_FACES * self.num_face_nodes
    }

    /// Block matrix with face `f`'s mass matrix embedded at that face's
    /// volume-node rows (column block `f`).
    pub fn embedded_face_mass(&self) -> DMatrix<f64> {
        let nfp = self.num_face_nodes;
        let mut e = DMatrix::zeros(self.num_nodes, NUM_FACES * nfp);
        for f in 0..NUM_FACES {
            for (a, &row) in self.face_nodes[f].iter().enumerate() {
                for b in 0..nfp {
                    e[(row, f * nfp + b)] = self.face_mass[f][(a, b)];
                }
            }
        }
        e
    }

    /// `[D^r | D^s | D^t]`, row-major, `N_p x 3N_p`.
    pub fn diff_concat_row_major(&self) -> Vec<f64> {
        let np = self.num_nodes;
        let mut out = Vec::with_capacity(3 * np * np);
        for i in 0..np {
            for d in &self.diff {
                for j in 0..np {
                    out.push(d[(i, j)]);
                }
            }
        }
        out
    }

    /// Lifting matrix flattened column-major (`N_p` contiguous per column).
    pub fn lift_column_major(&self) -> Vec<f64> {
        self.lift.as_slice().to_vec()
    }
}

/// `L = M^-1 [embedded M^A_1 ... M^A_4]`.
pub fn build_lifting_matrix(elem: &ReferenceElement) -> DMatrix<f64> {
    &elem.inv_mass * elem.embedded_face_mass()
}

fn build_face_nodes(nodes: &[[f64; 3]], nfp: usize) -> Result<[Vec<usize>; 4]> {
    let mut out: [Vec<usize>; 4] = Default::default();
    for f in 0..NUM_FACES {
        let opp = OPPOSITE_VERTEX[f];
        let mut ids: Vec<usize> = (0..nodes.len())
            .filter(|&i| barycentric(nodes[i])[opp].abs() < 1e-10)
            .collect();
        if ids.len() != nfp {
            return Err(Error::Internal(format!("face {f} has {} nodes, expected {nfp}", ids.len())));
        }
        ids.sort_by_key(|&i| {
            let b = face_barycentric(nodes[i], f);
            (quantize(b[2]), quantize(b[1]))
        });
        out[f] = ids;
    }
    Ok(out)
}

fn build_face_mass(order: usize, nodes: &[[f64; 3]], face_nodes: &[Vec<usize>; 4]) -> Result<[DMatrix<f64>; 4]> {
    let modes = basis::modes_2d(order);
    let mut out: [DMatrix<f64>; 4] = Default::default();
    for f in 0..NUM_FACES {
        let nfp = face_nodes[f].len();
        let mut v = DMatrix::zeros(nfp, nfp);
        for (a, &i) in face_nodes[f].iter().enumerate() {
            let b = face_barycentric(nodes[i], f);
            let (r, s) = (2.0 * b[1] - 1.0, 2.0 * b[2] - 1.0);
            for (j, &m) in modes.iter().enumerate() {
                v[(a, j)] = basis::simplex2d_p(r, s, m);
            }
        }
        let vvt = &v * v.transpose();
        let m_biunit = vvt
            .try_inverse()
            .ok_or_else(|| Error::Internal(format!("face {f} Vandermonde is singular")))?;
        out[f] = m_biunit * (reference_face_area(f) / 2.0);
    }
    Ok(out)
}

fn build_permutation_lists(nodes: &[[f64; 3]], face_nodes: &[Vec<usize>; 4]) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let canon: Vec<[f64; 3]> = face_nodes[0].iter().map(|&i| face_barycentric(nodes[i], 0)).collect();
    // Every face must present the same canonical barycentric pattern.
    for f in 1..NUM_FACES {
        for (j, &i) in face_nodes[f].iter().enumerate() {
            let b = face_barycentric(nodes[i], f);
            if (0..3).any(|k| (b[k] - canon[j][k]).abs() > 1e-9) {
                return Err(Error::Internal(format!("face {f} node pattern differs from face 0")));
            }
        }
    }
    let find = |target: [f64; 3]| -> Option<usize> {
        canon.iter().position(|b| (0..3).all(|k| (b[k] - target[k]).abs() < 1e-9))
    };
    let mut store_lists = Vec::with_capacity(NUM_PERMUTATIONS);
    for perm in PERMUTATIONS {
        let mut list = Vec::with_capacity(canon.len());
        for beta in &canon {
            let mut gamma = [0.0; 3];
            for k in 0..3 {
                gamma[perm[k]] = beta[k];
            }
            let pos = find(gamma)
                .ok_or_else(|| Error::Internal("face node set is not permutation symmetric".into()))?;
            list.push(pos);
        }
        store_lists.push(list);
    }
    let mut fetch_lists = Vec::with_capacity(NUM_FACES * NUM_PERMUTATIONS);
    for f in 0..NUM_FACES {
        for store in &store_lists {
            fetch_lists.push(store.iter().map(|&pos| face_nodes[f][pos]).collect());
        }
    }
    Ok((fetch_lists, store_lists))
}
