use super::{cross, dot, sub, Mesh};
use crate::error::{Error, Result};
use crate::refelem::{reference_face_area, ReferenceElement, FACE_VERTICES, OPPOSITE_VERTEX};

/// Per-element affine geometry of `x = v0 + A r` on the unit reference tet.
#[derive(Debug, Clone)]
pub struct GeometricFactors {
    /// `A[nu][mu] = dx_nu / dr_mu`.
    pub map: Vec<[[f64; 3]; 3]>,
    /// `det A` (positive after orientation repair).
    pub jacobian: Vec<f64>,
    /// `rx[mu][nu] = dr_mu / dx_nu`, the inverse of `map`.
    pub rx: Vec<[[f64; 3]; 3]>,
    pub normals: Vec<[[f64; 3]; 4]>,
    /// Physical over reference face area.
    pub face_jacobian: Vec<[f64; 4]>,
    pub face_area: Vec<[f64; 4]>,
    pub inradius: Vec<f64>,
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn inv3(a: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // Cofactor of a[j][i].
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    r
}

pub fn compute_geometry(mesh: &Mesh) -> Result<GeometricFactors> {
    let k = mesh.num_elements();
    let mut g = GeometricFactors {
        map: Vec::with_capacity(k),
        jacobian: Vec::with_capacity(k),
        rx: Vec::with_capacity(k),
        normals: Vec::with_capacity(k),
        face_jacobian: Vec::with_capacity(k),
        face_area: Vec::with_capacity(k),
        inradius: Vec::with_capacity(k),
    };
    for (ei, e) in mesh.elements.iter().enumerate() {
        let v: Vec<[f64; 3]> = e.iter().map(|&i| mesh.vertices[i]).collect();
        let cols = [sub(v[1], v[0]), sub(v[2], v[0]), sub(v[3], v[0])];
        let mut a = [[0.0; 3]; 3];
        for nu in 0..3 {
            for mu in 0..3 {
                a[nu][mu] = cols[mu][nu];
            }
        }
        let det = det3(&a);
        if !(det > 0.0) {
            return Err(Error::DegenerateElement(ei));
        }
        let mut normals = [[0.0; 3]; 4];
        let mut sj = [0.0; 4];
        let mut areas = [0.0; 4];
        for f in 0..4 {
            let fv = FACE_VERTICES[f];
            let c = cross(sub(v[fv[1]], v[fv[0]]), sub(v[fv[2]], v[fv[0]]));
            let len = dot(c, c).sqrt();
            let mut n = [c[0] / len, c[1] / len, c[2] / len];
            if dot(n, sub(v[OPPOSITE_VERTEX[f]], v[fv[0]])) > 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            normals[f] = n;
            areas[f] = 0.5 * len;
            sj[f] = areas[f] / reference_face_area(f);
        }
        g.inradius.push(3.0 * (det / 6.0) / areas.iter().sum::<f64>());
        g.rx.push(inv3(&a, det));
        g.map.push(a);
        g.jacobian.push(det);
        g.normals.push(normals);
        g.face_jacobian.push(sj);
        g.face_area.push(areas);
    }
    Ok(g)
}

/// Physical coordinates of every element's nodes, element-major.
pub fn physical_nodes(mesh: &Mesh, elem: &ReferenceElement) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(mesh.num_elements() * elem.num_nodes);
    for e in &mesh.elements {
        let v0 = mesh.vertices[e[0]];
        let cols = [sub(mesh.vertices[e[1]], v0), sub(mesh.vertices[e[2]], v0), sub(mesh.vertices[e[3]], v0)];
        for r in &elem.nodes {
            let mut x = v0;
            for mu in 0..3 {
                for nu in 0..3 {
                    x[nu] += cols[mu][nu] * r[mu];
                }
            }
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_connectivity, generate_box_mesh};
    use rand::{Rng, SeedableRng};

    #[test]
    fn reference_tet_is_identity() {
        let g = compute_geometry(&Mesh::reference_tet()).unwrap();
        assert_eq!(g.jacobian[0], 1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.map[0][i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(g.face_jacobian[0].iter().all(|&s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scaling() {
        let s = 2.5;
        let mut m = Mesh::reference_tet();
        for v in m.vertices.iter_mut() {
            for c in v.iter_mut() {
                *c *= s;
            }
        }
        let g = compute_geometry(&m).unwrap();
        assert!((g.jacobian[0] - s * s * s).abs() < 1e-12);
        assert!(g.face_jacobian[0].iter().all(|&x| (x - s * s).abs() < 1e-12));
    }

    #[test]
    fn random_tets_invert_and_close() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let v: Vec<[f64; 3]> = (0..4).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let Ok(m) = Mesh::new(v, vec![[0, 1, 2, 3]]) else { continue };
            let g = compute_geometry(&m).unwrap();
            assert!(g.jacobian[0] > 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    let p: f64 = (0..3).map(|l| g.map[0][i][l] * g.rx[0][l][j]).sum();
                    assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12 * g.jacobian[0].recip().max(1.0));
                }
            }
            let mut closure = [0.0; 3];
            for f in 0..4 {
                let n = g.normals[0][f];
                assert!((dot(n, n).sqrt() - 1.0).abs() < 1e-12);
                for d in 0..3 {
                    closure[d] += g.face_area[0][f] * n[d];
                }
            }
            assert!(closure.iter().all(|c| c.abs() < 1e-10));
        }
    }

    #[test]
    fn affine_map_interpolates_vertices() {
        let elem = ReferenceElement::new(1).unwrap();
        let m = generate_box_mesh([1.0, 2.0, 3.0], [2, 1, 1]).unwrap();
        let x = physical_nodes(&m, &elem);
        for (k, e) in m.elements.iter().enumerate() {
            for i in 0..4 {
                let want = m.vertices[e[i]];
                assert!((0..3).all(|d| (x[k * 4 + i][d] - want[d]).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn interior_normals_oppose_and_face_nodes_match() {
        let m = generate_box_mesh([1.0, 1.3, 0.7], [2, 2, 2]).unwrap();
        let g = compute_geometry(&m).unwrap();
        let c = build_connectivity(&m).unwrap();
        for order in [1, 3, 4] {
            let elem = ReferenceElement::new(order).unwrap();
            let x = physical_nodes(&m, &elem);
            let np = elem.num_nodes;
            for p in &c.interior {
                let nm = g.normals[p.elem_minus][p.face_minus];
                let npl = g.normals[p.elem_plus][p.face_plus];
                assert!((0..3).all(|d| (nm[d] + npl[d]).abs() < 1e-12));
                let minus = &elem.fetch_lists[p.face_minus * 6];
                let plus = &elem.fetch_lists[p.face_plus * 6 + p.perm];
                for j in 0..elem.num_face_nodes {
                    let a = x[p.elem_minus * np + minus[j]];
                    let b = x[p.elem_plus * np + plus[j]];
                    assert!((0..3).all(|d| (a[d] - b[d]).abs() < 1e-10));
                }
                // Store list maps minus-ordered values into plus canonical order.
                let store = &elem.store_lists[p.perm];
                for j in 0..elem.num_face_nodes {
                    assert_eq!(plus[j], elem.face_nodes[p.face_plus][store[j]]);
                }
            }
        }
    }
}
