use std::collections::HashMap;

use super::{sorted_triple, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::refelem::{FACE_VERTICES, PERMUTATIONS};

/// Interior face pair. The minus side is the dominant one: the lower
/// `(element, face)`. `perm` indexes [`PERMUTATIONS`] and satisfies
/// `G_minus[k] == G_plus[PERMUTATIONS[perm][k]]` for the two faces' global
/// vertex triples in local face-vertex order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorFace {
    pub elem_minus: usize,
    pub face_minus: usize,
    pub elem_plus: usize,
    pub face_plus: usize,
    pub perm: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub elem: usize,
    pub face: usize,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceRef {
    Interior(usize),
    Boundary(usize),
}

#[derive(Debug, Clone)]
pub struct FaceConnectivity {
    pub interior: Vec<InteriorFace>,
    pub boundary: Vec<BoundaryFace>,
    /// For every element face, the entry in `interior` or `boundary`.
    pub face_ref: Vec<[FaceRef; 4]>,
}

impl FaceConnectivity {
    /// Neighbor `(element, face)` across an interior face, if any.
    pub fn neighbor(&self, elem: usize, face: usize) -> Option<(usize, usize)> {
        match self.face_ref[elem][face] {
            FaceRef::Interior(i) => {
                let p = self.interior[i];
                Some(if p.elem_minus == elem && p.face_minus == face {
                    (p.elem_plus, p.face_plus)
                } else {
                    (p.elem_minus, p.face_minus)
                })
            }
            FaceRef::Boundary(_) => None,
        }
    }
}

fn face_global(mesh: &Mesh, elem: usize, face: usize) -> [usize; 3] {
    let e = mesh.elements[elem];
    let fv = FACE_VERTICES[face];
    [e[fv[0]], e[fv[1]], e[fv[2]]]
}

pub fn build_connectivity(mesh: &Mesh) -> Result<FaceConnectivity> {
    let k = mesh.num_elements();
    let mut map: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::with_capacity(2 * k + 4);
    for elem in 0..k {
        for face in 0..4 {
            let g = face_global(mesh, elem, face);
            map.entry(sorted_triple(g[0], g[1], g[2])).or_default().push((elem, face));
        }
    }
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut face_ref = vec![[FaceRef::Boundary(usize::MAX); 4]; k];
    // Walk faces in (element, face) order so the output is deterministic.
    for elem in 0..k {
        for face in 0..4 {
            let g = face_global(mesh, elem, face);
            let key = sorted_triple(g[0], g[1], g[2]);
            let sides = &map[&key];
            match sides.len() {
                1 => {
                    face_ref[elem][face] = FaceRef::Boundary(boundary.len());
                    boundary.push(BoundaryFace { elem, face, tag: mesh.boundary_tag(&key) });
                }
                2 => {
                    let (a, b) = (sides[0], sides[1]);
                    let (minus, plus) = if a <= b { (a, b) } else { (b, a) };
                    if (elem, face) != minus {
                        continue;
                    }
                    let gm = face_global(mesh, minus.0, minus.1);
                    let gp = face_global(mesh, plus.0, plus.1);
                    let perm = PERMUTATIONS
                        .iter()
                        .position(|p| (0..3).all(|i| gm[i] == gp[p[i]]))
                        .ok_or_else(|| Error::Internal("face triples do not match".into()))?;
                    let idx = interior.len();
                    face_ref[minus.0][minus.1] = FaceRef::Interior(idx);
                    face_ref[plus.0][plus.1] = FaceRef::Interior(idx);
                    interior.push(InteriorFace {
                        elem_minus: minus.0,
                        face_minus: minus.1,
                        elem_plus: plus.0,
                        face_plus: plus.1,
                        perm,
                    });
                }
                n => return Err(Error::NonConforming { face: key, count: n }),
            }
        }
    }
    Ok(FaceConnectivity { interior, boundary, face_ref })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    fn two_tets() -> Mesh {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        Mesh::new(v, vec![[0, 1, 2, 3], [1, 2, 3, 4]]).unwrap()
    }

    #[test]
    fn single_tet() {
        let c = build_connectivity(&Mesh::reference_tet()).unwrap();
        assert_eq!((c.interior.len(), c.boundary.len()), (0, 4));
    }

    #[test]
    fn two_tets_share_one_face() {
        let c = build_connectivity(&two_tets()).unwrap();
        assert_eq!((c.interior.len(), c.boundary.len()), (1, 6));
        let p = c.interior[0];
        assert_eq!((p.elem_minus, p.elem_plus), (0, 1));
        assert_eq!(c.neighbor(1, p.face_plus), Some((0, p.face_minus)));
    }

    #[test]
    fn box_double_counting() {
        for cells in [[1, 1, 1], [2, 3, 1], [3, 3, 3]] {
            let m = generate_box_mesh([1.0, 2.0, 0.5], cells).unwrap();
            let c = build_connectivity(&m).unwrap();
            assert_eq!(4 * m.num_elements(), 2 * c.interior.len() + c.boundary.len());
            let exterior_faces = 4 * (cells[0] * cells[1] + cells[1] * cells[2] + cells[0] * cells[2]);
            assert_eq!(c.boundary.len(), exterior_faces);
        }
    }

    #[test]
    fn non_conforming_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
        let m = Mesh::new(v, vec![[0, 1, 2, 3], [1, 2, 3, 4], [1, 2, 3, 5]]).unwrap();
        assert!(matches!(build_connectivity(&m), Err(Error::NonConforming { count: 3, .. })));
    }
}
