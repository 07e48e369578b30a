//! Face-conforming tetrahedral meshes: storage, box generation, TetGen input,
//! face connectivity and affine geometry.

mod connectivity;
mod geometry;
mod tetgen;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use connectivity::{build_connectivity, BoundaryFace, FaceConnectivity, InteriorFace};
pub use geometry::{compute_geometry, physical_nodes, GeometricFactors};
pub use connectivity::FaceRef;
pub use tetgen::read_tetgen;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BoundaryTag {
    /// Perfect electric conductor.
    #[default]
    Pec,
}

impl BoundaryTag {
    pub fn code(self) -> u32 {
        match self {
            BoundaryTag::Pec => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 4]>,
    /// Tags keyed by sorted global vertex triple. Boundary faces without an
    /// entry default to [`BoundaryTag::Pec`].
    pub boundary_tags: HashMap<[usize; 3], BoundaryTag>,
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn signed_volume(v: &[[f64; 3]], e: [usize; 4]) -> f64 {
    let a = sub(v[e[1]], v[e[0]]);
    let b = sub(v[e[2]], v[e[0]]);
    let c = sub(v[e[3]], v[e[0]]);
    dot(a, cross(b, c)) / 6.0
}

pub(crate) fn sorted_triple(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut t = [a, b, c];
    t.sort_unstable();
    t
}

impl Mesh {
    /// Validates indices and repairs negatively oriented elements by swapping
    /// their last two vertices.
    pub fn new(vertices: Vec<[f64; 3]>, mut elements: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        for (k, e) in elements.iter_mut().enumerate() {
            for &v in e.iter() {
                if v >= nv {
                    return Err(Error::VertexOutOfRange { element: k, vertex: v, count: nv });
                }
            }
            let vol = signed_volume(&vertices, *e);
            let scale = e
                .iter()
                .map(|&i| dot(sub(vertices[i], vertices[e[0]]), sub(vertices[i], vertices[e[0]])))
                .fold(0.0, f64::max)
                .powf(1.5);
            if vol.abs() <= 1e-14 * scale || vol == 0.0 {
                return Err(Error::DegenerateElement(k));
            }
            if vol < 0.0 {
                e.swap(2, 3);
            }
        }
        Ok(Mesh { vertices, elements, boundary_tags: HashMap::new() })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_volume(&self, k: usize) -> f64 {
        signed_volume(&self.vertices, self.elements[k])
    }

    pub fn boundary_tag(&self, key: &[usize; 3]) -> BoundaryTag {
        self.boundary_tags.get(key).copied().unwrap_or_default()
    }

    /// Applies `order[new] = old` and returns the reordered mesh.
    pub fn renumbered(&self, order: &[usize]) -> Mesh {
        Mesh {
            vertices: self.vertices.clone(),
            elements: order.iter().map(|&k| self.elements[k]).collect(),
            boundary_tags: self.boundary_tags.clone(),
        }
    }

    /// Single unit reference tetrahedron.
    pub fn reference_tet() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
        .expect("reference tet is valid")
    }
}

/// Box `[0,a] x [0,b] x [0,c]` split into hexahedral cells, each cut into six
/// tetrahedra along its main diagonal. All boundary faces are PEC.
pub fn generate_box_mesh(extent: [f64; 3], cells: [usize; 3]) -> Result<Mesh> {
    if extent.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("box extents must be positive, got {extent:?}")));
    }
    if cells.iter().any(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("cell counts must be at least 1, got {cells:?}")));
    }
    let [nx, ny, nz] = cells;
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    extent[0] * i as f64 / nx as f64,
                    extent[1] * j as f64 / ny as f64,
                    extent[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    // Each tet follows a monotone path from the cell's low corner to its high
    // corner, one axis at a time.
    const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut elements = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for order in AXIS_ORDERS {
                    let mut c = [i, j, k];
                    let mut tet = [vid(i, j, k), 0, 0, 0];
                    for (step, &axis) in order.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = vid(c[0], c[1], c[2]);
                    }
                    elements.push(tet);
                }
            }
        }
    }
    Mesh::new(vertices, elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_counts() {
        assert_eq!(generate_box_mesh([1.0; 3], [1, 1, 1]).unwrap().num_elements(), 6);
        assert_eq!(generate_box_mesh([1.0; 3], [2, 1, 1]).unwrap().num_elements(), 12);
        assert_eq!(generate_box_mesh([1.0; 3], [3, 3, 3]).unwrap().num_elements(), 162);
    }

    #[test]
    fn box_volume_sums_to_extent_product() {
        for (ext, cells) in [([1.0, 1.0, 1.0], [1, 1, 1]), ([2.0, 0.5, 3.0], [3, 2, 4]), ([0.1, 7.0, 1.3], [1, 5, 2])] {
            let m = generate_box_mesh(ext, cells).unwrap();
            let total: f64 = (0..m.num_elements()).map(|k| m.element_volume(k)).sum();
            let want = ext[0] * ext[1] * ext[2];
            assert!((total - want).abs() < 1e-12 * want);
            assert!((0..m.num_elements()).all(|k| m.element_volume(k) > 0.0));
        }
    }

    #[test]
    fn rejects_bad_box_input() {
        assert!(generate_box_mesh([0.0, 1.0, 1.0], [1, 1, 1]).is_err());
        assert!(generate_box_mesh([1.0, 1.0, 1.0], [1, 0, 1]).is_err());
        assert!(generate_box_mesh([1.0, -1.0, 1.0], [1, 1, 1]).is_err());
    }

    #[test]
    fn orientation_is_repaired() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::new(v, vec![[0, 1, 3, 2]]).unwrap();
        assert!(m.element_volume(0) > 0.0);
    }

    #[test]
    fn degenerate_and_out_of_range_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(Mesh::new(v.clone(), vec![[0, 1, 2, 3]]), Err(Error::DegenerateElement(0))));
        assert!(matches!(Mesh::new(v, vec![[0, 1, 2, 4]]), Err(Error::VertexOutOfRange { .. })));
    }
}
