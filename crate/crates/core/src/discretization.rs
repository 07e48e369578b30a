//! Everything the kernels need to know about one mesh at one order.

use crate::error::Result;
use crate::layout::{
    build_gather_plan, build_layout_plan, choose_microblock_size, default_descriptor_budget, greedy_partition, GatherPlan, LayoutPlan,
    DEFAULT_WASTE_CAP, WARP_SIZE,
};
use crate::mesh::{build_connectivity, compute_geometry, physical_nodes, FaceConnectivity, GeometricFactors, Mesh};
use crate::refelem::ReferenceElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscretizationOptions {
    /// Microblock size; `None` uses the padding heuristic.
    pub k_m: Option<usize>,
    /// Microblocks per gather block.
    pub m_b: usize,
    /// Fields gathered together (sizes the default descriptor budget).
    pub n_fields: usize,
    /// Descriptor limit per gather block; `None` derives it from shared
    /// memory capacity.
    pub descriptor_budget: Option<usize>,
}

impl Default for DiscretizationOptions {
    fn default() -> Self {
        DiscretizationOptions { k_m: None, m_b: 1, n_fields: 6, descriptor_budget: None }
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub elem: ReferenceElement,
    pub conn: FaceConnectivity,
    pub geom: GeometricFactors,
    pub partition: Vec<Vec<usize>>,
    pub layout: LayoutPlan,
    pub gather: GatherPlan,
    pub options: DiscretizationOptions,
}

impl Discretization {
    pub fn new(mesh: Mesh, order: usize, options: DiscretizationOptions) -> Result<Self> {
        let elem = ReferenceElement::new(order)?;
        Self::with_element(mesh, elem, options)
    }

    pub fn with_element(mesh: Mesh, elem: ReferenceElement, options: DiscretizationOptions) -> Result<Self> {
        let conn = build_connectivity(&mesh)?;
        let geom = compute_geometry(&mesh)?;
        let k_m = options.k_m.unwrap_or_else(|| choose_microblock_size(elem.num_nodes, WARP_SIZE, DEFAULT_WASTE_CAP).0);
        let m_b = options.m_b.max(1);
        let partition = greedy_partition(&conn, k_m * m_b)?;
        Self::with_partition(mesh, elem, conn, geom, partition, options)
    }

    pub fn with_partition(
        mesh: Mesh,
        elem: ReferenceElement,
        conn: FaceConnectivity,
        geom: GeometricFactors,
        partition: Vec<Vec<usize>>,
        options: DiscretizationOptions,
    ) -> Result<Self> {
        let layout = build_layout_plan(mesh.num_elements(), &elem, &partition, options.k_m)?;
        let budget = options
            .descriptor_budget
            .unwrap_or_else(|| default_descriptor_budget(16384, options.n_fields, options.m_b, layout.n_fm));
        let gather = build_gather_plan(&conn, &geom, &layout, options.m_b, budget)?;
        Ok(Discretization { mesh, elem, conn, geom, partition, layout, gather, options })
    }

    pub fn order(&self) -> usize {
        self.elem.order
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// Physical node coordinates, element-major.
    pub fn nodes(&self) -> Vec<[f64; 3]> {
        physical_nodes(&self.mesh, &self.elem)
    }

    /// Samples `f` at every node into the padded layout.
    pub fn sample(&self, nodes: &[[f64; 3]], f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        let data: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        self.layout.scatter(&data)
    }
}
