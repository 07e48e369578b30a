use serde::Serialize;

use super::LayoutPlan;
use crate::error::{Error, Result};
use crate::mesh::{FaceConnectivity, GeometricFactors};
use crate::refelem::{ReferenceElement, NUM_PERMUTATIONS, PERMUTATIONS};

/// Words per descriptor record in device memory.
pub const DESCRIPTOR_WORDS: usize = 12;
/// Per-block header: `[offset, n_intra, n_inter, n_boundary]`.
pub const HEADER_WORDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FaceCategory {
    IntraBlock,
    InterBlock,
    Boundary,
}

/// One face pair (intra-block) or one face (inter-block, boundary).
/// Index-list ids refer to [`ReferenceElement::fetch_lists`] and
/// [`ReferenceElement::store_lists`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FacePairDescriptor {
    pub fetch_base: [usize; 2],
    pub fetch_list: [usize; 2],
    pub store_base: [usize; 2],
    pub store_list_plus: usize,
    /// Of the fetching side; the plus side rescales by the reference face areas.
    pub face_jacobian: f64,
    pub normal: [f64; 3],
    pub bc_tag: u32,
}

impl FacePairDescriptor {
    pub fn to_words(&self) -> [f64; DESCRIPTOR_WORDS] {
        [
            self.fetch_base[0] as f64,
            self.fetch_base[1] as f64,
            self.fetch_list[0] as f64,
            self.fetch_list[1] as f64,
            self.store_base[0] as f64,
            self.store_base[1] as f64,
            self.store_list_plus as f64,
            self.face_jacobian,
            self.normal[0],
            self.normal[1],
            self.normal[2],
            self.bc_tag as f64,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GatherBlock {
    pub index: usize,
    /// Ordered intra-block, then inter-block, then boundary.
    pub descriptors: Vec<FacePairDescriptor>,
    pub n_intra: usize,
    pub n_inter: usize,
    pub n_boundary: usize,
    pub num_elements: usize,
}

impl GatherBlock {
    pub fn category(&self, i: usize) -> FaceCategory {
        if i < self.n_intra {
            FaceCategory::IntraBlock
        } else if i < self.n_intra + self.n_inter {
            FaceCategory::InterBlock
        } else {
            FaceCategory::Boundary
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GatherPlan {
    pub m_b: usize,
    pub budget: usize,
    pub blocks: Vec<GatherBlock>,
}

impl GatherPlan {
    /// Flattened device image: one header per block followed by all
    /// descriptor records. Header offsets count descriptors.
    pub fn device_words(&self) -> (Vec<f64>, Vec<f64>) {
        let mut headers = Vec::with_capacity(self.blocks.len() * HEADER_WORDS);
        let mut words = Vec::new();
        let mut offset = 0;
        for b in &self.blocks {
            headers.extend([offset as f64, b.n_intra as f64, b.n_inter as f64, b.n_boundary as f64]);
            for d in &b.descriptors {
                words.extend(d.to_words());
            }
            offset += b.descriptors.len();
        }
        (headers, words)
    }

    pub fn totals(&self) -> (usize, usize, usize) {
        self.blocks.iter().fold((0, 0, 0), |a, b| (a.0 + b.n_intra, a.1 + b.n_inter, a.2 + b.n_boundary))
    }
}

/// Largest descriptor count that fits shared memory next to the
/// `n_fields * m_b * n_fm` flux buffer, in 32-bit words.
pub fn default_descriptor_budget(shared_bytes: usize, n_fields: usize, m_b: usize, n_fm: usize) -> usize {
    let words = shared_bytes / 4;
    words.saturating_sub(HEADER_WORDS + n_fields * m_b * n_fm) / DESCRIPTOR_WORDS
}

fn inverse_perm(p: usize) -> usize {
    let fwd = PERMUTATIONS[p];
    let mut inv = [0; 3];
    for k in 0..3 {
        inv[fwd[k]] = k;
    }
    PERMUTATIONS.iter().position(|&q| q == inv).expect("permutations are closed under inversion")
}

/// Builds per-block descriptor arrays. Gather block `g` owns microblocks
/// `[g m_b, (g+1) m_b)`; a pair is intra-block when both of its elements fall
/// in the same gather block.
pub fn build_gather_plan(
    conn: &FaceConnectivity,
    geom: &GeometricFactors,
    layout: &LayoutPlan,
    m_b: usize,
    budget: usize,
) -> Result<GatherPlan> {
    if m_b == 0 {
        return Err(Error::InvalidArgument("M_B must be at least 1".into()));
    }
    let n_blocks = layout.n_m.div_ceil(m_b);
    let block_of = |e: usize| layout.microblock_of(e).0 / m_b;
    let mut intra: Vec<Vec<FacePairDescriptor>> = vec![Vec::new(); n_blocks];
    let mut inter: Vec<Vec<FacePairDescriptor>> = vec![Vec::new(); n_blocks];
    let mut bdry: Vec<Vec<FacePairDescriptor>> = vec![Vec::new(); n_blocks];

    for p in &conn.interior {
        let (em, fm, ep, fp) = (p.elem_minus, p.face_minus, p.elem_plus, p.face_plus);
        let sj = geom.face_jacobian[em][fm];
        let d_minus = FacePairDescriptor {
            fetch_base: [layout.field_base(em), layout.field_base(ep)],
            fetch_list: [fm * NUM_PERMUTATIONS, fp * NUM_PERMUTATIONS + p.perm],
            store_base: [layout.face_base(em, fm), layout.face_base(ep, fp)],
            store_list_plus: p.perm,
            face_jacobian: sj,
            normal: geom.normals[em][fm],
            bc_tag: 0,
        };
        let (bm, bp) = (block_of(em), block_of(ep));
        if bm == bp {
            intra[bm].push(d_minus);
        } else {
            inter[bm].push(d_minus);
            let inv = inverse_perm(p.perm);
            inter[bp].push(FacePairDescriptor {
                fetch_base: [layout.field_base(ep), layout.field_base(em)],
                fetch_list: [fp * NUM_PERMUTATIONS, fm * NUM_PERMUTATIONS + inv],
                store_base: [layout.face_base(ep, fp), layout.face_base(em, fm)],
                store_list_plus: inv,
                face_jacobian: geom.face_jacobian[ep][fp],
                normal: geom.normals[ep][fp],
                bc_tag: 0,
            });
        }
    }
    for b in &conn.boundary {
        bdry[block_of(b.elem)].push(FacePairDescriptor {
            fetch_base: [layout.field_base(b.elem), 0],
            fetch_list: [b.face * NUM_PERMUTATIONS, 0],
            store_base: [layout.face_base(b.elem, b.face), 0],
            store_list_plus: 0,
            face_jacobian: geom.face_jacobian[b.elem][b.face],
            normal: geom.normals[b.elem][b.face],
            bc_tag: b.tag.code(),
        });
    }

    let mut blocks = Vec::with_capacity(n_blocks);
    for g in 0..n_blocks {
        let (a, b, c) = (std::mem::take(&mut intra[g]), std::mem::take(&mut inter[g]), std::mem::take(&mut bdry[g]));
        let needed = a.len() + b.len() + c.len();
        if needed > budget {
            return Err(Error::DescriptorBudget { block: g, needed, budget });
        }
        let num_elements = (g * m_b..((g + 1) * m_b).min(layout.n_m)).map(|m| layout.microblock_elements(m)).sum();
        blocks.push(GatherBlock {
            index: g,
            n_intra: a.len(),
            n_inter: b.len(),
            n_boundary: c.len(),
            descriptors: a.into_iter().chain(b).chain(c).collect(),
            num_elements,
        });
    }
    Ok(GatherPlan { m_b, budget, blocks })
}

/// Checks that the descriptors of every block write each face DOF of the
/// layout exactly once and stay inside their block's output range.
pub fn check_store_coverage(plan: &GatherPlan, layout: &LayoutPlan, elem: &ReferenceElement) -> Result<()> {
    let nfp = elem.num_face_nodes;
    let mut hits = vec![0u8; layout.flux_len()];
    let span = plan.m_b * layout.n_fm;
    for b in &plan.blocks {
        let range = b.index * span..((b.index + 1) * span).min(layout.flux_len());
        for (i, d) in b.descriptors.iter().enumerate() {
            let mut bases = vec![d.store_base[0]];
            if b.category(i) == FaceCategory::IntraBlock {
                bases.push(d.store_base[1]);
            }
            for base in bases {
                if !range.contains(&base) || !range.contains(&(base + nfp - 1)) {
                    return Err(Error::Internal(format!("block {} stores outside its range", b.index)));
                }
                for j in 0..nfp {
                    hits[base + j] += 1;
                }
            }
        }
    }
    for e in 0..layout.num_elements {
        for f in 0..4 {
            let base = layout.face_base(e, f);
            if hits[base..base + nfp].iter().any(|&h| h != 1) {
                return Err(Error::Internal(format!("face {f} of element {e} not covered exactly once")));
            }
        }
    }
    if hits.iter().map(|&h| h as usize).sum::<usize>() != layout.num_elements * 4 * nfp {
        return Err(Error::Internal("stores hit padding".into()));
    }
    Ok(())
}
