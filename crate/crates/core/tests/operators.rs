use std::sync::Arc;

use dgsim_core::device::{BlockOrder, Device, LaunchOptions};
use dgsim_core::kernels::oracle::{dense_operator, reference_diff, reference_gather, reference_lift, reference_rhs};
use dgsim_core::kernels::{flux_gather, flux_lift, local_diff, KernelConfig, OperatorConfig, Pipeline, ThreadOrder};
use dgsim_core::kernels::MatrixStorage;
use dgsim_core::maxwell::{Material, MaxwellLaw};
use dgsim_core::mesh::generate_box_mesh;
use dgsim_core::{Discretization, DiscretizationOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disc(order: usize, cells: [usize; 3], m_b: usize) -> Arc<Discretization> {
    let mesh = generate_box_mesh([1.0, 1.3, 0.8], cells).unwrap();
    Arc::new(Discretization::new(mesh, order, DiscretizationOptions { m_b, ..Default::default() }).unwrap())
}

fn random(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Element-major face values into the padded flux layout.
fn scatter_flux(d: &Discretization, f: &[f64]) -> Vec<f64> {
    let nfp = d.elem.num_face_nodes;
    let mut out = vec![0.0; d.layout.flux_len()];
    for k in 0..d.num_elements() {
        for face in 0..4 {
            let base = d.layout.face_base(k, face);
            out[base..base + nfp].copy_from_slice(&f[(k * 4 + face) * nfp..(k * 4 + face + 1) * nfp]);
        }
    }
    out
}

fn gather_flux(d: &Discretization, f: &[f64]) -> Vec<f64> {
    let nfp = d.elem.num_face_nodes;
    let mut out = vec![0.0; d.num_elements() * 4 * nfp];
    for k in 0..d.num_elements() {
        for face in 0..4 {
            let base = d.layout.face_base(k, face);
            out[(k * 4 + face) * nfp..(k * 4 + face + 1) * nfp].copy_from_slice(&f[base..base + nfp]);
        }
    }
    out
}

#[test]
fn lift_matches_reference() {
    for order in 1..=6 {
        let d = disc(order, [2, 1, 1], 1);
        let flux = random(d.num_elements() * 4 * d.elem.num_face_nodes, order as u64);
        let expected = reference_lift(&d, &flux);
        for (w_p, w_i) in [(1, 1), (2, 3), (3, 2)] {
            for thread_order in [ThreadOrder::Interleaved, ThreadOrder::Conventional] {
                let cfg = KernelConfig { thread_order, ..KernelConfig::field(w_p, w_i) };
                if dgsim_core::kernels::lift_shape(&d, &cfg, &Device::default()).is_err() {
                    continue;
                }
                let (out, _) = flux_lift(&d, &scatter_flux(&d, &flux), cfg, LaunchOptions::default()).unwrap();
                let err = max_rel(&d.layout.gather(&out), &expected);
                assert!(err < 1e-12, "N={order} w_p={w_p} w_i={w_i} {thread_order:?}: {err}");
            }
        }
    }
}

#[test]
fn diff_strategies_agree_with_reference() {
    for order in 1..=6 {
        let d = disc(order, [2, 1, 1], 1);
        let u = random(d.num_elements() * d.elem.num_nodes, 10 + order as u64);
        let expected = reference_diff(&d, &u);
        let mut configs = vec![KernelConfig::field(1, 1), KernelConfig::field(2, 3)];
        configs.push(KernelConfig::matrix(2, 1, 2, 16));
        configs.push(KernelConfig::matrix(1, 2, 1, 32));
        configs.push(KernelConfig { storage: MatrixStorage::Full, ..KernelConfig::matrix(1, 1, 1, 16) });
        for cfg in configs {
            if dgsim_core::kernels::diff_shape(&d, &cfg, &Device::default()).is_err() {
                continue;
            }
            let (out, _) = local_diff(&d, &d.layout.scatter(&u), cfg, LaunchOptions::default()).unwrap();
            for nu in 0..3 {
                let err = max_rel(&d.layout.gather(&out[nu]), &expected[nu]);
                assert!(err < 1e-12, "N={order} {cfg:?} nu={nu}: {err}");
            }
        }
    }
}

#[test]
fn diff_field_strategy_covers_high_orders() {
    let d = disc(8, [1, 1, 1], 1);
    let nodes = d.nodes();
    let u = d.sample(&nodes, |x| x[0]);
    let (out, _) = local_diff(&d, &u, KernelConfig::field(1, 1), LaunchOptions::default()).unwrap();
    for (nu, want) in [1.0, 0.0, 0.0].into_iter().enumerate() {
        for v in d.layout.gather(&out[nu]) {
            assert!((v - want).abs() < 1e-9, "nu={nu}: {v}");
        }
    }
    let err = local_diff(&d, &u, KernelConfig::matrix(1, 1, 1, 16), LaunchOptions::default()).unwrap_err();
    assert_eq!(err.kind(), "strategy_unavailable");
}

#[test]
fn gather_matches_reference() {
    let law = MaxwellLaw::new(Material::new(2.0, 0.5).unwrap());
    for order in 1..=5 {
        for m_b in [1, 2] {
            let d = disc(order, [2, 2, 1], m_b);
            let len = d.num_elements() * d.elem.num_nodes;
            let fields: Vec<Vec<f64>> = (0..6).map(|c| random(len, 100 * order as u64 + c)).collect();
            let expected = reference_gather(&d, &law, &fields);
            let padded: Vec<Vec<f64>> = fields.iter().map(|f| d.layout.scatter(f)).collect();
            for w_p in [1, 3] {
                let cfg = KernelConfig { w_p, m_b, ..Default::default() };
                let (out, _) = flux_gather(&d, &law, &padded, cfg, LaunchOptions::default()).unwrap();
                for c in 0..6 {
                    let err = max_rel(&gather_flux(&d, &out[c]), &expected[c]);
                    assert!(err < 1e-12, "N={order} m_b={m_b} w_p={w_p} field {c}: {err}");
                }
            }
        }
    }
}

fn pipeline_rhs(d: &Arc<Discretization>, config: OperatorConfig, order: BlockOrder, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let law = MaxwellLaw::default();
    let mut p = Pipeline::new(d.clone(), config, Device::default()).unwrap();
    p.options = LaunchOptions { order, ..Default::default() };
    let state: Vec<_> = fields.iter().enumerate().map(|(c, f)| p.upload(&format!("u{c}"), d.layout.scatter(f))).collect();
    let out: Vec<_> = (0..6).map(|c| p.zeros(&format!("r{c}"), d.layout.field_len())).collect();
    p.rhs(&law, &state, &out).unwrap();
    out.iter().map(|&b| p.download(b)).collect()
}

#[test]
fn pipeline_rhs_matches_reference_for_all_low_orders() {
    let law = MaxwellLaw::default();
    for order in 1..=5 {
        let cells = if order == 5 { [2, 1, 1] } else { [3, 1, 1] };
        let d = disc(order, cells, 1);
        let len = d.num_elements() * d.elem.num_nodes;
        let fields: Vec<Vec<f64>> = (0..6).map(|c| random(len, 7 * order as u64 + c)).collect();
        let expected = reference_rhs(&d, &law, &fields);
        let config = OperatorConfig::published_default(&d);
        let got = pipeline_rhs(&d, config, BlockOrder::Shuffled(3), &fields);
        for c in 0..6 {
            let padded = &got[c];
            let err = max_rel(&d.layout.gather(padded), &expected[c]);
            assert!(err < 1e-11, "N={order} field {c}: {err}");
            let live: usize = d.layout.slot_element.iter().filter(|s| s.is_some()).count();
            assert_eq!(live, d.num_elements());
        }
    }
}

#[test]
fn two_element_rhs_matches_dense_operator() {
    let law = MaxwellLaw::default();
    let mesh = generate_box_mesh([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
    let keep: Vec<[usize; 4]> = mesh.elements[..2].to_vec();
    let mesh = dgsim_core::Mesh::new(mesh.vertices.clone(), keep).unwrap();
    let d = Arc::new(Discretization::new(mesh, 2, DiscretizationOptions::default()).unwrap());
    assert_eq!(d.num_elements(), 2);
    let len = 2 * d.elem.num_nodes;
    let fields: Vec<Vec<f64>> = (0..6).map(|c| random(len, 50 + c)).collect();
    let a = dense_operator(&d, &law);
    let x: Vec<f64> = fields.iter().flatten().cloned().collect();
    let ax = &a * nalgebra::DVector::from_vec(x);
    let got = pipeline_rhs(&d, OperatorConfig::published_default(&d), BlockOrder::Forward, &fields);
    let flat: Vec<f64> = got.iter().flat_map(|f| d.layout.gather(f)).collect();
    let err = max_rel(&flat, ax.as_slice());
    assert!(err < 1e-11, "{err}");
}

#[test]
fn rhs_is_independent_of_block_order_and_config() {
    let d = disc(3, [2, 1, 1], 1);
    let len = d.num_elements() * d.elem.num_nodes;
    let fields: Vec<Vec<f64>> = (0..6).map(|c| random(len, 90 + c)).collect();
    let base = pipeline_rhs(&d, OperatorConfig::published_default(&d), BlockOrder::Forward, &fields);
    let alt = OperatorConfig {
        diff: KernelConfig::field(2, 2),
        gather: KernelConfig { w_p: 2, ..Default::default() },
        lift: KernelConfig { thread_order: ThreadOrder::Conventional, ..KernelConfig::field(3, 1) },
    };
    for (cfg, order) in [(alt, BlockOrder::Reverse), (OperatorConfig::published_default(&d), BlockOrder::Shuffled(11))] {
        let other = pipeline_rhs(&d, cfg, order, &fields);
        for c in 0..6 {
            assert!(max_rel(&other[c], &base[c]) < 1e-13);
        }
    }
}

#[test]
fn padding_stays_zero_in_rhs() {
    let d = Arc::new(
        Discretization::new(generate_box_mesh([1.0; 3], [1, 1, 1]).unwrap(), 2, DiscretizationOptions::default()).unwrap(),
    );
    // 6 elements into microblocks of 8 leaves two empty slots.
    assert!(d.layout.slot_element.iter().any(|s| s.is_none()));
    let len = d.num_elements() * d.elem.num_nodes;
    let fields: Vec<Vec<f64>> = (0..6).map(|c| random(len, 70 + c)).collect();
    let got = pipeline_rhs(&d, OperatorConfig::published_default(&d), BlockOrder::Forward, &fields);
    let np = d.elem.num_nodes;
    for f in &got {
        for (slot, e) in d.layout.slot_element.iter().enumerate() {
            let (m, s) = (slot / d.layout.k_m, slot % d.layout.k_m);
            let base = m * d.layout.n_pm + s * np;
            if e.is_none() {
                assert!(f[base..base + np].iter().all(|&v| v == 0.0));
            }
        }
        for m in 0..d.layout.n_m {
            let tail = m * d.layout.n_pm + d.layout.k_m * np..(m + 1) * d.layout.n_pm;
            assert!(f[tail].iter().all(|&v| v == 0.0));
        }
    }
}
