//! Warp-and-blend interpolation nodes on the tetrahedron.
//!
//! Nodes are generated in an equilateral tetrahedron, then mapped to the unit
//! reference tetrahedron `{x, y, z >= 0, x + y + z <= 1}`. For orders 1 and 2
//! the construction degenerates to vertices and edge midpoints.

use super::basis::gauss_lobatto_points;

/// Optimized blending exponents, indexed by order - 1.
const ALPHA_OPT: [f64; 15] = [
    0.0, 0.0, 0.0, 0.1002, 1.1332, 1.5608, 1.3413, 1.2577, 1.1603, 1.10153, 0.6080, 0.4523, 0.8856,
    0.8717, 0.9655,
];

const TOL: f64 = 1e-10;

fn warp_function(order: usize, gauss: &[f64], x: f64) -> f64 {
    // Equispaced points in reverse order match the negated Lobatto set.
    let p = order;
    let xeq: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * (p - i) as f64 / p as f64).collect();
    let mut warp = 0.0;
    for i in 0..=p {
        let mut d = gauss[i] - xeq[i];
        for j in 1..p {
            if i != j {
                d *= (x - xeq[j]) / (xeq[i] - xeq[j]);
            }
        }
        if i != 0 {
            d = -d / (xeq[i] - xeq[0]);
        }
        if i != p {
            d /= xeq[i] - xeq[p];
        }
        warp += d;
    }
    warp
}

/// In-plane shift of a face point with barycentrics `(l1, l2, l3)`.
fn eval_shift(order: usize, alpha: f64, l1: f64, l2: f64, l3: f64) -> (f64, f64) {
    let gauss: Vec<f64> = gauss_lobatto_points(order).iter().map(|x| -x).collect();
    let blend1 = l2 * l3;
    let blend2 = l1 * l3;
    let blend3 = l1 * l2;
    let wf1 = 4.0 * warp_function(order, &gauss, l3 - l2);
    let wf2 = 4.0 * warp_function(order, &gauss, l1 - l3);
    let wf3 = 4.0 * warp_function(order, &gauss, l2 - l1);
    let w1 = blend1 * wf1 * (1.0 + (alpha * l1).powi(2));
    let w2 = blend2 * wf2 * (1.0 + (alpha * l2).powi(2));
    let w3 = blend3 * wf3 * (1.0 + (alpha * l3).powi(2));
    let c2 = (2.0 * std::f64::consts::PI / 3.0).cos();
    let c3 = (4.0 * std::f64::consts::PI / 3.0).cos();
    let s2 = (2.0 * std::f64::consts::PI / 3.0).sin();
    let s3 = (4.0 * std::f64::consts::PI / 3.0).sin();
    (w1 + c2 * w2 + c3 * w3, s2 * w2 + s3 * w3)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Nodes of order `order` on the unit tetrahedron, as `[x, y, z]`.
pub fn warp_blend_nodes(order: usize) -> Vec<[f64; 3]> {
    let n = order;
    let alpha = if n <= 15 { ALPHA_OPT[n - 1] } else { 0.0 };

    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let v1 = [-1.0, -1.0 / s3, -1.0 / s6];
    let v2 = [1.0, -1.0 / s3, -1.0 / s6];
    let v3 = [0.0, 2.0 / s3, -1.0 / s6];
    let v4 = [0.0, 0.0, 3.0 / s6];
    let mid = |a: [f64; 3], b: [f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
    let t1 = [
        normalized(sub(v2, v1)),
        normalized(sub(v2, v1)),
        normalized(sub(v3, v2)),
        normalized(sub(v3, v1)),
    ];
    let t2 = [
        normalized(sub(v3, mid(v1, v2))),
        normalized(sub(v4, mid(v1, v2))),
        normalized(sub(v4, mid(v2, v3))),
        normalized(sub(v4, mid(v1, v3))),
    ];

    let mut out = Vec::new();
    // Equispaced nodes on the bi-unit tet: t outermost, r innermost.
    for ti in 0..=n {
        for si in 0..=n - ti {
            for ri in 0..=n - ti - si {
                let h = 2.0 / n as f64;
                let (r, s, t) = (-1.0 + ri as f64 * h, -1.0 + si as f64 * h, -1.0 + ti as f64 * h);
                let l1 = (1.0 + t) / 2.0;
                let l2 = (1.0 + s) / 2.0;
                let l3 = -(1.0 + r + s + t) / 2.0;
                let l4 = (1.0 + r) / 2.0;
                let mut xyz = [0.0; 3];
                for d in 0..3 {
                    xyz[d] = l3 * v1[d] + l4 * v2[d] + l2 * v3[d] + l1 * v4[d];
                }
                let mut shift = [0.0; 3];
                for face in 0..4 {
                    let (la, lb, lc, ld) = match face {
                        0 => (l1, l2, l3, l4),
                        1 => (l2, l1, l3, l4),
                        2 => (l3, l1, l4, l2),
                        _ => (l4, l1, l3, l2),
                    };
                    let (w1, w2) = eval_shift(n, alpha, lb, lc, ld);
                    let mut blend = lb * lc * ld;
                    let denom = (lb + 0.5 * la) * (lc + 0.5 * la) * (ld + 0.5 * la);
                    if denom > TOL {
                        blend = (1.0 + (alpha * la).powi(2)) * blend / denom;
                    }
                    let on_face = la < TOL
                        && ((lb > TOL) as u8 + (lc > TOL) as u8 + (ld > TOL) as u8) < 3;
                    for d in 0..3 {
                        let face_shift = w1 * t1[face][d] + w2 * t2[face][d];
                        if on_face {
                            shift[d] = face_shift;
                        } else {
                            shift[d] += blend * face_shift;
                        }
                    }
                }
                for d in 0..3 {
                    xyz[d] += shift[d];
                }
                out.push(equilateral_to_unit(xyz, v1, v2, v3, v4));
            }
        }
    }
    out
}

/// Inverts `X = l0 v1 + l1 v2 + l2 v3 + l3 v4` for the barycentrics and
/// returns the unit-tet coordinates `(l1, l2, l3)`.
fn equilateral_to_unit(x: [f64; 3], v1: [f64; 3], v2: [f64; 3], v3: [f64; 3], v4: [f64; 3]) -> [f64; 3] {
    let a = nalgebra::Matrix3::from_columns(&[
        nalgebra::Vector3::from(sub(v2, v1)),
        nalgebra::Vector3::from(sub(v3, v1)),
        nalgebra::Vector3::from(sub(v4, v1)),
    ]);
    let rhs = nalgebra::Vector3::from(sub(x, v1));
    let sol = a.lu().solve(&rhs).expect("equilateral frame is invertible");
    let mut p = [sol[0], sol[1], sol[2]];
    for c in p.iter_mut() {
        if c.abs() < 1e-13 {
            *c = 0.0;
        }
    }
    let l0 = 1.0 - p[0] - p[1] - p[2];
    if l0.abs() < 1e-13 {
        // Snap onto the slanted face exactly.
        let s = p[0] + p[1] + p[2];
        for c in p.iter_mut() {
            *c /= s;
        }
    }
    p
}
