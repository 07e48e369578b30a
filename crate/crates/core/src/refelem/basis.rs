//! Orthonormal modal bases on the simplex (Koornwinder–Dubiner) and the
//! one-dimensional Jacobi / Legendre machinery they are built from.
//!
//! Evaluation happens on the bi-unit reference simplices
//! (`[-1,1]` edges); callers convert to the unit tetrahedron.

/// Γ(n) for a positive integer-valued argument.
fn gamma_int(n: f64) -> f64 {
    debug_assert!(n >= 1.0 && (n - n.round()).abs() < 1e-12);
    let mut acc = 1.0;
    let mut k = 2.0;
    while k < n - 0.5 {
        acc *= k;
        k += 1.0;
    }
    acc
}

/// Normalized Jacobi polynomial `P_n^{(alpha,beta)}(x)`, orthonormal on
/// `[-1,1]` with weight `(1-x)^alpha (1+x)^beta`. `alpha` and `beta` must be
/// non-negative integers.
pub fn jacobi_p(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    let ab = alpha + beta;
    let gamma0 = 2f64.powf(ab + 1.0) / (ab + 1.0) * gamma_int(alpha + 1.0) * gamma_int(beta + 1.0)
        / gamma_int(ab + 1.0);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (alpha + 1.0) * (beta + 1.0) / (ab + 3.0) * gamma0;
    let p1 = ((ab + 2.0) * x / 2.0 + (alpha - beta) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut a_old = 2.0 / (2.0 + ab) * ((alpha + 1.0) * (beta + 1.0) / (ab + 3.0)).sqrt();
    let (mut pm1, mut p) = (p0, p1);
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + ab;
        let a_new = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + ab) * (i + 1.0 + alpha) * (i + 1.0 + beta)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let b_new = -(alpha * alpha - beta * beta) / h1 / (h1 + 2.0);
        let next = (-a_old * pm1 + (x - b_new) * p) / a_new;
        pm1 = p;
        p = next;
        a_old = a_new;
    }
    p
}

/// Derivative of [`jacobi_p`] with respect to `x`.
pub fn grad_jacobi_p(x: f64, alpha: f64, beta: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        let nf = n as f64;
        (nf * (nf + alpha + beta + 1.0)).sqrt() * jacobi_p(x, alpha + 1.0, beta + 1.0, n - 1)
    }
}

/// Legendre–Gauss–Lobatto points on `[-1,1]`, ascending, `n + 1` of them.
pub fn gauss_lobatto_points(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![-1.0, 1.0];
    }
    let nf = n as f64;
    let mut pts: Vec<f64> = (0..=n)
        .map(|i| -(std::f64::consts::PI * i as f64 / nf).cos())
        .collect();
    for x in pts.iter_mut().take(n).skip(1) {
        for _ in 0..100 {
            // Legendre recurrence for P_n and P_{n-1}.
            let (mut p_prev, mut p) = (1.0, *x);
            for k in 2..=n {
                let kf = k as f64;
                let next = ((2.0 * kf - 1.0) * *x * p - (kf - 1.0) * p_prev) / kf;
                p_prev = p;
                p = next;
            }
            let dx = (*x * p - p_prev) / ((nf + 1.0) * p);
            *x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    pts
}

/// Collapsed coordinates `(a, b, c)` for a bi-unit tetrahedron point.
pub fn rst_to_abc(r: f64, s: f64, t: f64) -> (f64, f64, f64) {
    let a = if (s + t).abs() > 1e-14 {
        2.0 * (1.0 + r) / (-s - t) - 1.0
    } else {
        -1.0
    };
    let b = if (t - 1.0).abs() > 1e-14 {
        2.0 * (1.0 + s) / (1.0 - t) - 1.0
    } else {
        -1.0
    };
    (a, b, t)
}

/// Mode multi-indices `(i, j, k)` with `i + j + k <= order`, in the order used
/// for Vandermonde columns.
pub fn modes_3d(order: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                out.push((i, j, k));
            }
        }
    }
    out
}

pub fn modes_2d(order: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            out.push((i, j));
        }
    }
    out
}

/// Orthonormal basis function on the bi-unit tetrahedron (volume 4/3).
pub fn simplex3d_p(r: f64, s: f64, t: f64, (i, j, k): (usize, usize, usize)) -> f64 {
    let (a, b, c) = rst_to_abc(r, s, t);
    let h1 = jacobi_p(a, 0.0, 0.0, i);
    let h2 = jacobi_p(b, 2.0 * i as f64 + 1.0, 0.0, j);
    let h3 = jacobi_p(c, 2.0 * (i + j) as f64 + 2.0, 0.0, k);
    2.0 * std::f64::consts::SQRT_2 * h1 * h2 * (1.0 - b).powi(i as i32) * h3 * (1.0 - c).powi((i + j) as i32)
}

/// Gradient `(d/dr, d/ds, d/dt)` of [`simplex3d_p`].
pub fn grad_simplex3d_p(r: f64, s: f64, t: f64, (id, jd, kd): (usize, usize, usize)) -> [f64; 3] {
    let (a, b, c) = rst_to_abc(r, s, t);
    let (i, j) = (id as i32, jd as i32);
    let fa = jacobi_p(a, 0.0, 0.0, id);
    let dfa = grad_jacobi_p(a, 0.0, 0.0, id);
    let ab = 2.0 * id as f64 + 1.0;
    let gb = jacobi_p(b, ab, 0.0, jd);
    let dgb = grad_jacobi_p(b, ab, 0.0, jd);
    let ac = 2.0 * (id + jd) as f64 + 2.0;
    let hc = jacobi_p(c, ac, 0.0, kd);
    let dhc = grad_jacobi_p(c, ac, 0.0, kd);
    let hb = 0.5 * (1.0 - b);
    let hcm = 0.5 * (1.0 - c);

    let mut dr = dfa * gb * hc;
    if i > 0 {
        dr *= hb.powi(i - 1);
    }
    if i + j > 0 {
        dr *= hcm.powi(i + j - 1);
    }

    let mut ds = 0.5 * (1.0 + a) * dr;
    let mut tmp = dgb * hb.powi(i);
    if i > 0 {
        tmp += -0.5 * i as f64 * gb * hb.powi(i - 1);
    }
    if i + j > 0 {
        tmp *= hcm.powi(i + j - 1);
    }
    tmp = fa * tmp * hc;
    ds += tmp;

    let mut dt = 0.5 * (1.0 + a) * dr + 0.5 * (1.0 + b) * tmp;
    let mut tmp = dhc * hcm.powi(i + j);
    if i + j > 0 {
        tmp -= 0.5 * (i + j) as f64 * hc * hcm.powi(i + j - 1);
    }
    tmp = fa * gb * tmp * hb.powi(i);
    dt += tmp;

    let scale = 2f64.powf(2.0 * id as f64 + jd as f64 + 1.5);
    [dr * scale, ds * scale, dt * scale]
}

/// Orthonormal basis function on the bi-unit triangle (area 2).
pub fn simplex2d_p(r: f64, s: f64, (i, j): (usize, usize)) -> f64 {
    let a = if (s - 1.0).abs() > 1e-14 {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    } else {
        -1.0
    };
    let b = s;
    let h1 = jacobi_p(a, 0.0, 0.0, i);
    let h2 = jacobi_p(b, 2.0 * i as f64 + 1.0, 0.0, j);
    std::f64::consts::SQRT_2 * h1 * h2 * (1.0 - b).powi(i as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::gauss_legendre;

    #[test]
    fn jacobi_is_orthonormal() {
        let (xs, ws) = gauss_legendre(20);
        for (alpha, beta) in [(0.0, 0.0), (1.0, 0.0), (3.0, 0.0), (1.0, 1.0)] {
            for m in 0..5 {
                for n in 0..5 {
                    let ip: f64 = xs
                        .iter()
                        .zip(&ws)
                        .map(|(&x, &w)| {
                            w * (1.0 - x).powf(alpha)
                                * (1.0 + x).powf(beta)
                                * jacobi_p(x, alpha, beta, m)
                                * jacobi_p(x, alpha, beta, n)
                        })
                        .sum();
                    let expect = if m == n { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-12, "({alpha},{beta}) {m},{n}: {ip}");
                }
            }
        }
    }

    #[test]
    fn grad_jacobi_matches_finite_difference() {
        let h = 1e-6;
        for n in 0..6 {
            for &x in &[-0.7, 0.1, 0.55] {
                let fd = (jacobi_p(x + h, 2.0, 0.0, n) - jacobi_p(x - h, 2.0, 0.0, n)) / (2.0 * h);
                assert!((fd - grad_jacobi_p(x, 2.0, 0.0, n)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lobatto_points_are_symmetric_and_include_ends() {
        for n in 1..10 {
            let p = gauss_lobatto_points(n);
            assert_eq!(p.len(), n + 1);
            assert_eq!(p[0], -1.0);
            assert_eq!(p[n], 1.0);
            for i in 0..=n {
                assert!((p[i] + p[n - i]).abs() < 1e-14);
            }
        }
        let p = gauss_lobatto_points(4);
        assert!((p[1] + (3.0f64 / 7.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn simplex_gradient_matches_finite_difference() {
        let h = 1e-6;
        let pt = (-0.6, -0.3, -0.5);
        for m in modes_3d(4) {
            let g = grad_simplex3d_p(pt.0, pt.1, pt.2, m);
            let fd = [
                (simplex3d_p(pt.0 + h, pt.1, pt.2, m) - simplex3d_p(pt.0 - h, pt.1, pt.2, m)) / (2.0 * h),
                (simplex3d_p(pt.0, pt.1 + h, pt.2, m) - simplex3d_p(pt.0, pt.1 - h, pt.2, m)) / (2.0 * h),
                (simplex3d_p(pt.0, pt.1, pt.2 + h, m) - simplex3d_p(pt.0, pt.1, pt.2 - h, m)) / (2.0 * h),
            ];
            for d in 0..3 {
                assert!((g[d] - fd[d]).abs() < 1e-5, "{m:?} dir {d}: {} vs {}", g[d], fd[d]);
            }
        }
    }
}
