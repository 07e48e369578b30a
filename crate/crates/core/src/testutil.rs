//! Quadrature helpers shared by unit tests.

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub–Welsch-free construction: Newton on P_n.
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs.push(x);
        ws.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}


/// Collapsed Gauss rule on the triangle `{a, b >= 0, a + b <= 1}`:
/// points `(a, b)` and weights summing to 1/2.
pub fn triangle_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let (xs, ws) = gauss_legendre(n);
    let mut out = Vec::new();
    for (i, &xi) in xs.iter().enumerate() {
        for (j, &eta) in xs.iter().enumerate() {
            let a = 0.5 * (1.0 + xi);
            let b = (1.0 - a) * 0.5 * (1.0 + eta);
            out.push((a, b, ws[i] * ws[j] * 0.25 * (1.0 - a)));
        }
    }
    out
}
