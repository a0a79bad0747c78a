//! Quadrature rules: Gauss-Legendre panels and composite Simpson sums.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule with `panels` equal panels of `order` points.
pub fn composite_gl(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Weights of composite Simpson on `m` intervals of width `dt`. Odd `m`
/// closes with the 3/8 rule on the last three intervals; `m = 1` is a trapezoid.
pub fn simpson_weights(m: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5 * dt;
            w[1] = 0.5 * dt;
        }
        _ => {
            let even = if m % 2 == 0 { m } else { m - 3 };
            for k in (0..even).step_by(2) {
                w[k] += dt / 3.0;
                w[k + 1] += 4.0 * dt / 3.0;
                w[k + 2] += dt / 3.0;
            }
            if m % 2 == 1 {
                let s = even;
                w[s] += 3.0 * dt / 8.0;
                w[s + 1] += 9.0 * dt / 8.0;
                w[s + 2] += 9.0 * dt / 8.0;
                w[s + 3] += 3.0 * dt / 8.0;
            }
        }
    }
    w
}

/// Running integrals `int_0^{t_n} f` at every node, fourth order.
pub fn cumulative_simpson(f: &[f64], dt: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[1] = if n >= 3 {
        dt / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
    } else {
        0.5 * dt * (f[0] + f[1])
    };
    for k in 2..n {
        out[k] = out[k - 2] + dt / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
    }
    out
}

/// Trapezoid weights on `m` intervals.
pub fn trapezoid_weights(m: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; m + 1];
    if m == 0 {
        return vec![0.0];
    }
    w[0] = 0.5 * dt;
    w[m] = 0.5 * dt;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_odd_and_even() {
        for m in [2usize, 3, 7, 10] {
            let dt = 1.0 / m as f64;
            let w = simpson_weights(m, dt);
            let s: f64 = (0..=m).map(|k| w[k] * (k as f64 * dt).powi(3)).sum();
            assert!((s - 0.25).abs() < 1e-14, "m = {m}");
        }
    }

    #[test]
    fn cumulative_matches_exact() {
        let dt = 0.01;
        let f: Vec<f64> = (0..101).map(|k| (k as f64 * dt).cos()).collect();
        let c = cumulative_simpson(&f, dt);
        for k in 0..101 {
            assert!((c[k] - (k as f64 * dt).sin()).abs() < 1e-9);
        }
    }
}
