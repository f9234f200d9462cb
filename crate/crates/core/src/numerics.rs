//! Small numerical building blocks shared by the solver modules.

use std::f64::consts::PI;

/// Surface area |S^{d-1}| of the unit sphere in R^d.
pub fn sphere_area(d: u32) -> f64 {
    // |S^0| = 2, |S^1| = 2π, |S^{k+1}| = 2π/k · |S^{k-1}|
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

/// Brent's method on a sign-changing bracket.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

/// `n` points log-spaced on (lo, hi], excluding `lo`.
pub fn log_spaced_open(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (1..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
}

/// Cubic Hermite interpolation on one interval.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let val = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let der = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (val, der)
}

/// C² quintic Hermite interpolation on one interval from values, first and second
/// derivatives at both ends. Returns `[f, f', f'']` at `x`.
#[inline]
pub fn quintic_hermite(x0: f64, x1: f64, a: [f64; 3], b: [f64; 3], x: f64) -> [f64; 3] {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let basis = [
        [1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5, -30.0 * t2 + 60.0 * t3 - 30.0 * t4, -60.0 * t + 180.0 * t2 - 120.0 * t3],
        [t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5, 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4, -36.0 * t + 96.0 * t2 - 60.0 * t3],
        [
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
        ],
        [0.5 * (t3 - 2.0 * t4 + t5), 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4), 0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3)],
        [-4.0 * t3 + 7.0 * t4 - 3.0 * t5, -12.0 * t2 + 28.0 * t3 - 15.0 * t4, -24.0 * t + 84.0 * t2 - 60.0 * t3],
        [10.0 * t3 - 15.0 * t4 + 6.0 * t5, 30.0 * t2 - 60.0 * t3 + 30.0 * t4, 60.0 * t - 180.0 * t2 + 120.0 * t3],
    ];
    let coef = [a[0], h * a[1], h * h * a[2], h * h * b[2], h * b[1], b[0]];
    let mut out = [0.0; 3];
    for (c, row) in coef.iter().zip(basis.iter()) {
        for k in 0..3 {
            out[k] += c * row[k];
        }
    }
    out[1] /= h;
    out[2] /= h * h;
    out
}

/// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to a valid interval.
pub fn locate(xs: &[f64], x: f64) -> usize {
    if x <= xs[0] {
        return 0;
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return n - 2;
    }
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        if n == 2 {
            ds[0] = delta[0];
            ds[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    ds[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            ds[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            ds[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { xs, ys, ds }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        hermite(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.ds[i],
            self.ds[i + 1],
            x,
        )
        .0
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let i = locate(&self.xs, x);
        hermite(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.ds[i],
            self.ds[i + 1],
            x,
        )
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Finite-difference weights for the first derivative at `x0` on arbitrary nodes (Fornberg).
pub fn fd_weights_first(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let m = 1usize;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[1]).collect()
}

/// `e^z K_ν(z)` for z > 0 via the integral representation
/// `K_ν(z) = ∫_0^∞ exp(-z cosh t) cosh(νt) dt`, trapezoid rule in t.
pub fn bessel_k_scaled(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0);
    // integrand exp(-z (cosh t - 1)) cosh(νt) has width ~ 1/√z and is analytic in
    // |Im t| < π/2, so the trapezoid error is below e^{-39} for this step
    let h = 0.25_f64.min(0.6 / z.sqrt());
    let mut sum = 0.5; // t = 0
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let expo = -z * (t.cosh() - 1.0) + nu.abs() * t;
        let term = expo.exp() * 0.5 * (1.0 + (-2.0 * nu.abs() * t).exp());
        sum += term;
        if expo < -40.0 && t > 1.0 {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI);
        assert_relative_eq!(sphere_area(3), 4.0 * PI);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn bessel_half_integer_closed_form() {
        // K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}
        for &z in &[0.01, 0.3, 1.0, 5.0, 40.0, 900.0] {
            let exact = (PI / (2.0 * z)).sqrt();
            assert_relative_eq!(bessel_k_scaled(0.5, z), exact, max_relative = 1e-12);
            // K_{3/2}(z) = sqrt(pi/(2z)) e^{-z} (1 + 1/z)
            assert_relative_eq!(
                bessel_k_scaled(1.5, z),
                exact * (1.0 + 1.0 / z),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                bessel_k_scaled(2.5, z),
                exact * (1.0 + 3.0 / z + 3.0 / (z * z)),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn bessel_k0_reference() {
        // K_0(1) e^1 = 0.4210244382407083 * e
        assert_relative_eq!(
            bessel_k_scaled(0.0, 1.0),
            0.421_024_438_240_708_3 * 1f64.exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn quintic_hermite_exact_on_quintics() {
        let f = |x: f64| [x.powi(5) - x * x, 5.0 * x.powi(4) - 2.0 * x, 20.0 * x.powi(3) - 2.0];
        let (x0, x1) = (0.3, 1.1);
        for &x in &[0.3, 0.5, 0.77, 1.1] {
            let v = quintic_hermite(x0, x1, f(x0), f(x1), x);
            let e = f(x);
            for k in 0..3 {
                assert_relative_eq!(v[k], e[k], epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn fornberg_weights_exact_on_quadratics() {
        let nodes = [0.0, 0.3, 0.7, 1.5, 2.0];
        let w = fd_weights_first(0.7, &nodes);
        let f = |x: f64| x.powi(4) - 2.0 * x;
        let approx: f64 = nodes.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        assert_relative_eq!(approx, 4.0 * 0.343 - 2.0, max_relative = 1e-12);
    }

    #[test]
    fn pchip_preserves_monotonicity() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 0.2, 5.0, 5.1];
        let p = Pchip::new(xs, ys);
        let mut prev = -1.0;
        for i in 0..=400 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev);
            prev = v;
        }
    }
}
