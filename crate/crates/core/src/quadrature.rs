//! Adaptive Gauss–Kronrod quadrature and composite Simpson rules.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive G7K15 quadrature with a global absolute/relative error target.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    intervals.push((a, b, v, e));
    for _ in 0..20_000 {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    let total: f64 = intervals.iter().map(|iv| iv.2).sum();
    let err: f64 = intervals.iter().map(|iv| iv.3).sum();
    if err <= abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Quadrature(format!("estimated error {err:e} above target on [{a}, {b}]")))
    }
}

/// Composite Simpson over panels `[x_{2k}, x_{2k+1}, x_{2k+2}]` where each
/// `x_{2k+1}` is the midpoint of its panel. `xs.len()` must be odd.
pub fn simpson_midpoint_panels(xs: &[f64], fs: &[f64]) -> f64 {
    assert!(xs.len() % 2 == 1 && xs.len() == fs.len());
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < xs.len() {
        let h = xs[i + 2] - xs[i];
        s += h / 6.0 * (fs[i] + 4.0 * fs[i + 1] + fs[i + 2]);
        i += 2;
    }
    s
}

/// Composite Simpson on a uniform grid with an even number of intervals; falls back to
/// adding a trapezoid on the last interval when the count is odd.
pub fn simpson_uniform(h: f64, fs: &[f64]) -> f64 {
    let n = fs.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 <= even {
        s += h / 3.0 * (fs[i] + 4.0 * fs[i + 1] + fs[i + 2]);
        i += 2;
    }
    if even < intervals {
        s += 0.5 * h * (fs[n - 2] + fs[n - 1]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_kronrod_smooth() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, 1f64.exp() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_kronrod_sqrt_endpoint() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let xs = [0.0, 0.25, 0.5, 1.0, 1.5];
        let fs: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        assert_relative_eq!(simpson_midpoint_panels(&xs, &fs), 1.5f64.powi(4) / 4.0, max_relative = 1e-14);
    }
}
