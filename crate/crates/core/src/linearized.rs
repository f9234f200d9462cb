//! Radial sectors of the linearized operators
//! `𝓛_μ = -Δ - g'(u)` and `𝓛' = -Δ - g(u)/u` around a ground state.
//!
//! The sector-ℓ operator `-v'' - (d-1)/r v' + ℓ(ℓ+d-2)/r² v + V v` is discretized in
//! finite-volume form on a uniform grid against the measure `r^{d-1} dr`, then
//! symmetrized by the cell weights. Spectra come from Sturm counts on the symmetric
//! tridiagonal matrix and inverse iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branch::BranchPoint;
use crate::error::{Error, Result};
use crate::nonlinearity::ProblemParams;
use crate::profile::{fmt17, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    /// `-Δ - g'(u)`: `p u^{p-1} - q u^{q-1} + μ` for the double power
    LMu,
    /// `-Δ - g(u)/u`: `u^{p-1} - u^{q-1} + μ`, which annihilates u
    LPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Grid step in units of the shortest local length `1/√max|g'|`.
    pub h0: f64,
    /// Wall distance past the tail match radius, in decay lengths `1/√μ`.
    pub wall_decay_lengths: f64,
    pub max_nodes: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { h0: 1e-3, wall_decay_lengths: 30.0, max_nodes: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedOperator {
    pub sector_l: u32,
    pub which: Which,
    pub params: ProblemParams,
    /// Radii of the unknowns (the wall node, and r = 0 for ℓ ≥ 1, are excluded).
    pub grid: Vec<f64>,
    pub h: f64,
    pub r_wall: f64,
    /// Cell volumes `∫ r^{d-1} dr` over each control cell.
    pub weights: Vec<f64>,
    /// Potential V at each node (without the centrifugal term).
    pub potential: Vec<f64>,
    /// Symmetrized tridiagonal matrix `W^{-1/2} K W^{-1/2}`.
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// Profile sampled at the nodes.
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Grid functions on `op.grid` with `Σ w v² = 1`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GssReport {
    pub matrix: [[f64; 3]; 3],
    pub det: f64,
    pub sub_det: f64,
    /// Closed form of the 2×2 sub-determinant, for cross-checking.
    pub sub_det_closed: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub inequality_holds: bool,
    /// `(p-q)/((p+1)(q+1)) β` minus its Pohozaev prediction.
    pub beta_identity_residual: f64,
}

impl LinearizedOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `W^{-1} K f`: the operator acting on a grid function.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let s: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        (0..n)
            .map(|i| {
                let x = |j: usize| s[j] * f[j];
                let mut v = self.diag[i] * x(i);
                if i > 0 {
                    v += self.offdiag[i - 1] * x(i - 1);
                }
                if i + 1 < n {
                    v += self.offdiag[i] * x(i + 1);
                }
                v / s[i]
            })
            .collect()
    }

    /// `Σ w_i f_i g_i`, the radial inner product without the sphere factor.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        sturm_count(&self.diag, &self.offdiag, x)
    }

    /// Solve `W^{-1} K f = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let s: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let b: Vec<f64> = rhs.iter().zip(&s).map(|(r, s)| r * s).collect();
        let x = tridiag_solve(&self.diag, &self.offdiag, 0.0, &b)?;
        Ok(x.iter().zip(&s).map(|(x, s)| x / s).collect())
    }

    /// Write `index,eigenvalue,residual` rows.
    pub fn write_spectrum_csv<W: Write>(res: &SpectralResult, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,eigenvalue,residual")?;
        for (i, (e, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
            writeln!(w, "{},{},{}", i + 1, fmt17(*e), fmt17(*r))?;
        }
        Ok(())
    }
}

/// Length scale `1/√max|g'|` over `[0, y0]`, floored by the decay rate.
fn local_length(profile: &RadialProfile) -> f64 {
    let prm = profile.params;
    let mut m = prm.decay_rate().powi(2);
    for i in 0..=400 {
        let u = profile.y0 * i as f64 / 400.0;
        m = m.max(prm.dg(u).abs());
    }
    1.0 / m.sqrt()
}

pub fn assemble(profile: &RadialProfile, sector_l: u32, which: Which) -> Result<LinearizedOperator> {
    assemble_with(profile, sector_l, which, &GridOptions::default())
}

pub fn assemble_with(
    profile: &RadialProfile,
    sector_l: u32,
    which: Which,
    opts: &GridOptions,
) -> Result<LinearizedOperator> {
    let prm = profile.params;
    let d = prm.dim();
    let r_wall = profile.tail.r_match + opts.wall_decay_lengths / prm.decay_rate();
    let mut h = opts.h0 * local_length(profile);
    if (r_wall / h).ceil() as usize > opts.max_nodes {
        h = r_wall / opts.max_nodes as f64;
    }
    let n_wall = (r_wall / h).ceil() as usize;
    let h = r_wall / n_wall as f64;
    let first = if sector_l == 0 { 0 } else { 1 };
    let count = n_wall - first;
    if count < 200 {
        return Err(Error::Assembly(format!("only {count} grid nodes; at least 200 needed")));
    }
    let ell = sector_l as f64;
    let centrifugal = ell * (ell + d - 2.0);
    let dn = prm.d as i32;
    let face = |i: usize| ((i as f64 + 0.5) * h).powi(dn - 1);
    let cell = |i: usize| {
        let r = i as f64 * h;
        let hi = r + 0.5 * h;
        let lo = (r - 0.5 * h).max(0.0);
        (hi.powi(dn) - lo.powi(dn)) / d
    };

    let mut grid = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut potential = Vec::with_capacity(count);
    let mut u = Vec::with_capacity(count);
    let mut du = Vec::with_capacity(count);
    let mut kdiag = Vec::with_capacity(count);
    let radii: Vec<f64> = (first..n_wall).map(|i| i as f64 * h).collect();
    let samples = profile.sample_smooth(&radii);
    for i in first..n_wall {
        let r = i as f64 * h;
        let [ui, dui, _] = samples[i - first];
        let v = match which {
            Which::LMu => -prm.dg(ui),
            Which::LPrime => {
                if ui == 0.0 {
                    prm.decay_rate().powi(2)
                } else {
                    -prm.g(ui) / ui
                }
            }
        };
        let w = cell(i);
        let left = if i == 0 { 0.0 } else { face(i - 1) };
        let cent = if i == 0 { 0.0 } else { centrifugal / (r * r) };
        kdiag.push((face(i) + left) / h + w * (cent + v));
        grid.push(r);
        weights.push(w);
        potential.push(v);
        u.push(ui);
        du.push(dui);
    }
    let diag: Vec<f64> = kdiag.iter().zip(&weights).map(|(k, w)| k / w).collect();
    let offdiag: Vec<f64> = (0..count - 1)
        .map(|j| {
            let i = j + first;
            -face(i) / h / (weights[j] * weights[j + 1]).sqrt()
        })
        .collect();
    Ok(LinearizedOperator {
        sector_l,
        which,
        params: prm,
        grid,
        h,
        r_wall,
        weights,
        potential,
        diag,
        offdiag,
        u,
        du,
    })
}

fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    let tiny = f64::MIN_POSITIVE.sqrt();
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let qq = if q.abs() < tiny { tiny.copysign(q) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / qq;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T - σ I) x = b` for symmetric tridiagonal T, with partial pivoting.
fn tridiag_solve(diag: &[f64], off: &[f64], sigma: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    // rows hold (sub, main, super, super2) after elimination
    let mut a: Vec<f64> = diag.iter().map(|d| d - sigma).collect();
    let mut c: Vec<f64> = off.to_vec();
    c.push(0.0);
    let mut e = vec![0.0; n];
    let mut sub: Vec<f64> = off.to_vec();
    let mut x = b.to_vec();
    for i in 0..n - 1 {
        if sub[i].abs() > a[i].abs() {
            // swap rows i and i+1
            let (ai, ci, ei) = (a[i], c[i], e[i]);
            a[i] = sub[i];
            c[i] = a[i + 1];
            e[i] = c[i + 1];
            let bi = x[i];
            x[i] = x[i + 1];
            x[i + 1] = bi;
            let f = ai / a[i];
            a[i + 1] = ci - f * c[i];
            c[i + 1] = ei - f * e[i];
            x[i + 1] -= f * x[i];
            sub[i] = f;
        } else {
            if a[i] == 0.0 {
                a[i] = f64::EPSILON * (diag[i].abs() + 1.0);
            }
            let f = sub[i] / a[i];
            a[i + 1] -= f * c[i];
            x[i + 1] -= f * x[i];
            sub[i] = f;
        }
    }
    if a[n - 1] == 0.0 {
        a[n - 1] = f64::EPSILON * (diag[n - 1].abs() + 1.0);
    }
    x[n - 1] /= a[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - c[n - 2] * x[n - 1]) / a[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - c[i] * x[i + 1] - e[i] * x[i + 2]) / a[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NearSingular(sigma));
    }
    Ok(x)
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `j`-th smallest eigenvalue (1-based): Sturm bisection down to a narrow
/// isolating bracket, then a Rayleigh quotient after two shifted inverse iterations.
fn bisect_eigenvalue(op: &LinearizedOperator, j: usize) -> f64 {
    let (mut lo, gmax) = gershgorin(&op.diag, &op.offdiag);
    // the low spectrum is O(1); avoid bisecting the whole Gershgorin range
    let mut hi = 1.0f64.max(lo + 1.0);
    while op.count_below(hi) < j && hi < gmax {
        hi = (2.0 * hi.abs()).min(gmax);
    }
    let bisect = |lo: &mut f64, hi: &mut f64, rel: f64| {
        for _ in 0..300 {
            let mid = 0.5 * (*lo + *hi);
            let scale = lo.abs().max(hi.abs()).max(1e-300);
            if mid <= *lo || mid >= *hi || *hi - *lo <= rel * scale {
                break;
            }
            if op.count_below(mid) >= j {
                *hi = mid;
            } else {
                *lo = mid;
            }
        }
    };
    bisect(&mut lo, &mut hi, 1e-4);
    let mid = 0.5 * (lo + hi);
    // the quotient carries rounding of order ε‖A‖, which can exceed a narrow bracket
    let slack = (hi - lo).max(64.0 * f64::EPSILON * gmax.abs());
    if let Some(rq) = rayleigh_polish(op, mid) {
        if (rq - mid).abs() <= slack {
            return rq;
        }
    }
    bisect(&mut lo, &mut hi, 4.0 * f64::EPSILON);
    0.5 * (lo + hi)
}

fn rayleigh_polish(op: &LinearizedOperator, sigma: f64) -> Option<f64> {
    let n = op.len();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_7).fract()).collect();
    for _ in 0..2 {
        x = tridiag_solve(&op.diag, &op.offdiag, sigma, &x).ok()?;
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    let ax = tridiag_mul(&op.diag, &op.offdiag, &x);
    Some(ax.iter().zip(&x).map(|(a, b)| a * b).sum())
}

/// Lowest `k` eigenvalues without eigenvectors.
pub fn eigenvalues(op: &LinearizedOperator, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > op.len() {
        return Err(Error::Parameter(format!("requested {k} eigenvalues of a {}-node operator", op.len())));
    }
    Ok((1..=k).map(|j| bisect_eigenvalue(op, j)).collect())
}

pub fn eigenpairs(op: &LinearizedOperator, k: usize) -> Result<SpectralResult> {
    if !(1..=6).contains(&k) {
        return Err(Error::Parameter(format!("k = {k} outside 1..=6")));
    }
    let n = op.len();
    let vals = eigenvalues(op, k)?;
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    let mut lambdas = Vec::new();
    let mut residuals = Vec::new();
    let s: Vec<f64> = op.weights.iter().map(|w| w.sqrt()).collect();
    // rounding floor of the residual for a matrix of this size and norm
    let anorm = op.diag.iter().zip(op.offdiag.iter().chain([&0.0])).map(|(d, e)| d.abs() + 2.0 * e.abs()).fold(0.0, f64::max);
    let floor = (n as f64).sqrt() * f64::EPSILON * anorm;
    for &lam in &vals {
        let shift = lam + 1e-10 * lam.abs().max(1e-6);
        // deterministic start vector with no special symmetry
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_7).fract()).collect();
        let mut rq = lam;
        let mut res = f64::INFINITY;
        for _ in 0..8 {
            for prev in &vecs {
                let dot: f64 = x.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(prev) {
                    *xi -= dot * pi;
                }
            }
            x = tridiag_solve(&op.diag, &op.offdiag, shift, &x)?;
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
            let ax = tridiag_mul(&op.diag, &op.offdiag, &x);
            rq = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
            res = ax.iter().zip(&x).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
            if res < 1e-10 * (rq.abs() + 1.0) + floor {
                break;
            }
        }
        if !(res < 1e-8 * (rq.abs() + 1.0) + floor) {
            return Err(Error::Spectral {
                message: format!("inverse iteration did not converge near {lam}"),
                residual: res,
            });
        }
        // sign convention: positive weighted sum
        let sum: f64 = x.iter().sum();
        if sum < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        vecs.push(x);
        lambdas.push(rq);
        residuals.push(res / (rq.abs() + 1.0));
    }
    let eigenvectors = vecs.iter().map(|x| x.iter().zip(&s).map(|(x, s)| x / s).collect()).collect();
    Ok(SpectralResult { eigenvalues: lambdas, eigenvectors, residuals })
}

fn tridiag_mul(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += off[i] * x[i + 1];
            }
            v
        })
        .collect()
}

/// Radial solve products `δ = 𝓛_μ^{-1} u` and the lowest eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDerivative {
    /// `M' = -2 ⟨u, δ⟩`
    pub m1: f64,
    /// `M'' = 6∫δ² + 2∫g''(u) δ³`
    pub m2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn mass_derivative(profile: &RadialProfile) -> Result<(f64, f64)> {
    let md = mass_derivative_with(profile, &GridOptions::default())?;
    Ok((md.m1, md.m2))
}

pub fn mass_derivative_with(profile: &RadialProfile, opts: &GridOptions) -> Result<MassDerivative> {
    let op = assemble_with(profile, 0, Which::LMu, opts)?;
    let ev = eigenvalues(&op, 2)?;
    if ev[0].abs() < 1e-10 {
        return Err(Error::NearSingular(ev[0]));
    }
    let delta = op.solve(&op.u)?;
    let prm = profile.params;
    let sphere = prm.sphere_area();
    let m1 = -2.0 * sphere * op.inner(&op.u, &delta);
    let mut m2 = 0.0;
    for i in 0..op.len() {
        let u = op.u[i];
        let dl = delta[i];
        let g2 = if u > 0.0 { prm.d2g(u).unwrap_or(0.0) } else { 0.0 };
        m2 += op.weights[i] * (6.0 * dl * dl + 2.0 * g2 * dl * dl * dl);
    }
    Ok(MassDerivative { m1, m2: sphere * m2, lambda1: ev[0], lambda2: ev[1] })
}

/// The 3×3 restriction of `𝓛_μ` to span{∂_μ u, u, r u' + (d/2) u} in closed form.
pub fn gss_determinant_test(point: &BranchPoint, params: &ProblemParams) -> GssReport {
    let (p, q, d) = (params.p, params.q, params.dim());
    let (m, mp, t, beta) = (point.mass, point.mp_lin, point.kinetic, point.beta_ratio);
    let c = (p - 1.0) * (p - q) / (p + 1.0);
    let l11 = -mp / 2.0;
    let l12 = -m;
    let l22 = (c * beta - 2.0 * (q + 1.0) / d) * t;
    let l23 = (d * c / 2.0 * beta - (q - 1.0)) * t;
    let l33 = d / 2.0 * (d * c / 2.0 * beta + 1.0 + 4.0 / d - q) * t;
    let matrix = [[l11, l12, 0.0], [l12, l22, l23], [0.0, l23, l33]];
    let sub_det = l22 * l33 - l23 * l23;
    let det = l11 * sub_det - l12 * (l12 * l33);
    let sub_det_closed = t * t * (-c * (d - 2.0) * beta + 2.0 / d * (q * (d - 2.0) - d - 2.0));
    let lhs = mp / 2.0 * (c * (d - 2.0) * beta + 2.0 / d * (d + 2.0 - (d - 2.0) * q));
    let rhs = d * m * m / (2.0 * t) * (d * c / 2.0 * beta + 1.0 + 4.0 / d - q);
    let predicted = (d - 2.0) / (2.0 * d) - 1.0 / (q + 1.0) + (q - 1.0) / (2.0 * (q + 1.0)) * point.mu * m / t;
    GssReport {
        matrix,
        det,
        sub_det,
        sub_det_closed,
        lhs,
        rhs,
        inequality_holds: lhs < rhs,
        beta_identity_residual: (p - q) / ((p + 1.0) * (q + 1.0)) * beta - predicted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::mu_star;
    use crate::shooting::{solve_ground_state, ShootControls};
    use approx::assert_relative_eq;

    fn profile(mu: f64) -> RadialProfile {
        let prm = ProblemParams::double_power(5.0, 3.0, 3, mu).unwrap();
        solve_ground_state(&prm, &ShootControls::default()).unwrap()
    }

    #[test]
    fn tridiagonal_solver_with_pivoting() {
        let diag = [0.0, 2.0, -1.0, 3.0];
        let off = [1.0, 0.5, 2.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b = tridiag_mul(&diag, &off, &x_true);
        let x = tridiag_solve(&diag, &off, 0.0, &b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn sturm_count_matches_known_spectrum() {
        // second-difference matrix: eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        for k in 1..=5 {
            let lam = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_eq!(sturm_count(&diag, &off, lam - 1e-9), k - 1);
            assert_eq!(sturm_count(&diag, &off, lam + 1e-9), k);
        }
    }

    #[test]
    fn radial_spectrum_one_negative_direction() {
        let prof = profile(0.1);
        let op = assemble(&prof, 0, Which::LMu).unwrap();
        let sp = eigenpairs(&op, 2).unwrap();
        assert!(sp.eigenvalues[0] < 0.0 && sp.eigenvalues[1] > 0.0, "{:?}", sp.eigenvalues);
        assert!(sp.residuals.iter().all(|r| *r < 1e-8));
    }

    #[test]
    fn ground_state_spans_kernel_of_lprime() {
        let prof = profile(0.1);
        let op = assemble(&prof, 0, Which::LPrime).unwrap();
        let res = op.apply(&op.u);
        assert!(op.norm(&res) / op.norm(&op.u) < 1e-7, "{}", op.norm(&res) / op.norm(&op.u));
        let sp = eigenpairs(&op, 2).unwrap();
        assert!(sp.eigenvalues[0].abs() < 1e-6, "{:?}", sp.eigenvalues);
        assert!(sp.eigenvalues[1] > 0.0);
    }

    #[test]
    fn derivative_is_the_l1_kernel() {
        let prof = profile(0.1);
        let op = assemble(&prof, 1, Which::LMu).unwrap();
        let d = 3.0;
        // 𝓛_μ u' = -(d-1)/r² u', so u' is annihilated by the ℓ = 1 operator; the
        // cell-averaged centrifugal term is only first order next to the origin
        let res = op.apply(&op.du);
        let away = |f: &[f64]| -> f64 {
            op.grid.iter().zip(op.weights.iter()).zip(f).filter(|((r, _), _)| **r > 1.0).map(|((_, w), v)| w * v * v).sum::<f64>().sqrt()
        };
        let scale: Vec<f64> = op.grid.iter().zip(&op.du).map(|(r, v)| (d - 1.0) / (r * r) * v).collect();
        assert!(away(&res) / away(&scale) < 2e-4, "{}", away(&res) / away(&scale));

        let sp = eigenpairs(&op, 2).unwrap();
        let (idx, lam) = sp.eigenvalues.iter().enumerate().min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap()).unwrap();
        assert!(lam.abs() < 1e-6, "{lam}");
        let nrm = op.norm(&op.du);
        let phi = &sp.eigenvectors[idx];
        let e1: Vec<f64> = phi.iter().zip(&op.du).map(|(a, b)| a - b / nrm).collect();
        let e2: Vec<f64> = phi.iter().zip(&op.du).map(|(a, b)| a + b / nrm).collect();
        assert!(op.norm(&e1).min(op.norm(&e2)) < 1e-4);
    }

    #[test]
    fn potential_tends_to_mu_at_wall() {
        let prof = profile(0.1);
        let op = assemble(&prof, 0, Which::LMu).unwrap();
        assert!((op.potential.last().unwrap() - 0.1).abs() < 1e-9);
        for (i, v) in op.potential.iter().enumerate().step_by(997) {
            let u = op.u[i];
            assert_relative_eq!(*v, 5.0 * u.powi(4) - 3.0 * u * u + 0.1, epsilon = 1e-14);
        }
    }

    #[test]
    fn lowest_eigenvalue_increases_with_l() {
        let prof = profile(0.1);
        let mut prev = f64::NEG_INFINITY;
        for l in 0..4 {
            let op = assemble(&prof, l, Which::LMu).unwrap();
            let e = eigenvalues(&op, 1).unwrap()[0];
            assert!(e > prev, "l = {l}: {e} <= {prev}");
            prev = e;
        }
    }

    #[test]
    fn mass_derivative_matches_finite_difference() {
        let mu = 0.1;
        let h = 1e-4 * mu;
        let m = |mu: f64| profile(mu).integrals().mass;
        let fd = (m(mu + h) - m(mu - h)) / (2.0 * h);
        let (m1, _) = mass_derivative(&profile(mu)).unwrap();
        assert_relative_eq!(m1, fd, max_relative = 1e-3);
    }

    #[test]
    fn second_mass_derivative_matches_finite_difference() {
        let mu = 0.1;
        let h = 1e-3 * mu;
        let m1 = |mu: f64| mass_derivative(&profile(mu)).unwrap().0;
        let fd = (m1(mu + h) - m1(mu - h)) / (2.0 * h);
        let (_, m2) = mass_derivative(&profile(mu)).unwrap();
        assert_relative_eq!(m2, fd, max_relative = 1e-3);
    }

    #[test]
    fn wall_position_does_not_move_lambda1() {
        let prof = profile(0.1);
        let a = assemble(&prof, 0, Which::LMu).unwrap();
        let b = assemble_with(&prof, 0, Which::LMu, &GridOptions { wall_decay_lengths: (1.2 * a.r_wall - prof.tail.r_match) * 0.1f64.sqrt(), ..Default::default() }).unwrap();
        let la = eigenvalues(&a, 1).unwrap()[0];
        let lb = eigenvalues(&b, 1).unwrap()[0];
        assert_relative_eq!(la, lb, max_relative = 1e-6);
    }

    #[test]
    fn too_few_nodes_rejected() {
        let prof = profile(0.1);
        let e = assemble_with(&prof, 0, Which::LMu, &GridOptions { h0: 20.0, ..Default::default() });
        assert!(matches!(e, Err(Error::Assembly(_))), "{e:?}");
    }

    #[test]
    fn lambda1_radius_law_near_mu_star() {
        let ms = mu_star(5.0, 3.0);
        let prof = profile(0.995 * ms);
        let op = assemble(&prof, 0, Which::LMu).unwrap();
        let l1 = eigenvalues(&op, 1).unwrap()[0];
        let r = prof.radius_at_level(0.5 * 0.75f64.sqrt()).unwrap();
        let ratio = l1 * r * r / -2.0;
        assert!((ratio - 1.0).abs() < 0.1, "λ1 R² / -(d-1) = {ratio}");
    }
}
