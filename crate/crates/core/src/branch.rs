//! The ground-state branch μ ↦ u_μ over (0, μ*): observables per μ, sign changes
//! of M', the energy identity E' = -μM'/2, and inversion of M(μ) = λ.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::{mass_derivative_with, GridOptions};
use crate::nonlinearity::{beta_star, mu_star, ProblemParams};
use crate::numerics::{brent, fd_weights_first, hermite};
use crate::profile::{fmt17, RadialProfile, ShootParam};
use crate::shooting::{diagnostics, solve_ground_state_with_hint, ShootControls};

/// `(p, q, d)` of the nine published mass-curve panels.
pub const FIGURE_PANELS: [(f64, f64, u32); 9] = [
    (5.0, 2.0, 2),
    (5.0, 3.0, 2),
    (5.0, 4.0, 2),
    (7.0 / 3.0, 5.0 / 3.0, 3),
    (3.0, 7.0 / 3.0, 3),
    (5.0, 3.0, 3),
    (5.0, 3.0, 5),
    (2.5, 2.0, 7),
    (5.0, 3.0, 7),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub mu: f64,
    pub y0: f64,
    /// Full d-dimensional mass ∫u².
    pub mass: f64,
    pub mp_lin: f64,
    pub mp_fd: f64,
    /// M'' from the linear solve.
    pub mpp_lin: f64,
    pub energy: f64,
    /// E' by finite differences over the extra solves.
    pub ep_fd: f64,
    pub kinetic: f64,
    pub int_p1: f64,
    pub int_q1: f64,
    pub beta_ratio: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r_gamma: f64,
    pub pohozaev_res: f64,
    pub status: PointStatus,
    pub message: Option<String>,
    /// Shooting parameter of the converged solve (seed for nearby solves).
    pub param: Option<ShootParam>,
}

impl BranchPoint {
    fn failed(mu: f64, message: String) -> Self {
        let nan = f64::NAN;
        BranchPoint {
            mu,
            y0: nan,
            mass: nan,
            mp_lin: nan,
            mp_fd: nan,
            mpp_lin: nan,
            energy: nan,
            ep_fd: nan,
            kinetic: nan,
            int_p1: nan,
            int_q1: nan,
            beta_ratio: nan,
            lambda1: nan,
            lambda2: nan,
            r_gamma: nan,
            pohozaev_res: nan,
            status: PointStatus::Failed,
            message: Some(message),
            param: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == PointStatus::Ok
    }
}

/// Samples uniform in `logit(μ/μ*)` on `[x_lo, x_hi]`, which clusters geometrically
/// toward both ends of the branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_points: 120, x_lo: 1e-3, x_hi: 0.995 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 || !(0.0 < self.x_lo && self.x_lo < self.x_hi && self.x_hi < 1.0) {
            return Err(Error::Parameter(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    /// Ratios μ/μ*.
    pub fn ratios(&self) -> Vec<f64> {
        let logit = |x: f64| (x / (1.0 - x)).ln();
        let (a, b) = (logit(self.x_lo), logit(self.x_hi));
        (0..self.n_points)
            .map(|i| {
                let z = a + (b - a) * i as f64 / (self.n_points - 1) as f64;
                1.0 / (1.0 + (-z).exp())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub controls: ShootControls,
    pub grid: GridOptions,
    /// Relative μ step of the finite-difference cross-check.
    pub fd_step: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { controls: ShootControls::default(), grid: GridOptions::default(), fd_step: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCurve {
    pub p: f64,
    pub q: f64,
    pub d: u32,
    pub grid_spec: GridSpec,
    pub points: Vec<BranchPoint>,
}

impl BranchCurve {
    pub fn mu_star(&self) -> f64 {
        mu_star(self.p, self.q)
    }

    pub fn params(&self, mu: f64) -> Result<ProblemParams> {
        ProblemParams::double_power(self.p, self.q, self.d, mu)
    }

    pub fn valid_points(&self) -> Vec<&BranchPoint> {
        self.points.iter().filter(|p| p.is_ok()).collect()
    }

    pub const CSV_HEADER: &'static str =
        "mu,mu_over_mustar,y0,M,M_over_sphere,Mp_lin,Mp_fd,E,T,beta_ratio,lambda1,R_gamma,pohozaev_res,status";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let ms = self.mu_star();
        let sphere = crate::numerics::sphere_area(self.d);
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for pt in &self.points {
            let status = match pt.status {
                PointStatus::Ok => "ok",
                PointStatus::Failed => "failed",
            };
            let cols = [
                pt.mu,
                pt.mu / ms,
                pt.y0,
                pt.mass,
                pt.mass / sphere,
                pt.mp_lin,
                pt.mp_fd,
                pt.energy,
                pt.kinetic,
                pt.beta_ratio,
                pt.lambda1,
                pt.r_gamma,
                pt.pohozaev_res,
            ];
            let row: Vec<String> = cols.iter().map(|v| fmt17(*v)).collect();
            writeln!(w, "{},{}", row.join(","), status)?;
        }
        Ok(())
    }
}

struct Observables {
    profile: RadialProfile,
    mass: f64,
    energy: f64,
}

fn solve_observables(prm: &ProblemParams, opts: &SweepOptions, hint: Option<ShootParam>) -> Result<Observables> {
    let profile = solve_ground_state_with_hint(prm, &opts.controls, hint)?;
    let ints = profile.integrals();
    let energy = 0.5 * ints.kinetic + ints.int_p1 / (prm.p + 1.0) - ints.int_q1 / (prm.q + 1.0);
    Ok(Observables { mass: ints.mass, energy, profile })
}

/// All observables at one μ: a central solve, four finite-difference solves and the
/// radial linear solve.
pub fn solve_point(p: f64, q: f64, d: u32, mu: f64, opts: &SweepOptions) -> Result<BranchPoint> {
    let prm = ProblemParams::double_power(p, q, d, mu)?;
    let center = solve_observables(&prm, opts, None)?;
    let prof = &center.profile;
    let ints = prof.integrals();
    let diag = diagnostics(prof);
    let md = mass_derivative_with(prof, &opts.grid)?;
    let h = opts.fd_step * mu;
    let hint = Some(prof.info.param);
    // fourth-order stencil on ±h, ±2h: near μ* the O(h²) term of the centered
    // difference alone exceeds the agreement tolerance
    let mut side = Vec::with_capacity(4);
    for k in [-2.0, -1.0, 1.0, 2.0] {
        side.push(solve_observables(&prm.with_mu(mu + k * h)?, opts, hint)?);
    }
    let stencil = |f: &dyn Fn(&Observables) -> f64| {
        (8.0 * (f(&side[2]) - f(&side[1])) - (f(&side[3]) - f(&side[0]))) / (12.0 * h)
    };
    let gamma = 0.5 * beta_star(p, q);
    Ok(BranchPoint {
        mu,
        y0: prof.y0,
        mass: center.mass,
        mp_lin: md.m1,
        mp_fd: stencil(&|o| o.mass),
        mpp_lin: md.m2,
        energy: center.energy,
        ep_fd: stencil(&|o| o.energy),
        kinetic: ints.kinetic,
        int_p1: ints.int_p1,
        int_q1: ints.int_q1,
        beta_ratio: ints.int_p1 / ints.kinetic,
        lambda1: md.lambda1,
        lambda2: md.lambda2,
        r_gamma: prof.radius_at_level(gamma).unwrap_or(f64::NAN),
        pohozaev_res: diag.pohozaev_residual,
        status: PointStatus::Ok,
        message: None,
        param: Some(prof.info.param),
    })
}

pub fn sweep(p: f64, q: f64, d: u32, grid_spec: &GridSpec) -> Result<BranchCurve> {
    sweep_with(p, q, d, grid_spec, &SweepOptions::default())
}

/// Points are solved concurrently and merged in μ order, so the result does not
/// depend on scheduling.
pub fn sweep_with(p: f64, q: f64, d: u32, grid_spec: &GridSpec, opts: &SweepOptions) -> Result<BranchCurve> {
    crate::nonlinearity::constants(p, q, d)?;
    grid_spec.validate()?;
    let ms = mu_star(p, q);
    let mus: Vec<f64> = grid_spec.ratios().iter().map(|x| x * ms).collect();
    let points: Vec<BranchPoint> = mus
        .par_iter()
        .map(|&mu| solve_point(p, q, d, mu, opts).unwrap_or_else(|e| BranchPoint::failed(mu, e.to_string())))
        .collect();
    let failed = points.iter().filter(|p| !p.is_ok()).count();
    if failed * 10 > points.len() {
        return Err(Error::Sweep(format!("{failed} of {} branch points failed", points.len())));
    }
    Ok(BranchCurve { p, q, d, grid_spec: *grid_spec, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Violated(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchAnalysis {
    pub sign_changes: usize,
    /// Polished zeros of M'.
    pub crossings: Vec<f64>,
    /// μ-intervals where |M'| is inside the dead band.
    pub near_zero_intervals: Vec<(f64, f64)>,
    /// max over interior points of |E' + μM'/2| / scale, with E' differenced along the curve.
    pub e_identity_residual: f64,
    /// Same with E' from the extra finite-difference solves.
    pub e_identity_residual_fd: f64,
    pub mp_positive_at_end: bool,
    pub verdict: Verdict,
}

/// Scale for the energy identity: |μM'/2|, floored at 1% of M so that the zero of M'
/// does not turn a tiny absolute error into a large relative one.
fn identity_scale(pt: &BranchPoint) -> f64 {
    (0.5 * pt.mu * pt.mp_lin).abs().max(1e-2 * pt.mass.abs())
}

/// E'(μ) along the curve by five-point differences in s = logit(μ/μ*), where the
/// samples are uniform.
pub fn energy_derivative_along(curve: &BranchCurve) -> Vec<(usize, f64)> {
    let pts = curve.valid_points();
    let ms = curve.mu_star();
    let s: Vec<f64> = pts.iter().map(|p| {
        let x = p.mu / ms;
        (x / (1.0 - x)).ln()
    }).collect();
    let mut out = Vec::new();
    for i in 2..pts.len().saturating_sub(2) {
        let nodes = &s[i - 2..=i + 2];
        let w = fd_weights_first(s[i], nodes);
        let de_ds: f64 = w.iter().zip(&pts[i - 2..=i + 2]).map(|(w, p)| w * p.energy).sum();
        let x = pts[i].mu / ms;
        // ds/dμ = 1/(μ* x (1-x))
        let idx = curve.points.iter().position(|p| std::ptr::eq(p, pts[i])).unwrap();
        out.push((idx, de_ds / (ms * x * (1.0 - x))));
    }
    out
}

/// Half-width, in samples, of the neighbourhood that sets the dead band.
pub const DEAD_BAND_WINDOW: usize = 10;

pub fn analyze(curve: &BranchCurve) -> Result<BranchAnalysis> {
    analyze_with(curve, &SweepOptions::default(), true)
}

/// `polish` adds solves to locate each zero of M' beyond the sample resolution.
pub fn analyze_with(curve: &BranchCurve, opts: &SweepOptions, polish: bool) -> Result<BranchAnalysis> {
    let pts = curve.valid_points();
    if pts.len() < 20 {
        return Err(Error::Analysis(format!("only {} valid points; 20 needed", pts.len())));
    }
    // M' spans many decades along the curve, so the dead band scales with the
    // largest |M'| among nearby samples rather than over the whole curve
    let band = |i: usize| {
        let lo = i.saturating_sub(DEAD_BAND_WINDOW);
        let hi = (i + DEAD_BAND_WINDOW + 1).min(pts.len());
        1e-3 * pts[lo..hi].iter().map(|p| p.mp_lin.abs()).fold(0.0, f64::max)
    };
    // dead-band samples carry no sign
    let mut sign_changes = 0;
    let mut last_sign = 0i8;
    let mut last_idx = 0usize;
    let mut brackets = Vec::new();
    let mut near_zero = Vec::new();
    let mut zero_start: Option<f64> = None;
    for (i, p) in pts.iter().enumerate() {
        let s = if p.mp_lin.abs() < band(i) {
            0
        } else if p.mp_lin > 0.0 {
            1
        } else {
            -1
        };
        if s == 0 {
            zero_start.get_or_insert(p.mu);
            continue;
        }
        if let Some(z) = zero_start.take() {
            near_zero.push((z, pts[i - 1].mu));
        }
        if last_sign != 0 && s != last_sign {
            sign_changes += 1;
            brackets.push((last_idx, i));
        }
        last_sign = s;
        last_idx = i;
    }
    if let Some(z) = zero_start {
        near_zero.push((z, pts.last().unwrap().mu));
    }

    let mut crossings = Vec::new();
    for &(a, b) in &brackets {
        let (pa, pb) = (pts[a], pts[b]);
        let mut mu_c = pa.mu - pa.mp_lin * (pb.mu - pa.mu) / (pb.mp_lin - pa.mp_lin);
        if polish {
            // false-position refinement with extra solves
            let mut lo = (pa.mu, pa.mp_lin);
            let mut hi = (pb.mu, pb.mp_lin);
            for _ in 0..2 {
                let prm = curve.params(mu_c)?;
                let prof = solve_ground_state_with_hint(&prm, &opts.controls, pa.param)?;
                let m1 = mass_derivative_with(&prof, &opts.grid)?.m1;
                if m1.signum() == lo.1.signum() {
                    lo = (mu_c, m1);
                } else {
                    hi = (mu_c, m1);
                }
                mu_c = lo.0 - lo.1 * (hi.0 - lo.0) / (hi.1 - lo.1);
            }
        }
        crossings.push(mu_c);
    }

    let mut e_res: f64 = 0.0;
    for (idx, ep) in energy_derivative_along(curve) {
        let pt = &curve.points[idx];
        e_res = e_res.max((ep + 0.5 * pt.mu * pt.mp_lin).abs() / identity_scale(pt));
    }
    let mut e_res_fd: f64 = 0.0;
    for pt in &pts[1..pts.len() - 1] {
        e_res_fd = e_res_fd.max((pt.ep_fd + 0.5 * pt.mu * pt.mp_lin).abs() / identity_scale(pt));
    }
    Ok(BranchAnalysis {
        sign_changes,
        crossings,
        near_zero_intervals: near_zero,
        e_identity_residual: e_res,
        e_identity_residual_fd: e_res_fd,
        mp_positive_at_end: pts.last().unwrap().mp_lin > 0.0,
        verdict: if sign_changes <= 1 { Verdict::Consistent } else { Verdict::Violated(sign_changes) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassInversion {
    pub solutions: Vec<(f64, Stability)>,
    pub note: Option<String>,
}

/// Solve M(μ) = λ on every sampled interval, with cubic Hermite interpolation of M
/// using M' from the linear solve; stability follows the sign of M' at the root.
pub fn invert_mass(curve: &BranchCurve, lambda: f64) -> Result<MassInversion> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda = {lambda} must be positive")));
    }
    let pts = curve.valid_points();
    if pts.len() < 2 {
        return Err(Error::Analysis("curve has fewer than two valid points".into()));
    }
    let m_min = pts.iter().map(|p| p.mass).fold(f64::INFINITY, f64::min);
    let m_max = pts.iter().map(|p| p.mass).fold(f64::NEG_INFINITY, f64::max);
    let mut solutions: Vec<(f64, Stability)> = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let f = |mu: f64| hermite(a.mu, b.mu, a.mass, b.mass, a.mp_lin, b.mp_lin, mu);
        let fa = a.mass - lambda;
        let fb = b.mass - lambda;
        // roots at a sample node are attributed to the interval on its right
        let crosses = (fa == 0.0) || (fa * fb < 0.0);
        let mut roots = Vec::new();
        if crosses {
            let r = if fa == 0.0 { a.mu } else { brent(|mu| f(mu).0 - lambda, a.mu, b.mu, 1e-15 * b.mu).unwrap() };
            roots.push(r);
        } else {
            // a cubic can dip through λ and come back within one cell
            let n = 16;
            let mut prev = (a.mu, fa);
            for k in 1..=n {
                let mu = a.mu + (b.mu - a.mu) * k as f64 / n as f64;
                let v = f(mu).0 - lambda;
                if prev.1 * v < 0.0 {
                    roots.push(brent(|m| f(m).0 - lambda, prev.0, mu, 1e-15 * mu).unwrap());
                }
                prev = (mu, v);
            }
        }
        for r in roots {
            let slope = f(r).1;
            let st = if slope > 0.0 { Stability::Stable } else { Stability::Unstable };
            if solutions.last().is_none_or(|(m, _)| (r - m).abs() > 1e-12 * r) {
                solutions.push((r, st));
            }
        }
    }
    let note = if lambda < m_min {
        Some(format!("lambda below the sampled minimum mass {m_min}"))
    } else if lambda > m_max {
        Some(format!("lambda above the sampled maximum mass {m_max}"))
    } else {
        None
    };
    Ok(MassInversion { solutions, note })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(masses: &[(f64, f64, f64)]) -> BranchCurve {
        let points = masses
            .iter()
            .map(|&(mu, m, mp)| {
                let mut pt = BranchPoint::failed(mu, String::new());
                pt.status = PointStatus::Ok;
                pt.message = None;
                pt.mass = m;
                pt.mp_lin = mp;
                pt
            })
            .collect();
        BranchCurve { p: 5.0, q: 3.0, d: 3, grid_spec: GridSpec::default(), points }
    }

    #[test]
    fn logit_grid_endpoints() {
        let r = GridSpec::default().ratios();
        assert_eq!(r.len(), 120);
        assert!((r[0] - 1e-3).abs() < 1e-15);
        assert!((r[119] - 0.995).abs() < 1e-14);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn inversion_on_a_valley() {
        // M(μ) = (μ-1)² + 1 sampled on [0, 3]
        let pts: Vec<(f64, f64, f64)> =
            (0..31).map(|i| i as f64 * 0.1).map(|mu| (mu + 0.05, (mu + 0.05 - 1.0).powi(2) + 1.0, 2.0 * (mu + 0.05 - 1.0))).collect();
        let curve = synthetic(&pts);
        let inv = invert_mass(&curve, 1.5).unwrap();
        assert_eq!(inv.solutions.len(), 2);
        assert_eq!(inv.solutions[0].1, Stability::Unstable);
        assert_eq!(inv.solutions[1].1, Stability::Stable);
        assert!((inv.solutions[0].0 - (1.0 - 0.5f64.sqrt())).abs() < 1e-6);
        let inv = invert_mass(&curve, 0.5).unwrap();
        assert!(inv.solutions.is_empty() && inv.note.is_some());
    }

    #[test]
    fn inversion_at_a_sample_is_within_one_cell() {
        let pts: Vec<(f64, f64, f64)> = (1..40).map(|i| i as f64 * 0.1).map(|mu| (mu, mu.powi(3), 3.0 * mu * mu)).collect();
        let curve = synthetic(&pts);
        let target = &curve.points[17];
        let inv = invert_mass(&curve, target.mass).unwrap();
        assert_eq!(inv.solutions.len(), 1);
        assert!((inv.solutions[0].0 - target.mu).abs() <= 0.1);
    }

    #[test]
    fn csv_header_matches_schema() {
        let curve = synthetic(&[(0.1, 1.0, 1.0)]);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), BranchCurve::CSV_HEADER);
        assert!(!text.contains('\r'));
    }
}
