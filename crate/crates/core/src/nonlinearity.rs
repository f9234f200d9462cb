//! The double-power nonlinearity `g_μ(u) = -u^p + u^q - μu`, its primitive and
//! derivatives, the critical constants μ*, β*, x*, the roots α_μ < β_μ of g_μ
//! and η_μ of G_μ, and the hypothesis checkers used by the uniqueness theory.
//!
//! Powers are odd extensions: `u^p := |u|^{p-1} u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{brent, log_spaced_open, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// `g(u) = -u^p + u^q - μu`
    DoublePower,
    /// `g(u) = u^q - u`, the single-power NLS with μ = 1
    SinglePowerNls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub mode: Mode,
    /// Defocusing exponent (unused in `SinglePowerNls` mode).
    pub p: f64,
    pub q: f64,
    pub d: u32,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SobolevRegime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassRegime {
    MassSub,
    MassCritical,
    MassSuper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub mu_star: f64,
    pub beta_star: f64,
    pub x_star: f64,
    pub sobolev_regime: SobolevRegime,
    pub mass_regime: MassRegime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub alpha_mu: f64,
    pub beta_mu: f64,
    /// First positive zero of G_μ; `None` when G_μ ≤ 0 on the half line (μ > μ*).
    pub eta_mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// Primitive G
    Primitive,
    /// g
    Value,
    /// g'
    First,
    /// g''
    Second,
}

/// Relative tolerance used to decide that two exponents coincide (q = 1+4/d etc.).
const REGIME_EPS: f64 = 1e-12;

fn validate_exponents(p: f64, q: f64, d: u32) -> Result<()> {
    if !(p.is_finite() && q.is_finite()) {
        return Err(Error::Parameter("exponents must be finite".into()));
    }
    if !(q > 1.0) {
        return Err(Error::Parameter(format!("need q > 1, got q = {q}")));
    }
    if !(p > q) {
        return Err(Error::Parameter(format!("need p > q, got p = {p}, q = {q}")));
    }
    if d < 2 {
        return Err(Error::Parameter(format!("need d >= 2, got d = {d}")));
    }
    Ok(())
}

impl ProblemParams {
    /// Double-power problem with 0 < μ < μ*; the admissible range for ground states.
    pub fn double_power(p: f64, q: f64, d: u32, mu: f64) -> Result<Self> {
        let params = Self::double_power_relaxed(p, q, d, mu)?;
        let mu_star = mu_star(p, q);
        if !(mu < mu_star) {
            return Err(Error::Parameter(format!(
                "need mu < mu_star = {mu_star}, got mu = {mu} (no ground state for mu >= mu_star)"
            )));
        }
        Ok(params)
    }

    /// Double-power parameters with any μ > 0 (used by `roots` and the hypothesis checks,
    /// which are meaningful at and beyond μ*).
    pub fn double_power_relaxed(p: f64, q: f64, d: u32, mu: f64) -> Result<Self> {
        validate_exponents(p, q, d)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("need mu > 0, got mu = {mu}")));
        }
        Ok(ProblemParams { mode: Mode::DoublePower, p, q, d, mu })
    }

    /// Single-power NLS `ΔQ + Q^q - Q = 0`, energy-subcritical.
    pub fn single_power_nls(q: f64, d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter(format!("need d >= 2, got d = {d}")));
        }
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::Parameter(format!("need q > 1, got q = {q}")));
        }
        if d >= 3 {
            let crit = 1.0 + 4.0 / (d as f64 - 2.0);
            if !(q < crit) {
                return Err(Error::Parameter(format!(
                    "single-power NLS needs q < 1 + 4/(d-2) = {crit}, got q = {q}"
                )));
            }
        }
        Ok(ProblemParams { mode: Mode::SinglePowerNls, p: f64::NAN, q, d, mu: 1.0 })
    }

    /// Copy with a different multiplier (double-power only, strict range check).
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        match self.mode {
            Mode::DoublePower => Self::double_power(self.p, self.q, self.d, mu),
            Mode::SinglePowerNls => Err(Error::Parameter("single-power NLS has fixed mu = 1".into())),
        }
    }

    /// Check that a ground state exists for these parameters.
    pub fn ensure_solvable(&self) -> Result<()> {
        if self.mode == Mode::DoublePower {
            let ms = mu_star(self.p, self.q);
            if !(self.mu > 0.0 && self.mu < ms) {
                return Err(Error::Parameter(format!(
                    "no ground state for mu = {} outside (0, mu_star = {ms})",
                    self.mu
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }

    /// `g(u)`
    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.mode {
            Mode::DoublePower => (-a.powf(self.p - 1.0) + a.powf(self.q - 1.0) - self.mu) * u,
            Mode::SinglePowerNls => (a.powf(self.q - 1.0) - 1.0) * u,
        }
    }

    /// `G(u) = ∫_0^u g`
    #[inline]
    pub fn big_g(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.mode {
            Mode::DoublePower => {
                -a.powf(self.p + 1.0) / (self.p + 1.0) + a.powf(self.q + 1.0) / (self.q + 1.0)
                    - 0.5 * self.mu * a * a
            }
            Mode::SinglePowerNls => a.powf(self.q + 1.0) / (self.q + 1.0) - 0.5 * a * a,
        }
    }

    /// `g'(u)`
    #[inline]
    pub fn dg(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.mode {
            Mode::DoublePower => -self.p * a.powf(self.p - 1.0) + self.q * a.powf(self.q - 1.0) - self.mu,
            Mode::SinglePowerNls => self.q * a.powf(self.q - 1.0) - 1.0,
        }
    }

    /// `g''(u)`; singular at 0 when q < 2.
    pub fn d2g(&self, u: f64) -> Result<f64> {
        if u == 0.0 && self.q < 2.0 {
            return Err(Error::Domain(format!("g'' is singular at u = 0 for q = {} < 2", self.q)));
        }
        let a = u.abs();
        let s = if u < 0.0 { -1.0 } else { 1.0 };
        let qq = self.q * (self.q - 1.0) * pow_nonneg(a, self.q - 2.0);
        let v = match self.mode {
            Mode::DoublePower => -self.p * (self.p - 1.0) * pow_nonneg(a, self.p - 2.0) + qq,
            Mode::SinglePowerNls => qq,
        };
        Ok(s * v)
    }

    /// Evaluate G, g, g', or g'' at `u`.
    pub fn eval(&self, u: f64, order: Order) -> Result<f64> {
        match order {
            Order::Primitive => Ok(self.big_g(u)),
            Order::Value => Ok(self.g(u)),
            Order::First => Ok(self.dg(u)),
            Order::Second => self.d2g(u),
        }
    }

    /// Linearized decay rate `√(-g'(0))`.
    pub fn decay_rate(&self) -> f64 {
        match self.mode {
            Mode::DoublePower => self.mu.sqrt(),
            Mode::SinglePowerNls => 1.0,
        }
    }
}

/// `a^e` for `a ≥ 0` with the right limit `0^0 = 1`.
#[inline]
fn pow_nonneg(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        a.powf(e)
    }
}

/// Threshold multiplier μ*.
pub fn mu_star(p: f64, q: f64) -> f64 {
    let a = (q - 1.0) / (p - q);
    let b = (p - 1.0) / (p - q);
    2.0 * ((p + 1.0) * (q - 1.0)).powf(a) * (p - q) / ((q + 1.0) * (p - 1.0)).powf(b)
}

/// Double zero β* of G_{μ*}.
pub fn beta_star(p: f64, q: f64) -> f64 {
    (((q - 1.0) * (p + 1.0)) / ((q + 1.0) * (p - 1.0))).powf(1.0 / (p - q))
}

/// Maximizer x* of g'_μ (independent of μ).
pub fn x_star(p: f64, q: f64) -> f64 {
    (q * (q - 1.0) / (p * (p - 1.0))).powf(1.0 / (p - q))
}

pub fn sobolev_regime(q: f64, d: u32) -> SobolevRegime {
    if d <= 2 {
        return SobolevRegime::Subcritical;
    }
    let crit = 1.0 + 4.0 / (d as f64 - 2.0);
    if (q - crit).abs() <= REGIME_EPS * crit {
        SobolevRegime::Critical
    } else if q < crit {
        SobolevRegime::Subcritical
    } else {
        SobolevRegime::Supercritical
    }
}

pub fn mass_regime(q: f64, d: u32) -> MassRegime {
    let crit = 1.0 + 4.0 / d as f64;
    if (q - crit).abs() <= REGIME_EPS * crit {
        MassRegime::MassCritical
    } else if q < crit {
        MassRegime::MassSub
    } else {
        MassRegime::MassSuper
    }
}

/// Closed-form critical constants and regime tags.
pub fn constants(p: f64, q: f64, d: u32) -> Result<CriticalConstants> {
    validate_exponents(p, q, d)?;
    Ok(CriticalConstants {
        mu_star: mu_star(p, q),
        beta_star: beta_star(p, q),
        x_star: x_star(p, q),
        sobolev_regime: sobolev_regime(q, d),
        mass_regime: mass_regime(q, d),
    })
}

/// Roots of a unimodal function `f` on (0, ∞) that is negative near 0, increases to a
/// maximum at `peak`, then decreases to -∞. Returns the (left, right) roots.
fn unimodal_roots<F: Fn(f64) -> f64>(f: F, peak: f64) -> Option<(f64, f64)> {
    let fmax = f(peak);
    if fmax < 0.0 {
        return None;
    }
    if fmax == 0.0 {
        return Some((peak, peak));
    }
    let left = brent(&f, 0.0, peak, 1e-16)?;
    let mut hi = 2.0 * peak.max(1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let right = brent(&f, peak, hi, 1e-16)?;
    Some((polish(&f, left), polish(&f, right)))
}

/// A couple of secant corrections after Brent, staying inside a tiny neighbourhood.
fn polish<F: Fn(f64) -> f64>(f: &F, x: f64) -> f64 {
    let mut best = x;
    let mut fbest = f(x).abs();
    let h = 1e-7 * x.abs().max(1e-300);
    let (mut x0, mut x1) = (x - h, x);
    let (mut f0, mut f1) = (f(x0), f(x1));
    for _ in 0..4 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !x2.is_finite() || (x2 - x).abs() > 1e3 * h {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1);
        if f1.abs() < fbest {
            best = x1;
            fbest = f1.abs();
        }
    }
    best
}

/// α_μ < β_μ (zeros of g_μ on (0, ∞)) and η_μ (first positive zero of G_μ).
pub fn roots(params: &ProblemParams) -> Result<RootSet> {
    if params.mode != Mode::DoublePower {
        return Err(Error::Root("roots are defined for the double-power nonlinearity only".into()));
    }
    let (p, q, mu) = (params.p, params.q, params.mu);
    // g(u)/u = -u^{p-1} + u^{q-1} - μ, maximal at ((q-1)/(p-1))^{1/(p-q)}
    let g_over_u = |u: f64| -u.powf(p - 1.0) + u.powf(q - 1.0) - mu;
    let peak_g = ((q - 1.0) / (p - 1.0)).powf(1.0 / (p - q));
    let (alpha_mu, beta_mu) = unimodal_roots(g_over_u, peak_g).ok_or_else(|| {
        Error::Root(format!("g_mu has no positive root for mu = {mu} (p = {p}, q = {q})"))
    })?;
    // G(u)/u² = -u^{p-1}/(p+1) + u^{q-1}/(q+1) - μ/2, maximal at β*
    let big_g_over_u2 = |u: f64| -u.powf(p - 1.0) / (p + 1.0) + u.powf(q - 1.0) / (q + 1.0) - 0.5 * mu;
    let bs = beta_star(p, q);
    let kmax = big_g_over_u2(bs);
    let eta_mu = if kmax.abs() <= 1e-14 {
        // double zero at μ = μ*
        Some(bs)
    } else if kmax < 0.0 {
        None
    } else {
        brent(&big_g_over_u2, 0.0, bs, 1e-16).map(|x| polish(&big_g_over_u2, x))
    };
    Ok(RootSet { alpha_mu, beta_mu, eta_mu })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1_pass: bool,
    pub h2_pass: bool,
    pub existence_pass: bool,
    pub lambda_grid: Vec<f64>,
    /// Per λ: (roots of I_λ on (0, α_μ], roots on (α_μ, β_μ)).
    pub i_lambda_root_counts: Vec<(usize, usize)>,
    pub details: Vec<String>,
}

/// Default λ grid: 64 log-spaced points on (1, 10³].
pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced_open(1.0, 1e3, 64)
}

/// Densified λ grid (4× the default resolution).
pub fn dense_lambda_grid() -> Vec<f64> {
    log_spaced_open(1.0, 1e3, 256)
}

const ROOT_COUNT_GRID: usize = 4096;

/// Sign changes of `f` on a uniform grid of (a, b), each refined by bisection to 1e-12.
fn count_roots<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut found = Vec::new();
    let step = (b - a) / n as f64;
    let mut x0 = a + 0.5 * step;
    let mut f0 = f(x0);
    for i in 1..n {
        let x1 = a + (i as f64 + 0.5) * step;
        let f1 = f(x1);
        if f0 == 0.0 {
            found.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            found.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    found
}

/// Grid-based check of (H1), (H2) and the existence condition `max G > 0`.
///
/// (H2) is required for every λ > 1; only the supplied grid is tested, so a pass is
/// evidence, not a proof.
pub fn check_hypotheses(params: &ProblemParams, lambda_grid: &[f64]) -> Result<HypothesisReport> {
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| !(l > 1.0)) {
        return Err(Error::Parameter("lambda grid must be non-empty with every lambda > 1".into()));
    }
    let mut details = Vec::new();
    if params.mode != Mode::DoublePower {
        details.push("single-power NLS: g has no third zero beta, (H1)/(H2) not applicable".into());
        return Ok(HypothesisReport {
            h1_pass: false,
            h2_pass: false,
            existence_pass: true,
            lambda_grid: lambda_grid.to_vec(),
            i_lambda_root_counts: Vec::new(),
            details,
        });
    }
    let rs = match roots(params) {
        Ok(rs) => rs,
        Err(e) => {
            details.push(format!("no roots: {e}"));
            return Ok(HypothesisReport {
                h1_pass: false,
                h2_pass: false,
                existence_pass: false,
                lambda_grid: lambda_grid.to_vec(),
                i_lambda_root_counts: Vec::new(),
                details,
            });
        }
    };
    let (alpha, beta) = (rs.alpha_mu, rs.beta_mu);

    // (H1): sign pattern of g and signs of g' at 0, α, β
    let mut h1 = true;
    if !(alpha < beta) {
        h1 = false;
        details.push(format!("alpha = {alpha} is not below beta = {beta}"));
    }
    let n = ROOT_COUNT_GRID;
    for i in 1..n {
        let x = alpha * i as f64 / n as f64;
        if !(params.g(x) < 0.0) {
            h1 = false;
            details.push(format!("g not negative at {x} in (0, alpha)"));
            break;
        }
    }
    for i in 1..n {
        let x = alpha + (beta - alpha) * i as f64 / n as f64;
        if !(params.g(x) > 0.0) {
            h1 = false;
            details.push(format!("g not positive at {x} in (alpha, beta)"));
            break;
        }
    }
    if !(params.dg(0.0) < 0.0) {
        h1 = false;
        details.push("g'(0) >= 0".into());
    }
    if !(params.dg(alpha) > 0.0) {
        h1 = false;
        details.push("g'(alpha) <= 0".into());
    }
    if !(params.dg(beta) <= 0.0) {
        h1 = false;
        details.push("g'(beta) > 0".into());
    }

    // (H2): I_λ(x) = x g'(x) - λ g(x) has no root on (0, α] and exactly one on (α, β)
    let mut counts = Vec::with_capacity(lambda_grid.len());
    let mut h2 = true;
    for &lambda in lambda_grid {
        let i_lambda = |x: f64| x * params.dg(x) - lambda * params.g(x);
        let roots_found = count_roots(i_lambda, 0.0, beta, n);
        let below = roots_found.iter().filter(|&&x| x <= alpha).count();
        let above = roots_found.len() - below;
        // I_λ(α) = α g'(α) > 0 is exact; the grid may straddle α, so check it directly
        let at_alpha = i_lambda(alpha);
        if !(at_alpha > 0.0) {
            h2 = false;
            details.push(format!("I_lambda(alpha) = {at_alpha} <= 0 for lambda = {lambda}"));
        }
        if below != 0 || above != 1 {
            h2 = false;
            details.push(format!(
                "lambda = {lambda}: {below} root(s) on (0, alpha], {above} on (alpha, beta)"
            ));
        }
        counts.push((below, above));
    }
    if h2 {
        details.push(format!(
            "(H2) verified on {} lambda values only; the hypothesis quantifies over all lambda > 1",
            lambda_grid.len()
        ));
    }

    // existence: max G > 0 (G/u² is maximal at β*)
    let existence = match rs.eta_mu {
        Some(_) => params.big_g(beta_star(params.p, params.q)) > 0.0,
        None => false,
    };
    if !existence {
        details.push("G_mu <= 0 on the half line: no ground state (mu >= mu_star)".into());
    }

    Ok(HypothesisReport {
        h1_pass: h1,
        h2_pass: h2,
        existence_pass: existence,
        lambda_grid: lambda_grid.to_vec(),
        i_lambda_root_counts: counts,
        details,
    })
}
