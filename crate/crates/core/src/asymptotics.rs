//! Endpoint predictions for the branch: the small-μ regime table and expansions,
//! the large-μ constants Λ, ρ, κ, the one-dimensional connecting profile U*, and a
//! comparison of all of these against sampled branch data.

use serde::{Deserialize, Serialize};

use crate::branch::BranchCurve;
use crate::error::{Error, Result};
use crate::linearized::{assemble, eigenpairs, Which};
use crate::nonlinearity::{
    beta_star, constants, mass_regime, mu_star, sobolev_regime, MassRegime, ProblemParams, SobolevRegime,
};
use crate::numerics::{sphere_area, Pchip};
use crate::quadrature;
use crate::shooting::{solve_ground_state, solve_ground_state_with_hint, ShootControls};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Limit {
    Zero,
    Finite,
    Infinite,
    MinusInfinity,
}

/// Scale law of the concentration parameter ε_μ in the Sobolev-critical case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsLaw {
    /// ε ~ c μ^e
    Power(f64),
    /// ε ~ c (μ ln μ⁻¹)^e
    MuLogMu(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallMuModel {
    pub p: f64,
    pub q: f64,
    pub d: u32,
    pub regime: SobolevRegime,
    pub mass_regime: MassRegime,
    pub leading_exponent: Option<f64>,
    pub next_exponent: Option<f64>,
    /// ∫Q² of the NLS ground state.
    pub q_mass: Option<f64>,
    /// ∫Q^{p+1}.
    pub q_p1: Option<f64>,
    /// Coefficient of μ^{next_exponent} in M.
    pub next_coefficient: Option<f64>,
    pub eps_law: Option<EpsLaw>,
    pub mass_limit: Limit,
    /// Limit of M' as μ → 0, where known.
    pub mp_limit: Option<Limit>,
    /// Sign of M' near 0 (+1 or -1), `None` where the theory does not decide it.
    pub mp_sign_near_zero: Option<f64>,
    /// d ≥ 7 supercritical: whether (p, q) lies in the window where M'(0) < 0 is proven.
    pub in_negative_window: Option<bool>,
}

impl SmallMuModel {
    /// `(one-term, two-term)` predictions of M(μ); subcritical only.
    pub fn mass(&self, mu: f64) -> Option<(f64, f64)> {
        let (e1, e2) = (self.leading_exponent?, self.next_exponent?);
        let one = mu.powf(e1) * self.q_mass?;
        Some((one, one + self.next_coefficient? * mu.powf(e2)))
    }

    /// `(one-term, two-term)` predictions of M'(μ); subcritical only.
    pub fn mass_derivative(&self, mu: f64) -> Option<(f64, f64)> {
        let (e1, e2) = (self.leading_exponent?, self.next_exponent?);
        let one = e1 * mu.powf(e1 - 1.0) * self.q_mass?;
        Some((one, one + e2 * self.next_coefficient? * mu.powf(e2 - 1.0)))
    }
}

/// Upper end of the proven M'(0) < 0 window in d ≥ 7.
fn negative_window(p: f64, q: f64, d: u32) -> bool {
    let dd = d as f64;
    let crit = 1.0 + 4.0 / (dd - 2.0);
    q > crit && p < crit + 32.0 / (dd * (dd - 2.0) * ((dd - 2.0) * q - dd - 2.0))
}

/// ∫Q² and ∫Q^{p+1} for the NLS ground state `ΔQ + Q^q - Q = 0`.
pub fn nls_integrals(p: f64, q: f64, d: u32) -> Result<(f64, f64)> {
    let prm = ProblemParams::single_power_nls(q, d)?;
    let prof = solve_ground_state(&prm, &ShootControls::default())?;
    let mass = prof.integrate_full(|_, u, _| u * u);
    let p1 = prof.integrate_full(|_, u, _| u.abs().powf(p + 1.0));
    Ok((mass, p1))
}

pub fn small_mu_model(p: f64, q: f64, d: u32) -> Result<SmallMuModel> {
    constants(p, q, d)?;
    let dd = d as f64;
    let regime = sobolev_regime(q, d);
    let mreg = mass_regime(q, d);
    let mut model = SmallMuModel {
        p,
        q,
        d,
        regime,
        mass_regime: mreg,
        leading_exponent: None,
        next_exponent: None,
        q_mass: None,
        q_p1: None,
        next_coefficient: None,
        eps_law: None,
        mass_limit: Limit::Infinite,
        mp_limit: None,
        mp_sign_near_zero: None,
        in_negative_window: None,
    };
    match regime {
        SobolevRegime::Subcritical => {
            let e1 = (4.0 + dd - dd * q) / (2.0 * (q - 1.0));
            let e2 = (2.0 * (p - q) + 4.0 + dd - dd * q) / (2.0 * (q - 1.0));
            let (qm, qp1) = nls_integrals(p, q, d)?;
            model.leading_exponent = Some(e1);
            model.next_exponent = Some(e2);
            model.q_mass = Some(qm);
            model.q_p1 = Some(qp1);
            model.next_coefficient = Some((2.0 * (p - 1.0) + 4.0 + dd - dd * q) / ((p + 1.0) * (q - 1.0)) * qp1);
            model.mass_limit = match mreg {
                MassRegime::MassSub => Limit::Zero,
                MassRegime::MassCritical => Limit::Finite,
                MassRegime::MassSuper => Limit::Infinite,
            };
            model.mp_sign_near_zero = Some(if mreg == MassRegime::MassSuper { -1.0 } else { 1.0 });
        }
        SobolevRegime::Critical => {
            model.eps_law = Some(match d {
                3 => EpsLaw::Power(1.0 / (p - 3.0)),
                4 => EpsLaw::MuLogMu(1.0 / (p - 1.0)),
                _ => EpsLaw::Power((q - 1.0) / (2.0 * (p - 1.0))),
            });
            model.mass_limit = Limit::Infinite;
            model.mp_limit = Some(Limit::MinusInfinity);
            model.mp_sign_near_zero = Some(-1.0);
        }
        SobolevRegime::Supercritical => {
            model.mass_limit = if d <= 4 { Limit::Infinite } else { Limit::Finite };
            if d <= 6 {
                model.mp_limit = Some(Limit::MinusInfinity);
                model.mp_sign_near_zero = Some(-1.0);
            } else {
                model.mp_limit = Some(Limit::Finite);
                let inside = negative_window(p, q, d);
                model.in_negative_window = Some(inside);
                model.mp_sign_near_zero = inside.then_some(-1.0);
            }
        }
    }
    Ok(model)
}

/// `-G_{μ*}(s)/s² ≥ 0`, accurate through its double zero at β*.
fn neg_g_star_over_s2(p: f64, q: f64, s: f64) -> f64 {
    let (ms, bs) = (mu_star(p, q), beta_star(p, q));
    let x = s - bs;
    if x.abs() < 0.05 * bs {
        // Taylor series at β*, where the value and slope vanish
        let mut sum = 0.0;
        let (mut fp, mut fq) = (1.0, 1.0); // falling factorials of (p-1), (q-1)
        let mut xn_over_fact = 1.0;
        for n in 1..40 {
            let nf = n as f64;
            fp *= p - nf;
            fq *= q - nf;
            xn_over_fact *= x / nf;
            if n >= 2 {
                let dn = -fp * bs.powf(p - 1.0 - nf) / (p + 1.0) + fq * bs.powf(q - 1.0 - nf) / (q + 1.0);
                sum += dn * xn_over_fact;
            }
        }
        return -sum;
    }
    s.powf(p - 1.0) / (p + 1.0) - s.powf(q - 1.0) / (q + 1.0) + 0.5 * ms
}

/// |G_{μ*}(s)| for s ∈ [0, β*].
pub fn abs_g_star(p: f64, q: f64, s: f64) -> f64 {
    s * s * neg_g_star_over_s2(p, q, s).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeMuModel {
    pub p: f64,
    pub q: f64,
    pub d: u32,
    pub mu_star: f64,
    pub beta_star: f64,
    /// ∫_0^{β*} |G_{μ*}|^{1/2}
    pub quad_integral: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub rho: f64,
    pub kappa: f64,
}

pub fn lambda_closed_form(beta_star: f64, d: u32, quad_integral: f64) -> f64 {
    let dd = d as f64;
    2f64.powf(1.5 * dd) * sphere_area(d) / dd * beta_star.powf(2.0 * (1.0 - dd)) * (dd - 1.0).powi(d as i32)
        * quad_integral.powi(d as i32)
}

pub fn large_mu_model(p: f64, q: f64, d: u32) -> Result<LargeMuModel> {
    let c = constants(p, q, d)?;
    let bs = c.beta_star;
    let quad = quadrature::integrate(|s| abs_g_star(p, q, s).sqrt(), 0.0, bs, 1e-15, 1e-12)?;
    let dd = d as f64;
    Ok(LargeMuModel {
        p,
        q,
        d,
        mu_star: c.mu_star,
        beta_star: bs,
        quad_integral: quad,
        lambda: lambda_closed_form(bs, d, quad),
        rho: 2.0 * 2f64.sqrt() * (dd - 1.0) / (bs * bs) * quad,
        kappa: 2f64.powf(0.25) * sphere_area(d).sqrt() * quad.sqrt(),
    })
}

/// Half-width, in logistic units, of the tabulated part of U*.
const USTAR_LOGIT_RANGE: f64 = 27.0;
const USTAR_NODES: usize = 2001;

/// The heteroclinic `U'' + g_{μ*}(U) = 0`, `U(-∞) = β*`, `U(+∞) = 0`, `U(0) = γ`,
/// obtained by inverting `r = Ψ(v) = -∫_γ^v ds / √(2|G_{μ*}(s)|)`.
#[derive(Debug, Clone)]
pub struct UStar {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub beta_star: f64,
    /// Decay rate √μ* toward 0.
    pub rate_zero: f64,
    /// Decay rate √|g'(β*)| toward β*.
    pub rate_beta: f64,
    /// Ascending radii of the table and their logistic coordinates.
    r_nodes: Vec<f64>,
    z_nodes: Vec<f64>,
    r_of_z: Pchip,
}

impl UStar {
    pub fn new(p: f64, q: f64, gamma: f64) -> Result<Self> {
        constants(p, q, 2)?;
        let bs = beta_star(p, q);
        if !(gamma > 0.0 && gamma < bs) {
            return Err(Error::Parameter(format!("gamma = {gamma} outside (0, beta* = {bs})")));
        }
        let ms = mu_star(p, q);
        let g1 = ProblemParams::double_power_relaxed(p, q, 3, ms)?.dg(bs);
        let mut this = UStar {
            p,
            q,
            gamma,
            beta_star: bs,
            rate_zero: ms.sqrt(),
            rate_beta: g1.abs().sqrt(),
            r_nodes: Vec::new(),
            z_nodes: Vec::new(),
            r_of_z: Pchip::new(vec![0.0, 1.0], vec![0.0, 1.0]),
        };
        // z ascending means v ascending and r descending
        let n = USTAR_NODES;
        let zs: Vec<f64> = (0..n).map(|i| -USTAR_LOGIT_RANGE + 2.0 * USTAR_LOGIT_RANGE * i as f64 / (n - 1) as f64).collect();
        let vs: Vec<f64> = zs.iter().map(|&z| this.v_of_z(z)).collect();
        let mut cum = vec![0.0; n];
        for i in 1..n {
            cum[i] = cum[i - 1] + this.remainder_integral(vs[i - 1], vs[i])?;
        }
        let z_gamma = (gamma / (bs - gamma)).ln();
        let i0 = zs.partition_point(|&z| z <= z_gamma).clamp(1, n - 1) - 1;
        let anchor = cum[i0] + this.remainder_integral(vs[i0], gamma)?;
        let rs: Vec<f64> = (0..n).map(|i| this.singular_part(vs[i]) - (cum[i] - anchor)).collect();
        this.r_nodes = rs.iter().rev().copied().collect();
        this.z_nodes = zs.iter().rev().copied().collect();
        this.r_of_z = Pchip::new(this.r_nodes.clone(), this.z_nodes.clone());
        Ok(this)
    }

    fn v_of_z(&self, z: f64) -> f64 {
        self.beta_star / (1.0 + (-z).exp())
    }

    /// `1/√(2|G*(s)|)`
    fn inv_speed(&self, s: f64) -> f64 {
        1.0 / (s * (2.0 * neg_g_star_over_s2(self.p, self.q, s)).sqrt())
    }

    /// The part of Ψ carrying the logarithmic endpoint singularities, in closed form.
    fn singular_part(&self, v: f64) -> f64 {
        let (a, k, bs, g) = (self.rate_zero, self.rate_beta, self.beta_star, self.gamma);
        -((v / g).ln() / a - ((bs - v) / (bs - g)).ln() / k)
    }

    fn remainder_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let (a, k, bs) = (self.rate_zero, self.rate_beta, self.beta_star);
        quadrature::integrate(|s| self.inv_speed(s) - 1.0 / (a * s) - 1.0 / (k * (bs - s)), lo, hi, 1e-15, 1e-13)
    }

    /// Ψ(v) measured from the nearest table node.
    fn psi(&self, v: f64, z: f64) -> Result<f64> {
        let j = self.z_nodes.partition_point(|&zz| zz > z).min(self.z_nodes.len() - 1);
        let vj = self.v_of_z(self.z_nodes[j]);
        let rem_j = self.singular_part(vj) - self.r_nodes[j];
        Ok(self.singular_part(v) - (rem_j + self.remainder_integral(vj, v)?))
    }

    /// Range of the table; outside it the linearized exponential tails are used.
    pub fn table_range(&self) -> (f64, f64) {
        (self.r_nodes[0], *self.r_nodes.last().unwrap())
    }

    /// `(U(r), U'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (r_lo, r_hi) = self.table_range();
        let bs = self.beta_star;
        if r > r_hi {
            let v_end = self.v_of_z(*self.z_nodes.last().unwrap());
            let v = v_end * (-self.rate_zero * (r - r_hi)).exp();
            return (v, -self.rate_zero * v);
        }
        if r < r_lo {
            let y0 = bs - self.v_of_z(self.z_nodes[0]);
            let y = y0 * (self.rate_beta * (r - r_lo)).exp();
            return (bs - y, -self.rate_beta * y);
        }
        let mut z = self.r_of_z.eval(r);
        // Newton on Ψ(v(z)) = r with dΨ/dz = -(1/√(2|G|)) dv/dz
        for _ in 0..3 {
            let v = self.v_of_z(z);
            let Ok(psi) = self.psi(v, z) else { break };
            let sig = v / bs;
            let dpsi = -self.inv_speed(v) * bs * sig * (1.0 - sig);
            let step = (psi - r) / dpsi;
            if !step.is_finite() {
                break;
            }
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let v = self.v_of_z(z);
        (v, -(2.0 * abs_g_star(self.p, self.q, v)).sqrt())
    }

    /// `U'(r)² + 2 G*(U(r))`, zero on the exact profile.
    pub fn first_integral_residual(&self, r: f64) -> f64 {
        let (u, du) = self.eval(r);
        du * du - 2.0 * abs_g_star(self.p, self.q, u)
    }

    /// `∫ (U²/β*² - 1_{r<0}) dr`: the shift from the anchor `U(0) = γ` to the radius of
    /// the step profile carrying the same squared mass.
    pub fn equimolar_offset(&self) -> Result<f64> {
        let bs2 = self.beta_star * self.beta_star;
        let left = quadrature::integrate(
            |t| {
                let (u, _) = self.eval(-t);
                u * u / bs2 - 1.0
            },
            0.0,
            60.0 / self.rate_beta,
            1e-13,
            1e-11,
        )?;
        let right = quadrature::integrate(
            |t| {
                let (u, _) = self.eval(t);
                u * u / bs2
            },
            0.0,
            60.0 / self.rate_zero,
            1e-13,
            1e-11,
        )?;
        Ok(left + right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UStarTable {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

pub fn u_star_profile(p: f64, q: f64, gamma: f64, r_grid: &[f64]) -> Result<UStarTable> {
    let us = UStar::new(p, q, gamma)?;
    let (u, du) = r_grid.iter().map(|&r| us.eval(r)).unzip();
    Ok(UStarTable { r: r_grid.to_vec(), u, du })
}

/// Sobolev optimizer `S(r) = (1 + r²/(d(d-2)))^{-(d-2)/2}` and its derivative.
pub fn sobolev_optimizer(d: u32, r: f64) -> (f64, f64) {
    let dd = d as f64;
    let c = dd * (dd - 2.0);
    let base = 1.0 + r * r / c;
    let s = base.powf(-(dd - 2.0) / 2.0);
    (s, -(dd - 2.0) / 2.0 * base.powf(-dd / 2.0) * 2.0 * r / c)
}

/// `(1/d) ∫_{ℝ^d} |∇S|²`, the limiting energy in the Sobolev-critical case.
pub fn sobolev_critical_energy(d: u32) -> Result<f64> {
    if d < 3 {
        return Err(Error::Parameter(format!("the Sobolev optimizer needs d >= 3, got {d}")));
    }
    // r = t/(1-t) maps [0, 1) onto [0, ∞)
    let f = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let r = t / (1.0 - t);
        let (_, ds) = sobolev_optimizer(d, r);
        ds * ds * r.powi(d as i32 - 1) / ((1.0 - t) * (1.0 - t))
    };
    let v = quadrature::integrate(f, 0.0, 1.0, 1e-14, 1e-12)?;
    Ok(sphere_area(d) * v / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mu_over_mustar_last: f64,
    /// (μ*-μ)^d M / Λ at the largest sample.
    pub mass_ratio: f64,
    /// (μ*-μ)^{d+1} M' / (d Λ) at the largest sample.
    pub mass_derivative_ratio: f64,
    /// R_γ (μ*-μ) / ρ, uncorrected.
    pub radius_ratio_raw: f64,
    /// (R_γ + δ_γ)(μ*-μ) / ρ with δ_γ the equimolar offset of U*.
    pub radius_ratio: f64,
    pub gamma_offset: f64,
    /// λ1 R_γ² / (-(d-1)).
    pub eigenvalue_ratio: f64,
    /// Relative change of R_γ(μ*-μ) when γ = β*/4 replaces β*/2.
    pub gamma_sensitivity: f64,
    /// sup_{|r|≤10} |u_μ(R_γ + r) - U*(r)| / β*.
    pub profile_gap: f64,
    /// ‖φ_μ + U*'(· - R_γ)/(κ R_γ^{(d-1)/2})‖ in L²(ℝ^d).
    pub eigenfunction_gap: f64,
    /// Successive differences of (μ*-μ)^d M over the last ten samples shrink.
    pub cauchy_trend: bool,
    pub mu_over_mustar_first: f64,
    /// M μ^{-leading} / ∫Q² at the smallest sample (subcritical only).
    pub small_mass_ratio: Option<f64>,
    pub small_one_term_error: Option<f64>,
    pub small_two_term_error: Option<f64>,
    /// Sign of M' at the smallest sample.
    pub small_mp_sign: f64,
    pub small_mp_sign_expected: Option<f64>,
}

pub fn compare(curve: &BranchCurve, small: &SmallMuModel, large: &LargeMuModel) -> Result<ComparisonReport> {
    let pts = curve.valid_points();
    let ms = curve.mu_star();
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return Err(Error::Comparison("curve has no valid points".into()));
    };
    if first.mu / ms > 1e-2 || last.mu / ms < 0.99 {
        return Err(Error::Comparison(format!(
            "curve covers μ/μ* ∈ [{}, {}]; need ≤ 1e-2 and ≥ 0.99",
            first.mu / ms,
            last.mu / ms
        )));
    }
    let d = curve.d;
    let dd = d as f64;
    let gap = ms - last.mu;
    let bs = large.beta_star;
    let gamma = 0.5 * bs;

    let prm = curve.params(last.mu)?;
    let prof = solve_ground_state_with_hint(&prm, &ShootControls::default(), last.param)?;
    let r_g = prof
        .radius_at_level(gamma)
        .ok_or_else(|| Error::Comparison("profile never reaches β*/2".into()))?;
    let r_q = prof
        .radius_at_level(0.25 * bs)
        .ok_or_else(|| Error::Comparison("profile never reaches β*/4".into()))?;
    let ustar = UStar::new(curve.p, curve.q, gamma)?;
    let offset = ustar.equimolar_offset()?;

    let mut profile_gap: f64 = 0.0;
    for i in 0..=2000 {
        let r = -10.0 + 20.0 * i as f64 / 2000.0;
        let (u, _) = prof.eval(r_g + r);
        profile_gap = profile_gap.max((u - ustar.eval(r).0).abs());
    }

    let op = assemble(&prof, 0, Which::LMu)?;
    let sp = eigenpairs(&op, 1)?;
    let sphere = sphere_area(d);
    let scale = large.kappa * r_g.powf(0.5 * (dd - 1.0));
    let diff: Vec<f64> = op
        .grid
        .iter()
        .zip(&sp.eigenvectors[0])
        .map(|(&r, &phi)| phi / sphere.sqrt() + ustar.eval(r - r_g).1 / scale)
        .collect();
    let eigenfunction_gap = (sphere * op.inner(&diff, &diff)).sqrt();

    let tail: Vec<f64> = pts.iter().rev().take(10).rev().map(|p| (ms - p.mu).powi(d as i32) * p.mass).collect();
    let diffs: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let cauchy_trend = diffs.windows(2).all(|w| w[1] <= w[0]);

    let (small_mass_ratio, one_err, two_err) = match small.mass(first.mu) {
        Some((one, two)) => (
            Some(first.mass * first.mu.powf(-small.leading_exponent.unwrap()) / small.q_mass.unwrap()),
            Some((first.mass - one).abs() / first.mass),
            Some((first.mass - two).abs() / first.mass),
        ),
        None => (None, None, None),
    };

    Ok(ComparisonReport {
        mu_over_mustar_last: last.mu / ms,
        mass_ratio: gap.powi(d as i32) * last.mass / large.lambda,
        mass_derivative_ratio: gap.powi(d as i32 + 1) * last.mp_lin / (dd * large.lambda),
        radius_ratio_raw: r_g * gap / large.rho,
        radius_ratio: (r_g + offset) * gap / large.rho,
        gamma_offset: offset,
        eigenvalue_ratio: last.lambda1 * r_g * r_g / -(dd - 1.0),
        gamma_sensitivity: (r_q - r_g).abs() / r_g,
        profile_gap: profile_gap / bs,
        eigenfunction_gap,
        cauchy_trend,
        mu_over_mustar_first: first.mu / ms,
        small_mass_ratio,
        small_one_term_error: one_err,
        small_two_term_error: two_err,
        small_mp_sign: first.mp_lin.signum(),
        small_mp_sign_expected: small.mp_sign_near_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quintic_cubic_constants() {
        let m = large_mu_model(5.0, 3.0, 3).unwrap();
        // |G*(s)| = (s²/6)(s² - 3/4)² integrates to 9/(64√6)
        assert_relative_eq!(m.quad_integral, 9.0 / (64.0 * 6f64.sqrt()), max_relative = 1e-12);
        assert_relative_eq!(m.rho, 3f64.sqrt() / 4.0, max_relative = 1e-12);
        assert!((m.lambda - 0.25507).abs() < 5e-5, "{}", m.lambda);
        assert_relative_eq!(lambda_closed_form(m.beta_star, 3, m.quad_integral), m.lambda, max_relative = 1e-12);
    }

    #[test]
    fn g_star_series_matches_direct_form() {
        for &(p, q) in &[(5.0, 3.0), (7.0 / 3.0, 5.0 / 3.0), (2.5, 2.0)] {
            let bs = beta_star(p, q);
            let ms = mu_star(p, q);
            for &f in &[0.96, 0.97, 1.03, 1.04] {
                let s: f64 = f * bs;
                let direct = -(-s.powf(p + 1.0) / (p + 1.0) + s.powf(q + 1.0) / (q + 1.0) - 0.5 * ms * s * s);
                assert_relative_eq!(abs_g_star(p, q, s), direct, max_relative = 1e-8);
            }
        }
        let s: f64 = 0.8;
        assert_relative_eq!(abs_g_star(5.0, 3.0, s), s * s / 6.0 * (s * s - 0.75).powi(2), max_relative = 1e-13);
    }

    #[test]
    fn regime_table() {
        let m = small_mu_model(7.0 / 3.0, 5.0 / 3.0, 3).unwrap();
        assert_eq!(m.regime, SobolevRegime::Subcritical);
        assert_relative_eq!(m.leading_exponent.unwrap(), 1.5, max_relative = 1e-14);
        assert!(m.q_mass.unwrap() > 0.0 && m.q_p1.unwrap() > 0.0);
        assert_eq!(m.mp_sign_near_zero, Some(1.0));

        let m = small_mu_model(6.0, 5.0, 3).unwrap();
        assert_eq!(m.regime, SobolevRegime::Critical);
        assert_eq!(m.eps_law, Some(EpsLaw::Power(1.0 / 3.0)));

        let m = small_mu_model(5.0, 3.0, 5).unwrap();
        assert_eq!(m.regime, SobolevRegime::Supercritical);
        assert_eq!(m.mass_limit, Limit::Finite);
        assert_eq!(m.mp_limit, Some(Limit::MinusInfinity));

        assert_eq!(small_mu_model(2.5, 2.0, 7).unwrap().in_negative_window, Some(true));
        let m = small_mu_model(5.0, 3.0, 7).unwrap();
        assert_eq!((m.in_negative_window, m.mp_sign_near_zero), (Some(false), None));
    }

    #[test]
    fn cubic_nls_mass_in_two_dimensions() {
        // Townes soliton mass ≈ 11.7009
        let (m, _) = nls_integrals(5.0, 3.0, 2).unwrap();
        assert_relative_eq!(m, 11.700_9, max_relative = 1e-5);
    }

    #[test]
    fn u_star_is_a_heteroclinic() {
        let bs = beta_star(5.0, 3.0);
        let us = UStar::new(5.0, 3.0, 0.5 * bs).unwrap();
        assert_relative_eq!(us.eval(0.0).0, 0.5 * bs, max_relative = 1e-12);
        let mut prev = f64::INFINITY;
        // beyond r ≈ -40 the gap to β* is below rounding
        for i in 0..=400 {
            let r = -40.0 + 0.3 * i as f64;
            let (u, du) = us.eval(r);
            assert!(u < prev && du < 0.0, "r = {r}");
            prev = u;
            assert!(us.first_integral_residual(r).abs() < 1e-9);
        }
        assert!(us.eval(-60.0).0 > bs * (1.0 - 1e-9));
        assert!(us.eval(80.0).0 < 1e-15);
    }

    #[test]
    fn u_star_matches_closed_form() {
        // p = 5, q = 3: U² = β*² / (1 + e^{2ar + c}) with a = √μ* solves U' = -√(2|G*|)
        let bs = beta_star(5.0, 3.0);
        let a = mu_star(5.0, 3.0).sqrt();
        let us = UStar::new(5.0, 3.0, 0.5 * bs).unwrap();
        // anchor U(0) = β*/2 gives e^c = 3
        for &r in &[-8.0, -2.0, 0.7, 5.0, 12.0] {
            let exact = bs / (1.0 + 3.0 * (2.0 * a * r).exp()).sqrt();
            assert_relative_eq!(us.eval(r).0, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn equimolar_offset_is_anchor_covariant() {
        let bs = beta_star(5.0, 3.0);
        let a = UStar::new(5.0, 3.0, 0.5 * bs).unwrap();
        let b = UStar::new(5.0, 3.0, 0.25 * bs).unwrap();
        // U_b(r) = U_a(r + s) with U_a(s) = β*/4
        let s = brent_anchor(&a, 0.25 * bs);
        assert_relative_eq!(b.equimolar_offset().unwrap(), a.equimolar_offset().unwrap() - s, epsilon = 1e-8);
    }

    fn brent_anchor(us: &UStar, level: f64) -> f64 {
        crate::numerics::brent(|r| us.eval(r).0 - level, -50.0, 50.0, 1e-14).unwrap()
    }

    #[test]
    fn sobolev_energy_matches_critical_power_integral() {
        // ΔS + S^{(d+2)/(d-2)} = 0 gives ∫|∇S|² = ∫S^{2d/(d-2)}
        for d in [3u32, 4, 5] {
            let dd = d as f64;
            let e = sobolev_critical_energy(d).unwrap();
            let pw = 2.0 * dd / (dd - 2.0);
            let v = quadrature::integrate(
                |t: f64| {
                    if t >= 1.0 {
                        return 0.0;
                    }
                    let r = t / (1.0 - t);
                    sobolev_optimizer(d, r).0.powf(pw) * r.powi(d as i32 - 1) / ((1.0 - t) * (1.0 - t))
                },
                0.0,
                1.0,
                1e-14,
                1e-12,
            )
            .unwrap();
            assert_relative_eq!(e, sphere_area(d) * v / dd, max_relative = 1e-9);
        }
    }
}
