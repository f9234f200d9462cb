//! The fixed-mass minimization landscape reduced to the branch: I(λ) = min(0, I_k(λ))
//! over the increasing pieces of M, the critical mass λ_c, one-sided derivatives of
//! I, and the Gagliardo–Nirenberg-type constant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::nls_integrals;
use crate::branch::BranchCurve;
use crate::error::{Error, Result};
use crate::nonlinearity::{mass_regime, MassRegime};
use crate::numerics::{brent, hermite};
use crate::profile::fmt17;

/// One node of a segment: μ, M, M', E.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub mu: f64,
    pub mass: f64,
    pub mp: f64,
    pub energy: f64,
}

/// A maximal μ-interval on which M increases. `I_k` is carried as its values at the
/// nodes, obtained by integrating `I_k' = -μ_k(λ)/2` through the cubic Hermite cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub nodes: Vec<Node>,
    /// I_k at each node.
    pub i_nodes: Vec<f64>,
}

impl Segment {
    pub fn mass_range(&self) -> (f64, f64) {
        (self.nodes[0].mass, self.nodes.last().unwrap().mass)
    }

    pub fn mu_range(&self) -> (f64, f64) {
        (self.nodes[0].mu, self.nodes.last().unwrap().mu)
    }

    fn cell_mass(&self, j: usize, mu: f64) -> (f64, f64) {
        let (a, b) = (&self.nodes[j], &self.nodes[j + 1]);
        hermite(a.mu, b.mu, a.mass, b.mass, a.mp, b.mp, mu)
    }

    /// `∫_{μ_a}^{μ} t M'(t) dt` on cell j; the integrand is cubic, so Simpson is exact.
    fn cell_moment(&self, j: usize, mu: f64) -> f64 {
        let a = self.nodes[j].mu;
        let m = 0.5 * (a + mu);
        let f = |t: f64| t * self.cell_mass(j, t).1;
        (mu - a) / 6.0 * (f(a) + 4.0 * f(m) + f(mu))
    }

    /// μ_k(λ) and the cell containing it.
    pub fn mu_of_lambda(&self, lambda: f64) -> Option<(usize, f64)> {
        let (lo, hi) = self.mass_range();
        if lambda < lo || lambda > hi {
            return None;
        }
        let j = self.nodes.partition_point(|n| n.mass <= lambda).clamp(1, self.nodes.len() - 1) - 1;
        let (a, b) = (&self.nodes[j], &self.nodes[j + 1]);
        if lambda == a.mass {
            return Some((j, a.mu));
        }
        if lambda == b.mass {
            return Some((j, b.mu));
        }
        let mu = brent(|mu| self.cell_mass(j, mu).0 - lambda, a.mu, b.mu, 1e-15 * b.mu)?;
        Some((j, mu))
    }

    /// `(I_k(λ), μ_k(λ))`.
    pub fn energy_at(&self, lambda: f64) -> Option<(f64, f64)> {
        let (j, mu) = self.mu_of_lambda(lambda)?;
        Some((self.i_nodes[j] - 0.5 * self.cell_moment(j, mu), mu))
    }

    fn rebuild(&mut self, anchor: (usize, f64, f64)) {
        // anchor: (cell, μ inside it, I there)
        let (ja, mu_a, i_a) = anchor;
        let n = self.nodes.len();
        let mut vals = vec![0.0; n];
        vals[ja] = i_a + 0.5 * self.cell_moment(ja, mu_a);
        for j in ja + 1..n {
            vals[j] = vals[j - 1] - 0.5 * self.cell_moment(j - 1, self.nodes[j].mu);
        }
        for j in (0..ja).rev() {
            vals[j] = vals[j + 1] + 0.5 * self.cell_moment(j, self.nodes[j + 1].mu);
        }
        self.i_nodes = vals;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLandscape {
    pub p: f64,
    pub q: f64,
    pub d: u32,
    pub mass_regime: MassRegime,
    pub segments: Vec<Segment>,
    pub lambda_c: f64,
    /// μ where E crosses zero on the stable piece (mass-supercritical case).
    pub e_zero_mu: Option<f64>,
    /// λ_c rests on the E-zero characterization, which presumes a single zero of M'.
    pub lambda_c_conditional: bool,
    pub theta: f64,
    pub c_gn: Option<f64>,
    /// Smallest sampled mass: below it, and above λ_c, I(λ) is not resolved.
    pub mass_floor: f64,
    pub mass_ceiling: f64,
}

pub fn theta(p: f64, q: f64, d: u32) -> f64 {
    let dd = d as f64;
    (q - 1.0 - 4.0 / dd) / (p - 1.0 - 4.0 / dd)
}

/// Best constant of `‖u‖_{q+1}^{q+1} ≤ C ‖u‖₂^{q-1-θ(p-1)} ‖∇u‖₂^{2(1-θ)} ‖u‖_{p+1}^{θ(p+1)}`.
pub fn gn_constant(p: f64, q: f64, d: u32, lambda_c: f64) -> Result<f64> {
    let dd = d as f64;
    if mass_regime(q, d) == MassRegime::MassSub {
        return Err(Error::Regime(format!("q = {q} < 1 + 4/d: the constant is not defined this way")));
    }
    if !(lambda_c > 0.0) {
        return Err(Error::Parameter(format!("lambda_c = {lambda_c} must be positive")));
    }
    if mass_regime(q, d) == MassRegime::MassCritical {
        return Ok((dd + 2.0) / dd * lambda_c.powf(-2.0 / dd));
    }
    let th = theta(p, q, d);
    Ok((q + 1.0) * (dd * p - dd - 4.0) / 2.0
        * (1.0 / (dd * (p - q))).powf(1.0 - th)
        * (2.0 / ((p + 1.0) * (dd * q - dd - 4.0))).powf(th)
        * lambda_c.powf((1.0 + th * (p - 1.0) - q) / 2.0))
}

/// The Gagliardo–Nirenberg-type quotient from `∫u²`, `∫|∇u|²`, `∫u^{q+1}`, `∫u^{p+1}`.
pub fn gn_quotient(p: f64, q: f64, d: u32, mass: f64, kinetic: f64, int_q1: f64, int_p1: f64) -> f64 {
    let th = theta(p, q, d);
    int_q1 / (mass.powf(0.5 * (q - 1.0 - th * (p - 1.0))) * kinetic.powf(1.0 - th) * int_p1.powf(th))
}

fn curve_nodes(curve: &BranchCurve) -> Vec<Node> {
    curve
        .valid_points()
        .iter()
        .map(|p| Node { mu: p.mu, mass: p.mass, mp: p.mp_lin, energy: p.energy })
        .collect()
}

/// Node where M' crosses zero between two samples: linear zero of M', Hermite M and E.
fn turning_node(a: &Node, b: &Node) -> Node {
    let mu = a.mu - a.mp * (b.mu - a.mu) / (b.mp - a.mp);
    let mass = hermite(a.mu, b.mu, a.mass, b.mass, a.mp, b.mp, mu).0;
    let (ea, eb) = (-0.5 * a.mu * a.mp, -0.5 * b.mu * b.mp);
    let energy = hermite(a.mu, b.mu, a.energy, b.energy, ea, eb, mu).0;
    Node { mu, mass, mp: 0.0, energy }
}

pub fn energy_landscape(curve: &BranchCurve) -> Result<EnergyLandscape> {
    let nodes = curve_nodes(curve);
    if nodes.len() < 2 {
        return Err(Error::Landscape("curve has fewer than two valid points".into()));
    }
    let (p, q, d) = (curve.p, curve.q, curve.d);
    let mut segments: Vec<Segment> = Vec::new();
    let mut current: Vec<Node> = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        if n.mp > 0.0 {
            if current.is_empty() && i > 0 && nodes[i - 1].mp < 0.0 {
                current.push(turning_node(&nodes[i - 1], n));
            }
            current.push(*n);
        } else if !current.is_empty() {
            if n.mp < 0.0 {
                current.push(turning_node(&nodes[i - 1], n));
            }
            segments.push(Segment { nodes: std::mem::take(&mut current), i_nodes: Vec::new() });
        }
    }
    if !current.is_empty() {
        segments.push(Segment { nodes: current, i_nodes: Vec::new() });
    }
    segments.retain(|s| s.nodes.len() >= 2);
    if segments.is_empty() {
        return Err(Error::Landscape("M is nowhere increasing on the sampled curve".into()));
    }

    let regime = mass_regime(q, d);
    let mut e_zero_mu = None;
    let mut e_zero_anchor: Option<(usize, usize, f64)> = None;
    let lambda_c = match regime {
        MassRegime::MassSub => 0.0,
        MassRegime::MassCritical => nls_integrals(p, q, d)?.0,
        MassRegime::MassSuper => {
            // E decreases along the last segment toward -∞; find its zero there
            let (k, seg) = (segments.len() - 1, segments.last().unwrap());
            let cell = seg.nodes.windows(2).position(|w| w[0].energy >= 0.0 && w[1].energy < 0.0).ok_or_else(|| {
                Error::Landscape(format!(
                    "E has no sign change on the stable piece μ ∈ [{}, {}]; extend the grid toward smaller μ",
                    seg.nodes[0].mu,
                    seg.nodes.last().unwrap().mu
                ))
            })?;
            let (a, b) = (&seg.nodes[cell], &seg.nodes[cell + 1]);
            let (ea, eb) = (-0.5 * a.mu * a.mp, -0.5 * b.mu * b.mp);
            let mu0 = brent(|mu| hermite(a.mu, b.mu, a.energy, b.energy, ea, eb, mu).0, a.mu, b.mu, 1e-15 * b.mu)
                .ok_or_else(|| Error::Landscape("E zero polish failed".into()))?;
            e_zero_mu = Some(mu0);
            e_zero_anchor = Some((k, cell, mu0));
            hermite(a.mu, b.mu, a.mass, b.mass, a.mp, b.mp, mu0).0
        }
    };
    for (k, seg) in segments.iter_mut().enumerate() {
        match e_zero_anchor {
            Some((kz, cell, mu0)) if kz == k => seg.rebuild((cell, mu0, 0.0)),
            _ => {
                let e0 = seg.nodes[0].energy;
                seg.rebuild((0, seg.nodes[0].mu, e0));
            }
        }
    }
    let th = theta(p, q, d);
    let c_gn = if regime == MassRegime::MassSub { None } else { Some(gn_constant(p, q, d, lambda_c)?) };
    let mass_floor = nodes.iter().map(|n| n.mass).fold(f64::INFINITY, f64::min);
    let mass_ceiling = nodes.iter().map(|n| n.mass).fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyLandscape {
        p,
        q,
        d,
        mass_regime: regime,
        segments,
        lambda_c,
        e_zero_mu,
        lambda_c_conditional: regime == MassRegime::MassSuper,
        theta: th,
        c_gn,
        mass_floor,
        mass_ceiling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IValue {
    pub lambda: f64,
    pub i: f64,
    pub minimizing_mus: Vec<f64>,
    pub di_left: f64,
    pub di_right: f64,
}

pub fn i_of_lambda(land: &EnergyLandscape, lambda: f64) -> Result<IValue> {
    if !(lambda >= 0.0) || lambda > land.mass_ceiling {
        return Err(Error::Range(format!("lambda = {lambda} outside [0, {}]", land.mass_ceiling)));
    }
    let zero = IValue { lambda, i: 0.0, minimizing_mus: Vec::new(), di_left: 0.0, di_right: 0.0 };
    if lambda <= land.lambda_c {
        return Ok(zero);
    }
    if lambda < land.mass_floor {
        return Err(Error::Range(format!(
            "lambda = {lambda} lies between lambda_c = {} and the smallest sampled mass {}",
            land.lambda_c, land.mass_floor
        )));
    }
    let cands: Vec<(f64, f64)> = land.segments.iter().filter_map(|s| s.energy_at(lambda)).collect();
    let best = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    if !(best < 0.0) {
        return Ok(zero);
    }
    let tol = 1e-8 * best.abs();
    let mut mus: Vec<f64> = cands.iter().filter(|c| c.0 <= best + tol).map(|c| c.1).collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(IValue {
        lambda,
        i: best,
        di_left: -0.5 * mus[0],
        di_right: -0.5 * mus[mus.len() - 1],
        minimizing_mus: mus,
    })
}

/// `max |I_k'| < min |I_{k+1}'|` for consecutive segments.
pub fn slopes_ordered(land: &EnergyLandscape) -> bool {
    land.segments.windows(2).all(|w| w[0].mu_range().1 < w[1].mu_range().0)
}

pub const LANDSCAPE_CSV_HEADER: &str = "lambda,I,n_minimizers,dI_left,dI_right";

pub fn write_landscape_csv<W: Write>(values: &[IValue], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LANDSCAPE_CSV_HEADER}")?;
    for v in values {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt17(v.lambda),
            fmt17(v.i),
            v.minimizing_mus.len(),
            fmt17(v.di_left),
            fmt17(v.di_right)
        )?;
    }
    Ok(())
}

/// Geometric λ grid from just above `max(λ_c, floor)` to the ceiling.
pub fn lambda_grid(land: &EnergyLandscape, n: usize) -> Vec<f64> {
    let lo = land.lambda_c.max(land.mass_floor) * (1.0 + 1e-9);
    let hi = land.mass_ceiling;
    (0..n).map(|i| (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).min(hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{BranchPoint, GridSpec, PointStatus};
    use approx::assert_relative_eq;

    #[test]
    fn lambda_grid_stays_inside_mass_range() {
        let land = energy_landscape(&synthetic(-0.01)).unwrap();
        let grid = lambda_grid(&land, 200);
        assert_eq!(*grid.last().unwrap(), land.mass_ceiling);
        for &l in &grid {
            i_of_lambda(&land, l).unwrap();
        }
    }

    #[test]
    fn theta_for_quintic_cubic() {
        assert_relative_eq!(theta(5.0, 3.0, 3), 0.25, max_relative = 1e-14);
        assert_eq!(theta(5.0, 3.0, 2), 0.0);
    }

    #[test]
    fn gn_constant_mass_critical_limit() {
        let c = gn_constant(5.0, 3.0, 2, 11.7).unwrap();
        assert_relative_eq!(c, 2.0 / 11.7, max_relative = 1e-14);
        // the general formula tends to the same value as q ↓ 1 + 4/d
        let near = gn_constant(5.0, 3.0 + 1e-9, 2, 11.7).unwrap();
        assert_relative_eq!(near, c, max_relative = 1e-6);
        assert!(matches!(gn_constant(7.0 / 3.0, 5.0 / 3.0, 3, 1.0), Err(Error::Regime(_))));
    }

    #[test]
    fn gn_quotient_is_scale_invariant() {
        // for u = A φ(x/ℓ): ∫u² ∝ A²ℓ^d, ∫|∇u|² ∝ A²ℓ^{d-2}, ∫u^s ∝ A^s ℓ^d
        let (p, q, d) = (5.0, 3.0, 3u32);
        let base = gn_quotient(p, q, d, 2.0, 3.0, 5.0, 7.0);
        let (a, l) = (1.7f64, 0.6f64);
        let dd = d as f64;
        let v = gn_quotient(
            p,
            q,
            d,
            2.0 * a * a * l.powf(dd),
            3.0 * a * a * l.powf(dd - 2.0),
            5.0 * a.powf(q + 1.0) * l.powf(dd),
            7.0 * a.powf(p + 1.0) * l.powf(dd),
        );
        assert_relative_eq!(v, base, max_relative = 1e-13);
    }

    /// A synthetic curve with M(μ) = (μ - 1)² + 1, E from E' = -μM'/2 with E(0.03) = e0.
    fn synthetic(e0: f64) -> BranchCurve {
        let mus: Vec<f64> = (0..60).map(|i| 0.03 + 0.05 * i as f64).collect();
        let e = |mu: f64| e0 - ((2.0 / 3.0) * mu.powi(3) - mu * mu) / 2.0 + ((2.0 / 3.0) * 0.03f64.powi(3) - 0.03 * 0.03) / 2.0;
        let points = mus
            .iter()
            .map(|&mu| BranchPoint {
                mu,
                y0: 1.0,
                mass: (mu - 1.0).powi(2) + 1.0,
                mp_lin: 2.0 * (mu - 1.0),
                mp_fd: 2.0 * (mu - 1.0),
                mpp_lin: 2.0,
                energy: e(mu),
                ep_fd: -mu * (mu - 1.0),
                kinetic: 1.0,
                int_p1: 1.0,
                int_q1: 1.0,
                beta_ratio: 1.0,
                lambda1: -1.0,
                lambda2: 1.0,
                r_gamma: 1.0,
                pohozaev_res: 0.0,
                status: PointStatus::Ok,
                message: None,
                param: None,
            })
            .collect();
        BranchCurve { p: 7.0 / 3.0, q: 5.0 / 3.0, d: 3, grid_spec: GridSpec::default(), points }
    }

    #[test]
    fn segment_energy_follows_the_multiplier() {
        let land = energy_landscape(&synthetic(-0.01)).unwrap();
        assert_eq!(land.segments.len(), 1);
        assert_eq!(land.lambda_c, 0.0);
        let seg = &land.segments[0];
        assert_relative_eq!(seg.nodes[0].mu, 1.0, epsilon = 1e-12);
        // exact I_k from the closed forms: λ = (μ-1)² + 1
        let exact = |lambda: f64| {
            let mu = 1.0 + (lambda - 1.0).sqrt();
            let e = |m: f64| -((2.0 / 3.0) * m.powi(3) - m * m) / 2.0;
            -0.01 + e(mu) - e(0.03)
        };
        for &lam in &[1.1, 1.5, 2.0, 3.0, 4.5] {
            let (i, mu) = seg.energy_at(lam).unwrap();
            assert_relative_eq!(mu, 1.0 + (lam - 1.0).sqrt(), max_relative = 1e-6);
            assert_relative_eq!(i, exact(lam), max_relative = 1e-6);
        }
        let v = i_of_lambda(&land, 2.0).unwrap();
        assert_eq!(v.minimizing_mus.len(), 1);
        assert_relative_eq!(v.di_left, -0.5 * v.minimizing_mus[0], max_relative = 1e-14);
    }

    #[test]
    fn concave_on_a_grid() {
        let land = energy_landscape(&synthetic(-0.01)).unwrap();
        let grid = lambda_grid(&land, 200);
        let vals: Vec<f64> = grid.iter().map(|&l| i_of_lambda(&land, l).unwrap().i).collect();
        for k in 1..grid.len() - 1 {
            // second divided difference on the non-uniform grid
            let (h0, h1) = (grid[k] - grid[k - 1], grid[k + 1] - grid[k]);
            let dd = ((vals[k + 1] - vals[k]) / h1 - (vals[k] - vals[k - 1]) / h0) * h0 * h1 / (h0 + h1);
            assert!(dd <= 1e-12, "k = {k}: {dd}");
        }
    }

    #[test]
    fn out_of_range_lambda() {
        let land = energy_landscape(&synthetic(-0.01)).unwrap();
        assert!(matches!(i_of_lambda(&land, 1e9), Err(Error::Range(_))));
        assert!(matches!(i_of_lambda(&land, 0.5), Err(Error::Range(_))));
        assert!(matches!(i_of_lambda(&land, -1.0), Err(Error::Range(_))));
    }

    #[test]
    fn csv_schema() {
        let land = energy_landscape(&synthetic(-0.01)).unwrap();
        let vals: Vec<IValue> = lambda_grid(&land, 5).iter().map(|&l| i_of_lambda(&land, l).unwrap()).collect();
        let mut buf = Vec::new();
        write_landscape_csv(&vals, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), LANDSCAPE_CSV_HEADER);
        assert_eq!(text.lines().count(), 6);
    }
}
