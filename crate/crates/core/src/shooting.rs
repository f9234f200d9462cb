//! Shooting for the radial ground state of `u'' + (d-1)/r u' + g(u) = 0`.
//!
//! Initial heights are classified by the fate of the trajectory: `SMinus` if u
//! crosses zero, `SPlus` if u' vanishes while u stays positive, `SZero` if the
//! trajectory reaches the origin of the phase plane. The ground state sits on the
//! single SPlus/SMinus transition and is found by bisection.
//!
//! Close to μ* the ground state leaves β_μ only after a plateau of length
//! O(1/(μ*-μ)), so its height differs from β_μ by far less than one ulp. Those
//! heights are parametrized by `t = ln(β_μ - y)`; on the plateau the deficit
//! `w = β_μ - u` obeys the linearized equation, solved through the Riccati
//! variable `ψ = w'/w`.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{roots, Mode, ProblemParams};
use crate::ode::{self, Control, Step, Tolerances};
use crate::profile::{Integrals, RadialProfile, ShootParam, SolveInfo, Tail};

/// Deficit below which the plateau is described by the linearized equation.
const LINEAR_DEFICIT: f64 = 1e-8;
/// Level (relative to y0) at which the analytic tail takes over.
const TAIL_LEVEL: f64 = 1e-13;
/// Largest plateau log-growth covered by the Riccati table.
const MAX_LOG_GROWTH: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum radius; `None` means 40 decay lengths past the plateau exit.
    pub r_max: Option<f64>,
    /// Convergence level as a fraction of y0.
    pub conv_threshold: f64,
    /// Relative bracket width target for the bisection.
    pub bisect_tol: f64,
    /// Fraction of y0 below which the tail is attached.
    pub tail_match_frac: f64,
}

impl Default for ShootControls {
    fn default() -> Self {
        ShootControls {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            r_max: None,
            conv_threshold: 1e-9,
            bisect_tol: 1e-13,
            tail_match_frac: 0.05,
        }
    }
}

impl ShootControls {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.rel_tol, self.abs_tol, self.conv_threshold, self.bisect_tol, self.tail_match_frac];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Parameter("shoot controls must be positive and finite".into()));
        }
        if self.tail_match_frac >= 1.0 {
            return Err(Error::Parameter("tail_match_frac must be below 1".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 10.0) {
                return Err(Error::Parameter(format!("r_max = {r} must exceed 10")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShootClass {
    SPlus,
    SMinus,
    SZero,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootOutcome {
    pub class: ShootClass,
    pub event_radius: f64,
    /// Sampled `(r, u, u')`.
    pub trajectory: Option<Vec<[f64; 3]>>,
    /// `(r, H(r))` with `H = u'^2/2 + G(u)` at every accepted step.
    pub energy_h: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub initial_value: f64,
    pub initial_derivative: f64,
    pub sign_changes: usize,
    pub first_zero: f64,
    /// `v` and `v'` at the truncation radius, divided by `exp(log_scale)`.
    pub final_value: f64,
    pub final_derivative: f64,
    /// Natural log of the renormalization factor applied to `v`.
    pub log_scale: f64,
    pub truncation_radius: f64,
    pub diverged_to_minus_infinity: bool,
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub pohozaev_residual: f64,
    pub pohozaev_1d_residual: f64,
    pub monotonicity_violations: usize,
    pub bound_violations: usize,
    pub max_energy_increase: f64,
    pub energy_violations: usize,
    /// `|u(r_match) - C e^{-k r} r^{-power}| / y0` and the same for u'.
    pub tail_u_mismatch: f64,
    pub tail_du_mismatch: f64,
    pub integrals: Integrals,
}

/// Riccati solution on the plateau: state `[ψ, L]` with `L' = ψ`, `L(0) = 0`.
struct Plateau {
    k: f64,
    d: f64,
    r0: f64,
    steps: Vec<Step<2>>,
}

impl Plateau {
    fn build(params: &ProblemParams, beta: f64) -> Result<Plateau> {
        let k2 = -params.dg(beta);
        if !(k2 > 0.0) {
            return Err(Error::Precondition(format!("g'(beta_mu) = {} is not negative", -k2)));
        }
        let k = k2.sqrt();
        let d = params.dim();
        let r0 = 1e-4 / k;
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, h_max: 0.25 / k, ..Default::default() };
        let mut steps = Vec::new();
        ode::integrate(
            |r, y: &[f64; 2]| [k2 - y[0] * y[0] - (d - 1.0) * y[0] / r, y[0]],
            r0,
            [k2 * r0 / d, k2 * r0 * r0 / (2.0 * d)],
            f64::MAX,
            &tol,
            2,
            |s| {
                steps.push(*s);
                if s.y1[1] > MAX_LOG_GROWTH {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )?;
        Ok(Plateau { k, d, r0, steps })
    }

    /// `(ψ, L)` at radius `r`.
    fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.r0 {
            let k2 = self.k * self.k;
            return (k2 * r / self.d, k2 * r * r / (2.0 * self.d));
        }
        let i = self.steps.partition_point(|s| s.t1 < r).min(self.steps.len() - 1);
        let y = self.steps[i].eval(r);
        (y[0], y[1])
    }

    /// Radius where `L = target`.
    fn radius_for_growth(&self, target: f64) -> Result<f64> {
        if target <= self.steps[0].y0[1] {
            return Err(Error::Precondition(format!("plateau growth {target} below table start")));
        }
        let i = self.steps.partition_point(|s| s.y1[1] < target);
        if i >= self.steps.len() {
            return Err(Error::Precondition(format!("plateau growth {target} beyond table")));
        }
        Ok(self.steps[i].locate(|_, y| y[1] - target))
    }
}

struct Shooter<'a> {
    params: ProblemParams,
    controls: &'a ShootControls,
    beta: Option<f64>,
    plateau: OnceCell<Plateau>,
}

enum Stop {
    /// Classify the trajectory.
    Classify,
    /// Stop at the first step ending with u below this level (recording run).
    Level(f64),
}

struct Run {
    class: ShootClass,
    event_radius: f64,
    plateau_end: f64,
    nodes: Vec<[f64; 3]>,
    energy: Vec<(f64, f64)>,
}

impl<'a> Shooter<'a> {
    fn new(params: &ProblemParams, controls: &'a ShootControls) -> Result<Self> {
        controls.validate()?;
        let beta = match params.mode {
            Mode::DoublePower => Some(roots(params)?.beta_mu),
            Mode::SinglePowerNls => None,
        };
        Ok(Shooter { params: *params, controls, beta, plateau: OnceCell::new() })
    }

    fn plateau(&self) -> Result<&Plateau> {
        if self.plateau.get().is_none() {
            let p = Plateau::build(&self.params, self.beta.expect("plateau needs beta"))?;
            let _ = self.plateau.set(p);
        }
        Ok(self.plateau.get().unwrap())
    }

    fn height(&self, param: ShootParam) -> f64 {
        match param {
            ShootParam::Height(y) => y,
            ShootParam::LogDeficit(t) => self.beta.unwrap() - t.exp(),
        }
    }

    fn energy(&self, u: f64, du: f64) -> f64 {
        0.5 * du * du + self.params.big_g(u)
    }

    fn run(&self, param: ShootParam, r_max_scale: f64, stop: Stop, record: bool) -> Result<Run> {
        self.run_with(param, r_max_scale, stop, record, 1.0)
    }

    fn run_with(&self, param: ShootParam, r_max_scale: f64, stop: Stop, record: bool, conv_scale: f64) -> Result<Run> {
        let prm = self.params;
        let d = prm.dim();
        let y = self.height(param);
        let below_beta = match (param, self.beta) {
            (ShootParam::LogDeficit(t), Some(b)) => t < b.ln(),
            (ShootParam::LogDeficit(_), None) => {
                return Err(Error::Precondition("log-deficit start needs a double-power problem".into()));
            }
            (ShootParam::Height(_), Some(b)) => y < b,
            (ShootParam::Height(_), None) => true,
        };
        if !(y > 0.0) || !below_beta {
            return Err(Error::Precondition(format!(
                "initial height {y} outside (0, {})",
                self.beta.map_or("inf".to_string(), |b| b.to_string())
            )));
        }

        let mut nodes: Vec<[f64; 3]> = Vec::new();
        let mut energy = Vec::new();
        let (r_start, state, plateau_end) = match param {
            ShootParam::LogDeficit(t) if t < LINEAR_DEFICIT.ln() => {
                let beta = self.beta.unwrap();
                let pl = self.plateau()?;
                let rs = pl.radius_for_growth(LINEAR_DEFICIT.ln() - t)?;
                let point = |r: f64| {
                    let (psi, l) = pl.eval(r);
                    let w = (t + l).exp();
                    [r, beta - w, -w * psi]
                };
                if record {
                    nodes.push([0.0, y, 0.0]);
                    nodes.push(point(0.5 * pl.r0));
                    nodes.push(point(pl.r0));
                    for s in &pl.steps {
                        if s.t0 >= rs {
                            break;
                        }
                        let end = s.t1.min(rs);
                        nodes.push(point(0.5 * (s.t0 + end)));
                        nodes.push(point(end));
                    }
                }
                let (psi, _) = pl.eval(rs);
                let st = [beta - LINEAR_DEFICIT, -LINEAR_DEFICIT * psi];
                energy.push((0.0, self.energy(y, 0.0)));
                (rs, st, rs)
            }
            _ => {
                let gy = prm.g(y);
                if gy <= 0.0 {
                    // u'' (0) ≥ 0: u never decreases below y
                    return Ok(Run {
                        class: ShootClass::SPlus,
                        event_radius: 0.0,
                        plateau_end: 0.0,
                        nodes: if record { vec![[0.0, y, 0.0]] } else { Vec::new() },
                        energy: vec![(0.0, self.energy(y, 0.0))],
                    });
                }
                let h = 1e-4 * (1.0f64).max((1.0 / prm.dg(y).abs()).sqrt());
                let taylor = |r: f64| [r, y - gy * r * r / (2.0 * d), -gy * r / d];
                if record {
                    nodes.push([0.0, y, 0.0]);
                    nodes.push(taylor(0.5 * h));
                    nodes.push(taylor(h));
                }
                energy.push((0.0, self.energy(y, 0.0)));
                let st = taylor(h);
                (h, [st[1], st[2]], 0.0)
            }
        };

        let rate = prm.decay_rate();
        let r_max = match self.controls.r_max {
            Some(r) => r.max(r_start + 1.0) * r_max_scale,
            None => r_start + 40.0 / rate * r_max_scale,
        };
        let conv = self.controls.conv_threshold * conv_scale * y;
        let tol = Tolerances { rtol: self.controls.rel_tol, atol: self.controls.abs_tol * y.max(1e-300).min(1.0), ..Default::default() };
        let mut class = ShootClass::Undetermined;
        let mut event_radius = r_max;

        ode::integrate(
            |r, s: &[f64; 2]| [s[1], -(d - 1.0) / r * s[1] - prm.g(s[0])],
            r_start,
            state,
            r_max,
            &tol,
            2,
            |s| {
                let [u0, du0] = s.y0;
                let [u1, du1] = s.y1;
                let h1 = 0.5 * du1 * du1 + prm.big_g(u1);
                energy.push((s.t1, h1));
                if record {
                    let m = 0.5 * (s.t0 + s.t1);
                    let ym = s.eval(m);
                    nodes.push([m, ym[0], ym[1]]);
                    nodes.push([s.t1, u1, du1]);
                }
                match stop {
                    Stop::Level(level) => {
                        if u1 < level {
                            class = ShootClass::SZero;
                            event_radius = s.t1;
                            return Control::Stop;
                        }
                        if u1 <= 0.0 || du1 >= 0.0 {
                            class = if u1 <= 0.0 { ShootClass::SMinus } else { ShootClass::SPlus };
                            event_radius = s.t1;
                            return Control::Stop;
                        }
                    }
                    Stop::Classify => {
                        if u0 > 0.0 && u1 <= 0.0 {
                            class = ShootClass::SMinus;
                            event_radius = s.locate(|_, y| y[0]);
                            return Control::Stop;
                        }
                        if du0 < 0.0 && du1 >= 0.0 && u1 > conv {
                            class = ShootClass::SPlus;
                            event_radius = s.locate(|_, y| y[1]);
                            return Control::Stop;
                        }
                        if u1 < conv && du1.abs() < conv && h1 > -1e-14 {
                            class = ShootClass::SZero;
                            event_radius = s.t1;
                            return Control::Stop;
                        }
                    }
                }
                Control::Continue
            },
        )?;
        Ok(Run { class, event_radius, plateau_end, nodes, energy })
    }

    /// Classify with up to three doublings of r_max. An SZero verdict is re-checked
    /// with a much smaller threshold, since slowly decaying trajectories can pass
    /// below the default level well before they separate.
    fn classify(&self, param: ShootParam) -> Result<ShootClass> {
        let mut class = ShootClass::Undetermined;
        for conv_scale in [1.0, 1e-4] {
            let mut scale = 1.0;
            for _ in 0..4 {
                class = self.run_with(param, scale, Stop::Classify, false, conv_scale)?.class;
                if class != ShootClass::Undetermined {
                    break;
                }
                scale *= 2.0;
            }
            if class != ShootClass::SZero {
                break;
            }
        }
        Ok(class)
    }
}

/// Classify the initial height `y`, recording the trajectory.
pub fn shoot(params: &ProblemParams, y: f64, controls: &ShootControls) -> Result<ShootOutcome> {
    shoot_param(params, ShootParam::Height(y), controls)
}

/// Classify a start given as a height or as a log-deficit below β_μ.
pub fn shoot_param(params: &ProblemParams, param: ShootParam, controls: &ShootControls) -> Result<ShootOutcome> {
    let sh = Shooter::new(params, controls)?;
    let run = sh.run(param, 1.0, Stop::Classify, true)?;
    Ok(ShootOutcome {
        class: run.class,
        event_radius: run.event_radius,
        trajectory: Some(run.nodes),
        energy_h: run.energy,
    })
}

pub fn solve_ground_state(params: &ProblemParams, controls: &ShootControls) -> Result<RadialProfile> {
    solve_ground_state_with_hint(params, controls, None)
}

/// Bisection bracket: `splus` classifies SPlus, `sminus` SMinus.
#[derive(Clone, Copy)]
enum Bracket {
    Height { splus: f64, sminus: f64 },
    Deficit { splus: f64, sminus: f64 },
}

impl Bracket {
    fn mid(&self) -> ShootParam {
        match *self {
            Bracket::Height { splus, sminus } => ShootParam::Height(0.5 * (splus + sminus)),
            Bracket::Deficit { splus, sminus } => ShootParam::LogDeficit(0.5 * (splus + sminus)),
        }
    }

    fn width(&self) -> f64 {
        match *self {
            Bracket::Height { splus, sminus } => (sminus - splus).abs() / sminus.abs().max(splus.abs()),
            // dy/y = e^t dt/y, but the deficit itself is the resolved quantity
            Bracket::Deficit { splus, sminus } => (sminus - splus).abs() / splus.abs().max(sminus.abs()).max(1.0),
        }
    }

    fn update(&mut self, class: ShootClass) {
        let m = match self.mid() {
            ShootParam::Height(v) | ShootParam::LogDeficit(v) => v,
        };
        match (self, class) {
            (Bracket::Height { splus, .. }, ShootClass::SPlus) => *splus = m,
            (Bracket::Height { sminus, .. }, _) => *sminus = m,
            (Bracket::Deficit { splus, .. }, ShootClass::SPlus) => *splus = m,
            (Bracket::Deficit { sminus, .. }, _) => *sminus = m,
        }
    }

    fn exhausted(&self) -> bool {
        let (a, b) = match *self {
            Bracket::Height { splus, sminus } | Bracket::Deficit { splus, sminus } => (splus, sminus),
        };
        let m = 0.5 * (a + b);
        m == a || m == b
    }
}

fn initial_bracket(sh: &Shooter, hint: Option<ShootParam>) -> Result<Bracket> {
    let cls = |p| sh.classify(p);
    if let Some(h) = hint {
        let candidate = match h {
            ShootParam::Height(y) => {
                let lo = y * 0.95;
                let hi = match sh.beta {
                    Some(b) => (y * 1.05).min(y + 0.5 * (b - y)),
                    None => y * 1.05,
                };
                Bracket::Height { splus: lo, sminus: hi }
            }
            ShootParam::LogDeficit(t) => Bracket::Deficit { splus: t + 0.5, sminus: t - 0.5 },
        };
        let (a, b) = match candidate {
            Bracket::Height { splus, sminus } => (ShootParam::Height(splus), ShootParam::Height(sminus)),
            Bracket::Deficit { splus, sminus } => (ShootParam::LogDeficit(splus), ShootParam::LogDeficit(sminus)),
        };
        let ok_a = sh.height(a) > 0.0 && matches!(cls(a), Ok(ShootClass::SPlus));
        let ok_b = matches!(cls(b), Ok(ShootClass::SMinus));
        if ok_a && ok_b {
            return Ok(candidate);
        }
    }

    match sh.beta {
        None => {
            // single-power NLS: expand from y = 1.1
            let mut y = 1.1;
            let c0 = cls(ShootParam::Height(y))?;
            match c0 {
                ShootClass::SPlus => {
                    for _ in 0..60 {
                        let y2 = 2.0 * y;
                        if cls(ShootParam::Height(y2))? == ShootClass::SMinus {
                            return Ok(Bracket::Height { splus: y, sminus: y2 });
                        }
                        y = y2;
                    }
                }
                ShootClass::SMinus => {
                    for _ in 0..60 {
                        let y2 = 0.5 * y;
                        if cls(ShootParam::Height(y2))? == ShootClass::SPlus {
                            return Ok(Bracket::Height { splus: y2, sminus: y });
                        }
                        y = y2;
                    }
                }
                _ => {}
            }
            Err(Error::Bracket("no S+/S- bracket found for the single-power problem".into()))
        }
        Some(beta) => {
            let rs = roots(&sh.params)?;
            let eta = rs.eta_mu.ok_or_else(|| Error::Precondition("no zero of G: mu >= mu_star".into()))?;
            let split = beta - 1e-3 * (beta - eta);
            let top = cls(ShootParam::Height(split))?;
            if top == ShootClass::SMinus {
                let low = cls(ShootParam::Height(eta))?;
                if low != ShootClass::SPlus {
                    return Err(Error::Bracket(format!("lower end eta_mu = {eta} classifies {low:?}")));
                }
                return Ok(Bracket::Height { splus: eta, sminus: split });
            }
            // ground state lies within 1e-3 (β - η) of β: search in the log-deficit
            let mut t_plus = (beta - split).ln();
            let mut step = 10.0;
            while t_plus - step > -(MAX_LOG_GROWTH - 20.0) {
                let t = t_plus - step;
                match cls(ShootParam::LogDeficit(t))? {
                    ShootClass::SMinus | ShootClass::SZero => return Ok(Bracket::Deficit { splus: t_plus, sminus: t }),
                    ShootClass::SPlus => t_plus = t,
                    ShootClass::Undetermined => {
                        return Err(Error::Bracket(format!("log-deficit {t} undetermined")));
                    }
                }
                step *= 1.5;
            }
            Err(Error::Bracket("ground state deficit below the plateau table range".into()))
        }
    }
}

/// Solve with an optional warm-start hint; the hint bracket (±5% in height or ±0.5 in
/// log-deficit) is used only if it classifies correctly.
pub fn solve_ground_state_with_hint(
    params: &ProblemParams,
    controls: &ShootControls,
    hint: Option<ShootParam>,
) -> Result<RadialProfile> {
    params.ensure_solvable()?;
    let sh = Shooter::new(params, controls)?;
    let mut br = initial_bracket(&sh, hint)?;
    let mut iterations = 0;
    while br.width() > controls.bisect_tol && !br.exhausted() && iterations < 400 {
        let m = br.mid();
        let c = sh.classify(m)?;
        iterations += 1;
        match c {
            ShootClass::SZero => break,
            ShootClass::Undetermined => {
                return Err(Error::Bracket(format!("trial {m:?} undetermined after extending r_max")));
            }
            _ => br.update(c),
        }
    }
    let param = br.mid();
    attach_tail(&sh, param, br.width(), iterations)
}

fn attach_tail(sh: &Shooter, param: ShootParam, width: f64, iterations: usize) -> Result<RadialProfile> {
    let prm = sh.params;
    let d = prm.dim();
    let y = sh.height(param);
    let level = sh.controls.tail_match_frac * y;
    let run = sh.run(param, 4.0, Stop::Level(level), true)?;
    if run.class != ShootClass::SZero {
        return Err(Error::Tail(format!(
            "trajectory left the separatrix ({:?} at r = {}) before u fell below {level}",
            run.class, run.event_radius
        )));
    }
    let mut nodes = run.nodes;
    let [r_j, u_j, du_j] = *nodes.last().unwrap();

    let k = prm.decay_rate();
    let power = 0.5 * (d - 1.0);
    let (s_j, _) = Tail::shape(k, power, r_j);
    let c0 = u_j / s_j;
    let r_far = r_j + (u_j / (TAIL_LEVEL * y)).ln() / k;
    let (s_far, ds_far) = Tail::shape(k, power, r_far);
    let tol = Tolerances {
        rtol: sh.controls.rel_tol,
        atol: sh.controls.rel_tol * TAIL_LEVEL * y * 1e-3,
        ..Default::default()
    };
    let backward = |c: f64, record: Option<&mut Vec<[f64; 3]>>| -> Result<[f64; 2]> {
        let mut rec = record;
        let fin = ode::integrate(
            |r, s: &[f64; 2]| [s[1], -(d - 1.0) / r * s[1] - prm.g(s[0])],
            r_far,
            [c * s_far, c * ds_far],
            r_j,
            &tol,
            2,
            |s| {
                if let Some(v) = rec.as_deref_mut() {
                    let m = 0.5 * (s.t0 + s.t1);
                    let ym = s.eval(m);
                    v.push([m, ym[0], ym[1]]);
                    v.push([s.t1, s.y1[0], s.y1[1]]);
                }
                Control::Continue
            },
        )?;
        Ok(fin.y)
    };
    let secant = |target: f64, comp: usize| -> Result<f64> {
        let mut c_a = c0;
        let mut f_a = backward(c_a, None)?[comp] - target;
        let mut c_b = c0 * (1.0 + 1e-3);
        let mut f_b = backward(c_b, None)?[comp] - target;
        for _ in 0..40 {
            if f_b.abs() <= 1e-14 * target.abs() || f_b == f_a {
                break;
            }
            let c_n = c_b - f_b * (c_b - c_a) / (f_b - f_a);
            c_a = c_b;
            f_a = f_b;
            c_b = c_n;
            f_b = backward(c_b, None)?[comp] - target;
        }
        if !(f_b.abs() <= 1e-10 * target.abs()) {
            return Err(Error::Tail(format!("tail amplitude did not converge (residual {f_b:e})")));
        }
        Ok(c_b)
    };
    let c_u = secant(u_j, 0)?;
    let c_du = secant(du_j, 1)?;
    let mut back = Vec::new();
    let end = backward(c_u, Some(&mut back))?;
    let mismatch = ((end[1] - du_j) / du_j).abs();
    if mismatch > 1e-6 {
        return Err(Error::Tail(format!(
            "junction derivative mismatch {mismatch:e} at r = {r_j}: tail attached too early"
        )));
    }
    // recorded inward from r_far; the last node is r_j, already present
    back.reverse();
    back.remove(0);
    back.push([r_far, c_u * s_far, c_u * ds_far]);
    nodes.extend(back);

    let mut grid = Vec::with_capacity(nodes.len());
    let mut u = Vec::with_capacity(nodes.len());
    let mut du = Vec::with_capacity(nodes.len());
    for n in &nodes {
        grid.push(n[0]);
        u.push(n[1]);
        du.push(n[2]);
    }
    let r_end = *grid.last().unwrap();
    Ok(RadialProfile {
        y0: y,
        grid,
        u,
        du,
        tail: Tail { c: c_u, rate: k, power, r_match: r_end },
        params: prm,
        info: SolveInfo {
            param,
            bracket_width: width,
            iterations,
            r_junction: r_j,
            junction_du_mismatch: mismatch,
            c_from_u: c_u,
            c_from_du: c_du,
            plateau_end: run.plateau_end,
            beta_mu: sh.beta,
        },
    })
}

/// Integrate the linearization `v'' + (d-1)/r v' + g'(u(r)) v = 0`, `v(0) = 1`, `v'(0) = 0`,
/// along the frozen profile.
pub fn linear_variation(params: &ProblemParams, profile: &RadialProfile) -> Result<VariationReport> {
    let prm = *params;
    let d = prm.dim();
    let y0 = profile.y0;
    let dg0 = prm.dg(y0);
    let h = 1e-4 * (1.0f64).max((1.0 / dg0.abs().max(1e-300)).sqrt());
    let r_end = profile.tail.cutoff();
    let tol = Tolerances { rtol: 1e-9, atol: 1e-12, ..Default::default() };

    let mut r = h;
    let mut state = [1.0 - dg0 * h * h / (2.0 * d), -dg0 * h / d];
    let mut log_scale = 0.0f64;
    let mut sign_changes = 0usize;
    let mut first_zero = f64::NAN;
    // ln of the largest |v| before the first zero
    let mut lobe_log_max = 0.0f64;
    let mut diverged = false;
    let threshold = 1e6f64.ln();

    loop {
        let mut rescale = false;
        let mut done = false;
        let ls = log_scale;
        let fin = ode::integrate(
            |r, s: &[f64; 2]| {
                let u = profile.eval(r).0;
                [s[1], -(d - 1.0) / r * s[1] - prm.dg(u) * s[0]]
            },
            r,
            state,
            r_end,
            &tol,
            2,
            |s| {
                let v0 = s.y0[0];
                let v1 = s.y1[0];
                if (v0 > 0.0 && v1 <= 0.0) || (v0 < 0.0 && v1 >= 0.0) {
                    sign_changes += 1;
                    if sign_changes == 1 {
                        first_zero = s.locate(|_, y| y[0]);
                    }
                }
                let lv = v1.abs().ln() + ls;
                if sign_changes == 0 {
                    lobe_log_max = lobe_log_max.max(lv);
                } else if v1 < 0.0 && lv - lobe_log_max > threshold {
                    diverged = true;
                    done = true;
                    return Control::Stop;
                }
                if v1.abs() > 1e100 {
                    rescale = true;
                    return Control::Stop;
                }
                Control::Continue
            },
        )?;
        r = fin.t;
        state = fin.y;
        if rescale {
            let s = state[0].abs();
            state = [state[0] / s, state[1] / s];
            log_scale += s.ln();
            continue;
        }
        if done || !fin.stopped {
            break;
        }
    }
    Ok(VariationReport {
        initial_value: 1.0,
        initial_derivative: 0.0,
        sign_changes,
        first_zero,
        final_value: state[0],
        final_derivative: state[1],
        log_scale,
        truncation_radius: r,
        diverged_to_minus_infinity: diverged,
        nondegenerate: diverged,
    })
}

pub fn diagnostics(profile: &RadialProfile) -> DiagnosticsRecord {
    let prm = profile.params;
    let d = prm.dim();
    let ints = profile.integrals();
    let poho = ((d - 2.0) / (2.0 * d) * ints.kinetic - ints.int_big_g).abs() / (ints.kinetic.abs() + 1.0);
    let t1 = profile.integrate(|_, _, du| du * du, false);
    let g1 = profile.integrate(|_, u, _| prm.big_g(u), false);
    let poho_1d = ((d - 1.5) * t1 - g1).abs() / (t1.abs() + 1.0);

    let n = profile.grid.len();
    let mut mono = 0;
    let mut bounds = 0;
    let mut max_inc = f64::NEG_INFINITY;
    let mut energy_viol = 0;
    let beta = profile.info.beta_mu;
    let h = |i: usize| 0.5 * profile.du[i] * profile.du[i] + prm.big_g(profile.u[i]);
    for i in 0..n {
        let u = profile.u[i];
        let r = profile.grid[i];
        if i > 0 && profile.du[i] > 0.0 {
            mono += 1;
        }
        if i + 1 < n && profile.u[i + 1] > u {
            mono += 1;
        }
        let above = match beta {
            // on the analytic plateau the deficit is positive by construction even when
            // it is below one ulp of β
            Some(b) => u > b || (u == b && r > profile.info.plateau_end),
            None => false,
        };
        if u <= 0.0 || above {
            bounds += 1;
        }
        if i + 1 < n {
            let inc = h(i + 1) - h(i);
            max_inc = max_inc.max(inc);
            if inc > 1e-10 {
                energy_viol += 1;
            }
        }
    }
    let rm = profile.tail.r_match;
    let lead = profile.tail.leading(rm);
    let lead_du = -(profile.tail.rate + profile.tail.power / rm) * lead;
    let (u_end, du_end) = (profile.u[n - 1], profile.du[n - 1]);
    DiagnosticsRecord {
        pohozaev_residual: poho,
        pohozaev_1d_residual: poho_1d,
        monotonicity_violations: mono,
        bound_violations: bounds,
        max_energy_increase: max_inc.max(0.0),
        energy_violations: energy_viol,
        tail_u_mismatch: (u_end - lead).abs() / profile.y0,
        tail_du_mismatch: (du_end - lead_du).abs() / profile.y0,
        integrals: ints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::mu_star;
    use approx::assert_relative_eq;

    fn p53(mu: f64) -> ProblemParams {
        ProblemParams::double_power(5.0, 3.0, 3, mu).unwrap()
    }

    #[test]
    fn alpha_and_eta_are_splus() {
        let prm = p53(0.1);
        let rs = roots(&prm).unwrap();
        let c = ShootControls::default();
        assert_eq!(shoot(&prm, rs.alpha_mu, &c).unwrap().class, ShootClass::SPlus);
        let o = shoot(&prm, rs.eta_mu.unwrap(), &c).unwrap();
        assert_eq!(o.class, ShootClass::SPlus);
        assert!(o.energy_h.last().unwrap().1 < 0.0);
    }

    #[test]
    fn height_above_beta_is_rejected() {
        let prm = p53(0.1);
        let e = shoot(&prm, 0.95, &ShootControls::default()).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn sminus_event_is_a_zero_of_u() {
        let prm = p53(0.1);
        let o = shoot(&prm, 0.94, &ShootControls::default()).unwrap();
        assert_eq!(o.class, ShootClass::SMinus);
        assert!(o.event_radius > 0.0);
    }

    #[test]
    fn ground_state_mu_01() {
        let prm = p53(0.1);
        let prof = solve_ground_state(&prm, &ShootControls::default()).unwrap();
        let rs = roots(&prm).unwrap();
        assert!(prof.y0 > rs.eta_mu.unwrap() && prof.y0 < rs.beta_mu);
        let diag = diagnostics(&prof);
        assert!(diag.pohozaev_residual < 1e-6, "{diag:?}");
        assert!(diag.pohozaev_1d_residual < 1e-6, "{diag:?}");
        assert_eq!(diag.monotonicity_violations, 0);
        assert_eq!(diag.bound_violations, 0);
        assert_eq!(diag.energy_violations, 0);
        assert!(diag.tail_u_mismatch < 1e-9 && diag.tail_du_mismatch < 1e-9, "{diag:?}");
        assert_relative_eq!(prof.info.c_from_u, prof.info.c_from_du, max_relative = 1e-5);
        let var = linear_variation(&prm, &prof).unwrap();
        assert_eq!(var.sign_changes, 1);
        assert!(var.diverged_to_minus_infinity && var.nondegenerate);
        assert_eq!((var.initial_value, var.initial_derivative), (1.0, 0.0));
    }

    #[test]
    fn ground_state_near_mu_star_approaches_beta_star() {
        let prm = p53(0.99 * mu_star(5.0, 3.0));
        let prof = solve_ground_state(&prm, &ShootControls::default()).unwrap();
        assert!((prof.y0 - 0.75f64.sqrt()).abs() < 0.02);
        let diag = diagnostics(&prof);
        assert!(diag.pohozaev_residual < 1e-6, "{diag:?}");
        assert_eq!(diag.bound_violations, 0);
    }

    #[test]
    fn two_dimensional_pohozaev() {
        let prm = ProblemParams::double_power(5.0, 3.0, 2, 0.1).unwrap();
        let prof = solve_ground_state(&prm, &ShootControls::default()).unwrap();
        let ints = prof.integrals();
        assert!(ints.int_big_g.abs() < 1e-6 * (ints.kinetic + 1.0));
    }

    #[test]
    fn tail_stable_under_outward_junction_shift() {
        let prm = p53(0.1);
        let prof = solve_ground_state(&prm, &ShootControls::default()).unwrap();
        let m = prof.integrals().mass;
        // drop the last panel and let the analytic tail cover it
        let mut cut = prof.clone();
        let n = cut.grid.len();
        cut.grid.truncate(n - 2);
        cut.u.truncate(n - 2);
        cut.du.truncate(n - 2);
        cut.tail.r_match = *cut.grid.last().unwrap();
        let m2 = cut.integrals().mass;
        assert_relative_eq!(m, m2, max_relative = 1e-8);
    }

    #[test]
    fn csv_round_trip() {
        let prm = p53(0.1);
        let prof = solve_ground_state(&prm, &ShootControls::default()).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let back = RadialProfile::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.grid, prof.grid);
        assert_eq!(back.u, prof.u);
        assert_eq!(back.tail, prof.tail);
        assert_eq!(back.y0, prof.y0);
    }

    #[test]
    fn bad_controls_rejected() {
        let c = ShootControls { r_max: Some(5.0), ..Default::default() };
        assert!(c.validate().is_err());
        let c = ShootControls { rel_tol: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
