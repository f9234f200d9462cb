//! Radial profiles on a Simpson-panel grid with an analytic exponential tail.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Mode, ProblemParams};
use crate::numerics::{bessel_k_scaled, hermite, locate, quintic_hermite};
use crate::quadrature;

/// Decaying solution of the linearized radial equation `w'' + (d-1)/r w' = k² w`:
///
/// `u(r) = C √(2k/π) r^{-ν} K_ν(kr) = C e^{-kr} r^{-(d-1)/2} (1 + O(1/r))`, ν = d/2 - 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub c: f64,
    pub rate: f64,
    pub power: f64,
    pub r_match: f64,
}

impl Tail {
    /// Unit-amplitude shape and its derivative at `r`.
    pub fn shape(rate: f64, power: f64, r: f64) -> (f64, f64) {
        let nu = power - 0.5;
        let z = rate * r;
        let norm = (2.0 * rate / std::f64::consts::PI).sqrt() * r.powf(-nu) * (-z).exp();
        let k_nu = bessel_k_scaled(nu, z);
        let k_nu1 = bessel_k_scaled(nu + 1.0, z);
        (norm * k_nu, -rate * norm * k_nu1)
    }

    pub fn u(&self, r: f64) -> f64 {
        self.c * Tail::shape(self.rate, self.power, r).0
    }

    pub fn du(&self, r: f64) -> f64 {
        self.c * Tail::shape(self.rate, self.power, r).1
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        let (s, ds) = Tail::shape(self.rate, self.power, r);
        (self.c * s, self.c * ds)
    }

    /// Leading-order form `C e^{-kr} r^{-power}`.
    pub fn leading(&self, r: f64) -> f64 {
        self.c * (-self.rate * r).exp() * r.powf(-self.power)
    }

    /// Radius beyond which tail integrals are negligible (e^{-120} of the match value).
    pub fn cutoff(&self) -> f64 {
        self.r_match + 60.0 / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShootParam {
    /// Initial height y = u(0).
    Height(f64),
    /// t = ln(β_μ - y): resolves heights exponentially close to β_μ.
    LogDeficit(f64),
}

/// Solver bookkeeping attached to a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub param: ShootParam,
    /// Final bracket width in the bisection variable.
    pub bracket_width: f64,
    pub iterations: usize,
    /// Forward/backward junction radius.
    pub r_junction: f64,
    /// Relative u' mismatch at the junction between forward and backward branches.
    pub junction_du_mismatch: f64,
    /// Tail amplitude matched on u and on u' at the junction.
    pub c_from_u: f64,
    pub c_from_du: f64,
    /// End of the analytic plateau (LogDeficit starts), 0 otherwise.
    pub plateau_end: f64,
    /// β_μ for double-power problems.
    pub beta_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub y0: f64,
    /// Nodes `r_0 = 0 < … < r_m`; odd count, each odd node is the midpoint of its panel.
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub tail: Tail,
    pub params: ProblemParams,
    pub info: SolveInfo,
}

/// Integrals every consumer needs, full d-dimensional (|S^{d-1}| r^{d-1} dr).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub mass: f64,
    pub kinetic: f64,
    pub int_p1: f64,
    pub int_q1: f64,
    pub int_big_g: f64,
}

impl RadialProfile {
    pub fn r_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// (u, u') at radius `r` (cubic Hermite on the grid, analytic tail beyond).
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r >= self.r_end() {
            return self.tail.eval(r.max(self.tail.r_match));
        }
        let r = r.max(0.0);
        let i = locate(&self.grid, r);
        // u'' from the ODE keeps Hermite consistent; plain Hermite on (u, u') is enough here
        hermite(self.grid[i], self.grid[i + 1], self.u[i], self.u[i + 1], self.du[i], self.du[i + 1], r)
    }

    /// u'' at grid node `i`, from the equation itself.
    fn second_derivative(&self, i: usize) -> f64 {
        let r = self.grid[i];
        if r == 0.0 {
            -self.params.g(self.u[i]) / self.params.dim()
        } else {
            -(self.params.dim() - 1.0) / r * self.du[i] - self.params.g(self.u[i])
        }
    }

    /// `[u, u', u'']` from the C² quintic Hermite interpolant (u'' from the equation at
    /// the nodes); analytic tail beyond the grid.
    pub fn eval_smooth(&self, r: f64) -> [f64; 3] {
        if r >= self.r_end() {
            let r = r.max(self.tail.r_match);
            let (u, du) = self.tail.eval(r);
            let d = self.params.dim();
            return [u, du, -(d - 1.0) / r * du - self.params.g(u)];
        }
        let r = r.max(0.0);
        let i = locate(&self.grid, r);
        let a = [self.u[i], self.du[i], self.second_derivative(i)];
        let b = [self.u[i + 1], self.du[i + 1], self.second_derivative(i + 1)];
        quintic_hermite(self.grid[i], self.grid[i + 1], a, b, r)
    }

    /// `eval_smooth` at ascending radii, walking the grid once.
    pub fn sample_smooth(&self, rs: &[f64]) -> Vec<[f64; 3]> {
        let n = self.grid.len();
        let mut i = 0;
        let mut cached = usize::MAX;
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        rs.iter()
            .map(|&r| {
                if r >= self.r_end() {
                    return self.eval_smooth(r);
                }
                let r = r.max(0.0);
                while i + 2 < n && self.grid[i + 1] <= r {
                    i += 1;
                }
                if cached != i {
                    (a, b, cached) = (self.node3(i), self.node3(i + 1), i);
                }
                quintic_hermite(self.grid[i], self.grid[i + 1], a, b, r)
            })
            .collect()
    }

    fn node3(&self, i: usize) -> [f64; 3] {
        [self.u[i], self.du[i], self.second_derivative(i)]
    }

    pub fn u_at(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// ∫_0^∞ f(r, u, u') w(r) dr with w = r^{d-1} (weighted) or 1; tail included.
    pub fn integrate<F: Fn(f64, f64, f64) -> f64>(&self, f: F, weighted: bool) -> f64 {
        let dm1 = self.params.d as i32 - 1;
        let w = |r: f64| if weighted { r.powi(dm1) } else { 1.0 };
        let fs: Vec<f64> = (0..self.grid.len())
            .map(|i| f(self.grid[i], self.u[i], self.du[i]) * w(self.grid[i]))
            .collect();
        let body = quadrature::simpson_midpoint_panels(&self.grid, &fs);
        let tail = quadrature::integrate(
            |r| {
                let (u, du) = self.tail.eval(r);
                f(r, u, du) * w(r)
            },
            self.tail.r_match,
            self.tail.cutoff(),
            1e-12 * body.abs().max(1e-300),
            1e-12,
        )
        .unwrap_or_else(|_| {
            // the tail is smooth and tiny; a failed error estimate is not fatal
            quadrature::integrate(
                |r| {
                    let (u, du) = self.tail.eval(r);
                    f(r, u, du) * w(r)
                },
                self.tail.r_match,
                self.tail.cutoff(),
                f64::INFINITY,
                1.0,
            )
            .unwrap_or(0.0)
        });
        body + tail
    }

    /// ∫_{R^d} f(u, |∇u|) dx for radial functions.
    pub fn integrate_full<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> f64 {
        self.params.sphere_area() * self.integrate(f, true)
    }

    pub fn integrals(&self) -> Integrals {
        let prm = self.params;
        let p = prm.p;
        let q = prm.q;
        let mass = self.integrate_full(|_, u, _| u * u);
        let kinetic = self.integrate_full(|_, _, du| du * du);
        let int_p1 = match prm.mode {
            Mode::DoublePower => self.integrate_full(|_, u, _| u.abs().powf(p + 1.0)),
            Mode::SinglePowerNls => f64::NAN,
        };
        let int_q1 = self.integrate_full(|_, u, _| u.abs().powf(q + 1.0));
        let int_big_g = self.integrate_full(|_, u, _| prm.big_g(u));
        Integrals { mass, kinetic, int_p1, int_q1, int_big_g }
    }

    /// Radius where u = γ (u is decreasing); `None` if γ ≥ u(0).
    pub fn radius_at_level(&self, gamma: f64) -> Option<f64> {
        if !(gamma < self.y0) || gamma <= 0.0 {
            return None;
        }
        let n = self.grid.len();
        let mut idx = None;
        for i in 0..n - 1 {
            if self.u[i] >= gamma && self.u[i + 1] < gamma {
                idx = Some(i);
                break;
            }
        }
        match idx {
            Some(i) => {
                let (a, b) = (self.grid[i], self.grid[i + 1]);
                crate::numerics::brent(|r| self.eval(r).0 - gamma, a, b, 1e-14 * b.max(1.0))
            }
            None => {
                // below the grid: inside the analytic tail
                let a = self.r_end();
                let mut b = a + 1.0 / self.tail.rate;
                while self.tail.u(b) > gamma {
                    b += 5.0 / self.tail.rate;
                }
                crate::numerics::brent(|r| self.tail.u(r) - gamma, a, b, 1e-14 * b)
            }
        }
    }

    /// Write the two-section CSV: `# key = value` header lines, then `r,u,du` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut head = String::new();
        let mode = match self.params.mode {
            Mode::DoublePower => "DoublePower",
            Mode::SinglePowerNls => "SinglePowerNls",
        };
        writeln!(head, "# mode = {mode}").unwrap();
        writeln!(head, "# p = {}", fmt17(self.params.p)).unwrap();
        writeln!(head, "# q = {}", fmt17(self.params.q)).unwrap();
        writeln!(head, "# d = {}", self.params.d).unwrap();
        writeln!(head, "# mu = {}", fmt17(self.params.mu)).unwrap();
        writeln!(head, "# y0 = {}", fmt17(self.y0)).unwrap();
        writeln!(head, "# tail_C = {}", fmt17(self.tail.c)).unwrap();
        writeln!(head, "# tail_rate = {}", fmt17(self.tail.rate)).unwrap();
        writeln!(head, "# tail_power = {}", fmt17(self.tail.power)).unwrap();
        writeln!(head, "# tail_r_match = {}", fmt17(self.tail.r_match)).unwrap();
        w.write_all(head.as_bytes())?;
        writeln!(w, "r,u,du")?;
        for i in 0..self.grid.len() {
            writeln!(w, "{},{},{}", fmt17(self.grid[i]), fmt17(self.u[i]), fmt17(self.du[i]))?;
        }
        Ok(())
    }

    /// Read a profile written by [`RadialProfile::write_csv`]. Solver bookkeeping is
    /// not serialized and comes back zeroed.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        let mut grid = Vec::new();
        let mut u = Vec::new();
        let mut du = Vec::new();
        let mut seen_header = false;
        for line in r.lines() {
            let line = line.map_err(|e| Error::Parameter(format!("read error: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Parameter(format!("bad header line: {line}")))?;
                kv.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            if !seen_header {
                if line != "r,u,du" {
                    return Err(Error::Parameter(format!("expected 'r,u,du' header, got {line}")));
                }
                seen_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parameter(format!("bad row: {line}")));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parameter(format!("{s}: {e}")));
            grid.push(parse(cols[0])?);
            u.push(parse(cols[1])?);
            du.push(parse(cols[2])?);
        }
        let get = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| Error::Parameter(format!("missing header key {k}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parameter(format!("{k}: {e}")))
        };
        let mode = match kv.get("mode").map(String::as_str) {
            Some("DoublePower") => Mode::DoublePower,
            Some("SinglePowerNls") => Mode::SinglePowerNls,
            other => return Err(Error::Parameter(format!("bad mode {other:?}"))),
        };
        let params = ProblemParams { mode, p: get("p")?, q: get("q")?, d: get("d")? as u32, mu: get("mu")? };
        let tail = Tail { c: get("tail_C")?, rate: get("tail_rate")?, power: get("tail_power")?, r_match: get("tail_r_match")? };
        let y0 = get("y0")?;
        Ok(RadialProfile {
            y0,
            grid,
            u,
            du,
            tail,
            params,
            info: SolveInfo {
                param: ShootParam::Height(y0),
                bracket_width: 0.0,
                iterations: 0,
                r_junction: 0.0,
                junction_du_mismatch: 0.0,
                c_from_u: tail.c,
                c_from_du: tail.c,
                plateau_end: 0.0,
                beta_mu: None,
            },
        })
    }
}

/// Shortest representation with 17 significant digits for finite values.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{:.16e}", x)
    }
}
