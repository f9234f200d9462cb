//! Independent oracle for the single-power ground state: Chebyshev collocation of
//! `Q'' + (d-1)/x Q' + Q^q - Q = 0` on the symmetric interval [-L, L] with Q(±L) = 0,
//! solved by Newton. An odd node count keeps x = 0 off the grid.

use dpnls::asymptotics::nls_integrals;
use dpnls::numerics::sphere_area;
use dpnls::quadrature::integrate;
use dpnls::shooting::{solve_ground_state, ShootControls};
use dpnls::ProblemParams;
use nalgebra::{DMatrix, DVector};

struct Collocation {
    x: Vec<f64>,
    q: Vec<f64>,
}

impl Collocation {
    fn bary(&self, t: f64) -> f64 {
        let n = self.x.len() - 1;
        let (mut num, mut den) = (0.0, 0.0);
        for (j, (&xj, &qj)) in self.x.iter().zip(&self.q).enumerate() {
            if t == xj {
                return qj;
            }
            let w = if j == 0 || j == n { 0.5 } else { 1.0 } * if j % 2 == 0 { 1.0 } else { -1.0 };
            num += w / (t - xj) * qj;
            den += w / (t - xj);
        }
        num / den
    }
}

fn solve(q: f64, d: u32, half_width: f64, n: usize, amp: f64) -> Collocation {
    assert!(n % 2 == 1);
    let x: Vec<f64> = (0..=n).map(|j| half_width * (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 } * if j % 2 == 0 { 1.0 } else { -1.0 };
    let mut d1 = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d1[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d1[(i, j)]).sum();
        d1[(i, i)] = -s;
    }
    let d2 = &d1 * &d1;
    let dm1 = d as f64 - 1.0;
    let mut lap = d2.clone();
    for i in 0..=n {
        for j in 0..=n {
            lap[(i, j)] += dm1 / x[i] * d1[(i, j)];
        }
    }
    let mut u = DVector::from_iterator(n + 1, x.iter().map(|&t| amp / t.cosh()));
    u[0] = 0.0;
    u[n] = 0.0;
    for _ in 0..60 {
        let lu = &lap * &u;
        let mut res = DVector::zeros(n + 1);
        let mut jac = lap.clone();
        for i in 1..n {
            let v = u[i];
            res[i] = lu[i] + v.abs().powf(q - 1.0) * v - v;
            jac[(i, i)] += q * v.abs().powf(q - 1.0) - 1.0;
        }
        for b in [0, n] {
            for j in 0..=n {
                jac[(b, j)] = if j == b { 1.0 } else { 0.0 };
            }
            res[b] = u[b];
        }
        let step = jac.lu().solve(&res).expect("nonsingular Newton matrix");
        u -= &step;
        if step.amax() < 1e-14 * u.amax() {
            break;
        }
    }
    Collocation { x, q: u.iter().cloned().collect() }
}

fn check(q: f64, d: u32, p: f64) {
    let prof = solve_ground_state(&ProblemParams::single_power_nls(q, d).unwrap(), &ShootControls::default()).unwrap();
    let half_width = 16.0;
    let col = solve(q, d, half_width, 321, prof.y0);
    let s = sphere_area(d);
    let dm1 = d as i32 - 1;
    let mass = s * integrate(|r| col.bary(r).powi(2) * r.powi(dm1), 0.0, half_width, 1e-14, 1e-12).unwrap();
    let int_p1 = s * integrate(|r| col.bary(r).abs().powf(p + 1.0) * r.powi(dm1), 0.0, half_width, 1e-14, 1e-12).unwrap();
    let y0 = col.bary(0.0);
    let (m, mp1) = nls_integrals(p, q, d).unwrap();
    assert!(((prof.y0 - y0) / y0).abs() < 1e-8, "Q(0): shooting {} vs collocation {y0}", prof.y0);
    assert!(((m - mass) / mass).abs() < 1e-8, "mass: shooting {m} vs collocation {mass}");
    assert!(((mp1 - int_p1) / int_p1).abs() < 1e-8, "int Q^(p+1): shooting {mp1} vs collocation {int_p1}");
}

#[test]
fn townes_profile_matches_collocation() {
    check(3.0, 2, 5.0);
}

#[test]
fn mass_subcritical_profile_matches_collocation() {
    check(5.0 / 3.0, 3, 7.0 / 3.0);
}
