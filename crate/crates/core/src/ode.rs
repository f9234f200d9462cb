//! Dormand–Prince 5(4) integrator with dense output.
//!
//! The driver hands every accepted step to a callback, which can inspect the
//! continuous extension (for event location) and stop the integration.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-11, atol: 1e-13, h_init: 0.0, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rc: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    /// Dense output at `t ∈ [t0, t1]` (fourth order).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.y0[i]
                + th * (self.rc[0][i] + th1 * (self.rc[1][i] + th * (self.rc[2][i] + th1 * self.rc[3][i])));
        }
        out
    }

    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Locate a sign change of `f(t, y(t))` inside the step by bisection on the dense
    /// output; `f` must have opposite signs at the two ends.
    pub fn locate<F: Fn(f64, &[f64; N]) -> f64>(&self, f: F) -> f64 {
        let (mut a, mut b) = (self.t0, self.t1);
        let mut fa = f(a, &self.y0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            let fm = f(m, &self.eval(m));
            if fm == 0.0 {
                return m;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Finish<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (either direction). Only the first
/// `n_err` components enter the error norm; the remaining ones are passive.
pub fn integrate<const N: usize, F, C>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    n_err: usize,
    mut on_step: C,
) -> Result<Finish<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(&Step<N>) -> Control,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    if span == 0.0 {
        return Ok(Finish { t, y, steps: 0, stopped: false });
    }
    let mut k1 = f(t, &y);
    let mut h = if tol.h_init > 0.0 { tol.h_init } else { initial_step(&f, t, &y, &k1, dir, tol, n_err) };
    h = h.min(tol.h_max).min(span);
    let mut steps = 0usize;
    let mut facold: f64 = 1e-4;
    let mut rejected = false;

    loop {
        if steps >= tol.max_steps {
            return Err(Error::Integration(format!("too many steps ({steps}) at t = {t}")));
        }
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            return Ok(Finish { t, y, steps, stopped: false });
        }
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        let hs = h * dir;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let ynew = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let tnew = if last { t_end } else { t + hs };
        let k7 = f(tnew, &ynew);

        let mut err = 0.0;
        for i in 0..n_err {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n_err.max(1) as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            rejected = true;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration(format!("non-finite state near t = {t}")));
            }
            continue;
        }

        // PI step-size control (Hairer's DOPRI5 constants)
        let beta = 0.04;
        let expo1 = 0.2 - beta * 0.75;
        let fac11 = err.powf(expo1);
        let mut fac = fac11 / facold.powf(beta);
        fac = (fac / 0.9).clamp(1.0 / 10.0, 1.0 / 0.2);
        let hnew = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            steps += 1;
            let mut rc = [[0.0; N]; 4];
            for i in 0..N {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rc[0][i] = ydiff;
                rc[1][i] = bspl;
                rc[2][i] = ydiff - hs * k7[i] - bspl;
                rc[3][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = Step { t0: t, t1: tnew, y0: y, y1: ynew, rc };
            t = tnew;
            y = ynew;
            k1 = k7;
            if let Control::Stop = on_step(&step) {
                return Ok(Finish { t, y, steps, stopped: true });
            }
            if last {
                return Ok(Finish { t, y, steps, stopped: false });
            }
            h = if rejected { hnew.min(h) } else { hnew };
            h = h.min(tol.h_max);
            rejected = false;
        } else {
            h /= (fac11 / 0.9).min(10.0).max(1.0);
            rejected = true;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
    }
}

fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    dir: f64,
    tol: &Tolerances,
    n_err: usize,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n_err {
        let sk = tol.atol + tol.rtol * y[i].abs();
        dnf += (k1[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(tol.h_max);
    let y1 = axpy(y, h * dir, &[(1.0, k1)]);
    let k2 = f(t + h * dir, &y1);
    let mut der2 = 0.0;
    for i in 0..n_err {
        let sk = tol.atol + tol.rtol * y[i].abs();
        der2 += ((k2[i] - k1[i]) / sk).powi(2);
    }
    let der2 = (der2 / n_err.max(1) as f64).sqrt() / h;
    let der12 = der2.max((dnf / n_err.max(1) as f64).sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(tol.h_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_accuracy() {
        let tol = Tolerances { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let fin = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &tol, 2, |_| Control::Continue)
            .unwrap();
        assert_relative_eq!(fin.y[0], 10f64.cos(), max_relative = 1e-9);
        assert_relative_eq!(fin.y[1], -10f64.sin(), max_relative = 1e-9);
    }

    #[test]
    fn backward_integration() {
        let tol = Tolerances { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let fin = integrate(|_, y: &[f64; 1]| [y[0]], 2.0, [1.0], 0.0, &tol, 1, |_| Control::Continue).unwrap();
        assert_relative_eq!(fin.y[0], (-2f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn dense_output_and_event() {
        let tol = Tolerances::default();
        let mut root = None;
        integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 3.0, &tol, 2, |s| {
            if s.y0[0] > 0.0 && s.y1[0] <= 0.0 {
                root = Some(s.locate(|_, y| y[0]));
                return Control::Stop;
            }
            let mid = 0.5 * (s.t0 + s.t1);
            assert!((s.eval(mid)[0] - mid.cos()).abs() < 1e-9);
            Control::Continue
        })
        .unwrap();
        assert_relative_eq!(root.unwrap(), std::f64::consts::FRAC_PI_2, max_relative = 1e-10);
    }
}
