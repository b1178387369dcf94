//! Second-order ODE machinery for `phi'' + V(s) phi = 0`: adaptive
//! Dormand-Prince 5(4) integration with dense output, scale-invariant fluxes,
//! and the distinguished solutions (even solution, end solution, one-sided
//! jump solutions).

use crate::background::{Background, ClosedBasis, EndCondition};
use crate::root::bisect;
use crate::{Error, Result};

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights for the standard DOPRI5 interpolant
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

type Y = [f64; 2];

#[derive(Debug, Clone)]
struct Step {
    s0: f64,
    h: f64,
    cont: [[f64; 2]; 5],
}

impl Step {
    fn eval(&self, s: f64) -> Y {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; 2];
        for i in 0..2 {
            let c = &self.cont;
            y[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        y
    }

    /// d/ds of the interpolant (both components).
    fn eval_d(&self, s: f64) -> Y {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; 2];
        for i in 0..2 {
            let c = &self.cont;
            // d/dth of c0 + th(c1 + th1(c2 + th(c3 + th1 c4)))
            let inner = c[3][i] + th1 * c[4][i];
            let dinner = -c[4][i];
            let mid = c[2][i] + th * inner;
            let dmid = inner + th * dinner;
            y[i] = (c[1][i] + th1 * mid + th * (-mid + th1 * dmid)) / self.h;
        }
        y
    }
}

/// Dense-output solution of `phi'' + V phi = 0` on an oriented interval.
/// `eval` returns `(phi, phi')` anywhere on the interval.
#[derive(Debug, Clone)]
pub struct OdeProfile {
    steps: Vec<Step>,
    s_begin: f64,
    s_end: f64,
    pub tol: f64,
    /// Closed-form backing, when the profile is known exactly.
    closed: Option<(ClosedBasis, f64, f64)>,
}

impl OdeProfile {
    pub fn s_begin(&self) -> f64 {
        self.s_begin
    }
    pub fn s_end(&self) -> f64 {
        self.s_end
    }

    fn forward(&self) -> bool {
        self.s_end >= self.s_begin
    }

    pub fn contains(&self, s: f64) -> bool {
        let (a, b) = if self.forward() {
            (self.s_begin, self.s_end)
        } else {
            (self.s_end, self.s_begin)
        };
        s >= a - 1e-12 && s <= b + 1e-12
    }

    /// `(phi, phi')` at `s`.
    pub fn eval(&self, s: f64) -> Y {
        if let Some((basis, a, b)) = self.closed {
            let (e, de) = basis.even(s);
            let (o, doo) = basis.end(s);
            return [a * e + b * o, a * de + b * doo];
        }
        debug_assert!(self.contains(s), "eval outside profile domain");
        // binary search over steps
        let fwd = self.forward();
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let st = &self.steps[mid];
            let end = st.s0 + st.h;
            if (fwd && s > end) || (!fwd && s < end) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        self.steps[lo].eval(s)
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }
    pub fn dphi(&self, s: f64) -> f64 {
        self.eval(s)[1]
    }

    /// `phi''(s)`, from the exact derivative of the dense interpolant of
    /// `phi'` (closed-form profiles differentiate exactly).
    pub fn ddphi(&self, s: f64) -> f64 {
        if let Some((basis, a, b)) = self.closed {
            // closed basis solves phi'' = -V phi with V = 2 sech^2
            let (e, _) = basis.even(s);
            let (o, _) = basis.end(s);
            let sech2 = 1.0 - s.tanh().powi(2);
            return -2.0 * sech2 * (a * e + b * o);
        }
        let fwd = self.forward();
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let st = &self.steps[mid];
            let end = st.s0 + st.h;
            if (fwd && s > end) || (!fwd && s < end) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        self.steps[lo].eval_d(s)[1]
    }

    /// Midpoints of the accepted steps.
    pub fn step_midpoints(&self) -> Vec<f64> {
        self.steps.iter().map(|st| st.s0 + 0.5 * st.h).collect()
    }

    /// First `s` (in integration order) where `g(s, phi, phi')` changes sign,
    /// located by bisection on the dense output.
    pub fn first_crossing<G: Fn(f64, Y) -> f64>(&self, g: G) -> Option<f64> {
        let n = 8; // samples per step
        let mut prev_s = self.s_begin;
        let mut prev_g = g(prev_s, self.eval(prev_s));
        if prev_g == 0.0 {
            return Some(prev_s);
        }
        for st in &self.steps {
            for j in 1..=n {
                let s = st.s0 + st.h * j as f64 / n as f64;
                let gs = g(s, st.eval(s));
                if gs == 0.0 {
                    return Some(s);
                }
                if gs.signum() != prev_g.signum() {
                    let (mut a, mut b) = (prev_s, s);
                    let ga = prev_g;
                    for _ in 0..90 {
                        let m = 0.5 * (a + b);
                        let gm = g(m, self.eval(m));
                        if gm == 0.0 {
                            return Some(m);
                        }
                        if gm.signum() == ga.signum() {
                            a = m;
                        } else {
                            b = m;
                        }
                        if (b - a).abs() < 1e-15 * (1.0 + m.abs()) {
                            break;
                        }
                    }
                    return Some(0.5 * (a + b));
                }
                prev_s = s;
                prev_g = gs;
            }
        }
        None
    }
}

/// Integrate `phi'' + V phi = 0` from `(s0, y0)` to `s1` (either direction)
/// with dense output.
pub fn integrate_v(v: &dyn Fn(f64) -> f64, s0: f64, y0: Y, s1: f64, tol: f64) -> Result<OdeProfile> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter(format!("tol {tol:.2e} outside [1e-13, 1e-6]")));
    }
    if s0 == s1 {
        return Err(Error::InvalidParameter("empty integration interval".into()));
    }
    // The dense interpolant is one order lower than the step solution; steps
    // are sized for tol/50 so that re-derivatives of the interpolant still
    // satisfy the ODE to ~100 x tol.
    let tol_int = tol / 50.0;
    let f = |s: f64, y: Y| -> Y { [y[1], -v(s) * y[0]] };
    let dir = (s1 - s0).signum();
    let total = (s1 - s0).abs();
    let mut h = dir * (0.01 * total).min(0.1).max(1e-8);
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, y);
    let mut steps = Vec::new();
    let mut nfail = 0usize;
    while (s1 - s) * dir > 0.0 {
        if (s + h - s1) * dir > 0.0 {
            h = s1 - s;
        }
        if h.abs() < 1e-14 * (1.0 + s.abs()) {
            return Err(Error::NonConvergence("step-size underflow".into()));
        }
        let mut k = [[0.0; 2]; 7];
        k[0] = k1;
        for stage in 0..6 {
            let mut ys = y;
            for i in 0..2 {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage + 1) {
                    acc += A[stage][j] * kj[i];
                }
                ys[i] += h * acc;
            }
            k[stage + 1] = f(s + C[stage] * h, ys);
        }
        // 5th-order solution (k[6] is f at the new point, FSAL)
        let mut y1 = y;
        for i in 0..2 {
            let mut acc = 0.0;
            for (j, aj) in A[5].iter().enumerate() {
                acc += aj * k[j][i];
            }
            y1[i] += h * acc;
        }
        // error estimate
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = tol_int + tol_int * y[i].abs().max(y1[i].abs());
            err += (h * e / sc).powi(2);
        }
        err = (err / 2.0).sqrt();
        if err <= 1.0 {
            // accept: build the dense-output polynomial
            let ydiff = [y1[0] - y[0], y1[1] - y[1]];
            let bspl = [h * k[0][0] - ydiff[0], h * k[0][1] - ydiff[1]];
            let mut cont = [[0.0; 2]; 5];
            for i in 0..2 {
                cont[0][i] = y[i];
                cont[1][i] = ydiff[i];
                cont[2][i] = bspl[i];
                cont[3][i] = ydiff[i] - h * k[6][i] - bspl[i];
                let mut dd = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    dd += D[j] * kj[i];
                }
                cont[4][i] = h * dd;
            }
            steps.push(Step { s0: s, h, cont });
            s += h;
            y = y1;
            k1 = k[6];
            nfail = 0;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            nfail += 1;
            if nfail > 60 {
                return Err(Error::NonConvergence("repeated step rejections".into()));
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(OdeProfile { steps, s_begin: s0, s_end: s1, tol, closed: None })
}

/// Integrate on a background, with domain check.
pub fn integrate(
    bg: &Background,
    s0: f64,
    phi0: f64,
    dphi0: f64,
    s1: f64,
    tol: f64,
) -> Result<OdeProfile> {
    let l = bg.half_length;
    if s0.abs() >= l || s1.abs() > l {
        return Err(Error::DomainExit(format!(
            "interval [{s0}, {s1}] leaves (-{l}, {l})"
        )));
    }
    integrate_v(&|s| bg.v(s), s0, [phi0, dphi0], s1, tol)
}

/// Side of a one-sided derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Scale-invariant flux `F_side(s) = d_side phi(s) / phi(s)`, where
/// `d_minus = -d/ds` from the left and `d_plus = +d/ds` from the right.
#[derive(Debug, Clone, Copy)]
pub struct Flux {
    pub value: f64,
    pub side: Side,
    pub latitude: f64,
}

/// Flux of a smooth profile at `s`; errors on a zero of `phi`.
pub fn flux(profile: &OdeProfile, s: f64, side: Side) -> Result<Flux> {
    let [phi, dphi] = profile.eval(s);
    if phi == 0.0 || !phi.is_finite() {
        return Err(Error::InvalidParameter(format!("flux pole: phi({s}) = {phi}")));
    }
    let value = match side {
        Side::Plus => dphi / phi,
        Side::Minus => -dphi / phi,
    };
    Ok(Flux { value, side, latitude: s })
}

/// `F_minus(s) = -phi'/phi` of a smooth positive profile.
pub fn flux_minus(profile: &OdeProfile, s: f64) -> f64 {
    let [phi, dphi] = profile.eval(s);
    -dphi / phi
}

/// `F_plus(s) = phi'/phi`.
pub fn flux_plus(profile: &OdeProfile, s: f64) -> f64 {
    let [phi, dphi] = profile.eval(s);
    dphi / phi
}

/// Solution with `H(s_bar) = 1` and `F_plus(s_bar) = f`, extended forward to
/// the domain end (or a practical horizon on infinite backgrounds).
pub fn h_solution(bg: &Background, f: f64, s_bar: f64, tol: f64) -> Result<OdeProfile> {
    let horizon = end_latitude(bg, s_bar);
    integrate(bg, s_bar, 1.0, f, horizon, tol)
}

fn end_latitude(bg: &Background, from: f64) -> f64 {
    if bg.is_infinite() {
        (from + 45.0).max(45.0)
    } else {
        bg.half_length * (1.0 - 1e-12)
    }
}

/// Two-sided solution with data `phi(s_bar) = a`, `phi'(s_bar) = b`,
/// integrated over the whole symmetric domain; returned as (left, right)
/// profiles meeting at `s_bar`.
pub fn phi_bar(bg: &Background, a: f64, b: f64, s_bar: f64, tol: f64) -> Result<TwoSided> {
    let right = integrate(bg, s_bar, a, b, end_latitude(bg, s_bar), tol)?;
    let left = integrate(bg, s_bar, a, b, -end_latitude(bg, s_bar), tol)?;
    Ok(TwoSided { left, right, s_bar })
}

/// Even-about-`s_bar` jump solution: `j(s_bar) = 0` with one-sided
/// derivatives `d_plus j = d_minus j = c` (a concave-corner kink) and the ODE
/// away from `s_bar`.
pub fn j_bar(bg: &Background, c: f64, s_bar: f64, tol: f64) -> Result<TwoSided> {
    let right = integrate(bg, s_bar, 0.0, c, end_latitude(bg, s_bar), tol)?;
    let left_target = if s_bar > 1e-14 { 0.0 } else { -end_latitude(bg, s_bar) };
    let left = integrate(bg, s_bar, 0.0, -c, left_target.min(s_bar - 1e-9), tol)?;
    Ok(TwoSided { left, right, s_bar })
}

/// A profile defined on both sides of a distinguished latitude.
#[derive(Debug, Clone)]
pub struct TwoSided {
    pub left: OdeProfile,
    pub right: OdeProfile,
    pub s_bar: f64,
}

impl TwoSided {
    pub fn eval(&self, s: f64) -> Y {
        if s >= self.s_bar {
            self.right.eval(s)
        } else {
            self.left.eval(s)
        }
    }
    pub fn phi(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }
}

/// The even solution `phi_even = H[0; 0]`, as a forward profile on `[0, end)`.
pub fn phi_even(bg: &Background, tol: f64) -> Result<OdeProfile> {
    h_solution(bg, 0.0, 0.0, tol)
}

/// The normalized end solution: `phi_end -> 1` and `F_plus -> 0` at the
/// cylinder end.  Exact `tanh s` on backgrounds with the closed catenoid
/// basis; otherwise computed by backward integration from `S_max` with
/// asymptotic data, doubling `S_max` until the flux stabilizes.
pub fn phi_end(bg: &Background, tol: f64) -> Result<OdeProfile> {
    match bg.end {
        EndCondition::SmoothEnds => {}
        _ => {
            return Err(Error::InvalidParameter(
                "phi_end requires a smooth-ends background".into(),
            ))
        }
    }
    if let Some(basis) = bg.closed_basis() {
        return Ok(OdeProfile {
            steps: Vec::new(),
            s_begin: 0.0,
            s_end: bg.horizon(),
            tol,
            closed: Some((basis, 0.0, 1.0)),
        });
    }
    let probes = [1.0, 2.0, 4.0];
    let mut s_max = 20.0;
    let mut prev: Option<([f64; 3], OdeProfile)> = None;
    for _ in 0..8 {
        // tail integral of V from the e^{-2s} asymptote
        let tail = bg.v(s_max) / 2.0;
        let prof = integrate_v(&|s| bg.v(s), s_max, [1.0, tail], 0.0, tol)?;
        let mut fluxes = [0.0; 3];
        for (i, p) in probes.iter().enumerate() {
            fluxes[i] = flux_plus(&prof, *p);
        }
        if let Some((prev_fluxes, _)) = &prev {
            let delta = fluxes
                .iter()
                .zip(prev_fluxes)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if delta < 1e-9 {
                return Ok(prof);
            }
        }
        prev = Some((fluxes, prof));
        s_max *= 2.0;
    }
    Err(Error::NonConvergence("phi_end flux did not stabilize".into()))
}

/// Search for the first zero of a profile's `phi` after `from`; `None` if
/// positive through the profile end.
pub fn first_zero(profile: &OdeProfile, from: f64) -> Option<f64> {
    profile.first_crossing(|s, y| if s < from { 1.0 } else { y[0] })
}

/// Locate `s` in `(lo, hi)` with `F_minus(s) = target` on a smooth positive
/// stretch of the profile (uses monotonicity of `F_minus`).
pub fn latitude_of_flux_minus(
    profile: &OdeProfile,
    lo: f64,
    hi: f64,
    target: f64,
) -> Result<f64> {
    bisect(|s| flux_minus(profile, s) - target, lo, hi, 1e-13)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{make_background, BackgroundId};

    fn catenoid() -> Background {
        make_background(BackgroundId::Catenoid, None).unwrap()
    }

    #[test]
    fn even_solution_matches_closed_form() {
        let bg = catenoid();
        let prof = integrate(&bg, 0.0, 1.0, 0.0, 2.0, 1e-11).unwrap();
        // phi(2) = 1 - 2 tanh 2
        let expect = 1.0 - 2.0 * 2f64.tanh();
        assert!((prof.phi(2.0) - expect).abs() < 1e-10);
        assert!((expect + 0.9280551601516338).abs() < 1e-14);
        // interior dense output
        for i in 1..40 {
            let s = 0.05 * i as f64;
            assert!((prof.phi(s) - (1.0 - s * s.tanh())).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn odd_solution_matches_closed_form() {
        let bg = catenoid();
        let prof = integrate(&bg, 0.0, 0.0, 1.0, 3.0, 1e-11).unwrap();
        assert!((prof.phi(3.0) - 3f64.tanh()).abs() < 1e-10);
        assert!((3f64.tanh() - 0.9950547536867305).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero() {
        let bg = catenoid();
        let prof = integrate(&bg, 0.0, 0.0, 0.0, 2.0, 1e-10).unwrap();
        for i in 0..20 {
            assert_eq!(prof.phi(0.1 * i as f64), 0.0);
        }
    }

    #[test]
    fn backward_integration() {
        let bg = catenoid();
        let prof = integrate(&bg, 2.0, 1.0 - 2.0 * 2f64.tanh(), {
            let t: f64 = 2f64.tanh();
            -t - 2.0 * (1.0 - t * t)
        }, 0.0, 1e-11)
        .unwrap();
        assert!((prof.phi(0.0) - 1.0).abs() < 1e-9);
        assert!(prof.dphi(0.0).abs() < 1e-9);
    }

    #[test]
    fn residual_bounded_by_tolerance() {
        let bg = make_background(BackgroundId::SphericalShrinker, None).unwrap();
        let tol = 1e-10;
        let prof = integrate(&bg, 0.0, 1.0, 0.3, 5.0, tol).unwrap();
        // residual |phi'' + V phi| at re-sampled step midpoints <= 100 x tol
        for s in prof.step_midpoints() {
            let res = prof.ddphi(s) + bg.v(s) * prof.phi(s);
            assert!(res.abs() < 100.0 * tol, "s = {s}, res = {res:.2e}");
        }
    }

    #[test]
    fn flux_scale_invariance_and_pole() {
        let bg = catenoid();
        let p1 = integrate(&bg, 0.0, 1.0, 0.5, 1.0, 1e-10).unwrap();
        let p2 = integrate(&bg, 0.0, -3.7, -1.85, 1.0, 1e-10).unwrap();
        let f1 = flux(&p1, 0.7, Side::Plus).unwrap();
        let f2 = flux(&p2, 0.7, Side::Plus).unwrap();
        assert!((f1.value - f2.value).abs() < 1e-9);
        let z = integrate(&bg, 0.0, 0.0, 0.0, 1.0, 1e-10).unwrap();
        assert!(flux(&z, 0.5, Side::Plus).is_err());
    }

    #[test]
    fn h_solution_initial_conditions() {
        let bg = catenoid();
        let h = h_solution(&bg, 0.37, 0.9, 1e-10).unwrap();
        assert!((h.phi(0.9) - 1.0).abs() < 1e-13);
        assert!((h.dphi(0.9) - 0.37).abs() < 1e-13);
        // phi_even = H[0; 0] = 1 - s tanh s
        let he = phi_even(&bg, 1e-10).unwrap();
        for i in 0..30 {
            let s = 0.04 * i as f64;
            assert!((he.phi(s) - (1.0 - s * s.tanh())).abs() < 1e-9);
        }
    }

    #[test]
    fn h_equals_phi_bar_on_catenoid_right() {
        // H[F; s_bar] = phi_bar[1, F; s_bar] for s >= s_bar
        let bg = catenoid();
        let h = h_solution(&bg, 0.25, 0.6, 1e-10).unwrap();
        let pb = phi_bar(&bg, 1.0, 0.25, 0.6, 1e-10).unwrap();
        for i in 0..20 {
            let s = 0.6 + 0.1 * i as f64;
            assert!((h.phi(s) - pb.phi(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_bar_linear_in_data() {
        let bg = make_background(BackgroundId::SphericalShrinker, None).unwrap();
        let (a1, b1, a2, b2) = (0.3, -0.2, 1.1, 0.7);
        let p1 = phi_bar(&bg, a1, b1, 0.8, 1e-11).unwrap();
        let p2 = phi_bar(&bg, a2, b2, 0.8, 1e-11).unwrap();
        let ps = phi_bar(&bg, a1 + a2, b1 + b2, 0.8, 1e-11).unwrap();
        for i in -25..25 {
            let s = 0.1 * i as f64;
            assert!((p1.phi(s) + p2.phi(s) - ps.phi(s)).abs() < 1e-10, "s = {s}");
        }
    }

    #[test]
    fn j_bar_kink_and_scaled_limit() {
        let bg = catenoid();
        let j = j_bar(&bg, 1.0, 0.9, 1e-11).unwrap();
        assert!(j.phi(0.9).abs() < 1e-14);
        // one-sided derivatives: d/ds = +1 from the right, -1 from the left
        assert!((j.right.dphi(0.9) - 1.0).abs() < 1e-14);
        assert!((j.left.dphi(0.9) + 1.0).abs() < 1e-14);
        // scaled comparison with |s_hat|: sup over |s_hat| <= 3 of
        // |j[c; s_bar](s_bar + s_hat/c) - |s_hat|| <= C / c^2, slope ~ 2
        let s_bar = 0.9;
        let mut errs = Vec::new();
        for c in [20.0, 40.0, 80.0] {
            let j = j_bar(&bg, c, s_bar, 1e-12).unwrap();
            let mut emax = 0.0f64;
            for i in -30..=30 {
                let sh = 0.1 * i as f64;
                let e = (j.phi(s_bar + sh / c) - sh.abs()).abs();
                emax = emax.max(e);
            }
            errs.push(emax);
        }
        let slope1 = (errs[0] / errs[1]).ln() / 2f64.ln();
        let slope2 = (errs[1] / errs[2]).ln() / 2f64.ln();
        assert!(slope1 > 1.6 && slope1 < 2.4, "slope {slope1}");
        assert!(slope2 > 1.6 && slope2 < 2.4, "slope {slope2}");
    }

    #[test]
    fn phi_end_catenoid_exact_and_shrinker_numeric() {
        let bg = catenoid();
        let pe = phi_end(&bg, 1e-10).unwrap();
        for i in 0..=100 {
            let s = 0.1 * i as f64;
            assert!((pe.phi(s) - s.tanh()).abs() < 1e-8, "s = {s}");
        }
        let shr = make_background(BackgroundId::SphericalShrinker, None).unwrap();
        let pe = phi_end(&shr, 1e-11).unwrap();
        // F_+ small at the end, negative value at the equator
        assert!(flux_plus(&pe, 8.0) < 1e-5);
        assert!(pe.phi(0.0) < 0.0);
        // root near the reference value
        let r = first_zero(&pe, 0.0).unwrap();
        assert!((r - 0.4288243092089686).abs() < 1e-6, "root {r}");
        // phi_end root below phi_even root
        let ev = phi_even(&shr, 1e-11).unwrap();
        let re = first_zero(&ev, 0.0).unwrap();
        assert!((re - 0.8169712446901346).abs() < 1e-6, "even root {re}");
        assert!(r < re);
    }

    #[test]
    fn flux_identity_on_intervals() {
        // F_-(b) + F_+(a) = int_a^b (V + F_-^2) ds for positive profiles
        let bg = make_background(BackgroundId::SphericalShrinker, None).unwrap();
        let prof = integrate(&bg, 0.2, 1.0, 0.1, 2.0, 1e-11).unwrap();
        // interval chosen so phi > 0 throughout (first zero is near 0.85)
        let (a, b) = (0.25, 0.7);
        let n = 4000;
        let mut int = 0.0;
        for i in 0..n {
            // midpoint rule
            let s = a + (b - a) * (i as f64 + 0.5) / n as f64;
            let fm = flux_minus(&prof, s);
            int += (bg.v(s) + fm * fm) * (b - a) / n as f64;
        }
        let lhs = flux_minus(&prof, b) + flux_plus(&prof, a);
        assert!((lhs - int).abs() < 1e-6, "identity residual {:.2e}", lhs - int);
    }

    #[test]
    fn wronskian_of_integrated_pair() {
        let bg = catenoid();
        let even = integrate(&bg, 0.0, 1.0, 0.0, 10.0, 1e-12).unwrap();
        let odd = integrate(&bg, 0.0, 0.0, 1.0, 10.0, 1e-12).unwrap();
        for i in 0..=200 {
            let s = 0.05 * i as f64;
            let [e, de] = even.eval(s);
            let [o, doo] = odd.eval(s);
            assert!((e * doo - de * o - 1.0).abs() < 1e-10, "s = {s}");
        }
    }
}
