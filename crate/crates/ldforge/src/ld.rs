//! Singular linearized-doubling solutions on cylinder backgrounds,
//! synthesized from an RLD average plus Fourier modes with prescribed
//! derivative jumps; mismatch extraction (quadrature and closed-formula
//! routes), the local decomposition into `Ghat + Phihat + Phi'`, and the
//! unbalancing map.

use crate::background::Background;
use crate::cutoff::ramp;
use crate::greens::{circle_log_sum, circle_log_sum_avg, RadialGreen};
use crate::modes::{solve_mode, CircleSource, ModeSolution};
use crate::ode::{self, TwoSided};
use crate::rld::RldSolution;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Lattice parameters on top of an RLD solution: per-circle point counts
/// with alignment signs, the overall scale parameter, and angular
/// dislocations of doubled circles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeParams {
    /// per-circle counts; entries in `{m, -m, -2m}` with `m` their gcd
    pub m_vec: Vec<i64>,
    /// overall log-scale parameter entering the strength normalization
    pub zeta1: f64,
    /// angular offsets of the split sub-lattices on `-2m` circles (radians
    /// in the doubled-frequency normalization); zero elsewhere
    pub xi_circ: Vec<f64>,
}

impl LatticeParams {
    pub fn symmetric(m_vec: Vec<i64>) -> Self {
        let n = m_vec.len();
        LatticeParams { m_vec, zeta1: 0.0, xi_circ: vec![0.0; n] }
    }
}

/// One lattice circle of the configuration.
#[derive(Debug, Clone)]
pub struct Circle {
    pub s: f64,
    pub m_i: i64,
    /// relative strength `tau'_i` (`tau'_1 = 1`)
    pub tau_ratio: f64,
    /// singular-disk radius `1 / (9 |m_i|)`
    pub delta: f64,
    /// angular offsets of the `m`-point sub-lattices forming this circle
    pub offsets: Vec<f64>,
    pub xi_circ: f64,
}

impl Circle {
    /// Representative singular point's angular coordinate.
    pub fn rep_theta(&self) -> f64 {
        self.offsets[0]
    }
}

/// A synthesized LD solution `phi_LD = tau_1 * Phi`, where `Phi` is stored
/// (average `c_scale * rld` plus cosine modes at frequencies `n m`).
pub struct LdSolution {
    pub background: Background,
    pub rld: RldSolution,
    pub circles: Vec<Circle>,
    /// gcd of the circle counts
    pub m: u32,
    pub tau1: f64,
    pub zeta1: f64,
    /// average normalization: `Phi_avg = c_scale * rld`
    pub c_scale: f64,
    pub n_max: u32,
    modes: Vec<Option<ModeSolution>>,
    phases: Vec<Vec<f64>>, // phases[i][n-1]
    j_bars: Vec<TwoSided>,
    phi_log_bars: Vec<TwoSided>,
    greens: Vec<RadialGreen>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Sub-lattice offsets of a circle with count entry `m_i` (gcd `m`).
fn sublattice_offsets(m_i: i64, m: u32, xi_circ: f64) -> Result<Vec<f64>> {
    let mf = m as f64;
    if m_i == m as i64 {
        Ok(vec![0.0])
    } else if m_i == -(m as i64) {
        Ok(vec![PI / mf])
    } else if m_i == -2 * m as i64 {
        let a = (PI + xi_circ) / (2.0 * mf);
        Ok(vec![a, -a])
    } else {
        Err(Error::InvalidParameter(format!(
            "count {m_i} not in {{m, -m, -2m}} for m = {m}"
        )))
    }
}

/// Build a singular LD solution over an RLD average.
pub fn build_ld(bg: &Background, rld: &RldSolution, params: &LatticeParams) -> Result<LdSolution> {
    let k = rld.k;
    if params.m_vec.len() != k {
        return Err(Error::InvalidParameter(format!(
            "m-vector length {} != number of circles {k}",
            params.m_vec.len()
        )));
    }
    if params.xi_circ.len() != k {
        return Err(Error::InvalidParameter("xi_circ length mismatch".into()));
    }
    if params.m_vec.iter().any(|&v| v == 0) {
        return Err(Error::InvalidParameter("zero circle count".into()));
    }
    let m = params.m_vec.iter().fold(0u64, |g, &v| gcd(g, v.unsigned_abs())) as u32;
    for (i, &mi) in params.m_vec.iter().enumerate() {
        if params.xi_circ[i] != 0.0 && mi != -2 * m as i64 {
            return Err(Error::InvalidParameter(
                "angular dislocations require a -2m circle".into(),
            ));
        }
    }

    // normalization: tau'_1 = 1
    let c_scale = params.m_vec[0].unsigned_abs() as f64 / (rld.phi_at[0] * 2.0 * rld.f_mean[0]);
    let tau_ratio: Vec<f64> = (0..k)
        .map(|i| {
            c_scale * rld.phi_at[i] * 2.0 * rld.f_mean[i] / params.m_vec[i].unsigned_abs() as f64
        })
        .collect();
    // strength scale: tau_1 = 2 delta_1 e^{zeta_1} e^{-phi_avg(s_1)}
    let delta1 = 1.0 / (9.0 * params.m_vec[0].unsigned_abs() as f64);
    let phi_s1 = c_scale * rld.phi_at[0];
    let tau1 = 2.0 * delta1 * params.zeta1.exp() * (-phi_s1).exp();

    let circles: Vec<Circle> = (0..k)
        .map(|i| -> Result<Circle> {
            Ok(Circle {
                s: rld.s[i],
                m_i: params.m_vec[i],
                tau_ratio: tau_ratio[i],
                delta: 1.0 / (9.0 * params.m_vec[i].unsigned_abs() as f64),
                offsets: sublattice_offsets(params.m_vec[i], m, params.xi_circ[i])?,
                xi_circ: params.xi_circ[i],
            })
        })
        .collect::<Result<_>>()?;

    // truncation order: decay across the smallest inter-circle gap below
    // 1e-12, a floor covering the neglected potential corrections, cap 512
    let mut gap_min = f64::INFINITY;
    for w in rld.s.windows(2) {
        gap_min = gap_min.min(w[1] - w[0]);
    }
    if rld.s[0] > 0.0 {
        gap_min = gap_min.min(2.0 * rld.s[0]);
    }
    if let crate::background::EndCondition::Periodic = bg.end {
        gap_min = gap_min.min(2.0 * (bg.half_length - rld.s[k - 1]));
    }
    let mf = m as f64;
    let n_decay = if gap_min.is_finite() {
        (27.7 / (mf * gap_min)).ceil() as u32
    } else {
        1
    };
    let vmax = bg.v(0.0);
    let n_corr = (vmax * 1e11 / (2.0 * mf * mf)).cbrt().ceil() as u32;
    let n_max = n_decay.max(n_corr).max(8).min(512);

    // per-circle mode phases
    let phases: Vec<Vec<f64>> = circles
        .iter()
        .map(|c| {
            (1..=n_max)
                .map(|n| {
                    c.offsets
                        .iter()
                        .map(|&t0| (n as f64 * mf * t0).cos())
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();

    // mode solves (independent; deterministic indexed collection)
    let modes: Vec<Option<ModeSolution>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mu = n as f64 * mf;
            let sources: Vec<CircleSource> = circles
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let phase = phases[i][n as usize - 1];
                    if phase.abs() < 1e-15 {
                        None
                    } else {
                        Some(CircleSource { s_c: c.s, jump: 2.0 * mf * c.tau_ratio * phase })
                    }
                })
                .collect();
            if sources.is_empty() {
                Ok(None)
            } else {
                solve_mode(bg, &sources, mu).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let tol = rld.tol();
    let j_bars: Vec<TwoSided> = circles
        .iter()
        .zip(&params.m_vec)
        .map(|(c, &mi)| {
            ode::j_bar(bg, mi.unsigned_abs() as f64 * c.tau_ratio / 2.0, c.s, tol)
        })
        .collect::<Result<_>>()?;
    let phi_log_bars: Vec<TwoSided> = circles
        .iter()
        .map(|c| ode::phi_bar(bg, c.delta.ln(), 0.0, c.s, tol))
        .collect::<Result<_>>()?;
    let greens = circles.iter().map(|c| RadialGreen::new(bg.v(c.s))).collect();

    Ok(LdSolution {
        background: bg.clone(),
        rld: rld.clone(),
        circles,
        m,
        tau1,
        zeta1: params.zeta1,
        c_scale,
        n_max,
        modes,
        phases,
        j_bars,
        phi_log_bars,
        greens,
    })
}

impl LdSolution {
    /// Rotationally invariant part of `Phi` (before the `tau_1` scale).
    pub fn phi_avg(&self, s: f64) -> f64 {
        self.c_scale * self.rld.phi(s)
    }

    /// One-sided derivatives of the average at a circle latitude, from the
    /// interval profiles (`(d_plus, d_minus)` with both positive for
    /// concave kinks).
    pub fn phi_avg_sided(&self, i: usize) -> (f64, f64) {
        let s = self.circles[i].s;
        let eps = 1e-9;
        let dp = self.c_scale * self.rld.eval(s + eps)[1];
        let dm = if s > eps {
            -self.c_scale * self.rld.eval(s - eps)[1]
        } else {
            dp
        };
        (dp, dm)
    }

    /// Vertical-balancing residual `max_i | |m_i| tau_i - (d_plus + d_minus)
    /// phi_avg(s_i) |` of the full-scale solution.
    pub fn balancing_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, c) in self.circles.iter().enumerate() {
            let (dp, dm) = self.phi_avg_sided(i);
            let lhs = c.m_i.unsigned_abs() as f64 * self.tau1 * c.tau_ratio;
            let rhs = self.tau1 * (dp + dm);
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }

    /// Fold an angle into the fundamental sector `[0, pi/m]` of the
    /// dihedral symmetry group (the solution is invariant under the fold).
    pub fn fold_theta(&self, theta: f64) -> f64 {
        let period = 2.0 * PI / self.m as f64;
        let mut t = theta.rem_euclid(period);
        if t > 0.5 * period {
            t = period - t;
        }
        t
    }

    /// Full normalized solution `Phi(theta, s)` (configuration `tau'_i`).
    /// Evaluated through the flat-lattice representation, which carries the
    /// poles and derivative kinks in closed form; the truncated mode series
    /// only contributes fast-decaying smooth corrections.
    pub fn phi(&self, theta: f64, s: f64) -> f64 {
        let tf = self.fold_theta(theta);
        let (i, r) = self.nearest_point(tf, s);
        self.phi_minus_log(i, tf, s) + self.circles[i].tau_ratio * r.ln()
    }

    /// `Phi` minus the logarithmic pole of circle `i`: stable near that
    /// circle's representative points.  `Phi(q) - tau'_i log d_chi(q, p)`.
    pub fn phi_minus_log(&self, i: usize, theta: f64, s: f64) -> f64 {
        let mf = self.m as f64;
        let sa = s.abs();
        // smooth average remainder: phi_avg - sum_j tau'_j * flat averages
        let mut acc = self.phi_avg(sa);
        for c in &self.circles {
            let mut a = circle_log_sum_avg(self.m, c.s, sa) * c.offsets.len() as f64;
            if c.s > 0.0 {
                a += circle_log_sum_avg(self.m, -c.s, sa) * c.offsets.len() as f64;
            }
            acc -= c.tau_ratio * a;
        }
        // mode corrections (solved coefficient minus its flat part)
        for (idx, mode) in self.modes.iter().enumerate() {
            if let Some(ms) = mode {
                let n = (idx + 1) as f64;
                acc += (ms.eval(sa) - ms.f_eval(sa)) * (n * mf * theta).cos();
            }
        }
        // flat lattice logs, with circle i's pole removed
        let p = &self.circles[i];
        let r = chi_dist(p.rep_theta(), p.s, theta, s);
        for c in &self.circles {
            for &t0 in &c.offsets {
                let mut g = circle_log_sum(self.m, t0, c.s, theta, sa);
                if c.s > 0.0 {
                    g += circle_log_sum(self.m, t0, -c.s, theta, sa);
                }
                acc += c.tau_ratio * g;
            }
        }
        // remove circle i's pole at the representative point
        acc - p.tau_ratio * r.ln()
    }

    /// `d/ds` of `Phi` at `(theta, s)` with `s > 0` away from singular
    /// points; one-sided at circle latitudes (side selected by `s`).
    pub fn phi_ds(&self, theta: f64, s: f64) -> f64 {
        let tf = self.fold_theta(theta);
        let mf = self.m as f64;
        let sa = s.abs();
        let mut acc = self.c_scale * self.rld.eval(sa)[1];
        for c in &self.circles {
            // flat average derivatives: +- m/2 per latitude per sub-lattice
            let mut da = 0.5 * mf * (sa - c.s).signum();
            if c.s > 0.0 {
                da += 0.5 * mf;
            }
            acc -= c.tau_ratio * da * c.offsets.len() as f64;
            // flat oscillatory derivatives
            for &t0 in &c.offsets {
                let mut g = crate::greens::circle_log_sum_grad(self.m, t0, c.s, tf, sa).1;
                if c.s > 0.0 {
                    g += crate::greens::circle_log_sum_grad(self.m, t0, -c.s, tf, sa).1;
                }
                acc += c.tau_ratio * g;
            }
        }
        for (idx, mode) in self.modes.iter().enumerate() {
            if let Some(ms) = mode {
                let n = (idx + 1) as f64;
                acc += (ms.deriv(sa) - ms.f_deriv(sa)) * (n * mf * tf).cos();
            }
        }
        acc * s.signum()
    }

    /// Nearest representative singular point (circle index, distance) for a
    /// point given in sector-folded coordinates.
    pub fn nearest_point(&self, theta_folded: f64, s: f64) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (i, c) in self.circles.iter().enumerate() {
            let dth = theta_folded - c.rep_theta();
            let ds = s.abs() - c.s;
            let d = (dth * dth + ds * ds).sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Fold an angle difference into `[-p/2, p/2]` for period `p`.
fn wrap_to(dtheta: f64, period: f64) -> f64 {
    let mut d = dtheta % period;
    if d > 0.5 * period {
        d -= period;
    }
    if d < -0.5 * period {
        d += period;
    }
    d
}

/// Flat-cylinder distance from `(theta, s)` to the point `(theta_p, s_p)`,
/// going through the representative `theta`-difference.
fn chi_dist(theta_p: f64, s_p: f64, theta: f64, s: f64) -> f64 {
    let dth = wrap_to(theta - theta_p, 2.0 * PI);
    (dth * dth + (s - s_p) * (s - s_p)).sqrt()
}

/// Frame of a mismatch record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// flat cylinder metric
    Conformal,
    /// ambient induced metric
    Ambient,
}

/// Extraction route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MismatchMethod {
    CircleExtraction,
    Formula,
}

/// Per-circle affine mismatch data, normalized by the circle strength
/// `tau_p = tau_1 tau'_i`:
/// value `mu`, latitude-covector coefficient `b_s = |m_i| mu'`, angular
/// coefficient `b_theta = m mu_circ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MismatchVector {
    pub frame: Frame,
    pub mu: Vec<f64>,
    pub b_s: Vec<f64>,
    pub b_theta: Vec<f64>,
    pub tau: Vec<f64>,
}

impl MismatchVector {
    pub fn mu_prime(&self, ld: &LdSolution) -> Vec<f64> {
        self.b_s
            .iter()
            .zip(&ld.circles)
            .map(|(b, c)| b / c.m_i.unsigned_abs() as f64)
            .collect()
    }
    pub fn mu_circ(&self, ld: &LdSolution) -> Vec<f64> {
        self.b_theta.iter().map(|b| b / ld.m as f64).collect()
    }
}

/// Fourier harmonics 0 and 1 of a function sampled on a circle of radius
/// `r` around `(theta_p, s_p)`.
fn circle_harmonics<F: Fn(f64, f64) -> f64>(
    f: &F,
    theta_p: f64,
    s_p: f64,
    r: f64,
    nodes: usize,
) -> [f64; 3] {
    let mut c0 = 0.0;
    let mut ccos = 0.0;
    let mut csin = 0.0;
    for j in 0..nodes {
        let psi = 2.0 * PI * j as f64 / nodes as f64;
        let v = f(theta_p + r * psi.cos(), s_p + r * psi.sin());
        c0 += v;
        ccos += v * psi.cos();
        csin += v * psi.sin();
    }
    let n = nodes as f64;
    [c0 / n, 2.0 * ccos / n, 2.0 * csin / n]
}

/// Mismatch of the full-scale solution `tau_1 Phi`, per circle, in the
/// ambient frame.
pub fn mismatch(ld: &LdSolution, method: MismatchMethod) -> Result<MismatchVector> {
    match method {
        MismatchMethod::CircleExtraction => mismatch_extraction(ld),
        MismatchMethod::Formula => mismatch_formula(ld),
    }
}

/// Extrapolate `y(r) = X + A r^2 ln(1/r) + B r^2` to `r = 0` from three
/// radii (the pole-subtracted field's remainder carries both terms).
fn richardson3(rs: [f64; 3], ys: [f64; 3]) -> f64 {
    let f1 = |r: f64| r * r * (1.0 / r).ln();
    let f2 = |r: f64| r * r;
    let m = [
        [1.0, f1(rs[0]), f2(rs[0])],
        [1.0, f1(rs[1]), f2(rs[1])],
        [1.0, f1(rs[2]), f2(rs[2])],
    ];
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    let mut mx = m;
    for (row, &y) in ys.iter().enumerate() {
        mx[row][0] = y;
    }
    det(&mx) / d
}

fn mismatch_extraction(ld: &LdSolution) -> Result<MismatchVector> {
    let mut mu = Vec::new();
    let mut b_s = Vec::new();
    let mut b_theta = Vec::new();
    let mut tau = Vec::new();
    for (i, c) in ld.circles.iter().enumerate() {
        let r0 = 0.25 * c.delta;
        let nodes = 8 * ((r0 * ld.m as f64).ceil() as usize) + 64;
        let f = |theta: f64, s: f64| ld.phi_minus_log(i, theta, s);
        let radii = [r0, 0.5 * r0, 0.25 * r0];
        let mut h = [[0.0; 3]; 3];
        for (j, &r) in radii.iter().enumerate() {
            h[j] = circle_harmonics(&f, c.rep_theta(), c.s, r, nodes);
        }
        let c0 = richardson3(radii, [h[0][0], h[1][0], h[2][0]]);
        let gth = richardson3(radii, [h[0][1] / radii[0], h[1][1] / radii[1], h[2][1] / radii[2]]);
        let gs = richardson3(radii, [h[0][2] / radii[0], h[1][2] / radii[1], h[2][2] / radii[2]]);

        let tau_p = ld.tau1 * c.tau_ratio;
        // conformal-frame mismatch, then convert to the ambient frame
        let mu_i = c0 / c.tau_ratio + (ld.tau1 * c.tau_ratio / 2.0).ln()
            - ld.background.omega(c.s);
        let bs_i = gs / c.tau_ratio - 0.5 * ld.background.domega(c.s);
        let bth_i = gth / c.tau_ratio;
        mu.push(mu_i);
        b_s.push(bs_i);
        b_theta.push(bth_i);
        tau.push(tau_p);
    }
    Ok(MismatchVector { frame: Frame::Ambient, mu, b_s, b_theta, tau })
}

/// Regular part of the decomposition, `Phi' = Phi - Ghat - Phihat`,
/// evaluated stably near circle `i` (within its singular disk).
fn phi_reg_near(ld: &LdSolution, i: usize, theta: f64, s: f64) -> f64 {
    let c = &ld.circles[i];
    let r = chi_dist(c.rep_theta(), c.s, theta, s.abs());
    let g = &ld.greens[i];
    ld.phi_minus_log(i, theta, s) - c.tau_ratio * g.eval_minus_log(r)
        + c.tau_ratio * ld.phi_log_bars[i].phi(s.abs())
        - ld.phi_avg(s)
        + ld.j_bars[i].phi(s.abs())
}

/// `Phi'(p_i)` and its gradient `(d_theta, d_s)` at the representative
/// singular point, by small-circle averaging with Richardson refinement.
pub fn phi_prime_at_rep(ld: &LdSolution, i: usize) -> (f64, f64, f64) {
    let c = &ld.circles[i];
    let f = |theta: f64, s: f64| phi_reg_near(ld, i, theta, s);
    let rho = 0.25 * c.delta;
    let h1 = circle_harmonics(&f, c.rep_theta(), c.s, rho, 32);
    let h2 = circle_harmonics(&f, c.rep_theta(), c.s, 0.5 * rho, 32);
    // smooth function: plain r^2 Richardson
    let val = (4.0 * h2[0] - h1[0]) / 3.0;
    let gth = (4.0 * h2[1] / (0.5 * rho) - h1[1] / rho) / 3.0 / 2.0;
    let gs = (4.0 * h2[2] / (0.5 * rho) - h1[2] / rho) / 3.0 / 2.0;
    (val, gth, gs)
}

fn mismatch_formula(ld: &LdSolution) -> Result<MismatchVector> {
    let mut mu = Vec::new();
    let mut b_s = Vec::new();
    let mut b_theta = Vec::new();
    let mut tau = Vec::new();
    let m1 = ld.circles[0].m_i.unsigned_abs() as f64;
    let f1 = ld.rld.f_mean[0];
    for (i, c) in ld.circles.iter().enumerate() {
        let (pp, pth, ps) = phi_prime_at_rep(ld, i);
        let mi = c.m_i.unsigned_abs() as f64;
        let fi = ld.rld.f_mean[i];
        let xi = ld.rld.ratios.xi_at(i);
        let mu_i = mi / (2.0 * fi) - m1 / (2.0 * f1)
            + pp / c.tau_ratio
            + ld.zeta1
            + c.tau_ratio.ln()
            + (mi / m1).ln()
            - ld.background.omega(c.s);
        let bs_i = 0.5 * mi * xi + ps / c.tau_ratio - 0.5 * ld.background.domega(c.s);
        let bth_i = pth / c.tau_ratio;
        mu.push(mu_i);
        b_s.push(bs_i);
        b_theta.push(bth_i);
        tau.push(ld.tau1 * c.tau_ratio);
    }
    Ok(MismatchVector { frame: Frame::Ambient, mu, b_s, b_theta, tau })
}

/// Parameter-space image of a mismatch under the unbalancing map:
/// `(zeta_1, sigma[k-1], xi[k], xi_circ[k])`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaImage {
    pub zeta1: f64,
    pub sigma: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_circ: Vec<f64>,
}

/// Linear unbalancing map on ambient-frame mismatch data.
pub fn unbalancing_map(mm: &MismatchVector, ld: &LdSolution) -> Result<ZetaImage> {
    if mm.frame != Frame::Ambient {
        return Err(Error::InvalidParameter(
            "unbalancing map expects ambient-frame mismatch".into(),
        ));
    }
    let k = ld.circles.len();
    let m1 = ld.circles[0].m_i.unsigned_abs() as f64;
    let f1 = ld.rld.f_mean[0];
    let mu_prime = mm.mu_prime(ld);
    let mu_circ = mm.mu_circ(ld);
    let sigma: Vec<f64> = (0..k.saturating_sub(1))
        .map(|j| -(2.0 * f1 / m1) * (mm.mu[j + 1] - mm.mu[j]))
        .collect();
    let xi: Vec<f64> = mu_prime.iter().map(|v| 2.0 * v).collect();
    let xi_circ: Vec<f64> = (0..k)
        .map(|i| {
            if ld.circles[i].m_i == -2 * ld.m as i64 {
                -4.0 * mu_circ[i]
            } else {
                0.0
            }
        })
        .collect();
    Ok(ZetaImage { zeta1: mm.mu[0], sigma, xi, xi_circ })
}

/// Values of the decomposition on a grid point away from the singular
/// disks; `None` inside radius `delta_i` of a singular point.
pub fn decompose_at(ld: &LdSolution, theta: f64, s: f64) -> Option<[f64; 3]> {
    let tf = ld.fold_theta(theta);
    let (i, d) = ld.nearest_point(tf, s);
    if d < ld.circles[i].delta {
        return None;
    }
    let sa = s.abs();
    // Ghat
    let mut ghat = 0.0;
    for (j, c) in ld.circles.iter().enumerate() {
        let dth = tf - c.rep_theta();
        let dj = (dth * dth + (sa - c.s) * (sa - c.s)).sqrt();
        if dj < 3.0 * c.delta {
            let cut = ramp(3.0 * c.delta, 2.0 * c.delta, dj);
            ghat += c.tau_ratio
                * cut
                * (ld.greens[j].eval(dj) - ld.phi_log_bars[j].phi(sa));
        }
    }
    // Phihat
    let mut phihat = ld.phi_avg(sa);
    for (j, c) in ld.circles.iter().enumerate() {
        let mi = c.m_i.unsigned_abs() as f64;
        let dpar = (sa - c.s).abs();
        if dpar < 3.0 / mi {
            let cut = ramp(3.0 / mi, 2.0 / mi, dpar);
            phihat -= cut * ld.j_bars[j].phi(sa);
        }
    }
    let phi = ld.phi(theta, s);
    Some([ghat, phihat, phi - ghat - phihat])
}

/// Scaled-limit configuration: single circle of `m` unit-strength points at
/// latitude `s_bar`, with the average part matched to extend smoothly at the
/// ends, plus the recentering correction; used to compare against the
/// closed-form limit kernel on compact probe sets.
pub struct SingleCircleScaled {
    pub m: u32,
    pub s_bar: f64,
    a_even: f64,
    b_end: f64,
    even: ode::OdeProfile,
    end: ode::OdeProfile,
    modes: Vec<ModeSolution>,
    corr: ode::OdeProfile,
}

pub fn single_circle_scaled(bg: &Background, s_bar: f64, m: u32, tol: f64) -> Result<SingleCircleScaled> {
    let even = ode::phi_even(bg, tol)?;
    let end = ode::phi_end(bg, tol)?;
    // A phi_even on [0, s_bar], B phi_end beyond; continuity + jump m
    let [e, de] = even.eval(s_bar);
    let [f, df] = end.eval(s_bar);
    let det = e * df - de * f;
    let mf = m as f64;
    let a_even = mf * f / det;
    let b_end = mf * e / det;
    let n_max = ((27.7 / (mf * 2.0 * s_bar)).ceil() as u32).max(40).min(512);
    let modes: Vec<ModeSolution> = (1..=n_max)
        .into_par_iter()
        .map(|n| solve_mode(bg, &[CircleSource { s_c: s_bar, jump: 2.0 * mf }], n as f64 * mf))
        .collect::<Result<_>>()?;
    // recentering correction: rotationally invariant solution with value and
    // symmetric-derivative data matching the limit kernel's average at the
    // circle
    let avg = a_even * e;
    let davg_sym = 0.5 * (a_even * de + b_end * df); // (d_+ - d_-)/2 in d/ds terms
    let corr0 = -(2f64).ln() - avg;
    // du/ds_hat(0) = -(1/m) * symmetric derivative; integrate in s with
    // du/ds = m * du/ds_hat
    let dcorr0 = -davg_sym / mf;
    let span = (6.0 / mf).max(0.3);
    let corr = ode::integrate(bg, s_bar, corr0, dcorr0 * mf, s_bar + span, tol)?;
    Ok(SingleCircleScaled { m, s_bar, a_even, b_end, even, end, modes, corr })
}

impl SingleCircleScaled {
    fn avg(&self, s: f64) -> f64 {
        let sa = s.abs();
        if sa <= self.s_bar {
            self.a_even * self.even.phi(sa)
        } else {
            self.b_end * self.end.phi(sa)
        }
    }

    /// `G_m(theta_t, s_hat)` in recentered, rescaled coordinates, through
    /// the flat-lattice representation (modes only contribute their solved
    /// corrections, so truncation tails decay fast).
    pub fn g_m(&self, theta_t: f64, s_hat: f64) -> f64 {
        let mf = self.m as f64;
        let theta = theta_t / mf;
        let s = self.s_bar + s_hat / mf;
        let sa = s.abs();
        let mut acc = self.avg(s) - circle_log_sum_avg(self.m, self.s_bar, sa)
            - circle_log_sum_avg(self.m, -self.s_bar, sa);
        for (idx, ms) in self.modes.iter().enumerate() {
            let n = (idx + 1) as f64;
            acc += (ms.eval(sa) - ms.f_eval(sa)) * (n * mf * theta).cos();
        }
        acc + circle_log_sum(self.m, 0.0, self.s_bar, theta, sa)
            + circle_log_sum(self.m, 0.0, -self.s_bar, theta, sa)
    }

    /// Recentering correction `phi_m(s_hat)` (built on the outward side;
    /// probe sets use `s_hat >= 0`).
    pub fn correction(&self, s_hat: f64) -> f64 {
        assert!(s_hat >= 0.0, "correction built for the outward side");
        let s = self.s_bar + s_hat / self.m as f64;
        self.corr.phi(s.min(self.corr.s_end()))
    }

    /// Sup over a fixed probe set of the deviation from the limit kernel.
    pub fn deviation_from_limit(&self) -> f64 {
        let probes_t = [0.7, 1.6, PI, 4.2];
        let probes_s = [0.0, 0.4, 0.9, 1.6];
        let mut sup = 0.0f64;
        for &t in &probes_t {
            for &sh in &probes_s {
                let d = (self.g_m(t, sh) + self.correction(sh)
                    - crate::greens::green_limit(t, sh))
                .abs();
                sup = sup.max(d);
            }
        }
        sup
    }
}
