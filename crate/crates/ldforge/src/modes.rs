//! Per-mode jump problems `a'' + (V - mu^2) a = 0` with prescribed
//! derivative jumps at circle latitudes and decay / Robin / periodic end
//! conditions.
//!
//! The solution is split as `a = f + b` where `f` is the closed-form flat
//! part (pure exponentials carrying all the jumps) and the correction `b`
//! solves `b'' - mu^2 b = -V (f + b)` with no jumps.  The correction is
//! produced by iterating the exponential kernel of `(d^2/ds^2 - mu^2)` on a
//! graded grid; each sweep costs O(grid) via forward/backward recursions.
//! This stays well-conditioned at arbitrarily large `mu`, where
//! transfer-matrix assembly of interval endpoint states would overflow.

use crate::background::{Background, EndCondition};
use crate::{Error, Result};

/// One source circle: latitude (>= 0) and the full derivative jump of the
/// mode coefficient there.  Circles at positive latitude implicitly carry
/// their mirror at `-s_c`.
#[derive(Debug, Clone, Copy)]
pub struct CircleSource {
    pub s_c: f64,
    pub jump: f64,
}

#[derive(Debug, Clone)]
enum EndKind {
    Decay,
    Robin { s_root: f64, gamma: f64, ratio: RiccatiRatio },
    Periodic { l: f64, mass_l: f64 },
}

/// Even-growing homogeneous solution tracked through its log-derivative,
/// for the stable Robin boundary correction.
#[derive(Debug, Clone)]
struct RiccatiRatio {
    s: Vec<f64>,
    r: Vec<f64>,
    int_r: Vec<f64>,
}

impl RiccatiRatio {
    /// Integrate `R' = mu^2 - V - R^2`, `R(0) = 0` (log-derivative of the
    /// even homogeneous solution; forward-stable toward the growing branch).
    fn build(bg: &Background, mu: f64, s_end: f64) -> Self {
        let n = ((s_end * mu * 8.0) as usize).clamp(400, 200_000);
        let h = s_end / n as f64;
        let mut s = Vec::with_capacity(n + 1);
        let mut r = Vec::with_capacity(n + 1);
        let mut int_r = Vec::with_capacity(n + 1);
        let f = |s: f64, r: f64| mu * mu - bg.v(s) - r * r;
        let mut rv = 0.0;
        let mut acc = 0.0;
        s.push(0.0);
        r.push(0.0);
        int_r.push(0.0);
        for i in 0..n {
            let si = i as f64 * h;
            let k1 = f(si, rv);
            let k2 = f(si + 0.5 * h, rv + 0.5 * h * k1);
            let k3 = f(si + 0.5 * h, rv + 0.5 * h * k2);
            let k4 = f(si + h, rv + h * k3);
            let rn = rv + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            acc += 0.5 * h * (rv + rn);
            rv = rn;
            s.push((i + 1) as f64 * h);
            r.push(rv);
            int_r.push(acc);
        }
        RiccatiRatio { s, r, int_r }
    }

    fn lookup(&self, s: f64) -> (f64, f64) {
        let n = self.s.len();
        let h = self.s[1] - self.s[0];
        let i = ((s / h) as usize).min(n - 2);
        let w = (s - self.s[i]) / h;
        (
            self.r[i] * (1.0 - w) + self.r[i + 1] * w,
            self.int_r[i] * (1.0 - w) + self.int_r[i + 1] * w,
        )
    }

    fn r_end(&self) -> f64 {
        *self.r.last().unwrap()
    }
    fn int_r_end(&self) -> f64 {
        *self.int_r.last().unwrap()
    }

    /// `v(s) / v(s_end) = exp(-int_s^{s_end} R)` and its derivative factor.
    fn ratio(&self, s: f64) -> (f64, f64) {
        let (r, ir) = self.lookup(s);
        let v = (ir - self.int_r_end()).exp();
        (v, r * v)
    }
}

/// Solved mode coefficient `a(s) = f(s) + b(s) [+ Robin correction]`.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub mu: f64,
    circles: Vec<CircleSource>,
    grid: Vec<f64>,
    gvals: Vec<f64>,
    fw: Vec<f64>,
    bw: Vec<f64>,
    mass0: f64,
    end: EndKind,
    /// sup of the last iteration update (residual scale)
    pub update_norm: f64,
}

/// Weights for `int_0^1 e^{-alpha(1-u)} {(1-u), u} du`.
fn w_lin(alpha: f64) -> (f64, f64) {
    if alpha < 1e-3 {
        let a = alpha;
        (
            0.5 - a / 3.0 + a * a / 8.0 - a * a * a / 30.0,
            0.5 - a / 6.0 + a * a / 24.0 - a * a * a / 120.0,
        )
    } else {
        let e = (-alpha).exp();
        (
            (1.0 - e * (1.0 + alpha)) / (alpha * alpha),
            (alpha - 1.0 + e) / (alpha * alpha),
        )
    }
}

impl ModeSolution {
    /// Closed-form flat part and derivative.
    pub fn f_eval(&self, s: f64) -> f64 {
        let mu = self.mu;
        let mut acc = 0.0;
        for c in &self.circles {
            let mut t = (-mu * (s - c.s_c).abs()).exp();
            if c.s_c > 0.0 {
                t += (-mu * (s + c.s_c)).exp();
            }
            acc -= c.jump / (2.0 * mu) * t;
        }
        acc
    }

    pub fn f_deriv(&self, s: f64) -> f64 {
        let mu = self.mu;
        let mut acc = 0.0;
        for c in &self.circles {
            let mut t = -mu * (s - c.s_c).signum() * (-mu * (s - c.s_c).abs()).exp();
            if c.s_c > 0.0 {
                t -= mu * (-mu * (s + c.s_c)).exp();
            }
            acc -= c.jump / (2.0 * mu) * t;
        }
        acc
    }

    /// Kernel integrals `(FW, BW)` at an arbitrary point, from the stored
    /// node accumulators plus the partial-cell closed forms.
    fn passes_at(&self, s: f64) -> (f64, f64) {
        let grid = &self.grid;
        let n = grid.len();
        let mu = self.mu;
        if s <= grid[0] {
            return (0.0, (-(mu * (grid[0] - s))).exp() * (self.bw[0] + cell0(self, 0)));
        }
        if s >= grid[n - 1] {
            return (
                (-(mu * (s - grid[n - 1]))).exp() * (self.fw[n - 1]),
                0.0,
            );
        }
        // locate cell
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if grid[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = grid[hi] - grid[lo];
        let u = (s - grid[lo]) / h;
        let g0 = self.gvals[lo];
        let g1 = self.gvals[hi];
        let gm = g0 * (1.0 - u) + g1 * u;
        // forward: attenuated node value + partial cell [grid[lo], s]
        let hp = u * h;
        let (w0, w1) = w_lin(mu * hp);
        let fw = (-(mu * hp)).exp() * self.fw[lo] + hp * (g0 * w0 + gm * w1);
        // backward: attenuated node value + partial cell [s, grid[hi]]
        let hq = (1.0 - u) * h;
        let (w0b, w1b) = w_lin(mu * hq);
        let bw = (-(mu * hq)).exp() * self.bw[hi] + hq * (g1 * w0b + gm * w1b);
        return (fw, bw);

        fn cell0(_m: &ModeSolution, _i: usize) -> f64 {
            0.0
        }
    }

    /// Correction `b(s)`.
    pub fn b_eval(&self, s: f64) -> f64 {
        let (fw, bw) = self.passes_at(s);
        let mut b = -(fw + bw + (-(self.mu * s)).exp() * self.mass0) / (2.0 * self.mu);
        if let EndKind::Periodic { l, mass_l } = self.end {
            b += -((-(self.mu * (l - s))).exp() * mass_l) / (2.0 * self.mu);
        }
        b
    }

    /// Correction derivative `b'(s)`.
    pub fn b_deriv(&self, s: f64) -> f64 {
        let (fw, bw) = self.passes_at(s);
        let mut db = 0.5 * (fw - bw + (-(self.mu * s)).exp() * self.mass0);
        if let EndKind::Periodic { l, mass_l } = self.end {
            db -= 0.5 * (-(self.mu * (l - s))).exp() * mass_l;
        }
        db
    }

    /// Full mode coefficient `a(s)` (including the Robin correction).
    pub fn eval(&self, s: f64) -> f64 {
        let mut a = self.f_eval(s) + self.b_eval(s);
        if let EndKind::Robin { gamma, ref ratio, .. } = self.end {
            a += gamma * ratio.ratio(s).0;
        }
        a
    }

    /// `a'(s)`.
    pub fn deriv(&self, s: f64) -> f64 {
        let mut da = self.f_deriv(s) + self.b_deriv(s);
        if let EndKind::Robin { gamma, ref ratio, .. } = self.end {
            da += gamma * ratio.ratio(s).1;
        }
        da
    }
}

/// Solve the mode problem for frequency `mu` with the given circle sources
/// on the background's domain.
pub fn solve_mode(bg: &Background, circles: &[CircleSource], mu: f64) -> Result<ModeSolution> {
    if mu <= 0.0 {
        return Err(Error::InvalidParameter("mode frequency must be positive".into()));
    }
    let domain_end = match bg.end {
        EndCondition::SmoothEnds => f64::INFINITY,
        EndCondition::Periodic => bg.half_length,
        EndCondition::Robin { s_root } => s_root,
    };
    if let EndCondition::Periodic = bg.end {
        if mu * bg.half_length < 23.0 {
            return Err(Error::InvalidParameter(format!(
                "period too short for the image-kernel mode solver (mu l = {:.1})",
                mu * bg.half_length
            )));
        }
    }

    // graded grid: windows of half-width w around each circle, merged
    let w = 42.0 / mu;
    let h = 0.12 / mu;
    let mut spans: Vec<(f64, f64)> = circles
        .iter()
        .map(|c| ((c.s_c - w).max(0.0), (c.s_c + w).min(domain_end)))
        .collect();
    spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for sp in spans {
        match merged.last_mut() {
            Some(last) if sp.0 <= last.1 + h => last.1 = last.1.max(sp.1),
            _ => merged.push(sp),
        }
    }
    let mut grid = Vec::new();
    for (a, b) in &merged {
        let n = (((b - a) / h).ceil() as usize).max(8);
        let hh = (b - a) / n as f64;
        let start = grid.len();
        for j in 0..=n {
            grid.push(a + hh * j as f64);
        }
        // keep circle latitudes exactly on nodes
        for c in circles {
            if c.s_c >= *a && c.s_c <= *b {
                let idx = start + ((c.s_c - a) / hh).round() as usize;
                if idx < grid.len() {
                    grid[idx] = c.s_c;
                }
            }
        }
    }
    let n = grid.len();

    let ms_proto = ModeSolution {
        mu,
        circles: circles.to_vec(),
        grid: grid.clone(),
        gvals: vec![0.0; n],
        fw: vec![0.0; n],
        bw: vec![0.0; n],
        mass0: 0.0,
        end: EndKind::Decay,
        update_norm: 0.0,
    };
    let fvals: Vec<f64> = grid.iter().map(|&s| ms_proto.f_eval(s)).collect();
    let vvals: Vec<f64> = grid.iter().map(|&s| bg.v(s)).collect();

    let mut bvals = vec![0.0; n];
    let mut ms = ms_proto;
    let mut update = f64::INFINITY;
    for _iter in 0..40 {
        // g = -V (f + b) at nodes
        for i in 0..n {
            ms.gvals[i] = -vvals[i] * (fvals[i] + bvals[i]);
        }
        // forward pass: FW_j = int_{grid0}^{grid_j} e^{-mu (t_j - t)} g
        ms.fw[0] = 0.0;
        for j in 1..n {
            let hh = grid[j] - grid[j - 1];
            let alpha = mu * hh;
            let (w0, w1) = w_lin(alpha);
            ms.fw[j] = (-alpha).exp() * ms.fw[j - 1]
                + hh * (ms.gvals[j - 1] * w0 + ms.gvals[j] * w1);
        }
        // backward pass
        ms.bw[n - 1] = 0.0;
        for j in (0..n - 1).rev() {
            let hh = grid[j + 1] - grid[j];
            let alpha = mu * hh;
            let (w0, w1) = w_lin(alpha);
            ms.bw[j] = (-alpha).exp() * ms.bw[j + 1]
                + hh * (ms.gvals[j + 1] * w0 + ms.gvals[j] * w1);
        }
        // reflection masses
        let mut mass0 = 0.0;
        for j in 1..n {
            let hh = grid[j] - grid[j - 1];
            let alpha = mu * hh;
            let (w0, w1) = w_lin(alpha);
            // int e^{-mu t} g over the cell, attenuated to t = 0
            mass0 += (-(mu * grid[j - 1])).exp()
                * hh
                * (ms.gvals[j] * w0 + ms.gvals[j - 1] * w1);
        }
        ms.mass0 = mass0;
        if let EndCondition::Periodic = bg.end {
            let l = bg.half_length;
            let mut mass_l = 0.0;
            for j in 1..n {
                let hh = grid[j] - grid[j - 1];
                let alpha = mu * hh;
                let (w0, w1) = w_lin(alpha);
                mass_l += (-(mu * (l - grid[j]))).exp()
                    * hh
                    * (ms.gvals[j - 1] * w0 + ms.gvals[j] * w1);
            }
            ms.end = EndKind::Periodic { l, mass_l };
        }
        // update b at nodes
        let mut delta = 0.0f64;
        for i in 0..n {
            let nb = ms.b_eval(grid[i]);
            delta = delta.max((nb - bvals[i]).abs());
            bvals[i] = nb;
        }
        update = delta;
        if delta < 1e-15 {
            break;
        }
    }
    ms.update_norm = update;

    if let EndCondition::Robin { s_root } = bg.end {
        let ratio = RiccatiRatio::build(bg, mu, s_root);
        // residual of the Robin condition s_root a' = a at s_root
        let fb = ms.f_eval(s_root) + ms.b_eval(s_root);
        let dfb = ms.f_deriv(s_root) + ms.b_deriv(s_root);
        let rho = s_root * dfb - fb;
        let gamma = -rho / (s_root * ratio.r_end() - 1.0);
        ms.end = EndKind::Robin { s_root, gamma, ratio };
    }
    Ok(ms)
}
