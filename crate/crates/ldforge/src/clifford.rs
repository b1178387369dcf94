//! LD machinery on the flat square torus (side `sqrt(2) pi`): the closed
//! average, the spliced local singular model, and the spectral solve of the
//! regular remainder in a double cosine basis.  The lattice has `k x m`
//! points (`k` vertical circles of `m` points); strengths are 1 before the
//! overall `tau` scale.

use crate::cutoff::{ramp, ramp_d1, ramp_d2};
use crate::greens::RadialGreen;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Torus side length.
pub fn side() -> f64 {
    SQRT2 * PI
}

/// Mean-flux constant of the average: `F = sqrt2 tan(sqrt2 pi / k)`.
pub fn mean_flux(k: u32) -> Result<f64> {
    let f = SQRT2 * (SQRT2 * PI / k as f64).tan();
    if k <= 2 || f <= 0.0 {
        return Err(Error::Infeasible(format!(
            "k = {k} gives nonpositive mean flux; need k >= 3"
        )));
    }
    Ok(f)
}

/// Rotationally averaged solution at distance `d` from the nearest lattice
/// circle: `m / (2 sqrt2 sin(sqrt2 pi/k)) * cos(sqrt2 pi/k - 2 d)`.
pub fn phi_avg(k: u32, m: u32, d: f64) -> Result<f64> {
    mean_flux(k)?;
    let half_gap = SQRT2 * PI / (2.0 * k as f64);
    if !(0.0..=half_gap + 1e-12).contains(&d) {
        return Err(Error::InvalidParameter(format!(
            "distance {d} outside [0, {half_gap}]"
        )));
    }
    let a = SQRT2 * PI / k as f64;
    Ok(m as f64 / (2.0 * SQRT2 * a.sin()) * (a - 2.0 * d).cos())
}

/// Configuration of a torus solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliffordConfig {
    pub k: u32,
    pub m: u32,
    pub zeta: f64,
    /// triple-lattice relative log-strengths `(sigma_1, sigma_2)`;
    /// `sigma_0 = -sigma_1 - sigma_2`
    pub triple: Option<(f64, f64)>,
    /// spectral truncation quality `Omega * delta` (default 28)
    pub omega_delta: f64,
}

impl CliffordConfig {
    pub fn new(k: u32, m: u32) -> Result<Self> {
        if k < 3 {
            return Err(Error::Infeasible("k >= 3 required (positive mean flux)".into()));
        }
        if m < k {
            return Err(Error::InvalidParameter("m >= k required".into()));
        }
        Ok(CliffordConfig { k, m, zeta: 0.0, triple: None, omega_delta: 28.0 })
    }
    pub fn delta(&self) -> f64 {
        1.0 / (100.0 * self.m as f64)
    }
    /// Strength scale `tau = (1/m) e^zeta e^{-m/(2F)}` (single lattice).
    pub fn tau(&self) -> f64 {
        let f = mean_flux(self.k).expect("validated k");
        (1.0 / self.m as f64) * self.zeta.exp() * (-(self.m as f64) / (2.0 * f)).exp()
    }
    /// Triple-lattice strength scale `(1/m) e^zeta e^{-3km/(4 pi)}`.
    pub fn tau_triple(&self) -> f64 {
        (1.0 / self.m as f64)
            * self.zeta.exp()
            * (-3.0 * (self.k * self.m) as f64 / (4.0 * PI)).exp()
    }
}

/// Bessel `J_0 .. J_nmax` by Miller's downward recurrence (all arguments).
pub fn bessel_jn(z: f64, n_max: usize) -> Vec<f64> {
    if z.abs() < 1e-10 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        if n_max >= 1 {
            out[1] = 0.5 * z;
        }
        return out;
    }
    let start = n_max + 18 + (1.3 * z) as usize;
    let mut jp = 0.0f64;
    let mut j = 1e-300f64;
    let mut out = vec![0.0; n_max + 1];
    let mut norm = 0.0;
    for n in (0..=start).rev() {
        let jm = (2.0 * (n + 1) as f64 / z) * j - jp;
        jp = j;
        j = jm;
        if n <= n_max {
            out[n] = j;
        }
        // normalization sum J_0 + 2 sum J_{2k} = 1
        if n % 2 == 0 {
            norm += if n == 0 { j } else { 2.0 * j };
        }
        if j.abs() > 1e250 {
            jp /= 1e250;
            j /= 1e250;
            norm /= 1e250;
            for v in out.iter_mut() {
                *v /= 1e250;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Angular-harmonic radial profiles of the annulus source term
/// `-(Delta + 4)(cutoff * (G0 - log delta * cos 2d))`, as coefficients of
/// `cos(2 j psi)`, `j = 0..=3`.
struct AnnulusProfiles {
    delta: f64,
    green: RadialGreen,
    log_delta: f64,
}

impl AnnulusProfiles {
    fn new(delta: f64) -> Self {
        AnnulusProfiles { delta, green: RadialGreen::new(4.0), log_delta: delta.ln() }
    }

    /// `rho_j(r)` for `j = 0..=3`; supported on `[2 delta, 3 delta]`.
    fn eval(&self, r: f64) -> [f64; 4] {
        let d = self.delta;
        if r <= 2.0 * d || r >= 3.0 * d {
            return [0.0; 4];
        }
        let u1 = ramp_d1(3.0 * d, 2.0 * d, r);
        let u2 = ramp_d2(3.0 * d, 2.0 * d, r);
        let l = self.log_delta;
        let bj = bessel_jn(2.0 * r, 7);
        let mut out = [0.0; 4];
        for (j, o) in out.iter_mut().enumerate() {
            let w = if j == 0 {
                self.green.eval(r) - l * bj[0]
            } else {
                -2.0 * l * neg1(j) * bj[2 * j]
            };
            let wr = if j == 0 {
                self.green.deriv(r) + 2.0 * l * bj[1]
            } else {
                2.0 * l * neg1(j) * (bj[2 * j + 1] - bj[2 * j - 1])
            };
            *o = -(u2 * w + u1 * w / r + 2.0 * u1 * wr);
        }
        out
    }
}

fn neg1(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Tabulated Hankel-type integrals `H_j(rho) = int rho_j(r) J_{2j}(rho r) r
/// dr` with 4-point Lagrange interpolation in `rho`.
struct HankelTables {
    rho_max: f64,
    drho: f64,
    tables: Vec<[f64; 4]>,
}

impl HankelTables {
    fn build(profiles: &AnnulusProfiles, rho_max: f64) -> Self {
        let d = profiles.delta;
        // H_j varies in rho on the scale pi / (3 delta)
        let drho = PI / (3.0 * d) / 48.0;
        let nrho = (rho_max / drho).ceil() as usize + 4;
        // composite Gauss-Legendre 8-point panels resolving J(rho r)
        let gl_x = [
            -0.9602898564975363,
            -0.7966664774136267,
            -0.525532409916329,
            -0.18343464249564978,
            0.18343464249564978,
            0.525532409916329,
            0.7966664774136267,
            0.9602898564975363,
        ];
        let gl_w = [
            0.10122853629037626,
            0.22238103445337448,
            0.31370664587788727,
            0.362683783378362,
            0.362683783378362,
            0.31370664587788727,
            0.22238103445337448,
            0.10122853629037626,
        ];
        let tables: Vec<[f64; 4]> = (0..=nrho)
            .into_par_iter()
            .map(|ir| {
                let rho = ir as f64 * drho;
                // the cutoff's derivative structure needs dense panels even
                // at rho = 0; add more once J(rho r) oscillates
                let panels = 48 + (rho * d * 3.0 / PI * 1.5).ceil() as usize;
                let (a, b) = (2.0 * d, 3.0 * d);
                let hp = (b - a) / panels as f64;
                let mut acc = [0.0; 4];
                for p in 0..panels {
                    let c = a + hp * (p as f64 + 0.5);
                    for q in 0..8 {
                        let r = c + 0.5 * hp * gl_x[q];
                        let w = 0.5 * hp * gl_w[q];
                        let prof = profiles.eval(r);
                        let bj = bessel_jn(rho * r, 7);
                        for j in 0..4 {
                            acc[j] += w * prof[j] * bj[2 * j] * r;
                        }
                    }
                }
                acc
            })
            .collect();
        HankelTables { rho_max, drho, tables }
    }

    fn lookup(&self, rho: f64) -> [f64; 4] {
        debug_assert!(rho <= self.rho_max + self.drho);
        let x = rho / self.drho;
        let i0 = (x.floor() as usize).clamp(1, self.tables.len() - 3);
        let t = x - i0 as f64;
        // 4-point Lagrange on nodes -1, 0, 1, 2 relative to i0
        let c = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t * t - 1.0) * (t - 2.0) / 2.0,
            -t * (t + 1.0) * (t - 2.0) / 2.0,
            t * (t * t - 1.0) / 6.0,
        ];
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] = c[0] * self.tables[i0 - 1][j]
                + c[1] * self.tables[i0][j]
                + c[2] * self.tables[i0 + 1][j]
                + c[3] * self.tables[i0 + 2][j];
        }
        out
    }
}

/// The spectral solve for the regular remainder on the torus.
pub struct CliffordSolution {
    pub cfg: CliffordConfig,
    pub a_max: usize,
    pub b_max: usize,
    hankel: HankelTables,
    /// strip contributions to the `b = 0` row
    strip_row: Vec<f64>,
    /// spectral coefficient of the mean (`(0,0)` entry of Phi')
    pub phi_prime_mean: f64,
    /// `Phi'(p_0)`
    pub phi_prime_p0: f64,
}

/// Closed strip source `-(Delta + 4)(Phihat - Phi_avg)` as a function of the
/// distance `d` to the nearest lattice circle (1D in the x-direction).
fn strip_source(m: u32, d: f64) -> f64 {
    let mf = m as f64;
    let (a, b) = (3.0 / mf, 2.0 / mf);
    if d <= b || d >= a {
        return 0.0;
    }
    let c1 = ramp_d1(a, b, d);
    let c2 = ramp_d2(a, b, d);
    // (m / 2 sqrt2) (c'' sin 2d + 4 c' cos 2d)
    mf / (2.0 * SQRT2) * (c2 * (2.0 * d).sin() + 4.0 * c1 * (2.0 * d).cos())
}

pub fn solve(cfg: &CliffordConfig) -> Result<CliffordSolution> {
    mean_flux(cfg.k)?;
    let delta = cfg.delta();
    let (k, m) = (cfg.k as f64, cfg.m as f64);
    let omega = cfg.omega_delta / delta;
    let a_max = (omega / (SQRT2 * k)).ceil() as usize;
    let b_max = (omega / (SQRT2 * m)).ceil() as usize;

    let profiles = AnnulusProfiles::new(delta);
    let hankel = HankelTables::build(&profiles, omega * 1.02 + 1.0);

    // strip coefficients (b = 0 only): the sources sit at the k circles
    // x = sqrt2 pi j / k; translation phases are all 1 for the lattice
    // frequencies a k sqrt2.
    let area = 2.0 * PI * PI;
    let strip_row: Vec<f64> = (0..=a_max)
        .map(|a| {
            let eps_a = if a == 0 { 1.0 } else { 2.0 };
            // 1D integral over one strip (both sides), Gauss on [2/m, 3/m]
            let (lo, hi) = (2.0 / m, 3.0 / m);
            let n = 160;
            let h = (hi - lo) / n as f64;
            let mut int = 0.0;
            for i in 0..n {
                let d = lo + h * (i as f64 + 0.5);
                int += strip_source(cfg.m, d) * (SQRT2 * a as f64 * k * d).cos() * h;
            }
            // both sides of each of the k circles; y-integral gives sqrt2 pi
            eps_a / area * k * SQRT2 * PI * 2.0 * int
        })
        .collect();

    // assembly: stream over (a, b), accumulate the p0 sum and the mean
    let km = k * m;
    let rows: Vec<(f64, f64)> = (0..=b_max)
        .into_par_iter()
        .map(|b| {
            let mut p0 = 0.0;
            let mut mean = 0.0;
            let wy = SQRT2 * b as f64 * m;
            for a in 0..=a_max {
                let wx = SQRT2 * a as f64 * k;
                let rho2 = wx * wx + wy * wy;
                if rho2 > omega * omega && (a, b) != (0, 0) {
                    continue;
                }
                let lam = 4.0 - 2.0 * ((a * a) as f64 * k * k + (b * b) as f64 * m * m);
                let coeff = spectral_coeff(
                    cfg, &hankel, &strip_row, a, b, wx, wy, km, area,
                ) / lam;
                p0 += coeff;
                if (a, b) == (0, 0) {
                    mean = coeff;
                }
            }
            (p0, mean)
        })
        .collect();
    let phi_prime_p0: f64 = rows.iter().map(|r| r.0).sum();
    let phi_prime_mean: f64 = rows.iter().map(|r| r.1).sum();

    Ok(CliffordSolution {
        cfg: cfg.clone(),
        a_max,
        b_max,
        hankel,
        strip_row,
        phi_prime_mean,
        phi_prime_p0,
    })
}

/// Source coefficient `Ehat_{a,b}` of `-(Delta+4)(Ghat + Phihat)` in the
/// cosine basis.
#[allow(clippy::too_many_arguments)]
fn spectral_coeff(
    _cfg: &CliffordConfig,
    hankel: &HankelTables,
    strip_row: &[f64],
    a: usize,
    b: usize,
    wx: f64,
    wy: f64,
    km: f64,
    area: f64,
) -> f64 {
    let eps = (if a == 0 { 1.0 } else { 2.0 }) * (if b == 0 { 1.0 } else { 2.0 });
    let rho = (wx * wx + wy * wy).sqrt();
    let h = hankel.lookup(rho);
    // F_ann(omega) = 2 pi sum_j (-1)^j cos(2 j phi) H_j(rho)
    let (c2, c4, c6) = if rho < 1e-14 {
        (1.0, 1.0, 1.0)
    } else {
        let c2 = (wx * wx - wy * wy) / (rho * rho);
        let c4 = 2.0 * c2 * c2 - 1.0;
        let c6 = c2 * (2.0 * c4 - 1.0) + (1.0 - c2) * 0.0 + (4.0 * c2 * c2 - 3.0) * c2 - c4 * c2;
        // Chebyshev: cos6 = 2 c2 * cos4 - cos2
        let c6 = 2.0 * c2 * c4 - c2;
        let _ = c6;
        (c2, c4, 2.0 * c2 * c4 - c2)
    };
    let f_ann = 2.0 * PI * (h[0] - c2 * h[1] + c4 * h[2] - c6 * h[3]);
    let mut coeff = eps / area * km * f_ann;
    if b == 0 && a < strip_row.len() {
        coeff += strip_row[a];
    }
    coeff
}

impl CliffordSolution {
    /// Source coefficient accessor (diagnostics).
    pub fn debug_coeff(&self, a: usize, b: usize) -> f64 {
        let (k, m) = (self.cfg.k as f64, self.cfg.m as f64);
        spectral_coeff(
            &self.cfg,
            &self.hankel,
            &self.strip_row,
            a,
            b,
            SQRT2 * a as f64 * k,
            SQRT2 * b as f64 * m,
            k * m,
            2.0 * PI * PI,
        )
    }

    /// `Phi'(x, y)` by streaming the coefficient array.
    pub fn phi_prime_at(&self, x: f64, y: f64) -> f64 {
        let (k, m) = (self.cfg.k as f64, self.cfg.m as f64);
        let omega = self.cfg.omega_delta / self.cfg.delta();
        let rows: Vec<f64> = (0..=self.b_max)
            .into_par_iter()
            .map(|b| {
                let wy = SQRT2 * b as f64 * m;
                let cy = (wy * y).cos();
                let mut acc = 0.0;
                for a in 0..=self.a_max {
                    let wx = SQRT2 * a as f64 * k;
                    if wx * wx + wy * wy > omega * omega && (a, b) != (0, 0) {
                        continue;
                    }
                    let lam = 4.0 - 2.0 * ((a * a) as f64 * k * k + (b * b) as f64 * m * m);
                    let c = spectral_coeff(
                        &self.cfg,
                        &self.hankel,
                        &self.strip_row,
                        a,
                        b,
                        wx,
                        wy,
                        self.cfg.k as f64 * self.cfg.m as f64,
                        2.0 * PI * PI,
                    ) / lam;
                    acc += c * (wx * x).cos();
                }
                acc * cy
            })
            .collect();
        rows.iter().sum()
    }

    /// `Phi'` on a product grid (separable accumulation).
    pub fn phi_prime_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<Vec<f64>> {
        let (k, m) = (self.cfg.k as f64, self.cfg.m as f64);
        let omega = self.cfg.omega_delta / self.cfg.delta();
        let cos_y: Vec<Vec<f64>> = (0..=self.b_max)
            .map(|b| ys.iter().map(|&y| (SQRT2 * b as f64 * m * y).cos()).collect())
            .collect();
        // per-a inner sums over b at each y
        let partial: Vec<Vec<f64>> = (0..=self.a_max)
            .into_par_iter()
            .map(|a| {
                let wx = SQRT2 * a as f64 * k;
                let mut s = vec![0.0; ys.len()];
                for b in 0..=self.b_max {
                    let wy = SQRT2 * b as f64 * m;
                    if wx * wx + wy * wy > omega * omega && (a, b) != (0, 0) {
                        continue;
                    }
                    let lam = 4.0 - 2.0 * ((a * a) as f64 * k * k + (b * b) as f64 * m * m);
                    let c = spectral_coeff(
                        &self.cfg,
                        &self.hankel,
                        &self.strip_row,
                        a,
                        b,
                        wx,
                        wy,
                        k * m,
                        2.0 * PI * PI,
                    ) / lam;
                    for (iy, row) in s.iter_mut().enumerate() {
                        *row += c * cos_y[b][iy];
                    }
                }
                s
            })
            .collect();
        let mut out = vec![vec![0.0; ys.len()]; xs.len()];
        for (a, pa) in partial.iter().enumerate() {
            let wx = SQRT2 * a as f64 * k;
            for (ix, &x) in xs.iter().enumerate() {
                let cx = (wx * x).cos();
                for iy in 0..ys.len() {
                    out[ix][iy] += cx * pa[iy];
                }
            }
        }
        out
    }

    /// Spliced local singular model at `(x, y)` (the `Ghat` term), built
    /// from the nearest lattice point.
    pub fn ghat_at(&self, x: f64, y: f64) -> f64 {
        let delta = self.cfg.delta();
        let (dx, dy) = self.fold(x, y);
        let r = (dx * dx + dy * dy).sqrt();
        if r >= 3.0 * delta {
            return 0.0;
        }
        let cut = ramp(3.0 * delta, 2.0 * delta, r);
        let g = RadialGreen::new(4.0);
        cut * (g.eval(r) - delta.ln() * (2.0 * dx.abs()).cos())
    }

    /// Sheet average term `Phihat` at distance `d = |dx|` from the nearest
    /// circle.
    pub fn phihat_at(&self, x: f64) -> f64 {
        let m = self.cfg.m;
        let cell = side() / self.cfg.k as f64;
        let mut d = x.rem_euclid(cell);
        if d > 0.5 * cell {
            d = cell - d;
        }
        let avg = phi_avg(self.cfg.k, m, d).expect("distance folded into range");
        let mf = m as f64;
        let mut v = avg;
        if d < 3.0 / mf {
            let cut = ramp(3.0 / mf, 2.0 / mf, d);
            v -= cut * mf / (2.0 * SQRT2) * (2.0 * d).sin();
        }
        v
    }

    /// Offsets to the nearest lattice point.
    fn fold(&self, x: f64, y: f64) -> (f64, f64) {
        let cx = side() / self.cfg.k as f64;
        let cy = side() / self.cfg.m as f64;
        let mut dx = x.rem_euclid(cx);
        if dx > 0.5 * cx {
            dx -= cx;
        }
        let mut dy = y.rem_euclid(cy);
        if dy > 0.5 * cy {
            dy -= cy;
        }
        (dx, dy)
    }

    /// Full unit-strength solution `Phi(x, y)`.
    pub fn phi_at(&self, x: f64, y: f64) -> f64 {
        self.ghat_at(x, y) + self.phihat_at(x) + self.phi_prime_at(x, y)
    }

    /// Mean of `Phi` over the torus (quadratures of the spliced parts plus
    /// the spectral mean).
    pub fn phi_mean(&self) -> f64 {
        let delta = self.cfg.delta();
        let (k, m) = (self.cfg.k as f64, self.cfg.m as f64);
        let area = 2.0 * PI * PI;
        // Ghat: km identical radial bumps; angular average of cos(2 dx) over
        // a circle of radius r is J0(2r)
        let g = RadialGreen::new(4.0);
        let n = 4000;
        let mut ghat_mean = 0.0;
        for i in 0..n {
            let r = 3.0 * delta * (i as f64 + 0.5) / n as f64;
            let cut = ramp(3.0 * delta, 2.0 * delta, r);
            let j0 = bessel_jn(2.0 * r, 1)[0];
            ghat_mean += cut * (g.eval(r) - delta.ln() * j0) * r * (3.0 * delta / n as f64);
        }
        ghat_mean *= k * m * 2.0 * PI / area;
        // Phihat: 1D average over x
        let cell = side() / k;
        let nx = 20000;
        let mut phihat_mean = 0.0;
        for i in 0..nx {
            let x = cell * (i as f64 + 0.5) / nx as f64;
            phihat_mean += self.phihat_at(x) / nx as f64;
        }
        ghat_mean + phihat_mean + self.phi_prime_mean
    }

    /// Single-lattice mismatch by circle extraction around `p_0`, returning
    /// `mu / tau`.  The spliced parts are extracted by quadrature; the
    /// spectral remainder enters through its value at `p_0` (its gradient
    /// vanishes by symmetry).
    pub fn mismatch_single(&self) -> f64 {
        let delta = self.cfg.delta();
        let r0 = 0.25 * delta;
        let f = |x: f64, y: f64| -> f64 {
            let r = (x * x + y * y).sqrt();
            self.ghat_at(x, y) + self.phihat_at(x) - r.ln()
        };
        let nodes = 96;
        let radii = [r0, 0.5 * r0, 0.25 * r0];
        let mut vals = [0.0; 3];
        for (i, &r) in radii.iter().enumerate() {
            let mut c0 = 0.0;
            for j in 0..nodes {
                let psi = 2.0 * PI * j as f64 / nodes as f64;
                c0 += f(r * psi.cos(), r * psi.sin());
            }
            vals[i] = c0 / nodes as f64;
        }
        // r^2 log r Richardson (3 radii)
        let qa = |r: f64| r * r * (1.0 / r).ln();
        let qb = |r: f64| r * r;
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mbase = [
            [1.0, qa(radii[0]), qb(radii[0])],
            [1.0, qa(radii[1]), qb(radii[1])],
            [1.0, qa(radii[2]), qb(radii[2])],
        ];
        let d = det3(mbase);
        let mut mnum = mbase;
        for (row, v) in vals.iter().enumerate() {
            mnum[row][0] = *v;
        }
        let spliced_const = det3(mnum) / d;
        spliced_const + self.phi_prime_p0 + (self.cfg.tau() / 2.0).ln()
    }

    /// Triple-lattice mismatch values `mu_i` (unit strengths scaled by
    /// `e^{sigma_i} tau`), plus the averaged combinations.
    pub fn mismatch_triple(&self) -> Result<TripleMismatch> {
        let (s1, s2) = self
            .cfg
            .triple
            .ok_or_else(|| Error::InvalidParameter("triple config required".into()))?;
        let s0 = -s1 - s2;
        let sig = [s0, s1, s2];
        let (k, m) = (self.cfg.k as f64, self.cfg.m as f64);
        let km = k * m;
        let tau = self.cfg.tau_triple();
        let delta = self.cfg.delta();
        // lattice offsets of p_0, p_1, p_2
        let offs = [
            (0.0, 0.0),
            (side() / (2.0 * k), 0.0),
            (0.0, side() / (2.0 * m)),
        ];
        // regular part of the plain decomposition at a relative offset
        let phi_reg = |dx: f64, dy: f64| -> f64 {
            if dx == 0.0 && dy == 0.0 {
                self.phihat_at(0.0) + self.phi_prime_p0 - km / (4.0 * PI)
            } else {
                self.phihat_at(dx) + self.phi_prime_at(dx, dy) - km / (4.0 * PI)
            }
        };
        let mut mu = [0.0; 3];
        for i in 0..3 {
            let mut v = 0.0;
            for j in 0..3 {
                let (dx, dy) = (offs[i].0 - offs[j].0, offs[i].1 - offs[j].1);
                v += sig[j].exp() * (km / (4.0 * PI) + phi_reg(dx, dy));
            }
            v += sig[i].exp() * ((sig[i].exp() * tau / (2.0 * delta)).ln());
            mu[i] = v;
        }
        Ok(TripleMismatch {
            mu,
            avg: (mu[0] + mu[1] + mu[2]) / 3.0,
            comb2: (2.0 * mu[2] - mu[1] - mu[0]) / 3.0,
            comb1: (2.0 * mu[1] - mu[2] - mu[0]) / 3.0,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleMismatch {
    pub mu: [f64; 3],
    pub avg: f64,
    pub comb2: f64,
    pub comb1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_flux_values() {
        // closed form at k = 4
        let f = mean_flux(4).unwrap();
        assert!((f - SQRT2 * (SQRT2 * PI / 4.0).tan()).abs() < 1e-15);
        assert!((f - 2.8538669485301019).abs() < 1e-12);
        assert!(mean_flux(2).is_err());
    }

    #[test]
    fn phi_avg_closed_form() {
        for (k, m) in [(3u32, 12u32), (4, 32), (5, 20)] {
            let at0 = phi_avg(k, m, 0.0).unwrap();
            let f = mean_flux(k).unwrap();
            assert!((at0 - m as f64 / (2.0 * f)).abs() < 1e-12);
        }
        // derivative jump at the circle equals the per-circle line density:
        // 2 d/dd phi_avg|_{0+} = -2 * m/(sqrt2 sin a) * sin(a) * ... = m sqrt2
        let (k, m) = (4u32, 32u32);
        let h = 1e-7;
        let dd = (phi_avg(k, m, h).unwrap() - phi_avg(k, m, 0.0).unwrap()) / h;
        assert!((2.0 * dd.abs() - SQRT2 * m as f64).abs() < 1e-4);
    }

    #[test]
    fn bessel_miller_matches_series() {
        for z in [0.5, 2.0, 10.0, 40.0, 80.0] {
            let b = bessel_jn(z, 7);
            let j0 = crate::greens::bessel_j0_series(z);
            if z <= 20.0 {
                assert!((b[0] - j0).abs() < 1e-10, "z = {z}: {} vs {j0}", b[0]);
            }
            // Wronskian-like identity J_{n-1} + J_{n+1} = (2n/z) J_n
            for n in 1..6 {
                let lhs = b[n - 1] + b[n + 1];
                let rhs = 2.0 * n as f64 / z * b[n];
                assert!((lhs - rhs).abs() < 1e-12, "z = {z}, n = {n}");
            }
        }
        // reference values
        let b = bessel_jn(1.0, 3);
        assert!((b[1] - 0.4400505857449335).abs() < 1e-12);
    }

    #[test]
    fn mean_value_identity() {
        // (1/|T|) int Phi = k m / (4 pi) to 1e-3 relative
        let mut cfg = CliffordConfig::new(4, 16).unwrap();
        cfg.omega_delta = 22.0;
        let sol = solve(&cfg).unwrap();
        let mean = sol.phi_mean();
        let expect = (cfg.k * cfg.m) as f64 / (4.0 * PI);
        assert!(
            (mean - expect).abs() / expect < 1e-3,
            "mean {mean} vs {expect}"
        );
    }

    #[test]
    fn single_lattice_mismatch_identity() {
        // mu/tau - zeta - Phi'(p) = log 50
        let mut cfg = CliffordConfig::new(4, 16).unwrap();
        cfg.zeta = 0.3;
        cfg.omega_delta = 22.0;
        let sol = solve(&cfg).unwrap();
        let mu = sol.mismatch_single();
        let lhs = mu - cfg.zeta - sol.phi_prime_p0;
        assert!(
            (lhs - 50f64.ln()).abs() < 1e-6,
            "identity: {lhs} vs {}",
            50f64.ln()
        );
    }

    #[test]
    fn residual_away_from_cutoffs() {
        // (Delta_gtilde + 4/m^2) Phi' - E' at probe points away from the
        // cutoff supports: series tail only; check < 1e-6
        let mut cfg = CliffordConfig::new(4, 16).unwrap();
        cfg.omega_delta = 22.0;
        let sol = solve(&cfg).unwrap();
        let m = cfg.m as f64;
        // evaluate (Delta + 4) Phi' by FD of the streamed series, compare
        // with 0 (E' vanishes away from the annuli and strips)
        let (x, y) = (0.31, 0.11); // far from circles (x-cell 1.11) and strips
        let h = 2e-4;
        let lap = (sol.phi_prime_at(x + h, y) + sol.phi_prime_at(x - h, y)
            + sol.phi_prime_at(x, y + h)
            + sol.phi_prime_at(x, y - h)
            - 4.0 * sol.phi_prime_at(x, y))
            / (h * h);
        let val = sol.phi_prime_at(x, y);
        let res = (lap + 4.0 * val) / (m * m);
        assert!(res.abs() < 1e-6, "scaled residual {res:.2e}");
    }

    #[test]
    fn triple_lattice_combination_scaling() {
        // sigma = 0: the difference combinations carry no km-scale term
        for m in [8u32, 16] {
            let mut cfg = CliffordConfig::new(m, m).unwrap();
            cfg.triple = Some((0.0, 0.0));
            cfg.omega_delta = 22.0;
            let sol = solve(&cfg).unwrap();
            let tm = sol.mismatch_triple().unwrap();
            let km = (cfg.k * cfg.m) as f64;
            assert!(
                tm.comb2.abs() < 0.1 * km / (4.0 * PI),
                "m = {m}: comb2 = {} vs km scale {}",
                tm.comb2,
                km / (4.0 * PI)
            );
            // nonzero sigma_2 shifts comb2 by about -3 km sigma_2 / (4 pi)
            let mut cfg2 = cfg.clone();
            cfg2.triple = Some((0.0, 0.01));
            let sol2 = solve(&cfg2).unwrap();
            let tm2 = sol2.mismatch_triple().unwrap();
            let shift = tm2.comb2 - tm.comb2;
            let expect = -3.0 * km / (4.0 * PI) * 0.01;
            assert!(
                (shift - expect).abs() < 0.35 * expect.abs(),
                "shift {shift} vs {expect}"
            );
        }
    }
}

/// Diagnostic accessor for the annulus harmonic profiles.
pub fn debug_profiles(delta: f64, r: f64) -> [f64; 4] {
    AnnulusProfiles::new(delta).eval(r)
}

/// Diagnostic: tabulated Hankel values vs direct fine quadrature.
pub fn debug_hankel(cfg: &CliffordConfig, rho: f64) -> ([f64; 4], [f64; 4]) {
    let delta = cfg.delta();
    let profiles = AnnulusProfiles::new(delta);
    let tables = HankelTables::build(&profiles, cfg.omega_delta / delta * 1.02 + 1.0);
    let interp = tables.lookup(rho);
    // direct trapezoid with 20000 points
    let n = 20000;
    let mut direct = [0.0; 4];
    for i in 0..n {
        let r = 2.0 * delta + delta * (i as f64 + 0.5) / n as f64;
        let p = profiles.eval(r);
        let bj = bessel_jn(rho * r, 7);
        for j in 0..4 {
            direct[j] += p[j] * bj[2 * j] * r * delta / n as f64;
        }
    }
    (interp, direct)
}
