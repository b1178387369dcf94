//! Green's-function building blocks: the radial local Green's function of
//! `Delta + V0` with a unit logarithmic pole, closed-form log-sums over
//! equally spaced circle lattices, and the scaled-limit kernel.

/// Bessel `J_0` by power series (adequate for the small arguments used here:
/// the radial Green's function lives on disks of radius a few `delta`).
pub fn bessel_j0_series(z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_j0_series_d(z: f64) -> f64 {
    // d/dz J_0(z) = -J_1(z)
    let q = -0.25 * z * z;
    let mut term = 0.5 * z; // leading term of J_1
    let mut sum = term;
    for k in 1..60 {
        term *= q / ((k * (k + 1)) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -sum
}

/// Radial local Green's function `G(r) = J_0(nu r) log r + h(r)` of
/// `Delta + V0` on the plane (`nu = sqrt(V0)`), normalized so that
/// `G - log r -> 0` at the pole.  `h` solves the induced regular ODE by a
/// power series; adequate within `r <~ 1`.
#[derive(Debug, Clone)]
pub struct RadialGreen {
    v0: f64,
    nu: f64,
    /// coefficients of h = sum a_{2k} r^{2k}, a_0 = 0
    a: Vec<f64>,
}

impl RadialGreen {
    pub fn new(v0: f64) -> Self {
        assert!(v0 > 0.0, "potential value must be positive");
        let nu = v0.sqrt();
        // 4 (j+1)^2 a_{2j+2} + V0 a_{2j} = (-1)^j V0^{j+1} / (4^j j! (j+1)!)
        let nterms = 40usize;
        let mut a = vec![0.0; nterms + 1];
        let mut rhs = v0; // j = 0 value of the right-hand side
        for j in 0..nterms {
            let aj = a[j];
            a[j + 1] = (rhs - v0 * aj) / (4.0 * ((j + 1) * (j + 1)) as f64);
            rhs *= -v0 / (4.0 * ((j + 1) * (j + 2)) as f64);
        }
        RadialGreen { v0, nu, a }
    }

    fn h(&self, r: f64) -> f64 {
        let r2 = r * r;
        let mut acc = 0.0;
        for &c in self.a.iter().rev() {
            acc = acc * r2 + c;
        }
        acc // a_0 = 0 is stored at index 0
    }

    fn dh(&self, r: f64) -> f64 {
        let r2 = r * r;
        let mut acc = 0.0;
        for (k, &c) in self.a.iter().enumerate().rev() {
            if k == 0 {
                continue;
            }
            acc += (2 * k) as f64 * c * r2.powi(k as i32 - 1);
        }
        acc * r
    }

    /// `G(r)`.
    pub fn eval(&self, r: f64) -> f64 {
        bessel_j0_series(self.nu * r) * r.ln() + self.h(r)
    }

    /// `G'(r)`.
    pub fn deriv(&self, r: f64) -> f64 {
        self.nu * bessel_j0_series_d(self.nu * r) * r.ln() + bessel_j0_series(self.nu * r) / r
            + self.dh(r)
    }

    /// `G(r) - log r` (smooth through the pole).
    pub fn eval_minus_log(&self, r: f64) -> f64 {
        (bessel_j0_series(self.nu * r) - 1.0) * r.ln() + self.h(r)
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }
}

/// Closed-form log-sum of a lattice of `m` equally spaced unit-strength
/// poles on the circle `s = s_c` at angular offset `theta0`:
/// `g = (1/2) log(sin^2(m dtheta / 2) + sinh^2(m ds / 2))`, harmonic in the
/// flat cylinder metric away from the poles, with `g = log r + log(m/2) +
/// O(r^2)` at each pole.
pub fn circle_log_sum(m: u32, theta0: f64, s_c: f64, theta: f64, s: f64) -> f64 {
    let mf = m as f64;
    let a = (0.5 * mf * (theta - theta0)).sin();
    let b = (0.5 * mf * (s - s_c)).sinh();
    0.5 * (a * a + b * b).ln()
}

/// Gradient `(d/dtheta, d/ds)` of [`circle_log_sum`].
pub fn circle_log_sum_grad(m: u32, theta0: f64, s_c: f64, theta: f64, s: f64) -> (f64, f64) {
    let mf = m as f64;
    let x = 0.5 * mf * (theta - theta0);
    let y = 0.5 * mf * (s - s_c);
    let den = x.sin().powi(2) + y.sinh().powi(2);
    (
        0.5 * mf * x.sin() * x.cos() / den,
        0.5 * mf * y.sinh() * y.cosh() / den,
    )
}

/// Oscillatory part of [`circle_log_sum`] summed in closed form is
/// `-(1/n) e^{-n m |s - s_c|} cos(n m (theta - theta0))`; this returns the
/// rotationally invariant part `m |s - s_c| / 2 - log 2`.
pub fn circle_log_sum_avg(m: u32, s_c: f64, s: f64) -> f64 {
    0.5 * m as f64 * (s - s_c).abs() - 2f64.ln()
}

/// Scaled-limit kernel `(1/2) log(sin^2(t/2) + sinh^2(u/2))` in shifted
/// coordinates `(t, u)` around a lattice point; equals the infinite-`m`
/// limit of recentered circle lattices.
pub fn green_limit(theta_t: f64, s_hat: f64) -> f64 {
    let a = (0.5 * theta_t).sin();
    let b = (0.5 * s_hat).sinh();
    0.5 * (a * a + b * b).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_matches_reference() {
        // reference values (Abramowitz & Stegun 9.1)
        assert!((bessel_j0_series(0.0) - 1.0).abs() < 1e-16);
        assert!((bessel_j0_series(1.0) - 0.7651976865579666).abs() < 1e-14);
        assert!((bessel_j0_series(2.0) - 0.22389077914123567).abs() < 1e-14);
        // derivative = -J_1
        assert!((bessel_j0_series_d(1.0) + 0.4400505857449335).abs() < 1e-14);
    }

    #[test]
    fn radial_green_solves_ode() {
        // (G'' + G'/r + V0 G) = 0 away from the pole
        for v0 in [2.0, 4.0, 0.83] {
            let g = RadialGreen::new(v0);
            for i in 1..40 {
                let r = 0.02 * i as f64;
                let h = 1e-5;
                let d2 = (g.eval(r + h) - 2.0 * g.eval(r) + g.eval(r - h)) / (h * h);
                let d1 = (g.eval(r + h) - g.eval(r - h)) / (2.0 * h);
                let res = d2 + d1 / r + v0 * g.eval(r);
                assert!(res.abs() < 2e-4, "v0 = {v0}, r = {r}: res = {res:.2e}");
            }
        }
    }

    #[test]
    fn radial_green_normalization_and_deriv() {
        let g = RadialGreen::new(2.0);
        // G - log r -> 0 like r^2 log r
        for r in [1e-3, 1e-4, 1e-5] {
            let d = g.eval_minus_log(r);
            assert!(d.abs() < 3.0 * r * r * r.ln().abs() + 1e-14, "r = {r}: {d:.2e}");
        }
        // derivative consistent with finite differences
        for r in [0.05, 0.2, 0.5] {
            let h = 1e-6;
            let fd = (g.eval(r + h) - g.eval(r - h)) / (2.0 * h);
            assert!((g.deriv(r) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn circle_log_sum_matches_pointwise_pole() {
        // near the pole at (theta0, s_c): g = log r + log(m/2) + O(r^2)
        let (m, theta0, s_c) = (16u32, 0.13, 0.8);
        for r in [1e-3, 1e-4] {
            for ang in [0.0f64, 1.0, 2.5] {
                let th = theta0 + r * ang.cos();
                let s = s_c + r * ang.sin();
                let g = circle_log_sum(m, theta0, s_c, th, s);
                let expect = r.ln() + (m as f64 / 2.0).ln();
                let bound = (m as f64 * r).powi(2) / 12.0 + 1e-10;
                assert!((g - expect).abs() < bound, "r = {r}");
            }
        }
    }

    #[test]
    fn circle_log_sum_equals_sum_of_logs() {
        // compare against a literal sum over the m poles of log |distance|
        // in the universal cover (converged by summing theta-images)
        let (m, theta0, s_c) = (8u32, 0.0, 0.0);
        let (theta, s) = (0.19, 0.23);
        let mut sum = 0.0;
        for j in 0..m {
            let tj = theta0 + 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            // distance on the cylinder via the flat-cylinder pole expansion:
            // log |2 sin((theta - tj)/2 + i s/2)|, which is the image sum of
            // the planar log over theta-periods
            let x = 0.5 * (theta - tj);
            let y: f64 = 0.5 * (s - s_c);
            sum += 0.5 * (x.sin().powi(2) + y.sinh().powi(2)).ln();
        }
        // the m-fold product identity: sum over poles of the single-pole
        // cylinder log equals circle_log_sum + (m-1) log... verify against
        // the mode expansion instead, which is the form used downstream.
        let avg = circle_log_sum_avg(m, s_c, s);
        let mut osc = 0.0;
        for n in 1..400 {
            let nf = n as f64;
            osc -= ((-nf * m as f64 * (s - s_c).abs()).exp() / nf)
                * (nf * m as f64 * (theta - theta0)).cos();
        }
        let g = circle_log_sum(m, theta0, s_c, theta, s);
        assert!((g - (avg + osc)).abs() < 1e-12, "mode expansion mismatch");
        // and the literal sum differs from g by the constant (m - 1) log 2,
        // from the product identity for the roots of unity
        let c = g - sum;
        assert!((c - (m as f64 - 1.0) * 2f64.ln()).abs() < 1e-10, "c = {c}");
    }

    #[test]
    fn green_limit_values() {
        // value at (pi, 0) is log(1)/1 = 0
        assert!(green_limit(std::f64::consts::PI, 0.0).abs() < 1e-15);
        // angular average equals |s|/2 - log 2 (spectral trapezoid)
        for s_hat in [0.3, 1.0, 2.0] {
            let n = 4096;
            let mut avg = 0.0;
            for i in 0..n {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                avg += green_limit(t, s_hat);
            }
            avg /= n as f64;
            let expect = 0.5 * s_hat - 2f64.ln();
            assert!((avg - expect).abs() < 1e-9, "s_hat = {s_hat}: {avg} vs {expect}");
        }
        // second angular derivative at (pi, 0) is -1/4
        let h = 1e-4;
        let d2 = (green_limit(std::f64::consts::PI + h, 0.0)
            - 2.0 * green_limit(std::f64::consts::PI, 0.0)
            + green_limit(std::f64::consts::PI - h, 0.0))
            / (h * h);
        assert!((d2 + 0.25).abs() < 1e-7, "d2 = {d2}");
    }
}
