use ldforge::clifford::*;
use ldforge::cutoff::{ramp, ramp_d1, ramp_d2};
use ldforge::greens::RadialGreen;
use std::f64::consts::PI;
const SQRT2: f64 = std::f64::consts::SQRT_2;

fn main() {
    let mut cfg = CliffordConfig::new(4, 16).unwrap();
    cfg.omega_delta = 22.0;
    let (k, m) = (4f64, 16f64);
    let delta = cfg.delta();
    let g = RadialGreen::new(4.0);
    let l = delta.ln();
    // brute-force quadrature of the annulus source coefficient for given (a,b)
    let brute = |a: usize, b: usize| -> f64 {
        let wx = SQRT2 * a as f64 * k;
        let wy = SQRT2 * b as f64 * m;
        let eps = (if a==0 {1.0} else {2.0}) * (if b==0 {1.0} else {2.0});
        // E0(u) in polar
        let nr = 400; let np = 512;
        let mut int = 0.0;
        for ir in 0..nr {
            let r = 2.0*delta + delta*(ir as f64 + 0.5)/nr as f64;
            let u1 = ramp_d1(3.0*delta, 2.0*delta, r);
            let u2 = ramp_d2(3.0*delta, 2.0*delta, r);
            for ip in 0..np {
                let psi = 2.0*PI*ip as f64/np as f64;
                let (ux, uy) = (r*psi.cos(), r*psi.sin());
                let d = ux.abs();
                let w = g.eval(r) - l*(2.0*d).cos();
                let wr = g.deriv(r) + 2.0*l*(2.0*d).sin()*(d/r);
                let e0 = -(u2*w + u1*w/r + 2.0*u1*wr);
                int += e0 * (wx*ux).cos() * (wy*uy).cos() * r * (delta/nr as f64) * (2.0*PI/np as f64);
            }
        }
        eps/(2.0*PI*PI) * k*m*int
    };
    let sol = solve(&cfg).unwrap();
    for (a,b) in [(0usize,0usize),(1,0),(0,1),(3,2),(10,5)] {
        let bq = brute(a,b);
        let sc = sol.debug_coeff(a,b);
        println!("(a,b)=({a},{b}): brute={bq:.8e} spectral={sc:.8e} ratio={}", sc/bq);
    }
    println!("phi_prime_mean={} phi_prime_p0={}", sol.phi_prime_mean, sol.phi_prime_p0);
    // strip row direct check at a=0: integral of strip source
    println!("strip_row[0] should be ~ -(mean of (Delta+4)(Phihat-avg)) = 4*mean correction");
}
