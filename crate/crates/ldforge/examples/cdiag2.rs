use ldforge::clifford::*;
use ldforge::cutoff::{ramp_d1, ramp_d2};
use ldforge::greens::RadialGreen;
use std::f64::consts::PI;

fn main() {
    let delta: f64 = 1.0/1600.0;
    let g = RadialGreen::new(4.0);
    let l = delta.ln();
    // direct E0 at (r, psi) vs harmonic expansion via debug_profiles
    let r = 2.4*delta;
    for psi in [0.0f64, 0.7, 1.3, PI/2.0] {
        let d = (r*psi.cos()).abs();
        let u1 = ramp_d1(3.0*delta, 2.0*delta, r);
        let u2 = ramp_d2(3.0*delta, 2.0*delta, r);
        let w = g.eval(r) - l*(2.0*d).cos();
        let wr = g.deriv(r) + 2.0*l*(2.0*d).sin()*(d/r);
        let e0 = -(u2*w + u1*w/r + 2.0*u1*wr);
        let prof = debug_profiles(delta, r);
        let e0h: f64 = (0..4).map(|j| prof[j]*(2.0*j as f64*psi).cos()).sum();
        println!("psi={psi:.2}: direct={e0:.6e} harmonics={e0h:.6e} ratio={}", e0h/e0);
    }
}
