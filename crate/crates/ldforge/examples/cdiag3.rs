use ldforge::clifford::*;
fn main() {
    let mut cfg = CliffordConfig::new(4, 16).unwrap();
    cfg.omega_delta = 22.0;
    for rho in [0.0, 22.627, 45.25, 500.0, 5000.0] {
        let (interp, direct) = debug_hankel(&cfg, rho);
        println!("rho={rho}: interp={interp:?}");
        println!("         direct={direct:?}");
    }
}
