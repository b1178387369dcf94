//! Smooth cutoff functions used to splice local models into global objects.

/// Smooth monotone step: 0 on (-inf, -1], 1 on [1, inf), and `step(t) - 1/2`
/// is odd.  Built from the standard `exp(-1/x)` mollifier.
pub fn step(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = bump(1.0 + t);
        let b = bump(1.0 - t);
        a / (a + b)
    }
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Cutoff ramp on the real line: 0 near `a`, 1 near `b`, monotone in between.
/// The transition is confined to the middle third of `[a, b]`, and
/// `ramp(a, b, x) + ramp(b, a, x) == 1`.
pub fn ramp(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a != b, "ramp endpoints must differ");
    // linear map with L(a) = -3, L(b) = 3
    let t = -3.0 + 6.0 * (x - a) / (b - a);
    step(t)
}

/// Two-slot blend: transits from `f0` where `d` is near `a` to `f1` where `d`
/// is near `b`.  Linear in `(f0, f1)`.
pub fn blend(a: f64, b: f64, d: f64, f0: f64, f1: f64) -> f64 {
    ramp(a, b, d) * f1 + ramp(b, a, d) * f0
}

/// First derivative of [`step`].
pub fn step_d1(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let a = bump(1.0 + t);
    let b = bump(1.0 - t);
    let da = a / (1.0 + t).powi(2);
    let db = -b / (1.0 - t).powi(2);
    (da * b - a * db) / (a + b).powi(2)
}

/// First derivative of [`ramp`] with respect to `x`.
pub fn ramp_d1(a: f64, b: f64, x: f64) -> f64 {
    let t = -3.0 + 6.0 * (x - a) / (b - a);
    step_d1(t) * 6.0 / (b - a)
}

/// Second derivative of [`ramp`] with respect to `x`, by central differences
/// of the analytic first derivative (the second derivative of the mollifier
/// quotient is unwieldy in closed form).
pub fn ramp_d2(a: f64, b: f64, x: f64) -> f64 {
    let h = 1e-6 * (b - a).abs();
    (ramp_d1(a, b, x + h) - ramp_d1(a, b, x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_clamps_and_centers() {
        assert_eq!(step(-1.0), 0.0);
        assert_eq!(step(1.0), 1.0);
        assert_eq!(step(-5.0), 0.0);
        assert_eq!(step(7.0), 1.0);
        assert!((step(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ramp_endpoint_clamps() {
        assert_eq!(ramp(0.0, 1.0, 1.0), 1.0);
        assert_eq!(ramp(0.0, 1.0, 0.0), 0.0);
        // transition confined to middle third
        assert_eq!(ramp(0.0, 1.0, 0.32), 0.0);
        assert_eq!(ramp(0.0, 1.0, 0.68), 1.0);
        // decreasing orientation
        assert_eq!(ramp(1.0, 0.0, 0.0), 1.0);
        assert_eq!(ramp(1.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn blend_transits_from_f0_to_f1() {
        // d <= a + (b-a)/3 keeps the first slot (a < b case)
        let (a, b) = (1.0, 4.0);
        for d in [0.0, 1.0, 1.9] {
            assert_eq!(blend(a, b, d, 7.0, -3.0), 7.0, "d = {d}");
        }
        for d in [3.1, 4.0, 9.0] {
            assert_eq!(blend(a, b, d, 7.0, -3.0), -3.0, "d = {d}");
        }
    }

    #[test]
    fn ramp_derivative_matches_finite_difference() {
        let (a, b) = (0.5, 2.5);
        for i in 0..40 {
            let x = 0.4 + 0.055 * i as f64;
            let h = 1e-6;
            let fd = (ramp(a, b, x + h) - ramp(a, b, x - h)) / (2.0 * h);
            assert!((ramp_d1(a, b, x) - fd).abs() < 1e-7, "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn ramp_partition_of_unity(x in -10.0..10.0f64, a in -3.0..3.0f64, w in 0.1..5.0f64) {
            let b = a + w;
            let s = ramp(a, b, x) + ramp(b, a, x);
            prop_assert!((s - 1.0).abs() < 1e-15);
        }

        #[test]
        fn step_odd_symmetry(t in -1.5..1.5f64) {
            prop_assert!((step(t) + step(-t) - 1.0).abs() < 1e-14);
        }
    }
}
