//! Cylinder backgrounds: a potential `V(s)`, a conformal log-factor
//! `omega(s)` with `ambient metric = e^{2 omega} (ds^2 + dtheta^2)`, the
//! cylinder half-length, and the behavior at the ends.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackgroundId {
    SphereInS3,
    SphericalShrinker,
    Catenoid,
    CriticalCatenoid,
    CliffordTorus,
    Custom,
}

impl BackgroundId {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "sphere" | "sphere-in-s3" => BackgroundId::SphereInS3,
            "shrinker" | "spherical-shrinker" => BackgroundId::SphericalShrinker,
            "catenoid" => BackgroundId::Catenoid,
            "critical-catenoid" => BackgroundId::CriticalCatenoid,
            "clifford" | "clifford-torus" => BackgroundId::CliffordTorus,
            "custom" => BackgroundId::Custom,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown background '{other}'"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BackgroundId::SphereInS3 => "sphere-in-s3",
            BackgroundId::SphericalShrinker => "spherical-shrinker",
            BackgroundId::Catenoid => "catenoid",
            BackgroundId::CriticalCatenoid => "critical-catenoid",
            BackgroundId::CliffordTorus => "clifford-torus",
            BackgroundId::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndCondition {
    /// The solution extends smoothly past the ends of the cylinder
    /// (sphere-type backgrounds and the catenoid).
    SmoothEnds,
    /// Robin flux condition `s_root * phi'(s_root) = phi(s_root)` at the
    /// boundary latitude.
    Robin { s_root: f64 },
    /// Torus-type background; period `2 * half_length` in `s`.
    Periodic,
}

/// Root of `1 - s tanh s`, the boundary latitude of the critical catenoid.
/// Computed once by bisection to 1e-12 and cached.
pub fn catenoid_neck_root() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        crate::root::bisect(|s| 1.0 - s * s.tanh(), 1.0, 1.5, 1e-13)
            .expect("1 - s tanh s changes sign on [1, 1.5]")
    })
}

/// Tabulated Custom background, loaded from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomSamples {
    /// Rows `[s, V(s), omega(s)]` with `s >= 0`, increasing, spacing <= 1e-3.
    pub samples: Vec<[f64; 3]>,
    pub half_length: f64,
    pub end_condition: String,
}

#[derive(Debug, Clone)]
enum Kind {
    /// `V = v0 * sech^2 s`, `omega = log(c * cosh^p s) + c0` style closed forms.
    SechSquared { v0: f64, omega_scale: f64, omega_shift: f64 },
    /// Constant potential (flat torus as a cylinder background).
    Constant { v0: f64, omega_shift: f64 },
    /// Cubic-interpolated samples on `s >= 0`, extended evenly.
    Sampled { s: Vec<f64>, v: CubicSpline, omega: CubicSpline },
}

/// An immutable background; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Background {
    pub id: BackgroundId,
    pub half_length: f64,
    pub end: EndCondition,
    kind: Kind,
}

impl Background {
    /// Potential `V(s)`; even in `s`.
    pub fn v(&self, s: f64) -> f64 {
        let s = s.abs();
        match &self.kind {
            Kind::SechSquared { v0, .. } => {
                let sech = 1.0 / s.cosh();
                v0 * sech * sech
            }
            Kind::Constant { v0, .. } => *v0,
            Kind::Sampled { s: grid, v, .. } => v.eval(fold_even(s, grid)),
        }
    }

    /// Conformal log-factor `omega(s)`.
    pub fn omega(&self, s: f64) -> f64 {
        let s = s.abs();
        match &self.kind {
            Kind::SechSquared { omega_scale, omega_shift, .. } => {
                omega_scale.ln() + s.cosh().ln() * self.omega_cosh_power() + omega_shift
            }
            Kind::Constant { omega_shift, .. } => *omega_shift,
            Kind::Sampled { s: grid, omega, .. } => omega.eval(fold_even(s, grid)),
        }
    }

    fn omega_cosh_power(&self) -> f64 {
        match self.id {
            // e^omega = scale / cosh s for sphere-type, scale * cosh s for
            // catenoid-type
            BackgroundId::SphereInS3 | BackgroundId::SphericalShrinker => -1.0,
            _ => 1.0,
        }
    }

    /// Derivative `omega'(s)` (odd in `s`).
    pub fn domega(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::SechSquared { .. } => self.omega_cosh_power() * s.tanh(),
            Kind::Constant { .. } => 0.0,
            Kind::Sampled { s: grid, omega, .. } => {
                let sign = if s < 0.0 { -1.0 } else { 1.0 };
                sign * omega.deriv(fold_even(s.abs(), grid))
            }
        }
    }

    /// Closed-form solutions of `phi'' + V phi = 0` when available:
    /// `(even_solution, end_solution)` with values and derivatives.
    pub fn closed_basis(&self) -> Option<ClosedBasis> {
        match self.id {
            BackgroundId::Catenoid | BackgroundId::SphereInS3 | BackgroundId::CriticalCatenoid => {
                Some(ClosedBasis::CatenoidPair)
            }
            _ => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.half_length.is_infinite()
    }

    /// Practical integration horizon for infinite backgrounds.
    pub fn horizon(&self) -> f64 {
        if self.is_infinite() {
            45.0
        } else {
            self.half_length
        }
    }
}

/// Closed-form ODE basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedBasis {
    /// `phi_even = 1 - s tanh s`, `phi_end = tanh s` (for `V = 2 sech^2 s`).
    CatenoidPair,
}

impl ClosedBasis {
    pub fn even(&self, s: f64) -> (f64, f64) {
        match self {
            ClosedBasis::CatenoidPair => {
                let t = s.tanh();
                let sech2 = 1.0 - t * t;
                (1.0 - s * t, -t - s * sech2)
            }
        }
    }
    pub fn end(&self, s: f64) -> (f64, f64) {
        match self {
            ClosedBasis::CatenoidPair => {
                let t = s.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

/// Construct one of the named backgrounds, or a Custom one from samples.
pub fn make_background(id: BackgroundId, custom: Option<&CustomSamples>) -> Result<Background> {
    match id {
        BackgroundId::Catenoid => Ok(Background {
            id,
            half_length: f64::INFINITY,
            end: EndCondition::SmoothEnds,
            kind: Kind::SechSquared { v0: 2.0, omega_scale: 1.0, omega_shift: 0.0 },
        }),
        BackgroundId::SphereInS3 => Ok(Background {
            id,
            half_length: f64::INFINITY,
            end: EndCondition::SmoothEnds,
            kind: Kind::SechSquared { v0: 2.0, omega_scale: 1.0, omega_shift: 0.0 },
        }),
        BackgroundId::SphericalShrinker => Ok(Background {
            id,
            half_length: f64::INFINITY,
            end: EndCondition::SmoothEnds,
            // e^{2 omega} = (4/e) sech^2 s => omega = log(2 sech s) - 1/2
            kind: Kind::SechSquared { v0: 4.0, omega_scale: 2.0, omega_shift: -0.5 },
        }),
        BackgroundId::CriticalCatenoid => {
            let s_root = catenoid_neck_root();
            Ok(Background {
                id,
                half_length: s_root,
                end: EndCondition::Robin { s_root },
                // e^omega = (sech s_root / s_root) cosh s
                kind: Kind::SechSquared {
                    v0: 2.0,
                    omega_scale: 1.0 / (s_root * s_root.cosh()),
                    omega_shift: 0.0,
                },
            })
        }
        BackgroundId::CliffordTorus => Ok(Background {
            id,
            half_length: std::f64::consts::PI,
            end: EndCondition::Periodic,
            // flat torus side sqrt(2) pi as a cylinder of circumference 2 pi:
            // e^{2 omega} = 1/2, V = e^{2 omega} * 4 = 2
            kind: Kind::Constant { v0: 2.0, omega_shift: -0.5 * 2f64.ln() },
        }),
        BackgroundId::Custom => {
            let data = custom.ok_or_else(|| {
                Error::InvalidParameter("Custom background requires samples".into())
            })?;
            build_custom(data)
        }
    }
}

fn build_custom(data: &CustomSamples) -> Result<Background> {
    if data.samples.len() < 4 {
        return Err(Error::InvalidParameter("need at least 4 samples".into()));
    }
    let mut s = Vec::with_capacity(data.samples.len());
    let mut v = Vec::with_capacity(data.samples.len());
    let mut om = Vec::with_capacity(data.samples.len());
    for row in &data.samples {
        s.push(row[0]);
        v.push(row[1]);
        om.push(row[2]);
    }
    if s[0] != 0.0 {
        return Err(Error::InvalidParameter("samples must start at s = 0".into()));
    }
    for w in s.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(Error::InvalidParameter("sample latitudes must increase".into()));
        }
        if gap > 1e-3 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sample spacing {gap:.2e} exceeds 1e-3"
            )));
        }
    }
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidParameter("V must be positive at every sample".into()));
    }
    let end = match data.end_condition.as_str() {
        "smooth" => EndCondition::SmoothEnds,
        "periodic" => EndCondition::Periodic,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown end condition '{other}'"
            )))
        }
    };
    if *s.last().unwrap() + 1e-9 < data.half_length && data.half_length.is_finite() {
        return Err(Error::InvalidParameter(
            "samples must cover [0, half_length]".into(),
        ));
    }
    Ok(Background {
        id: BackgroundId::Custom,
        half_length: data.half_length,
        end,
        kind: Kind::Sampled {
            v: CubicSpline::natural(&s, &v),
            omega: CubicSpline::natural(&s, &om),
            s,
        },
    })
}

fn fold_even(s: f64, grid: &[f64]) -> f64 {
    s.min(*grid.last().unwrap())
}

/// Natural cubic spline on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    y2: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let du = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * du / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            y2[i] = y2[i] * y2[i + 1] + u[i];
        }
        CubicSpline { x: x.to_vec(), y: y.to_vec(), y2 }
    }

    fn locate(&self, t: f64) -> usize {
        match self.x.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.y2[i] + (b * b * b - b) * self.y2[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.y2[i + 1] - (3.0 * a * a - 1.0) * self.y2[i]) * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potentials_at_zero() {
        assert_eq!(make_background(BackgroundId::Catenoid, None).unwrap().v(0.0), 2.0);
        assert_eq!(make_background(BackgroundId::SphericalShrinker, None).unwrap().v(0.0), 4.0);
        assert_eq!(make_background(BackgroundId::SphereInS3, None).unwrap().v(0.0), 2.0);
        assert_eq!(make_background(BackgroundId::CriticalCatenoid, None).unwrap().v(0.0), 2.0);
        assert_eq!(make_background(BackgroundId::CliffordTorus, None).unwrap().v(1.0), 2.0);
    }

    #[test]
    fn catenoid_potential_at_one() {
        let bg = make_background(BackgroundId::Catenoid, None).unwrap();
        let sech1 = 1.0 / 1f64.cosh();
        assert!((bg.v(1.0) - 2.0 * sech1 * sech1).abs() < 1e-15);
        assert!((bg.v(1.0) - 0.839948683228052).abs() < 1e-12);
    }

    #[test]
    fn neck_root_matches_reference() {
        let r = catenoid_neck_root();
        assert!((r - 1.1996786402577338).abs() < 1e-10);
        assert!((1.0 - r * r.tanh()).abs() < 1e-11);
    }

    #[test]
    fn critical_catenoid_setup() {
        let bg = make_background(BackgroundId::CriticalCatenoid, None).unwrap();
        let s_root = catenoid_neck_root();
        assert_eq!(bg.half_length, s_root);
        assert_eq!(bg.end, EndCondition::Robin { s_root });
        // e^omega = (sech s_root / s_root) cosh s
        let expect = ((1.0 / s_root.cosh()) / s_root * 1f64.cosh()).ln();
        assert!((bg.omega(1.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn potential_even_and_positive() {
        for id in [
            BackgroundId::Catenoid,
            BackgroundId::SphericalShrinker,
            BackgroundId::SphereInS3,
            BackgroundId::CliffordTorus,
        ] {
            let bg = make_background(id, None).unwrap();
            for i in 0..100 {
                let s = -5.0 + 0.1 * i as f64;
                assert!(bg.v(s) > 0.0);
                assert!((bg.v(s) - bg.v(-s)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn decay_band_ratio_on_smooth_ends() {
        // V(s) e^{2s} stays within a band of ratio <= 10 on [2, 10]
        for id in [BackgroundId::Catenoid, BackgroundId::SphericalShrinker] {
            let bg = make_background(id, None).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for i in 0..=160 {
                let s = 2.0 + 0.05 * i as f64;
                let r = bg.v(s) * (2.0 * s).exp();
                lo = lo.min(r);
                hi = hi.max(r);
            }
            assert!(hi / lo < 10.0, "{id:?}: band ratio {}", hi / lo);
        }
    }

    #[test]
    fn closed_basis_satisfies_ode() {
        let bg = make_background(BackgroundId::Catenoid, None).unwrap();
        let basis = bg.closed_basis().unwrap();
        for i in 0..100 {
            let s = 0.05 * i as f64;
            let h = 1e-4;
            // second derivative by central differences of the closed form
            for f in [ClosedBasis::even, ClosedBasis::end] {
                let (y, _) = f(&basis, s);
                let (yp, _) = f(&basis, s + h);
                let (ym, _) = f(&basis, s - h);
                let ypp = (yp - 2.0 * y + ym) / (h * h);
                assert!((ypp + bg.v(s) * y).abs() < 1e-6, "s = {s}");
            }
        }
    }

    #[test]
    fn custom_background_spline() {
        let n = 2001usize;
        let samples: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let s = i as f64 * 1e-3;
                [s, 2.0 / s.cosh().powi(2), s.cosh().ln()]
            })
            .collect();
        let data = CustomSamples {
            samples,
            half_length: 2.0,
            end_condition: "smooth".to_string(),
        };
        let bg = make_background(BackgroundId::Custom, Some(&data)).unwrap();
        for i in 0..50 {
            let s = 0.04 * i as f64;
            assert!((bg.v(s) - 2.0 / s.cosh().powi(2)).abs() < 1e-9, "s = {s}");
        }
    }

    #[test]
    fn custom_rejects_nonpositive_v() {
        let samples: Vec<[f64; 3]> =
            (0..1200).map(|i| [i as f64 * 1e-3, 1.0 - i as f64 * 1e-3, 0.0]).collect();
        let data = CustomSamples {
            samples,
            half_length: 1.0,
            end_condition: "smooth".to_string(),
        };
        assert!(make_background(BackgroundId::Custom, Some(&data)).is_err());
    }
}
