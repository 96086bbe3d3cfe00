//! Gaussian beam parameters, the beam footprint on the IRS plane and the
//! distance regimes that decide which phase expansion is valid.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{OrientedNode, Vec3};

/// Free-space impedance used for power normalization (ohm).
pub const ETA: f64 = 377.0;

/// Source parameters of a Gaussian beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Wavelength (m).
    pub wavelength: f64,
    /// Waist radius (m).
    pub w0: f64,
    /// Peak electric field at the waist (V/m).
    pub e0: f64,
}

impl BeamParams {
    pub fn new(wavelength: f64, w0: f64, e0: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidGeometry(format!("wavelength must be positive, got {wavelength}")));
        }
        if !(w0 > wavelength && w0.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "waist {w0} m must exceed the wavelength {wavelength} m for the paraxial model"
            )));
        }
        if !(e0 > 0.0 && e0.is_finite()) {
            return Err(Error::InvalidGeometry(format!("peak field must be positive, got {e0}")));
        }
        Ok(Self { wavelength, w0, e0 })
    }

    pub fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Rayleigh range pi w0^2 / lambda.
    pub fn z0(&self) -> f64 {
        std::f64::consts::PI * self.w0 * self.w0 / self.wavelength
    }

    /// Total emitted power (W).
    pub fn power(&self) -> f64 {
        std::f64::consts::PI / (4.0 * ETA) * self.e0 * self.e0 * self.w0 * self.w0
    }

    /// Beam radius after propagating `z` meters.
    pub fn width(&self, z: f64) -> f64 {
        let r = z / self.z0();
        self.w0 * (1.0 + r * r).sqrt()
    }

    /// Wavefront radius of curvature after `z` meters; infinite at the waist.
    pub fn curvature(&self, z: f64) -> Result<f64> {
        if z == 0.0 {
            return Err(Error::Domain { func: "curvature_radius", detail: "flat wavefront at z = 0".into() });
        }
        let r = self.z0() / z;
        Ok(z * (1.0 + r * r))
    }
}

pub fn beam_width(z: f64, beam: &BeamParams) -> f64 {
    beam.width(z)
}

pub fn curvature_radius(z: f64, beam: &BeamParams) -> Result<f64> {
    beam.curvature(z)
}

/// The incident beam as seen on the IRS plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentBeamFrame {
    pub ls: OrientedNode,
    /// Distance from the source to the footprint along the beam axis.
    pub d_hat: f64,
    pub zeta_in: f64,
    /// Circular width and curvature at `d_hat`.
    pub w: f64,
    pub r: f64,
    pub w_x: f64,
    pub w_y: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub footprint: Vec3,
    /// 1/w^2 + jk/(2R) at `d_hat`.
    pub nu: C64,
    pub z0: f64,
    pub k: f64,
}

pub fn incident_frame(beam: &BeamParams, ls: &OrientedNode, r_l0: &Vec3) -> Result<IncidentBeamFrame> {
    let s = ls.theta.sin();
    if s.abs() < 1e-12 {
        return Err(Error::InvalidGeometry(format!("grazing source at theta = {}", ls.theta)));
    }
    let d_hat = ls.d + r_l0.x * ls.theta.cos();
    if d_hat <= 0.0 {
        return Err(Error::InvalidGeometry(format!("footprint offset {} puts the IRS behind the source", r_l0.x)));
    }
    let w = beam.width(d_hat);
    let r = beam.curvature(d_hat)?;
    let k = beam.k();
    Ok(IncidentBeamFrame {
        ls: *ls,
        d_hat,
        zeta_in: s.abs().sqrt(),
        w,
        r,
        w_x: w / s.abs(),
        w_y: w,
        r_x: r / (s * s),
        r_y: r,
        footprint: *r_l0,
        nu: C64::new(1.0 / (w * w), k / (2.0 * r)),
        z0: beam.z0(),
        k,
    })
}

/// Complex incident field at a point of the IRS plane.
pub fn incident_field(r: &Vec3, frame: &IncidentBeamFrame, beam: &BeamParams) -> C64 {
    let s2 = frame.ls.theta.sin().powi(2);
    let dx = r.x - frame.footprint.x;
    let dy = r.y - frame.footprint.y;
    let expo = -frame.nu * (s2 * dx * dx + dy * dy)
        + C64::new(0.0, frame.k * r.x * frame.ls.theta.cos() - frame.k * frame.d_hat + (frame.d_hat / frame.z0).atan());
    beam.e0 * beam.w0 * frame.zeta_in / frame.w * expo.exp()
}

/// Ordered by distance: near < intermediate < far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Near,
    Intermediate,
    Far,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Near => "near",
            Regime::Intermediate => "intermediate",
            Regime::Far => "far",
        }
    }
}

/// Minimum far-field and intermediate distances for an illuminated region of
/// half-extents `x_e` by `y_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub x_e: f64,
    pub y_e: f64,
    pub d_f: f64,
    pub d_n: f64,
}

/// Separation factor between a distance and the regime boundary it must clear.
pub const REGIME_FACTOR: f64 = 10.0;

impl RegimeReport {
    pub fn classify(&self, d_p: f64) -> Regime {
        if d_p >= REGIME_FACTOR * self.d_f {
            Regime::Far
        } else if d_p > REGIME_FACTOR * self.d_n {
            Regime::Intermediate
        } else {
            Regime::Near
        }
    }
}

pub fn regime_distances(x_e: f64, y_e: f64, wavelength: f64) -> Result<RegimeReport> {
    if !(x_e > 0.0 && y_e > 0.0 && wavelength > 0.0) {
        return Err(Error::InvalidGeometry(format!("regime extents must be positive, got {x_e}, {y_e}")));
    }
    let s = x_e * x_e + y_e * y_e;
    Ok(RegimeReport { x_e, y_e, d_f: s / (2.0 * wavelength), d_n: (s * (x_e + y_e) / (4.0 * wavelength)).sqrt() })
}

/// Regime report for a tile of size `l_x` by `l_y` lit by `frame`: the
/// illuminated region is bounded by both the tile and the footprint.
pub fn tile_regime(frame: &IncidentBeamFrame, l_x: f64, l_y: f64, wavelength: f64) -> Result<RegimeReport> {
    regime_distances((0.5 * l_x).min(frame.w_x), (0.5 * l_y).min(frame.w_y), wavelength)
}

/// How strictly the "much larger than" preconditions are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePolicy {
    /// Ratios below this are errors.
    pub hard_ratio: f64,
    /// Ratios below this produce a warning.
    pub warn_ratio: f64,
    /// Also require d_p > hard_ratio * d_n rather than only d_p > d_n.
    pub strict: bool,
}

impl Default for RegimePolicy {
    fn default() -> Self {
        Self { hard_ratio: 10.0, warn_ratio: 100.0, strict: false }
    }
}

impl RegimePolicy {
    /// Checks `big / small` against the thresholds. Returns a warning message
    /// when the ratio is acceptable but not comfortably large.
    pub fn ratio(&self, what: &str, big: f64, small: f64) -> Result<Option<String>> {
        if small <= 0.0 {
            return Ok(None);
        }
        let r = big / small;
        if r < self.hard_ratio {
            return Err(Error::Regime(format!("{what}: ratio {r:.3} below {}", self.hard_ratio)));
        }
        if r < self.warn_ratio {
            return Ok(Some(format!("{what}: ratio {r:.1} below {}", self.warn_ratio)));
        }
        Ok(None)
    }

    /// Checks a receiver distance against the intermediate-distance bound.
    pub fn distance(&self, d_p: f64, report: &RegimeReport) -> Result<Regime> {
        let floor = if self.strict { self.hard_ratio * report.d_n } else { report.d_n };
        if d_p <= floor {
            return Err(Error::Regime(format!("d_p = {d_p} m is inside the near field (d_n = {:.3} m)", report.d_n)));
        }
        Ok(report.classify(d_p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_pieces, Tolerance};
    use std::f64::consts::PI;

    fn beam(w0: f64) -> BeamParams {
        BeamParams::new(1550e-9, w0, 60e3).unwrap()
    }

    #[test]
    fn width_and_curvature() {
        let b = beam(2.5e-3);
        assert_eq!(b.width(0.0), b.w0);
        assert!((b.width(1000.0) - 0.197).abs() < 5e-4);
        assert!((beam(0.25e-3).width(1000.0) - 1.97).abs() < 5e-3);
        let z0 = b.z0();
        assert!((z0 - 12.67).abs() < 0.01);
        assert!((b.curvature(z0).unwrap() - 2.0 * z0).abs() < 1e-12);
        assert!((b.curvature(1000.0 * z0).unwrap() / (1000.0 * z0) - 1.0).abs() < 1e-3);
        assert!((b.curvature(1000.0).unwrap() - 1000.16).abs() < 0.01);
        assert!(b.curvature(0.0).is_err());
    }

    #[test]
    fn power_from_table_values() {
        assert!((beam(0.25e-3).power() - 0.468_75).abs() < 1e-4);
    }

    #[test]
    fn footprint_widths() {
        let b = beam(2.5e-3);
        let f = incident_frame(&b, &OrientedNode::new(1000.0, PI / 8.0, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        assert!((f.w_x - 0.52).abs() < 0.01 && (f.w_y - 0.19).abs() < 0.01, "{} {}", f.w_x, f.w_y);
        let b = beam(0.25e-3);
        let f = incident_frame(&b, &OrientedNode::new(1000.0, PI / 3.0, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        assert!((f.w_x - 2.28).abs() < 0.01 && (f.w_y - 1.97).abs() < 0.01, "{} {}", f.w_x, f.w_y);
        assert!((f.w_x * (PI / 3.0).sin() - f.w_y).abs() < 1e-14);
        assert!((f.r_x * (PI / 3.0).sin().powi(2) - f.r_y).abs() < 1e-9);
        assert!((f.zeta_in.powi(2) - (PI / 3.0).sin()).abs() < 1e-15);

        let f = incident_frame(&b, &OrientedNode::new(1000.0, PI / 2.0, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        assert!((f.w_x - f.w_y).abs() < 1e-12 && (f.zeta_in - 1.0).abs() < 1e-15);
    }

    #[test]
    fn field_peak_and_width() {
        let b = beam(0.25e-3);
        let f = incident_frame(&b, &OrientedNode::new(1000.0, PI / 3.0, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        let peak = incident_field(&Vec3::zeros(), &f, &b).norm();
        assert!((peak - b.e0 * b.w0 * f.zeta_in / f.w).abs() < 1e-12 * peak);
        let edge = incident_field(&Vec3::new(f.w_x, 0.0, 0.0), &f, &b).norm();
        assert!((edge / peak - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn incident_power_is_conserved() {
        let b = beam(0.25e-3);
        for theta in [PI / 8.0, PI / 4.0, PI / 3.0, PI / 2.0] {
            let off = Vec3::new(0.3, -0.2, 0.0);
            let f = incident_frame(&b, &OrientedNode::new(1000.0, theta, 0.0).unwrap(), &off).unwrap();
            // The intensity is separable, so the plane integral is a product.
            let tol = Tolerance::new(1e-16, 1e-12);
            let span = |w: f64, c: f64| (-8..=8).map(|i| c + i as f64 * w).collect::<Vec<_>>();
            let ix = integrate_pieces(
                |x: f64| incident_field(&Vec3::new(x, off.y, 0.0), &f, &b).norm_sqr(),
                &span(f.w_x, off.x),
                tol,
            )
            .unwrap();
            let iy = integrate_pieces(
                |y: f64| incident_field(&Vec3::new(off.x, y, 0.0), &f, &b).norm_sqr(),
                &span(f.w_y, off.y),
                tol,
            )
            .unwrap();
            let peak = incident_field(&off, &f, &b).norm_sqr();
            let p = ix * iy / peak / (2.0 * ETA);
            assert!((p / b.power() - 1.0).abs() < 1e-6, "theta = {theta}: {p}");
        }
    }

    #[test]
    fn regime_distances_match_reference_setups() {
        let b = beam(2.5e-3);
        let f = incident_frame(&b, &OrientedNode::new(1000.0, PI / 8.0, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        let r = tile_regime(&f, 0.5, 0.5, 1550e-9).unwrap();
        assert!((r.d_f / 32.7e3 - 1.0).abs() < 0.01, "{}", r.d_f);
        assert!((r.d_n / 85.6 - 1.0).abs() < 0.01, "{}", r.d_n);
        assert!(r.d_n < r.d_f);
        let r = regime_distances(0.25, 0.25, 1550e-9).unwrap();
        assert!((r.d_f / 40.3e3 - 1.0).abs() < 0.01);
        assert_eq!(r.classify(1e6), Regime::Far);
        assert_eq!(r.classify(3000.0), Regime::Intermediate);
        assert_eq!(r.classify(10.0), Regime::Near);
    }

    #[test]
    fn policy_thresholds() {
        let p = RegimePolicy::default();
        assert!(p.ratio("x", 5.0, 1.0).is_err());
        assert!(p.ratio("x", 50.0, 1.0).unwrap().is_some());
        assert!(p.ratio("x", 500.0, 1.0).unwrap().is_none());
        let rep = regime_distances(0.25, 0.25, 1550e-9).unwrap();
        assert!(p.distance(rep.d_n * 0.5, &rep).is_err());
        assert!(p.distance(rep.d_n * 5.0, &rep).is_ok());
        let strict = RegimePolicy { strict: true, ..p };
        assert!(strict.distance(rep.d_n * 5.0, &rep).is_err());
    }
}
