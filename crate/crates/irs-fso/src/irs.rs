//! IRS layout, tile phase profiles and the closed-form field a tile reflects
//! onto the receiver lens.
//!
//! A tile applies the phase profile exp(-jk Phi(r)) with
//! Phi(r) = Phi0 + Phi_x (x - x_t) + Phi_y (y - y_t) + Phi_x2 (x - x_t)^2 + Phi_y2 (y - y_t)^2,
//! and the reflected field follows from a Fresnel-type expansion of the
//! Huygens-Fresnel integral, which factors into two one-dimensional Gaussian
//! integrals with closed-form erf solutions.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::beam::{incident_frame, tile_regime, BeamParams, IncidentBeamFrame, Regime, RegimePolicy};
use crate::error::{Error, Result};
use crate::geometry::{OrientedNode, Vec3};
use crate::special::{erf_diff_scaled, Scaled};

/// Regular grid of rectangular tiles centered on the IRS origin.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsLayout {
    pub qx: usize,
    pub qy: usize,
    /// Tile size (m).
    pub l_x: f64,
    pub l_y: f64,
    /// Gap between neighboring tiles (m).
    pub gap_x: f64,
    pub gap_y: f64,
    pub total_x: f64,
    pub total_y: f64,
    /// Tile centers, x-major: index = i * qy + j.
    pub centers: Vec<Vec3>,
}

impl IrsLayout {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Grid position (i, j) of tile `q`.
    pub fn grid_index(&self, q: usize) -> (usize, usize) {
        (q / self.qy, q % self.qy)
    }

    /// Warning when tiles are not many wavelengths wide.
    pub fn wavelength_warning(&self, wavelength: f64) -> Option<String> {
        let r = self.l_x.min(self.l_y) / wavelength;
        (r < 1e3).then(|| format!("tile size is only {r:.0} wavelengths"))
    }
}

pub fn build_layout(total_x: f64, total_y: f64, qx: usize, qy: usize, gap_x: f64, gap_y: f64) -> Result<IrsLayout> {
    if qx == 0 || qy == 0 {
        return Err(Error::InvalidGeometry("tile counts must be positive".into()));
    }
    if !(total_x > 0.0 && total_y > 0.0 && gap_x >= 0.0 && gap_y >= 0.0) {
        return Err(Error::InvalidGeometry("IRS dimensions must be positive and gaps nonnegative".into()));
    }
    let l_x = (total_x - (qx - 1) as f64 * gap_x) / qx as f64;
    let l_y = (total_y - (qy - 1) as f64 * gap_y) / qy as f64;
    if l_x <= 0.0 || l_y <= 0.0 {
        return Err(Error::InvalidGeometry(format!("gaps leave no room for tiles ({l_x} x {l_y} m)")));
    }
    let mut centers = Vec::with_capacity(qx * qy);
    for i in 0..qx {
        for j in 0..qy {
            centers.push(Vec3::new(
                -0.5 * total_x + 0.5 * l_x + i as f64 * (l_x + gap_x),
                -0.5 * total_y + 0.5 * l_y + j as f64 * (l_y + gap_y),
                0.0,
            ));
        }
    }
    Ok(IrsLayout { qx, qy, l_x, l_y, gap_x, gap_y, total_x, total_y, centers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    #[serde(rename = "lp")]
    Linear,
    #[serde(rename = "qp")]
    Quadratic,
}

/// Phase-shift profile of one tile, centered at `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseProfile {
    pub kind: ProfileKind,
    pub phi0: f64,
    pub phi_x: f64,
    pub phi_y: f64,
    pub phi_x2: f64,
    pub phi_y2: f64,
    pub center: Vec3,
}

impl PhaseProfile {
    /// No phase shift at all: a plain mirror.
    pub fn mirror() -> Self {
        Self { kind: ProfileKind::Linear, phi0: 0.0, phi_x: 0.0, phi_y: 0.0, phi_x2: 0.0, phi_y2: 0.0, center: Vec3::zeros() }
    }

    /// Phi(r) in meters of path length.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.x;
        let dy = y - self.center.y;
        self.phi0 + self.phi_x * dx + self.phi_y * dy + self.phi_x2 * dx * dx + self.phi_y2 * dy * dy
    }

    /// Same profile written around another center; the constant term absorbs
    /// the shift so that `eval` is unchanged.
    pub fn recentered(&self, center: Vec3) -> Self {
        let d = center - self.center;
        Self {
            phi0: self.eval(center.x, center.y),
            phi_x: self.phi_x + 2.0 * self.phi_x2 * d.x,
            phi_y: self.phi_y + 2.0 * self.phi_y2 * d.y,
            center,
            ..*self
        }
    }
}

/// Linear profile steering the beam of `frame` toward `pd`.
pub fn lp_profile(frame: &IncidentBeamFrame, pd: &OrientedNode, center: Vec3) -> PhaseProfile {
    let ls = &frame.ls;
    PhaseProfile {
        kind: ProfileKind::Linear,
        phi0: pd.d - frame.d_hat,
        phi_x: ls.theta.cos() * ls.phi.cos() + pd.theta.cos() * pd.phi.cos(),
        phi_y: ls.theta.cos() * ls.phi.sin() + pd.theta.cos() * pd.phi.sin(),
        phi_x2: 0.0,
        phi_y2: 0.0,
        center,
    }
}

/// Quadratic profile: the linear steering plus curvature terms that cancel
/// the incident wavefront and focus toward the lens.
pub fn qp_profile(frame: &IncidentBeamFrame, pd: &OrientedNode, center: Vec3) -> PhaseProfile {
    let lin = lp_profile(frame, pd, center);
    let s2 = frame.ls.theta.sin().powi(2);
    let cp2 = pd.theta.cos().powi(2);
    PhaseProfile {
        kind: ProfileKind::Quadratic,
        phi_x2: (1.0 + cp2 * pd.phi.cos().powi(2)) / (2.0 * pd.d) - s2 / (2.0 * frame.r) - 1.0 / (4.0 * pd.d),
        phi_y2: (1.0 + cp2 * pd.phi.sin().powi(2)) / (2.0 * pd.d) - 1.0 / (2.0 * frame.r) - 1.0 / (4.0 * pd.d),
        ..lin
    }
}

pub fn make_profile(kind: ProfileKind, frame: &IncidentBeamFrame, pd: &OrientedNode, center: Vec3) -> PhaseProfile {
    match kind {
        ProfileKind::Linear => lp_profile(frame, pd, center),
        ProfileKind::Quadratic => qp_profile(frame, pd, center),
    }
}

/// Amplitude efficiency that keeps an anomalous reflection toward elevation
/// `theta_p` passive.
pub fn passivity_factor(theta_p: f64) -> f64 {
    theta_p.sin().abs().sqrt()
}

/// One rectangular tile with its configured profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub center: Vec3,
    pub l_x: f64,
    pub l_y: f64,
    pub profile: PhaseProfile,
    /// Resistive loss factor in (0, 1].
    pub zeta0: f64,
    /// Passivity factor for the direction the tile was configured for.
    pub zeta_bar: f64,
    pub owner: Option<usize>,
}

impl Tile {
    pub fn zeta(&self) -> f64 {
        self.zeta0 * self.zeta_bar
    }
}

/// Geometry of one source-IRS-receiver path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub ls: OrientedNode,
    pub pd: OrientedNode,
    /// Lens radius (m).
    pub lens_radius: f64,
    /// Beam footprint center on the IRS.
    pub r_l0: Vec3,
    /// Point on the IRS the lens faces.
    pub r_p0: Vec3,
}

impl LinkGeometry {
    /// Misalignment between footprint and lens center on the IRS.
    pub fn misalignment(&self) -> f64 {
        (self.r_l0 - self.r_p0).norm()
    }
}

/// Every symbol of the closed-form tile field for one (link, tile) pair.
#[derive(Debug, Clone)]
pub struct TileFieldCoefficients {
    pub frame: IncidentBeamFrame,
    pub tile: Tile,
    pub k: f64,
    /// c1..c6 (1/m).
    pub c: [f64; 6],
    pub b_x: C64,
    pub b_y: C64,
    pub sqrt_bx: C64,
    pub sqrt_by: C64,
    pub a0: C64,
    pub b0: C64,
    /// X and Y at the lens center: A0 + Phi_x - 2 x_t Phi_x2, likewise for y.
    pub x_const: C64,
    pub y_const: C64,
    pub delta_q: f64,
    /// C, C_q and the full prefactor C C_q pi / (4 sqrt(b_x) sqrt(b_y)).
    pub c_link: Scaled,
    pub c_q: C64,
    pub prefactor: Scaled,
    pub regime: Regime,
    pub warnings: Vec<String>,
}

pub fn tile_coefficients(link: &LinkGeometry, tile: &Tile, beam: &BeamParams) -> Result<TileFieldCoefficients> {
    tile_coefficients_with(link, tile, beam, &RegimePolicy::default())
}

pub fn tile_coefficients_with(
    link: &LinkGeometry,
    tile: &Tile,
    beam: &BeamParams,
    policy: &RegimePolicy,
) -> Result<TileFieldCoefficients> {
    let frame = incident_frame(beam, &link.ls, &link.r_l0)?;
    let mut warnings = Vec::new();
    let mut note = |w: Option<String>| warnings.extend(w);
    // Only the lit part of the tile matters for the incident-field expansion.
    let lit = tile.l_x.min(4.0 * frame.w_x).max(tile.l_y.min(4.0 * frame.w_y));
    note(policy.ratio("d_l / illuminated size", link.ls.d, lit)?);
    note(policy.ratio("d_p / lens radius", link.pd.d, link.lens_radius)?);
    note(policy.ratio("d_p / footprint offset", link.pd.d, link.r_l0.norm())?);
    let report = tile_regime(&frame, tile.l_x, tile.l_y, beam.wavelength)?;
    let regime = policy.distance(link.pd.d, &report)?;

    let k = beam.k();
    let (dp, th_l, th_p, ph_p) = (link.pd.d, link.ls.theta, link.pd.theta, link.pd.phi);
    let (sp, cp) = ph_p.sin_cos();
    let (st, ct) = th_p.sin_cos();
    let c = [cp * st / dp, -sp / dp, sp * st / dp, cp / dp, cp * ct / dp, sp * ct / dp];
    let s2 = th_l.sin().powi(2);
    let nu = frame.nu;
    let j = C64::i();
    let pr = &tile.profile;
    let b_x = nu * s2 - j * k / (2.0 * dp) * (1.0 - c[4] * c[4] * dp * dp - 2.0 * c[4] * link.r_p0.x) + j * k * pr.phi_x2;
    let b_y = nu - j * k / (2.0 * dp) * (1.0 - c[5] * c[5] * dp * dp - 2.0 * c[5] * link.r_p0.y) + j * k * pr.phi_y2;
    if b_x.re <= 0.0 || b_y.re <= 0.0 {
        return Err(Error::NonPhysical(format!("Gaussian envelope lost: Re b_x = {}, Re b_y = {}", b_x.re, b_y.re)));
    }
    let a0 = 2.0 * j * nu * link.r_l0.x * s2 / k + link.r_p0.x / dp - th_l.cos() - ct * cp;
    let b0 = 2.0 * j * nu * link.r_l0.y / k + link.r_p0.y / dp - ct * sp;
    let (xt, yt) = (pr.center.x, pr.center.y);
    let x_const = a0 + pr.phi_x - 2.0 * xt * pr.phi_x2;
    let y_const = b0 + pr.phi_y - 2.0 * yt * pr.phi_y2;
    let delta_q = -pr.phi_x2 * xt * xt - pr.phi_y2 * yt * yt + pr.phi_x * xt + pr.phi_y * yt - pr.phi0;
    let c_q = tile.zeta() * C64::new(0.0, k * delta_q).exp();
    let c_expo = C64::new(0.0, -k * (frame.d_hat - dp) + (frame.d_hat / frame.z0).atan())
        - nu * s2 * link.r_l0.x.powi(2)
        - nu * link.r_l0.y.powi(2);
    let c_coef = beam.e0 * beam.w0 * frame.zeta_in / (j * beam.wavelength * frame.w * dp);
    let c_link = Scaled::from_terms(&[(c_expo, c_coef)]);
    let sqrt_bx = b_x.sqrt();
    let sqrt_by = b_y.sqrt();
    // The path-length phases of C and C_q are each ~k km; merge them in meters
    // first so the product keeps its phase to a fraction of a microradian.
    let merged = C64::new(0.0, k * ((dp - frame.d_hat) + delta_q) + (frame.d_hat / frame.z0).atan())
        - nu * s2 * link.r_l0.x.powi(2)
        - nu * link.r_l0.y.powi(2);
    let prefactor = Scaled::from_terms(&[(merged, c_coef * tile.zeta() * std::f64::consts::PI / (4.0 * sqrt_bx * sqrt_by))]);
    Ok(TileFieldCoefficients {
        frame,
        tile: *tile,
        k,
        c,
        b_x,
        b_y,
        sqrt_bx,
        sqrt_by,
        a0,
        b0,
        x_const,
        y_const,
        delta_q,
        c_link,
        c_q,
        prefactor,
        regime,
        warnings,
    })
}

impl TileFieldCoefficients {
    /// X and Y at lens-plane point (x_p, y_p).
    pub fn xy(&self, x_p: f64, y_p: f64) -> (C64, C64) {
        let c = &self.c;
        (self.x_const + c[0] * x_p + c[1] * y_p, self.y_const + c[2] * x_p + c[3] * y_p)
    }

    /// exp(-k^2 X^2 / 4b) [erf(...) - erf(...)] along one tile axis.
    pub fn bracket(&self, axis_x: bool, xx: C64) -> Scaled {
        let (sb, b, center, len) = if axis_x {
            (self.sqrt_bx, self.b_x, self.tile.center.x, self.tile.l_x)
        } else {
            (self.sqrt_by, self.b_y, self.tile.center.y, self.tile.l_y)
        };
        let shift = C64::i() * self.k * xx / (2.0 * sb);
        erf_diff_scaled(-self.k * self.k * xx * xx / (4.0 * b), sb * (center + 0.5 * len) + shift, sb * (center - 0.5 * len) + shift)
    }

    /// Closed-form field in scaled form.
    pub fn field_scaled(&self, x_p: f64, y_p: f64) -> Scaled {
        let (xx, yy) = self.xy(x_p, y_p);
        self.prefactor.mul(self.bracket(true, xx)).mul(self.bracket(false, yy))
    }
}

/// Field reflected by one tile at lens-plane point `r_p`.
pub fn tile_field(r_p: &Vec3, coeffs: &TileFieldCoefficients) -> Result<C64> {
    let v = coeffs.field_scaled(r_p.x, r_p.y).value();
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow("tile_field"))
    }
}

/// Elliptical Gaussian beam a large, linearly configured tile reflects in the
/// far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldBeam {
    pub w_x: f64,
    pub w_y: f64,
    pub r_x: f64,
    pub r_y: f64,
    /// Peak amplitude at the lens center (V/m).
    pub amplitude: f64,
    /// Phase at the lens center (rad).
    pub phase0: f64,
    pub k: f64,
    pub regime: Regime,
}

impl FarFieldBeam {
    pub fn field(&self, x_p: f64, y_p: f64) -> C64 {
        let gauss = -x_p * x_p / (self.w_x * self.w_x) - y_p * y_p / (self.w_y * self.w_y);
        let psi = self.phase0 - self.k * (x_p * x_p / (2.0 * self.r_x) + y_p * y_p / (2.0 * self.r_y));
        self.amplitude * C64::new(gauss, -psi).exp()
    }
}

/// Far-field beam for a centered footprint and the linear profile; `zeta0`
/// is the tile's resistive factor.
pub fn far_field_beam(link: &LinkGeometry, beam: &BeamParams, zeta0: f64) -> Result<FarFieldBeam> {
    let ff = far_field_beam_unchecked(link, beam, zeta0)?;
    if ff.regime == Regime::Near {
        return Err(Error::Regime(format!("d_p = {} m is too close for the far-field beam", link.pd.d)));
    }
    Ok(ff)
}

/// The far-field formulas evaluated at any distance, with the regime only
/// reported. Used to show where the far-field model breaks down.
pub fn far_field_beam_unchecked(link: &LinkGeometry, beam: &BeamParams, zeta0: f64) -> Result<FarFieldBeam> {
    if link.r_l0.norm() > 0.0 {
        return Err(Error::Unsupported("far-field beam needs the footprint at the IRS origin".into()));
    }
    let frame = incident_frame(beam, &link.ls, &link.r_l0)?;
    let sl = link.ls.theta.sin().abs();
    let sp = link.pd.theta.sin().abs();
    let k = beam.k();
    let nu = frame.nu.norm();
    let w_y = 2.0 * nu * link.pd.d * frame.w / k;
    let w_x = w_y * sl / sp;
    let r_y = 4.0 * link.pd.d.powi(2) * nu * nu * frame.r / (k * k);
    let r_x = r_y * sl * sl / (sp * sp);
    let zeta_t = frame.zeta_in * zeta0 * passivity_factor(link.pd.theta) / sl;
    let amplitude = beam.e0 * beam.w0 * zeta_t / (w_x * w_y).sqrt() * (sl / sp).sqrt();
    let phase0 = k * (frame.d_hat - link.pd.d) + 0.5 * std::f64::consts::PI - (frame.d_hat / frame.z0).atan();
    let report = tile_regime(&frame, f64::INFINITY, f64::INFINITY, beam.wavelength)?;
    let regime = report.classify(link.pd.d);
    Ok(FarFieldBeam { w_x, w_y, r_x, r_y, amplitude, phase0, k, regime })
}

/// Field of a plain mirror (specular reflection, no phase profile).
pub fn mirror_field(r_p: &Vec3, link: &LinkGeometry, beam: &BeamParams, zeta0: f64) -> Result<C64> {
    if (link.ls.theta - link.pd.theta).abs() > 1e-12 || (link.pd.phi - std::f64::consts::PI).abs() > 1e-12 {
        return Err(Error::InvalidGeometry("a mirror reflects specularly: need theta_p = theta_l, phi_p = pi".into()));
    }
    Ok(far_field_beam(link, beam, zeta0)?.field(r_p.x, r_p.y))
}

/// Field of an anomalous mirror with the linear steering profile.
pub fn anomalous_field(r_p: &Vec3, link: &LinkGeometry, beam: &BeamParams, zeta0: f64) -> Result<C64> {
    Ok(far_field_beam(link, beam, zeta0)?.field(r_p.x, r_p.y))
}
