//! Geometric-and-misalignment loss (GML) of an IRS link, the diffraction
//! oracles that check the closed forms, and the end-to-end channel gain.
//!
//! The GML is the fraction of the transmitted power that the receiver lens
//! collects. Three routes compute it:
//!
//! * [`gml_lens_quadrature`] integrates |sum of tile fields|^2 over the
//!   circular lens. It is the reference and the default route elsewhere.
//! * [`gml_out_of_plane`] approximates the lens by a square of equal area and
//!   freezes the erf factors at x_p = y_p = a/2, leaving one finite integral.
//! * [`gml_in_plane`] is the fully closed form when the receiver lies in the
//!   plane of incidence.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{incident_frame, BeamParams, IncidentBeamFrame, Regime, RegimePolicy, ETA};
use crate::error::{Error, Result};
use crate::geometry::{lens_to_irs_frame, Vec3};
use crate::irs::{far_field_beam, tile_coefficients_with, FarFieldBeam, LinkGeometry, Tile, TileFieldCoefficients};
use crate::quadrature::{integrate, panel_rule, GaussRule, Tolerance};
use crate::special::{erf_diff_scaled, Scaled};

/// One link with the closed-form coefficients of every tile it sees.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    pub link: LinkGeometry,
    pub beam: BeamParams,
    pub coeffs: Vec<TileFieldCoefficients>,
    /// Least favorable regime over the tiles.
    pub regime: Regime,
    pub warnings: Vec<String>,
}

pub fn prepare_link(link: &LinkGeometry, tiles: &[Tile], beam: &BeamParams, policy: &RegimePolicy) -> Result<PreparedLink> {
    if tiles.is_empty() {
        return Err(Error::InvalidGeometry("a link needs at least one tile".into()));
    }
    if !(link.lens_radius > 0.0 && link.lens_radius.is_finite()) {
        return Err(Error::InvalidGeometry(format!("lens radius must be positive, got {}", link.lens_radius)));
    }
    let coeffs = tiles.iter().map(|t| tile_coefficients_with(link, t, beam, policy)).collect::<Result<Vec<_>>>()?;
    let regime = coeffs.iter().map(|c| c.regime).min().unwrap_or(Regime::Far);
    let mut warnings: Vec<String> = Vec::new();
    for w in coeffs.iter().flat_map(|c| c.warnings.iter()) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    Ok(PreparedLink { link: *link, beam: *beam, coeffs, regime, warnings })
}

impl PreparedLink {
    /// Total field at lens point (x_p, y_p).
    pub fn field(&self, x_p: f64, y_p: f64) -> Result<C64> {
        let mut e = C64::new(0.0, 0.0);
        for c in &self.coeffs {
            e += c.field_scaled(x_p, y_p).value();
        }
        if e.re.is_finite() && e.im.is_finite() {
            Ok(e)
        } else {
            Err(Error::Overflow("lens field"))
        }
    }

    fn norm(&self) -> f64 {
        1.0 / (2.0 * ETA * self.beam.power())
    }
}

// ---------------------------------------------------------------------------
// Lens quadrature

/// Aperture used by the lens quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LensShape {
    Circle,
    /// Square with the area of the circular lens.
    Square,
}

/// Resolution of the lens quadrature. The circle uses Gauss-Legendre in the
/// radius and a uniform rule in the angle; the square uses a Gauss-Legendre
/// tensor grid with `radial` points per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensGrid {
    pub radial: usize,
    pub angular: usize,
    pub shape: LensShape,
}

impl Default for LensGrid {
    fn default() -> Self {
        Self { radial: 60, angular: 120, shape: LensShape::Circle }
    }
}

impl LensGrid {
    pub fn refined(self) -> Self {
        Self { radial: 2 * self.radial, angular: 2 * self.angular, ..self }
    }

    pub fn with_shape(self, shape: LensShape) -> Self {
        Self { shape, ..self }
    }
}

/// Integral of `intensity` over the lens aperture of radius `a`. Rows of the
/// grid are evaluated in parallel and summed in a fixed order.
fn lens_integral<F>(a: f64, grid: &LensGrid, intensity: F) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if grid.radial == 0 || grid.angular == 0 {
        return Err(Error::Quadrature("lens grid needs at least one point per direction".into()));
    }
    let rule = GaussRule::new(grid.radial);
    let rows: Vec<f64> = match grid.shape {
        LensShape::Circle => {
            let dt = 2.0 * PI / grid.angular as f64;
            let nodes: Vec<(f64, f64)> = rule.mapped(0.0, a).collect();
            nodes
                .par_iter()
                .map(|&(r, w)| {
                    let mut row = 0.0;
                    for j in 0..grid.angular {
                        let (s, c) = (j as f64 * dt).sin_cos();
                        row += intensity(r * c, r * s)?;
                    }
                    Ok(row * w * r * dt)
                })
                .collect::<Result<_>>()?
        }
        LensShape::Square => {
            let half = 0.5 * PI.sqrt() * a;
            let nodes: Vec<(f64, f64)> = rule.mapped(-half, half).collect();
            nodes
                .par_iter()
                .map(|&(x, wx)| {
                    let mut row = 0.0;
                    for &(y, wy) in &nodes {
                        row += wy * intensity(x, y)?;
                    }
                    Ok(row * wx)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(rows.iter().sum())
}

fn check_gml(h: f64, what: &str) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::Overflow("gml"));
    }
    if h > 1.0 + 1e-9 {
        return Err(Error::NonPhysical(format!("{what} GML {h} exceeds one")));
    }
    Ok(h)
}

/// GML from the closed-form tile fields integrated over the lens.
pub fn lens_power(prep: &PreparedLink, grid: &LensGrid) -> Result<f64> {
    let h = lens_integral(prep.link.lens_radius, grid, |x, y| Ok(prep.field(x, y)?.norm_sqr()))? * prep.norm();
    check_gml(h, "lens quadrature")
}

/// GML with every tile field replaced by its diffraction oracle. Slow: each
/// lens point costs one oracle evaluation per tile.
pub fn oracle_lens_power(prep: &PreparedLink, grid: &LensGrid, mode: OracleMode, res: &OracleResolution) -> Result<f64> {
    let h = lens_integral(prep.link.lens_radius, grid, |x, y| {
        let r = Vec3::new(x, y, 0.0);
        let mut e = C64::new(0.0, 0.0);
        for c in &prep.coeffs {
            e += hf_oracle_field(&r, &prep.link, &c.tile, &prep.beam, mode, res)?;
        }
        Ok(e.norm_sqr())
    })? * prep.norm();
    check_gml(h, "oracle")
}

/// Smallest feature the tiles diffract onto the lens: lambda d_p over the
/// lit extent of the tile set. Tiles far apart interfere, so the extent spans
/// all of them, clipped to the footprint of each beam.
pub fn diffraction_scale(prep: &PreparedLink) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in &prep.coeffs {
        let f = &c.frame;
        let half = [0.5 * c.tile.l_x, 0.5 * c.tile.l_y];
        let reach = [2.0 * f.w_x, 2.0 * f.w_y];
        let center = [c.tile.center.x, c.tile.center.y];
        let foot = [f.footprint.x, f.footprint.y];
        for i in 0..2 {
            let a = (center[i] - half[i]).max(foot[i] - reach[i]);
            let b = (center[i] + half[i]).min(foot[i] + reach[i]);
            if a < b {
                lo[i] = lo[i].min(a);
                hi[i] = hi[i].max(b);
            }
        }
    }
    let lit = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if lit.is_finite() && lit > 0.0 {
        prep.beam.wavelength * prep.link.pd.d / lit
    } else {
        f64::INFINITY
    }
}

impl LensGrid {
    /// Default grid, enlarged with the number of diffraction features across
    /// the lens. Only a starting point: callers refine until converged.
    pub fn for_link(prep: &PreparedLink) -> Self {
        let per = prep.link.lens_radius / diffraction_scale(prep);
        let d = Self::default();
        let radial = d.radial.max((2.5 * per).ceil() as usize);
        let angular = d.angular.max(2 * radial);
        Self { radial, angular, ..d }
    }

    /// Cheapest sensible start for [`lens_power_converged`]: 2.5 radial
    /// nodes per diffraction feature, at least 16 by 32.
    pub fn start_for_link(prep: &PreparedLink) -> Self {
        let per = prep.link.lens_radius / diffraction_scale(prep);
        let radial = 16usize.max((2.5 * per).ceil() as usize);
        Self { radial, angular: 2 * radial, ..Self::default() }
    }
}

/// Relative agreement between successive grid doublings.
pub const LENS_REL_TOL: f64 = 1e-7;
const LENS_MAX_DOUBLINGS: usize = 4;

/// Lens quadrature refined by doubling until two levels agree.
pub fn lens_power_converged(prep: &PreparedLink, start: LensGrid) -> Result<f64> {
    let mut grid = start;
    let mut last = lens_power(prep, &grid)?;
    for _ in 0..LENS_MAX_DOUBLINGS {
        grid = grid.refined();
        let h = lens_power(prep, &grid)?;
        if (h - last).abs() <= LENS_REL_TOL * h.abs() {
            return Ok(h);
        }
        last = h;
    }
    Err(Error::Quadrature(format!("lens quadrature still changing at {} x {} points", grid.radial, grid.angular)))
}

/// Lens-quadrature GML with the default regime policy, refined to convergence.
pub fn gml_lens_quadrature(link: &LinkGeometry, tiles: &[Tile], beam: &BeamParams) -> Result<f64> {
    let prep = prepare_link(link, tiles, beam, &RegimePolicy::default())?;
    lens_power_converged(&prep, LensGrid::start_for_link(&prep))
}

/// GML of the far-field elliptical Gaussian beam of a large linearly
/// configured tile.
pub fn far_field_gml(link: &LinkGeometry, beam: &BeamParams, zeta0: f64, grid: &LensGrid) -> Result<f64> {
    beam_gml(&far_field_beam(link, beam, zeta0)?, link.lens_radius, beam, grid)
}

/// Power fraction of an elliptical Gaussian beam that a lens of radius `a`
/// collects.
pub fn beam_gml(ff: &FarFieldBeam, a: f64, beam: &BeamParams, grid: &LensGrid) -> Result<f64> {
    let h = lens_integral(a, grid, |x, y| Ok(ff.field(x, y).norm_sqr()))? / (2.0 * ETA * beam.power());
    check_gml(h, "far-field")
}

// ---------------------------------------------------------------------------
// Square-lens closed forms

/// Per-tile data for the square-lens GML: the erf factors frozen at
/// x_p = y_p = a/2, with the tile prefactor folded in.
#[derive(Debug, Clone, Copy)]
struct FrozenTile {
    b_x: C64,
    b_y: C64,
    a: C64,
    b: C64,
    /// -k^2 X_a^2 / 4b_x - k^2 Y_a^2 / 4b_y: the Gaussian the frozen brackets carry.
    k_frozen: C64,
    /// Prefactor times both frozen brackets.
    factor: Scaled,
}

fn frozen_tiles(prep: &PreparedLink) -> Vec<FrozenTile> {
    let a = prep.link.lens_radius;
    prep.coeffs
        .iter()
        .map(|c| {
            let (xa, ya) = c.xy(0.5 * a, 0.5 * a);
            let k2 = c.k * c.k;
            FrozenTile {
                b_x: c.b_x,
                b_y: c.b_y,
                a: c.x_const,
                b: c.y_const,
                k_frozen: -k2 * xa * xa / (4.0 * c.b_x) - k2 * ya * ya / (4.0 * c.b_y),
                factor: c.prefactor.mul(c.bracket(true, xa)).mul(c.bracket(false, ya)),
            }
        })
        .collect()
}

/// Quadratic exponent of E_q E_s^* over the square lens:
/// q0 - rho_x x^2 - rho_y y^2 - rho_xy x y - varrho_x x - varrho_y y.
#[derive(Debug, Clone, Copy)]
pub struct GmlCoefficients {
    /// Half side of the equal-area square lens, sqrt(pi) a / 2.
    pub a_tilde: f64,
    pub rho_x: C64,
    pub rho_y: C64,
    pub rho_xy: C64,
    pub varrho_x: C64,
    pub varrho_y: C64,
    /// Constant term minus the Gaussians already inside the frozen brackets.
    pub q0: C64,
    /// Product of the frozen tile factors, F_q F_s^*.
    pub pair: Scaled,
}

fn pair_coefficients(c: &[f64; 6], k: f64, a_tilde: f64, q: &FrozenTile, s: &FrozenTile) -> Result<GmlCoefficients> {
    let k2 = k * k;
    let ix = 1.0 / q.b_x + 1.0 / s.b_x.conj();
    let iy = 1.0 / q.b_y + 1.0 / s.b_y.conj();
    let ax = q.a / q.b_x + s.a.conj() / s.b_x.conj();
    let ay = q.b / q.b_y + s.b.conj() / s.b_y.conj();
    let g = GmlCoefficients {
        a_tilde,
        rho_x: 0.25 * k2 * (c[0] * c[0] * ix + c[2] * c[2] * iy),
        rho_y: 0.25 * k2 * (c[1] * c[1] * ix + c[3] * c[3] * iy),
        rho_xy: 0.5 * k2 * (c[0] * c[1] * ix + c[2] * c[3] * iy),
        varrho_x: 0.5 * k2 * (c[0] * ax + c[2] * ay),
        varrho_y: 0.5 * k2 * (c[1] * ax + c[3] * ay),
        q0: -0.25 * k2 * (q.a * q.a / q.b_x + (s.a * s.a / s.b_x).conj() + q.b * q.b / q.b_y + (s.b * s.b / s.b_y).conj())
            - q.k_frozen
            - s.k_frozen.conj(),
        pair: q.factor.mul(s.factor.conj()),
    };
    if g.rho_x.re <= 0.0 || g.rho_y.re <= 0.0 {
        return Err(Error::NonPhysical(format!("lens Gaussian diverges: rho_x = {}, rho_y = {}", g.rho_x, g.rho_y)));
    }
    Ok(g)
}

/// Integral of exp(-rho t^2 - beta t) over [-h, h], with exponent `lg` added.
fn gauss_segment(lg: C64, rho: C64, beta: C64, h: f64) -> Scaled {
    let sr = rho.sqrt();
    let u = beta / (2.0 * sr);
    erf_diff_scaled(lg + u * u, sr * h + u, -sr * h + u).scale(PI.sqrt() / (2.0 * sr))
}

impl GmlCoefficients {
    /// The x-integral in closed form, as a function of y.
    pub fn x_integrated(&self, y: f64) -> Scaled {
        let lg = self.q0 - self.rho_y * y * y - self.varrho_y * y;
        self.pair.mul(gauss_segment(lg, self.rho_x, self.rho_xy * y + self.varrho_x, self.a_tilde))
    }

    /// Both integrals in closed form; valid when rho_xy vanishes.
    pub fn separable(&self) -> Scaled {
        let x = gauss_segment(self.q0, self.rho_x, self.varrho_x, self.a_tilde);
        let y = gauss_segment(C64::new(0.0, 0.0), self.rho_y, self.varrho_y, self.a_tilde);
        self.pair.mul(x).mul(y)
    }
}

/// Coefficients of every ordered tile pair (q, s), row-major.
pub fn gml_coefficients(prep: &PreparedLink) -> Result<Vec<GmlCoefficients>> {
    let frozen = frozen_tiles(prep);
    let c0 = &prep.coeffs[0];
    let a_tilde = 0.5 * PI.sqrt() * prep.link.lens_radius;
    let mut out = Vec::with_capacity(frozen.len() * frozen.len());
    for q in &frozen {
        for s in &frozen {
            out.push(pair_coefficients(&c0.c, c0.k, a_tilde, q, s)?);
        }
    }
    Ok(out)
}

/// Checks that the Hermitian double sum came out real and in range.
fn hermitian_result(total: C64, what: &str) -> Result<f64> {
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::Overflow("gml"));
    }
    if total.im.abs() > 1e-9 * total.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Quadrature(format!("{what}: imaginary residue {:.3e} of GML {:.3e}", total.im, total.re)));
    }
    check_gml(total.re, what)
}

/// Square-lens GML for an arbitrary receiver orientation. The remaining
/// y-integral of each tile pair is computed adaptively to `tol`, taken
/// relative to the size of that pair's integrand.
pub fn gml_out_of_plane_with(prep: &PreparedLink, tol: f64) -> Result<f64> {
    let pairs = gml_coefficients(prep)?;
    let norm = prep.norm();
    let terms = pairs
        .par_iter()
        .map(|g| {
            let h = g.a_tilde;
            let f = |y: f64| g.x_integrated(y).value() * norm;
            let scale = [-h, 0.0, h].iter().map(|&y| f(y).norm()).fold(0.0, f64::max) * 2.0 * h;
            if scale == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            integrate(f, -h, h, Tolerance::new(tol * scale, 1e-12))
        })
        .collect::<Result<Vec<C64>>>()?;
    hermitian_result(terms.iter().sum(), "square-lens GML")
}

/// Spec default for the y-integral tolerance.
pub const GML_Y_TOL: f64 = 1e-8;

pub fn gml_out_of_plane(link: &LinkGeometry, tiles: &[Tile], beam: &BeamParams) -> Result<f64> {
    gml_out_of_plane_with(&prepare_link(link, tiles, beam, &RegimePolicy::default())?, GML_Y_TOL)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Fully closed-form square-lens GML for in-plane reflection.
pub fn gml_in_plane_prepared(prep: &PreparedLink) -> Result<f64> {
    let (ls, pd) = (&prep.link.ls, &prep.link.pd);
    if wrap_angle(pd.phi + ls.phi - PI).abs() > 1e-9 || ls.phi.sin().abs() > 1e-9 {
        return Err(Error::Unsupported(format!(
            "in-plane form needs phi_l = 0 and phi_p = pi, got {} and {}",
            ls.phi, pd.phi
        )));
    }
    let norm = prep.norm();
    let total: C64 = gml_coefficients(prep)?.iter().map(|g| g.separable().value()).sum::<C64>() * norm;
    hermitian_result(total, "in-plane GML")
}

pub fn gml_in_plane(link: &LinkGeometry, tiles: &[Tile], beam: &BeamParams) -> Result<f64> {
    gml_in_plane_prepared(&prepare_link(link, tiles, beam, &RegimePolicy::default())?)
}

// ---------------------------------------------------------------------------
// Diffraction oracles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    /// Quadrature of the expanded diffraction integral, one axis at a time,
    /// at the true wavelength.
    Separable1d,
    /// Two-dimensional quadrature with the exact spherical-wave kernel, for
    /// scaled-down geometries only.
    Exact2d,
}

/// Step control for the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResolution {
    /// Samples per 2 pi of local phase advance; at least 8.
    pub samples_per_2pi: f64,
    /// Agreement required between a result and its step-halved refinement.
    pub rel_tol: f64,
    /// Upper limit on samples per axis.
    pub max_points: usize,
}

impl Default for OracleResolution {
    fn default() -> Self {
        Self { samples_per_2pi: MIN_SAMPLES_PER_2PI, rel_tol: 1e-6, max_points: 1 << 23 }
    }
}

pub const MIN_SAMPLES_PER_2PI: f64 = 8.0;

/// Largest tile span, in wavelengths, the exact 2D oracle accepts.
pub const EXACT2D_MAX_WAVELENGTHS: f64 = 2e3;

/// Number of panels of `rule` on [a, b] that keeps the phase advance per
/// sample within the contract and resolves the envelope.
fn panels_for(a: f64, b: f64, rate: f64, envelope: f64, res: &OracleResolution, n: usize, what: &str) -> Result<usize> {
    let per_sample = 2.0 * PI / res.samples_per_2pi;
    let width = (per_sample * n as f64 / rate.max(f64::MIN_POSITIVE)).min(0.5 * envelope);
    let panels = ((b - a) / width).ceil().max(1.0);
    if panels * n as f64 > res.max_points as f64 {
        return Err(Error::Resolution(format!(
            "{what}: keeping the phase advance per step within {per_sample:.3} rad needs {:.3e} samples, limit {}",
            panels * n as f64,
            res.max_points
        )));
    }
    Ok(panels as usize)
}

fn composite_par<F: Fn(f64) -> C64 + Sync>(f: &F, a: f64, b: f64, panels: usize, rule: &GaussRule) -> C64 {
    let h = (b - a) / panels as f64;
    let parts: Vec<C64> = (0..panels).into_par_iter().map(|i| rule.integrate(f, a + i as f64 * h, a + (i + 1) as f64 * h)).collect();
    parts.iter().sum()
}

/// Composite rule with step halving until two levels agree.
fn resolved_1d<F: Fn(f64) -> C64 + Sync>(
    f: &F,
    a: f64,
    b: f64,
    rate: f64,
    envelope: f64,
    res: &OracleResolution,
    what: &str,
) -> Result<C64> {
    if b <= a {
        return Ok(C64::new(0.0, 0.0));
    }
    let rule = panel_rule();
    let n = rule.nodes.len();
    let mut panels = panels_for(a, b, rate, envelope, res, n, what)?;
    let mut coarse = composite_par(f, a, b, panels, rule);
    loop {
        if 2 * panels * n > res.max_points {
            return Err(Error::Resolution(format!("{what}: step halving did not settle within {} samples", res.max_points)));
        }
        let fine = composite_par(f, a, b, 2 * panels, rule);
        if (fine - coarse).norm() <= res.rel_tol * fine.norm() {
            return Ok(fine);
        }
        panels *= 2;
        coarse = fine;
    }
}

/// Everything the oracles share for one (link, tile, lens point).
struct OracleSetup {
    frame: IncidentBeamFrame,
    r_o: Vec3,
    k: f64,
    s2: f64,
    /// Constant factor: incident field at the footprint, the profile's
    /// constant term, the kernel's distance phase and amplitude, and zeta.
    constant: C64,
}

fn oracle_setup(r_p: &Vec3, link: &LinkGeometry, tile: &Tile, beam: &BeamParams) -> Result<OracleSetup> {
    let frame = incident_frame(beam, &link.ls, &link.r_l0)?;
    let k = beam.k();
    let dp = link.pd.d;
    let foot = frame.footprint;
    let phase = k * ((dp - frame.d_hat) - tile.profile.phi0 + foot.x * link.ls.theta.cos()) + (frame.d_hat / frame.z0).atan();
    let constant = beam.e0 * beam.w0 * frame.zeta_in / frame.w * C64::new(0.0, phase).exp() * tile.zeta()
        / (C64::i() * beam.wavelength * dp);
    Ok(OracleSetup {
        frame,
        r_o: lens_to_irs_frame(r_p, &link.pd, &link.r_p0),
        k,
        s2: link.ls.theta.sin().powi(2),
        constant,
    })
}

impl OracleSetup {
    /// Incident field over its value at the footprint center.
    fn incident_ratio(&self, x: f64, y: f64) -> C64 {
        let dx = x - self.frame.footprint.x;
        let dy = y - self.frame.footprint.y;
        (-self.frame.nu * (self.s2 * dx * dx + dy * dy) + C64::new(0.0, self.k * dx * self.frame.ls.theta.cos())).exp()
    }
}

/// Field of one tile at lens point `r_p` by direct quadrature of the
/// diffraction integral.
pub fn hf_oracle_field(
    r_p: &Vec3,
    link: &LinkGeometry,
    tile: &Tile,
    beam: &BeamParams,
    mode: OracleMode,
    res: &OracleResolution,
) -> Result<C64> {
    if !(res.samples_per_2pi >= MIN_SAMPLES_PER_2PI) {
        return Err(Error::Resolution(format!(
            "{} samples per 2 pi is below the minimum of {MIN_SAMPLES_PER_2PI}",
            res.samples_per_2pi
        )));
    }
    if tile.l_x <= 0.0 || tile.l_y <= 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let st = oracle_setup(r_p, link, tile, beam)?;
    match mode {
        OracleMode::Separable1d => separable(&st, link, tile, res),
        OracleMode::Exact2d => {
            let span = tile.l_x.max(tile.l_y) / beam.wavelength;
            if span > EXACT2D_MAX_WAVELENGTHS {
                return Err(Error::Unsupported(format!(
                    "exact 2D oracle needs a scaled geometry: tile spans {span:.0} wavelengths, limit {EXACT2D_MAX_WAVELENGTHS}"
                )));
            }
            exact(&st, link, tile, res)
        }
    }
}

fn separable(st: &OracleSetup, link: &LinkGeometry, tile: &Tile, res: &OracleResolution) -> Result<C64> {
    let (k, dp) = (st.k, link.pd.d);
    let (th, ph) = (link.pd.theta, link.pd.phi);
    let c5 = ph.cos() * th.cos() / dp;
    let c6 = ph.sin() * th.cos() / dp;
    let qx = 1.0 - c5 * c5 * dp * dp - 2.0 * c5 * link.r_p0.x;
    let qy = 1.0 - c6 * c6 * dp * dp - 2.0 * c6 * link.r_p0.y;
    let pr = &tile.profile;
    let foot = st.frame.footprint;
    let (xt, yt) = (pr.center.x, pr.center.y);
    let nu_im = st.frame.nu.im;
    let cos_l = link.ls.theta.cos();

    // Phase of each factor, without the constants carried by `st.constant`.
    let gx = |x: f64| {
        let phase = -k * (pr.eval(x, yt) - pr.phi0) + k * (-x * st.r_o.x / dp + x * x * qx / (2.0 * dp));
        st.incident_ratio(x, foot.y) * C64::new(0.0, phase).exp()
    };
    let gy = |y: f64| {
        let phase = -k * (pr.eval(xt, y) - pr.phi0) + k * (-y * st.r_o.y / dp + y * y * qy / (2.0 * dp));
        st.incident_ratio(foot.x, y) * C64::new(0.0, phase).exp()
    };
    // Phase derivatives are linear in the coordinate, so the ends bound them.
    let rate_x = |x: f64| {
        (k * cos_l - 2.0 * nu_im * st.s2 * (x - foot.x) - k * (pr.phi_x + 2.0 * pr.phi_x2 * (x - xt)) - k * st.r_o.x / dp
            + k * x * qx / dp)
            .abs()
    };
    let rate_y = |y: f64| {
        (-2.0 * nu_im * (y - foot.y) - k * (pr.phi_y + 2.0 * pr.phi_y2 * (y - yt)) - k * st.r_o.y / dp + k * y * qy / dp).abs()
    };
    let (x0, x1) = (tile.center.x - 0.5 * tile.l_x, tile.center.x + 0.5 * tile.l_x);
    let (y0, y1) = (tile.center.y - 0.5 * tile.l_y, tile.center.y + 0.5 * tile.l_y);
    let ix = resolved_1d(&gx, x0, x1, rate_x(x0).max(rate_x(x1)), st.frame.w_x, res, "separable oracle, x axis")?;
    let iy = resolved_1d(&gy, y0, y1, rate_y(y0).max(rate_y(y1)), st.frame.w_y, res, "separable oracle, y axis")?;
    Ok(st.constant * ix * iy)
}

fn exact(st: &OracleSetup, link: &LinkGeometry, tile: &Tile, res: &OracleResolution) -> Result<C64> {
    let (k, dp) = (st.k, link.pd.d);
    let pr = &tile.profile;
    let foot = st.frame.footprint;
    let nu_im = st.frame.nu.im;
    let cos_l = link.ls.theta.cos();
    let ro = st.r_o;
    // Kernel e^{jk(|r_o - r| - d_p)} d_p / |r_o - r|; the e^{jk d_p} / (j lambda d_p)
    // part sits in the constant.
    let f = |x: f64, y: f64| {
        let d = Vec3::new(ro.x - x, ro.y - y, ro.z);
        let n2 = d.norm_squared();
        let n = n2.sqrt();
        let excess = (n2 - dp * dp) / (n + dp);
        let phase = -k * (pr.eval(x, y) - pr.phi0) + k * excess;
        st.incident_ratio(x, y) * C64::new(0.0, phase).exp() * (dp / n)
    };
    let grad = |x: f64, y: f64| {
        let d = Vec3::new(x - ro.x, y - ro.y, -ro.z);
        let n = d.norm();
        let gx = k * cos_l - 2.0 * nu_im * st.s2 * (x - foot.x) - k * (pr.phi_x + 2.0 * pr.phi_x2 * (x - pr.center.x))
            + k * d.x / n;
        let gy = -2.0 * nu_im * (y - foot.y) - k * (pr.phi_y + 2.0 * pr.phi_y2 * (y - pr.center.y)) + k * d.y / n;
        (gx.abs(), gy.abs())
    };
    let (x0, x1) = (tile.center.x - 0.5 * tile.l_x, tile.center.x + 0.5 * tile.l_x);
    let (y0, y1) = (tile.center.y - 0.5 * tile.l_y, tile.center.y + 0.5 * tile.l_y);
    // The gradient is nearly affine over a tile; corners and center with a
    // margin bound it.
    let (mut rx, mut ry) = (0.0f64, 0.0f64);
    for (x, y) in [(x0, y0), (x0, y1), (x1, y0), (x1, y1), (tile.center.x, tile.center.y)] {
        let (gx, gy) = grad(x, y);
        rx = rx.max(gx);
        ry = ry.max(gy);
    }
    let rule = panel_rule();
    let n = rule.nodes.len();
    let mut px = panels_for(x0, x1, 1.25 * rx, st.frame.w_x, res, n, "exact oracle, x axis")?;
    let mut py = panels_for(y0, y1, 1.25 * ry, st.frame.w_y, res, n, "exact oracle, y axis")?;
    let grid = |px: usize, py: usize| {
        let hy = (y1 - y0) / py as f64;
        let rows: Vec<C64> = (0..py)
            .into_par_iter()
            .map(|j| {
                let mut acc = C64::new(0.0, 0.0);
                for (y, wy) in rule.mapped(y0 + j as f64 * hy, y0 + (j + 1) as f64 * hy) {
                    acc += wy * composite_par(&|x| f(x, y), x0, x1, px, rule);
                }
                acc
            })
            .collect();
        rows.iter().sum::<C64>()
    };
    let mut coarse = grid(px, py);
    loop {
        if 2 * px.max(py) * n > res.max_points {
            return Err(Error::Resolution(format!("exact oracle: step halving did not settle within {} samples", res.max_points)));
        }
        let fine = grid(2 * px, 2 * py);
        if (fine - coarse).norm() <= res.rel_tol * fine.norm() {
            return Ok(st.constant * fine);
        }
        px *= 2;
        py *= 2;
        coarse = fine;
    }
}

// ---------------------------------------------------------------------------
// Channel composition

/// Atmospheric power loss over the two hops, with `kappa` in dB/m.
pub fn atmospheric_loss(d_l: f64, d_p: f64, kappa: f64) -> f64 {
    10f64.powf(-0.1 * kappa * (d_l + d_p))
}

/// End-to-end gain of one source-receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGain {
    pub h_irs: f64,
    pub h_p: f64,
    pub h_a: f64,
    pub h: f64,
}

pub fn compose_channel(h_irs: f64, h_p: f64, h_a: f64) -> ChannelGain {
    debug_assert!((0.0..=1.0).contains(&h_irs), "h_irs = {h_irs}");
    debug_assert!(h_p > 0.0 && h_p <= 1.0, "h_p = {h_p}");
    debug_assert!(h_a > 0.0, "h_a = {h_a}");
    ChannelGain { h_irs, h_p, h_a, h: h_p * h_irs * h_a }
}
