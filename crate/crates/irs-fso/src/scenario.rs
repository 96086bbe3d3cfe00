//! Scenario files, parameter sweeps and validation suites.
//!
//! A scenario is a TOML file whose keys carry their units (`wavelength_nm`,
//! `lens_radius_m`, ...). Omitted keys fall back to the reference two-pair
//! system: 1550 nm, 0.25 mm waists, 1 m x 0.5 m IRS, sources at 1 km and
//! receivers at 3 km.
//!
//! Sweeps vary one of `d_p` (m), `theta_p1` (rad), `snr_db`, `r_e` (m) or
//! `rate` (Gbit/s). Rows come out in sweep order whatever the evaluation order.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{incident_field, incident_frame, tile_regime, BeamParams, Regime, RegimePolicy, ETA};
use crate::channel::{
    atmospheric_loss, beam_gml, gml_in_plane_prepared, gml_out_of_plane_with, hf_oracle_field, lens_power_converged,
    oracle_lens_power, prepare_link, LensGrid, OracleMode, OracleResolution, GML_Y_TOL,
};
use crate::error::{Error, Result};
use crate::geometry::{OrientedNode, Vec3};
use crate::irs::{build_layout, far_field_beam_unchecked, make_profile, passivity_factor, IrsLayout, LinkGeometry, ProfileKind, Tile};
use crate::performance::{
    average_ber_mc, average_ber_quad, capacity_lower_bound, gamma_threshold, outage_mc, outage_noise_limited, outage_quad,
    FadingParams, PerfInputs, QUAD_MAX_PATHS,
};
use crate::protocol::{apply_misalignment, build_assignment, gml_matrix, GmlMatrix, GmlMethod, Ownership, PairNodes, ProtocolAssignment, ProtocolKind};
use crate::quadrature::{integrate_pieces, Tolerance};

/// Version written into the first line of every CSV file.
pub const CSV_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub wavelength_nm: f64,
    /// Per source; a single entry applies to all.
    pub waist_mm: Vec<f64>,
    pub e0_kv_per_m: Vec<f64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { wavelength_nm: 1550.0, waist_mm: vec![0.25], e0_kv_per_m: vec![60.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtmosphereConfig {
    pub kappa_db_per_m: f64,
    pub noise_dbm_per_mhz: f64,
    pub bandwidth_ghz: f64,
    /// Gamma-Gamma parameters of the paths leaving each source.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for AtmosphereConfig {
    fn default() -> Self {
        Self { kappa_db_per_m: 0.43e-3, noise_dbm_per_mhz: -114.0, bandwidth_ghz: 1.0, alpha: vec![2.0], beta: vec![2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrsConfig {
    pub total_x_m: f64,
    pub total_y_m: f64,
    pub gap_x_m: f64,
    pub gap_y_m: f64,
    pub zeta0: f64,
    /// Tile grids [Q_x, Q_y] per protocol.
    pub td_tiles: [usize; 2],
    pub irsd_tiles: [usize; 2],
    pub irsh_tiles: [usize; 2],
    pub irsh_ownership: Ownership,
    /// IRSH beam footprints and lens centers [x, y] per pair; empty puts all
    /// of them at the IRS origin.
    pub irsh_footprints_m: Vec<[f64; 2]>,
}

impl Default for IrsConfig {
    fn default() -> Self {
        Self {
            total_x_m: 1.0,
            total_y_m: 0.5,
            gap_x_m: 0.0,
            gap_y_m: 0.0,
            zeta0: 1.0,
            td_tiles: [1, 1],
            irsd_tiles: [2, 1],
            irsh_tiles: [8, 2],
            irsh_ownership: Ownership::Interleaved,
            irsh_footprints_m: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub distance_m: f64,
    pub theta_rad: f64,
    pub phi_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodesConfig {
    pub ls: Vec<NodeConfig>,
    pub pd: Vec<NodeConfig>,
    pub lens_radius_m: f64,
    /// When set, source 1 sits at source 2's elevation plus this offset.
    pub delta_theta_l_mrad: Option<f64>,
}

impl Default for NodesConfig {
    fn default() -> Self {
        let node = |d: f64, t: f64, p: f64| NodeConfig { distance_m: d, theta_rad: t, phi_rad: p };
        Self {
            ls: vec![node(1e3, PI / 3.0, 0.0), node(1e3, PI / 4.0, 0.0)],
            pd: vec![node(3e3, PI / 3.0, PI), node(3e3, PI / 6.0, PI)],
            lens_radius_m: 0.15,
            delta_theta_l_mrad: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub kinds: Vec<ProtocolKind>,
    pub profiles: Vec<ProfileKind>,
    pub gml_method: GmlMethod,
    /// Reject receivers closer than 10 d_n instead of only inside d_n.
    pub strict_regime: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kinds: vec![ProtocolKind::Td, ProtocolKind::Irsd, ProtocolKind::Irsh],
            profiles: vec![ProfileKind::Linear],
            gml_method: GmlMethod::LensQuadrature,
            strict_regime: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MisalignmentConfig {
    /// Offset of the footprint of `pair` from where its tiles expect it.
    pub r_e_m: f64,
    /// 1-based pair index.
    pub pair: usize,
    /// In-plane direction of the offset; normalized on use.
    pub direction: [f64; 2],
}

impl Default for MisalignmentConfig {
    fn default() -> Self {
        Self { r_e_m: 0.0, pair: 1, direction: [1.0, 0.0] }
    }
}

/// Meaning of `snr_db`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrAxis {
    /// P / sigma^2 of every source.
    Transmit,
    /// gamma_n of the desired link at each receiver; interferers keep their
    /// power ratio.
    Received,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerformanceConfig {
    pub rate_gbps: f64,
    /// Overrides the powers set by the field amplitudes.
    pub snr_db: Option<f64>,
    pub snr_axis: SnrAxis,
    /// Monte Carlo trials per row; zero skips the simulation.
    pub trials: usize,
    pub seed: u64,
    /// Also evaluate BER and outage by quadrature (at most three paths).
    pub quadrature: bool,
}

impl Default for PerformanceConfig {
    fn default() -> Self {
        Self { rate_gbps: 1.7, snr_db: None, snr_axis: SnrAxis::Transmit, trials: 1_000_000, seed: 1, quadrature: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "d_p")]
    DP,
    #[serde(rename = "theta_p1")]
    ThetaP1,
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "r_e")]
    RE,
    #[serde(rename = "rate")]
    Rate,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::DP => "d_p",
            SweepVariable::ThetaP1 => "theta_p1",
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::RE => "r_e",
            SweepVariable::Rate => "rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Geometric spacing instead of linear.
    #[serde(default)]
    pub log: bool,
}

impl SweepSpec {
    pub fn linear(variable: SweepVariable, start: f64, stop: f64, steps: usize) -> Self {
        Self { variable, start, stop, steps, log: false }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / (self.steps - 1) as f64;
                if i + 1 == self.steps {
                    self.stop
                } else if self.log {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub beam: BeamConfig,
    pub atmosphere: AtmosphereConfig,
    pub irs: IrsConfig,
    pub nodes: NodesConfig,
    pub protocol: ProtocolConfig,
    pub misalignment: MisalignmentConfig,
    pub performance: PerformanceConfig,
    pub sweep: Option<SweepSpec>,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn config_to_string(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn save_config(cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config_to_string(cfg)?)?;
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{field} must be positive, got {v}")))
    }
}

fn per_pair<'a>(field: &str, v: &'a [f64], n: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        k if k == n => Ok(v.to_vec()),
        k => Err(Error::Config(format!("{field} needs 1 or {n} entries, got {k}"))),
    }
}

impl ScenarioConfig {
    pub fn pairs(&self) -> usize {
        self.nodes.ls.len()
    }

    /// Checks every physical invariant and names the first field that breaks one.
    pub fn validate(&self) -> Result<()> {
        let n = self.pairs();
        if n == 0 {
            return Err(Error::Config("nodes.ls must list at least one source".into()));
        }
        if self.nodes.pd.len() != n {
            return Err(Error::Config(format!("nodes.pd lists {} receivers for {n} sources", self.nodes.pd.len())));
        }
        positive("beam.wavelength_nm", self.beam.wavelength_nm)?;
        for (field, v) in [
            ("beam.waist_mm", &self.beam.waist_mm),
            ("beam.e0_kv_per_m", &self.beam.e0_kv_per_m),
            ("atmosphere.alpha", &self.atmosphere.alpha),
            ("atmosphere.beta", &self.atmosphere.beta),
        ] {
            for x in per_pair(field, v, n)? {
                positive(field, x)?;
            }
        }
        if !(self.atmosphere.kappa_db_per_m >= 0.0 && self.atmosphere.kappa_db_per_m.is_finite()) {
            return Err(Error::Config(format!("atmosphere.kappa_db_per_m must be nonnegative, got {}", self.atmosphere.kappa_db_per_m)));
        }
        if !self.atmosphere.noise_dbm_per_mhz.is_finite() {
            return Err(Error::Config("atmosphere.noise_dbm_per_mhz must be finite".into()));
        }
        positive("atmosphere.bandwidth_ghz", self.atmosphere.bandwidth_ghz)?;
        positive("irs.total_x_m", self.irs.total_x_m)?;
        positive("irs.total_y_m", self.irs.total_y_m)?;
        for (field, g) in [("irs.gap_x_m", self.irs.gap_x_m), ("irs.gap_y_m", self.irs.gap_y_m)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("{field} must be nonnegative, got {g}")));
            }
        }
        if !(self.irs.zeta0 > 0.0 && self.irs.zeta0 <= 1.0) {
            return Err(Error::Config(format!("irs.zeta0 must lie in (0, 1], got {}", self.irs.zeta0)));
        }
        for (field, t) in [("irs.td_tiles", self.irs.td_tiles), ("irs.irsd_tiles", self.irs.irsd_tiles), ("irs.irsh_tiles", self.irs.irsh_tiles)] {
            if t[0] == 0 || t[1] == 0 {
                return Err(Error::Config(format!("{field} must have positive counts, got {t:?}")));
            }
        }
        if !self.irs.irsh_footprints_m.is_empty() && self.irs.irsh_footprints_m.len() != n {
            return Err(Error::Config(format!("irs.irsh_footprints_m needs 0 or {n} entries")));
        }
        for (i, node) in self.nodes.ls.iter().chain(&self.nodes.pd).enumerate() {
            let field = if i < n { format!("nodes.ls[{i}]") } else { format!("nodes.pd[{}]", i - n) };
            positive(&format!("{field}.distance_m"), node.distance_m)?;
            if !(node.theta_rad > 0.0 && node.theta_rad <= PI / 2.0) {
                return Err(Error::Config(format!("{field}.theta_rad must lie in (0, pi/2], got {}", node.theta_rad)));
            }
            if !node.phi_rad.is_finite() {
                return Err(Error::Config(format!("{field}.phi_rad must be finite")));
            }
        }
        positive("nodes.lens_radius_m", self.nodes.lens_radius_m)?;
        if let Some(d) = self.nodes.delta_theta_l_mrad {
            if n < 2 || !d.is_finite() {
                return Err(Error::Config("nodes.delta_theta_l_mrad needs two sources and a finite value".into()));
            }
            let t = self.nodes.ls[1].theta_rad + 1e-3 * d;
            if !(t > 0.0 && t <= PI / 2.0) {
                return Err(Error::Config(format!("nodes.delta_theta_l_mrad puts source 1 at theta = {t}")));
            }
        }
        if self.protocol.kinds.is_empty() || self.protocol.profiles.is_empty() {
            return Err(Error::Config("protocol.kinds and protocol.profiles must not be empty".into()));
        }
        if !(self.misalignment.r_e_m >= 0.0 && self.misalignment.r_e_m.is_finite()) {
            return Err(Error::Config(format!("misalignment.r_e_m must be nonnegative, got {}", self.misalignment.r_e_m)));
        }
        if self.misalignment.pair == 0 || self.misalignment.pair > n {
            return Err(Error::Config(format!("misalignment.pair must be in 1..={n}, got {}", self.misalignment.pair)));
        }
        let [dx, dy] = self.misalignment.direction;
        if !(dx.hypot(dy) > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::Config("misalignment.direction must be a nonzero vector".into()));
        }
        positive("performance.rate_gbps", self.performance.rate_gbps)?;
        if let Some(s) = self.performance.snr_db {
            if !s.is_finite() {
                return Err(Error::Config("performance.snr_db must be finite".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if s.steps == 0 {
                return Err(Error::Config("sweep.steps must be at least 1".into()));
            }
            if !(s.start.is_finite() && s.stop.is_finite()) || (s.log && !(s.start > 0.0 && s.stop > 0.0)) {
                return Err(Error::Config("sweep.start and sweep.stop must be finite, and positive for a log sweep".into()));
            }
            self.at(s.variable, s.start)?.validate_point()?;
            self.at(s.variable, s.stop)?.validate_point()?;
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let mut c = self.clone();
        c.sweep = None;
        c.validate()
    }

    /// Copy of the configuration with one sweep variable set.
    pub fn at(&self, var: SweepVariable, value: f64) -> Result<ScenarioConfig> {
        let mut c = self.clone();
        match var {
            SweepVariable::DP => c.nodes.pd.iter_mut().for_each(|p| p.distance_m = value),
            SweepVariable::ThetaP1 => c.nodes.pd[0].theta_rad = value,
            SweepVariable::SnrDb => c.performance.snr_db = Some(value),
            SweepVariable::RE => c.misalignment.r_e_m = value,
            SweepVariable::Rate => c.performance.rate_gbps = value,
        }
        Ok(c)
    }

    /// Noise power sigma^2 over the FSO bandwidth, in W.
    pub fn noise_power(&self) -> f64 {
        10f64.powf((self.atmosphere.noise_dbm_per_mhz - 30.0) / 10.0) * self.atmosphere.bandwidth_ghz * 1e3
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.atmosphere.bandwidth_ghz * 1e9
    }

    pub fn policy(&self) -> RegimePolicy {
        RegimePolicy { strict: self.protocol.strict_regime, ..RegimePolicy::default() }
    }

    pub fn fading(&self) -> Result<Vec<FadingParams>> {
        let n = self.pairs();
        let a = per_pair("atmosphere.alpha", &self.atmosphere.alpha, n)?;
        let b = per_pair("atmosphere.beta", &self.atmosphere.beta, n)?;
        a.into_iter().zip(b).map(|(a, b)| FadingParams::new(a, b)).collect()
    }

    /// Sources and receivers with their IRSH placement.
    pub fn pair_nodes(&self) -> Result<Vec<PairNodes>> {
        self.validate_point()?;
        let n = self.pairs();
        let w0 = per_pair("beam.waist_mm", &self.beam.waist_mm, n)?;
        let e0 = per_pair("beam.e0_kv_per_m", &self.beam.e0_kv_per_m, n)?;
        (0..n)
            .map(|m| {
                let mut ls = self.nodes.ls[m];
                if let (0, Some(d)) = (m, self.nodes.delta_theta_l_mrad) {
                    ls.theta_rad = self.nodes.ls[1].theta_rad + 1e-3 * d;
                }
                let pd = self.nodes.pd[m];
                let spot = self.irs.irsh_footprints_m.get(m).map_or(Vec3::zeros(), |p| Vec3::new(p[0], p[1], 0.0));
                Ok(PairNodes {
                    ls: OrientedNode::new(ls.distance_m, ls.theta_rad, ls.phi_rad)?,
                    pd: OrientedNode::new(pd.distance_m, pd.theta_rad, pd.phi_rad)?,
                    beam: BeamParams::new(self.beam.wavelength_nm * 1e-9, w0[m] * 1e-3, e0[m] * 1e3)?,
                    lens_radius: self.nodes.lens_radius_m,
                    footprint: spot,
                    lens_center: spot,
                })
            })
            .collect()
    }

    pub fn layout(&self, kind: ProtocolKind) -> Result<IrsLayout> {
        let t = match kind {
            ProtocolKind::Td => self.irs.td_tiles,
            ProtocolKind::Irsd => self.irs.irsd_tiles,
            ProtocolKind::Irsh => self.irs.irsh_tiles,
        };
        build_layout(self.irs.total_x_m, self.irs.total_y_m, t[0], t[1], self.irs.gap_x_m, self.irs.gap_y_m)
    }

    /// Protocol layout with the configured misalignment applied.
    pub fn assignment(&self, kind: ProtocolKind, profile: ProfileKind) -> Result<ProtocolAssignment> {
        let pairs = self.pair_nodes()?;
        let a = build_assignment(kind, &pairs, &self.layout(kind)?, profile, self.irs.irsh_ownership, self.irs.zeta0)?;
        let m = &self.misalignment;
        if m.r_e_m == 0.0 {
            return Ok(a);
        }
        let norm = m.direction[0].hypot(m.direction[1]);
        let offset = Vec3::new(m.direction[0], m.direction[1], 0.0) * (m.r_e_m / norm);
        apply_misalignment(&a, m.pair - 1, offset)
    }
}

// ---------------------------------------------------------------------------
// Evaluation of one configuration

/// Received powers of one protocol and profile.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub kind: ProtocolKind,
    pub profile: ProfileKind,
    pub slots: usize,
    pub gml: GmlMatrix,
    /// h_p[m][n]: atmospheric loss from source m to receiver n.
    pub h_p: Vec<Vec<f64>>,
    /// gamma[m][n] = P_m / sigma^2 (h_irs h_p)^2 at receiver n.
    pub gamma: Vec<Vec<f64>>,
}

pub fn evaluate(cfg: &ScenarioConfig, kind: ProtocolKind, profile: ProfileKind) -> Result<Evaluation> {
    let assign = cfg.assignment(kind, profile)?;
    let gml = gml_matrix(&assign, cfg.protocol.gml_method, &cfg.policy())?;
    let n = assign.len();
    let kappa = cfg.atmosphere.kappa_db_per_m;
    let h_p: Vec<Vec<f64>> =
        (0..n).map(|m| (0..n).map(|k| atmospheric_loss(assign.pairs[m].ls.d, assign.pairs[k].pd.d, kappa)).collect()).collect();
    let noise = cfg.noise_power();
    let gain = |m: usize, k: usize| (gml.h[m][k] * h_p[m][k]).powi(2);
    let gamma = (0..n)
        .map(|m| {
            (0..n)
                .map(|k| match (cfg.performance.snr_db, cfg.performance.snr_axis) {
                    (None, _) => assign.pairs[m].beam.power() / noise * gain(m, k),
                    (Some(s), SnrAxis::Transmit) => 10f64.powf(s / 10.0) * gain(m, k),
                    (Some(s), SnrAxis::Received) => {
                        let own = gain(k, k);
                        if own > 0.0 {
                            10f64.powf(s / 10.0) * gain(m, k) / own
                        } else {
                            0.0
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(Evaluation { kind, profile, slots: assign.slots(), gml, h_p, gamma })
}

impl Evaluation {
    /// SNR factors seen by receiver `n`.
    pub fn perf_inputs(&self, n: usize, fading: &[FadingParams]) -> Result<PerfInputs> {
        PerfInputs::new(self.gamma.iter().map(|row| row[n]).collect(), n, fading.to_vec())
    }

    /// Least favorable regime among the links into receiver `n`.
    pub fn regime(&self, n: usize) -> Option<Regime> {
        self.gml.regime.iter().filter_map(|row| row[n]).min()
    }
}

// ---------------------------------------------------------------------------
// Sweeps

/// One receiver at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub protocol: String,
    pub profile: String,
    pub pair: usize,
    pub delta_theta_l_mrad: Option<f64>,
    pub r_e_m: f64,
    pub rate_gbps: f64,
    pub regime: String,
    pub h_irs: Option<f64>,
    pub h_p: Option<f64>,
    pub gamma_signal: Option<f64>,
    pub gamma_interference: Option<f64>,
    pub capacity_low_gbps: Option<f64>,
    pub ber_quad: Option<f64>,
    pub ber_mc: Option<f64>,
    pub ber_mc_se: Option<f64>,
    pub outage_quad: Option<f64>,
    pub outage_mc: Option<f64>,
    pub outage_mc_se: Option<f64>,
    pub status: String,
    pub warnings: String,
}

fn profile_label(p: ProfileKind) -> &'static str {
    match p {
        ProfileKind::Linear => "lp",
        ProfileKind::Quadratic => "qp",
    }
}

fn sweep_rows(cfg: &ScenarioConfig, var: &str, value: f64, kind: ProtocolKind, profile: ProfileKind) -> Vec<SweepRow> {
    let base = |pair: usize| SweepRow {
        variable: var.to_string(),
        value,
        protocol: kind.label().into(),
        profile: profile_label(profile).into(),
        pair: pair + 1,
        delta_theta_l_mrad: cfg.nodes.delta_theta_l_mrad,
        r_e_m: cfg.misalignment.r_e_m,
        rate_gbps: cfg.performance.rate_gbps,
        regime: "error".into(),
        h_irs: None,
        h_p: None,
        gamma_signal: None,
        gamma_interference: None,
        capacity_low_gbps: None,
        ber_quad: None,
        ber_mc: None,
        ber_mc_se: None,
        outage_quad: None,
        outage_mc: None,
        outage_mc_se: None,
        status: "ok".into(),
        warnings: String::new(),
    };
    let n = cfg.pairs();
    let ev = match evaluate(cfg, kind, profile) {
        Ok(ev) => ev,
        Err(e) => {
            return (0..n)
                .map(|k| SweepRow { status: e.to_string(), ..base(k) })
                .collect();
        }
    };
    let fading = match cfg.fading() {
        Ok(f) => f,
        Err(e) => return (0..n).map(|k| SweepRow { status: e.to_string(), ..base(k) }).collect(),
    };
    (0..n).map(|k| receiver_row(cfg, &ev, &fading, k, base(k))).collect()
}

fn receiver_row(cfg: &ScenarioConfig, ev: &Evaluation, fading: &[FadingParams], k: usize, mut row: SweepRow) -> SweepRow {
    row.regime = ev.regime(k).map_or("error", |r| r.label()).into();
    row.h_irs = Some(ev.gml.h[k][k]);
    row.h_p = Some(ev.h_p[k][k]);
    row.warnings = ev.gml.warnings.join("; ");
    let signal = ev.gamma[k][k];
    let interf: f64 = (0..ev.gamma.len()).filter(|&m| m != k).map(|m| ev.gamma[m][k]).sum();
    row.gamma_signal = Some(signal);
    row.gamma_interference = Some(interf);
    let w = cfg.bandwidth_hz();
    row.capacity_low_gbps = Some(capacity_lower_bound(signal / (interf + 1.0), w) / 1e9);
    // A pair that owns one slot out of T must carry T times its rate while it
    // transmits.
    let thr = gamma_threshold(cfg.performance.rate_gbps * 1e9 * ev.slots as f64, w);
    let perf = match ev.perf_inputs(k, fading) {
        Ok(p) => p,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    let mut errors = Vec::new();
    let active = 1 + (0..ev.gamma.len()).filter(|&m| m != k && ev.gamma[m][k] > 0.0).count();
    if cfg.performance.quadrature && active <= QUAD_MAX_PATHS {
        match average_ber_quad(&perf) {
            Ok(v) => row.ber_quad = Some(v),
            Err(e) => errors.push(e.to_string()),
        }
        match outage_quad(&perf, thr) {
            Ok(v) => row.outage_quad = Some(v),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let trials = cfg.performance.trials;
    if trials > 0 {
        // Each receiver gets its own stream family so rows stay independent.
        let seed = cfg.performance.seed.wrapping_add((k as u64) << 32);
        match average_ber_mc(&perf, trials, seed) {
            Ok(e) => (row.ber_mc, row.ber_mc_se) = (Some(e.mean), Some(e.std_err)),
            Err(e) => errors.push(e.to_string()),
        }
        match outage_mc(&perf, thr, trials, seed) {
            Ok(e) => (row.outage_mc, row.outage_mc_se) = (Some(e.mean), Some(e.std_err)),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        row.status = errors.join("; ");
    }
    row
}

/// Evaluates every configuration over its sweep (or once, without one) for
/// each configured protocol and profile. Rows follow the order of `cases`,
/// then sweep point, protocol, profile and receiver.
pub fn run_sweep_cases(cases: &[ScenarioConfig]) -> Result<Vec<SweepRow>> {
    let mut jobs: Vec<(ScenarioConfig, String, f64, ProtocolKind, ProfileKind)> = Vec::new();
    for cfg in cases {
        cfg.validate()?;
        let points: Vec<(String, f64, ScenarioConfig)> = match &cfg.sweep {
            Some(s) => s.values().into_iter().map(|v| Ok((s.variable.label().to_string(), v, cfg.at(s.variable, v)?))).collect::<Result<_>>()?,
            None => vec![("none".into(), f64::NAN, cfg.clone())],
        };
        for (var, v, c) in points {
            for &kind in &cfg.protocol.kinds {
                for &profile in &cfg.protocol.profiles {
                    jobs.push((c.clone(), var.clone(), v, kind, profile));
                }
            }
        }
    }
    let rows: Vec<Vec<SweepRow>> = jobs.par_iter().map(|(c, var, v, kind, profile)| sweep_rows(c, var, *v, *kind, *profile)).collect();
    Ok(rows.into_iter().flatten().collect())
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    run_sweep_cases(std::slice::from_ref(cfg))
}

/// Default sweep for each experiment when the configuration has none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// GML of pair 1 against receiver distance, single 0.5 m x 0.5 m tile.
    GmlDistance,
    /// Signal and interference power against theta_p1, co-located sources
    /// and 1 mrad apart.
    Interference,
    /// BER against SNR for LP and QP, co-located sources and 1 mrad apart.
    Ber,
    /// Outage against theta_p1, with and without misalignment, at 1.7 and
    /// 0.5 Gbit/s.
    Outage,
}

impl Template {
    pub fn default_sweep(&self) -> SweepSpec {
        match self {
            Template::GmlDistance => SweepSpec { variable: SweepVariable::DP, start: 1e3, stop: 1e5, steps: 9, log: true },
            Template::Interference | Template::Outage => SweepSpec::linear(SweepVariable::ThetaP1, 0.6, 1.4, 9),
            Template::Ber => SweepSpec::linear(SweepVariable::SnrDb, 30.0, 80.0, 11),
        }
    }

    /// Configurations the experiment runs. Settings the user fixed in `cfg`
    /// are kept; the template only fills the free ones.
    pub fn cases(&self, cfg: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut base = cfg.clone();
        if base.sweep.is_none() {
            base.sweep = Some(self.default_sweep());
        }
        let sweeps = |v: SweepVariable| base.sweep.as_ref().map(|s| s.variable) == Some(v);
        match self {
            Template::GmlDistance => vec![base],
            Template::Interference | Template::Ber => {
                if base.nodes.delta_theta_l_mrad.is_some() || base.pairs() < 2 {
                    return vec![base];
                }
                [0.0, 1.0]
                    .iter()
                    .map(|&d| {
                        let mut c = base.clone();
                        c.nodes.delta_theta_l_mrad = Some(d);
                        c
                    })
                    .collect()
            }
            Template::Outage => {
                let res: Vec<f64> = if sweeps(SweepVariable::RE) || cfg.misalignment.r_e_m > 0.0 { vec![cfg.misalignment.r_e_m] } else { vec![0.0, 0.17] };
                let rates: Vec<f64> = if sweeps(SweepVariable::Rate) { vec![cfg.performance.rate_gbps] } else { vec![1.7, 0.5] };
                let mut out = Vec::new();
                for &rate in &rates {
                    for &r in &res {
                        let mut c = base.clone();
                        c.misalignment.r_e_m = r;
                        c.performance.rate_gbps = rate;
                        out.push(c);
                    }
                }
                out
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Other tables

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub protocol: String,
    pub pair: usize,
    pub tile_x_m: f64,
    pub tile_y_m: f64,
    pub w_x_m: f64,
    pub w_y_m: f64,
    pub d_f_m: f64,
    pub d_n_m: f64,
    pub d_p_m: f64,
    pub regime: String,
}

/// Footprint widths and regime distances of every pair under every protocol.
pub fn regimes_table(cfg: &ScenarioConfig) -> Result<Vec<RegimeRow>> {
    let pairs = cfg.pair_nodes()?;
    let mut rows = Vec::new();
    for &kind in &cfg.protocol.kinds {
        let layout = cfg.layout(kind)?;
        for (m, p) in pairs.iter().enumerate() {
            let f = incident_frame(&p.beam, &p.ls, &Vec3::zeros())?;
            let r = tile_regime(&f, layout.l_x, layout.l_y, p.beam.wavelength)?;
            rows.push(RegimeRow {
                protocol: kind.label().into(),
                pair: m + 1,
                tile_x_m: layout.l_x,
                tile_y_m: layout.l_y,
                w_x_m: f.w_x,
                w_y_m: f.w_y,
                d_f_m: r.d_f,
                d_n_m: r.d_n,
                d_p_m: p.pd.d,
                regime: r.classify(p.pd.d).label().into(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRow {
    pub x_m: f64,
    pub y_m: f64,
    pub inside_lens: bool,
    pub re: f64,
    pub im: f64,
    /// |E|^2 / (2 eta), W/m^2.
    pub intensity: f64,
    pub oracle_re: Option<f64>,
    pub oracle_im: Option<f64>,
    pub oracle_rel_diff: Option<f64>,
}

/// Field of source 1 over a `points` x `points` grid covering the lens of
/// receiver 1, optionally checked against a diffraction oracle.
pub fn field_map(cfg: &ScenarioConfig, kind: ProtocolKind, profile: ProfileKind, points: usize, oracle: Option<OracleMode>) -> Result<Vec<FieldRow>> {
    if points < 2 {
        return Err(Error::Config(format!("field map needs at least 2 points per axis, got {points}")));
    }
    let assign = cfg.assignment(kind, profile)?;
    let tiles = &assign.slot_tiles[assign.slot_of(0)];
    let link = assign.link(0, 0);
    let prep = prepare_link(&link, tiles, &assign.pairs[0].beam, &cfg.policy())?;
    let a = link.lens_radius;
    let grid: Vec<(f64, f64)> = (0..points)
        .flat_map(|j| (0..points).map(move |i| (i, j)))
        .map(|(i, j)| {
            let t = |i: usize| -a + 2.0 * a * i as f64 / (points - 1) as f64;
            (t(i), t(j))
        })
        .collect();
    let res = OracleResolution::default();
    grid.par_iter()
        .map(|&(x, y)| {
            let e = prep.field(x, y)?;
            let mut row = FieldRow {
                x_m: x,
                y_m: y,
                inside_lens: x.hypot(y) <= a,
                re: e.re,
                im: e.im,
                intensity: e.norm_sqr() / (2.0 * ETA),
                oracle_re: None,
                oracle_im: None,
                oracle_rel_diff: None,
            };
            if let Some(mode) = oracle {
                let r = Vec3::new(x, y, 0.0);
                let mut o = num_complex::Complex64::new(0.0, 0.0);
                for t in tiles {
                    o += hf_oracle_field(&r, &link, t, &assign.pairs[0].beam, mode, &res)?;
                }
                row.oracle_re = Some(o.re);
                row.oracle_im = Some(o.im);
                row.oracle_rel_diff = Some((e - o).norm() / o.norm());
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmlRow {
    pub profile: String,
    pub d_p_m: f64,
    pub regime: String,
    pub d_f_m: f64,
    /// Circular-lens quadrature of the closed-form tile fields.
    pub h_quadrature: Option<f64>,
    /// Square-lens closed form.
    pub h_square: Option<f64>,
    /// In-plane closed form, when the receiver lies in the incidence plane.
    pub h_in_plane: Option<f64>,
    /// Elliptical Gaussian beam of the far-field approximation.
    pub h_far_field: Option<f64>,
    pub h_oracle: Option<f64>,
    pub status: String,
}

/// GML of pair 1 through the TD layout (one tile) over the configured sweep
/// of `d_p`, by every available route.
pub fn gml_sweep(cfg: &ScenarioConfig, oracle: Option<OracleMode>) -> Result<Vec<GmlRow>> {
    let spec = cfg.sweep.clone().unwrap_or_else(|| Template::GmlDistance.default_sweep());
    if spec.variable != SweepVariable::DP {
        return Err(Error::Config(format!("gml-sweep varies d_p, the configuration sweeps {}", spec.variable.label())));
    }
    let jobs: Vec<(f64, ProfileKind)> =
        spec.values().into_iter().flat_map(|d| cfg.protocol.profiles.iter().map(move |&p| (d, p))).collect();
    jobs.par_iter()
        .map(|&(d, profile)| {
            let c = cfg.at(SweepVariable::DP, d)?;
            let mut row = GmlRow {
                profile: profile_label(profile).into(),
                d_p_m: d,
                regime: "error".into(),
                d_f_m: f64::NAN,
                h_quadrature: None,
                h_square: None,
                h_in_plane: None,
                h_far_field: None,
                h_oracle: None,
                status: "ok".into(),
            };
            let assign = c.assignment(ProtocolKind::Td, profile)?;
            let tiles = &assign.slot_tiles[0][..];
            let link = assign.link(0, 0);
            let beam = assign.pairs[0].beam;
            let f = incident_frame(&beam, &link.ls, &link.r_l0)?;
            row.d_f_m = tile_regime(&f, tiles[0].l_x, tiles[0].l_y, beam.wavelength)?.d_f;
            let prep = match prepare_link(&link, tiles, &beam, &c.policy()) {
                Ok(p) => p,
                Err(e) => {
                    row.status = e.to_string();
                    return Ok(row);
                }
            };
            row.regime = prep.regime.label().into();
            let mut errors = Vec::new();
            let mut note = |r: Result<f64>| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            };
            let grid = LensGrid::for_link(&prep);
            row.h_quadrature = note(lens_power_converged(&prep, LensGrid::start_for_link(&prep)));
            row.h_square = note(gml_out_of_plane_with(&prep, GML_Y_TOL));
            if profile == ProfileKind::Linear && link.ls.phi == 0.0 && (link.pd.phi - PI).abs() < 1e-12 {
                row.h_in_plane = note(gml_in_plane_prepared(&prep));
            }
            if profile == ProfileKind::Linear {
                row.h_far_field = note(far_field_beam_unchecked(&link, &beam, c.irs.zeta0).and_then(|ff| beam_gml(&ff, link.lens_radius, &beam, &grid)));
            }
            if let Some(mode) = oracle {
                row.h_oracle = note(oracle_lens_power(&prep, &grid, mode, &OracleResolution::default()));
            }
            if !errors.is_empty() {
                row.status = errors.join("; ");
            }
            Ok(row)
        })
        .collect()
}

/// Writes rows as CSV after a versioned comment line naming the table.
pub fn write_csv<T: Serialize, W: Write>(mut out: W, table: &str, rows: &[T]) -> Result<()> {
    writeln!(out, "# irs-fso {table} v{CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Regimes,
    Fields,
    Gml,
    Perf,
    All,
}

/// How `actual` is held against `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |actual / expected - 1| <= tolerance
    Relative,
    /// |actual - expected| <= tolerance
    Absolute,
    /// actual <= expected + tolerance
    AtMost,
    /// actual >= expected - tolerance
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub note: String,
}

impl Check {
    pub fn new(suite: &str, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::Relative => (actual / expected - 1.0).abs() <= tolerance,
            Comparison::Absolute => (actual - expected).abs() <= tolerance,
            Comparison::AtMost => actual <= expected + tolerance,
            Comparison::AtLeast => actual >= expected - tolerance,
        };
        Self { suite: suite.into(), name: name.into(), expected, actual, tolerance, comparison, pass, note: String::new() }
    }

    fn failed(suite: &str, name: impl Into<String>, err: &Error) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            expected: f64::NAN,
            actual: f64::NAN,
            tolerance: f64::NAN,
            comparison: Comparison::Absolute,
            pass: false,
            note: err.to_string(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Reference geometry for the regime distances: 2.5 mm waist, source 1 km
/// away at pi/8, 0.5 m tile.
pub fn narrow_incidence_reference() -> Result<(f64, f64, f64, f64)> {
    let b = BeamParams::new(1550e-9, 2.5e-3, 60e3)?;
    let f = incident_frame(&b, &OrientedNode::new(1e3, PI / 8.0, 0.0)?, &Vec3::zeros())?;
    let r = tile_regime(&f, 0.5, 0.5, b.wavelength)?;
    Ok((r.d_f, r.d_n, f.w_x, f.w_y))
}

fn regime_checks(cfg: &ScenarioConfig) -> Vec<Check> {
    const S: &str = "regimes";
    let mut out = Vec::new();
    match narrow_incidence_reference() {
        Ok((d_f, d_n, w_x, w_y)) => {
            out.push(Check::new(S, "reference d_f (m), 2.5 mm waist at pi/8", 32.7e3, d_f, 0.01, Comparison::Relative));
            out.push(Check::new(S, "reference d_n (m), 2.5 mm waist at pi/8", 85.6, d_n, 0.01, Comparison::Relative));
            out.push(Check::new(S, "reference w_x (m), 2.5 mm waist at pi/8", 0.52, w_x, 0.01, Comparison::Absolute));
            out.push(Check::new(S, "reference w_y (m), 2.5 mm waist at pi/8", 0.19, w_y, 0.01, Comparison::Absolute));
        }
        Err(e) => out.push(Check::failed(S, "reference regime distances", &e)),
    }
    let reference = ScenarioConfig::default();
    let mut five = reference.clone();
    five.irs.total_x_m = 0.5;
    match regimes_table(&five) {
        Ok(rows) => {
            let r = &rows[0];
            out.push(Check::new(S, "reference pair 1 d_f (m), 0.5 m tile", 40.3e3, r.d_f_m, 0.01, Comparison::Relative));
            out.push(Check::new(S, "reference pair 1 w_x (m)", 2.28, r.w_x_m, 0.01, Comparison::Absolute));
            out.push(Check::new(S, "reference pair 1 w_y (m)", 1.97, r.w_y_m, 0.01, Comparison::Absolute));
        }
        Err(e) => out.push(Check::failed(S, "reference pair regime distances", &e)),
    }
    match regimes_table(cfg) {
        Ok(rows) => {
            for r in rows {
                out.push(
                    Check::new(S, format!("{} pair {} beyond d_n", r.protocol, r.pair), r.d_n_m, r.d_p_m, 0.0, Comparison::AtLeast)
                        .with_note(r.regime),
                );
            }
        }
        Err(e) => out.push(Check::failed(S, "configured regimes", &e)),
    }
    out
}

/// Single 0.5 m tile at the IRS origin serving pair 1.
fn single_tile_link(cfg: &ScenarioConfig, profile: ProfileKind, d_p: Option<f64>) -> Result<(LinkGeometry, Vec<Tile>, BeamParams)> {
    let mut c = cfg.clone();
    c.irs.total_x_m = 0.5;
    c.irs.total_y_m = 0.5;
    c.misalignment.r_e_m = 0.0;
    if let Some(d) = d_p {
        c = c.at(SweepVariable::DP, d)?;
    }
    let a = c.assignment(ProtocolKind::Td, profile)?;
    Ok((a.link(0, 0), a.slot_tiles[0].clone(), a.pairs[0].beam))
}

/// Relative error of the incident-field power integral against P.
pub fn incident_power_residual(beam: &BeamParams, ls: &OrientedNode) -> Result<f64> {
    let f = incident_frame(beam, ls, &Vec3::zeros())?;
    let tol = Tolerance::new(1e-16, 1e-12);
    let span = |w: f64| (-8..=8).map(|i| i as f64 * w).collect::<Vec<_>>();
    let ix = integrate_pieces(|x: f64| incident_field(&Vec3::new(x, 0.0, 0.0), &f, beam).norm_sqr(), &span(f.w_x), tol)?;
    let iy = integrate_pieces(|y: f64| incident_field(&Vec3::new(0.0, y, 0.0), &f, beam).norm_sqr(), &span(f.w_y), tol)?;
    let peak = incident_field(&Vec3::zeros(), &f, beam).norm_sqr();
    Ok(ix * iy / peak / (2.0 * ETA) / beam.power() - 1.0)
}

/// Largest relative difference between the closed-form tile field and the
/// separable oracle over a 5 x 5 grid inside the lens.
pub fn field_oracle_residual(cfg: &ScenarioConfig, profile: ProfileKind) -> Result<f64> {
    let (link, tiles, beam) = single_tile_link(cfg, profile, None)?;
    let prep = prepare_link(&link, &tiles, &beam, &cfg.policy())?;
    let a = link.lens_radius / 2f64.sqrt();
    let pts: Vec<(f64, f64)> = (0..5).flat_map(|j| (0..5).map(move |i| (i, j))).map(|(i, j)| (-a + a * 0.5 * i as f64, -a + a * 0.5 * j as f64)).collect();
    let res = OracleResolution::default();
    let errs = pts
        .par_iter()
        .map(|&(x, y)| {
            let e = prep.field(x, y)?;
            let o = hf_oracle_field(&Vec3::new(x, y, 0.0), &link, &tiles[0], &beam, OracleMode::Separable1d, &res)?;
            Ok((e - o).norm() / o.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn field_checks(cfg: &ScenarioConfig) -> Vec<Check> {
    const S: &str = "fields";
    let mut out = Vec::new();
    match cfg.pair_nodes() {
        Ok(pairs) => {
            for (m, p) in pairs.iter().enumerate() {
                match incident_power_residual(&p.beam, &p.ls) {
                    Ok(r) => out.push(Check::new(S, format!("pair {} incident power / P - 1", m + 1), 0.0, r, 1e-6, Comparison::Absolute)),
                    Err(e) => out.push(Check::failed(S, "incident power", &e)),
                }
            }
        }
        Err(e) => out.push(Check::failed(S, "incident power", &e)),
    }
    for profile in [ProfileKind::Linear, ProfileKind::Quadratic] {
        let name = format!("{} tile field vs separable oracle, max relative difference", profile_label(profile));
        match field_oracle_residual(cfg, profile) {
            Ok(r) => out.push(Check::new(S, name, 0.0, r, 1e-6, Comparison::AtMost)),
            Err(e) => out.push(Check::failed(S, name, &e)),
        }
    }
    out
}

/// Receiver distances of the closed-form vs quadrature comparison.
pub const GML_DISTANCES_M: [f64; 5] = [1e3, 2e3, 3e3, 5e3, 1e4];

fn gml_checks(cfg: &ScenarioConfig) -> Vec<Check> {
    const S: &str = "gml";
    let mut out = Vec::new();
    let rows: Vec<Result<(f64, f64, Result<f64>)>> = GML_DISTANCES_M
        .par_iter()
        .map(|&d| {
            let (link, tiles, beam) = single_tile_link(cfg, ProfileKind::Linear, Some(d))?;
            let prep = prepare_link(&link, &tiles, &beam, &cfg.policy())?;
            let quad = lens_power_converged(&prep, LensGrid::start_for_link(&prep))?;
            Ok((d, quad, gml_out_of_plane_with(&prep, GML_Y_TOL)))
        })
        .collect();
    let mut last = f64::INFINITY;
    let mut monotone = true;
    for r in rows {
        match r {
            Ok((d, quad, square)) => {
                monotone &= quad < last;
                last = quad;
                out.push(Check::new(S, format!("h_irs <= 1 at d_p = {d} m"), 1.0, quad, 0.0, Comparison::AtMost));
                let name = format!("square-lens closed form vs lens quadrature at d_p = {d} m");
                match square {
                    Ok(h) => out.push(Check::new(S, name, quad, h, 1e-3, Comparison::Relative)),
                    Err(e) => out.push(Check::failed(S, name, &e)),
                }
            }
            Err(e) => out.push(Check::failed(S, "lens quadrature", &e)),
        }
    }
    out.push(Check::new(S, "lens quadrature GML decreasing in d_p", 1.0, f64::from(u8::from(monotone)), 0.0, Comparison::Absolute));
    match far_field_checks(cfg) {
        Ok(c) => out.extend(c),
        Err(e) => out.push(Check::failed(S, "far-field consistency", &e)),
    }
    match passivity_residual(cfg) {
        Ok(r) => out.push(Check::new(S, "infinite tile and lens collect the incident power", 1.0, r, 1e-4, Comparison::Relative)),
        Err(e) => out.push(Check::failed(S, "passivity", &e)),
    }
    out
}

/// Far-field comparison link: source 1 km away at pi/3, receiver at pi/4 in
/// the incidence plane, one 1 km tile so the whole footprint is configured.
pub fn far_field_link(cfg: &ScenarioConfig, d_p: f64) -> Result<(LinkGeometry, Vec<Tile>, BeamParams)> {
    let pairs = cfg.pair_nodes()?;
    let beam = pairs[0].beam;
    let link = LinkGeometry {
        ls: OrientedNode::new(1e3, PI / 3.0, 0.0)?,
        pd: OrientedNode::new(d_p, PI / 4.0, PI)?,
        lens_radius: cfg.nodes.lens_radius_m,
        r_l0: Vec3::zeros(),
        r_p0: Vec3::zeros(),
    };
    let f = incident_frame(&beam, &link.ls, &link.r_l0)?;
    let tile = Tile {
        center: Vec3::zeros(),
        l_x: 1e3,
        l_y: 1e3,
        profile: make_profile(ProfileKind::Linear, &f, &link.pd, Vec3::zeros()),
        zeta0: 1.0,
        zeta_bar: passivity_factor(link.pd.theta),
        owner: Some(0),
    };
    Ok((link, vec![tile], beam))
}

/// Far-field distance of the footprint of [`far_field_link`].
pub fn far_field_distance(cfg: &ScenarioConfig) -> Result<f64> {
    let (link, tiles, beam) = far_field_link(cfg, 1e4)?;
    let f = incident_frame(&beam, &link.ls, &link.r_l0)?;
    Ok(tile_regime(&f, tiles[0].l_x, tiles[0].l_y, beam.wavelength)?.d_f)
}

/// (square-lens closed form, far-field beam) GML at `d_p`.
pub fn far_field_pair(cfg: &ScenarioConfig, d_p: f64) -> Result<(f64, f64)> {
    let (link, tiles, beam) = far_field_link(cfg, d_p)?;
    let prep = prepare_link(&link, &tiles, &beam, &cfg.policy())?;
    let closed = gml_out_of_plane_with(&prep, GML_Y_TOL)?;
    let ff = far_field_beam_unchecked(&link, &beam, 1.0)?;
    let far = beam_gml(&ff, link.lens_radius, &beam, &LensGrid::for_link(&prep).refined())?;
    Ok((closed, far))
}

fn far_field_checks(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    const S: &str = "gml";
    let d_f = far_field_distance(cfg)?;
    let (closed, far) = far_field_pair(cfg, 10.0 * d_f)?;
    let (near_closed, near_far) = far_field_pair(cfg, 3e3)?;
    Ok(vec![
        Check::new(S, "far-field beam vs closed form at 10 d_f", closed, far, 0.05, Comparison::Relative),
        Check::new(S, "far-field beam misses the closed form at 3 km (relative gap)", 0.1, (near_far / near_closed - 1.0).abs(), 0.0, Comparison::AtLeast),
    ])
}

/// Fraction of the source power that a tile and lens much larger than the
/// beam collect, with unit efficiency, by lens quadrature.
pub fn passivity_residual(cfg: &ScenarioConfig) -> Result<f64> {
    let d_p = 10.0 * far_field_distance(cfg)?;
    let (mut link, tiles, beam) = far_field_link(cfg, d_p)?;
    let ff = far_field_beam_unchecked(&link, &beam, 1.0)?;
    link.lens_radius = 4.0 * ff.w_x.max(ff.w_y);
    let prep = prepare_link(&link, &tiles, &beam, &cfg.policy())?;
    lens_power_converged(&prep, LensGrid::default())
}

fn perf_checks(cfg: &ScenarioConfig, trials: usize) -> Vec<Check> {
    const S: &str = "perf";
    let mut out = Vec::new();
    let seed = cfg.performance.seed;
    let c = cfg.clone();
    let run = || -> Result<Vec<Check>> {
        let ev = evaluate(&c, ProtocolKind::Irsh, ProfileKind::Linear)?;
        let fading = c.fading()?;
        let perf = ev.perf_inputs(0, &fading)?;
        let mut v = Vec::new();
        let q = average_ber_quad(&perf)?;
        let m = average_ber_mc(&perf, trials, seed)?;
        v.push(Check::new(S, "IRSH BER, Monte Carlo vs quadrature (3 SE)", q, m.mean, 3.0 * m.std_err, Comparison::Absolute));
        let thr = gamma_threshold(c.performance.rate_gbps * 1e9, c.bandwidth_hz());
        let q = outage_quad(&perf, thr)?;
        let m = outage_mc(&perf, thr, trials, seed)?;
        v.push(Check::new(S, "IRSH outage, Monte Carlo vs quadrature (3 SE)", q, m.mean, 3.0 * m.std_err, Comparison::Absolute));
        let solo = PerfInputs::new(vec![perf.gamma[0]], 0, vec![fading[0]])?;
        let closed = outage_noise_limited(perf.gamma[0], thr, fading[0])?;
        let m = outage_mc(&solo, thr, trials, seed)?;
        v.push(Check::new(S, "noise-limited outage, Monte Carlo vs closed form (3 SE)", closed, m.mean, 3.0 * m.std_err, Comparison::Absolute));
        v.push(Check::new(S, "noise-limited outage, quadrature vs closed form", closed, outage_quad(&solo, thr)?, 1e-8, Comparison::Absolute));
        let w = c.bandwidth_hz();
        v.push(Check::new(S, "threshold SINR at 1.7 Gbit/s", 66.95, gamma_threshold(1.7e9, w), 0.01, Comparison::Absolute));
        v.push(Check::new(S, "capacity bound at the threshold SINR (Gbit/s)", 1.7, capacity_lower_bound(gamma_threshold(1.7e9, w), w) / 1e9, 1e-9, Comparison::Relative));
        Ok(v)
    };
    match run() {
        Ok(v) => out.extend(v),
        Err(e) => out.push(Check::failed(S, "performance", &e)),
    }
    out
}

/// Monte Carlo trials of the fast performance suite.
pub const VALIDATE_TRIALS: usize = 10_000;

pub fn validate(cfg: &ScenarioConfig, suite: Suite) -> ValidationReport {
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Regimes {
        checks.extend(regime_checks(cfg));
    }
    if all || suite == Suite::Fields {
        checks.extend(field_checks(cfg));
    }
    if all || suite == Suite::Gml {
        checks.extend(gml_checks(cfg));
    }
    if all || suite == Suite::Perf {
        checks.extend(perf_checks(cfg, VALIDATE_TRIALS));
    }
    ValidationReport { passed: checks.iter().all(|c| c.pass), checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.beam.wavelength_nm, 1550.0);
        assert_eq!(c.atmosphere.bandwidth_ghz, 1.0);
        assert_eq!(c.atmosphere.kappa_db_per_m, 0.43e-3);
        assert_eq!((c.atmosphere.alpha[0], c.atmosphere.beta[0]), (2.0, 2.0));
        assert_eq!(c.nodes.lens_radius_m, 0.15);
        assert_eq!((c.irs.total_x_m, c.irs.total_y_m), (1.0, 0.5));
        assert_eq!(c.pairs(), 2);
    }

    #[test]
    fn invalid_fields_are_named() {
        let e = parse_config("[nodes]\nlens_radius_m = -0.15\n").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("nodes.lens_radius_m")), "{e}");
        let e = parse_config("[beam]\nwavelenght_nm = 1550\n").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("wavelenght_nm")), "{e}");
        let e = parse_config("[beam]\nwavelength_nm = \"red\"\n").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("line 2")), "{e}");
        let e = parse_config("[beam]\nwaist_mm = [0.25, 0.25, 0.25]\n").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("beam.waist_mm")), "{e}");
        let e = parse_config("[sweep]\nvariable = \"lens\"\nstart = 0\nstop = 1\nsteps = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = parse_config("[sweep]\nvariable = \"theta_p1\"\nstart = 0.5\nstop = 2.0\nsteps = 3\n").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("theta_rad")), "{e}");
    }

    #[test]
    fn config_round_trip() {
        let mut c = ScenarioConfig::default();
        c.nodes.delta_theta_l_mrad = Some(1.0);
        c.protocol.profiles = vec![ProfileKind::Linear, ProfileKind::Quadratic];
        c.sweep = Some(SweepSpec { variable: SweepVariable::DP, start: 1e3, stop: 1e4, steps: 4, log: true });
        c.performance.snr_db = Some(12.5);
        c.irs.irsh_footprints_m = vec![[0.1, 0.0], [-0.1, 0.0]];
        let text = config_to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        save_config(&c, &p).unwrap();
        assert_eq!(load_config(&p).unwrap(), c);
        assert!(matches!(load_config(&dir.path().join("missing.toml")), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_values() {
        let s = SweepSpec::linear(SweepVariable::ThetaP1, 0.5, 1.0, 3);
        assert_eq!(s.values(), vec![0.5, 0.75, 1.0]);
        let s = SweepSpec { variable: SweepVariable::DP, start: 1e3, stop: 1e5, steps: 3, log: true };
        let v = s.values();
        assert!((v[1] - 1e4).abs() < 1e-9 && v[2] == 1e5);
        assert_eq!(SweepSpec::linear(SweepVariable::Rate, 2.0, 3.0, 1).values(), vec![2.0]);
    }

    #[test]
    fn noise_power_matches_reference() {
        // -114 dBm/MHz over 1 GHz is -84 dBm.
        let c = ScenarioConfig::default();
        assert!((c.noise_power() / 10f64.powf(-11.4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn misalignment_moves_the_footprint() {
        let mut c = ScenarioConfig::default();
        c.misalignment.r_e_m = 0.17;
        let a = c.assignment(ProtocolKind::Irsd, ProfileKind::Linear).unwrap();
        assert!((a.misalignment(0) - 0.17).abs() < 1e-15);
        assert_eq!(a.misalignment(1), 0.0);
        let t = Template::Outage.cases(&ScenarioConfig::default());
        assert_eq!(t.len(), 4);
        assert_eq!(Template::Interference.cases(&ScenarioConfig::default()).len(), 2);
    }

    #[test]
    fn regime_table_reference() {
        let mut c = ScenarioConfig::default();
        c.irs.total_x_m = 0.5;
        let rows = regimes_table(&c).unwrap();
        assert_eq!(rows.len(), 6);
        assert!((rows[0].d_f_m / 40.3e3 - 1.0).abs() < 0.01);
        assert_eq!(rows[0].regime, "intermediate");
    }

    #[test]
    fn td_sweep_rows_are_complete() {
        let mut c = ScenarioConfig::default();
        c.protocol.kinds = vec![ProtocolKind::Td];
        c.performance.trials = 2000;
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.status, "ok", "{r:?}");
            assert_eq!(r.gamma_interference, Some(0.0));
            assert!(r.h_irs.unwrap() > 0.0 && r.h_irs.unwrap() < 1.0);
            assert!(r.ber_quad.is_some() && r.outage_mc.is_some());
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, "sweep", &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# irs-fso sweep v1\nvariable,value,protocol"));
        assert_eq!(text.lines().count(), 4);
    }
}
