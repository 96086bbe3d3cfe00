//! Sharing one IRS between several source-receiver pairs.
//!
//! * TD: one pair per time slot, the whole surface configured for it.
//! * IRSD: the surface is cut into one tile per pair, each beam aimed at its
//!   own tile.
//! * IRSH: many small tiles, spread among the pairs, all beams aimed at the
//!   same region so every pair sees a homogenized share of the surface.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{incident_frame, BeamParams, Regime, RegimePolicy};
use crate::channel::{gml_in_plane_prepared, gml_out_of_plane_with, lens_power_converged, prepare_link, LensGrid, GML_Y_TOL};
use crate::error::{Error, Result};
use crate::geometry::{OrientedNode, Vec3};
use crate::irs::{make_profile, passivity_factor, IrsLayout, ProfileKind, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Td,
    Irsd,
    Irsh,
}

impl ProtocolKind {
    pub fn label(&self) -> &'static str {
        match self {
            ProtocolKind::Td => "td",
            ProtocolKind::Irsd => "irsd",
            ProtocolKind::Irsh => "irsh",
        }
    }
}

/// How IRSH hands out its tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ownership {
    /// Checkerboard: tile (i, j) goes to pair (i + j) mod N.
    Interleaved,
    /// Each tile goes to the pair with the nearest nominal footprint, ties to
    /// the lower index.
    NearestFootprint,
}

/// One source-receiver pair before the protocol places it on the IRS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNodes {
    pub ls: OrientedNode,
    pub pd: OrientedNode,
    pub beam: BeamParams,
    pub lens_radius: f64,
    /// Requested footprint and lens center. TD and IRSD override both.
    pub footprint: Vec3,
    pub lens_center: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolAssignment {
    pub kind: ProtocolKind,
    pub pairs: Vec<PairNodes>,
    /// Pairs transmitting in each slot.
    pub active: Vec<Vec<usize>>,
    /// Tiles as configured in each slot.
    pub slot_tiles: Vec<Vec<Tile>>,
    /// Where each beam actually lands; differs from nominal under misalignment.
    pub footprints: Vec<Vec3>,
    pub nominal_footprints: Vec<Vec3>,
    pub lens_centers: Vec<Vec3>,
}

impl ProtocolAssignment {
    pub fn slots(&self) -> usize {
        self.active.len()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Slot in which `pair` transmits.
    pub fn slot_of(&self, pair: usize) -> usize {
        self.active.iter().position(|a| a.contains(&pair)).expect("every pair has a slot")
    }

    /// Owner of every tile in a slot.
    pub fn owners(&self, slot: usize) -> Vec<usize> {
        self.slot_tiles[slot].iter().map(|t| t.owner.expect("assigned tiles have owners")).collect()
    }

    /// Path from source `m` to receiver `n` with the current footprint.
    pub fn link(&self, m: usize, n: usize) -> crate::irs::LinkGeometry {
        crate::irs::LinkGeometry {
            ls: self.pairs[m].ls,
            pd: self.pairs[n].pd,
            lens_radius: self.pairs[n].lens_radius,
            r_l0: self.footprints[m],
            r_p0: self.lens_centers[n],
        }
    }

    /// Misalignment |r_l0 - r_p0| of pair m.
    pub fn misalignment(&self, m: usize) -> f64 {
        (self.footprints[m] - self.lens_centers[m]).norm()
    }
}

fn tile_for(pair: &PairNodes, owner: usize, center: Vec3, l_x: f64, l_y: f64, footprint: Vec3, profile: ProfileKind, zeta0: f64) -> Result<Tile> {
    let frame = incident_frame(&pair.beam, &pair.ls, &footprint)?;
    Ok(Tile {
        center,
        l_x,
        l_y,
        profile: make_profile(profile, &frame, &pair.pd, footprint),
        zeta0,
        zeta_bar: passivity_factor(pair.pd.theta),
        owner: Some(owner),
    })
}

pub fn build_assignment(
    kind: ProtocolKind,
    pairs: &[PairNodes],
    layout: &IrsLayout,
    profile: ProfileKind,
    ownership: Ownership,
    zeta0: f64,
) -> Result<ProtocolAssignment> {
    let n = pairs.len();
    if n == 0 {
        return Err(Error::InvalidGeometry("at least one source-receiver pair is needed".into()));
    }
    if !(zeta0 > 0.0 && zeta0 <= 1.0) {
        return Err(Error::InvalidGeometry(format!("tile efficiency must lie in (0, 1], got {zeta0}")));
    }
    let q = layout.len();
    let mismatch = |need: &str| Error::InvalidGeometry(format!("{} needs {need} tiles, layout has {q}", kind.label()));
    match kind {
        ProtocolKind::Td => {
            if q != 1 {
                return Err(mismatch("exactly 1"));
            }
            let origin = Vec3::zeros();
            let tiles = pairs
                .iter()
                .enumerate()
                .map(|(m, p)| Ok(vec![tile_for(p, m, layout.centers[0], layout.l_x, layout.l_y, origin, profile, zeta0)?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProtocolAssignment {
                kind,
                pairs: pairs.to_vec(),
                active: (0..n).map(|m| vec![m]).collect(),
                slot_tiles: tiles,
                footprints: vec![origin; n],
                nominal_footprints: vec![origin; n],
                lens_centers: vec![origin; n],
            })
        }
        ProtocolKind::Irsd => {
            if q != n {
                return Err(mismatch(&format!("N = {n}")));
            }
            let centers = layout.centers.clone();
            let tiles = pairs
                .iter()
                .enumerate()
                .map(|(m, p)| tile_for(p, m, centers[m], layout.l_x, layout.l_y, centers[m], profile, zeta0))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProtocolAssignment {
                kind,
                pairs: pairs.to_vec(),
                active: vec![(0..n).collect()],
                slot_tiles: vec![tiles],
                footprints: centers.clone(),
                nominal_footprints: centers.clone(),
                lens_centers: centers,
            })
        }
        ProtocolKind::Irsh => {
            if q < 4 * n {
                return Err(mismatch(&format!("at least 4N = {}", 4 * n)));
            }
            let foot: Vec<Vec3> = pairs.iter().map(|p| p.footprint).collect();
            let tiles = (0..q)
                .map(|t| {
                    let c = layout.centers[t];
                    let owner = match ownership {
                        Ownership::Interleaved => {
                            let (i, j) = layout.grid_index(t);
                            (i + j) % n
                        }
                        Ownership::NearestFootprint => nearest(&foot, &c),
                    };
                    tile_for(&pairs[owner], owner, c, layout.l_x, layout.l_y, foot[owner], profile, zeta0)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProtocolAssignment {
                kind,
                pairs: pairs.to_vec(),
                active: vec![(0..n).collect()],
                slot_tiles: vec![tiles],
                footprints: foot.clone(),
                nominal_footprints: foot,
                lens_centers: pairs.iter().map(|p| p.lens_center).collect(),
            })
        }
    }
}

fn nearest(points: &[Vec3], c: &Vec3) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        // Strict comparison keeps ties on the lower index.
        if (p - c).norm_squared() < (points[best] - c).norm_squared() {
            best = i;
        }
    }
    best
}

/// Shifts where the beam of `pair` lands, leaving every tile as configured.
pub fn apply_misalignment(assign: &ProtocolAssignment, pair: usize, offset: Vec3) -> Result<ProtocolAssignment> {
    if pair >= assign.len() {
        return Err(Error::InvalidGeometry(format!("no pair {pair} among {}", assign.len())));
    }
    if offset.z != 0.0 {
        return Err(Error::InvalidGeometry("misalignment offsets lie in the IRS plane (z = 0)".into()));
    }
    let mut out = assign.clone();
    out.footprints[pair] += offset;
    Ok(out)
}

/// Route used to turn tile fields into a GML.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmlMethod {
    /// Circular-lens quadrature, refined to convergence.
    LensQuadrature,
    /// Square-lens form with one numerical integral.
    SquareLens,
    /// Square-lens closed form for in-plane receivers.
    InPlane,
}

/// GML between every source and every receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct GmlMatrix {
    /// h[m][n]: power from source m collected by receiver n. Zero when the two
    /// pairs never transmit in the same slot.
    pub h: Vec<Vec<f64>>,
    pub regime: Vec<Vec<Option<Regime>>>,
    pub warnings: Vec<String>,
}

pub fn gml_matrix(assign: &ProtocolAssignment, method: GmlMethod, policy: &RegimePolicy) -> Result<GmlMatrix> {
    let n = assign.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|m| (0..n).map(move |k| (m, k))).collect();
    let results = cells
        .par_iter()
        .map(|&(m, k)| {
            let slot = assign.slot_of(m);
            if assign.slot_of(k) != slot {
                return Ok((0.0, None, Vec::new()));
            }
            let link = assign.link(m, k);
            let prep = prepare_link(&link, &assign.slot_tiles[slot], &assign.pairs[m].beam, policy)?;
            let h = match method {
                GmlMethod::LensQuadrature => lens_power_converged(&prep, LensGrid::start_for_link(&prep))?,
                GmlMethod::SquareLens => gml_out_of_plane_with(&prep, GML_Y_TOL)?,
                GmlMethod::InPlane => gml_in_plane_prepared(&prep)?,
            };
            Ok((h, Some(prep.regime), prep.warnings))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = GmlMatrix { h: vec![vec![0.0; n]; n], regime: vec![vec![None; n]; n], warnings: Vec::new() };
    for (&(m, k), (h, r, w)) in cells.iter().zip(results) {
        out.h[m][k] = h;
        out.regime[m][k] = r;
        for x in w {
            if !out.warnings.contains(&x) {
                out.warnings.push(x);
            }
        }
    }
    Ok(out)
}
