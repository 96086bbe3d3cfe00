//! Randomized invariants across the public API.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use irs_fso::beam::{incident_frame, regime_distances, BeamParams, RegimePolicy};
use irs_fso::channel::prepare_link;
use irs_fso::geometry::{irs_to_ls_frame, lens_to_irs_frame, rot_y, rot_z, Mat3, OrientedNode, Vec3};
use irs_fso::irs::{build_layout, make_profile, passivity_factor, tile_coefficients, tile_field, LinkGeometry, ProfileKind, Tile};
use irs_fso::performance::{
    average_ber_quad, instantaneous_ber, outage_noise_limited, outage_quad, FadingParams, PerfInputs,
};
use irs_fso::protocol::{build_assignment, Ownership, PairNodes, ProtocolKind};
use irs_fso::scenario::{config_to_string, parse_config, ScenarioConfig, SweepSpec, SweepVariable};
use irs_fso::special::{cerf, gamma_gamma_pdf};
use num_complex::Complex64;
use proptest::prelude::*;

fn beam() -> BeamParams {
    BeamParams::new(1550e-9, 0.25e-3, 60e3).unwrap()
}

fn link(theta_l: f64, theta_p: f64, d_p: f64) -> LinkGeometry {
    LinkGeometry {
        ls: OrientedNode::new(1e3, theta_l, 0.0).unwrap(),
        pd: OrientedNode::new(d_p, theta_p, PI).unwrap(),
        lens_radius: 0.15,
        r_l0: Vec3::zeros(),
        r_p0: Vec3::zeros(),
    }
}

fn tile(l: &LinkGeometry, kind: ProfileKind, side: f64) -> Tile {
    let f = incident_frame(&beam(), &l.ls, &l.r_l0).unwrap();
    Tile {
        center: Vec3::zeros(),
        l_x: side,
        l_y: side,
        profile: make_profile(kind, &f, &l.pd, Vec3::zeros()),
        zeta0: 1.0,
        zeta_bar: passivity_factor(l.pd.theta),
        owner: Some(0),
    }
}

fn orthonormal(m: &Mat3) -> bool {
    (m.transpose() * m - Mat3::identity()).norm() < 1e-12 && (m.determinant() - 1.0).abs() < 1e-12
}

fn gg() -> impl Strategy<Value = FadingParams> {
    (0.6f64..6.0, 0.6f64..6.0).prop_map(|(a, b)| FadingParams::new(a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_are_proper_orthonormal(a in -7.0f64..7.0, b in -7.0f64..7.0) {
        prop_assert!(orthonormal(&rot_y(a)));
        prop_assert!(orthonormal(&rot_z(b)));
        prop_assert!(orthonormal(&(rot_z(b) * rot_y(a))));
    }

    #[test]
    fn frame_maps_preserve_distances(
        theta in 0.1f64..3.0, phi in -PI..PI, d in 10.0f64..1e4,
        p in prop::array::uniform3(-5.0f64..5.0), q in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let node = OrientedNode::new(d, theta, phi).unwrap();
        let (p, q) = (Vec3::from(p), Vec3::from(q));
        let off = Vec3::new(0.3, -0.2, 0.0);
        let a = irs_to_ls_frame(&p, &node, &off) - irs_to_ls_frame(&q, &node, &off);
        let b = lens_to_irs_frame(&p, &node, &off) - lens_to_irs_frame(&q, &node, &off);
        prop_assert!((a.norm() - (p - q).norm()).abs() < 1e-9);
        prop_assert!((b.norm() - (p - q).norm()).abs() < 1e-9);
    }

    #[test]
    fn complex_erf_agrees_with_real_erf(x in -6.0f64..6.0) {
        let w = cerf(Complex64::new(x, 0.0)).unwrap();
        prop_assert!((w.re - libm::erf(x)).abs() < 1e-13);
        prop_assert!(w.im.abs() < 1e-13);
    }

    #[test]
    fn complex_erf_is_odd_and_conjugate_symmetric(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let z = Complex64::new(x, y);
        let e = cerf(z).unwrap();
        let scale = e.norm().max(1.0);
        prop_assert!((cerf(-z).unwrap() + e).norm() < 1e-12 * scale);
        prop_assert!((cerf(z.conj()).unwrap() - e.conj()).norm() < 1e-12 * scale);
    }

    #[test]
    fn gamma_gamma_pdf_is_symmetric_in_its_parameters(h in 0.01f64..5.0, a in 0.6f64..8.0, b in 0.6f64..8.0) {
        let p = gamma_gamma_pdf(h, a, b).unwrap();
        let q = gamma_gamma_pdf(h, b, a).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert!((p - q).abs() <= 1e-10 * p.max(1e-300));
    }

    #[test]
    fn footprint_stretches_along_incidence(theta in 0.05f64..3.09, d in 100.0f64..1e4) {
        let b = beam();
        let f = incident_frame(&b, &OrientedNode::new(d, theta, 0.0).unwrap(), &Vec3::zeros()).unwrap();
        let s = theta.sin().abs();
        prop_assert!((f.zeta_in * f.zeta_in - s).abs() < 1e-12);
        prop_assert!((f.w_x * s / f.w_y - 1.0).abs() < 1e-12);
        prop_assert!((f.r_x * s * s / f.r_y - 1.0).abs() < 1e-12);
        prop_assert!(f.w_x >= f.w_y);
    }

    #[test]
    fn fraunhofer_distance_exceeds_fresnel_distance(x_e in 1e-3f64..5.0, y_e in 1e-3f64..5.0) {
        let r = regime_distances(x_e, y_e, 1550e-9).unwrap();
        prop_assert!(r.d_n < r.d_f);
    }

    #[test]
    fn recentering_keeps_the_profile(
        theta_l in 0.4f64..1.4, theta_p in 0.4f64..1.4, qp in any::<bool>(),
        c in prop::array::uniform2(-1.0f64..1.0), r in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let l = link(theta_l, theta_p, 3e3);
        let t = tile(&l, if qp { ProfileKind::Quadratic } else { ProfileKind::Linear }, 0.5);
        let moved = t.profile.recentered(Vec3::new(c[0], c[1], 0.0));
        let (a, b) = (t.profile.eval(r[0], r[1]), moved.eval(r[0], r[1]));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn ber_stays_within_bounds(g in prop::collection::vec(0.0f64..1e4, 2..4), h in prop::collection::vec(0.0f64..4.0, 3)) {
        let n = g.len();
        let perf = PerfInputs::new(g, 0, vec![FadingParams::new(2.0, 2.0).unwrap(); n]).unwrap();
        let p = instantaneous_ber(&h[..n], &perf);
        prop_assert!((0.0..=0.5 + 1e-15).contains(&p));
    }

    #[test]
    fn ber_falls_with_the_desired_signal(g in 1e-2f64..1e3, i in 0.0f64..10.0, h in prop::array::uniform2(0.1f64..3.0)) {
        let f = vec![FadingParams::new(2.0, 2.0).unwrap(); 2];
        let lo = PerfInputs::new(vec![g, i], 0, f.clone()).unwrap();
        let hi = PerfInputs::new(vec![2.0 * g, i], 0, f).unwrap();
        prop_assert!(instantaneous_ber(&h, &hi) <= instantaneous_ber(&h, &lo) + 1e-15);
    }

    #[test]
    fn config_round_trips(
        wl in 800.0f64..2000.0, r in 0.01f64..1.0, theta in 0.2f64..1.5, snr in prop::option::of(0.0f64..90.0),
        seed in any::<u64>(), steps in 1usize..20,
    ) {
        let mut c = ScenarioConfig::default();
        c.beam.wavelength_nm = wl;
        c.nodes.lens_radius_m = r;
        c.nodes.pd[0].theta_rad = theta;
        c.performance.snr_db = snr;
        c.performance.seed = seed;
        c.sweep = Some(SweepSpec::linear(SweepVariable::Rate, 0.5, 2.0, steps));
        prop_assert_eq!(parse_config(&config_to_string(&c).unwrap()).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn average_ber_falls_with_snr(g in 1.0f64..1e4, ratio in 0.0f64..0.5, p in gg()) {
        let f = vec![p; 2];
        let lo = average_ber_quad(&PerfInputs::new(vec![g, ratio * g], 0, f.clone()).unwrap()).unwrap();
        let hi = average_ber_quad(&PerfInputs::new(vec![4.0 * g, ratio * g], 0, f).unwrap()).unwrap();
        prop_assert!(hi <= lo * (1.0 + 1e-9));
    }

    #[test]
    fn outage_is_monotone(g in 10.0f64..1e5, i in 0.0f64..50.0, thr in 1.0f64..100.0, p in gg()) {
        let f = vec![p; 2];
        let base = outage_quad(&PerfInputs::new(vec![g, i], 0, f.clone()).unwrap(), thr).unwrap();
        let higher_thr = outage_quad(&PerfInputs::new(vec![g, i], 0, f.clone()).unwrap(), 2.0 * thr).unwrap();
        let stronger = outage_quad(&PerfInputs::new(vec![2.0 * g, i], 0, f).unwrap(), thr).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(higher_thr >= base * (1.0 - 1e-9));
        prop_assert!(stronger <= base * (1.0 + 1e-9));
    }

    #[test]
    fn outage_without_interference_is_the_closed_form(g in 1.0f64..1e5, thr in 0.1f64..100.0, p in gg()) {
        let q = outage_quad(&PerfInputs::new(vec![g, 0.0], 0, vec![p; 2]).unwrap(), thr).unwrap();
        let c = outage_noise_limited(g, thr, p).unwrap();
        prop_assert!((q - c).abs() <= 1e-8);
    }

    #[test]
    fn tile_field_is_unchanged_by_recentering(
        theta_l in 0.6f64..1.2, theta_p in 0.6f64..1.2, qp in any::<bool>(),
        c in prop::array::uniform2(-0.5f64..0.5), r in prop::array::uniform2(-0.1f64..0.1),
    ) {
        let l = link(theta_l, theta_p, 3e3);
        let t = tile(&l, if qp { ProfileKind::Quadratic } else { ProfileKind::Linear }, 0.5);
        let moved = Tile { profile: t.profile.recentered(Vec3::new(c[0], c[1], 0.0)), ..t };
        let b = beam();
        let p = Vec3::new(r[0], r[1], 0.0);
        let a = tile_field(&p, &tile_coefficients(&l, &t, &b).unwrap()).unwrap();
        let m = tile_field(&p, &tile_coefficients(&l, &moved, &b).unwrap()).unwrap();
        // Rounding of X is amplified by k^2 in the Gaussian exponent.
        prop_assert!((a.norm() - m.norm()).abs() <= 1e-9 * a.norm());
        // The absolute phase carries k d_p ~ 1e10 rad, resolved to ~k d_p eps.
        prop_assert!((a - m).norm() <= 1e-5 * a.norm());
    }

    #[test]
    fn in_plane_links_are_mirror_symmetric(
        theta_l in 0.6f64..1.2, theta_p in 0.6f64..1.2, qp in any::<bool>(), r in prop::array::uniform2(-0.1f64..0.1),
    ) {
        let l = link(theta_l, theta_p, 3e3);
        let t = tile(&l, if qp { ProfileKind::Quadratic } else { ProfileKind::Linear }, 0.5);
        let co = tile_coefficients(&l, &t, &beam()).unwrap();
        let a = tile_field(&Vec3::new(r[0], r[1], 0.0), &co).unwrap().norm();
        let b = tile_field(&Vec3::new(r[0], -r[1], 0.0), &co).unwrap().norm();
        prop_assert!((a - b).abs() <= 1e-8 * a);
    }

    #[test]
    fn nearest_ownership_follows_relabeling(x0 in -0.45f64..-0.05, x1 in 0.05f64..0.45, y in -0.2f64..0.2) {
        let pair = |theta_p: f64, x: f64| {
            let foot = Vec3::new(x, y, 0.0);
            PairNodes {
                ls: OrientedNode::new(1e3, PI / 4.0, 0.0).unwrap(),
                pd: OrientedNode::new(3e3, theta_p, PI).unwrap(),
                beam: beam(),
                lens_radius: 0.15,
                footprint: foot,
                lens_center: foot,
            }
        };
        let p = vec![pair(PI / 3.0, x0), pair(PI / 6.0, x1)];
        let swapped = vec![p[1], p[0]];
        let layout = build_layout(1.0, 0.5, 8, 2, 0.0, 0.0).unwrap();
        let a = build_assignment(ProtocolKind::Irsh, &p, &layout, ProfileKind::Linear, Ownership::NearestFootprint, 1.0).unwrap();
        let b = build_assignment(ProtocolKind::Irsh, &swapped, &layout, ProfileKind::Linear, Ownership::NearestFootprint, 1.0).unwrap();
        let relabeled: Vec<usize> = b.owners(0).iter().map(|&o| 1 - o).collect();
        prop_assert_eq!(a.owners(0), relabeled);
    }
}

#[test]
fn focusing_profile_concentrates_power_at_the_lens_center() {
    // QP focuses the reflected beam; its peak over the lens sits at the center.
    let l = link(PI / 3.0, PI / 3.0, 3e3);
    let co = tile_coefficients(&l, &tile(&l, ProfileKind::Quadratic, 0.5), &beam()).unwrap();
    let center = tile_field(&Vec3::zeros(), &co).unwrap().norm();
    for i in -4..=4 {
        for j in -4..=4 {
            let p = Vec3::new(0.03 * i as f64, 0.03 * j as f64, 0.0);
            assert!(tile_field(&p, &co).unwrap().norm() <= center * (1.0 + 1e-9));
        }
    }
    // A one-tile prepared link is the same field.
    let prep = prepare_link(&l, &[co.tile], &beam(), &RegimePolicy::default()).unwrap();
    assert_relative_eq!(prep.field(0.0, 0.0).unwrap().norm(), center, max_relative = 1e-12);
}
