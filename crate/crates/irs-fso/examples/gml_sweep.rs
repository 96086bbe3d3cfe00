//! Geometric-and-misalignment loss of a single 0.5 m tile against receiver
//! distance, by lens quadrature, the square-lens closed form and the
//! far-field beam.

use irs_fso::scenario::{gml_sweep, ScenarioConfig, SweepSpec, SweepVariable};

fn main() -> irs_fso::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.irs.total_x_m = 0.5;
    cfg.sweep = Some(SweepSpec { variable: SweepVariable::DP, start: 2e3, stop: 2e4, steps: 4, log: true });
    let show = |v: Option<f64>| v.map_or("-".to_string(), |h| format!("{h:.4e}"));
    println!("{:>9} {:>12} {:>12} {:>12} {:>12}  regime", "d_p (m)", "quadrature", "square", "in-plane", "far field");
    for r in gml_sweep(&cfg, None)? {
        println!(
            "{:>9.0} {:>12} {:>12} {:>12} {:>12}  {}",
            r.d_p_m,
            show(r.h_quadrature),
            show(r.h_square),
            show(r.h_in_plane),
            show(r.h_far_field),
            r.regime
        );
    }
    Ok(())
}
