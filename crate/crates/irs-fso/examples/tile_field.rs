//! Closed-form field of one tile on the receiver lens, against direct
//! quadrature of the diffraction integral.

use irs_fso::channel::OracleMode;
use irs_fso::irs::ProfileKind;
use irs_fso::protocol::ProtocolKind;
use irs_fso::scenario::{field_map, ScenarioConfig};

fn main() -> irs_fso::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.irs.total_x_m = 0.5;
    for profile in [ProfileKind::Linear, ProfileKind::Quadratic] {
        let rows = field_map(&cfg, ProtocolKind::Td, profile, 5, Some(OracleMode::Separable1d))?;
        let worst = rows.iter().filter_map(|r| r.oracle_rel_diff).fold(0.0, f64::max);
        let peak = rows.iter().map(|r| r.intensity).fold(0.0, f64::max);
        println!("{profile:?}: peak intensity {peak:.3e} W/m^2, worst relative difference to the oracle {worst:.1e}");
        for r in rows.iter().filter(|r| r.y_m == 0.0) {
            println!("  x = {:+.3} m  |E|^2/2eta = {:.4e}", r.x_m, r.intensity);
        }
    }
    Ok(())
}
