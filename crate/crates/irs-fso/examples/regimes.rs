//! Footprint widths and near/far-field distances for the reference system.

use irs_fso::scenario::{narrow_incidence_reference, regimes_table, ScenarioConfig};

fn main() -> irs_fso::Result<()> {
    let (d_f, d_n, w_x, w_y) = narrow_incidence_reference()?;
    println!("2.5 mm waist at pi/8: footprint {w_x:.3} x {w_y:.3} m, d_n = {d_n:.1} m, d_f = {:.1} km", d_f / 1e3);

    let cfg = ScenarioConfig::default();
    println!("{:>5} {:>4} {:>10} {:>10} {:>10} {:>10}  regime", "proto", "pair", "w_x (m)", "w_y (m)", "d_n (m)", "d_f (km)");
    for r in regimes_table(&cfg)? {
        println!("{:>5} {:>4} {:>10.3} {:>10.3} {:>10.1} {:>10.2}  {}", r.protocol, r.pair, r.w_x_m, r.w_y_m, r.d_n_m, r.d_f_m / 1e3, r.regime);
    }
    Ok(())
}
