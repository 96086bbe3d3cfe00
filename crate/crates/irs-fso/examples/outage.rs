//! Outage against required rate, with and without a misaligned footprint.

use irs_fso::irs::ProfileKind;
use irs_fso::performance::{capacity_lower_bound, gamma_threshold, outage_quad};
use irs_fso::protocol::ProtocolKind;
use irs_fso::scenario::{evaluate, ScenarioConfig};

fn main() -> irs_fso::Result<()> {
    let base = ScenarioConfig::default();
    let fading = base.fading()?;
    let w = base.bandwidth_hz();
    for kind in [ProtocolKind::Irsd, ProtocolKind::Irsh] {
        for r_e in [0.0, 0.17] {
            let mut cfg = base.clone();
            cfg.misalignment.r_e_m = r_e;
            let ev = evaluate(&cfg, kind, ProfileKind::Linear)?;
            let perf = ev.perf_inputs(0, &fading)?;
            let c = capacity_lower_bound(ev.gamma[0][0] / (ev.gamma[1][0] + 1.0), w);
            print!("{:>4} r_e = {r_e:.2} m, capacity bound {:.2} Gbit/s, outage:", kind.label(), c / 1e9);
            for rate in [0.5, 1.0, 1.7, 2.5] {
                print!("  {rate} -> {:.3e}", outage_quad(&perf, gamma_threshold(rate * 1e9 * ev.slots as f64, w))?);
            }
            println!();
        }
    }
    Ok(())
}
