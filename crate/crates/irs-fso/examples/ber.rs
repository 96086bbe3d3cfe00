//! Average bit error rate against transmit SNR under Gamma-Gamma fading.

use irs_fso::irs::ProfileKind;
use irs_fso::performance::{average_ber_mc, average_ber_quad, PerfInputs};
use irs_fso::protocol::ProtocolKind;
use irs_fso::scenario::{evaluate, ScenarioConfig};

fn main() -> irs_fso::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.performance.snr_db = Some(0.0);
    let fading = cfg.fading()?;
    for kind in [ProtocolKind::Td, ProtocolKind::Irsh] {
        for profile in [ProfileKind::Linear, ProfileKind::Quadratic] {
            // Unit transmit SNR; scale to each grid point below.
            let ev = evaluate(&cfg, kind, profile)?;
            println!("{} {profile:?}", kind.label());
            for snr in [40.0, 50.0, 60.0, 70.0] {
                let s = 10f64.powf(snr / 10.0);
                let perf = PerfInputs::new(ev.gamma.iter().map(|row| s * row[0]).collect(), 0, fading.clone())?;
                let q = average_ber_quad(&perf)?;
                let m = average_ber_mc(&perf, 100_000, 1)?;
                println!("  {snr:>4} dB  quadrature {q:.4e}  Monte Carlo {:.4e} +- {:.1e}", m.mean, m.std_err);
            }
        }
    }
    Ok(())
}
