//! Signal and cross-talk power at receiver 1 when both sources share the IRS.

use irs_fso::irs::ProfileKind;
use irs_fso::protocol::ProtocolKind;
use irs_fso::scenario::{evaluate, ScenarioConfig};

fn main() -> irs_fso::Result<()> {
    for delta in [0.0, 1.0] {
        let mut cfg = ScenarioConfig::default();
        cfg.nodes.delta_theta_l_mrad = Some(delta);
        for kind in [ProtocolKind::Irsd, ProtocolKind::Irsh] {
            let ev = evaluate(&cfg, kind, ProfileKind::Linear)?;
            let (signal, cross) = (ev.gamma[0][0], ev.gamma[1][0]);
            println!(
                "{:>4}, source offset {delta} mrad: gamma_1 = {signal:.3e}, gamma_2 = {cross:.3e} ({:.1} dB)",
                kind.label(),
                10.0 * (cross / signal).log10()
            );
        }
    }
    Ok(())
}
