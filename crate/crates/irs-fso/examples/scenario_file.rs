//! Writes a scenario file, reads it back and runs the fast validation suites.

use irs_fso::scenario::{load_config, save_config, validate, ScenarioConfig, Suite, SweepSpec, SweepVariable};

fn main() -> irs_fso::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.performance.trials = 10_000;
    cfg.sweep = Some(SweepSpec::linear(SweepVariable::ThetaP1, 0.6, 1.4, 5));
    let path = std::env::temp_dir().join("irs-fso-scenario.toml");
    save_config(&cfg, &path)?;
    let back = load_config(&path)?;
    assert_eq!(back, cfg);
    println!("wrote {}", path.display());

    for suite in [Suite::Regimes, Suite::Perf] {
        let report = validate(&back, suite);
        for c in &report.checks {
            println!("{} {}: {:.6e} (expected {:.6e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.actual, c.expected);
        }
    }
    Ok(())
}
