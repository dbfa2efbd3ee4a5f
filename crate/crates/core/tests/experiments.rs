//! Library-level experiment behaviour on small grids.

use anyhow::Result;
use ksf::diagnostics::{bounds_ledger, first_energy_increase};
use ksf::harness::config::parse_config_str;
use ksf::harness::experiments::{initial_state, mass_sweep, run_experiment};
use ksf::{grid, KsfError, RunStatus};

#[test]
fn minimal_config_applies_defaults() -> Result<()> {
    let c = parse_config_str("")?;
    assert_eq!((c.grid.nx(), c.grid.ny()), (128, 128));
    assert_eq!(c.solver.tau, 1.0);
    assert_eq!(c.sweep.mass_factors, vec![0.5, 0.9, 1.5, 3.0]);
    let s = initial_state(&c)?;
    assert!((grid::integrate(&s.u)? - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    Ok(())
}

#[test]
fn theta_window_is_enforced() {
    assert!(parse_config_str("kind = small-data\nsolver.theta = 3\nsmalldata.delta0 = 0.5").is_ok());
    match parse_config_str("kind = small-data\nsolver.theta = 6.5\nsmalldata.delta0 = 0.5") {
        Err(KsfError::Config { key, .. }) => assert_eq!(key, "solver.theta"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_separates_sub_and_supercritical_mass() -> Result<()> {
    let c = parse_config_str(
        "grid.n = 48\ninitial.u0.width = 0.05\nforcing.kind = zero\nsolver.t_end = 1\nsolver.dt_init = 1e-2\n\
         solver.snapshot_interval = 0.5\nsolver.blowup_threshold = 1e3\nsweep.mass_factors = 0.5, 3.0",
    )?;
    let rows = mass_sweep(&c)?;
    assert_eq!(rows[0].status, Some(RunStatus::Completed));
    assert_eq!(rows[0].energy_monotone, Some(true));
    assert!(rows[1].t_detect().is_some_and(|t| t < 1.0), "{:?}", rows[1]);
    Ok(())
}

#[test]
fn run_experiment_produces_consistent_ledger() -> Result<()> {
    let c = parse_config_str(
        "grid.n = 32\nsolver.t_end = 4\nsolver.dt_init = 1e-2\nsolver.snapshot_interval = 1\n\
         forcing.kind = constant\nforcing.value = 0.5\ninitial.u0.width = 0.15",
    )?;
    let out = run_experiment(&c)?;
    assert_eq!(out.trajectory.status, RunStatus::Completed);
    assert_eq!(out.ledger, bounds_ledger(&out.trajectory)?);
    assert_eq!(first_energy_increase(&out.trajectory.records, 1e-8), None);
    assert_eq!(out.trajectory.snapshots.len(), 5);
    Ok(())
}
