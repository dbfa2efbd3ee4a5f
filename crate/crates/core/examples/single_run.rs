//! One subcritical trajectory: diagnostics CSV, snapshots and the bounds ledger.
//!
//! cargo run --example single_run [-- OUTPUT_DIR]

use std::path::PathBuf;

use ksf::diagnostics::bounds_ledger;
use ksf::grid::{self, Grid2D, ScalarField};
use ksf::harness::output::write_trajectory;
use ksf::{ForcingSpec, RunStatus, Solver, SolverConfig, State};

fn main() -> ksf::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("ksf_single_run"), PathBuf::from);
    let g = Grid2D::unit_square(64)?;
    let bump = ScalarField::from_fn(g, |x, y| (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.02).exp());
    let mass = 0.9 * 4.0 * std::f64::consts::PI;
    let u0 = bump.scale(mass / grid::integrate(&bump)?);

    let cfg = SolverConfig {
        t_end: 20.0,
        dt_init: 1e-2,
        snapshot_interval: 2.0,
        ..Default::default()
    };
    let forcing = ForcingSpec::constant(ScalarField::constant(g, 0.5))?;
    let traj = Solver::new(cfg, forcing)?.run(State::new(u0, ScalarField::zeros(g), 0.0)?)?;

    let first = &traj.records[0];
    let last = traj.records.last().expect("records");
    println!("status {:?} after {} steps", traj.status, traj.dt_history.len());
    assert_eq!(traj.status, RunStatus::Completed);
    println!("mass   {:.15} -> {:.15}", first.mass_u, last.mass_u);
    println!("|v|_1  {:.6} (exact {:.6})", last.v_l1, last.v_l1_exact);
    println!("W      {:.6} -> {:.6}", first.energy_w, last.energy_w);
    println!("|u|_oo {:.4} -> {:.4}", first.u_linf, last.u_linf);
    for e in &bounds_ledger(&traj)?.entries {
        println!("  {e}");
    }
    write_trajectory(&out, &traj)?;
    println!("wrote {}", out.display());
    Ok(())
}
