//! Critical-mass sweep: Gaussian data below and above `4π`, run in parallel.
//!
//! cargo run --example mass_sweep

use ksf::harness::config::parse_config_str;
use ksf::harness::experiments::{mass_sweep, sweep_csv};

const CONFIG: &str = "
grid.n = 64
initial.u0.width = 0.05
forcing.kind = zero
solver.t_end = 2
solver.dt_init = 1e-2
solver.snapshot_interval = 0.5
solver.blowup_threshold = 2e3
sweep.mass_factors = 0.5, 0.9, 1.5, 3.0
";

fn main() -> ksf::Result<()> {
    let rows = mass_sweep(&parse_config_str(CONFIG)?)?;
    print!("{}", sweep_csv(&rows));
    for r in &rows {
        match r.t_detect() {
            Some(t) => println!("m = {:.2}·4π: blow-up detected at t = {t:.4}", r.mass_factor),
            None => println!("m = {:.2}·4π: bounded up to t_end, W(T) = {:.4}", r.mass_factor, r.final_energy.unwrap_or(f64::NAN)),
        }
    }
    Ok(())
}
