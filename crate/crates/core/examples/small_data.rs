//! Small-data decay: data scaled to size ε, fitted constants at ε and ε/2.
//!
//! cargo run --example small_data

use ksf::harness::config::parse_config_str;
use ksf::harness::experiments::small_data_experiment;

const CONFIG: &str = "
kind = small-data
grid.n = 64
initial.u0.center = 0.3, 0.6
initial.u0.width = 0.15
initial.v0.profile = mode
initial.v0.mode = 1, 2
forcing.kind = time-dependent
forcing.profile = gaussian
forcing.width = 0.2
forcing.modulation = sinusoidal
forcing.modulation_amplitude = 0.5
forcing.period = 2
solver.t_end = 10
solver.dt_init = 1e-2
solver.snapshot_interval = 0.5
smalldata.epsilon = 1e-3
";

fn main() -> ksf::Result<()> {
    let report = small_data_experiment(&parse_config_str(CONFIG)?)?;
    print!("{}", report.summary_csv());
    println!("C_u(eps)/C_u(eps/2) = {:.4}", report.c_u_ratio().unwrap_or(f64::NAN));
    println!("passed: {}", report.passed());
    Ok(())
}
