//! Step-by-step energy bookkeeping: `W`, the dissipation `D`, the discrete
//! identity `dW/dt + D ≈ 0` and the closed-form `‖v‖₁` law.
//!
//! cargo run --example energy_diagnostics

use ksf::diagnostics::{self, Recorder};
use ksf::grid::{self, Grid2D, ScalarField};
use ksf::{ForcingSpec, Solver, SolverConfig, State};

fn main() -> ksf::Result<()> {
    let g = Grid2D::new(64, 64, 1.0, 1.0)?;
    let bump = ScalarField::from_fn(g, |x, y| (-((x - 0.4).powi(2) + (y - 0.6).powi(2)) / 0.03).exp());
    let u0 = bump.scale(6.0 / grid::integrate(&bump)?);
    let f = ScalarField::from_fn(g, |x, _| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
    let forcing = ForcingSpec::constant(f.clone())?;
    let cfg = SolverConfig::default();
    let solver = Solver::new(cfg.clone(), forcing.clone())?;

    let mut state = State::new(u0, ScalarField::zeros(g), 0.0)?;
    let mut rec = Recorder::new(&state, &forcing, cfg.tau, cfg.theta)?;
    let r0 = rec.initial_record(&state)?;
    println!("W(0) = {:.6}  (direct: {:.6})", r0.energy_w, diagnostics::energy_w(&state.u, &state.v, &f)?);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "t", "W", "D", "dW/dt+D", "v_l1 err");
    for k in 1..=200 {
        let dt = solver.adaptive_dt(&state).dt;
        let next = solver.step(&state, dt)?;
        let r = rec.record(&next, &state, dt)?;
        if k % 40 == 0 {
            println!(
                "{:>6.3} {:>12.6} {:>12.6} {:>12.3e} {:>12.3e}",
                r.t,
                r.energy_w,
                r.dissipation,
                r.energy_residual,
                (r.v_l1 - r.v_l1_exact).abs() / r.v_l1_exact
            );
        }
        state = next;
    }
    Ok(())
}
