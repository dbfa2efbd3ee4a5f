//! Randomized audits of Young's inequality, the implicit bound `M₀` and
//! fitted Trudinger–Moser / Biler constants on two grids.
//!
//! cargo run --example inequality_audit [-- SEED]

use ksf::grid::Grid2D;
use ksf::inequalities::{self, FieldSampler};

fn main() -> ksf::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    println!("{}", inequalities::young_audit(20_000, seed)?.summary());
    println!("{}", inequalities::malpha_audit(2_000, seed)?.summary());

    let (lhs, rhs) = inequalities::young_bound(2.0, 3.0, 0.5, 3.0)?;
    println!("young at a=2 b=3 eps=1/2 p=3: {lhs:.6} <= {rhs:.6}");
    let m0 = inequalities::malpha_bound(0.3, 0.4, 0.5)?;
    println!("M0(c1=0.3, c2=0.4, beta=1/2) = {m0:.6}");

    let sampler = FieldSampler::new(seed, 8.0);
    for n in [64, 128] {
        let g = Grid2D::unit_square(n)?;
        println!("{}", inequalities::trudinger_moser_check(&sampler, g, 100)?.summary());
        println!("{}", inequalities::biler_check(&sampler, g, 3.0, 0.1, 100)?.summary());
    }
    Ok(())
}
