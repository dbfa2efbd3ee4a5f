//! Neumann heat semigroup in the cosine basis: exact evolution, mass
//! conservation and `e^{-λ₁t}` decay of zero-mean data.
//!
//! cargo run --example heat_semigroup

use std::f64::consts::PI;

use ksf::grid::{self, Grid2D, ScalarField};
use ksf::semigroup::{self, SemigroupParams};
use ksf::CosineBasis;

fn main() -> ksf::Result<()> {
    let g = Grid2D::new(64, 48, PI, PI)?;
    let basis = CosineBasis::new(g);
    println!("lambda1 on [0,pi]^2 at 64x48: {:.6} (continuum 1)", basis.lambda1());

    // cos(x)cos(2y) is an exact eigenfunction of the discrete operator.
    let mode = ScalarField::from_fn(g, |x, y| x.cos() * (2.0 * y).cos());
    let mu = basis.eigenvalue(1, 2);
    let bump = ScalarField::from_fn(g, |x, y| (-((x - 1.0).powi(2) + (y - 2.0).powi(2)) * 4.0).exp());
    let zero_mean = bump.map(|x| x - bump.mean());
    let m0 = grid::integrate(&bump)?;
    let z0 = grid::lp_norm(&zero_mean, 2.0)?;

    println!("{:>6} {:>14} {:>14} {:>14}", "t", "mode/e^-mu t", "mass drift", "L2 decay rate");
    for t in [0.01, 0.1, 0.5, 1.0, 2.0] {
        let amp = basis.heat(&mode, t)?.values()[g.index(0, 0)] / mode.values()[g.index(0, 0)];
        let drift = grid::integrate(&basis.heat(&bump, t)?)? - m0;
        let rate = -(grid::lp_norm(&basis.heat(&zero_mean, t)?, 2.0)? / z0).ln() / t;
        println!("{t:>6} {:>14.10} {drift:>14.3e} {rate:>14.6}", amp / (-mu * t).exp());
    }

    let e = (-1.0f64).exp();
    let kernel = semigroup::singular_kernel_integral(0.0, 0.0, 2.0, 1.0, 1.0)?;
    println!("kernel integral at alpha=beta=0, t=1: {kernel:.12} (closed form {:.12})", e - e * e);
    let p = SemigroupParams::new(0.5, 0.25, 2.0, 1.0)?;
    let c = semigroup::convolution_bound_check(&p, &[0.1, 1.0, 10.0, 50.0])?;
    println!("empirical convolution constant at alpha=1/2, beta=1/4: {c:.4}");
    Ok(())
}
