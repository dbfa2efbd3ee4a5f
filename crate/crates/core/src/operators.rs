//! Discrete spatial operators: the Neumann Laplacian and the conservative
//! chemotactic transport term `∇·(u∇v)`.

use crate::error::{KsfError, Result};
use crate::grid::{Grid2D, ScalarField};

/// Face-centered fluxes.
///
/// `fx` holds the x-faces: face `i` of row `j` (between cells `i - 1` and `i`)
/// lives at `j * (nx + 1) + i`. `fy` holds the y-faces: face `j` of column `i`
/// lives at `j * nx + i`. Faces on `∂Ω` carry zero flux.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPair {
    grid: Grid2D,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl FluxPair {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            fx: vec![0.0; (grid.nx() + 1) * grid.ny()],
            fy: vec![0.0; grid.nx() * (grid.ny() + 1)],
        }
    }

    /// Builds a flux pair, rejecting wrong lengths or nonzero boundary fluxes.
    pub fn new(grid: Grid2D, fx: Vec<f64>, fy: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        if fx.len() != (nx + 1) * ny || fy.len() != nx * (ny + 1) {
            return Err(KsfError::Shape(format!(
                "flux lengths {}/{} do not match a {nx}x{ny} grid",
                fx.len(),
                fy.len()
            )));
        }
        let pair = Self { grid, fx, fy };
        if pair.max_boundary_flux() != 0.0 {
            return Err(KsfError::Shape("boundary faces must carry zero flux".into()));
        }
        Ok(pair)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn fx(&self) -> &[f64] {
        &self.fx
    }

    pub fn fy(&self) -> &[f64] {
        &self.fy
    }

    fn max_boundary_flux(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut m: f64 = 0.0;
        for j in 0..ny {
            m = m.max(self.fx[j * (nx + 1)].abs());
            m = m.max(self.fx[j * (nx + 1) + nx].abs());
        }
        for i in 0..nx {
            m = m.max(self.fy[i].abs());
            m = m.max(self.fy[ny * nx + i].abs());
        }
        m
    }
}

/// Five-point Laplacian with reflected ghost cells (zero normal derivative).
pub fn laplacian_neumann(field: &ScalarField) -> Result<ScalarField> {
    field.check_finite("laplacian_neumann")?;
    let g = *field.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (idx2, idy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let v = field.values();
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.index(i, j);
            let c = v[k];
            let mut acc = 0.0;
            if i + 1 < nx {
                acc += (v[k + 1] - c) * idx2;
            }
            if i > 0 {
                acc += (v[k - 1] - c) * idx2;
            }
            if j + 1 < ny {
                acc += (v[k + nx] - c) * idy2;
            }
            if j > 0 {
                acc += (v[k - nx] - c) * idy2;
            }
            out[k] = acc;
        }
    }
    ScalarField::from_values(g, out)
}

/// Face flux `u_face * ∂v/∂n`, with `u_face` taken from the upstream cell.
pub fn chemotactic_flux(u: &ScalarField, v: &ScalarField) -> Result<FluxPair> {
    u.check_same_grid(v)?;
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (dx, dy) = (g.dx(), g.dy());
    let (uv, vv) = (u.values(), v.values());
    let mut flux = FluxPair::zeros(g);

    for j in 0..ny {
        let row = j * nx;
        for i in 1..nx {
            let (l, r) = (row + i - 1, row + i);
            let grad = (vv[r] - vv[l]) / dx;
            let up = if grad > 0.0 { uv[l] } else { uv[r] };
            flux.fx[j * (nx + 1) + i] = up * grad;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let (s, n) = ((j - 1) * nx + i, j * nx + i);
            let grad = (vv[n] - vv[s]) / dy;
            let up = if grad > 0.0 { uv[s] } else { uv[n] };
            flux.fy[j * nx + i] = up * grad;
        }
    }
    Ok(flux)
}

/// Conservative divergence of face fluxes.
pub fn flux_divergence(flux: &FluxPair) -> ScalarField {
    let g = flux.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let (idx, idy) = (1.0 / g.dx(), 1.0 / g.dy());
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let xe = flux.fx[j * (nx + 1) + i + 1];
            let xw = flux.fx[j * (nx + 1) + i];
            let yn = flux.fy[(j + 1) * nx + i];
            let ys = flux.fy[j * nx + i];
            out[g.index(i, j)] = (xe - xw) * idx + (yn - ys) * idy;
        }
    }
    ScalarField::from_values(g, out).expect("grid-sized buffer")
}

/// Largest face-normal `|∂v/∂n|` over interior faces.
pub fn max_face_gradient(v: &ScalarField) -> f64 {
    let g = v.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (dx, dy) = (g.dx(), g.dy());
    let vv = v.values();
    let mut m: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                m = m.max(((vv[k + 1] - vv[k]) / dx).abs());
            }
            if j + 1 < ny {
                m = m.max(((vv[k + nx] - vv[k]) / dy).abs());
            }
        }
    }
    m
}
