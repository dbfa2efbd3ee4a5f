//! Uniform cell-centered meshes on rectangles and the scalar fields living on them.
//!
//! Cell `(i, j)` has its center at `((i + 1/2) dx, (j + 1/2) dy)` and is stored at
//! flat index `j * nx + i` (row-major, rows run along x). Integrals use the
//! midpoint rule, and gradients are built from face differences with the
//! boundary faces pinned to zero, which is the discrete form of a homogeneous
//! Neumann condition.

use crate::error::{KsfError, Result};

/// Smallest admissible cell count per direction.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(KsfError::Grid(format!(
                "need at least {MIN_CELLS} cells per direction, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(KsfError::Grid(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square grid on `[0, 1]^2`.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// `|Ω|`
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.dx(),
            (j as f64 + 0.5) * self.dy(),
        )
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }
}

/// Cell-centered samples of a real function on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KsfError::Shape(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx(),
                grid.ny(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(index) => Err(KsfError::NonFinite {
                context,
                index,
                value: self.values[index],
            }),
        }
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(KsfError::Shape(format!(
                "grid {}x{} on {}x{} vs {}x{} on {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                self.grid.lx(),
                self.grid.ly(),
                other.grid.nx(),
                other.grid.ny(),
                other.grid.lx(),
                other.grid.ly()
            )))
        }
    }

    /// Mean value `|Ω|^{-1} ∫ F`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Midpoint quadrature of `∫_Ω F dx`.
pub fn integrate(field: &ScalarField) -> Result<f64> {
    field.check_finite("integrate")?;
    Ok(field.values.iter().sum::<f64>() * field.grid.cell_area())
}

/// Quadrature inner product `∫_Ω F G dx`.
pub fn inner(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.check_same_grid(b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(s * a.grid.cell_area())
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(KsfError::param("p", format!("need p >= 1 or p = inf, got {p}")));
    }
    Ok(())
}

/// `|v|^p`, through `powi` for small integer exponents.
#[inline]
pub(crate) fn pow_abs(v: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p <= 16.0 {
        v.abs().powi(p as i32)
    } else {
        v.abs().powf(p)
    }
}

/// Discrete `L^p(Ω)` norm of a list of cell values; `p = f64::INFINITY` gives the max norm.
pub(crate) fn lp_of_values(values: impl Iterator<Item = f64>, p: f64, cell_area: f64) -> f64 {
    if p.is_infinite() {
        values.map(f64::abs).fold(0.0, f64::max)
    } else if p == 1.0 {
        values.map(f64::abs).sum::<f64>() * cell_area
    } else if p == 2.0 {
        (values.map(|v| v * v).sum::<f64>() * cell_area).sqrt()
    } else {
        (values.map(|v| pow_abs(v, p)).sum::<f64>() * cell_area).powf(1.0 / p)
    }
}

/// Discrete `‖F‖_{L^p(Ω)}`; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    field.check_finite("lp_norm")?;
    Ok(lp_of_values(
        field.values.iter().copied(),
        p,
        field.grid.cell_area(),
    ))
}

/// Cell-centered gradient `(∂x F, ∂y F)`.
///
/// Each component is the average of the two adjacent face differences; faces on
/// `∂Ω` carry a zero difference.
pub fn gradient(field: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = field.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let (dx, dy) = (g.dx(), g.dy());
    let v = &field.values;
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.index(i, j);
            let east = if i + 1 < nx { (v[k + 1] - v[k]) / dx } else { 0.0 };
            let west = if i > 0 { (v[k] - v[k - 1]) / dx } else { 0.0 };
            let north = if j + 1 < ny { (v[k + nx] - v[k]) / dy } else { 0.0 };
            let south = if j > 0 { (v[k] - v[k - nx]) / dy } else { 0.0 };
            gx[k] = 0.5 * (east + west);
            gy[k] = 0.5 * (north + south);
        }
    }
    (gx, gy)
}

/// Squared gradient magnitude per cell.
pub fn gradient_sq(field: &ScalarField) -> Vec<f64> {
    let (gx, gy) = gradient(field);
    gx.iter().zip(&gy).map(|(a, b)| a * a + b * b).collect()
}

/// Discrete `‖∇F‖_{L^p(Ω)}`.
pub fn w1p_seminorm(field: &ScalarField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    field.check_finite("w1p_seminorm")?;
    let (gx, gy) = gradient(field);
    Ok(lp_of_values(
        gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()),
        p,
        field.grid.cell_area(),
    ))
}

/// `(‖F‖_θ^θ + ‖∇F‖_θ^θ)^{1/θ}`, or the max of the two for `θ = ∞`.
pub fn w1p_norm(field: &ScalarField, p: f64) -> Result<f64> {
    let a = lp_norm(field, p)?;
    let b = w1p_seminorm(field, p)?;
    if p.is_infinite() {
        Ok(a.max(b))
    } else {
        Ok((a.powf(p) + b.powf(p)).powf(1.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        assert!(Grid2D::new(4, 4, 1.0, 2.0).is_ok());
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = Grid2D::unit_square(16).unwrap();
        assert!((integrate(&ScalarField::constant(g, 3.0)).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(integrate(&ScalarField::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_is_exact_for_linear() {
        let g = Grid2D::unit_square(64).unwrap();
        let f = ScalarField::from_fn(g, |x, _| x);
        assert!((integrate(&f).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn integrate_rejects_nan() {
        let g = Grid2D::unit_square(4).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values_mut()[5] = f64::NAN;
        assert!(matches!(integrate(&f), Err(KsfError::NonFinite { index: 5, .. })));
    }

    #[test]
    fn lp_examples() {
        let g = Grid2D::unit_square(64).unwrap();
        assert!((lp_norm(&ScalarField::constant(g, 2.0), 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(lp_norm(&ScalarField::constant(g, -2.0), f64::INFINITY).unwrap(), 2.0);
        let mut spike = ScalarField::zeros(g);
        spike.values_mut()[123] = 5.0;
        assert!((lp_norm(&spike, 1.0).unwrap() - 5.0 / 4096.0).abs() < 1e-16);
        assert!(lp_norm(&spike, 0.5).is_err());
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        let g = Grid2D::new(9, 7, 1.3, 0.4).unwrap();
        let f = ScalarField::constant(g, 4.2);
        assert_eq!(w1p_seminorm(&f, 2.0).unwrap(), 0.0);
        assert_eq!(w1p_seminorm(&f, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn gradient_of_cosine_converges() {
        // ∫∫ π² sin²(πx) = π²/2, max |∇| = π
        let mut prev_err2 = f64::INFINITY;
        for n in [32, 64, 128] {
            let g = Grid2D::unit_square(n).unwrap();
            let f = ScalarField::from_fn(g, |x, _| (PI * x).cos());
            let e2 = (w1p_seminorm(&f, 2.0).unwrap() - PI / 2f64.sqrt()).abs();
            let einf = (w1p_seminorm(&f, f64::INFINITY).unwrap() - PI).abs();
            let dx = g.dx();
            assert!(e2 < 5.0 * dx * dx, "n={n} e2={e2}");
            assert!(einf < 12.0 * dx * dx, "n={n} einf={einf}");
            assert!(e2 < prev_err2 / 3.0);
            prev_err2 = e2;
        }
    }

    #[test]
    fn w1p_norm_combines_parts() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = ScalarField::constant(g, 2.0);
        assert!((w1p_norm(&f, 3.0).unwrap() - 2.0).abs() < 1e-14);
    }
}
