//! The discrete Neumann heat semigroup.
//!
//! On a cell-centered rectangle the five-point Neumann Laplacian is diagonalised
//! by the tensor cosine basis `cos(π j (i + 1/2) / nx) cos(π k (l + 1/2) / ny)`,
//! with eigenvalues
//!
//! ```text
//! μ_jk = (2/dx²)(1 − cos(πj/nx)) + (2/dy²)(1 − cos(πk/ny)).
//! ```
//!
//! Every linear solve in the time stepper and every semigroup evaluation in the
//! checks below is a diagonal multiplication in this basis, so the stencil and
//! the semigroup agree to roundoff.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{KsfError, Result};
use crate::grid::{self, Grid2D, ScalarField};
use crate::operators::{chemotactic_flux, flux_divergence};
use crate::quadrature::{self, QuadOptions};
use crate::solver::{ForcingSpec, State};

/// Coefficients `c_jk` of the expansion `F = Σ c_jk φ_j(x) ψ_k(y)`, stored at `k * nx + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    grid: Grid2D,
    coeffs: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.coeffs[k * self.grid.nx() + j]
    }

    /// `sqrt(∫ F²)` evaluated from the coefficients (discrete Parseval).
    pub fn weighted_norm(&self) -> f64 {
        let nx = self.grid.nx();
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let (j, k) = (idx % nx, idx / nx);
                let w = if j == 0 { 1.0 } else { 0.5 } * if k == 0 { 1.0 } else { 0.5 };
                w * c * c
            })
            .sum();
        (s * self.grid.area()).sqrt()
    }
}

/// Planned cosine transforms and eigenvalues for one grid.
///
/// Immutable after construction, so one instance can be shared between threads.
#[derive(Clone)]
pub struct CosineBasis {
    grid: Grid2D,
    dct_x: Arc<dyn TransformType2And3<f64>>,
    dct_y: Arc<dyn TransformType2And3<f64>>,
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
}

impl std::fmt::Debug for CosineBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineBasis").field("grid", &self.grid).finish()
    }
}

fn axis_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|j| 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * j as f64 / n as f64).cos()))
        .collect()
}

impl CosineBasis {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            grid,
            dct_x: planner.plan_dct2(grid.nx()),
            dct_y: planner.plan_dct2(grid.ny()),
            mu_x: axis_eigenvalues(grid.nx(), grid.dx()),
            mu_y: axis_eigenvalues(grid.ny(), grid.dy()),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Discrete eigenvalue of mode `(j, k)` of `−Δ_h`.
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        self.mu_x[j] + self.mu_y[k]
    }

    /// Smallest nonzero eigenvalue of `−Δ_h`.
    pub fn lambda1(&self) -> f64 {
        self.mu_x[1].min(self.mu_y[1])
    }

    fn check_grid(&self, field: &ScalarField) -> Result<()> {
        if self.grid.same_shape(field.grid()) {
            Ok(())
        } else {
            Err(KsfError::Shape(format!(
                "basis for {}x{} applied to a {}x{} field",
                self.grid.nx(),
                self.grid.ny(),
                field.grid().nx(),
                field.grid().ny()
            )))
        }
    }

    fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        const B: usize = 16;
        let mut out = vec![0.0; src.len()];
        for r0 in (0..rows).step_by(B) {
            for c0 in (0..cols).step_by(B) {
                for r in r0..(r0 + B).min(rows) {
                    for c in c0..(c0 + B).min(cols) {
                        out[c * rows + r] = src[r * cols + c];
                    }
                }
            }
        }
        out
    }

    fn forward_rows(plan: &Arc<dyn TransformType2And3<f64>>, buf: &mut [f64], len: usize) {
        let mut scratch = vec![0.0; plan.get_scratch_len()];
        let (s0, s) = (1.0 / len as f64, 2.0 / len as f64);
        for row in buf.chunks_exact_mut(len) {
            plan.process_dct2_with_scratch(row, &mut scratch);
            row[0] *= s0;
            row[1..].iter_mut().for_each(|x| *x *= s);
        }
    }

    fn inverse_rows(plan: &Arc<dyn TransformType2And3<f64>>, buf: &mut [f64], len: usize) {
        let mut scratch = vec![0.0; plan.get_scratch_len()];
        for row in buf.chunks_exact_mut(len) {
            row[0] *= 2.0;
            plan.process_dct3_with_scratch(row, &mut scratch);
        }
    }

    /// Coefficients in column-major (`j * ny + k`) order.
    fn forward_transposed(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.check_grid(field)?;
        field.check_finite("cosine_transform")?;
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut buf = field.values().to_vec();
        Self::forward_rows(&self.dct_x, &mut buf, nx);
        let mut cols = Self::transpose(&buf, ny, nx);
        Self::forward_rows(&self.dct_y, &mut cols, ny);
        Ok(cols)
    }

    fn inverse_transposed(&self, mut cols: Vec<f64>) -> ScalarField {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        Self::inverse_rows(&self.dct_y, &mut cols, ny);
        let mut buf = Self::transpose(&cols, nx, ny);
        Self::inverse_rows(&self.dct_x, &mut buf, nx);
        ScalarField::from_values(self.grid, buf).expect("grid-sized buffer")
    }

    pub fn forward(&self, field: &ScalarField) -> Result<SpectralCoeffs> {
        let cols = self.forward_transposed(field)?;
        Ok(SpectralCoeffs {
            grid: self.grid,
            coeffs: Self::transpose(&cols, self.grid.nx(), self.grid.ny()),
        })
    }

    pub fn inverse(&self, coeffs: &SpectralCoeffs) -> ScalarField {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.inverse_transposed(Self::transpose(&coeffs.coeffs, ny, nx))
    }

    /// Multiplies every coefficient by `m(μ_jk)` in place.
    pub fn scale_modes(&self, coeffs: &mut SpectralCoeffs, m: impl Fn(f64) -> f64) {
        let nx = self.grid.nx();
        for (idx, c) in coeffs.coeffs.iter_mut().enumerate() {
            *c *= m(self.mu_x[idx % nx] + self.mu_y[idx / nx]);
        }
    }

    /// Applies the Fourier multiplier `m(μ)` to a field.
    pub fn apply_multiplier(&self, field: &ScalarField, m: impl Fn(f64) -> f64) -> Result<ScalarField> {
        let mut cols = self.forward_transposed(field)?;
        let ny = self.grid.ny();
        for (idx, c) in cols.iter_mut().enumerate() {
            *c *= m(self.mu_x[idx / ny] + self.mu_y[idx % ny]);
        }
        Ok(self.inverse_transposed(cols))
    }

    /// `e^{tΔ} F`
    pub fn heat(&self, field: &ScalarField, t: f64) -> Result<ScalarField> {
        check_time(t)?;
        if t == 0.0 {
            self.check_grid(field)?;
            return Ok(field.clone());
        }
        self.apply_multiplier(field, |mu| (-mu * t).exp())
    }

    /// `e^{t(Δ−1)} F = e^{−t} e^{tΔ} F`
    pub fn heat_with_decay(&self, field: &ScalarField, t: f64) -> Result<ScalarField> {
        check_time(t)?;
        self.apply_multiplier(field, |mu| (-(mu + 1.0) * t).exp())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(KsfError::param("t", format!("semigroup time must be >= 0, got {t}")));
    }
    Ok(())
}

/// Cosine coefficients of a field.
pub fn cosine_transform(field: &ScalarField) -> Result<SpectralCoeffs> {
    CosineBasis::new(*field.grid()).forward(field)
}

/// Field with the given cosine coefficients.
pub fn inverse_cosine_transform(coeffs: &SpectralCoeffs) -> ScalarField {
    CosineBasis::new(coeffs.grid).inverse(coeffs)
}

/// `e^{tΔ} F` for the discrete Neumann Laplacian.
pub fn heat_semigroup(field: &ScalarField, t: f64) -> Result<ScalarField> {
    CosineBasis::new(*field.grid()).heat(field, t)
}

/// First nonzero eigenvalue of `−Δ_h` with Neumann conditions.
pub fn lambda1(grid: &Grid2D) -> f64 {
    let ax = 2.0 / (grid.dx() * grid.dx()) * (1.0 - (std::f64::consts::PI / grid.nx() as f64).cos());
    let ay = 2.0 / (grid.dy() * grid.dy()) * (1.0 - (std::f64::consts::PI / grid.ny() as f64).cos());
    ax.min(ay)
}

fn snapshot_spacing(trajectory: &[State]) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(KsfError::InsufficientData(format!(
            "mild residual needs at least 3 snapshots, got {}",
            trajectory.len()
        )));
    }
    let h = trajectory[1].t - trajectory[0].t;
    if h <= 0.0 {
        return Err(KsfError::InsufficientData("snapshot times must increase".into()));
    }
    for w in trajectory.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(KsfError::InsufficientData(format!(
                "snapshots must be uniformly spaced: {} vs {h}",
                w[1].t - w[0].t
            )));
        }
    }
    Ok(h)
}

/// Residuals of the variation-of-constants map along a stored trajectory.
///
/// With `T` the last snapshot time, returns
/// `(‖u(T) − Φ₁(T)‖_∞, ‖v(T) − Φ₂(T)‖_{W^{1,θ}})` where
///
/// ```text
/// Φ₁(T) = e^{TΔ}u₀ − ∫₀ᵀ e^{(T−s)Δ} ∇·(u∇v)(s) ds
/// Φ₂(T) = e^{(T/τ)(Δ−1)}v₀ + (1/τ)∫₀ᵀ e^{((T−s)/τ)(Δ−1)} (u + f)(s) ds
/// ```
///
/// The time integrals use the trapezoidal rule over the snapshots, which must be
/// uniformly spaced. `∇·(u∇v)` is the same upwind discretisation the solver uses.
pub fn mild_residual(
    trajectory: &[State],
    tau: f64,
    forcing: &ForcingSpec,
    theta: f64,
) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(KsfError::param("tau", format!("must be positive, got {tau}")));
    }
    let h = snapshot_spacing(trajectory)?;
    let first = &trajectory[0];
    let last = trajectory.last().expect("len >= 3");
    let basis = CosineBasis::new(*first.u.grid());
    let t_end = last.t;
    let n = trajectory.len() - 1;

    let mut u_acc = basis.forward(&first.u)?;
    basis.scale_modes(&mut u_acc, |mu| (-mu * (t_end - first.t)).exp());
    let mut v_acc = basis.forward(&first.v)?;
    basis.scale_modes(&mut v_acc, |mu| (-(mu + 1.0) * (t_end - first.t) / tau).exp());

    for (k, state) in trajectory.iter().enumerate() {
        let w = if k == 0 || k == n { 0.5 * h } else { h };
        let lag = t_end - state.t;

        let div = flux_divergence(&chemotactic_flux(&state.u, &state.v)?);
        let mut d = basis.forward(&div)?;
        basis.scale_modes(&mut d, |mu| -w * (-mu * lag).exp());
        u_acc.coeffs.iter_mut().zip(&d.coeffs).for_each(|(a, b)| *a += b);

        let src = state.u.lin_comb(1.0, &forcing.sample(state.t), 1.0)?;
        let mut s = basis.forward(&src)?;
        basis.scale_modes(&mut s, |mu| w / tau * (-(mu + 1.0) * lag / tau).exp());
        v_acc.coeffs.iter_mut().zip(&s.coeffs).for_each(|(a, b)| *a += b);
    }

    let phi1 = basis.inverse(&u_acc);
    let phi2 = basis.inverse(&v_acc);
    let r1 = grid::lp_norm(&last.u.sub(&phi1)?, f64::INFINITY)?;
    let r2 = grid::w1p_norm(&last.v.sub(&phi2)?, theta)?;
    Ok((r1, r2))
}

/// Exponents and rates of the convolution integral
/// `∫₀ᵗ (1 + (t−s)^{−α}) e^{−γ(t−s)} (1 + s^{−β}) e^{−δs} ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl SemigroupParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(KsfError::param("alpha", format!("need 0 <= alpha < 1, got {alpha}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(KsfError::param("beta", format!("need 0 <= beta < 1, got {beta}")));
        }
        if !(gamma > 0.0) || !(delta > 0.0) {
            return Err(KsfError::param("gamma/delta", "rates must be positive"));
        }
        if gamma == delta {
            return Err(KsfError::param("gamma/delta", "rates must differ"));
        }
        Ok(Self { alpha, beta, gamma, delta })
    }

    /// `(1 + t^{min(0, 1−α−β)}) e^{−min(γ,δ) t}`
    pub fn envelope(&self, t: f64) -> f64 {
        (1.0 + t.powf((1.0 - self.alpha - self.beta).min(0.0))) * (-self.gamma.min(self.delta) * t).exp()
    }
}

/// `∫₀ᵗ (t−s)^{−a} e^{−γ(t−s)} s^{−b} e^{−δs} ds` for `a, b ∈ [0, 1)`.
///
/// The interval is split at `t/2`; the endpoint singularities are removed with
/// `s = σ^{1/(1−b)}` and `t − s = σ^{1/(1−a)}` so both halves are smooth.
pub fn singular_kernel_integral(a: f64, b: f64, gamma: f64, delta: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(KsfError::param("t", format!("must be positive, got {t}")));
    }
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let half = 0.5 * t;
    // s ∈ (0, t/2] with s = σ^m, m = 1/(1−b): s^{−b} ds = m dσ
    let mb = 1.0 / (1.0 - b);
    let near_zero = |sigma: f64| {
        let s = sigma.powf(mb);
        let r = t - s;
        mb * r.powf(-a) * (-gamma * r - delta * s).exp()
    };
    // t − s ∈ (0, t/2] with t − s = σ^m, m = 1/(1−a)
    let ma = 1.0 / (1.0 - a);
    let near_t = |sigma: f64| {
        let r = sigma.powf(ma);
        let s = t - r;
        ma * s.powf(-b) * (-gamma * r - delta * s).exp()
    };
    let lower = quadrature::integrate(near_zero, 0.0, half.powf(1.0 - b), opts)?;
    let upper = quadrature::integrate(near_t, 0.0, half.powf(1.0 - a), opts)?;
    Ok(lower + upper)
}

/// Left side of the convolution lemma at time `t`.
pub fn convolution_integral(p: &SemigroupParams, t: f64) -> Result<f64> {
    let mut total = 0.0;
    for a in [0.0, p.alpha] {
        for b in [0.0, p.beta] {
            total += singular_kernel_integral(a, b, p.gamma, p.delta, t)?;
        }
    }
    Ok(total)
}

/// Empirical constant: `sup_t LHS(t) / envelope(t)` over `t_grid`.
pub fn convolution_bound_check(p: &SemigroupParams, t_grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let ratio = convolution_integral(p, t)? / p.envelope(t);
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Empirical constant in the gradient smoothing estimate
/// `‖∇e^{tΔ}w‖_θ ≤ C (1 + t^{−1/2−(1/q−1/θ)}) e^{−λ₁t} ‖w‖_q` (two space dimensions).
pub fn smoothing_estimate_check(w: &ScalarField, q: f64, theta: f64, t_grid: &[f64]) -> Result<f64> {
    if !(q >= 1.0 && q <= theta) {
        return Err(KsfError::param("q/theta", format!("need 1 <= q <= theta, got q={q}, theta={theta}")));
    }
    let basis = CosineBasis::new(*w.grid());
    let l1 = basis.lambda1();
    let wq = grid::lp_norm(w, q)?;
    if wq == 0.0 {
        return Ok(0.0);
    }
    let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
    let expo = -0.5 - (inv(q) - inv(theta));
    let coeffs = basis.forward(w)?;
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(KsfError::param("t_grid", format!("times must be positive, got {t}")));
        }
        let mut c = coeffs.clone();
        basis.scale_modes(&mut c, |mu| (-mu * t).exp());
        let evolved = basis.inverse(&c);
        let num = grid::w1p_seminorm(&evolved, theta)?;
        let den = (1.0 + t.powf(expo)) * (-l1 * t).exp() * wq;
        worst = worst.max(num / den);
    }
    Ok(worst)
}
