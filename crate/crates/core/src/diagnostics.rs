//! Scalar observables along trajectories: mass, the `‖v‖₁` law, the energy
//! functional and its dissipation, small-data decay fits and the bounds ledger.

use crate::error::{KsfError, Result};
use crate::grid::{self, gradient, ScalarField};
use crate::quadrature::{self, QuadOptions};
use crate::semigroup::CosineBasis;
use crate::solver::{ForcingMode, ForcingSpec, State, Trajectory};

/// Densities below this are dropped from the dissipation integrand.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Relative tolerance for roundoff-level negative densities.
pub const NEGATIVITY_TOL: f64 = 1e-12;

/// Per-step observables. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub v_l1: f64,
    pub v_l1_exact: f64,
    pub u_linf: f64,
    pub u_l2: f64,
    pub v_w1theta: f64,
    pub energy_w: f64,
    pub dissipation: f64,
    pub energy_residual: f64,
    pub fv_integral: f64,
    pub ulogu_l1: f64,
    pub vt_l2_accum: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 13] = [
        "t",
        "mass_u",
        "v_l1",
        "v_l1_exact",
        "u_linf",
        "u_l2",
        "v_w1theta",
        "energy_w",
        "dissipation",
        "energy_residual",
        "fv_integral",
        "ulogu_l1",
        "vt_l2_accum",
    ];

    pub fn as_array(&self) -> [f64; 13] {
        [
            self.t,
            self.mass_u,
            self.v_l1,
            self.v_l1_exact,
            self.u_linf,
            self.u_l2,
            self.v_w1theta,
            self.energy_w,
            self.dissipation,
            self.energy_residual,
            self.fv_integral,
            self.ulogu_l1,
            self.vt_l2_accum,
        ]
    }

    pub fn from_array(a: [f64; 13]) -> Self {
        Self {
            t: a[0],
            mass_u: a[1],
            v_l1: a[2],
            v_l1_exact: a[3],
            u_linf: a[4],
            u_l2: a[5],
            v_w1theta: a[6],
            energy_w: a[7],
            dissipation: a[8],
            energy_residual: a[9],
            fv_integral: a[10],
            ulogu_l1: a[11],
            vt_l2_accum: a[12],
        }
    }
}

fn check_density(u: &ScalarField) -> Result<()> {
    u.check_finite("density")?;
    let tol = NEGATIVITY_TOL * grid::lp_norm(u, f64::INFINITY)?;
    match u.values().iter().enumerate().find(|(_, &x)| x < -tol) {
        Some((index, &value)) => Err(KsfError::Domain { index, value }),
        None => Ok(()),
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `W(u, v) = ∫ [u log u − uv + ½(|∇v|² + v²) − fv]`, with `0 log 0 = 0`.
pub fn energy_w(u: &ScalarField, v: &ScalarField, f: &ScalarField) -> Result<f64> {
    u.check_same_grid(v)?;
    u.check_same_grid(f)?;
    check_density(u)?;
    v.check_finite("energy v")?;
    let gv2 = grid::gradient_sq(v);
    let s: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .zip(f.values())
        .zip(&gv2)
        .map(|(((&uu, &vv), &ff), &g2)| xlogx(uu) - uu * vv + 0.5 * (g2 + vv * vv) - ff * vv)
        .sum();
    Ok(s * u.grid().cell_area())
}

/// `∫ u|∇(log u − v)|² + τ ∫ ((v − v_prev)/dt)²`.
///
/// The first integrand is evaluated as `|∇u/√u − √u ∇v|²`; cells with
/// `u < 1e-300` contribute nothing.
pub fn dissipation(
    u: &ScalarField,
    v: &ScalarField,
    v_prev: &ScalarField,
    dt: f64,
    tau: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(KsfError::param("dt", format!("must be positive, got {dt}")));
    }
    u.check_same_grid(v)?;
    v.check_same_grid(v_prev)?;
    check_density(u)?;
    let (ux, uy) = gradient(u);
    let (vx, vy) = gradient(v);
    let mut flow = 0.0;
    for (k, &uu) in u.values().iter().enumerate() {
        if uu < DENSITY_FLOOR {
            continue;
        }
        let ex = ux[k] - uu * vx[k];
        let ey = uy[k] - uu * vy[k];
        flow += (ex * ex + ey * ey) / uu;
    }
    let vt2: f64 = v
        .values()
        .iter()
        .zip(v_prev.values())
        .map(|(a, b)| {
            let d = (a - b) / dt;
            d * d
        })
        .sum();
    Ok((flow + tau * vt2) * u.grid().cell_area())
}

/// `‖v(t)‖₁ = e^{−t/τ}‖v₀‖₁ + ‖u₀‖₁(1 − e^{−t/τ}) + (1/τ)∫₀ᵗ ‖f(s)‖₁ e^{(s−t)/τ} ds`.
pub fn v_l1_exact(t: f64, v0_l1: f64, u0_l1: f64, forcing: &ForcingSpec, tau: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(KsfError::param("t", format!("must be >= 0, got {t}")));
    }
    if !(tau > 0.0) {
        return Err(KsfError::param("tau", format!("must be positive, got {tau}")));
    }
    let decay = (-t / tau).exp();
    let relax = -(-t / tau).exp_m1();
    let forced = match forcing.mode() {
        ForcingMode::Zero => 0.0,
        ForcingMode::ConstantInTime => forcing.l1_at(0.0) * relax,
        ForcingMode::TimeDependent => {
            if t == 0.0 {
                0.0
            } else {
                let opts = QuadOptions {
                    abs_tol: 1e-14,
                    rel_tol: 1e-12,
                    max_intervals: 500,
                };
                quadrature::integrate(|s| forcing.l1_at(s) * ((s - t) / tau).exp(), 0.0, t, opts)? / tau
            }
        }
    };
    Ok(decay * v0_l1 + u0_l1 * relax + forced)
}

/// Per-step observables tracked by the bounds ledger but not part of the CSV schema.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuxObservables {
    /// `∫ uv`
    pub uv_integral: f64,
    /// `‖∇v‖_θ`
    pub grad_v_ltheta: f64,
}

/// Builds [`DiagnosticsRecord`]s along a run.
#[derive(Debug, Clone)]
pub struct Recorder {
    forcing: ForcingSpec,
    tau: f64,
    theta: f64,
    t0: f64,
    u0_l1: f64,
    v0_l1: f64,
    prev_energy: f64,
    vt_accum: f64,
    last_aux: AuxObservables,
}

impl Recorder {
    pub fn new(initial: &State, forcing: &ForcingSpec, tau: f64, theta: f64) -> Result<Self> {
        Ok(Self {
            forcing: forcing.clone(),
            tau,
            theta,
            t0: initial.t,
            u0_l1: grid::lp_norm(&initial.u, 1.0)?,
            v0_l1: grid::lp_norm(&initial.v, 1.0)?,
            prev_energy: f64::NAN,
            vt_accum: 0.0,
            last_aux: AuxObservables::default(),
        })
    }

    /// The record (without residual and accumulator) and `∫ v_t²`.
    fn build(&mut self, s: &State, prev: Option<(&State, f64)>) -> Result<(DiagnosticsRecord, f64)> {
        let f = self.forcing.sample(s.t);
        let o = Observables::compute(&s.u, &s.v, &f, self.theta, prev.map(|(p, dt)| (&p.v, dt)))?;
        self.last_aux = AuxObservables {
            uv_integral: o.uv,
            grad_v_ltheta: o.grad_v_ltheta,
        };
        let r = DiagnosticsRecord {
            t: s.t,
            mass_u: o.mass,
            v_l1: o.v_l1,
            v_l1_exact: v_l1_exact(s.t - self.t0, self.v0_l1, self.u0_l1, &self.forcing, self.tau)?,
            u_linf: o.u_linf,
            u_l2: o.u_l2,
            v_w1theta: o.v_w1theta,
            energy_w: o.energy,
            dissipation: o.flow + self.tau * o.vt_sq,
            energy_residual: 0.0,
            fv_integral: o.fv,
            ulogu_l1: o.ulogu,
            vt_l2_accum: self.vt_accum,
        };
        Ok((r, o.vt_sq))
    }

    pub fn initial_record(&mut self, s: &State) -> Result<DiagnosticsRecord> {
        let (r, _) = self.build(s, None)?;
        self.prev_energy = r.energy_w;
        Ok(r)
    }

    /// Record for `next`, reached from `prev` with step `dt`.
    pub fn record(&mut self, next: &State, prev: &State, dt: f64) -> Result<DiagnosticsRecord> {
        if !(dt > 0.0) {
            return Err(KsfError::param("dt", format!("must be positive, got {dt}")));
        }
        let (mut r, vt_sq) = self.build(next, Some((prev, dt)))?;
        self.vt_accum += dt * vt_sq;
        r.vt_l2_accum = self.vt_accum;
        r.energy_residual = (r.energy_w - self.prev_energy) / dt + r.dissipation;
        self.prev_energy = r.energy_w;
        Ok(r)
    }

    /// Ledger-only observables of the most recent record.
    pub fn last_aux(&self) -> AuxObservables {
        self.last_aux
    }
}

/// Every per-step integral, from a single pass over the cells.
struct Observables {
    mass: f64,
    v_l1: f64,
    u_linf: f64,
    u_l2: f64,
    v_w1theta: f64,
    energy: f64,
    fv: f64,
    ulogu: f64,
    flow: f64,
    vt_sq: f64,
    uv: f64,
    grad_v_ltheta: f64,
}

impl Observables {
    fn compute(
        u: &ScalarField,
        v: &ScalarField,
        f: &ScalarField,
        theta: f64,
        prev: Option<(&ScalarField, f64)>,
    ) -> Result<Self> {
        u.check_same_grid(v)?;
        u.check_same_grid(f)?;
        check_density(u)?;
        v.check_finite("v")?;
        let (ux, uy) = gradient(u);
        let (vx, vy) = gradient(v);
        let mut o = Observables {
            mass: 0.0,
            v_l1: 0.0,
            u_linf: 0.0,
            u_l2: 0.0,
            v_w1theta: 0.0,
            energy: 0.0,
            fv: 0.0,
            ulogu: 0.0,
            flow: 0.0,
            vt_sq: 0.0,
            uv: 0.0,
            grad_v_ltheta: 0.0,
        };
        let (mut v_pow, mut gv_pow, mut v_sup, mut gv_sup) = (0.0, 0.0, 0.0f64, 0.0f64);
        let (uv, vv, fv) = (u.values(), v.values(), f.values());
        for k in 0..uv.len() {
            let (uu, vk, fk) = (uv[k], vv[k], fv[k]);
            let gv2 = vx[k] * vx[k] + vy[k] * vy[k];
            o.mass += uu;
            o.v_l1 += vk.abs();
            o.u_linf = o.u_linf.max(uu.abs());
            o.u_l2 += uu * uu;
            if theta.is_infinite() {
                v_sup = v_sup.max(vk.abs());
                gv_sup = gv_sup.max(gv2.sqrt());
            } else {
                v_pow += grid::pow_abs(vk, theta);
                gv_pow += grid::pow_abs(gv2.sqrt(), theta);
            }
            let ul = xlogx(uu);
            o.energy += ul - uu * vk + 0.5 * (gv2 + vk * vk) - fk * vk;
            o.fv += fk * vk;
            o.uv += uu * vk;
            o.ulogu += ul.abs();
            if uu >= DENSITY_FLOOR {
                let ex = ux[k] - uu * vx[k];
                let ey = uy[k] - uu * vy[k];
                o.flow += (ex * ex + ey * ey) / uu;
            }
        }
        let area = u.grid().cell_area();
        if let Some((v_prev, dt)) = prev {
            v.check_same_grid(v_prev)?;
            o.vt_sq = vv
                .iter()
                .zip(v_prev.values())
                .map(|(a, b)| {
                    let d = (a - b) / dt;
                    d * d
                })
                .sum::<f64>()
                * area;
        }
        o.mass *= area;
        o.v_l1 *= area;
        o.u_l2 = (o.u_l2 * area).sqrt();
        if theta.is_infinite() {
            o.v_w1theta = v_sup.max(gv_sup);
            o.grad_v_ltheta = gv_sup;
        } else {
            o.v_w1theta = ((v_pow + gv_pow) * area).powf(1.0 / theta);
            o.grad_v_ltheta = (gv_pow * area).powf(1.0 / theta);
        }
        o.uv *= area;
        o.energy *= area;
        o.fv *= area;
        o.ulogu *= area;
        o.flow *= area;
        Ok(o)
    }
}

/// Checks `W(t_{k+1}) ≤ W(t_k) + tol·(1 + |W(t_k)|)` along the records.
///
/// Returns the index of the first violating record, if any.
pub fn first_energy_increase(records: &[DiagnosticsRecord], tol: f64) -> Option<usize> {
    records
        .windows(2)
        .position(|w| w[1].energy_w > w[0].energy_w + tol * (1.0 + w[0].energy_w.abs()))
        .map(|i| i + 1)
}

/// Parameters of the small-data decay estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheckParams {
    pub theta: f64,
    pub delta0: f64,
    pub r: f64,
    pub n: u32,
    pub epsilon: f64,
}

impl DecayCheckParams {
    pub fn new(theta: f64, delta0: f64, r: f64, n: u32, epsilon: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(KsfError::param("delta0", format!("need 0 < delta0 < 1, got {delta0}")));
        }
        if n < 2 {
            return Err(KsfError::param("n", format!("need n >= 2, got {n}")));
        }
        if !(r > 1.0) {
            return Err(KsfError::param("r", format!("need r > 1, got {r}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(KsfError::param("epsilon", format!("need epsilon >= 0, got {epsilon}")));
        }
        let upper = theta_upper_bound(n, delta0);
        if !(theta > n as f64 && theta < upper) {
            return Err(KsfError::param(
                "theta",
                format!("need {n} < theta < {upper}, got {theta}"),
            ));
        }
        Ok(Self { theta, delta0, r, n, epsilon })
    }

    /// `q₀ = n/2 + δ₀`
    pub fn q0(&self) -> f64 {
        self.n as f64 / 2.0 + self.delta0
    }
}

/// `(n² + 2nδ₀)/(n − 2δ₀)`
pub fn theta_upper_bound(n: u32, delta0: f64) -> f64 {
    let n = n as f64;
    (n * n + 2.0 * n * delta0) / (n - 2.0 * delta0)
}

/// Result of fitting a decay envelope to a deviation series.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Least `C` with `g(t) ≤ C·envelope(t)` on every sampled `t > 1`.
    pub constant: f64,
    /// Time at which the bound is tight.
    pub worst_t: f64,
    /// `(t, g(t))` for every sampled `t > 1`.
    pub series: Vec<(f64, f64)>,
}

fn fit(series: Vec<(f64, f64)>, envelope: impl Fn(f64) -> f64) -> DecayFit {
    let mut constant: f64 = 0.0;
    let mut worst_t = f64::NAN;
    for &(t, g) in &series {
        let e = envelope(t);
        let c = if g == 0.0 { 0.0 } else if e > 0.0 { g / e } else { f64::INFINITY };
        if c > constant || worst_t.is_nan() {
            constant = constant.max(c);
            worst_t = t;
        }
    }
    DecayFit { constant, worst_t, series }
}

fn late_snapshots(trajectory: &Trajectory) -> Result<Vec<&State>> {
    let t0 = trajectory.initial().t;
    let late: Vec<&State> = trajectory.snapshots.iter().filter(|s| s.t - t0 > 1.0).collect();
    if late.is_empty() {
        return Err(KsfError::InsufficientData(format!(
            "decay checks need snapshots beyond t = 1; trajectory ends at t = {}",
            trajectory.final_state.t - t0
        )));
    }
    Ok(late)
}

/// Fits `‖u(t) − e^{tΔ}u₀‖_∞ ≤ C ε² e^{−λ₁t/r} + C ε²` over snapshots with `t > 1`.
pub fn decay_check_u(trajectory: &Trajectory, params: &DecayCheckParams) -> Result<DecayFit> {
    let u0 = &trajectory.initial().u;
    let basis = CosineBasis::new(*u0.grid());
    let lambda1 = basis.lambda1();
    let t0 = trajectory.initial().t;
    let c0 = basis.forward(u0)?;
    let mut series = Vec::new();
    for s in late_snapshots(trajectory)? {
        let t = s.t - t0;
        let mut c = c0.clone();
        basis.scale_modes(&mut c, |mu| (-mu * t).exp());
        let heat = basis.inverse(&c);
        series.push((t, grid::lp_norm(&s.u.sub(&heat)?, f64::INFINITY)?));
    }
    let eps2 = params.epsilon * params.epsilon;
    Ok(fit(series, |t| eps2 * ((-lambda1 * t / params.r).exp() + 1.0)))
}

/// `∫₀ᵗ e^{−(t−s)(μ+1)/τ} e^{−μs} ds`
fn double_semigroup_kernel(mu: f64, t: f64, tau: f64) -> f64 {
    // (e^{−at} − e^{−bt}) / (b − a), factored around the slower rate
    let (a, b) = (mu, (mu + 1.0) / tau);
    let k = (b - a).abs();
    let x = k * t;
    let slow = (-a.min(b) * t).exp();
    if x < 1e-10 {
        slow * t * (1.0 - 0.5 * x)
    } else {
        slow * (-(-x).exp_m1()) / k
    }
}

/// Linear comparison flow for `v`:
/// `e^{(t/τ)(Δ−1)}v₀ + (1/τ)∫₀ᵗ e^{((t−s)/τ)(Δ−1)} e^{sΔ}u₀ ds`, evaluated modewise.
pub fn linear_v_flow(basis: &CosineBasis, u0: &ScalarField, v0: &ScalarField, t: f64, tau: f64) -> Result<ScalarField> {
    let mut cv = basis.forward(v0)?;
    basis.scale_modes(&mut cv, |mu| (-(mu + 1.0) * t / tau).exp());
    let mut cu = basis.forward(u0)?;
    basis.scale_modes(&mut cu, |mu| double_semigroup_kernel(mu, t, tau) / tau);
    cv.coeffs_mut().iter_mut().zip(cu.coeffs()).for_each(|(a, b)| *a += b);
    Ok(basis.inverse(&cv))
}

/// Fits `‖∇(v(t) − linear flow)‖_θ ≤ C ε² e^{−λ₁t/r} + C ε` over snapshots with `t > 1`.
pub fn decay_check_v(trajectory: &Trajectory, params: &DecayCheckParams, tau: f64) -> Result<DecayFit> {
    let init = trajectory.initial();
    let basis = CosineBasis::new(*init.u.grid());
    let lambda1 = basis.lambda1();
    let mut series = Vec::new();
    for s in late_snapshots(trajectory)? {
        let t = s.t - init.t;
        let lin = linear_v_flow(&basis, &init.u, &init.v, t, tau)?;
        series.push((t, grid::w1p_seminorm(&s.v.sub(&lin)?, params.theta)?));
    }
    let eps = params.epsilon;
    Ok(fit(series, |t| eps * eps * (-lambda1 * t / params.r).exp() + eps))
}

/// Growth margin allowed by the plateau test.
pub const PLATEAU_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub name: &'static str,
    /// Running maximum at the end of the trajectory.
    pub running_max: f64,
    /// Running maximum at the start of the second half of the run.
    pub window_start_max: f64,
    pub plateau: bool,
}

impl std::fmt::Display for LedgerEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.plateau { "plateau" } else { "GROWING" };
        write!(
            f,
            "{:<14} max(T/2)={:<12.6e} max(T)={:<12.6e} {verdict}",
            self.name, self.window_start_max, self.running_max
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    pub t_end: f64,
    pub entries: Vec<LedgerEntry>,
}

impl LedgerReport {
    pub fn all_plateau(&self) -> bool {
        self.entries.iter().all(|e| e.plateau)
    }

    pub fn entry(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn flagged(&self) -> Vec<&'static str> {
        self.entries.iter().filter(|e| !e.plateau).map(|e| e.name).collect()
    }
}

/// Running maxima of the quantities that stay bounded for subcritical mass.
///
/// An entry passes the plateau test when its running maximum at the final time
/// is at most 5% above its running maximum at half the final time.
pub fn bounds_ledger(trajectory: &Trajectory) -> Result<LedgerReport> {
    let records = &trajectory.records;
    let aux = &trajectory.aux;
    if records.is_empty() || records.len() != aux.len() {
        return Err(KsfError::InsufficientData(format!(
            "ledger needs one auxiliary entry per record, got {} records and {} entries",
            records.len(),
            aux.len()
        )));
    }
    let t0 = records[0].t;
    let t_end = records[records.len() - 1].t;
    let t_half = t0 + 0.5 * (t_end - t0);

    const NAMES: [&str; 8] = [
        "uv_integral",
        "energy_abs",
        "u_l2",
        "grad_v_ltheta",
        "u_linf",
        "ulogu_l1",
        "vt_l2_accum",
        "fv_integral",
    ];
    let mut full = [f64::NEG_INFINITY; 8];
    let mut half = [f64::NEG_INFINITY; 8];
    for (r, a) in records.iter().zip(aux) {
        let obs = [
            a.uv_integral,
            r.energy_w.abs(),
            r.u_l2,
            a.grad_v_ltheta,
            r.u_linf,
            r.ulogu_l1,
            r.vt_l2_accum,
            r.fv_integral,
        ];
        for i in 0..8 {
            full[i] = full[i].max(obs[i]);
            if r.t <= t_half + 1e-12 * t_end.abs().max(1.0) {
                half[i] = half[i].max(obs[i]);
            }
        }
    }
    let entries = NAMES
        .iter()
        .zip(full.iter().zip(&half))
        .map(|(&name, (&m, &h))| LedgerEntry {
            name,
            running_max: m,
            window_start_max: h,
            plateau: m <= h.max(PLATEAU_FACTOR * h),
        })
        .collect();
    Ok(LedgerReport { t_end, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::solver::{Modulation, Solver, SolverConfig};
    use std::f64::consts::{E, LN_2, PI};

    fn unit(n: usize) -> Grid2D {
        Grid2D::unit_square(n).unwrap()
    }

    #[test]
    fn energy_of_constant_states() {
        let g = unit(16);
        let c = |x| ScalarField::constant(g, x);
        assert!(energy_w(&c(1.0), &c(0.0), &c(0.0)).unwrap().abs() < 1e-14);
        assert!((energy_w(&c(E), &c(1.0), &c(0.0)).unwrap() - 0.5).abs() < 1e-13);
        assert!((energy_w(&c(1.0), &c(1.0), &c(2.0)).unwrap() + 2.5).abs() < 1e-13);
    }

    #[test]
    fn energy_handles_vacuum_and_rejects_negative_density() {
        let g = unit(8);
        let mut u = ScalarField::zeros(g);
        assert_eq!(energy_w(&u, &u, &u).unwrap(), 0.0);
        u.values_mut()[0] = 1.0;
        u.values_mut()[1] = -1e-17;
        assert!(energy_w(&u, &ScalarField::zeros(g), &ScalarField::zeros(g)).is_ok());
        u.values_mut()[1] = -1e-3;
        assert!(matches!(
            energy_w(&u, &ScalarField::zeros(g), &ScalarField::zeros(g)),
            Err(KsfError::Domain { index: 1, .. })
        ));
    }

    #[test]
    fn dissipation_examples() {
        let g = unit(32);
        let c = ScalarField::constant(g, 2.0);
        assert_eq!(dissipation(&c, &c, &c, 0.1, 1.0).unwrap(), 0.0);

        // u ≡ 1: only ∫|∇v|² survives
        let one = ScalarField::constant(g, 1.0);
        let v = ScalarField::from_fn(g, |x, _| (PI * x).cos());
        let d = dissipation(&one, &v, &v, 0.1, 1.0).unwrap();
        let grad2 = grid::w1p_seminorm(&v, 2.0).unwrap().powi(2);
        assert!((d - grad2).abs() < 1e-12 * grad2);

        assert!(dissipation(&one, &v, &v, 0.0, 1.0).is_err());

        // pure v_t term
        let vp = ScalarField::constant(g, 0.5);
        let vn = ScalarField::constant(g, 1.0);
        let d = dissipation(&one, &vn, &vp, 0.25, 3.0).unwrap();
        assert!((d - 3.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn v_l1_law_examples() {
        let g = unit(8);
        let zero = ForcingSpec::zero(g);
        assert!((v_l1_exact(LN_2, 2.0, 1.0, &zero, 1.0).unwrap() - 1.5).abs() < 1e-14);
        assert_eq!(v_l1_exact(0.0, 2.0, 1.0, &zero, 1.0).unwrap(), 2.0);
        let f = ForcingSpec::constant(ScalarField::constant(g, 0.75)).unwrap();
        let tau = 2.0;
        let late = v_l1_exact(20.0 * tau, 2.0, 1.0, &f, tau).unwrap();
        assert!((late - 1.75).abs() < 1e-8);
    }

    #[test]
    fn v_l1_law_quadrature_matches_closed_form() {
        // exponential decay modulation: (F/τ) e^{−t/τ} (e^{(1/τ − r)t} − 1)/(1/τ − r)
        let g = unit(8);
        let (rate, tau, t) = (0.7, 1.5, 2.3);
        let f = ForcingSpec::time_dependent(ScalarField::constant(g, 2.0), Modulation::ExponentialDecay { rate }).unwrap();
        let k = 1.0 / tau - rate;
        let closed = 2.0 / tau * (-t / tau).exp() * ((k * t).exp() - 1.0) / k;
        let got = v_l1_exact(t, 0.0, 0.0, &f, tau).unwrap();
        assert!((got - closed).abs() < 1e-12, "{got} vs {closed}");
    }

    #[test]
    fn theta_window() {
        assert!((theta_upper_bound(2, 0.5) - 6.0).abs() < 1e-14);
        assert!(DecayCheckParams::new(3.0, 0.5, 2.0, 2, 1e-3).is_ok());
        assert!(DecayCheckParams::new(6.0, 0.5, 2.0, 2, 1e-3).is_err());
        assert!(DecayCheckParams::new(2.0, 0.5, 2.0, 2, 1e-3).is_err());
        assert!(DecayCheckParams::new(3.0, 0.5, 1.0, 2, 1e-3).is_err());
        assert!(DecayCheckParams::new(3.5, 0.2, 2.0, 3, 1e-3).is_ok());
    }

    #[test]
    fn double_semigroup_kernel_matches_quadrature() {
        for &(mu, tau, t) in &[(0.0, 1.0, 2.0), (9.87, 1.0, 1.5), (3.0, 0.5, 0.7), (1.0, 2.0, 3.0), (2.0, 0.75, 1.0)] {
            let q = quadrature::integrate(
                |s| (-(t - s) * (mu + 1.0) / tau).exp() * (-mu * s).exp(),
                0.0,
                t,
                QuadOptions::default(),
            )
            .unwrap();
            let k = double_semigroup_kernel(mu, t, tau);
            assert!((q - k).abs() < 1e-12 * q.abs().max(1e-300), "mu={mu} tau={tau}: {q} vs {k}");
        }
    }

    fn heat_only_run(u0: ScalarField, v0: ScalarField, t_end: f64) -> Trajectory {
        let g = *u0.grid();
        let cfg = SolverConfig {
            chemotaxis: false,
            t_end,
            dt_init: 1e-3,
            snapshot_interval: 0.25,
            ..Default::default()
        };
        Solver::new(cfg, ForcingSpec::zero(g))
            .unwrap()
            .run(crate::solver::State::new(u0, v0, 0.0).unwrap())
            .unwrap()
    }

    #[test]
    fn decay_fits_vanish_for_linear_flow() {
        let g = unit(32);
        let u0 = ScalarField::from_fn(g, |x, y| 1.0 + 0.01 * (PI * x).cos() * (PI * y).cos());
        let v0 = ScalarField::from_fn(g, |x, _| 0.5 + 0.01 * (2.0 * PI * x).cos());
        let traj = heat_only_run(u0, v0, 2.0);
        let p = DecayCheckParams::new(3.0, 0.5, 2.0, 2, 1e-2).unwrap();
        let fu = decay_check_u(&traj, &p).unwrap();
        let fv = decay_check_v(&traj, &p, 1.0).unwrap();
        assert!(fu.series.iter().all(|&(t, _)| t > 1.0));
        assert_eq!(fu.series.len(), 4);
        // only the implicit-Euler time error remains
        assert!(fu.constant < 1e-2, "{}", fu.constant);
        assert!(fv.constant < 1e-2, "{}", fv.constant);
    }

    #[test]
    fn decay_check_needs_late_snapshots() {
        let g = unit(16);
        let traj = heat_only_run(ScalarField::constant(g, 1.0), ScalarField::zeros(g), 0.5);
        let p = DecayCheckParams::new(3.0, 0.5, 2.0, 2, 1e-2).unwrap();
        assert!(matches!(decay_check_u(&traj, &p), Err(KsfError::InsufficientData(_))));
    }

    #[test]
    fn linear_v_flow_single_mode() {
        let g = unit(32);
        let basis = CosineBasis::new(g);
        let mode = ScalarField::from_fn(g, |x, _| (PI * x).cos());
        let mu = basis.eigenvalue(1, 0);
        let (t, tau) = (0.6, 2.0);
        let lin = linear_v_flow(&basis, &ScalarField::zeros(g), &mode, t, tau).unwrap();
        let factor = (-t / tau).exp() * (-mu * t / tau).exp();
        for (a, b) in lin.values().iter().zip(mode.values()) {
            assert!((a - factor * b).abs() < 1e-13, "{a} {b} {factor}");
        }
    }

    #[test]
    fn steady_ledger_plateaus() {
        let g = unit(16);
        let cfg = SolverConfig { t_end: 1.0, dt_init: 1e-2, snapshot_interval: 0.1, ..Default::default() };
        let s = State::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0), 0.0).unwrap();
        let traj = Solver::new(cfg, ForcingSpec::zero(g)).unwrap().run(s).unwrap();
        let ledger = bounds_ledger(&traj).unwrap();
        assert!(ledger.all_plateau(), "{:?}", ledger.flagged());
        assert_eq!(first_energy_increase(&traj.records, 1e-12), None);
        for r in &traj.records {
            assert!(r.energy_residual.abs() < 1e-10);
            assert!(r.dissipation.abs() < 1e-20);
        }
    }

    #[test]
    fn fused_record_matches_reference_functions() {
        let g = Grid2D::new(24, 20, 1.2, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x, y| 1.0 + 0.7 * (3.0 * x).sin() * (2.0 * y).cos());
        let v = ScalarField::from_fn(g, |x, y| 0.5 + 0.3 * x * y);
        let v_prev = ScalarField::from_fn(g, |x, y| 0.4 + 0.2 * x + 0.1 * y * y);
        let base = ScalarField::from_fn(g, |x, _| 0.2 + x);
        let forcing = ForcingSpec::time_dependent(base, Modulation::ExponentialDecay { rate: 0.5 }).unwrap();
        let prev = State::new(u.clone(), v_prev.clone(), 0.0).unwrap();
        let next = State::new(u.clone(), v.clone(), 0.01).unwrap();
        let (tau, theta, dt) = (0.7, 3.0, 0.01);
        let mut rec = Recorder::new(&prev, &forcing, tau, theta).unwrap();
        let r0 = rec.initial_record(&prev).unwrap();
        let r = rec.record(&next, &prev, dt).unwrap();
        let f = forcing.sample(0.01);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        assert!(close(r.energy_w, energy_w(&u, &v, &f).unwrap()));
        assert!(close(r.dissipation, dissipation(&u, &v, &v_prev, dt, tau).unwrap()));
        assert!(close(r.mass_u, grid::integrate(&u).unwrap()));
        assert!(close(r.v_l1, grid::lp_norm(&v, 1.0).unwrap()));
        assert!(close(r.u_linf, grid::lp_norm(&u, f64::INFINITY).unwrap()));
        assert!(close(r.u_l2, grid::lp_norm(&u, 2.0).unwrap()));
        assert!(close(r.v_w1theta, grid::w1p_norm(&v, theta).unwrap()));
        assert!(close(r.fv_integral, grid::inner(&f, &v).unwrap()));
        assert!(close(rec.last_aux().uv_integral, grid::inner(&u, &v).unwrap()));
        assert!(close(rec.last_aux().grad_v_ltheta, grid::w1p_seminorm(&v, theta).unwrap()));
        let vt = grid::lp_norm(&v.sub(&v_prev).unwrap(), 2.0).unwrap().powi(2) / (dt * dt);
        assert!(close(r.vt_l2_accum, dt * vt));
        assert!(close(r.energy_residual, (r.energy_w - r0.energy_w) / dt + r.dissipation));
    }

    #[test]
    fn record_columns_round_trip() {
        let r = DiagnosticsRecord::from_array(std::array::from_fn(|i| i as f64 * 0.5));
        assert_eq!(DiagnosticsRecord::from_array(r.as_array()), r);
        assert_eq!(r.energy_residual, 4.5);
    }
}
