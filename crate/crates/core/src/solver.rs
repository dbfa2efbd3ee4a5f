//! Time integration of the forced system
//!
//! ```text
//! u_t   = Δu − ∇·(u∇v)
//! τ v_t = Δv − v + u + f
//! ```
//!
//! with homogeneous Neumann data. Each step advances `u` first (explicit upwind
//! transport, then an implicit diffusion solve) and feeds the new `u` into the
//! implicit `v` solve. Both implicit solves are diagonal in the cosine basis.

use crate::diagnostics::{AuxObservables, DiagnosticsRecord, Recorder};
use crate::error::{KsfError, Result};
use crate::grid::{self, Grid2D, ScalarField};
use crate::operators::{chemotactic_flux, flux_divergence, max_face_gradient};
use crate::semigroup::CosineBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub v: ScalarField,
    pub t: f64,
}

impl State {
    pub fn new(u: ScalarField, v: ScalarField, t: f64) -> Result<Self> {
        u.check_same_grid(&v)?;
        Ok(Self { u, v, t })
    }

    pub fn grid(&self) -> &Grid2D {
        self.u.grid()
    }

    fn check_admissible(&self) -> Result<()> {
        self.u.check_finite("initial u")?;
        self.v.check_finite("initial v")?;
        for field in [&self.u, &self.v] {
            let tol = 1e-13 * grid::lp_norm(field, f64::INFINITY)?;
            if let Some((index, &value)) = field.values().iter().enumerate().find(|(_, &x)| x < -tol) {
                return Err(KsfError::Domain { index, value });
            }
        }
        if !(self.t >= 0.0) {
            return Err(KsfError::param("t", format!("initial time must be >= 0, got {}", self.t)));
        }
        Ok(())
    }
}

/// Multiplicative time profile of the forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulation {
    Identity,
    /// `e^{−rate t}`
    ExponentialDecay { rate: f64 },
    /// `1 + amplitude sin(2π t / period)`
    Sinusoidal { amplitude: f64, period: f64 },
}

impl Modulation {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Modulation::Identity => 1.0,
            Modulation::ExponentialDecay { rate } => (-rate * t).exp(),
            Modulation::Sinusoidal { amplitude, period } => {
                1.0 + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
            }
        }
    }

    /// `sup_{t ≥ 0}` of the factor.
    pub fn sup(&self) -> f64 {
        match *self {
            Modulation::Identity | Modulation::ExponentialDecay { .. } => 1.0,
            Modulation::Sinusoidal { amplitude, .. } => 1.0 + amplitude,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Modulation::Identity => Ok(()),
            Modulation::ExponentialDecay { rate } if rate.is_finite() && rate >= 0.0 => Ok(()),
            Modulation::ExponentialDecay { rate } => {
                Err(KsfError::param("rate", format!("decay rate must be >= 0, got {rate}")))
            }
            Modulation::Sinusoidal { amplitude, period } => {
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(KsfError::param("amplitude", format!("need 0 <= amplitude < 1, got {amplitude}")));
                }
                if !(period > 0.0 && period.is_finite()) {
                    return Err(KsfError::param("period", format!("must be positive, got {period}")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingMode {
    Zero,
    ConstantInTime,
    TimeDependent,
}

/// External signal production `f(x, t) = base(x) · modulation(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    mode: ForcingMode,
    base: ScalarField,
    modulation: Modulation,
    base_l1: f64,
}

impl ForcingSpec {
    pub fn zero(grid: Grid2D) -> Self {
        Self {
            mode: ForcingMode::Zero,
            base: ScalarField::zeros(grid),
            modulation: Modulation::Identity,
            base_l1: 0.0,
        }
    }

    pub fn constant(base: ScalarField) -> Result<Self> {
        Self::build(ForcingMode::ConstantInTime, base, Modulation::Identity)
    }

    pub fn time_dependent(base: ScalarField, modulation: Modulation) -> Result<Self> {
        Self::build(ForcingMode::TimeDependent, base, modulation)
    }

    fn build(mode: ForcingMode, base: ScalarField, modulation: Modulation) -> Result<Self> {
        base.check_finite("forcing base")?;
        if let Some((index, &value)) = base.values().iter().enumerate().find(|(_, &x)| x < 0.0) {
            return Err(KsfError::Domain { index, value });
        }
        modulation.validate()?;
        let base_l1 = grid::integrate(&base)?;
        Ok(Self {
            mode,
            base,
            modulation,
            base_l1,
        })
    }

    pub fn mode(&self) -> ForcingMode {
        self.mode
    }

    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn is_constant_in_time(&self) -> bool {
        !matches!(self.mode, ForcingMode::TimeDependent)
    }

    pub fn factor(&self, t: f64) -> f64 {
        match self.mode {
            ForcingMode::Zero => 0.0,
            ForcingMode::ConstantInTime => 1.0,
            ForcingMode::TimeDependent => self.modulation.factor(t),
        }
    }

    pub fn sample(&self, t: f64) -> ScalarField {
        match self.mode {
            ForcingMode::Zero => ScalarField::zeros(*self.base.grid()),
            ForcingMode::ConstantInTime => self.base.clone(),
            ForcingMode::TimeDependent => self.base.scale(self.modulation.factor(t)),
        }
    }

    /// `‖f(·, t)‖_{L¹(Ω)}`
    pub fn l1_at(&self, t: f64) -> f64 {
        self.base_l1 * self.factor(t)
    }

    /// `sup_t ‖f(·, t)‖_{L^p(Ω)}`
    pub fn sup_lp(&self, p: f64) -> Result<f64> {
        let sup = match self.mode {
            ForcingMode::Zero => 0.0,
            ForcingMode::ConstantInTime => 1.0,
            ForcingMode::TimeDependent => self.modulation.sup(),
        };
        Ok(sup * grid::lp_norm(&self.base, p)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub blowup_sup_threshold: f64,
    pub snapshot_interval: f64,
    /// Exponent of the `W^{1,θ}` norm watched by the blow-up detector.
    pub theta: f64,
    /// Turns the transport term off, leaving two linear heat equations.
    pub chemotaxis: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            dt_init: 1e-3,
            dt_min: 1e-10,
            cfl_safety: 0.25,
            t_end: 1.0,
            blowup_sup_threshold: 1e9,
            snapshot_interval: 0.1,
            theta: 3.0,
            chemotaxis: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(KsfError::param(name, format!("must be positive and finite, got {x}")))
            }
        };
        positive("tau", self.tau)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("t_end", self.t_end)?;
        positive("snapshot_interval", self.snapshot_interval)?;
        positive("blowup_sup_threshold", self.blowup_sup_threshold)?;
        if !(self.dt_min < self.dt_init) {
            return Err(KsfError::param("dt_min", format!("must be below dt_init {}, got {}", self.dt_init, self.dt_min)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(KsfError::param("cfl_safety", format!("must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.theta >= 1.0) {
            return Err(KsfError::param("theta", format!("must be >= 1, got {}", self.theta)));
        }
        Ok(())
    }
}

/// Step size proposed by [`adaptive_dt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStep {
    pub dt: f64,
    /// The advective bound fell below `dt_min`; `dt` is then `dt_min`.
    pub underflow: bool,
}

const GRADIENT_FLOOR: f64 = 1e-12;

/// Advective CFL step `cfl · min(dx, dy) / max|∂v/∂n|`, clamped to `[dt_min, dt_init]`.
pub fn adaptive_dt(state: &State, cfg: &SolverConfig) -> TimeStep {
    let g = state.grid();
    let h = g.dx().min(g.dy());
    let vmax = if cfg.chemotaxis {
        max_face_gradient(&state.v).max(GRADIENT_FLOOR)
    } else {
        GRADIENT_FLOOR
    };
    let raw = cfg.cfl_safety * h / vmax;
    if !(raw >= cfg.dt_min) {
        return TimeStep {
            dt: cfg.dt_min,
            underflow: true,
        };
    }
    TimeStep {
        dt: raw.min(cfg.dt_init),
        underflow: false,
    }
}

/// `‖u‖_∞ + ‖v‖_{W^{1,θ}}`, the quantity whose divergence characterises blow-up.
pub fn blowup_indicator(state: &State, theta: f64) -> Result<f64> {
    Ok(grid::lp_norm(&state.u, f64::INFINITY)? + grid::w1p_norm(&state.v, theta)?)
}

/// True when the blow-up indicator exceeds the configured threshold or is not finite.
pub fn detect_blowup(state: &State, theta: f64, cfg: &SolverConfig) -> bool {
    if !state.u.is_finite() || !state.v.is_finite() {
        return true;
    }
    match blowup_indicator(state, theta) {
        Ok(x) => x > cfg.blowup_sup_threshold,
        Err(_) => true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlowupReason {
    Threshold { indicator: f64 },
    TimeStepUnderflow { dt: f64 },
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Blowup { t_detect: f64, reason: BlowupReason },
}

impl RunStatus {
    pub fn is_blowup(&self) -> bool {
        matches!(self, RunStatus::Blowup { .. })
    }

    pub fn t_detect(&self) -> Option<f64> {
        match self {
            RunStatus::Completed => None,
            RunStatus::Blowup { t_detect, .. } => Some(*t_detect),
        }
    }
}

/// Output of [`Solver::run`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at `t = 0, Δ, 2Δ, …` with `Δ` the snapshot interval.
    pub snapshots: Vec<State>,
    /// One record for the initial state and one per accepted step.
    pub records: Vec<DiagnosticsRecord>,
    /// Ledger observables, aligned with `records`.
    pub aux: Vec<AuxObservables>,
    pub dt_history: Vec<f64>,
    pub final_state: State,
    pub status: RunStatus,
    pub warnings: Vec<String>,
    pub config: SolverConfig,
    pub forcing: ForcingSpec,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.snapshots[0]
    }
}

/// Time stepper bound to one grid, configuration and forcing.
#[derive(Debug, Clone)]
pub struct Solver {
    basis: CosineBasis,
    cfg: SolverConfig,
    forcing: ForcingSpec,
}

impl Solver {
    pub fn new(cfg: SolverConfig, forcing: ForcingSpec) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            basis: CosineBasis::new(*forcing.base().grid()),
            cfg,
            forcing,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.forcing
    }

    pub fn basis(&self) -> &CosineBasis {
        &self.basis
    }

    /// One IMEX step of size `dt` from `state`.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        if !(dt >= self.cfg.dt_min) {
            return Err(KsfError::TimeStepUnderflow {
                t: state.t,
                dt,
                dt_min: self.cfg.dt_min,
            });
        }
        state.u.check_same_grid(self.forcing.base())?;
        let tau = self.cfg.tau;

        let u_star = if self.cfg.chemotaxis {
            let div = flux_divergence(&chemotactic_flux(&state.u, &state.v)?);
            state.u.lin_comb(1.0, &div, -dt)?
        } else {
            state.u.clone()
        };
        let u_new = self.basis.apply_multiplier(&u_star, |mu| 1.0 / (1.0 + dt * mu))?;

        let source = u_new.lin_comb(1.0, &self.forcing.sample(state.t), 1.0)?;
        let rhs = state.v.lin_comb(1.0, &source, dt / tau)?;
        let v_new = self
            .basis
            .apply_multiplier(&rhs, |mu| 1.0 / (1.0 + dt / tau * (mu + 1.0)))?;

        Ok(State {
            u: u_new,
            v: v_new,
            t: state.t + dt,
        })
    }

    pub fn adaptive_dt(&self, state: &State) -> TimeStep {
        adaptive_dt(state, &self.cfg)
    }

    /// Advances `initial` to `t_end` or until blow-up is declared.
    pub fn run(&self, initial: State) -> Result<Trajectory> {
        initial.check_admissible()?;
        initial.u.check_same_grid(self.forcing.base())?;
        let cfg = &self.cfg;
        let mut recorder = Recorder::new(&initial, &self.forcing, cfg.tau, cfg.theta)?;
        let mut records = vec![recorder.initial_record(&initial)?];
        let mut aux = vec![recorder.last_aux()];
        let mut snapshots = vec![initial.clone()];
        let mut dt_history = Vec::new();
        let mut warnings = Vec::new();
        let mut state = initial;
        let mut status = RunStatus::Completed;
        let mut next_snap = 1usize;
        let t0 = state.t;

        let eps_t = 1e-12 * cfg.t_end.max(1.0);
        while state.t < cfg.t_end - eps_t {
            let proposal = self.adaptive_dt(&state);
            if proposal.underflow {
                status = RunStatus::Blowup {
                    t_detect: state.t,
                    reason: BlowupReason::TimeStepUnderflow { dt: proposal.dt },
                };
                break;
            }
            let snap_time = t0 + next_snap as f64 * cfg.snapshot_interval;
            let target = snap_time.min(cfg.t_end);
            let mut dt = proposal.dt;
            let mut lands = false;
            if state.t + dt >= target - eps_t {
                dt = target - state.t;
                lands = true;
            }
            let mut next = self.step(&state, dt)?;
            if lands {
                next.t = target;
            }

            if !next.u.is_finite() || !next.v.is_finite() {
                warnings.push(format!(
                    "non-finite values appeared at t = {} before the blow-up threshold was crossed",
                    next.t
                ));
                status = RunStatus::Blowup {
                    t_detect: next.t,
                    reason: BlowupReason::NonFinite,
                };
                state = next;
                break;
            }

            let record = recorder.record(&next, &state, dt)?;
            let indicator = record.u_linf + record.v_w1theta;
            records.push(record);
            aux.push(recorder.last_aux());
            dt_history.push(dt);

            if lands && (target - snap_time).abs() <= eps_t {
                snapshots.push(next.clone());
                next_snap += 1;
            }
            state = next;

            if indicator > cfg.blowup_sup_threshold {
                status = RunStatus::Blowup {
                    t_detect: state.t,
                    reason: BlowupReason::Threshold { indicator },
                };
                break;
            }
        }

        Ok(Trajectory {
            snapshots,
            records,
            aux,
            dt_history,
            final_state: state,
            status,
            warnings,
            config: self.cfg.clone(),
            forcing: self.forcing.clone(),
        })
    }
}

/// One step of size `dt` (builds a throwaway [`Solver`]).
pub fn step(state: &State, cfg: &SolverConfig, forcing: &ForcingSpec, dt: f64) -> Result<State> {
    Solver::new(cfg.clone(), forcing.clone())?.step(state, dt)
}

/// Runs the solver from `initial`.
pub fn run(initial: State, cfg: &SolverConfig, forcing: &ForcingSpec) -> Result<Trajectory> {
    Solver::new(cfg.clone(), forcing.clone())?.run(initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use std::f64::consts::PI;

    fn grid() -> Grid2D {
        Grid2D::unit_square(32).unwrap()
    }

    #[test]
    fn homogeneous_state_is_a_fixed_point() {
        let g = grid();
        let c = 1.7;
        let s = State::new(ScalarField::constant(g, c), ScalarField::constant(g, c), 0.0).unwrap();
        let cfg = SolverConfig::default();
        let next = step(&s, &cfg, &ForcingSpec::zero(g), 1e-2).unwrap();
        for (a, b) in next.u.values().iter().chain(next.v.values()).zip(s.u.values().iter().chain(s.v.values())) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn forced_steady_state() {
        let g = grid();
        let c = 0.8;
        let s = State::new(ScalarField::zeros(g), ScalarField::constant(g, c), 0.0).unwrap();
        let f = ForcingSpec::constant(ScalarField::constant(g, c)).unwrap();
        let next = step(&s, &SolverConfig::default(), &f, 5e-3).unwrap();
        assert!(next.u.values().iter().all(|&x| x.abs() < 1e-15));
        assert!(next.v.values().iter().all(|&x| (x - c).abs() < 1e-14));
    }

    #[test]
    fn heat_step_matches_resolvent() {
        let g = grid();
        let cfg = SolverConfig { chemotaxis: false, ..Default::default() };
        let u0 = ScalarField::from_fn(g, |x, _| (PI * x).cos());
        let mu = 2.0 / (g.dx() * g.dx()) * (1.0 - (PI / 32.0).cos());
        let dt = 1e-3;
        let s = State::new(u0.clone(), ScalarField::zeros(g), 0.0).unwrap();
        let next = step(&s, &cfg, &ForcingSpec::zero(g), dt).unwrap();
        for (a, b) in next.u.values().iter().zip(u0.values()) {
            assert!((a - b / (1.0 + dt * mu)).abs() < 1e-13);
        }
    }

    #[test]
    fn underflow_is_an_error() {
        let g = grid();
        let s = State::new(ScalarField::zeros(g), ScalarField::zeros(g), 0.0).unwrap();
        let r = step(&s, &SolverConfig::default(), &ForcingSpec::zero(g), 1e-12);
        assert!(matches!(r, Err(KsfError::TimeStepUnderflow { .. })));
    }

    #[test]
    fn adaptive_dt_formula() {
        let g = Grid2D::unit_square(100).unwrap();
        let cfg = SolverConfig { cfl_safety: 0.5, dt_init: 1.0, ..Default::default() };
        // face gradient 10 everywhere along x
        let v = ScalarField::from_fn(g, |x, _| 10.0 * x);
        let s = State::new(ScalarField::zeros(g), v, 0.0).unwrap();
        let ts = adaptive_dt(&s, &cfg);
        assert!(!ts.underflow);
        assert!((ts.dt - 5e-4).abs() < 1e-12);

        let flat = State::new(ScalarField::zeros(g), ScalarField::constant(g, 3.0), 0.0).unwrap();
        assert_eq!(adaptive_dt(&flat, &cfg).dt, 1.0);

        let steep = State::new(ScalarField::zeros(g), ScalarField::from_fn(g, |x, _| 1e12 * x), 0.0).unwrap();
        let ts = adaptive_dt(&steep, &cfg);
        assert!(ts.underflow);
        assert_eq!(ts.dt, cfg.dt_min);
    }

    #[test]
    fn blowup_detection() {
        let g = grid();
        let cfg = SolverConfig { blowup_sup_threshold: 1e3, ..Default::default() };
        let calm = State::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0), 0.0).unwrap();
        assert!(!detect_blowup(&calm, 3.0, &cfg));
        let mut u = ScalarField::zeros(g);
        u.values_mut()[17] = 2e3;
        let spike = State::new(u, ScalarField::zeros(g), 0.0).unwrap();
        assert!(detect_blowup(&spike, 3.0, &cfg));
    }

    #[test]
    fn zero_density_stays_zero() {
        let g = grid();
        let cfg = SolverConfig { t_end: 0.5, dt_init: 1e-2, snapshot_interval: 0.1, ..Default::default() };
        let f = ForcingSpec::constant(ScalarField::from_fn(g, |x, y| 1.0 + x * y)).unwrap();
        let s = State::new(ScalarField::zeros(g), ScalarField::zeros(g), 0.0).unwrap();
        let traj = run(s, &cfg, &f).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert!(traj.final_state.u.values().iter().all(|&x| x == 0.0));
        // ‖v‖₁ relaxes towards ‖f‖₁ = 1.25
        let vl1 = integrate(&traj.final_state.v).unwrap();
        assert!(vl1 > 0.3 && vl1 < 1.25);
        assert_eq!(traj.snapshots.len(), 6);
        for (k, s) in traj.snapshots.iter().enumerate() {
            assert!((s.t - 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_initial_density() {
        let g = grid();
        let mut u = ScalarField::constant(g, 1.0);
        u.values_mut()[3] = -0.5;
        let s = State::new(u, ScalarField::zeros(g), 0.0).unwrap();
        assert!(run(s, &SolverConfig::default(), &ForcingSpec::zero(g)).is_err());
    }

    #[test]
    fn forcing_validation() {
        let g = grid();
        assert!(ForcingSpec::constant(ScalarField::constant(g, -1.0)).is_err());
        let base = ScalarField::constant(g, 1.0);
        assert!(ForcingSpec::time_dependent(base.clone(), Modulation::Sinusoidal { amplitude: 1.0, period: 1.0 }).is_err());
        let f = ForcingSpec::time_dependent(base, Modulation::Sinusoidal { amplitude: 0.5, period: 2.0 }).unwrap();
        assert!((f.l1_at(0.5) - 1.5).abs() < 1e-14);
        assert!((f.sup_lp(2.0).unwrap() - 1.5).abs() < 1e-14);
        assert!(!f.is_constant_in_time());
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { tau: -1.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(KsfError::Parameter { name: "tau", .. })));
        let bad = SolverConfig { dt_min: 1.0, dt_init: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
