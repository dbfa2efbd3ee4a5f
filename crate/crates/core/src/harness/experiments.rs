//! The batch experiments behind the command-line front end.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ForcingKind, Profile};
use super::output::fmt_f64;
use crate::diagnostics::{self, DecayCheckParams, DecayFit, LedgerReport};
use crate::error::{KsfError, Result};
use crate::grid::{self, Grid2D, ScalarField};
use crate::inequalities::{self, FieldSampler, InequalityReport};
use crate::semigroup::{self, CosineBasis, SemigroupParams};
use crate::solver::{ForcingSpec, RunStatus, Solver, State, Trajectory};

fn config_err(key: &str, reason: impl Into<String>) -> KsfError {
    KsfError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// `(u₀, v₀)` at `t = 0` as described by the configuration.
pub fn initial_state(cfg: &ExperimentConfig) -> Result<State> {
    State::new(cfg.initial.u0.build(cfg.grid)?, cfg.initial.v0.build(cfg.grid)?, 0.0)
}

/// A single trajectory with its bounds ledger.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub ledger: LedgerReport,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let forcing = cfg.forcing.build(cfg.grid)?;
    let trajectory = Solver::new(cfg.solver.clone(), forcing)?.run(initial_state(cfg)?)?;
    let ledger = diagnostics::bounds_ledger(&trajectory)?;
    Ok(RunOutput { trajectory, ledger })
}

/// One row of the critical-mass sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mass_factor: f64,
    pub mass: f64,
    pub status: Option<RunStatus>,
    pub ledger_plateau: Option<bool>,
    pub flagged: Vec<&'static str>,
    pub energy_monotone: Option<bool>,
    pub final_energy: Option<f64>,
    pub steps: usize,
    pub error: Option<String>,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "mass_factor,mass,status,t_detect,ledger_plateau,flagged,energy_monotone,final_energy,steps,error";

    pub fn t_detect(&self) -> Option<f64> {
        self.status.as_ref().and_then(RunStatus::t_detect)
    }

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let optb = |x: Option<bool>| x.map(|b| b.to_string()).unwrap_or_default();
        let status = match &self.status {
            None => "error",
            Some(RunStatus::Completed) => "completed",
            Some(RunStatus::Blowup { .. }) => "blowup",
        };
        format!(
            "{},{},{status},{},{},{},{},{},{},{}",
            fmt_f64(self.mass_factor),
            fmt_f64(self.mass),
            opt(self.t_detect()),
            optb(self.ledger_plateau),
            self.flagged.join(";"),
            optb(self.energy_monotone),
            opt(self.final_energy),
            self.steps,
            self.error.as_deref().unwrap_or("").replace(',', ";"),
        )
    }
}

/// Tolerance of the per-step energy monotonicity check.
pub const ENERGY_MONOTONE_TOL: f64 = 1e-8;

fn sweep_row(cfg: &ExperimentConfig, forcing: &ForcingSpec, factor: f64) -> SweepRow {
    let mass = factor * 4.0 * PI;
    let mut row = SweepRow {
        mass_factor: factor,
        mass,
        status: None,
        ledger_plateau: None,
        flagged: Vec::new(),
        energy_monotone: None,
        final_energy: None,
        steps: 0,
        error: None,
    };
    let Profile::Gaussian { center, width, .. } = cfg.initial.u0 else {
        unreachable!("checked by mass_sweep");
    };
    let run = || -> Result<Trajectory> {
        let u0 = Profile::Gaussian { center, width, mass }.build(cfg.grid)?;
        let v0 = cfg.initial.v0.build(cfg.grid)?;
        Solver::new(cfg.solver.clone(), forcing.clone())?.run(State::new(u0, v0, 0.0)?)
    };
    match run().and_then(|t| diagnostics::bounds_ledger(&t).map(|l| (t, l))) {
        Ok((traj, ledger)) => {
            row.ledger_plateau = Some(ledger.all_plateau());
            row.flagged = ledger.flagged();
            row.energy_monotone = Some(diagnostics::first_energy_increase(&traj.records, ENERGY_MONOTONE_TOL).is_none());
            row.final_energy = traj.records.last().map(|r| r.energy_w);
            row.steps = traj.dt_history.len();
            row.status = Some(traj.status);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the solver once per configured mass (Gaussian `u₀`, constant-in-time forcing).
///
/// Rows come back in configuration order whatever the thread count; a failing
/// run is recorded in its row and does not stop the sweep.
pub fn mass_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if !matches!(cfg.initial.u0, Profile::Gaussian { .. }) {
        return Err(config_err("initial.u0.profile", "the mass sweep needs a gaussian u0"));
    }
    if cfg.forcing.kind == ForcingKind::TimeDependent {
        return Err(config_err("forcing.kind", "the mass sweep needs constant-in-time forcing"));
    }
    let forcing = cfg.forcing.build(cfg.grid)?;
    Ok(cfg
        .sweep
        .mass_factors
        .par_iter()
        .map(|&m| sweep_row(cfg, &forcing, m))
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{}\n", SweepRow::CSV_HEADER);
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Rescales the configured profiles so that `‖u₀‖_{q₀}`, `‖∇v₀‖_θ` and
/// `sup_t ‖f(t)‖_{q₀}` all equal `epsilon`, with `q₀ = 1 + δ₀`.
pub fn small_data_setup(cfg: &ExperimentConfig, epsilon: f64) -> Result<(State, ForcingSpec)> {
    let q0 = 1.0 + cfg.small_data.delta0;
    let theta = cfg.solver.theta;
    let g = cfg.grid;
    let scale_to = |field: ScalarField, norm: f64, key: &str| -> Result<ScalarField> {
        if epsilon == 0.0 {
            return Ok(ScalarField::zeros(g));
        }
        if !(norm > 0.0) {
            return Err(config_err(key, "profile has zero norm and cannot be scaled to epsilon"));
        }
        Ok(field.scale(epsilon / norm))
    };
    let u_raw = cfg.initial.u0.build(g)?;
    let u0 = scale_to(u_raw.clone(), grid::lp_norm(&u_raw, q0)?, "initial.u0.profile")?;
    let v_raw = cfg.initial.v0.build(g)?;
    let v0 = scale_to(v_raw.clone(), grid::w1p_seminorm(&v_raw, theta)?, "initial.v0.profile")?;
    let forcing = match cfg.forcing.kind {
        ForcingKind::Zero => ForcingSpec::zero(g),
        _ => {
            let raw = cfg.forcing.build(g)?;
            let base = scale_to(raw.base().clone(), raw.sup_lp(q0)?, "forcing.profile")?;
            match cfg.forcing.kind {
                ForcingKind::Constant => ForcingSpec::constant(base)?,
                _ => ForcingSpec::time_dependent(base, cfg.forcing.modulation)?,
            }
        }
    };
    Ok((State::new(u0, v0, 0.0)?, forcing))
}

#[derive(Debug, Clone)]
pub struct SmallDataRun {
    pub epsilon: f64,
    pub status: RunStatus,
    pub fit_u: DecayFit,
    pub fit_v: DecayFit,
}

#[derive(Debug, Clone)]
pub struct SmallDataReport {
    pub primary: SmallDataRun,
    pub halved: Option<SmallDataRun>,
}

impl SmallDataReport {
    /// `C_u(ε) / C_u(ε/2)`, when both are available and nonzero.
    pub fn c_u_ratio(&self) -> Option<f64> {
        let h = self.halved.as_ref()?;
        (h.fit_u.constant > 0.0).then(|| self.primary.fit_u.constant / h.fit_u.constant)
    }

    /// Every run completed and, when present, the ε/2 constant is within a factor 4.
    pub fn passed(&self) -> bool {
        let completed = |r: &SmallDataRun| matches!(r.status, RunStatus::Completed);
        completed(&self.primary)
            && self.halved.as_ref().is_none_or(completed)
            && self.c_u_ratio().is_none_or(|q| (0.25..=4.0).contains(&q))
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("epsilon,status,c_u,worst_t_u,c_v,worst_t_v\n");
        for r in std::iter::once(&self.primary).chain(self.halved.as_ref()) {
            let status = if r.status.is_blowup() { "blowup" } else { "completed" };
            let _ = writeln!(
                out,
                "{},{status},{},{},{},{}",
                fmt_f64(r.epsilon),
                fmt_f64(r.fit_u.constant),
                fmt_f64(r.fit_u.worst_t),
                fmt_f64(r.fit_v.constant),
                fmt_f64(r.fit_v.worst_t)
            );
        }
        out
    }

    /// `g(t)` series of the primary run.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,g_u,g_v\n");
        for ((t, gu), (_, gv)) in self.primary.fit_u.series.iter().zip(&self.primary.fit_v.series) {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*gu), fmt_f64(*gv));
        }
        out
    }
}

fn small_data_run(cfg: &ExperimentConfig, epsilon: f64) -> Result<SmallDataRun> {
    let (state, forcing) = small_data_setup(cfg, epsilon)?;
    let traj = Solver::new(cfg.solver.clone(), forcing)?.run(state)?;
    let p = DecayCheckParams::new(cfg.solver.theta, cfg.small_data.delta0, cfg.small_data.r, 2, epsilon)?;
    Ok(SmallDataRun {
        epsilon,
        status: traj.status.clone(),
        fit_u: diagnostics::decay_check_u(&traj, &p)?,
        fit_v: diagnostics::decay_check_v(&traj, &p, cfg.solver.tau)?,
    })
}

/// Small-data decay experiment, optionally repeated at `ε/2`.
pub fn small_data_experiment(cfg: &ExperimentConfig) -> Result<SmallDataReport> {
    if cfg.solver.t_end < 10.0 {
        return Err(config_err("solver.t_end", "the small-data experiment needs t_end >= 10"));
    }
    let eps = cfg.small_data.epsilon;
    let runs: Vec<Result<SmallDataRun>> = if cfg.small_data.halving && eps > 0.0 {
        [eps, 0.5 * eps].par_iter().map(|&e| small_data_run(cfg, e)).collect()
    } else {
        vec![small_data_run(cfg, eps)]
    };
    let mut runs = runs.into_iter();
    let primary = runs.next().expect("at least one run")?;
    let halved = runs.next().transpose()?;
    Ok(SmallDataReport { primary, halved })
}

/// Fitted constants of one inequality on the coarse and fine grids.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementCheck {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySuite {
    pub reports: Vec<InequalityReport>,
    pub refinement: Vec<RefinementCheck>,
}

impl InequalitySuite {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| !r.violated && r.worst_ratio.is_finite())
            && self.refinement.iter().all(|r| r.stable)
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", InequalityReport::CSV_HEADER);
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn refinement_csv(&self) -> String {
        let mut out = String::from("name,coarse,fine,relative_change,stable\n");
        for r in &self.refinement {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name,
                fmt_f64(r.coarse),
                fmt_f64(r.fine),
                fmt_f64(r.relative_change),
                r.stable
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let _ = writeln!(out, "{}", r.summary());
        }
        for r in &self.refinement {
            let verdict = if r.stable { "stable" } else { "UNSTABLE" };
            let _ = writeln!(
                out,
                "{:<28} coarse={:<22} fine={:<22} change={:.3e} {verdict}",
                r.name, r.coarse, r.fine, r.relative_change
            );
        }
        out
    }
}

fn refinement(name: String, coarse: &InequalityReport, fine: &InequalityReport, tol: f64) -> RefinementCheck {
    let relative_change = (coarse.worst_ratio - fine.worst_ratio).abs() / fine.worst_ratio.abs().max(f64::MIN_POSITIVE);
    RefinementCheck {
        name,
        coarse: coarse.worst_ratio,
        fine: fine.worst_ratio,
        relative_change,
        stable: coarse.worst_ratio.is_finite() && fine.worst_ratio.is_finite() && relative_change <= tol,
    }
}

/// Young and implicit-bound audits plus Trudinger–Moser and Biler fits on two grids.
pub fn verify_inequalities(cfg: &ExperimentConfig) -> Result<InequalitySuite> {
    let p = &cfg.inequalities;
    let coarse = Grid2D::new(p.coarse, p.coarse, cfg.grid.lx(), cfg.grid.ly())?;
    let fine = Grid2D::new(p.fine, p.fine, cfg.grid.lx(), cfg.grid.ly())?;
    let sampler = FieldSampler::new(cfg.seed, p.amplitude);
    let mut reports = vec![
        inequalities::young_audit(p.young_samples, cfg.seed)?,
        inequalities::malpha_audit(p.malpha_samples, cfg.seed)?,
    ];
    let mut checks = Vec::new();
    let tm_c = inequalities::trudinger_moser_check(&sampler, coarse, p.field_samples)?;
    let tm_f = inequalities::trudinger_moser_check(&sampler, fine, p.field_samples)?;
    checks.push(refinement("trudinger_moser".into(), &tm_c, &tm_f, p.refinement_tolerance));
    reports.extend([tm_c, tm_f]);
    for &bp in &p.biler_p {
        for &be in &p.biler_eps {
            let c = inequalities::biler_check(&sampler, coarse, bp, be, p.field_samples)?;
            let f = inequalities::biler_check(&sampler, fine, bp, be, p.field_samples)?;
            checks.push(refinement(format!("biler_p{bp}_eps{be}"), &c, &f, p.refinement_tolerance));
            reports.extend([c, f]);
        }
    }
    Ok(InequalitySuite {
        reports,
        refinement: checks,
    })
}

/// One numeric check: `value ≤ limit` unless stated otherwise in its name.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value >= limit,
        }
    }
}

pub fn checks_csv(checks: &[CheckOutcome]) -> String {
    let mut out = String::from("name,value,limit,pass\n");
    for c in checks {
        let _ = writeln!(out, "{},{},{},{}", c.name, fmt_f64(c.value), fmt_f64(c.limit), c.pass);
    }
    out
}

fn random_field(g: Grid2D, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_values(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("sized")
}

fn rel_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    let scale = a.values().iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Relative tolerance of the semigroup identities.
pub const SEMIGROUP_TOL: f64 = 1e-12;

/// Semigroup identities on random fields, `λ₁` convergence and the convolution bound.
pub fn verify_semigroup(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let g = cfg.grid;
    let basis = CosineBasis::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut law, mut mass, mut maxp, mut decay) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..8 {
        let f = random_field(g, &mut rng);
        for (s, t) in [(0.1, 0.5), (0.5, 0.1), (0.1, 0.1), (0.5, 0.5)] {
            let two = basis.heat(&basis.heat(&f, s)?, t)?;
            law = law.max(rel_diff(&basis.heat(&f, s + t)?, &two));
        }
        let l1 = grid::lp_norm(&f, 1.0)?;
        let sup = grid::lp_norm(&f, f64::INFINITY)?;
        let mean = f.mean();
        let z = f.map(|x| x - mean);
        let z2 = grid::lp_norm(&z, 2.0)?;
        for t in [1e-4, 1e-2, 0.1, 0.5, 1.0] {
            let h = basis.heat(&f, t)?;
            mass = mass.max((grid::integrate(&h)? - grid::integrate(&f)?).abs() / l1);
            maxp = maxp.max(grid::lp_norm(&h, f64::INFINITY)? / sup - 1.0);
            let hz = grid::lp_norm(&basis.heat(&z, t)?, 2.0)?;
            decay = decay.max(hz / ((-basis.lambda1() * t).exp() * z2) - 1.0);
        }
    }
    let mut checks = vec![
        CheckOutcome::at_most("semigroup_property", law, SEMIGROUP_TOL),
        CheckOutcome::at_most("mass_invariance", mass, SEMIGROUP_TOL),
        CheckOutcome::at_most("maximum_principle_excess", maxp, SEMIGROUP_TOL),
        CheckOutcome::at_most("zero_mean_decay_excess", decay, SEMIGROUP_TOL),
    ];

    let errs: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| Grid2D::new(n, n, PI, PI).map(|g| (semigroup::lambda1(&g) - 1.0).abs()))
        .collect::<Result<_>>()?;
    let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
    checks.push(CheckOutcome::at_least("lambda1_convergence_order", order, 1.9));

    let e = (-1.0f64).exp();
    let closed = (semigroup::singular_kernel_integral(0.0, 0.0, 2.0, 1.0, 1.0)? - (e - e * e)).abs();
    checks.push(CheckOutcome::at_most("convolution_closed_form_error", closed, 1e-8));
    let quarters = [0.0, 0.25, 0.5, 0.75];
    let mut worst = 0.0f64;
    for &a in &quarters {
        for &b in &quarters {
            for (gamma, delta) in [(2.0, 1.0), (1.0, 2.0)] {
                let p = SemigroupParams::new(a, b, gamma, delta)?;
                worst = worst.max(semigroup::convolution_bound_check(&p, &[0.1, 1.0, 10.0, 50.0])?);
            }
        }
    }
    checks.push(CheckOutcome::at_most("convolution_empirical_constant", worst, 1e3));
    Ok(checks)
}
