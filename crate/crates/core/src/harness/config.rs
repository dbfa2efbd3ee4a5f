//! Experiment configuration: flat `key = value` lines with dotted section
//! prefixes, e.g.
//!
//! ```text
//! kind = mass-sweep
//! grid.n = 128
//! solver.tau = 1.0
//! initial.u0.profile = gaussian
//! initial.u0.width = 0.05
//! sweep.mass_factors = 0.5, 0.9, 1.5, 3.0
//! ```
//!
//! `#` starts a comment. Unknown keys, malformed values and violated parameter
//! ranges are reported with the offending key.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{KsfError, Result};
use crate::grid::{self, Grid2D, ScalarField};
use crate::solver::{ForcingSpec, Modulation, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Run,
    MassSweep,
    SmallData,
    VerifyInequalities,
    VerifySemigroup,
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "run" => Self::Run,
            "mass-sweep" | "sweep" => Self::MassSweep,
            "small-data" | "smalldata" => Self::SmallData,
            "verify-inequalities" | "verify-ineq" => Self::VerifyInequalities,
            "verify-semigroup" => Self::VerifySemigroup,
            _ => return Err(format!("unknown experiment kind `{s}`")),
        })
    }
}

/// Spatial profile for `u₀`, `v₀` or the forcing base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `exp(−|x − c|²/(2w²))`, rescaled so the discrete integral equals `mass`.
    Gaussian { center: (f64, f64), width: f64, mass: f64 },
    Constant { value: f64 },
    /// `base + amplitude·cos(jπx/Lx)cos(kπy/Ly)` with `amplitude ≤ base`.
    ModePerturbed { base: f64, mode: (usize, usize), amplitude: f64 },
}

impl Profile {
    pub fn build(&self, grid: Grid2D) -> Result<ScalarField> {
        match *self {
            Profile::Gaussian { center, width, mass } => {
                let raw = ScalarField::from_fn(grid, |x, y| {
                    let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
                    (-r2 / (2.0 * width * width)).exp()
                });
                let total = grid::integrate(&raw)?;
                if !(total > 0.0) {
                    return Err(KsfError::param("width", format!("gaussian of width {width} vanishes on the grid")));
                }
                Ok(raw.scale(mass / total))
            }
            Profile::Constant { value } => Ok(ScalarField::constant(grid, value)),
            Profile::ModePerturbed { base, mode, amplitude } => {
                let (kx, ky) = (mode.0 as f64 * PI / grid.lx(), mode.1 as f64 * PI / grid.ly());
                Ok(ScalarField::from_fn(grid, |x, y| base + amplitude * (kx * x).cos() * (ky * y).cos()))
            }
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        match *self {
            Profile::Gaussian { width, mass, .. } => {
                if !(width > 0.0) {
                    return Err(config_err(format!("{key}.width"), "must be positive"));
                }
                if !(mass >= 0.0) {
                    return Err(config_err(format!("{key}.mass"), "must be >= 0"));
                }
            }
            Profile::Constant { value } => {
                if !(value >= 0.0) {
                    return Err(config_err(format!("{key}.value"), "must be >= 0"));
                }
            }
            Profile::ModePerturbed { base, amplitude, .. } => {
                if !(base >= 0.0) {
                    return Err(config_err(format!("{key}.base"), "must be >= 0"));
                }
                if !(amplitude.abs() <= base) {
                    return Err(config_err(format!("{key}.amplitude"), "|amplitude| must not exceed base"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub u0: Profile,
    pub v0: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    Zero,
    Constant,
    TimeDependent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingParams {
    pub kind: ForcingKind,
    pub profile: Profile,
    pub modulation: Modulation,
}

impl ForcingParams {
    pub fn build(&self, grid: Grid2D) -> Result<ForcingSpec> {
        match self.kind {
            ForcingKind::Zero => Ok(ForcingSpec::zero(grid)),
            ForcingKind::Constant => ForcingSpec::constant(self.profile.build(grid)?),
            ForcingKind::TimeDependent => ForcingSpec::time_dependent(self.profile.build(grid)?, self.modulation),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    /// Masses in units of `4π`.
    pub mass_factors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallDataParams {
    pub epsilon: f64,
    pub delta0: f64,
    pub r: f64,
    /// Also run at `ε/2` and compare the fitted constants.
    pub halving: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityParams {
    pub young_samples: usize,
    pub malpha_samples: usize,
    pub field_samples: usize,
    pub amplitude: f64,
    pub coarse: usize,
    pub fine: usize,
    pub biler_p: Vec<f64>,
    pub biler_eps: Vec<f64>,
    /// Allowed relative change of a fitted constant between the two grids.
    pub refinement_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: Grid2D,
    pub solver: SolverConfig,
    pub forcing: ForcingParams,
    pub initial: InitialSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub sweep: SweepParams,
    pub small_data: SmallDataParams,
    pub inequalities: InequalityParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Run,
            grid: Grid2D::unit_square(128).expect("valid default grid"),
            solver: SolverConfig::default(),
            forcing: ForcingParams {
                kind: ForcingKind::Zero,
                profile: Profile::Constant { value: 0.0 },
                modulation: Modulation::Identity,
            },
            initial: InitialSpec {
                u0: Profile::Gaussian { center: (0.5, 0.5), width: 0.1, mass: 2.0 * PI },
                v0: Profile::Constant { value: 0.0 },
            },
            output_dir: PathBuf::from("out"),
            seed: 0,
            sweep: SweepParams { mass_factors: vec![0.5, 0.9, 1.5, 3.0] },
            small_data: SmallDataParams { epsilon: 1e-3, delta0: 0.5, r: 2.0, halving: true },
            inequalities: InequalityParams {
                young_samples: 100_000,
                malpha_samples: 10_000,
                field_samples: 500,
                amplitude: 8.0,
                coarse: 64,
                fine: 128,
                biler_p: vec![2.0, 3.0, 4.0],
                biler_eps: vec![1.0, 0.1],
                refinement_tolerance: 0.2,
            },
        }
    }
}

fn config_err(key: impl Into<String>, reason: impl Into<String>) -> KsfError {
    KsfError::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Raw `key → (value, line)` table with access tracking.
struct Table {
    entries: BTreeMap<String, (String, usize)>,
    used: std::collections::BTreeSet<String>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_err(format!("line {}", no + 1), format!("expected `key = value`, got `{line}`")));
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(config_err(format!("line {}", no + 1), "empty key"));
            }
            let value = v.trim().trim_matches('"').to_string();
            if entries.insert(key.clone(), (value, no + 1)).is_some() {
                return Err(config_err(key, "duplicate key"));
            }
        }
        Ok(Self {
            entries,
            used: Default::default(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).map(|(v, _)| v.clone());
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| config_err(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse()
                        .map_err(|_| config_err(key, format!("cannot parse list item `{item}`")))
                })
                .collect(),
        }
    }

    fn pair<T: FromStr + Copy>(&mut self, key: &str, default: (T, T)) -> Result<(T, T)> {
        let items: Vec<T> = self.list(key, vec![default.0, default.1])?;
        match items.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(config_err(key, format!("expected two comma-separated values, got {}", items.len()))),
        }
    }

    fn unused(&self) -> Option<(&String, usize)> {
        self.entries
            .iter()
            .find(|(k, _)| !self.used.contains(*k))
            .map(|(k, (_, line))| (k, *line))
    }
}

fn parse_profile(t: &mut Table, prefix: &str, default: Profile) -> Result<Profile> {
    let default_name = match default {
        Profile::Gaussian { .. } => "gaussian",
        Profile::Constant { .. } => "constant",
        Profile::ModePerturbed { .. } => "mode",
    };
    let key = format!("{prefix}.profile");
    let name: String = t.get(&key, default_name.to_string())?;
    let profile = match name.as_str() {
        "gaussian" => {
            let (c, w, m) = match default {
                Profile::Gaussian { center, width, mass } => (center, width, mass),
                _ => ((0.5, 0.5), 0.1, 1.0),
            };
            let mut mass = t.get(&format!("{prefix}.mass"), m)?;
            if let Some(f) = t.raw(&format!("{prefix}.mass_factor")) {
                let f: f64 = f
                    .parse()
                    .map_err(|_| config_err(format!("{prefix}.mass_factor"), format!("cannot parse `{f}`")))?;
                mass = f * 4.0 * PI;
            }
            Profile::Gaussian {
                center: t.pair(&format!("{prefix}.center"), c)?,
                width: t.get(&format!("{prefix}.width"), w)?,
                mass,
            }
        }
        "constant" => {
            let v = match default {
                Profile::Constant { value } => value,
                _ => 0.0,
            };
            Profile::Constant {
                value: t.get(&format!("{prefix}.value"), v)?,
            }
        }
        "mode" | "mode-perturbed" => Profile::ModePerturbed {
            base: t.get(&format!("{prefix}.base"), 1.0)?,
            mode: t.pair(&format!("{prefix}.mode"), (1, 0))?,
            amplitude: t.get(&format!("{prefix}.amplitude"), 0.5)?,
        },
        other => return Err(config_err(key, format!("unknown profile `{other}`"))),
    };
    profile.validate(prefix)?;
    Ok(profile)
}

fn parse_modulation(t: &mut Table) -> Result<Modulation> {
    let name: String = t.get("forcing.modulation", "identity".to_string())?;
    match name.as_str() {
        "identity" => Ok(Modulation::Identity),
        "exponential-decay" => {
            let rate = t.get("forcing.rate", 1.0)?;
            if !(rate >= 0.0) {
                return Err(config_err("forcing.rate", "must be >= 0"));
            }
            Ok(Modulation::ExponentialDecay { rate })
        }
        "sinusoidal" => {
            let amplitude = t.get("forcing.modulation_amplitude", 0.5)?;
            let period = t.get("forcing.period", 1.0)?;
            if !(0.0..1.0).contains(&amplitude) {
                return Err(config_err("forcing.modulation_amplitude", "must lie in [0, 1)"));
            }
            if !(period > 0.0) {
                return Err(config_err("forcing.period", "must be positive"));
            }
            Ok(Modulation::Sinusoidal { amplitude, period })
        }
        other => Err(config_err("forcing.modulation", format!("unknown modulation `{other}`"))),
    }
}

/// Maps a solver parameter error back to its config key.
fn solver_key(name: &str) -> String {
    let key = match name {
        "blowup_sup_threshold" => "blowup_threshold",
        other => other,
    };
    format!("solver.{key}")
}

/// Parses configuration text; see the module docs for the format.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut t = Table::parse(text)?;
    let d = ExperimentConfig::default();

    let kind = match t.raw("kind") {
        None => d.kind,
        Some(v) => v.parse().map_err(|e: String| config_err("kind", e))?,
    };

    let n: Option<usize> = match t.raw("grid.n") {
        None => None,
        Some(v) => Some(v.parse().map_err(|_| config_err("grid.n", format!("cannot parse `{v}`")))?),
    };
    let nx = t.get("grid.nx", n.unwrap_or(d.grid.nx()))?;
    let ny = t.get("grid.ny", n.unwrap_or(d.grid.ny()))?;
    let lx = t.get("grid.lx", d.grid.lx())?;
    let ly = t.get("grid.ly", d.grid.ly())?;
    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| config_err("grid", e.to_string()))?;

    let ds = d.solver;
    let solver = SolverConfig {
        tau: t.get("solver.tau", ds.tau)?,
        dt_init: t.get("solver.dt_init", ds.dt_init)?,
        dt_min: t.get("solver.dt_min", ds.dt_min)?,
        cfl_safety: t.get("solver.cfl_safety", ds.cfl_safety)?,
        t_end: t.get("solver.t_end", ds.t_end)?,
        blowup_sup_threshold: t.get("solver.blowup_threshold", ds.blowup_sup_threshold)?,
        snapshot_interval: t.get("solver.snapshot_interval", ds.snapshot_interval)?,
        theta: t.get("solver.theta", ds.theta)?,
        chemotaxis: t.get("solver.chemotaxis", ds.chemotaxis)?,
    };
    solver.validate().map_err(|e| match e {
        KsfError::Parameter { name, reason } => config_err(solver_key(name), reason),
        other => other,
    })?;

    let forcing_kind = match t.get("forcing.kind", "zero".to_string())?.as_str() {
        "zero" => ForcingKind::Zero,
        "constant" => ForcingKind::Constant,
        "time-dependent" => ForcingKind::TimeDependent,
        other => return Err(config_err("forcing.kind", format!("unknown forcing kind `{other}`"))),
    };
    let forcing = ForcingParams {
        kind: forcing_kind,
        profile: parse_profile(&mut t, "forcing", d.forcing.profile)?,
        modulation: parse_modulation(&mut t)?,
    };

    let initial = InitialSpec {
        u0: parse_profile(&mut t, "initial.u0", d.initial.u0)?,
        v0: parse_profile(&mut t, "initial.v0", d.initial.v0)?,
    };

    let sweep = SweepParams {
        mass_factors: t.list("sweep.mass_factors", d.sweep.mass_factors.clone())?,
    };
    if let Some(bad) = sweep.mass_factors.iter().find(|m| !(**m > 0.0)) {
        return Err(config_err("sweep.mass_factors", format!("masses must be positive, got {bad}")));
    }

    let ds = d.small_data;
    let small_data = SmallDataParams {
        epsilon: t.get("smalldata.epsilon", ds.epsilon)?,
        delta0: t.get("smalldata.delta0", ds.delta0)?,
        r: t.get("smalldata.r", ds.r)?,
        halving: t.get("smalldata.halving", ds.halving)?,
    };
    if kind == ExperimentKind::SmallData {
        crate::diagnostics::DecayCheckParams::new(solver.theta, small_data.delta0, small_data.r, 2, small_data.epsilon)
            .map_err(|e| match e {
                KsfError::Parameter { name: "theta", reason } => config_err("solver.theta", reason),
                KsfError::Parameter { name, reason } => config_err(format!("smalldata.{name}"), reason),
                other => other,
            })?;
    }

    let di = d.inequalities;
    let inequalities = InequalityParams {
        young_samples: t.get("ineq.young_samples", di.young_samples)?,
        malpha_samples: t.get("ineq.malpha_samples", di.malpha_samples)?,
        field_samples: t.get("ineq.field_samples", di.field_samples)?,
        amplitude: t.get("ineq.amplitude", di.amplitude)?,
        coarse: t.get("ineq.coarse", di.coarse)?,
        fine: t.get("ineq.fine", di.fine)?,
        biler_p: t.list("ineq.biler_p", di.biler_p.clone())?,
        biler_eps: t.list("ineq.biler_eps", di.biler_eps.clone())?,
        refinement_tolerance: t.get("ineq.refinement_tolerance", di.refinement_tolerance)?,
    };
    if !(inequalities.amplitude > 0.0 && inequalities.amplitude <= crate::inequalities::TM_AMPLITUDE_CAP) {
        return Err(config_err(
            "ineq.amplitude",
            format!("must lie in (0, {}]", crate::inequalities::TM_AMPLITUDE_CAP),
        ));
    }
    if let Some(p) = inequalities.biler_p.iter().find(|p| !(**p >= 2.0)) {
        return Err(config_err("ineq.biler_p", format!("need p >= 2, got {p}")));
    }
    if let Some(e) = inequalities.biler_eps.iter().find(|e| !(**e > 0.0)) {
        return Err(config_err("ineq.biler_eps", format!("need eps > 0, got {e}")));
    }

    let output_dir = PathBuf::from(t.get("output_dir", d.output_dir.display().to_string())?);
    let seed = t.get("seed", d.seed)?;

    if let Some((key, line)) = t.unused() {
        return Err(config_err(key.clone(), format!("unknown key (line {line})")));
    }

    Ok(ExperimentConfig {
        kind,
        grid,
        solver,
        forcing,
        initial,
        output_dir,
        seed,
        sweep,
        small_data,
        inequalities,
    })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| KsfError::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: KsfError) -> String {
        match e {
            KsfError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str("kind = run\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.grid.nx(), 128);
        assert_eq!(c.solver.tau, 1.0);
    }

    #[test]
    fn full_config() {
        let text = "
            kind = mass-sweep   # comment
            seed = 7
            grid.n = 64
            grid.lx = 2.0
            solver.tau = 0.5
            solver.chemotaxis = false
            forcing.kind = time-dependent
            forcing.profile = constant
            forcing.value = 0.3
            forcing.modulation = sinusoidal
            forcing.period = 2.0
            initial.u0.mass_factor = 0.9
            initial.u0.center = 1.0, 0.5
            initial.v0.profile = mode
            initial.v0.mode = 2, 1
            initial.v0.base = 1.0
            initial.v0.amplitude = 0.25
            sweep.mass_factors = 0.5, 3.0
        ";
        let c = parse_config_str(text).unwrap();
        assert_eq!(c.kind, ExperimentKind::MassSweep);
        assert_eq!(c.seed, 7);
        assert_eq!((c.grid.nx(), c.grid.ny(), c.grid.lx()), (64, 64, 2.0));
        assert!(!c.solver.chemotaxis);
        assert_eq!(c.forcing.modulation, Modulation::Sinusoidal { amplitude: 0.5, period: 2.0 });
        assert_eq!(
            c.initial.u0,
            Profile::Gaussian { center: (1.0, 0.5), width: 0.1, mass: 0.9 * 4.0 * PI }
        );
        assert_eq!(c.initial.v0, Profile::ModePerturbed { base: 1.0, mode: (2, 1), amplitude: 0.25 });
        assert_eq!(c.sweep.mass_factors, vec![0.5, 3.0]);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(parse_config_str("solver.tau = -1").unwrap_err()), "solver.tau");
        assert_eq!(key_of(parse_config_str("solver.tua = 1").unwrap_err()), "solver.tua");
        assert_eq!(key_of(parse_config_str("grid.nx = many").unwrap_err()), "grid.nx");
        assert_eq!(key_of(parse_config_str("kind = dance").unwrap_err()), "kind");
        assert_eq!(key_of(parse_config_str("solver.dt_min = 1.0").unwrap_err()), "solver.dt_min");
        assert_eq!(key_of(parse_config_str("initial.u0.width = 0").unwrap_err()), "initial.u0.width");
        assert_eq!(
            key_of(parse_config_str("initial.v0.profile = mode\ninitial.v0.amplitude = 2").unwrap_err()),
            "initial.v0.amplitude"
        );
        assert_eq!(key_of(parse_config_str("solver.blowup_threshold = 0").unwrap_err()), "solver.blowup_threshold");
        assert_eq!(key_of(parse_config_str("seed = 1\nseed = 2").unwrap_err()), "seed");
        assert_eq!(key_of(parse_config_str("just words").unwrap_err()), "line 1");
    }

    #[test]
    fn theta_window_is_checked_for_small_data() {
        // 2 < 3 < (4 + 2)/(2 − 1) = 6
        let ok = "kind = small-data\nsolver.theta = 3\nsmalldata.delta0 = 0.5";
        assert!(parse_config_str(ok).is_ok());
        let bad = "kind = small-data\nsolver.theta = 6.5\nsmalldata.delta0 = 0.5";
        assert_eq!(key_of(parse_config_str(bad).unwrap_err()), "solver.theta");
        let bad = "kind = small-data\nsmalldata.r = 1";
        assert_eq!(key_of(parse_config_str(bad).unwrap_err()), "smalldata.r");
    }

    #[test]
    fn empty_mass_list_is_allowed() {
        let c = parse_config_str("sweep.mass_factors =").unwrap();
        assert!(c.sweep.mass_factors.is_empty());
    }

    #[test]
    fn gaussian_hits_mass_exactly() {
        let g = Grid2D::new(96, 80, 1.0, 1.3).unwrap();
        for (w, m) in [(0.05, 3.0 * 4.0 * PI), (0.2, 1.0), (0.01, 0.5)] {
            let f = Profile::Gaussian { center: (0.3, 0.9), width: w, mass: m }.build(g).unwrap();
            assert!((grid::integrate(&f).unwrap() - m).abs() <= 1e-12 * m);
            assert!(f.min() >= 0.0);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(parse_config(Path::new("/nonexistent/x.cfg")), Err(KsfError::Io { .. })));
    }
}
