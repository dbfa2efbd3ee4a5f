//! Randomised audits of the standalone inequalities: Young with its explicit
//! constant, the implicit bound `M ≤ C₁ + C₂M^β ⇒ M ≤ M₀`, Trudinger–Moser and
//! the Biler-type `Lᵖ` interpolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{KsfError, Result};
use crate::grid::{self, Grid2D, ScalarField};

/// Relative slack for roundoff when comparing explicit bounds.
pub const ROUNDOFF_SLACK: f64 = 1e-12;

/// Amplitude above which `e^{|v|}` samples are rejected.
pub const TM_AMPLITUDE_CAP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    /// `max lhs/rhs` for explicit constants, the fitted constant otherwise.
    pub worst_ratio: f64,
    pub violated: bool,
    pub witness: Option<String>,
}

impl InequalityReport {
    pub const CSV_HEADER: &'static str = "name,samples,worst_ratio,violated";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.name, self.samples, self.worst_ratio, self.violated)
    }

    pub fn summary(&self) -> String {
        let verdict = if self.violated { "VIOLATED" } else { "ok" };
        let mut s = format!("{:<28} n={:<7} worst={:<24} {verdict}", self.name, self.samples, self.worst_ratio);
        if let Some(w) = &self.witness {
            s.push_str(&format!("  [{w}]"));
        }
        s
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `(ab, εaᵖ + (εp)^{−q/p} q^{−1} b^q)` with `q = p/(p−1)`.
pub fn young_bound(a: f64, b: f64, eps: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(KsfError::param("p", format!("need p > 1, got {p}")));
    }
    if !(eps > 0.0) {
        return Err(KsfError::param("eps", format!("need eps > 0, got {eps}")));
    }
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(KsfError::param("a/b", format!("need a, b >= 0, got {a}, {b}")));
    }
    let q = p / (p - 1.0);
    // in logs: (εp)^{−q/p} b^q overflows/underflows separately for p near 1
    let second = if b == 0.0 {
        0.0
    } else {
        (-(q / p) * (eps * p).ln() - q.ln() + q * b.ln()).exp()
    };
    Ok((a * b, eps * a.powf(p) + second))
}

/// Random audit of [`young_bound`] over `a, b ∈ [0, 10]`, `ε ∈ [10⁻², 10]`, `p ∈ (1, 10]`.
pub fn young_audit(count: usize, seed: u64) -> Result<InequalityReport> {
    let draws: Vec<(f64, f64, f64, f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let a = rng.random_range(0.0..10.0);
            let b = rng.random_range(0.0..10.0);
            let eps = 10f64.powf(rng.random_range(-2.0..1.0));
            let p = 1.0 + rng.random_range(1e-3..9.0);
            let (lhs, rhs) = young_bound(a, b, eps, p)?;
            let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
            Ok((ratio, a, b, eps, p))
        })
        .collect::<Result<_>>()?;
    let worst = draws.iter().copied().fold((0.0, 0.0, 0.0, 0.0, 0.0), |w, d| if d.0 > w.0 { d } else { w });
    Ok(InequalityReport {
        name: "young".into(),
        samples: count,
        worst_ratio: worst.0,
        violated: worst.0 > 1.0 + ROUNDOFF_SLACK,
        witness: Some(format!("a={} b={} eps={} p={}", worst.1, worst.2, worst.3, worst.4)),
    })
}

fn check_malpha(c1: f64, c2: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(KsfError::param("beta", format!("need 0 < beta < 1, got {beta}")));
    }
    if !(c1 > 0.0) || !(c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(KsfError::param("c1/c2", format!("need positive constants, got {c1}, {c2}")));
    }
    Ok(())
}

/// `M₀ = 2C₁ + 2C₂ C(p,q) (2C₂)^{β/(1−β)}` with `p = 1/β` and `C(p,q) = (p−1)/p^{p/(p−1)}`:
/// every `M ≥ 0` with `M ≤ C₁ + C₂M^β` satisfies `M ≤ M₀`.
pub fn malpha_bound(c1: f64, c2: f64, beta: f64) -> Result<f64> {
    check_malpha(c1, c2, beta)?;
    let p = 1.0 / beta;
    let cpq = (p - 1.0) / p.powf(p / (p - 1.0));
    Ok(2.0 * c1 + 2.0 * c2 * cpq * (2.0 * c2).powf(beta / (1.0 - beta)))
}

/// Largest `M` with `M = C₁ + C₂M^β`, by bisection.
pub fn malpha_fixed_point(c1: f64, c2: f64, beta: f64) -> Result<f64> {
    check_malpha(c1, c2, beta)?;
    let g = |m: f64| m - c1 - c2 * m.powf(beta);
    // g(0) < 0 and g is convex, so the positive root is unique
    let mut lo = 0.0;
    let mut hi = (c1 + 1.0).max(1.0);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Random audit: the bisection root never exceeds [`malpha_bound`].
pub fn malpha_audit(count: usize, seed: u64) -> Result<InequalityReport> {
    let draws: Vec<(f64, f64, f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let c1 = 10f64.powf(rng.random_range(-3.0..3.0));
            let c2 = 10f64.powf(rng.random_range(-3.0..2.0));
            let beta = rng.random_range(0.01..0.95);
            let m_star = malpha_fixed_point(c1, c2, beta)?;
            let m0 = malpha_bound(c1, c2, beta)?;
            Ok((m_star / m0, c1, c2, beta))
        })
        .collect::<Result<_>>()?;
    let worst = draws.iter().copied().fold((0.0, 0.0, 0.0, 0.0), |w, d| if d.0 > w.0 { d } else { w });
    Ok(InequalityReport {
        name: "malpha".into(),
        samples: count,
        worst_ratio: worst.0,
        violated: worst.0 > 1.0 + ROUNDOFF_SLACK,
        witness: Some(format!("c1={} c2={} beta={}", worst.1, worst.2, worst.3)),
    })
}

/// Band-limited random fields `Σ c_jk cos(jπx/Lx) cos(kπy/Ly)` with
/// `|c_jk| ~ (1 + j² + k²)^{−decay/2}`, rescaled so `Σ|c_jk|` equals a random
/// amplitude in `(0, max_amplitude]`.
///
/// Coefficients depend only on the seed and sample index, never on the grid, so
/// the same sample can be evaluated at several resolutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSampler {
    pub seed: u64,
    pub max_mode: usize,
    pub decay: f64,
    pub max_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub index: usize,
    pub amplitude: f64,
    modes: Vec<(usize, usize, f64)>,
}

impl FieldSample {
    pub fn evaluate(&self, grid: Grid2D) -> ScalarField {
        let (lx, ly) = (grid.lx(), grid.ly());
        let pi = std::f64::consts::PI;
        let cx: Vec<Vec<f64>> = (0..=self.modes.iter().map(|m| m.0).max().unwrap_or(0))
            .map(|j| (0..grid.nx()).map(|i| (j as f64 * pi * grid.cell_center(i, 0).0 / lx).cos()).collect())
            .collect();
        let cy: Vec<Vec<f64>> = (0..=self.modes.iter().map(|m| m.1).max().unwrap_or(0))
            .map(|k| (0..grid.ny()).map(|l| (k as f64 * pi * grid.cell_center(0, l).1 / ly).cos()).collect())
            .collect();
        let mut values = vec![0.0; grid.len()];
        for &(j, k, c) in &self.modes {
            for l in 0..grid.ny() {
                let row = c * cy[k][l];
                for i in 0..grid.nx() {
                    values[l * grid.nx() + i] += row * cx[j][i];
                }
            }
        }
        ScalarField::from_values(grid, values).expect("grid-sized buffer")
    }

    pub fn describe(&self) -> String {
        format!("sample={} amplitude={}", self.index, self.amplitude)
    }
}

impl FieldSampler {
    pub fn new(seed: u64, max_amplitude: f64) -> Self {
        Self {
            seed,
            max_mode: 16,
            decay: 1.5,
            max_amplitude,
        }
    }

    pub fn sample(&self, index: usize) -> FieldSample {
        let mut rng = stream(self.seed, index as u64);
        let mut modes = Vec::with_capacity((self.max_mode + 1) * (self.max_mode + 1));
        for k in 0..=self.max_mode {
            for j in 0..=self.max_mode {
                let w = (1.0 + (j * j + k * k) as f64).powf(-0.5 * self.decay);
                modes.push((j, k, w * rng.random_range(-1.0..1.0)));
            }
        }
        let amplitude = self.max_amplitude * rng.random_range(f64::EPSILON..=1.0);
        let l1: f64 = modes.iter().map(|m| m.2.abs()).sum();
        for m in &mut modes {
            m.2 *= amplitude / l1;
        }
        FieldSample { index, amplitude, modes }
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if 4 * self.max_mode > grid.nx().min(grid.ny()) {
            return Err(KsfError::param(
                "max_mode",
                format!("modes up to {} need at least {} cells per side", self.max_mode, 4 * self.max_mode),
            ));
        }
        Ok(())
    }
}

/// `∫e^{|v|} / exp(‖∇v‖₂²/(8π) + ‖v‖₁/|Ω|)`
pub fn trudinger_moser_ratio(v: &ScalarField) -> Result<f64> {
    let sup = grid::lp_norm(v, f64::INFINITY)?;
    if sup > TM_AMPLITUDE_CAP {
        return Err(KsfError::param("amplitude", format!("sup |v| = {sup} exceeds the cap {TM_AMPLITUDE_CAP}")));
    }
    let lhs = v.values().iter().map(|x| x.abs().exp()).sum::<f64>() * v.grid().cell_area();
    let grad = grid::w1p_seminorm(v, 2.0)?;
    let expo = grad * grad / (8.0 * std::f64::consts::PI) + grid::lp_norm(v, 1.0)? / v.grid().area();
    Ok(lhs / expo.exp())
}

/// Fitted Trudinger–Moser constant over `count` samples on `grid`.
pub fn trudinger_moser_check(sampler: &FieldSampler, grid: Grid2D, count: usize) -> Result<InequalityReport> {
    sampler.check_grid(&grid)?;
    let ratios: Vec<(f64, usize)> = (0..count)
        .into_par_iter()
        .map(|i| Ok((trudinger_moser_ratio(&sampler.sample(i).evaluate(grid))?, i)))
        .collect::<Result<_>>()?;
    let (worst, idx) = ratios.into_iter().fold((0.0, 0), |w, d| if d.0 > w.0 { d } else { w });
    Ok(InequalityReport {
        name: format!("trudinger_moser_{}x{}", grid.nx(), grid.ny()),
        samples: count,
        worst_ratio: worst,
        violated: false,
        witness: Some(sampler.sample(idx).describe()),
    })
}

fn vlogv_l1(v: &ScalarField) -> f64 {
    v.values()
        .iter()
        .map(|&x| if x == 0.0 { 0.0 } else { (x * x.abs().ln()).abs() })
        .sum::<f64>()
        * v.grid().cell_area()
}

/// Smallest `C` for which the Biler-type inequality holds on `v`:
/// `(‖v‖_p − ε‖∇v‖₂^{1−1/p}‖v log|v|‖₁^{1/p}) / (‖v log|v|‖₁ + ‖v‖₁^{1/p} + ‖v‖₁)`.
///
/// `None` when the bracket vanishes.
pub fn biler_ratio(v: &ScalarField, p: f64, eps: f64) -> Result<Option<f64>> {
    if !(p >= 2.0) {
        return Err(KsfError::param("p", format!("need p >= 2, got {p}")));
    }
    if !(eps > 0.0) {
        return Err(KsfError::param("eps", format!("need eps > 0, got {eps}")));
    }
    let vlogv = vlogv_l1(v);
    let l1 = grid::lp_norm(v, 1.0)?;
    let bracket = vlogv + l1.powf(1.0 / p) + l1;
    if bracket == 0.0 {
        return Ok(None);
    }
    let grad = grid::w1p_seminorm(v, 2.0)?;
    let first = eps * grad.powf(1.0 - 1.0 / p) * vlogv.powf(1.0 / p);
    Ok(Some((grid::lp_norm(v, p)? - first) / bracket))
}

/// Fitted Biler constant for one `(p, ε)` over `count` samples on `grid`.
pub fn biler_check(sampler: &FieldSampler, grid: Grid2D, p: f64, eps: f64, count: usize) -> Result<InequalityReport> {
    sampler.check_grid(&grid)?;
    let ratios: Vec<Option<(f64, usize)>> = (0..count)
        .into_par_iter()
        .map(|i| Ok(biler_ratio(&sampler.sample(i).evaluate(grid), p, eps)?.map(|r| (r, i))))
        .collect::<Result<_>>()?;
    let used = ratios.iter().flatten().count();
    let (worst, idx) = ratios
        .into_iter()
        .flatten()
        .fold((f64::NEG_INFINITY, 0), |w, d| if d.0 > w.0 { d } else { w });
    Ok(InequalityReport {
        name: format!("biler_p{p}_eps{eps}_{}x{}", grid.nx(), grid.ny()),
        samples: used,
        worst_ratio: worst.max(0.0),
        violated: false,
        witness: (used > 0).then(|| sampler.sample(idx).describe()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn young_examples() {
        let (l, r) = young_bound(1.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(l, 1.0);
        assert!((r - 1.0).abs() < 1e-15);
        let (l, r) = young_bound(0.0, 3.0, 0.2, 3.0).unwrap();
        assert!(l == 0.0 && r > 0.0);
        assert!(young_bound(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(young_bound(1.0, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn young_constant_is_sharp() {
        // equality at a^{p−1} = b/(εp)
        for &(eps, p, b) in &[(0.3f64, 3.0f64, 2.0f64), (2.0, 1.5, 0.7), (0.05, 7.0, 4.0)] {
            let a: f64 = (b / (eps * p)).powf(1.0 / (p - 1.0));
            let (l, r) = young_bound(a, b, eps, p).unwrap();
            assert!((l - r).abs() < 1e-12 * l, "{l} {r}");
        }
    }

    #[test]
    fn young_audit_is_clean() {
        let r = young_audit(2000, 5).unwrap();
        assert!(!r.violated && r.worst_ratio <= 1.0 + ROUNDOFF_SLACK, "{r:?}");
    }

    #[test]
    fn malpha_examples() {
        let m0 = malpha_bound(1.0, 2.0, 0.5).unwrap();
        assert!((m0 - 6.0).abs() < 1e-14);
        let m = malpha_fixed_point(1.0, 2.0, 0.5).unwrap();
        let exact = (1.0 + 2f64.sqrt()).powi(2);
        assert!((m - exact).abs() < 1e-12 * exact && m <= m0);
        assert!((malpha_bound(3.0, 1e-12, 0.4).unwrap() - 6.0).abs() < 1e-9);
        assert!(malpha_bound(1.0, 1.0, 1.0).is_err());
        assert!(malpha_bound(1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn malpha_root_closed_form_at_half(c1 in 1e-3f64..1e3, c2 in 1e-3f64..1e2) {
            // β = ½: √M = (C₂ + √(C₂² + 4C₁))/2
            let s = 0.5 * (c2 + (c2 * c2 + 4.0 * c1).sqrt());
            let m = malpha_fixed_point(c1, c2, 0.5).unwrap();
            prop_assert!((m - s * s).abs() <= 1e-12 * s * s);
            prop_assert!(m <= malpha_bound(c1, c2, 0.5).unwrap());
        }
    }

    #[test]
    fn malpha_audit_is_clean() {
        let r = malpha_audit(2000, 9).unwrap();
        assert!(!r.violated, "{r:?}");
    }

    #[test]
    fn sampler_is_grid_independent_and_seeded() {
        let s = FieldSampler::new(42, 8.0);
        assert_eq!(s.sample(3), s.sample(3));
        assert_ne!(s.sample(3), s.sample(4));
        let a = s.sample(7);
        let sum: f64 = a.modes.iter().map(|m| m.2.abs()).sum();
        assert!((sum - a.amplitude).abs() < 1e-12 * a.amplitude);
        let f = a.evaluate(Grid2D::unit_square(64).unwrap());
        assert!(grid::lp_norm(&f, f64::INFINITY).unwrap() <= a.amplitude * (1.0 + 1e-12));
        assert!(trudinger_moser_check(&s, Grid2D::unit_square(32).unwrap(), 1).is_err());
    }

    #[test]
    fn tm_constants_saturate() {
        let g = Grid2D::unit_square(16).unwrap();
        assert!((trudinger_moser_ratio(&ScalarField::zeros(g)).unwrap() - 1.0).abs() < 1e-15);
        for c in [0.5, 3.0, 20.0] {
            let r = trudinger_moser_ratio(&ScalarField::constant(g, c)).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "{c}: {r}");
        }
        assert!(trudinger_moser_ratio(&ScalarField::constant(g, 60.0)).is_err());
    }

    #[test]
    fn biler_constant_field() {
        let g = Grid2D::new(16, 16, 2.0, 1.5).unwrap();
        let area = g.area();
        for p in [2.0, 3.0, 4.0] {
            let r = biler_ratio(&ScalarField::constant(g, 1.0), p, 0.1).unwrap().unwrap();
            let expected = area.powf(1.0 / p) / (area.powf(1.0 / p) + area);
            assert!((r - expected).abs() < 1e-14 && r < 1.0);
        }
        assert_eq!(biler_ratio(&ScalarField::zeros(g), 2.0, 1.0).unwrap(), None);
        assert!(biler_ratio(&ScalarField::zeros(g), 1.5, 1.0).is_err());
    }

    #[test]
    fn fitted_constants_are_refinement_stable() {
        let s = FieldSampler::new(1, 8.0);
        let coarse = trudinger_moser_check(&s, Grid2D::unit_square(64).unwrap(), 40).unwrap();
        let fine = trudinger_moser_check(&s, Grid2D::unit_square(128).unwrap(), 40).unwrap();
        assert!((coarse.worst_ratio / fine.worst_ratio - 1.0).abs() < 0.2, "{coarse:?} {fine:?}");
        let coarse = biler_check(&s, Grid2D::unit_square(64).unwrap(), 3.0, 0.1, 40).unwrap();
        let fine = biler_check(&s, Grid2D::unit_square(128).unwrap(), 3.0, 0.1, 40).unwrap();
        assert!((coarse.worst_ratio / fine.worst_ratio - 1.0).abs() < 0.2, "{coarse:?} {fine:?}");
    }

    #[test]
    fn report_formats() {
        let r = InequalityReport { name: "x".into(), samples: 3, worst_ratio: 0.5, violated: false, witness: None };
        assert_eq!(r.csv_row(), "x,3,0.5,false");
        assert!(r.summary().contains("ok"));
    }
}
