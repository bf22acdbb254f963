use serde::{Deserialize, Serialize};

use super::KineticsSet;
use crate::geometry::Point;

/// Sampling resolution of the hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationGrid {
    /// Points per concentration axis on `[−Λ, 2Λ]`.
    pub points_per_axis: usize,
    /// Cell samples per axis for `y`-dependent rates.
    pub y_points: usize,
    /// Largest acceptable constant in the sign and growth ratios.
    pub ratio_cap: f64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        ValidationGrid { points_per_axis: 13, y_points: 4, ratio_cap: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst sampled value of the checked quantity.
    pub worst: f64,
    /// Threshold the worst value is compared against.
    pub bound: f64,
    /// Arguments at which the worst value occurred.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kinetics: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the sample with the largest value.
struct Worst {
    value: f64,
    witness: Option<Vec<f64>>,
}

impl Worst {
    fn new() -> Self {
        Worst { value: f64::NEG_INFINITY, witness: None }
    }

    fn see(&mut self, v: f64, w: &[f64]) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.witness = Some(w.to_vec());
        }
    }

    /// Passes when the worst value is at most `bound`.
    fn finish(self, name: &str, bound: f64) -> CheckResult {
        let worst = if self.value == f64::NEG_INFINITY { 0.0 } else { self.value };
        CheckResult { name: name.into(), passed: worst <= bound, worst, bound, witness: self.witness }
    }
}

fn neg(x: f64) -> f64 {
    x.min(0.0)
}

/// Sampled checks of the structural hypotheses on the kinetics.
///
/// Passing is evidence, not proof: conditions are universally quantified and only sampled.
pub fn validate(k: &KineticsSet, grid: &ValidationGrid) -> ValidationReport {
    let c = k.constants;
    let lam = c.lambda;
    let n = grid.points_per_axis.max(2);
    let delta = 1e-6 * lam;
    let mut axis: Vec<f64> = (0..n).map(|i| -lam + 3.0 * lam * i as f64 / (n - 1) as f64).collect();
    axis.extend([-delta, 0.0, delta, lam]);
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    let ny = grid.y_points.max(1);
    let ys: Vec<Point> = if k.y_dependent.iter().any(|&d| d) {
        (0..ny * ny).map(|q| [((q % ny) as f64 + 0.5) / ny as f64, ((q / ny) as f64 + 0.5) / ny as f64]).collect()
    } else {
        vec![[0.0, 0.0]]
    };
    let mut triples: Vec<[f64; 3]> = Vec::with_capacity(axis.len().pow(3));
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                triples.push([a, b, c]);
            }
        }
    }
    let mut checks = Vec::new();

    // exchange rate on a 1D grid with far-field samples
    let mut h_samples = axis.clone();
    h_samples.extend([10.0 * lam, 100.0 * lam, 1e4 * lam, 1e8, -1e8]);
    let mut bounded = Worst::new();
    for &s in &h_samples {
        let h = k.h(s);
        bounded.see((-h).max(h - c.exchange_bound), &[s]);
    }
    checks.push(bounded.finish("exchange_bounded", 0.0));
    let mut zero = Worst::new();
    zero.see(k.h(0.0).abs(), &[0.0]);
    checks.push(zero.finish("exchange_vanishes_at_zero", 1e-14));
    let mut lip = Worst::new();
    let step = 1e-3 * lam;
    let fine: Vec<f64> = (0..=3000).map(|i| -lam + step * i as f64).chain(h_samples.iter().copied()).collect();
    for &s in &fine {
        let ds = step.max(1e-6 * s.abs());
        let slope = (k.h(s + ds) - k.h(s)).abs() / ds;
        lip.see(slope, &[s]);
    }
    checks.push(lip.finish("exchange_lipschitz", c.exchange_lipschitz * (1.0 + 1e-9) + 1e-12));

    let mut vz = Worst::new();
    let mut sz = Worst::new();
    for y in &ys {
        for i in 0..3 {
            vz.see(k.f(i, *y, [0.0; 3]).abs(), &[y[0], y[1]]);
        }
        sz.see(k.g3(*y, [0.0; 3]).abs(), &[y[0], y[1]]);
    }
    checks.push(vz.finish("volume_vanishes_at_zero", 1e-14));
    checks.push(sz.finish("surface_vanishes_at_zero", 1e-14));

    let mut vsign = Worst::new();
    let mut ssign = Worst::new();
    let mut vcap = Worst::new();
    let mut scap = Worst::new();
    let mut growth = Worst::new();
    for y in &ys {
        for s in &triples {
            let f = [k.f(0, *y, *s), k.f(1, *y, *s), k.f(2, *y, *s)];
            let g = k.g3(*y, *s);
            let w = [s[0], s[1], s[2], y[0], y[1]];
            let rhs: f64 = s.iter().map(|v| neg(*v).powi(2)).sum();
            let lhs: f64 = (0..3).map(|i| f[i] * neg(s[i])).sum();
            let glhs = g * neg(s[2]);
            if rhs > 0.0 {
                vsign.see(lhs / rhs, &w);
                ssign.see(glhs / rhs, &w);
            } else {
                vsign.see(if lhs > 0.0 { f64::INFINITY } else { 0.0 }, &w);
                ssign.see(if glhs > 0.0 { f64::INFINITY } else { 0.0 }, &w);
            }
            for i in 0..3 {
                if s[i] >= lam {
                    vcap.see(f[i] - c.growth * s[i] - 1e-12 * (1.0 + c.growth * s[i]), &w);
                }
            }
            if s[2] >= lam {
                scap.see(g - c.growth * s[2] - 1e-12 * (1.0 + c.growth * s[2]), &w);
            }
            let l1: f64 = s.iter().map(|v| v.abs()).sum();
            if l1 > 0.0 {
                let m = f.iter().map(|v| v.abs()).fold(g.abs(), f64::max);
                growth.see(m / l1, &w);
            }
        }
    }
    checks.push(vsign.finish("volume_sign_condition", grid.ratio_cap));
    checks.push(ssign.finish("surface_sign_condition", grid.ratio_cap));
    checks.push(vcap.finish("volume_growth_cap", 0.0));
    checks.push(scap.finish("surface_growth_cap", 0.0));
    checks.push(growth.finish("linear_growth", grid.ratio_cap));
    ValidationReport { kinetics: k.name.clone(), checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::parse_kinetics;
    use std::sync::Arc;

    #[test]
    fn builtins_pass() {
        for name in [
            "zero",
            "mm_triple",
            "mm_mixed",
            "langmuir:a=1,b=1",
            "mm_triple+langmuir:a=2,b=0.5",
            "mm_mixed:a0_amp=0.5,a_amp=0.3+langmuir",
            "mm_triple:lambda=3,a0=2",
        ] {
            let r = validate(&parse_kinetics(name).unwrap(), &ValidationGrid::default());
            assert!(r.passed(), "{name}: {:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
            assert_eq!(r.checks.len(), 10);
        }
    }

    #[test]
    fn unbounded_exchange_fails_with_witness() {
        let k = parse_kinetics("zero").unwrap().with_exchange(Arc::new(|s| s), 1.0, 1.0);
        let r = validate(&k, &ValidationGrid::default());
        let c = r.check("exchange_bounded").unwrap();
        assert!(!c.passed);
        assert!(c.witness.as_ref().unwrap()[0].abs() > 1.0);
    }

    #[test]
    fn violations_are_reported() {
        let mut k = parse_kinetics("zero").unwrap();
        // constant sink that keeps consuming an exhausted species
        k.volume[0] = Arc::new(|_, s: [f64; 3]| -1.0 + 0.0 * s[0]);
        let r = validate(&k, &ValidationGrid::default());
        assert!(!r.check("volume_vanishes_at_zero").unwrap().passed);
        assert!(!r.check("volume_sign_condition").unwrap().passed);
        let steep = parse_kinetics("zero").unwrap().with_exchange(Arc::new(|s: f64| (5.0 * s).clamp(0.0, 1.0)), 1.0, 1.0);
        assert!(!validate(&steep, &ValidationGrid::default()).check("exchange_lipschitz").unwrap().passed);
        let mut fast = parse_kinetics("zero").unwrap();
        fast.volume[2] = Arc::new(|_, s: [f64; 3]| 5.0 * s[2]);
        assert!(!validate(&fast, &ValidationGrid::default()).check("volume_growth_cap").unwrap().passed);
    }

    #[test]
    fn configurable_fixtures_fail() {
        let r = validate(&parse_kinetics("linear_exchange").unwrap(), &ValidationGrid::default());
        assert!(!r.check("exchange_bounded").unwrap().passed);
        assert!(r.check("exchange_lipschitz").unwrap().passed);
        let r = validate(&parse_kinetics("constant_source:value=-1").unwrap(), &ValidationGrid::default());
        assert!(!r.check("volume_sign_condition").unwrap().passed);
        assert!(validate(&parse_kinetics("constant_source:value=0.5,species=3").unwrap(), &ValidationGrid::default())
            .check("volume_vanishes_at_zero")
            .map_or(false, |c| !c.passed));
    }

    #[test]
    fn langmuir_shape() {
        let k = parse_kinetics("langmuir:a=1,b=1").unwrap();
        let s: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        for w in s.windows(3) {
            let (a, b, c) = (k.h(w[0]), k.h(w[1]), k.h(w[2]));
            assert!(b >= a);
            assert!(b >= 0.5 * (a + c) - 1e-15);
        }
    }
}
