use serde::{Deserialize, Serialize};

use crate::cell_problems::{
    effective_tensor_coupled, effective_tensor_scalar, max_diff, solve_coupled_cell, solve_coupled_cell_flipped,
    solve_scalar_cell, CellMesh, EffectiveTensor, TensorForm,
};
use crate::error::Result;
use crate::fem::{CoefficientDescriptor, CoefficientField, Mat2};
use crate::geometry::InclusionSpec;
use crate::kinetics::{parse_kinetics, CheckResult};

fn default_rates() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 10.0]
}

fn default_s() -> Vec<f64> {
    vec![0.0, 1.0, 10.0]
}

fn default_tol() -> f64 {
    1e-9
}

/// Geometry and coefficients for [`tensor_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSuiteSpec {
    pub inclusion: InclusionSpec,
    pub h: f64,
    /// Coefficient for the scalar effective diffusion.
    pub d: CoefficientDescriptor,
    pub d1: CoefficientDescriptor,
    pub d2: CoefficientDescriptor,
    /// Exchange law in `parse_kinetics` syntax.
    pub exchange: String,
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_s")]
    pub s_values: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl TensorSuiteSpec {
    pub fn default_disc() -> Self {
        let i = CoefficientDescriptor::Constant { matrix: [[1.0, 0.0], [0.0, 1.0]] };
        TensorSuiteSpec {
            inclusion: InclusionSpec::disc([0.5, 0.5], 0.25),
            h: 0.05,
            d: i.clone(),
            d1: i,
            d2: CoefficientDescriptor::Constant { matrix: [[2.0, 0.0], [0.0, 1.0]] },
            exchange: "langmuir:a=1,b=1".into(),
            rates: default_rates(),
            s_values: default_s(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSuiteReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub d0: Mat2,
    pub fingerprint: String,
}

fn check(name: &str, worst: f64, bound: f64) -> CheckResult {
    CheckResult { name: name.into(), passed: worst <= bound, worst, bound, witness: None }
}

fn add(a: &Mat2, b: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]], [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]]]
}

fn quad(m: &Mat2, x: [f64; 2]) -> f64 {
    x[0] * (m[0][0] * x[0] + m[0][1] * x[1]) + x[1] * (m[1][0] * x[0] + m[1][1] * x[1])
}

/// Runs the cell-problem invariants and reports each as a pass/fail check.
pub fn tensor_suite(spec: &TensorSuiteSpec) -> Result<TensorSuiteReport> {
    run(spec, false)
}

/// [`tensor_suite`] with the sign of the second coupled forcing flipped; used to show the
/// suite detects a broken weak form.
#[doc(hidden)]
pub fn tensor_suite_mutated(spec: &TensorSuiteSpec) -> Result<TensorSuiteReport> {
    run(spec, true)
}

fn run(spec: &TensorSuiteSpec, mutated: bool) -> Result<TensorSuiteReport> {
    let cell = CellMesh::build(&spec.inclusion, spec.h)?;
    let d = CoefficientField::from_descriptor(&spec.d)?;
    let d1 = CoefficientField::from_descriptor(&spec.d1)?;
    let d2 = CoefficientField::from_descriptor(&spec.d2)?;
    let h = parse_kinetics(&spec.exchange)?;
    let tol = spec.tol;
    let coupled = |a: &CoefficientField, b: &CoefficientField, rate: f64| -> Result<(EffectiveTensor, EffectiveTensor)> {
        let sol = if mutated { solve_coupled_cell_flipped(&cell, a, b, rate)? } else { solve_coupled_cell(&cell, a, b, rate)? };
        Ok((
            effective_tensor_coupled(&cell, &sol, a, b, TensorForm::CoupledForm)?,
            effective_tensor_coupled(&cell, &sol, a, b, TensorForm::CoupledEnergy)?,
        ))
    };
    let scalar = |c: &CoefficientField| -> Result<(EffectiveTensor, EffectiveTensor)> {
        let sol = solve_scalar_cell(&cell, c)?;
        Ok((
            effective_tensor_scalar(&cell, &sol, c, TensorForm::ScalarForm)?,
            effective_tensor_scalar(&cell, &sol, c, TensorForm::ScalarEnergy)?,
        ))
    };

    let mut checks = Vec::new();
    let (d0_form, d0) = scalar(&d)?;
    checks.push(check("scalar_form_equivalence", max_diff(&d0_form.matrix, &d0.matrix), tol));

    let mut tensors = vec![d0.clone()];
    let mut worst_coupled = 0.0f64;
    for &rate in &spec.rates {
        let (f, e) = coupled(&d1, &d2, rate)?;
        worst_coupled = worst_coupled.max(max_diff(&f.matrix, &e.matrix));
        tensors.push(e);
    }
    checks.push(check("coupled_form_equivalence", worst_coupled, tol));

    let mut b_s = Vec::new();
    for &s in &spec.s_values {
        b_s.push(coupled(&d1, &d2, h.h(s))?.1);
    }
    tensors.extend(b_s.iter().cloned());
    checks.push(check("symmetry", tensors.iter().map(|t| t.symmetry_error()).fold(0.0, f64::max), 1e-10));
    checks.push(check("positive_definite", -tensors.iter().map(|t| t.min_eig).fold(f64::INFINITY, f64::min), -f64::MIN_POSITIVE));

    let mean = cell.mean_coefficient(&d);
    let probes = [[1.0, 0.0], [0.0, 1.0], [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]];
    let excess = probes.iter().map(|&x| quad(&d0.matrix, x) - quad(&mean, x)).fold(f64::NEG_INFINITY, f64::max);
    checks.push(check("mean_bound", excess, 1e-12));

    let (_, d1_0) = scalar(&d1)?;
    let (_, d2_0) = scalar(&d2)?;
    let sum = add(&d1_0.matrix, &d2_0.matrix, 1.0);
    let b0 = coupled(&d1, &d2, 0.0)?.1;
    checks.push(check("decoupling", max_diff(&b0.matrix, &sum), tol));

    let mut collapse = 0.0f64;
    for &s in &spec.s_values {
        let b = coupled(&d, &d, h.h(s))?.1;
        collapse = collapse.max(max_diff(&b.matrix, &add(&d0.matrix, &d0.matrix, 1.0)));
    }
    checks.push(check("collapse", collapse, tol));

    let l = h.constants.exchange_bound;
    if l > 0.0 {
        let far = coupled(&d1, &d2, h.h(100.0 * (1.0 + l)))?.1;
        let limit = coupled(&d1, &d2, l)?.1;
        let scale = limit.matrix.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        checks.push(check("saturation", max_diff(&far.matrix, &limit.matrix) / scale, 0.02));
    }
    if spec.inclusion.is_empty() {
        checks.push(check("empty_cell_identity", max_diff(&d0.matrix, &mean), tol));
    }
    Ok(TensorSuiteReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
        d0: d0.matrix,
        fingerprint: cell.fingerprint.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> TensorSuiteSpec {
        TensorSuiteSpec { h: 0.1, ..TensorSuiteSpec::default_disc() }
    }

    #[test]
    fn default_suite_passes() {
        let r = tensor_suite(&coarse()).unwrap();
        assert!(r.passed, "{:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        assert_eq!(r.checks.len(), 8);
    }

    #[test]
    fn mutation_is_caught() {
        let r = tensor_suite_mutated(&coarse()).unwrap();
        assert!(!r.passed);
        assert!(!r.checks.iter().find(|c| c.name == "collapse").unwrap().passed);
    }

    #[test]
    fn empty_cell_gives_mean() {
        let spec = TensorSuiteSpec {
            inclusion: InclusionSpec::empty(),
            d: CoefficientDescriptor::Constant { matrix: [[2.0, 0.5], [0.5, 1.0]] },
            ..coarse()
        };
        let r = tensor_suite(&spec).unwrap();
        let c = r.checks.iter().find(|c| c.name == "empty_cell_identity").unwrap();
        assert!(c.passed && c.worst < 1e-12, "{c:?}");
    }
}
