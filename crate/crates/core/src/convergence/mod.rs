//! ε-sweeps comparing micro and macro solutions, log-log rate fits and the tensor
//! self-consistency suite.

mod suite;

pub use suite::{tensor_suite, tensor_suite_mutated, TensorSuiteReport, TensorSuiteSpec};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell_problems::{effective_diffusion, tabulate_b, CellMesh, TableOptions};
use crate::error::{Error, Result};
use crate::fem::{CoefficientDescriptor, CoefficientField, CsrMatrix};
use crate::geometry::{build_epsilon_mesh, build_macro_mesh, EpsilonDomainSpec, InclusionSpec, Point, RectDomain};
use crate::kinetics::{parse_kinetics, CellAverager};
use crate::macro_solver::{macro_run_variant, Dispersion, MacroConfig, MacroSolver, VariantConfig, VariantState};
use crate::micro_solver::{MicroConfig, MicroSolver, Restriction, Scaling};

/// Initial profile on a rectangle-union domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant { value: f64 },
    /// `amplitude·sin(π(x−x₀)/Lx)·sin(π(y−y₀)/Ly)` over the bounding box.
    Mode { amplitude: f64 },
}

impl InitialData {
    pub fn to_fn(self, domain: &RectDomain) -> impl Fn(Point) -> f64 + Send + Sync {
        let lo = [
            domain.rects.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min),
            domain.rects.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min),
        ];
        let hi = [
            domain.rects.iter().map(|r| r[2]).fold(f64::NEG_INFINITY, f64::max),
            domain.rects.iter().map(|r| r[3]).fold(f64::NEG_INFINITY, f64::max),
        ];
        move |p: Point| match self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => value,
            InitialData::Mode { amplitude } => {
                amplitude * (PI * (p[0] - lo[0]) / (hi[0] - lo[0])).sin() * (PI * (p[1] - lo[1]) / (hi[1] - lo[1])).sin()
            }
        }
    }

    pub fn sup(self) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => value.abs(),
            InitialData::Mode { amplitude } => amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares slope of `log(error)` against `log(ε)`.
pub fn fit_rate(errors: &[f64], epsilons: &[f64]) -> Result<RateFit> {
    if errors.len() != epsilons.len() || errors.len() < 3 {
        return Err(Error::DegenerateData(format!("need at least 3 paired values, got {}", errors.len())));
    }
    if errors.iter().chain(epsilons).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateData("errors and epsilons must be positive and finite".into()));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("epsilons must not all be equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    Ok(RateFit { slope, residual: (rss / n).sqrt() })
}

fn default_points() -> usize {
    9
}

/// Everything needed to run one ε-sweep; serialized into the report fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepProblem {
    #[serde(default = "RectDomain::unit_square")]
    pub domain: RectDomain,
    pub inclusion: InclusionSpec,
    pub diffusion: [CoefficientDescriptor; 3],
    /// Kinetics in `parse_kinetics` syntax.
    pub kinetics: String,
    pub initial: [InitialData; 3],
    #[serde(default)]
    pub scaling: Scaling,
    pub epsilons: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    /// Reference cell edge length (unit-cell coordinates); the ε-mesh uses `ε·h_ref`.
    pub h_ref: f64,
    pub h_macro: f64,
    /// Upper end of the dispersion table.
    pub table_s_max: f64,
    #[serde(default = "default_points")]
    pub table_points: usize,
    #[serde(default)]
    pub table: TableOptions,
}

impl SweepProblem {
    pub fn fingerprint(&self, cell_fingerprint: &str) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("problem serializes"));
        h.update(cell_fingerprint.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Extreme nodal values over all fields and recorded times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBounds {
    pub micro_min: Vec<f64>,
    pub micro_max: Vec<f64>,
    pub macro_min: f64,
    pub macro_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    /// `c1`, `c2`, `c3`: `L²((0,T)×Ωε*)` distance to the restricted macro solution;
    /// `gamma_gap`: `‖c₁−c₂‖_{L²((0,T)×Γε)}`.
    pub errors: BTreeMap<String, Vec<f64>>,
    /// `None` when the fit is undefined (e.g. zero errors).
    pub rates: BTreeMap<String, Option<RateFit>>,
    /// Strict decrease along the ε list.
    pub monotone: BTreeMap<String, bool>,
    pub bounds: SweepBounds,
    pub nodes: Vec<usize>,
    pub positivity_events: Vec<usize>,
    pub fingerprint: String,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per ε.
    pub fn to_csv(&self) -> String {
        let keys: Vec<&String> = self.errors.keys().collect();
        let mut s = String::from("epsilon");
        for k in &keys {
            let _ = write!(s, ",err_{k}");
        }
        s.push_str(",min,max,nodes\n");
        for (i, eps) in self.epsilons.iter().enumerate() {
            let _ = write!(s, "{eps}");
            for k in &keys {
                let _ = write!(s, ",{}", self.errors[*k][i]);
            }
            let _ = writeln!(s, ",{},{},{}", self.bounds.micro_min[i], self.bounds.micro_max[i], self.nodes[i]);
        }
        s
    }
}

/// Macro reference fields at every time step: `[c₁, c₂, c₃]` compared against the micro
/// fields (for the two-field system `c₁ = c₂ = c`).
struct MacroReference {
    mesh: crate::geometry::Mesh,
    states: Vec<[Vec<f64>; 3]>,
    min: f64,
    max: f64,
}

fn macro_reference(p: &SweepProblem, cell: &CellMesh, d: &[CoefficientField; 3]) -> Result<MacroReference> {
    let kin = parse_kinetics(&p.kinetics)?;
    let mesh = build_macro_mesh(&p.domain, p.h_macro)?;
    let kappa = cell.gamma_length / cell.volume;
    let averager = Some(CellAverager::new(cell));
    let init: Vec<_> = p.initial.iter().map(|i| i.to_fn(&p.domain)).collect();
    let mut states = Vec::new();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |u: &[f64]| {
        for &v in u {
            min = min.min(v);
            max = max.max(v);
        }
    };
    match p.scaling {
        Scaling::FastExchange => {
            let n = p.table_points.max(2);
            let grid: Vec<f64> = (0..n).map(|i| p.table_s_max * i as f64 / (n - 1) as f64).collect();
            let h = kin.exchange.clone();
            let table = tabulate_b(cell, &d[0], &d[1], &move |s| h(s), &grid, &p.table)?;
            let d0 = effective_diffusion(cell, &d[2])?.matrix;
            let mut cfg = MacroConfig::new(p.dt, p.t_end, Dispersion::Table(table), d0, kin);
            cfg.kappa = kappa;
            cfg.averager = averager;
            cfg.lambda_macro = p.table_s_max;
            let solver = MacroSolver::new(&mesh, &cfg)?;
            let init = solver.initial_state(&init[0], &init[1], &init[2]);
            solver.run(init, &mut |st| {
                track(&st.c);
                track(&st.c3);
                states.push([st.c.clone(), st.c.clone(), st.c3.clone()]);
                Ok(())
            })?;
        }
        Scaling::AllEps => {
            let tensors = [
                effective_diffusion(cell, &d[0])?.matrix,
                effective_diffusion(cell, &d[1])?.matrix,
                effective_diffusion(cell, &d[2])?.matrix,
            ];
            let mut cfg = VariantConfig::new(p.dt, p.t_end, tensors, kin);
            cfg.kappa = kappa;
            cfg.averager = averager;
            let init = VariantState::from_fns(&mesh, [&init[0], &init[1], &init[2]])?;
            macro_run_variant(&mesh, &cfg, init, &mut |st| {
                st.c.iter().for_each(|u| track(u));
                states.push(st.c.clone());
                Ok(())
            })?;
        }
    }
    Ok(MacroReference { mesh, states, min, max })
}

struct MicroOutcome {
    err_sq: [f64; 3],
    gap_sq: f64,
    min: f64,
    max: f64,
    nodes: usize,
    events: usize,
}

fn micro_against_reference(
    p: &SweepProblem,
    eps: f64,
    cell: &CellMesh,
    d: &[CoefficientField; 3],
    reference: &MacroReference,
) -> Result<MicroOutcome> {
    let spec = EpsilonDomainSpec { domain: p.domain.clone(), epsilon: eps, inclusion: p.inclusion.clone() };
    let emesh = build_epsilon_mesh(&spec, eps * p.h_ref, usize::MAX)?;
    if emesh.reference_cell.fingerprint() != cell.fingerprint {
        return Err(Error::MeshMismatch(format!("ε = {eps}: tiled cell differs from the cell used for the tensors")));
    }
    let kin = parse_kinetics(&p.kinetics)?;
    let cfg = MicroConfig::new(p.dt, p.t_end, p.scaling, d.clone(), kin);
    let solver = MicroSolver::new(&emesh, &cfg)?;
    let restrict = Restriction::new(&reference.mesh, &emesh.mesh)?;
    let mass: &CsrMatrix = solver.mass();
    let init: Vec<_> = p.initial.iter().map(|i| i.to_fn(&p.domain)).collect();
    let mut err_sq = [0.0; 3];
    let mut prev: Option<[f64; 3]> = None;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let run = solver.run(solver.initial_state([&init[0], &init[1], &init[2]]), &mut |st| {
        let macro_state = reference
            .states
            .get(st.step)
            .ok_or_else(|| Error::InvalidConfig("macro reference has fewer steps than the micro run".into()))?;
        let now: [f64; 3] = std::array::from_fn(|i| {
            let r = restrict.apply(&macro_state[i]);
            let diff: Vec<f64> = st.c[i].iter().zip(&r).map(|(a, b)| a - b).collect();
            mass.quad_form(&diff).max(0.0)
        });
        if let Some(pr) = prev {
            for i in 0..3 {
                err_sq[i] += 0.5 * p.dt * (pr[i] + now[i]);
            }
        }
        prev = Some(now);
        for &v in st.c.iter().flatten() {
            min = min.min(v);
            max = max.max(v);
        }
        Ok(())
    })?;
    Ok(MicroOutcome {
        err_sq,
        gap_sq: run.gamma_gap_sq_integral,
        min,
        max,
        nodes: emesh.mesh.n_nodes(),
        events: run.events.len(),
    })
}

/// Runs the macro reference once and every micro run (concurrently), then compares them.
///
/// `budget_nodes` caps the total projected node count of all meshes.
pub fn run_sweep(p: &SweepProblem, budget_nodes: Option<usize>) -> Result<ConvergenceReport> {
    if p.epsilons.is_empty() {
        return Err(Error::InvalidConfig("epsilon list is empty".into()));
    }
    let cell = CellMesh::build(&p.inclusion, p.h_ref)?;
    let mut projected = 0usize;
    for &eps in &p.epsilons {
        EpsilonDomainSpec { domain: p.domain.clone(), epsilon: eps, inclusion: p.inclusion.clone() }.validate()?;
        let cells = (p.domain.area() / (eps * eps)).round() as usize;
        projected = projected.saturating_add(cell.mesh.n_nodes().saturating_mul(cells));
    }
    let macro_nodes = (p.domain.area() / (p.h_macro * p.h_macro)).ceil() as usize;
    projected = projected.saturating_add(macro_nodes);
    if let Some(cap) = budget_nodes {
        if projected > cap {
            return Err(Error::BudgetExceeded { projected, cap });
        }
    }
    let d: [CoefficientField; 3] = [
        CoefficientField::from_descriptor(&p.diffusion[0])?,
        CoefficientField::from_descriptor(&p.diffusion[1])?,
        CoefficientField::from_descriptor(&p.diffusion[2])?,
    ];
    let reference = macro_reference(p, &cell, &d)?;
    let outcomes: Vec<MicroOutcome> = p
        .epsilons
        .par_iter()
        .map(|&eps| micro_against_reference(p, eps, &cell, &d, &reference))
        .collect::<Result<_>>()?;

    let mut errors = BTreeMap::new();
    for (i, name) in ["c1", "c2", "c3"].iter().enumerate() {
        errors.insert(name.to_string(), outcomes.iter().map(|o| o.err_sq[i].sqrt()).collect::<Vec<_>>());
    }
    errors.insert("gamma_gap".into(), outcomes.iter().map(|o| o.gap_sq.sqrt()).collect());
    let rates = errors.iter().map(|(k, v)| (k.clone(), fit_rate(v, &p.epsilons).ok())).collect();
    let monotone = errors.iter().map(|(k, v)| (k.clone(), v.windows(2).all(|w| w[1] < w[0]))).collect();
    Ok(ConvergenceReport {
        epsilons: p.epsilons.clone(),
        errors,
        rates,
        monotone,
        bounds: SweepBounds {
            micro_min: outcomes.iter().map(|o| o.min).collect(),
            micro_max: outcomes.iter().map(|o| o.max).collect(),
            macro_min: reference.min,
            macro_max: reference.max,
        },
        nodes: outcomes.iter().map(|o| o.nodes).collect(),
        positivity_events: outcomes.iter().map(|o| o.events).collect(),
        fingerprint: p.fingerprint(&cell.fingerprint),
    })
}
