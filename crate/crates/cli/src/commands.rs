use serde::Serialize;
use serde_json::json;

use porohom::cell_problems::{effective_diffusion, effective_tensor_scalar, solve_scalar_cell, tabulate_b, CellMesh, TensorForm};
use porohom::convergence::{run_sweep, tensor_suite, TensorSuiteSpec};
use porohom::diagnostics::write_field;
use porohom::fem::{CoefficientField, Mat2};
use porohom::geometry::{build_epsilon_mesh, build_macro_mesh, write_mesh, EdgeMarker, EpsilonDomainSpec, Mesh, DEFAULT_NODE_CAP};
use porohom::kinetics::{parse_kinetics, validate, CellAverager, KineticsSet};
use porohom::macro_solver::{macro_run_variant, Dispersion, MacroConfig, MacroSolver, VariantConfig, VariantState};
use porohom::micro_solver::{MicroConfig, MicroSolver};
use porohom::{Error, Result};

use crate::config::{coefficient, missing, Geometry, MacroModel, RunConfig, SolverSection};

/// Files produced by a command, and whether its checks passed.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    /// Set when the command ran but reported failed checks: exit code and message.
    pub failure: Option<(i32, String)>,
}

impl Outcome {
    fn ok(files: Vec<(String, String)>) -> Self {
        Outcome { files, failure: None }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn field(d: &porohom::fem::CoefficientDescriptor) -> Result<CoefficientField> {
    CoefficientField::from_descriptor(d)
}

fn diffusions(cfg: &RunConfig) -> Result<[CoefficientField; 3]> {
    let c = &cfg.coefficients;
    Ok([field(coefficient(&c.d1, "d1")?)?, field(coefficient(&c.d2, "d2")?)?, field(coefficient(&c.d3, "d3")?)?])
}

fn check_macro_budget(g: &Geometry, budget: Option<usize>) -> Result<()> {
    if let Some(cap) = budget {
        let projected = (g.domain.area() / (g.h_macro * g.h_macro)).ceil() as usize;
        if projected > cap {
            return Err(Error::BudgetExceeded { projected, cap });
        }
    }
    Ok(())
}

fn mesh_summary(m: &Mesh) -> serde_json::Value {
    json!({
        "nodes": m.n_nodes(),
        "triangles": m.n_triangles(),
        "area": m.total_area(),
        "gamma_length": m.marker_length(EdgeMarker::Gamma),
        "gamma_loops": m.marker_loops(EdgeMarker::Gamma),
        "fingerprint": m.fingerprint(),
    })
}

pub fn run_validate(cfg: &RunConfig) -> Result<Outcome> {
    let kin = parse_kinetics(&cfg.kinetics)?;
    let report = validate(&kin, &cfg.validation);
    let mut problems: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} failed: worst {:e} > bound {:e} at {:?}", c.name, c.worst, c.bound, c.witness))
        .collect();
    let geometry = match &cfg.geometry {
        None => serde_json::Value::Null,
        Some(g) => match CellMesh::build(&g.inclusion, g.h) {
            Ok(cell) => json!({"ok": true, "cell": mesh_summary(&cell.mesh), "kappa": cell.gamma_length / cell.volume}),
            Err(e) => {
                problems.push(e.to_string());
                json!({"ok": false, "message": e.to_string()})
            }
        },
    };
    let steps = match &cfg.solver {
        None => serde_json::Value::Null,
        Some(s) => match MacroConfig::new(s.dt, s.t_end, Dispersion::Constant([[1.0, 0.0], [0.0, 1.0]]), [[1.0, 0.0], [0.0, 1.0]], KineticsSet::zero()).n_steps() {
            Ok(n) => json!(n),
            Err(e) => {
                problems.push(e.to_string());
                serde_json::Value::Null
            }
        },
    };
    let passed = problems.is_empty();
    let out = json!({"passed": passed, "kinetics": report, "geometry": geometry, "time_steps": steps});
    Ok(Outcome {
        files: vec![("validation.json".into(), to_json(&out))],
        failure: (!passed).then(|| (2, format!("validation failed:\n  {}", problems.join("\n  ")))),
    })
}

pub fn run_mesh(cfg: &RunConfig, budget: Option<usize>) -> Result<Outcome> {
    let g = cfg.geometry()?;
    let cell = CellMesh::build(&g.inclusion, g.h)?;
    check_macro_budget(g, budget)?;
    let macro_mesh = build_macro_mesh(&g.domain, g.h_macro)?;
    let mut summary = json!({"cell": mesh_summary(&cell.mesh), "macro": mesh_summary(&macro_mesh)});
    let mut files = vec![("cell.mesh".to_string(), write_mesh(&cell.mesh)), ("macro.mesh".to_string(), write_mesh(&macro_mesh))];
    if let Some(eps) = g.epsilon {
        let spec = EpsilonDomainSpec { domain: g.domain.clone(), epsilon: eps, inclusion: g.inclusion.clone() };
        let em = build_epsilon_mesh(&spec, eps * g.h, budget.unwrap_or(DEFAULT_NODE_CAP))?;
        summary["epsilon"] = mesh_summary(&em.mesh);
        summary["epsilon"]["cells"] = json!(em.cells.len());
        files.push(("epsilon.mesh".into(), write_mesh(&em.mesh)));
    }
    files.push(("mesh.json".into(), to_json(&summary)));
    Ok(Outcome::ok(files))
}

pub fn run_cell_tensor(cfg: &RunConfig) -> Result<Outcome> {
    let g = cfg.geometry()?;
    let cell = CellMesh::build(&g.inclusion, g.h)?;
    let d = field(coefficient(&cfg.coefficients.d, "d")?)?;
    let sol = solve_scalar_cell(&cell, &d)?;
    let energy = effective_tensor_scalar(&cell, &sol, &d, TensorForm::ScalarEnergy)?;
    let form = effective_tensor_scalar(&cell, &sol, &d, TensorForm::ScalarForm)?;
    let out = json!({
        "tensor": energy,
        "form_tensor": form,
        "volume": cell.volume,
        "gamma_length": cell.gamma_length,
        "kappa": cell.gamma_length / cell.volume,
        "nodes": cell.mesh.n_nodes(),
        "fingerprint": cell.fingerprint,
    });
    Ok(Outcome::ok(vec![("d0.json".into(), to_json(&out))]))
}

pub fn run_btable(cfg: &RunConfig) -> Result<Outcome> {
    let g = cfg.geometry()?;
    let cell = CellMesh::build(&g.inclusion, g.h)?;
    let d1 = field(coefficient(&cfg.coefficients.d1, "d1")?)?;
    let d2 = field(coefficient(&cfg.coefficients.d2, "d2")?)?;
    let kin = parse_kinetics(&cfg.kinetics)?;
    let h = kin.exchange.clone();
    let table = tabulate_b(&cell, &d1, &d2, &move |s| h(s), &cfg.table.grid()?, &cfg.table.options())?;
    let out = json!({"exchange": cfg.kinetics, "table": table, "fingerprint": cell.fingerprint});
    Ok(Outcome::ok(vec![("btable.json".into(), to_json(&out))]))
}

fn snapshot(files: &mut Vec<(String, String)>, name: &str, values: &[f64]) {
    files.push((format!("{name}.field"), write_field(name, values)));
}

pub fn run_macro(cfg: &RunConfig, budget: Option<usize>) -> Result<Outcome> {
    let g = cfg.geometry()?;
    let s = cfg.solver()?;
    check_macro_budget(g, budget)?;
    let kin = parse_kinetics(&cfg.kinetics)?;
    let init: Vec<_> = cfg.initial.iter().map(|i| i.to_fn(&g.domain)).collect();
    let mesh = build_macro_mesh(&g.domain, g.h_macro)?;
    if let MacroModel::ThreeField = s.model {
        return run_three_field(cfg, g, s, kin, &mesh, &init);
    }
    let (dispersion, d0, kappa, averager) = match &s.model {
        MacroModel::Forced { dispersion, d0 } => {
            (Dispersion::Constant(*dispersion), *d0, 0.0, None)
        }
        _ => {
            let cell = CellMesh::build(&g.inclusion, g.h)?;
            let d = diffusions(cfg)?;
            let h = kin.exchange.clone();
            let table = tabulate_b(&cell, &d[0], &d[1], &move |x| h(x), &cfg.table.grid()?, &cfg.table.options())?;
            let d0 = effective_diffusion(&cell, &d[2])?.matrix;
            (Dispersion::Table(table), d0, cell.gamma_length / cell.volume, Some(CellAverager::new(&cell)))
        }
    };
    let lambda = if matches!(dispersion, Dispersion::Table(_)) { cfg.table.s_max } else { 0.0 };
    let mut mc = MacroConfig::new(s.dt, s.t_end, dispersion, d0, kin);
    mc.theta = s.theta;
    mc.kappa = kappa;
    mc.averager = averager;
    mc.positivity = s.positivity;
    mc.pos_tol = s.pos_tol;
    mc.solver_tol = s.tol;
    mc.max_iter = s.max_iter;
    mc.lambda_macro = lambda;
    let solver = MacroSolver::new(&mesh, &mc)?;
    let run = solver.run(solver.initial_state(&init[0], &init[1], &init[2]), &mut |_| Ok(()))?;
    let summary = json!({
        "t_end": run.final_state.t,
        "steps": run.final_state.step,
        "nodes": mesh.n_nodes(),
        "d0": d0,
        "kappa": kappa,
        "min": [run.trajectory.min_of(0), run.trajectory.min_of(1)],
        "max": [run.trajectory.max_of(0), run.trajectory.max_of(1)],
        "events": run.events,
    });
    let mut files = vec![("trajectory.csv".into(), run.trajectory.to_csv()), ("summary.json".into(), to_json(&summary))];
    if cfg.output.fields {
        snapshot(&mut files, "c", &run.final_state.c);
        snapshot(&mut files, "c3", &run.final_state.c3);
    }
    Ok(Outcome::ok(files))
}

fn run_three_field(
    cfg: &RunConfig,
    g: &Geometry,
    s: &SolverSection,
    kin: KineticsSet,
    mesh: &Mesh,
    init: &[impl Fn(porohom::geometry::Point) -> f64],
) -> Result<Outcome> {
    let cell = CellMesh::build(&g.inclusion, g.h)?;
    let d = diffusions(cfg)?;
    let tensors: [Mat2; 3] =
        [effective_diffusion(&cell, &d[0])?.matrix, effective_diffusion(&cell, &d[1])?.matrix, effective_diffusion(&cell, &d[2])?.matrix];
    let mut vc = VariantConfig::new(s.dt, s.t_end, tensors, kin);
    vc.theta = s.theta;
    vc.kappa = cell.gamma_length / cell.volume;
    vc.averager = Some(CellAverager::new(&cell));
    vc.positivity = s.positivity;
    vc.pos_tol = s.pos_tol;
    vc.solver_tol = s.tol;
    vc.max_iter = s.max_iter;
    let start = VariantState::from_fns(mesh, [&init[0], &init[1], &init[2]])?;
    let run = macro_run_variant(mesh, &vc, start, &mut |_| Ok(()))?;
    let mut gap = String::from("t,norm_c1_minus_c2\n");
    for (t, v) in run.trajectory.times.iter().zip(&run.gap) {
        gap.push_str(&format!("{t},{v}\n"));
    }
    let summary = json!({
        "t_end": run.final_state.t,
        "steps": run.final_state.step,
        "nodes": mesh.n_nodes(),
        "tensors": tensors,
        "kappa": vc.kappa,
        "events": run.events,
    });
    let mut files =
        vec![("trajectory.csv".into(), run.trajectory.to_csv()), ("gap.csv".into(), gap), ("summary.json".into(), to_json(&summary))];
    if cfg.output.fields {
        for (i, u) in run.final_state.c.iter().enumerate() {
            snapshot(&mut files, &format!("c{}", i + 1), u);
        }
    }
    Ok(Outcome::ok(files))
}

pub fn run_micro(cfg: &RunConfig, budget: Option<usize>) -> Result<Outcome> {
    let g = cfg.geometry()?;
    let s = cfg.solver()?;
    let eps = g.epsilon.ok_or_else(|| missing("geometry.epsilon"))?;
    let spec = EpsilonDomainSpec { domain: g.domain.clone(), epsilon: eps, inclusion: g.inclusion.clone() };
    let emesh = build_epsilon_mesh(&spec, eps * g.h, budget.unwrap_or(DEFAULT_NODE_CAP))?;
    let mut mc = MicroConfig::new(s.dt, s.t_end, s.scaling, diffusions(cfg)?, parse_kinetics(&cfg.kinetics)?);
    mc.theta = s.theta;
    mc.positivity = s.positivity;
    mc.pos_tol = s.pos_tol;
    mc.solver_tol = s.tol;
    mc.max_iter = s.max_iter;
    let solver = MicroSolver::new(&emesh, &mc)?;
    let init: Vec<_> = cfg.initial.iter().map(|i| i.to_fn(&g.domain)).collect();
    let run = solver.run(solver.initial_state([&init[0], &init[1], &init[2]]), &mut |_| Ok(()))?;
    let summary = json!({
        "epsilon": eps,
        "scaling": s.scaling,
        "t_end": run.final_state.t,
        "steps": run.final_state.step,
        "nodes": emesh.mesh.n_nodes(),
        "cells": emesh.cells.len(),
        "exchange_stiffness": mc.exchange_stiffness(eps),
        "gamma_gap_sq_integral": run.gamma_gap_sq_integral,
        "h1_sq_integral": run.h1_sq_integral,
        "min": ([0, 1, 2].map(|k| run.trajectory.min_of(k))),
        "max": ([0, 1, 2].map(|k| run.trajectory.max_of(k))),
        "events": run.events,
        "fingerprint": emesh.mesh.fingerprint(),
    });
    let mut files = vec![
        ("trajectory.csv".into(), run.trajectory.to_csv()),
        ("gamma_gap.csv".into(), run.gamma_gap_csv()),
        ("summary.json".into(), to_json(&summary)),
    ];
    if cfg.output.fields {
        for (i, u) in run.final_state.c.iter().enumerate() {
            snapshot(&mut files, &format!("c{}", i + 1), u);
        }
    }
    Ok(Outcome::ok(files))
}

pub fn run_sweep_command(cfg: &RunConfig, budget: Option<usize>) -> Result<Outcome> {
    let p = cfg.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
    let report = run_sweep(p, budget)?;
    Ok(Outcome::ok(vec![("report.json".into(), report.to_json()), ("report.csv".into(), report.to_csv())]))
}

/// Fills in the default suite so the manifest records what was run.
pub fn resolve_suite(cfg: &mut RunConfig) {
    if cfg.suite.is_none() {
        cfg.suite = Some(TensorSuiteSpec::default_disc());
    }
}

pub fn run_tensor_suite(cfg: &RunConfig) -> Result<Outcome> {
    let spec = cfg.suite.as_ref().ok_or_else(|| missing("suite"))?;
    let report = tensor_suite(spec)?;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: worst {:e} > bound {:e}", c.name, c.worst, c.bound))
        .collect();
    Ok(Outcome {
        files: vec![("tensor_suite.json".into(), to_json(&report))],
        failure: (!report.passed).then(|| (3, format!("tensor suite failed:\n  {}", failed.join("\n  ")))),
    })
}
