use rayon::prelude::*;

use super::{add_scaled, dirichlet_map, time_steps};
use crate::diagnostics::{enforce_positivity, FieldStats, MonitorEvent, PositivityPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::fem::{assemble_lumped_mass, assemble_mass, assemble_stiffness_with, solve_cg, solve_exchange_pair, CsrMatrix, Mat2};
use crate::geometry::{Mesh, Point};
use crate::kinetics::{CellAverager, KineticsSet};

/// Three-field limit of the slow-exchange scaling:
/// `∂ₜcᵢ − div(Dᵢ⁰∇cᵢ) = M(Fᵢ) ∓ κ(c₁−c₂)H(c₃)` for `i = 1, 2` and the `c₃` equation of the
/// two-field system.
#[derive(Debug, Clone)]
pub struct VariantConfig {
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    /// Effective tensors of the three scalar cell problems.
    pub tensors: [Mat2; 3],
    pub kinetics: KineticsSet,
    pub kappa: f64,
    pub averager: Option<CellAverager>,
    pub positivity: PositivityPolicy,
    pub pos_tol: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl VariantConfig {
    pub fn new(dt: f64, t_end: f64, tensors: [Mat2; 3], kinetics: KineticsSet) -> Self {
        VariantConfig {
            dt,
            t_end,
            theta: 1.0,
            tensors,
            kinetics,
            kappa: 0.0,
            averager: None,
            positivity: PositivityPolicy::Monitor,
            pos_tol: 1e-10,
            solver_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantState {
    pub step: usize,
    pub t: f64,
    pub c: [Vec<f64>; 3],
}

impl VariantState {
    pub fn from_fns(mesh: &Mesh, init: [&dyn Fn(Point) -> f64; 3]) -> Result<Self> {
        let map = dirichlet_map(mesh)?;
        let c = init.map(|f| {
            mesh.nodes.iter().enumerate().map(|(k, &p)| if map.dof_of_node[k].is_some() { f(p) } else { 0.0 }).collect()
        });
        Ok(VariantState { step: 0, t: 0.0, c })
    }
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub trajectory: Trajectory,
    pub events: Vec<MonitorEvent>,
    pub final_state: VariantState,
    /// `‖c₁ − c₂‖_{L²}` per recorded time.
    pub gap: Vec<f64>,
}

/// IMEX stepping with the exchange implicit in the `(c₁, c₂)` pair, `H` lagged and the
/// exchange mass lumped so the coupling is diagonal per node.
pub fn macro_run_variant(
    mesh: &Mesh,
    cfg: &VariantConfig,
    init: VariantState,
    observer: &mut dyn FnMut(&VariantState) -> Result<()>,
) -> Result<VariantRun> {
    let n_steps = time_steps(cfg.dt, cfg.t_end)?;
    if !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {}", cfg.theta)));
    }
    let (dt, theta) = (cfg.dt, cfg.theta);
    let n = mesh.n_nodes();
    let mass = assemble_mass(mesh);
    let lumped = assemble_lumped_mass(mesh);
    let map = dirichlet_map(mesh)?;
    let k: Vec<CsrMatrix> = cfg.tensors.iter().map(|d| assemble_stiffness_with(mesh, &vec![*d; mesh.n_triangles()])).collect();
    let a1 = mass.linear_combination(1.0, &k[0], theta * dt);
    let a2 = mass.linear_combination(1.0, &k[1], theta * dt);
    let a3 = map.restrict_matrix(&mass.linear_combination(1.0, &k[2], theta * dt));

    let stats = |st: &VariantState| st.c.iter().map(|u| FieldStats::of(&mass, u)).collect::<Vec<_>>();
    let gap_of = |st: &VariantState| {
        let d: Vec<f64> = st.c[0].iter().zip(&st.c[1]).map(|(a, b)| a - b).collect();
        mass.quad_form(&d).max(0.0).sqrt()
    };
    let mut trajectory = Trajectory::new(&["c1", "c2", "c3"]);
    let mut events = Vec::new();
    let mut gap = Vec::new();
    let mut st = init;
    trajectory.push(st.t, stats(&st));
    gap.push(gap_of(&st));
    observer(&st)?;

    let kin = &cfg.kinetics;
    let avg = cfg.averager.as_ref();
    for _ in 0..n_steps {
        let src: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|a| {
                let s = [st.c[0][a], st.c[1][a], st.c[2][a]];
                Ok([
                    kin.cell_average_f(0, s, avg)?,
                    kin.cell_average_f(1, s, avg)?,
                    kin.cell_average_f(2, s, avg)? + cfg.kappa * kin.surface_average_g3(s, avg)?,
                ])
            })
            .collect::<Result<_>>()?;
        let field = |i: usize| src.iter().map(|v| v[i]).collect::<Vec<_>>();

        let xw: Vec<f64> = (0..n).map(|a| dt * cfg.kappa * kin.h(st.c[2][a]) * lumped[a]).collect();
        let mut rhs: Vec<Vec<f64>> = Vec::with_capacity(2);
        for i in 0..2 {
            let mut r = mass.mul_vec(&st.c[i]);
            add_scaled(&mut r, &mass.mul_vec(&field(i)), dt);
            if theta < 1.0 {
                add_scaled(&mut r, &k[i].mul_vec(&st.c[i]), -(1.0 - theta) * dt);
            }
            rhs.push(r);
        }
        let [c1, c2] = solve_exchange_pair(
            &a1,
            &a2,
            &CsrMatrix::from_diagonal(&xw),
            [&rhs[0], &rhs[1]],
            [&st.c[0], &st.c[1]],
            &map,
            cfg.solver_tol,
            cfg.max_iter,
        )?;

        let mut r3 = mass.mul_vec(&st.c[2]);
        add_scaled(&mut r3, &mass.mul_vec(&field(2)), dt);
        if theta < 1.0 {
            add_scaled(&mut r3, &k[2].mul_vec(&st.c[2]), -(1.0 - theta) * dt);
        }
        let (x3, _) =
            solve_cg(&a3, &map.restrict_vec(&r3), cfg.solver_tol, cfg.max_iter, Some(&map.gather(&st.c[2])))?;

        let step = st.step + 1;
        let t = step as f64 * dt;
        let mut c = [c1, c2, map.expand(&x3)];
        if c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(format!("non-finite state at t = {t}")));
        }
        for (u, name) in c.iter_mut().zip(["c1", "c2", "c3"]) {
            if let Some(e) = enforce_positivity(u, name, t, cfg.positivity, cfg.pos_tol)? {
                events.push(e);
            }
        }
        st = VariantState { step, t, c };
        trajectory.push(t, stats(&st));
        gap.push(gap_of(&st));
        observer(&st)?;
    }
    Ok(VariantRun { trajectory, events, final_state: st, gap })
}
