//! Time stepping of the homogenized system on the macroscopic domain
//!
//! `2∂ₜc − div(B(c₃)∇c) = M(F₁) + M(F₂)` and `∂ₜc₃ − div(D⁰∇c₃) = M(F₃) + κ·M_Γ(G₃)`,
//! with `κ = |Γ|/|Y*|` and zero Dirichlet data, plus the three-field limit of the
//! slow-exchange scaling.

mod variant;

pub use variant::{macro_run_variant, VariantConfig, VariantRun, VariantState};

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cell_problems::BTable;
use crate::diagnostics::{enforce_positivity, FieldStats, MonitorEvent, PositivityPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness_with, solve_cg, sym_eigenvalues, CsrMatrix, DofMap, Mat2};
use crate::geometry::{EdgeMarker, Mesh, Point};
use crate::kinetics::{CellAverager, KineticsSet};

/// Values of `c₃` this far below the table start are read at the table start.
pub const TABLE_NEGATIVE_SLACK: f64 = 1e-8;

/// Dispersion tensor `B(s)`: tabulated, or a fixed matrix (for analytic checks).
#[derive(Debug, Clone, PartialEq)]
pub enum Dispersion {
    Table(BTable),
    Constant(Mat2),
}

impl Dispersion {
    pub fn eval(&self, s: f64) -> Result<Mat2> {
        match self {
            Dispersion::Constant(m) => Ok(*m),
            Dispersion::Table(t) => {
                let (lo, _) = t.s_range();
                let s = if s < lo && s >= lo - TABLE_NEGATIVE_SLACK { lo } else { s };
                t.eval(s)
            }
        }
    }

    /// Checks that `[0, lambda]` is covered.
    pub fn covers(&self, lambda: f64) -> Result<()> {
        match self {
            Dispersion::Constant(_) => Ok(()),
            Dispersion::Table(t) => {
                let (lo, hi) = t.s_range();
                if lo > 0.0 || hi < lambda {
                    return Err(Error::TableRange { s: if lo > 0.0 { 0.0 } else { lambda }, lo, hi });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MacroConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Implicitness of the diffusion terms (1 = backward Euler).
    pub theta: f64,
    pub dispersion: Dispersion,
    pub d0: Mat2,
    pub kinetics: KineticsSet,
    /// `|Γ|/|Y*|` from the discrete cell.
    pub kappa: f64,
    /// Cell quadrature for `y`-dependent kinetics.
    pub averager: Option<CellAverager>,
    pub positivity: PositivityPolicy,
    pub pos_tol: f64,
    /// Range of `c₃` the dispersion table must cover.
    pub lambda_macro: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl MacroConfig {
    pub fn new(dt: f64, t_end: f64, dispersion: Dispersion, d0: Mat2, kinetics: KineticsSet) -> Self {
        MacroConfig {
            dt,
            t_end,
            theta: 1.0,
            dispersion,
            d0,
            kinetics,
            kappa: 0.0,
            averager: None,
            positivity: PositivityPolicy::Monitor,
            pos_tol: 1e-10,
            lambda_macro: 0.0,
            solver_tol: 1e-10,
            max_iter: 20_000,
        }
    }

    pub fn n_steps(&self) -> Result<usize> {
        time_steps(self.dt, self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        self.n_steps()?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if sym_eigenvalues(&self.d0).0 <= 0.0 || self.d0[0][1] != self.d0[1][0] {
            return Err(Error::InvalidConfig("effective diffusion tensor must be symmetric positive definite".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidConfig("interface density must be nonnegative".into()));
        }
        self.dispersion.covers(self.lambda_macro)
    }
}

pub(crate) fn time_steps(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt and t_end must be positive, got dt = {dt}, t_end = {t_end}")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end || n < 1.0 {
        return Err(Error::InvalidConfig(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Nodal macroscopic fields at step `step` (time `step·dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub step: usize,
    pub t: f64,
    pub c: Vec<f64>,
    pub c3: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MacroRun {
    pub trajectory: Trajectory,
    pub events: Vec<MonitorEvent>,
    pub final_state: MacroState,
}

/// Matrices that stay fixed over a run.
pub struct MacroSolver<'a> {
    pub mesh: &'a Mesh,
    pub cfg: &'a MacroConfig,
    mass: CsrMatrix,
    map: DofMap,
    k_d0: CsrMatrix,
    c3_matrix: CsrMatrix,
}

pub(crate) fn dirichlet_map(mesh: &Mesh) -> Result<DofMap> {
    let outer = mesh.marker_nodes(EdgeMarker::Outer);
    if outer.is_empty() {
        return Err(Error::NoMarkedBoundary(EdgeMarker::Outer.label().into()));
    }
    Ok(DofMap::dirichlet_zero(mesh.n_nodes(), &outer))
}

impl<'a> MacroSolver<'a> {
    pub fn new(mesh: &'a Mesh, cfg: &'a MacroConfig) -> Result<Self> {
        cfg.validate()?;
        let mass = assemble_mass(mesh);
        let map = dirichlet_map(mesh)?;
        let k_d0 = assemble_stiffness_with(mesh, &vec![cfg.d0; mesh.n_triangles()]);
        let c3_matrix = map.restrict_matrix(&mass.linear_combination(1.0, &k_d0, cfg.theta * cfg.dt));
        Ok(MacroSolver { mesh, cfg, mass, map, k_d0, c3_matrix })
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `c = (c₁⁰ + c₂⁰)/2`, `c₃ = c₃⁰`, zero on the Dirichlet boundary.
    pub fn initial_state(&self, c1: &dyn Fn(Point) -> f64, c2: &dyn Fn(Point) -> f64, c3: &dyn Fn(Point) -> f64) -> MacroState {
        let zero = |k: usize, v: f64| if self.map.dof_of_node[k].is_some() { v } else { 0.0 };
        let nodes = &self.mesh.nodes;
        MacroState {
            step: 0,
            t: 0.0,
            c: nodes.iter().enumerate().map(|(k, &p)| zero(k, 0.5 * (c1(p) + c2(p)))).collect(),
            c3: nodes.iter().enumerate().map(|(k, &p)| zero(k, c3(p))).collect(),
        }
    }

    pub fn stats(&self, st: &MacroState) -> Vec<FieldStats> {
        vec![FieldStats::of(&self.mass, &st.c), FieldStats::of(&self.mass, &st.c3)]
    }

    /// Nodal values of the two homogenized sources.
    fn sources(&self, st: &MacroState) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = &self.cfg.kinetics;
        let pairs: Vec<(f64, f64)> = st
            .c
            .par_iter()
            .zip(&st.c3)
            .map(|(&c, &c3)| k.macro_sources(c, c3, self.cfg.kappa, self.cfg.averager.as_ref()))
            .collect::<Result<_>>()?;
        Ok(pairs.into_iter().unzip())
    }

    /// `B` per element at the element average of `c₃`.
    pub fn element_dispersion(&self, c3: &[f64]) -> Result<Vec<Mat2>> {
        (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let tri = self.mesh.triangles[t];
                self.cfg.dispersion.eval((c3[tri[0]] + c3[tri[1]] + c3[tri[2]]) / 3.0)
            })
            .collect()
    }

    fn solve(&self, a: &CsrMatrix, rhs: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let b = self.map.restrict_vec(rhs);
        let x0 = self.map.gather(guess);
        let (x, _) = solve_cg(a, &b, self.cfg.solver_tol, self.cfg.max_iter, Some(&x0))?;
        Ok(self.map.expand(&x))
    }

    /// One IMEX step: implicit diffusion with `B` lagged at `c₃ⁿ`, explicit reactions.
    pub fn step(&self, st: &MacroState) -> Result<(MacroState, Vec<MonitorEvent>)> {
        self.step_with_load(st, None)
    }

    fn step_with_load(&self, st: &MacroState, load: Option<(&[f64], &[f64])>) -> Result<(MacroState, Vec<MonitorEvent>)> {
        let (dt, theta) = (self.cfg.dt, self.cfg.theta);
        let (fc, f3) = self.sources(st)?;
        let kb = assemble_stiffness_with(self.mesh, &self.element_dispersion(&st.c3)?);

        let mut rhs_c: Vec<f64> = self.mass.mul_vec(&st.c).iter().map(|v| 2.0 * v).collect();
        let mf = self.mass.mul_vec(&fc);
        add_scaled(&mut rhs_c, &mf, dt);
        if theta < 1.0 {
            add_scaled(&mut rhs_c, &kb.mul_vec(&st.c), -(1.0 - theta) * dt);
        }
        let mut rhs_3 = self.mass.mul_vec(&st.c3);
        add_scaled(&mut rhs_3, &self.mass.mul_vec(&f3), dt);
        if theta < 1.0 {
            add_scaled(&mut rhs_3, &self.k_d0.mul_vec(&st.c3), -(1.0 - theta) * dt);
        }
        if let Some((lc, l3)) = load {
            add_scaled(&mut rhs_c, lc, dt);
            add_scaled(&mut rhs_3, l3, dt);
        }
        let a_c = self.map.restrict_matrix(&self.mass.linear_combination(2.0, &kb, theta * dt));
        let mut c = self.solve(&a_c, &rhs_c, &st.c)?;
        let mut c3 = self.solve(&self.c3_matrix, &rhs_3, &st.c3)?;

        let step = st.step + 1;
        let t = step as f64 * dt;
        let mut events = Vec::new();
        if c.iter().chain(&c3).any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(format!("non-finite state at t = {t}")));
        }
        for (u, name) in [(&mut c, "c"), (&mut c3, "c3")] {
            if let Some(e) = enforce_positivity(u, name, t, self.cfg.positivity, self.cfg.pos_tol)? {
                events.push(e);
            }
        }
        Ok((MacroState { step, t, c, c3 }, events))
    }

    /// Steps to `t_end`, calling `observer` on every state including the initial one.
    pub fn run(&self, init: MacroState, observer: &mut dyn FnMut(&MacroState) -> Result<()>) -> Result<MacroRun> {
        let n = self.cfg.n_steps()?;
        let mut trajectory = Trajectory::new(&["c", "c3"]);
        let mut events = Vec::new();
        let mut st = init;
        trajectory.push(st.t, self.stats(&st));
        observer(&st)?;
        for _ in 0..n {
            let (next, ev) = self.step(&st)?;
            st = next;
            events.extend(ev);
            trajectory.push(st.t, self.stats(&st));
            observer(&st)?;
        }
        Ok(MacroRun { trajectory, events, final_state: st })
    }
}

pub(crate) fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += s * b);
}

pub fn macro_step(mesh: &Mesh, cfg: &MacroConfig, st: &MacroState) -> Result<(MacroState, Vec<MonitorEvent>)> {
    MacroSolver::new(mesh, cfg)?.step(st)
}

pub fn macro_run(mesh: &Mesh, cfg: &MacroConfig, init: MacroState) -> Result<MacroRun> {
    MacroSolver::new(mesh, cfg)?.run(init, &mut |_| Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SteadyReport {
    pub l2_error_c: f64,
    pub l2_error_c3: f64,
    /// Relative residual of the stationary equation for `c`.
    pub residual_c: f64,
    pub steps: usize,
}

/// Manufactured stationary solution check.
///
/// `c₃* = sin(πx)sin(πy)` with its analytic source for the constant tensor `cfg.d0`; for
/// `c` the source is the discrete load `K_B c*` with `B` frozen at the stationary `c₃`, so
/// the recovered `c` must match the interpolant of `c*` up to solver tolerance. Kinetics
/// in `cfg` are ignored. Domain: `(0,1)²`-type meshes whose boundary is where `c₃*`
/// vanishes.
pub fn steady_sanity(mesh: &Mesh, cfg: &MacroConfig, c_star: &dyn Fn(Point) -> f64) -> Result<SteadyReport> {
    let mut cfg = cfg.clone();
    cfg.kinetics = KineticsSet::zero();
    let solver = MacroSolver::new(mesh, &cfg)?;
    let d = cfg.d0;
    let src3 = |p: Point| {
        let (sx, sy, cx, cy) = ((PI * p[0]).sin(), (PI * p[1]).sin(), (PI * p[0]).cos(), (PI * p[1]).cos());
        PI * PI * (d[0][0] + d[1][1]) * sx * sy - 2.0 * PI * PI * d[0][1] * cx * cy
    };
    let exact3 = |p: Point| (PI * p[0]).sin() * (PI * p[1]).sin();
    let f3: Vec<f64> = mesh.nodes.iter().map(|&p| src3(p)).collect();
    let load3 = solver.mass.mul_vec(&f3);
    let zeros = vec![0.0; mesh.n_nodes()];
    let mut st = MacroState { step: 0, t: 0.0, c: zeros.clone(), c3: zeros.clone() };
    let max_steps = 100_000;
    let converged = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        d <= 1e-13 * n.max(1e-300) || n == 0.0 && d == 0.0
    };
    let mut steps = 0;
    loop {
        let (next, _) = solver.step_with_load(&st, Some((&zeros, &load3)))?;
        steps += 1;
        let done = converged(&st.c3, &next.c3);
        st = next;
        if done || steps >= max_steps {
            break;
        }
    }
    let kb = assemble_stiffness_with(mesh, &solver.element_dispersion(&st.c3)?);
    let cs: Vec<f64> = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &p)| if solver.map.dof_of_node[k].is_some() { c_star(p) } else { 0.0 })
        .collect();
    let load_c = kb.mul_vec(&cs);
    loop {
        let (next, _) = solver.step_with_load(&st, Some((&load_c, &load3)))?;
        steps += 1;
        let done = converged(&st.c, &next.c) && converged(&st.c3, &next.c3);
        st = next;
        if done || steps >= max_steps {
            break;
        }
    }
    let err3: Vec<f64> = mesh.nodes.iter().zip(&st.c3).map(|(&p, v)| v - exact3(p)).collect();
    let errc: Vec<f64> = st.c.iter().zip(&cs).map(|(a, b)| a - b).collect();
    let a = solver.map.restrict_matrix(&kb);
    let b = solver.map.restrict_vec(&load_c);
    let x = solver.map.gather(&st.c);
    let r: f64 = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SteadyReport {
        l2_error_c: solver.mass.quad_form(&errc).max(0.0).sqrt(),
        l2_error_c3: solver.mass.quad_form(&err3).max(0.0).sqrt(),
        residual_c: if bn > 0.0 { r / bn } else { r },
        steps,
    })
}
